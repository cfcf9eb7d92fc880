//! Text form of two-mode states, used by the command line.
//!
//! ```text
//! spec    := term (('+' | '-') term)*
//! term    := [weight '*'] atom
//! weight  := complex | '(' complex ')'
//! atom    := 'ket:(' uint ',' uint ')'
//!          | 'twin:[' complex (',' complex)* ']'
//! complex := real | real 'i' | 'i' | real ('+' | '-') real 'i'
//! ```
//!
//! Whitespace is allowed between tokens. `twin:[c0,c1,...]` expands to
//! `sum_n c_n |n,n>`. The result is normalized; `n_max` defaults to the
//! largest occupation plus one (headroom for the beat operator).
//!
//! Examples: `twin:[1,1]`, `ket:(1,0) + i*ket:(0,1)`,
//! `0.5*twin:[1,0.2-0.1i] - (0.3+0.4i)*ket:(2,0)`.

use num_complex::Complex64;

use super::TwoModeFockState;
use crate::error::{Error, Result};

/// Largest occupation number accepted from text.
pub const MAX_SPEC_OCCUPATION: usize = 256;

pub fn parse_state_spec(text: &str, n_max: Option<usize>) -> Result<TwoModeFockState> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    let terms = p.spec()?;
    let max_occ = terms
        .iter()
        .map(|((a, b), _)| (*a).max(*b))
        .max()
        .unwrap_or(0);
    let n_max = n_max.unwrap_or(max_occ + 1);
    TwoModeFockState::from_amplitudes(n_max, terms)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

type Terms = Vec<((usize, usize), Complex64)>;

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.s[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn spec(&mut self) -> Result<Terms> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        if self.eat(b'-') {
            sign = -1.0;
        } else {
            self.eat(b'+');
        }
        loop {
            self.term(sign, &mut out)?;
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(_) => return self.err("expected '+', '-' or end of input"),
            }
        }
        Ok(out)
    }

    fn term(&mut self, sign: f64, out: &mut Terms) -> Result<()> {
        let weight = match self.peek() {
            Some(b'k') | Some(b't') => Complex64::new(1.0, 0.0),
            Some(b'(') => {
                self.pos += 1;
                let w = self.complex()?;
                self.expect(b')')?;
                self.expect(b'*')?;
                w
            }
            Some(_) => {
                let w = self.complex()?;
                self.expect(b'*')?;
                w
            }
            None => return self.err("expected a term"),
        } * sign;

        if self.keyword("ket:") {
            self.expect(b'(')?;
            let na = self.uint()?;
            self.expect(b',')?;
            let nb = self.uint()?;
            self.expect(b')')?;
            out.push(((na, nb), weight));
        } else if self.keyword("twin:") {
            self.expect(b'[')?;
            let mut n = 0;
            loop {
                let c = self.complex()?;
                if n > MAX_SPEC_OCCUPATION {
                    return self.err("twin list longer than the occupation limit");
                }
                out.push(((n, n), weight * c));
                n += 1;
                if !self.eat(b',') {
                    break;
                }
            }
            self.expect(b']')?;
        } else {
            return self.err("expected 'ket:' or 'twin:'");
        }
        Ok(())
    }

    fn uint(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an occupation number");
        }
        let txt = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        match txt.parse::<usize>() {
            Ok(v) if v <= MAX_SPEC_OCCUPATION => Ok(v),
            _ => self.err(format!(
                "occupation must be at most {MAX_SPEC_OCCUPATION}"
            )),
        }
    }

    /// Unsigned decimal literal (digits, optional fraction, optional exponent).
    fn real_literal(&mut self) -> Option<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.s;
        let mut i = self.pos;
        let digits = |i: &mut usize| {
            let st = *i;
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > st
        };
        let mut any = digits(&mut i);
        if i < s.len() && s[i] == b'.' {
            i += 1;
            any |= digits(&mut i);
        }
        if !any {
            return None;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            }
        }
        let v = std::str::from_utf8(&s[start..i]).ok()?.parse::<f64>().ok()?;
        self.pos = i;
        v.is_finite().then_some(v)
    }

    /// Returns the value and whether it carried an `i` suffix.
    fn signed_part(&mut self) -> Result<(Complex64, bool)> {
        let mut sign = 1.0;
        if self.eat(b'-') {
            sign = -1.0;
        } else {
            self.eat(b'+');
        }
        let mag = self.real_literal();
        let imag = self.eat(b'i');
        match (mag, imag) {
            (Some(v), false) => Ok((Complex64::new(sign * v, 0.0), false)),
            (Some(v), true) => Ok((Complex64::new(0.0, sign * v), true)),
            (None, true) => Ok((Complex64::new(0.0, sign), true)),
            (None, false) => self.err("expected a number"),
        }
    }

    fn complex(&mut self) -> Result<Complex64> {
        let (first, first_imag) = self.signed_part()?;
        // `a+bi` form: a real part directly followed by an imaginary part
        if !first_imag && matches!(self.peek(), Some(b'+') | Some(b'-')) {
            let save = self.pos;
            match self.signed_part() {
                Ok((second, true)) => return Ok(first + second),
                _ => self.pos = save,
            }
        }
        Ok(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_twin_and_kets() {
        let s = parse_state_spec("twin:[1,1]", None).unwrap();
        assert_eq!(s.n_max(), 2);
        assert!((s.amplitude(1, 1).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let s = parse_state_spec(" ket:(1,0) + i*ket:(0,1) ", Some(3)).unwrap();
        assert_eq!(s.n_max(), 3);
        assert!((s.amplitude(0, 1).im - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn weighted_sums_and_complex_literals() {
        let s = parse_state_spec("0.5*twin:[1,0.2-0.1i] - (0.3+0.4i)*ket:(2,0)", None).unwrap();
        let raw = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, -0.05),
            Complex64::new(-0.3, -0.4),
        ];
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((s.amplitude(1, 1) - raw[1] / norm).norm() < 1e-14);
        assert!((s.amplitude(2, 0) - raw[2] / norm).norm() < 1e-14);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "ket:(1)", "twin:[]", "ket:(1,0) ket:(0,1)", "2*", "bra:(0,0)", "twin:[0]", "ket:(999,0)"] {
            assert!(parse_state_spec(bad, None).is_err(), "{bad:?}");
        }
    }
}
