//! Truncated two-mode Fock space.
//!
//! Mode `a` and mode `b` are the two orthogonally polarized twin-beam modes.
//! A polarizer behind a polarization rotation by `theta` sees
//!
//! ```text
//! c  = a cos(theta) + b sin(theta)
//! d' = b cos(theta) - a sin(theta)
//! ```
//!
//! and the differenced photocurrent is `c†c - d'†d' = cos 2θ (a†a - b†b) + sin 2θ (a†b + ab†)`.
//! `d'` is the conventional second port up to an overall sign; number
//! observables do not depend on that sign, and `theta = 0` is the identity.
//!
//! Every operation that would move amplitude above `n_max` fails with
//! [`Error::Truncation`] instead of silently dropping it.

mod oracle;
mod spec;

pub use oracle::{dense_oracle, ObservableSpec, DENSE_DIM_CAP};
pub use spec::parse_state_spec;

use num_complex::Complex64;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Pure state on the product space `{0..=n_max} x {0..=n_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeFockState {
    n_max: usize,
    // row-major: index = n_a * (n_max + 1) + n_b
    amps: Vec<Complex64>,
}

impl TwoModeFockState {
    /// Builds a normalized state from `((n_a, n_b), amplitude)` pairs. Repeated
    /// pairs are summed.
    pub fn from_amplitudes<I>(n_max: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), Complex64)>,
    {
        let dim = n_max + 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
        for ((na, nb), c) in terms {
            if na > n_max || nb > n_max {
                return Err(Error::Truncation(format!(
                    "occupation ({na},{nb}) exceeds n_max = {n_max}"
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidState(format!(
                    "non-finite amplitude at ({na},{nb})"
                )));
            }
            amps[na * dim + nb] += c;
        }
        let mut state = Self { n_max, amps };
        state.normalize()?;
        Ok(state)
    }

    /// Number state `|n_a, n_b>`.
    pub fn basis(n_max: usize, na: usize, nb: usize) -> Result<Self> {
        Self::from_amplitudes(n_max, [((na, nb), Complex64::new(1.0, 0.0))])
    }

    pub fn vacuum(n_max: usize) -> Self {
        let dim = n_max + 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n_max, amps }
    }

    fn normalize(&mut self) -> Result<()> {
        let norm2 = self.norm_sqr();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidState(
                "state has zero (or non-finite) norm".into(),
            ));
        }
        let inv = 1.0 / norm2.sqrt();
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    #[inline]
    pub(crate) fn index(&self, na: usize, nb: usize) -> usize {
        na * (self.n_max + 1) + nb
    }

    pub fn amplitude(&self, na: usize, nb: usize) -> Complex64 {
        if na > self.n_max || nb > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[self.index(na, nb)]
    }

    /// Flat amplitude vector in row-major `(n_a, n_b)` order.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Nonzero amplitudes with their occupation pairs.
    pub fn support(&self) -> impl Iterator<Item = ((usize, usize), Complex64)> + '_ {
        let dim = self.n_max + 1;
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(move |(i, a)| ((i / dim, i % dim), *a))
    }

    /// Probability of each total photon number `N = n_a + n_b`, indexed by `N`.
    pub fn total_number_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 2 * self.n_max + 1];
        for ((na, nb), a) in self.support() {
            p[na + nb] += a.norm_sqr();
        }
        p
    }

    /// Re-embeds the state in a space with a different truncation bound.
    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::from_amplitudes(n_max, self.support())
    }

    /// True when every amplitude sits on the diagonal `n_a == n_b`.
    pub fn is_twin(&self) -> bool {
        self.support().all(|((na, nb), _)| na == nb)
    }
}

/// Rotation of the polarization by `theta` radians (used verbatim, no reduction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationRotation {
    pub theta: f64,
}

impl PolarizationRotation {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidState(format!("rotation angle {theta} is not finite")));
        }
        Ok(Self { theta })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }
}

/// First and second moments of `c†c - d'†d'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    /// `<a† b>`
    pub beat_mean: Complex64,
}

/// Ideal twin-beam state `sum_n c_n |n, n>`, normalized.
pub fn make_twin_beam(coeffs: &[Complex64], n_max: usize) -> Result<TwoModeFockState> {
    if coeffs.len() > n_max + 1 {
        return Err(Error::Truncation(format!(
            "{} twin coefficients need n_max >= {}, got {n_max}",
            coeffs.len(),
            coeffs.len() - 1
        )));
    }
    if coeffs.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(Error::InvalidState(
            "twin-beam coefficients are all zero".into(),
        ));
    }
    TwoModeFockState::from_amplitudes(
        n_max,
        coeffs.iter().enumerate().map(|(n, c)| ((n, n), *c)),
    )
}

/// `(|n, n> + epsilon |n-1, n+1>) / norm`: a twin state with a one-photon
/// imbalance admixture. `n_max` is set to `n + 2`, the headroom the moment
/// evaluation needs.
pub fn imbalanced_twin_state(n: usize, epsilon: f64) -> Result<TwoModeFockState> {
    if n == 0 {
        return Err(Error::InvalidState(
            "n = 0 admits no |n-1, n+1> imbalance".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidState(format!(
            "imbalance amplitude must lie in (0, 1), got {epsilon}"
        )));
    }
    TwoModeFockState::from_amplitudes(
        n + 2,
        [
            ((n, n), Complex64::new(1.0, 0.0)),
            ((n - 1, n + 1), Complex64::new(epsilon, 0.0)),
        ],
    )
}

/// Schrödinger-picture `U(theta)|state>`, with `U = exp(theta (a†b - b†a))`.
///
/// `U` is block diagonal in total photon number, so each block `N` is rotated
/// independently. Blocks with `N > n_max` are not fully representable and are
/// rejected.
pub fn rotate_state(
    state: &TwoModeFockState,
    rotation: PolarizationRotation,
) -> Result<TwoModeFockState> {
    check_normalized(state)?;
    let n_max = state.n_max;
    let blocks = state.total_number_distribution();
    if let Some((n_tot, _)) = blocks
        .iter()
        .enumerate()
        .skip(n_max + 1)
        .find(|(_, p)| **p > 0.0)
    {
        return Err(Error::Truncation(format!(
            "rotation mixes total photon number {n_tot} beyond n_max = {n_max}; \
             need n_max >= {n_tot}"
        )));
    }

    let mut out = state.clone();
    for (n_tot, p) in blocks.iter().enumerate().take(n_max + 1) {
        if *p == 0.0 {
            continue;
        }
        let u = block_rotation(n_tot, rotation.theta);
        let size = n_tot + 1;
        let v: Vec<Complex64> = (0..size)
            .map(|k| state.amps[state.index(k, n_tot - k)])
            .collect();
        for j in 0..size {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..size {
                acc += v[k] * u[j * size + k];
            }
            let idx = out.index(j, n_tot - j);
            out.amps[idx] = acc;
        }
    }
    Ok(out)
}

/// `exp(theta K)` on the block spanned by `|k, N-k>`, `k = 0..=N`, where
/// `K = a†b - b†a` is real antisymmetric and tridiagonal. Row-major.
fn block_rotation(n_tot: usize, theta: f64) -> Vec<f64> {
    let size = n_tot + 1;
    let mut gen = vec![0.0; size * size];
    for k in 0..n_tot {
        // a†b |k, N-k> = sqrt((k+1)(N-k)) |k+1, N-k-1>
        let c = (((k + 1) * (n_tot - k)) as f64).sqrt();
        gen[(k + 1) * size + k] = c * theta;
        gen[k * size + (k + 1)] = -c * theta;
    }
    // scaling and squaring: ||theta K|| <= |theta| * N, bring below 1/2
    let bound = theta.abs() * n_tot as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while bound * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    for g in &mut gen {
        *g *= scale;
    }
    let mut result = identity(size);
    let mut term = identity(size);
    for order in 1..=24 {
        term = matmul(&term, &gen, size);
        let inv = 1.0 / order as f64;
        for t in &mut term {
            *t *= inv;
        }
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
        if term.iter().all(|t| t.abs() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, size);
    }
    result
}

fn identity(size: usize) -> Vec<f64> {
    let mut m = vec![0.0; size * size];
    for i in 0..size {
        m[i * size + i] = 1.0;
    }
    m
}

fn matmul(x: &[f64], y: &[f64], size: usize) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for i in 0..size {
        for k in 0..size {
            let xik = x[i * size + k];
            if xik == 0.0 {
                continue;
            }
            for j in 0..size {
                out[i * size + j] += xik * y[k * size + j];
            }
        }
    }
    out
}

fn check_normalized(state: &TwoModeFockState) -> Result<()> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > 1e3 * NORM_TOL {
        return Err(Error::InvalidState(format!(
            "state is not normalized (|psi|^2 = {n2})"
        )));
    }
    Ok(())
}

/// `<a† b>`. Zero for any state supported on the diagonal `n_a == n_b`.
pub fn beat_expectation(state: &TwoModeFockState) -> Complex64 {
    let n_max = state.n_max;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((na, nb), amp) in state.support() {
        if nb == 0 || na + 1 > n_max {
            continue;
        }
        let target = state.amplitude(na + 1, nb - 1);
        acc += target.conj() * amp * (((na + 1) * nb) as f64).sqrt();
    }
    acc
}

/// Applies `cos2θ·(a†a - b†b) + sin2θ·(a†b + ab†)` to the state vector.
fn apply_number_difference(state: &TwoModeFockState, theta: f64) -> Result<Vec<Complex64>> {
    let n_max = state.n_max;
    let (s2, c2) = (2.0 * theta).sin_cos();
    let mut out = vec![Complex64::new(0.0, 0.0); state.amps.len()];
    for ((na, nb), amp) in state.support() {
        out[state.index(na, nb)] += amp * (c2 * (na as f64 - nb as f64));
        // a†b
        if nb > 0 {
            if na + 1 > n_max {
                return Err(headroom_error(na, nb, n_max));
            }
            out[state.index(na + 1, nb - 1)] += amp * (s2 * (((na + 1) * nb) as f64).sqrt());
        }
        // a b†
        if na > 0 {
            if nb + 1 > n_max {
                return Err(headroom_error(na, nb, n_max));
            }
            out[state.index(na - 1, nb + 1)] += amp * (s2 * ((na * (nb + 1)) as f64).sqrt());
        }
    }
    Ok(out)
}

fn headroom_error(na: usize, nb: usize, n_max: usize) -> Error {
    Error::Truncation(format!(
        "beat operator on |{na},{nb}> leaves the space; need n_max >= {}, got {n_max}",
        na.max(nb) + 1
    ))
}

/// Clamps roundoff-level negative variances; rejects anything larger.
pub(crate) fn clamp_variance(variance: f64, second_moment: f64) -> Result<f64> {
    let tol = 1e-9 * second_moment.abs().max(1.0);
    if variance >= 0.0 {
        Ok(variance)
    } else if variance >= -tol {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "negative variance {variance:e} beyond tolerance {tol:e}"
        )))
    }
}

/// Mean and variance of the differenced photon number behind a rotation.
pub fn number_difference_moments(
    state: &TwoModeFockState,
    rotation: PolarizationRotation,
) -> Result<MomentReport> {
    check_normalized(state)?;
    let o_psi = apply_number_difference(state, rotation.theta)?;
    let mean: f64 = state
        .amps
        .iter()
        .zip(&o_psi)
        .map(|(p, q)| (p.conj() * q).re)
        .sum();
    let second: f64 = o_psi.iter().map(|q| q.norm_sqr()).sum();
    let variance = clamp_variance(second - mean * mean, second)?;
    Ok(MomentReport {
        mean,
        variance,
        beat_mean: beat_expectation(state),
    })
}

/// Scan step for [`min_detectable_angle`] before bisection.
pub const ANGLE_SCAN_STEP: f64 = 1e-5;

/// Smallest rotation at which the beat signal reaches unit SNR for the
/// imbalanced twin state `(|n,n> + ε|n-1,n+1>)/norm`.
///
/// Signal is the shift of the mean from its unrotated value; noise is the
/// standard deviation of the unrotated observable (the twin-beam floor).
/// The result tracks `1/(2 sqrt(n(n+1)))`.
pub fn min_detectable_angle(n: usize, epsilon: f64) -> Result<f64> {
    let state = imbalanced_twin_state(n, epsilon)?;
    let base = number_difference_moments(&state, PolarizationRotation { theta: 0.0 })?;
    let noise = base.variance.sqrt();
    if !(noise > 0.0) {
        return Err(Error::Numerical("unrotated floor has zero variance".into()));
    }
    let snr = |theta: f64| -> Result<f64> {
        let m = number_difference_moments(&state, PolarizationRotation { theta })?;
        Ok((m.mean - base.mean).abs() / noise)
    };

    let limit = std::f64::consts::FRAC_PI_4;
    let mut lo = 0.0;
    let mut hi = None;
    let mut k = 1u64;
    loop {
        let theta = k as f64 * ANGLE_SCAN_STEP;
        if theta > limit {
            break;
        }
        if snr(theta)? >= 1.0 {
            hi = Some(theta);
            break;
        }
        lo = theta;
        k += 1;
    }
    let mut hi = hi.ok_or_else(|| {
        Error::Numerical(format!(
            "unit SNR not reached below pi/4 for n = {n}, epsilon = {epsilon}"
        ))
    })?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if snr(mid)? >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
