//! Raw photocurrent dump.
//!
//! Layout, byte-exact:
//!
//! ```text
//! offset 0..64   ASCII header: "HPTRACE 1 <sample_rate> <count>"
//!                fields separated by one 0x20; sample_rate in Rust's
//!                shortest round-trip `f64` Display form; count in decimal;
//!                padded with 0x20 up to byte 62; byte 63 is 0x0A
//! offset 64..    count little-endian IEEE-754 binary64 samples
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &str = "HPTRACE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceDump {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

pub fn encode_header(sample_rate: f64, count: usize) -> Result<[u8; HEADER_LEN]> {
    let text = format!("{MAGIC} {VERSION} {sample_rate} {count}");
    if text.len() > HEADER_LEN - 1 {
        return Err(Error::Format("trace header does not fit in 64 bytes".into()));
    }
    let mut header = [b' '; HEADER_LEN];
    header[..text.len()].copy_from_slice(text.as_bytes());
    header[HEADER_LEN - 1] = b'\n';
    Ok(header)
}

pub fn write_trace<W: Write>(mut out: W, sample_rate: f64, samples: &[f64]) -> std::io::Result<()> {
    let header = encode_header(sample_rate, samples.len())
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

/// Parses the header, returning `(sample_rate, count)`.
pub fn decode_header(header: &[u8]) -> Result<(f64, usize)> {
    if header.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "trace header needs {HEADER_LEN} bytes, got {}",
            header.len()
        )));
    }
    if header[HEADER_LEN - 1] != b'\n' {
        return Err(Error::Format("trace header must end with a newline".into()));
    }
    let text = std::str::from_utf8(&header[..HEADER_LEN - 1])
        .map_err(|_| Error::Format("trace header is not ASCII".into()))?;
    let body = text.trim_end_matches(' ');
    let fields: Vec<&str> = body.split(' ').collect();
    let [magic, version, rate, count] = fields.as_slice() else {
        return Err(Error::Format(format!("expected 4 header fields, got {}", fields.len())));
    };
    if *magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    if version.parse::<u32>().ok() != Some(VERSION) {
        return Err(Error::Format(format!("unsupported version {version:?}")));
    }
    let sample_rate: f64 = rate
        .parse()
        .map_err(|_| Error::Format(format!("bad sample rate {rate:?}")))?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Format(format!("sample rate must be positive, got {sample_rate}")));
    }
    let count: usize = count
        .parse()
        .map_err(|_| Error::Format(format!("bad sample count {count:?}")))?;
    Ok((sample_rate, count))
}

pub fn decode_trace(bytes: &[u8]) -> Result<TraceDump> {
    let (sample_rate, count) = decode_header(bytes)?;
    let body = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(8)
        .ok_or_else(|| Error::Format("sample count overflows".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "header announces {count} samples ({expected} bytes), body has {} bytes",
            body.len()
        )));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(TraceDump { sample_rate, samples })
}

pub fn read_trace<R: Read>(mut input: R) -> Result<TraceDump> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("read failed: {e}")))?;
    decode_trace(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_byte_exact() {
        let h = encode_header(64e6, 2097152).unwrap();
        let expected = b"HPTRACE 1 64000000 2097152";
        assert_eq!(&h[..expected.len()], expected);
        assert!(h[expected.len()..63].iter().all(|b| *b == b' '));
        assert_eq!(h[63], b'\n');
    }

    #[test]
    fn rejects_truncated_and_mislabelled() {
        let mut bytes = Vec::new();
        write_trace(&mut bytes, 1e6, &[1.0, 2.0]).unwrap();
        assert!(decode_trace(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_trace(&bad).is_err());
        assert!(decode_trace(&bytes[..10]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rate in 1.0f64..1e12, samples in proptest::collection::vec(-1e3f64..1e3, 0..64)) {
            let mut bytes = Vec::new();
            write_trace(&mut bytes, rate, &samples).unwrap();
            prop_assert_eq!(bytes.len(), HEADER_LEN + 8 * samples.len());
            let back = decode_trace(&bytes).unwrap();
            prop_assert_eq!(back.sample_rate, rate);
            prop_assert_eq!(back.samples, samples);
        }
    }
}
