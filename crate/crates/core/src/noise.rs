//! Seeded Gaussian noise sources.
//!
//! Every stochastic stage draws from its own ChaCha stream, keyed by the
//! run seed and a fixed stream id, so enabling one stage never perturbs the
//! random numbers another stage sees.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

/// Stream ids for the stochastic stages of one pipeline run.
pub mod stream {
    pub const INTENSITY_DIFFERENCE: u64 = 1;
    pub const AMPLITUDE_SUM: u64 = 2;
    pub const PHASE_DIFFERENCE: u64 = 3;
    pub const PHASE_SUM: u64 = 4;
    pub const DETECTOR_C: u64 = 5;
    pub const DETECTOR_D: u64 = 6;
    pub const ELECTRONICS: u64 = 7;
    pub const JITTER: u64 = 8;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; derives independent run seeds from one base seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn white_gaussian(rng: &mut ChaCha8Rng, n: usize, std_dev: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std_dev
        })
        .collect()
}

/// Real Gaussian process with one-sided PSD `psd(f)` (units²/Hz).
///
/// Unit white noise is shaped in the frequency domain by the amplitude
/// response `sqrt(psd(|f|) * fs / 2)` and transformed back. The filter is
/// even in frequency, so the output is real; circular convolution makes the
/// expected periodogram match `psd` exactly on the FFT grid.
pub fn shaped_gaussian<F>(rng: &mut ChaCha8Rng, n: usize, sample_rate: f64, psd: F) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let white = white_gaussian(rng, n, 1.0);
    let mut buf: Vec<Complex64> = white.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = sample_rate / n as f64;
    let scale = 1.0 / n as f64;
    for (k, z) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        let h = (psd(bin as f64 * df) * sample_rate / 2.0).max(0.0).sqrt();
        *z *= h * scale;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a = white_gaussian(&mut stream_rng(7, 1), 16, 1.0);
        let b = white_gaussian(&mut stream_rng(7, 1), 16, 1.0);
        let c = white_gaussian(&mut stream_rng(7, 2), 16, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
    }

    #[test]
    fn shaped_white_has_requested_variance() {
        let fs = 1e6;
        let level = 3e-6; // one-sided density
        let x = shaped_gaussian(&mut stream_rng(1, 1), 1 << 16, fs, |_| level);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let expected = level * fs / 2.0;
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }
}
