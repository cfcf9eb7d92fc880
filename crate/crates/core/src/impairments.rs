//! Classical technical noise: polarization crosstalk, beat-frequency jitter,
//! servo oscillation sidebands and detection electronics.
//!
//! The lock loops themselves are not simulated, only their residuals. Every
//! impairment with zeroed parameters returns its input untouched.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::{self, stream};
use crate::timeseries::{FieldTracePair, PhotocurrentTrace};

pub const DEFAULT_JITTER_REVERSION: f64 = 10e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterMode {
    /// Phase-locked: narrowband residual frequency noise of a given linewidth.
    Locked,
    /// Free-running: bounded mean-reverting wander of the beat frequency.
    Unlocked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentConfig {
    /// Field-amplitude leak; the residual beat power at θ = 0 is ε² of the
    /// maximal beat.
    pub crosstalk_amplitude: f64,
    pub jitter_mode: JitterMode,
    /// Peak frequency excursion in unlocked mode, Hz.
    pub jitter_excursion: f64,
    /// Mean-reversion time of the unlocked wander, s.
    pub jitter_reversion_time: f64,
    /// Beat FWHM in locked mode, Hz.
    pub locked_linewidth: f64,
    pub servo_tone_freq: f64,
    /// Phase-modulation index of the servo oscillation, rad.
    pub servo_tone_index: f64,
    pub electronic_floor: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            crosstalk_amplitude: 0.0,
            jitter_mode: JitterMode::Locked,
            jitter_excursion: 0.0,
            jitter_reversion_time: DEFAULT_JITTER_REVERSION,
            locked_linewidth: 0.0,
            servo_tone_freq: 0.0,
            servo_tone_index: 0.0,
            electronic_floor: 0.0,
        }
    }
}

impl ImpairmentConfig {
    /// Crosstalk amplitude giving a residual beat `suppression_db` below
    /// the maximum.
    pub fn crosstalk_for_suppression(suppression_db: f64) -> f64 {
        10f64.powf(-suppression_db / 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.crosstalk_amplitude >= 0.0 && self.crosstalk_amplitude <= 1.0) {
            bad.push(format!("crosstalk amplitude must lie in [0, 1], got {}", self.crosstalk_amplitude));
        }
        for (name, v) in [
            ("jitter_excursion", self.jitter_excursion),
            ("locked_linewidth", self.locked_linewidth),
            ("servo_tone_freq", self.servo_tone_freq),
            ("servo_tone_index", self.servo_tone_index),
            ("electronic_floor", self.electronic_floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.jitter_reversion_time > 0.0) {
            bad.push("jitter_reversion_time must be > 0".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Symmetric lossless coupler `a' = a cosχ + i b sinχ`, `b' = b cosχ + i a sinχ`
/// with `sin 2χ = ε`. The leaked beat is in quadrature with the rotation beat,
/// so the two add in power.
pub fn apply_crosstalk(mut fields: FieldTracePair, epsilon: f64) -> Result<FieldTracePair> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!("crosstalk amplitude must lie in [0, 1], got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(fields);
    }
    let chi = 0.5 * epsilon.asin();
    let (s, c) = chi.sin_cos();
    let is = Complex64::new(0.0, s);
    for (a, b) in fields.env_1.iter_mut().zip(fields.env_2.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = x * c + y * is;
        *b = y * c + x * is;
    }
    Ok(fields)
}

fn apply_phase(fields: &mut FieldTracePair, phase: impl Iterator<Item = f64>) {
    for (z, ph) in fields.env_2.iter_mut().zip(phase) {
        *z *= Complex64::from_polar(1.0, ph);
    }
}

/// Phase of an Ornstein-Uhlenbeck frequency offset with stationary standard
/// deviation `sigma` Hz and correlation time `tau`, clamped at `±clamp`.
fn ou_phase(rng: &mut rand_chacha::ChaCha8Rng, n: usize, dt: f64, sigma: f64, tau: f64, clamp: f64) -> Vec<f64> {
    let rho = (-dt / tau).exp();
    let kick = sigma * (1.0 - rho * rho).sqrt();
    let z0: f64 = StandardNormal.sample(rng);
    let mut df = (sigma * z0).clamp(-clamp, clamp);
    let mut phi = 0.0;
    let two_pi_dt = 2.0 * std::f64::consts::PI * dt;
    let mut phases = Vec::with_capacity(n);
    for _ in 0..n {
        phases.push(phi);
        phi += two_pi_dt * df;
        let z: f64 = StandardNormal.sample(rng);
        df = (df * rho + kick * z).clamp(-clamp, clamp);
    }
    phases
}

/// Beat-frequency jitter acting on the phase of the second mode.
///
/// Locked: frequency noise with a low-frequency density `Δν/π` (a Lorentzian
/// core of FWHM `Δν`) rolled off above `Δν`, so the residual stays
/// narrowband. Unlocked: bounded OU wander with `σ = excursion/2`, clamped
/// at the excursion.
pub fn apply_frequency_jitter(
    mut fields: FieldTracePair,
    config: &ImpairmentConfig,
) -> Result<FieldTracePair> {
    let grid = fields.grid;
    let fs = grid.sample_rate;
    let dt = grid.dt();
    let n = fields.env_2.len();
    let mut rng = noise::stream_rng(grid.seed, stream::JITTER);
    let phases = match config.jitter_mode {
        JitterMode::Locked => {
            let lw = config.locked_linewidth;
            if lw == 0.0 {
                return Ok(fields);
            }
            // one-sided OU density 4σ²τ matches Δν/π at τ = 1/(2πΔν)
            let tau = 1.0 / (2.0 * std::f64::consts::PI * lw);
            let sigma = (lw / (4.0 * std::f64::consts::PI * tau)).sqrt();
            ou_phase(&mut rng, n, dt, sigma, tau, f64::INFINITY)
        }
        JitterMode::Unlocked => {
            let peak = config.jitter_excursion;
            if peak == 0.0 {
                return Ok(fields);
            }
            if peak >= fs / 4.0 {
                return Err(Error::Config(format!(
                    "jitter excursion {peak} Hz must stay below sample_rate/4 = {} Hz",
                    fs / 4.0
                )));
            }
            ou_phase(&mut rng, n, dt, 0.5 * peak, config.jitter_reversion_time, peak)
        }
    };
    apply_phase(&mut fields, phases.into_iter());
    Ok(fields)
}

/// Sinusoidal phase modulation of the beat at the servo frequency.
pub fn apply_servo_tone(mut fields: FieldTracePair, config: &ImpairmentConfig) -> Result<FieldTracePair> {
    let m = config.servo_tone_index;
    if m == 0.0 {
        return Ok(fields);
    }
    let fs = fields.grid.sample_rate;
    let f = config.servo_tone_freq;
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::Config(format!(
            "servo tone frequency {f} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    let w = 2.0 * std::f64::consts::PI * f / fs;
    let n = fields.env_2.len();
    apply_phase(&mut fields, (0..n).map(|k| m * (w * k as f64).sin()));
    Ok(fields)
}

/// White electronic noise with one-sided density `level x SNL`.
pub fn add_electronic_noise(mut trace: PhotocurrentTrace, level: f64) -> Result<PhotocurrentTrace> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::Config(format!("electronic noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(trace);
    }
    if trace.electronic_injected {
        return Err(Error::Config(
            "electronic noise was already injected at the detectors".into(),
        ));
    }
    let var = level * trace.snl_density * trace.grid.sample_rate / 2.0;
    let mut rng = noise::stream_rng(trace.grid.seed, stream::ELECTRONICS);
    let extra = noise::white_gaussian(&mut rng, trace.samples.len(), var.sqrt());
    for (s, e) in trace.samples.iter_mut().zip(extra) {
        *s += e;
    }
    trace.electronic_level = level;
    trace.electronic_injected = true;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sideband::HeterodyneOperatingPoint;
    use crate::timeseries::{coherent_fields, SimulationGrid};

    fn fields() -> FieldTracePair {
        let op = HeterodyneOperatingPoint { theta: 0.0, nu_beat: 1e6, power_1: 1e-3, power_2: 1e-3 };
        let grid = SimulationGrid { sample_rate: 16e6, num_samples: 1 << 12, seed: 5 };
        coherent_fields(&op, &grid).unwrap()
    }

    #[test]
    fn zeroed_impairments_are_identities() {
        let f = fields();
        let cfg = ImpairmentConfig::default();
        assert_eq!(apply_crosstalk(f.clone(), 0.0).unwrap(), f);
        assert_eq!(apply_frequency_jitter(f.clone(), &cfg).unwrap(), f);
        let unlocked = ImpairmentConfig { jitter_mode: JitterMode::Unlocked, ..cfg };
        assert_eq!(apply_frequency_jitter(f.clone(), &unlocked).unwrap(), f);
        assert_eq!(apply_servo_tone(f.clone(), &cfg).unwrap(), f);
        let t = PhotocurrentTrace::silent(f.grid, 1.0, 1e-20);
        assert_eq!(add_electronic_noise(t.clone(), 0.0).unwrap(), t);
    }

    #[test]
    fn crosstalk_conserves_power() {
        let f = fields();
        let e0 = f.total_energy();
        let g = apply_crosstalk(f, 0.01).unwrap();
        assert!((g.total_energy() / e0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suppression_conversion() {
        let eps = ImpairmentConfig::crosstalk_for_suppression(65.0);
        assert!((20.0 * eps.log10() + 65.0).abs() < 1e-12);
    }

    #[test]
    fn excessive_excursion_rejected() {
        let cfg = ImpairmentConfig {
            jitter_mode: JitterMode::Unlocked,
            jitter_excursion: 4e6,
            ..Default::default()
        };
        assert!(apply_frequency_jitter(fields(), &cfg).is_err());
    }

    #[test]
    fn double_electronics_rejected() {
        let t = PhotocurrentTrace::silent(fields().grid, 1.0, 1e-20);
        let t = add_electronic_noise(t, 0.05).unwrap();
        assert!(matches!(add_electronic_noise(t, 0.05), Err(Error::Config(_))));
    }

    #[test]
    fn servo_tone_above_nyquist_rejected() {
        let cfg = ImpairmentConfig { servo_tone_freq: 9e6, servo_tone_index: 0.1, ..Default::default() };
        assert!(apply_servo_tone(fields(), &cfg).is_err());
    }
}
