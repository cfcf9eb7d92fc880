//! Closed-form noise model of the heterodyne measurement.
//!
//! All spectra are one-sided and expressed relative to the shot-noise level
//! of the total detected power (1.0 = SNL). The twin-beam intensity
//! difference is squeezed over a Lorentzian of half-width `gamma`; the beat
//! term picks up the antisqueezed phase-difference noise, its mirror
//! ("image") band and the phase pedestal around the carrier.

use crate::error::{Error, Result};

/// Lowest dB value reported for a perfectly squeezed, noiseless floor.
pub const DB_FLOOR: f64 = -100.0;

pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpoNoiseModel {
    /// Cavity half-linewidth, Hz.
    pub gamma: f64,
    /// Raw intensity-difference noise at zero frequency, relative to SNL.
    pub s_raw_dc: f64,
    /// Overall detection efficiency.
    pub eta: f64,
    /// Pedestal strength at full beat contrast, SNL-relative · Hz².
    pub pedestal_diffusion: f64,
    /// Pedestal half-width, Hz.
    pub pedestal_linewidth: f64,
    /// Weight of the mirror-frequency band in the beat noise (1.0 = physical).
    pub image_band_coeff: f64,
    /// Additive electronic noise, relative to SNL.
    pub electronic_floor: f64,
}

impl OpoNoiseModel {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            bad.push(format!("gamma must be > 0 (got {})", self.gamma));
        }
        if !(self.s_raw_dc >= 0.0 && self.s_raw_dc.is_finite()) {
            bad.push(format!("s_raw_dc must be >= 0 (got {})", self.s_raw_dc));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            bad.push(format!("eta must lie in (0, 1] (got {})", self.eta));
        }
        for (name, v) in [
            ("pedestal_diffusion", self.pedestal_diffusion),
            ("image_band_coeff", self.image_band_coeff),
            ("electronic_floor", self.electronic_floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be >= 0 (got {v})"));
            }
        }
        if self.pedestal_diffusion > 0.0 && !(self.pedestal_linewidth > 0.0) {
            bad.push("pedestal_linewidth must be > 0 when a pedestal is configured".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// `s_raw_dc > 1` means the raw intensity difference is above shot noise.
    pub fn has_excess_noise(&self) -> bool {
        self.s_raw_dc > 1.0
    }

    /// Raw (pre-detection) intensity-difference spectrum.
    pub fn raw_squeezing(&self, omega: f64) -> f64 {
        let x = omega / self.gamma;
        1.0 - (1.0 - self.s_raw_dc) / (1.0 + x * x)
    }

    /// Raw antisqueezed phase-difference spectrum, the minimum-uncertainty
    /// partner of [`raw_squeezing`](Self::raw_squeezing).
    pub fn raw_antisqueezing(&self, omega: f64) -> f64 {
        let s = self.raw_squeezing(omega);
        if s > 0.0 {
            1.0 / s
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterodyneOperatingPoint {
    /// Polarization rotation angle, rad.
    pub theta: f64,
    /// Beat frequency, Hz.
    pub nu_beat: f64,
    /// Optical power of each twin beam, W.
    pub power_1: f64,
    pub power_2: f64,
}

impl HeterodyneOperatingPoint {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !self.theta.is_finite() {
            bad.push("theta must be finite".to_string());
        }
        if !(self.nu_beat > 0.0 && self.nu_beat.is_finite()) {
            bad.push(format!("nu_beat must be > 0 (got {})", self.nu_beat));
        }
        if !(self.power_1 > 0.0 && self.power_2 > 0.0) {
            bad.push("beam powers must be > 0".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power_1 + self.power_2
    }
}

/// Detected intensity-difference spectrum `1 - η(1 - s_raw)/(1 + (Ω/γ)²)`.
pub fn intensity_difference_spectrum(model: &OpoNoiseModel, omega: f64) -> f64 {
    let x = omega / model.gamma;
    1.0 - model.eta * (1.0 - model.s_raw_dc) / (1.0 + x * x)
}

/// Lorentzian phase pedestal at offset `delta` from the carrier, at full
/// beat contrast and before detection.
pub fn phase_pedestal_spectrum(model: &OpoNoiseModel, delta: f64) -> f64 {
    if model.pedestal_diffusion == 0.0 {
        return 0.0;
    }
    let w = model.pedestal_linewidth;
    model.pedestal_diffusion / (delta * delta + w * w)
}

/// Detected noise of the beat quadrature channel at analysis frequency `omega`.
///
/// The beat term `2 Re(a* b)` up-converts baseband fluctuations at
/// `|Ω - ν|` and at the mirror offset `Ω + ν`. Each offset contributes one
/// quarter of the amplitude-sum (vacuum) and phase-difference (antisqueezed
/// plus pedestal) spectra.
pub fn contamination_spectrum(model: &OpoNoiseModel, nu_beat: f64, omega: f64) -> f64 {
    let near = (omega - nu_beat).abs();
    let image = omega + nu_beat;
    let excess = |f: f64| 0.25 * (model.raw_antisqueezing(f) - 1.0) + phase_pedestal_spectrum(model, f);
    1.0 + model.eta * (excess(near) + model.image_band_coeff * excess(image))
}

/// Noise floor of the differenced photocurrent, SNL-relative:
/// `cos²2θ·S_int(Ω) + sin²2θ·S_contam(Ω) + electronics`.
pub fn heterodyne_noise_floor(
    model: &OpoNoiseModel,
    op: &HeterodyneOperatingPoint,
    omega: f64,
) -> f64 {
    let (s2, c2) = (2.0 * op.theta).sin_cos();
    c2 * c2 * intensity_difference_spectrum(model, omega)
        + s2 * s2 * contamination_spectrum(model, op.nu_beat, omega)
        + model.electronic_floor
}

/// Mean-square beat amplitude in the differenced optical power, W².
///
/// The beat term `sin2θ · 2 sqrt(P1 P2) cos(2π ν t)` has mean square
/// `2 P1 P2 sin²2θ`.
pub fn beat_carrier_power(op: &HeterodyneOperatingPoint) -> f64 {
    let s2 = (2.0 * op.theta).sin();
    2.0 * op.power_1 * op.power_2 * s2 * s2
}

/// Absolute-scale calibration: a fixed dB offset between electrical power
/// in the differenced photocurrent (W² of detected optical power) and dBm
/// on the analyzer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub dbm_offset: f64,
}

impl Calibration {
    /// Pins the maximal (θ = 45°) detected carrier at `anchor_dbm`.
    pub fn from_carrier_anchor(anchor_dbm: f64, power_1: f64, power_2: f64, eta: f64) -> Self {
        let p_max = 2.0 * power_1 * power_2 * eta * eta;
        Self {
            dbm_offset: anchor_dbm - 10.0 * p_max.log10(),
        }
    }

    pub fn to_dbm(&self, power: f64) -> f64 {
        if power > 0.0 {
            10.0 * power.log10() + self.dbm_offset
        } else {
            DB_FLOOR + self.dbm_offset
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionMode {
    Raw,
    ElectronicCorrected,
}

/// Analysis band for [`predicted_mnr`]: `[start, stop]` minus `exclusion`
/// Hz on either side of the beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub start: f64,
    pub stop: f64,
    pub exclusion: f64,
}

/// Band-averaged analytic noise floor in dB relative to SNL.
pub fn predicted_mnr(
    model: &OpoNoiseModel,
    op: &HeterodyneOperatingPoint,
    band: Band,
    mode: CorrectionMode,
) -> Result<f64> {
    const POINTS: usize = 4001;
    if !(band.stop > band.start) {
        return Err(Error::Config(format!(
            "empty band [{}, {}]",
            band.start, band.stop
        )));
    }
    let step = (band.stop - band.start) / (POINTS - 1) as f64;
    let (sum, count) = (0..POINTS)
        .map(|i| band.start + i as f64 * step)
        .filter(|f| (f - op.nu_beat).abs() > band.exclusion)
        .fold((0.0, 0usize), |(s, n), f| {
            (s + heterodyne_noise_floor(model, op, f), n + 1)
        });
    if count == 0 {
        return Err(Error::Config(
            "band is empty after excluding the carrier region".into(),
        ));
    }
    let mut floor = sum / count as f64;
    if mode == CorrectionMode::ElectronicCorrected {
        floor -= model.electronic_floor;
    }
    Ok(to_db(floor))
}
