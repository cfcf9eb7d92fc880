//! Scenario runs: configuration, built-in presets, single runs, θ sweeps and
//! artifact output.

mod config;
mod output;

pub use config::{
    constraint_violations, correction_name, parse_config, to_text, AnalysisConfig, RunMode, ScenarioConfig,
    DEFAULT_NUM_SAMPLES, DEFAULT_SAMPLE_RATE, DEFAULT_SEED, KEYS, REQUIRED_KEYS,
};
pub use output::{
    emit_csv, emit_summary, emit_sweep_summary, parse_spectra_csv, parse_sweep_csv, spectra_csv, sweep_csv,
    SpectraRow, SweepRow, SPECTRA_HEADER, SWEEP_HEADER,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::PolarizationRotation;
use crate::impairments::{self, add_electronic_noise, JitterMode};
use crate::noise::derive_seed;
use crate::sideband::{heterodyne_noise_floor, Calibration, CorrectionMode, OpoNoiseModel};
use crate::spectral::{
    analyze, extract_mnr, extract_noise_floor, shot_noise_reference, tone_power, FloorExclusions,
    SpectrumEstimate,
};
use crate::timeseries::{
    apply_polarization_rotation, detect_photocurrents, difference_current, photon_energy, shot_noise_density,
    synthesize_twin_fields, DetectorConfig, PhotocurrentTrace, DEFAULT_WAVELENGTH,
};

pub const PRESET_NAMES: [&str; 3] = ["fig2a", "fig2b", "fig2c"];

/// Preset file text, as shipped in `presets/`.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "fig2a" => Some(include_str!("../../presets/fig2a.conf")),
        "fig2b" => Some(include_str!("../../presets/fig2b.conf")),
        "fig2c" => Some(include_str!("../../presets/fig2c.conf")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", ")))
    })?;
    parse_config(text)
}

/// Metrics of one run on the SNL-relative scale, where the SNL trace
/// (which carries the electronics) sits at `snl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub floor_linear: f64,
    pub floor_db: f64,
    pub electronic_linear: f64,
    pub snl_linear: f64,
    pub mnr_raw_db: f64,
    pub mnr_corrected_db: f64,
    /// Detected beat power, W².
    pub beat_power: f64,
    pub beat_dbm: f64,
    pub beat_freq: f64,
}

impl Metrics {
    pub fn mnr_db(&self, mode: CorrectionMode) -> f64 {
        match mode {
            CorrectionMode::Raw => self.mnr_raw_db,
            CorrectionMode::ElectronicCorrected => self.mnr_corrected_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub signal: SpectrumEstimate,
    pub snl: SpectrumEstimate,
    pub electronics: SpectrumEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub analytic: Option<Metrics>,
    pub analytic_curve: Option<SpectrumEstimate>,
    pub simulated: Option<Metrics>,
    pub traces: Option<TraceSet>,
    /// Simulated minus analytic raw floor, dB (`both` mode).
    pub floor_delta_db: Option<f64>,
}

impl ScenarioResult {
    /// Simulated metrics when available, analytic otherwise.
    pub fn primary(&self) -> Option<&Metrics> {
        self.simulated.as_ref().or(self.analytic.as_ref())
    }

    /// Spectra in emission order, tagged with their trace ids.
    pub fn spectra(&self) -> Vec<(&'static str, &SpectrumEstimate)> {
        let mut out = Vec::new();
        if let Some(c) = &self.analytic_curve {
            out.push(("analytic", c));
        }
        if let Some(t) = &self.traces {
            out.push(("signal", &t.signal));
            out.push(("snl", &t.snl));
            out.push(("electronics", &t.electronics));
        }
        out
    }
}

fn validate(config: &ScenarioConfig) -> Result<()> {
    let v = constraint_violations(config);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Violations(v))
    }
}

/// Analytic model with the scenario's electronics folded in.
pub fn effective_model(config: &ScenarioConfig) -> OpoNoiseModel {
    let mut model = config.model;
    model.electronic_floor += config.impairments.electronic_floor;
    model
}

pub fn calibration(config: &ScenarioConfig) -> Calibration {
    let op = &config.op_point;
    Calibration::from_carrier_anchor(config.analysis.carrier_anchor_dbm, op.power_1, op.power_2, config.model.eta)
}

fn floor_band(config: &ScenarioConfig) -> (f64, f64) {
    let nu = config.op_point.nu_beat;
    let hw = config.analysis.floor_band_halfwidth;
    (nu - hw, nu + hw)
}

fn exclusions(config: &ScenarioConfig, bin_spacing: f64) -> FloorExclusions {
    let imp = &config.impairments;
    let nu = config.op_point.nu_beat;
    let notches = if imp.servo_tone_index > 0.0 {
        vec![nu - imp.servo_tone_freq, nu + imp.servo_tone_freq]
    } else {
        Vec::new()
    };
    FloorExclusions {
        beat_halfwidth: config.analysis.exclusion_halfwidth,
        notches,
        notch_halfwidth: 3.0 * bin_spacing,
    }
}

/// Detected beat power including the crosstalk residual, W².
pub fn analytic_beat_power(config: &ScenarioConfig) -> f64 {
    let op = &config.op_point;
    let eta = config.model.eta;
    let (s2, c2) = (2.0 * op.theta).sin_cos();
    let eps = config.impairments.crosstalk_amplitude;
    2.0 * op.power_1 * op.power_2 * eta * eta * (s2 * s2 + eps * eps * c2 * c2)
}

/// Sideband-model floor on the analyzer's bin grid, normalized like the
/// simulated traces (SNL including electronics).
pub fn analytic_spectrum(config: &ScenarioConfig) -> Result<SpectrumEstimate> {
    let model = effective_model(config);
    let op = &config.op_point;
    let settings = config.analyzer;
    let fs = config.grid.sample_rate;
    settings.validate(fs)?;
    let df = settings.bin_spacing(fs);
    let bins = settings.segment_len(fs) / 2 + 1;
    let snl = shot_noise_density(photon_energy(DEFAULT_WAVELENGTH), model.eta, op.total_power());
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * df).collect();
    let psd: Vec<f64> = freqs.iter().map(|f| snl * heterodyne_noise_floor(&model, op, *f)).collect();
    let est = SpectrumEstimate {
        psd_rel_snl: psd.clone(),
        trace_variance: psd.iter().sum::<f64>() * df,
        psd,
        freqs,
        snl_reference: 1.0,
        dbm_offset: None,
        settings,
        bin_spacing: df,
        rbw: settings.window.enbw() * df,
        sample_rate: fs,
    };
    Ok(est
        .with_snl_reference(snl * (1.0 + model.electronic_floor))?
        .with_calibration(calibration(config)))
}

fn analytic_metrics(config: &ScenarioConfig, curve: &SpectrumEstimate) -> Result<Metrics> {
    let e = effective_model(config).electronic_floor;
    let snl = 1.0 + e;
    let floor = extract_noise_floor(curve, config.op_point.nu_beat, &exclusions(config, curve.bin_spacing), Some(floor_band(config)))?;
    // back to the pure-shot-noise scale of the model
    let floor_pure = floor.linear * snl;
    let beat = analytic_beat_power(config);
    Ok(Metrics {
        floor_linear: floor.linear,
        floor_db: floor.db,
        electronic_linear: e / snl,
        snl_linear: 1.0,
        mnr_raw_db: extract_mnr(floor_pure, e, snl, CorrectionMode::Raw)?,
        mnr_corrected_db: extract_mnr(floor_pure, e, snl, CorrectionMode::ElectronicCorrected)?,
        beat_power: beat,
        beat_dbm: calibration(config).to_dbm(beat),
        beat_freq: config.op_point.nu_beat,
    })
}

/// Differenced photocurrent of the configured signal chain, before analysis.
pub fn simulate_signal_trace(config: &ScenarioConfig) -> Result<PhotocurrentTrace> {
    let imp = &config.impairments;
    let mut model = config.model;
    model.electronic_floor = 0.0;
    let fields = synthesize_twin_fields(&model, &config.op_point, &config.grid).map_err(|e| e.stage("synthesis"))?;
    let fields = impairments::apply_crosstalk(fields, imp.crosstalk_amplitude).map_err(|e| e.stage("crosstalk"))?;
    let fields = impairments::apply_frequency_jitter(fields, imp).map_err(|e| e.stage("jitter"))?;
    let fields = impairments::apply_servo_tone(fields, imp).map_err(|e| e.stage("servo tone"))?;
    let fields = apply_polarization_rotation(fields, PolarizationRotation { theta: config.op_point.theta });
    let detector = DetectorConfig { eta: config.model.eta, electronic_floor: 0.0 };
    let pair = detect_photocurrents(&fields, &detector).map_err(|e| e.stage("detection"))?;
    drop(fields);
    let trace = difference_current(&pair).map_err(|e| e.stage("differencing"))?;
    drop(pair);
    add_electronic_noise(trace, imp.electronic_floor).map_err(|e| e.stage("electronics"))
}

fn simulate(config: &ScenarioConfig) -> Result<(Metrics, TraceSet)> {
    let imp = &config.impairments;
    let settings = config.analyzer;
    let seed = config.grid.seed;
    let cal = calibration(config);

    let trace = simulate_signal_trace(config)?;
    let pure_snl = trace.snl_density;
    let signal = analyze(&trace, &settings).map_err(|e| e.stage("analysis"))?;
    drop(trace);

    let detector = DetectorConfig { eta: config.model.eta, electronic_floor: imp.electronic_floor };
    let snl = shot_noise_reference(&config.op_point, &detector, &config.grid, &settings, derive_seed(seed, 1))
        .map_err(|e| e.stage("shot-noise reference"))?;
    let level = snl.snl_reference;

    let silent = PhotocurrentTrace::silent(config.grid.with_seed(derive_seed(seed, 2)), config.model.eta, pure_snl);
    let electronics_trace = add_electronic_noise(silent, imp.electronic_floor).map_err(|e| e.stage("electronics"))?;
    let electronics = analyze(&electronics_trace, &settings).map_err(|e| e.stage("analysis"))?;
    drop(electronics_trace);

    let signal = signal.with_snl_reference(level)?.with_calibration(cal);
    let electronics = electronics.with_snl_reference(level)?.with_calibration(cal);
    let snl = snl.with_calibration(cal);

    let band = Some(floor_band(config));
    let ex = exclusions(config, signal.bin_spacing);
    let nu = config.op_point.nu_beat;
    let floor = extract_noise_floor(&signal, nu, &ex, band).map_err(|e| e.stage("floor"))?;
    let e_level = if imp.electronic_floor > 0.0 {
        extract_noise_floor(&electronics, nu, &ex, band).map_err(|e| e.stage("floor"))?.linear
    } else {
        0.0
    };
    let search = match imp.jitter_mode {
        JitterMode::Unlocked => imp.jitter_excursion.max(5.0 * signal.bin_spacing),
        JitterMode::Locked => 5.0 * signal.bin_spacing,
    };
    let tone = tone_power(&signal, nu, search, 3).map_err(|e| e.stage("beat"))?;
    let metrics = Metrics {
        floor_linear: floor.linear,
        floor_db: floor.db,
        electronic_linear: e_level,
        snl_linear: 1.0,
        mnr_raw_db: extract_mnr(floor.linear, e_level, 1.0, CorrectionMode::Raw)?,
        mnr_corrected_db: extract_mnr(floor.linear, e_level, 1.0, CorrectionMode::ElectronicCorrected)
            .map_err(|e| e.stage("MNR"))?,
        beat_power: tone.power,
        beat_dbm: cal.to_dbm(tone.power),
        beat_freq: tone.freq,
    };
    Ok((metrics, TraceSet { signal, snl, electronics }))
}

/// Runs one scenario in its configured mode.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    validate(config)?;
    let (analytic, analytic_curve) = if config.mode.evaluates_model() {
        let curve = analytic_spectrum(config).map_err(|e| e.stage("analytic model"))?;
        let m = analytic_metrics(config, &curve).map_err(|e| e.stage("analytic model"))?;
        (Some(m), Some(curve))
    } else {
        (None, None)
    };
    let (simulated, traces) = if config.mode.simulates() {
        let (m, t) = simulate(config)?;
        (Some(m), Some(t))
    } else {
        (None, None)
    };
    let floor_delta_db = match (&analytic, &simulated) {
        (Some(a), Some(s)) => Some(s.floor_db - a.floor_db),
        _ => None,
    };
    Ok(ScenarioResult {
        config: config.clone(),
        analytic,
        analytic_curve,
        simulated,
        traces,
        floor_delta_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub theta: f64,
    pub seed: u64,
    /// Metrics, or the error message of a failed point.
    pub outcome: std::result::Result<Metrics, String>,
}

/// Least-squares fit `P = amplitude · sin²2θ` of the beat power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinSquaredFit {
    pub amplitude: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: &'static str,
    pub config: ScenarioConfig,
    pub points: Vec<SweepPoint>,
    pub fit: Option<SinSquaredFit>,
}

pub fn fit_sin_squared(thetas: &[f64], powers: &[f64]) -> Option<SinSquaredFit> {
    let xs: Vec<f64> = thetas.iter().map(|t| (2.0 * t).sin().powi(2)).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if xs.len() < 2 || sxx == 0.0 {
        return None;
    }
    let amplitude = xs.iter().zip(powers).map(|(x, p)| x * p).sum::<f64>() / sxx;
    let mean = powers.iter().sum::<f64>() / powers.len() as f64;
    let ss_tot: f64 = powers.iter().map(|p| (p - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(powers).map(|(x, p)| (p - amplitude * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    Some(SinSquaredFit { amplitude, r_squared })
}

/// Runs the scenario at each θ (radians). `seeds` holds one seed per point,
/// or a single seed shared by all points.
pub fn sweep_theta(config: &ScenarioConfig, thetas: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    if thetas.is_empty() {
        return Err(Error::Config("theta sweep needs at least one angle".into()));
    }
    if !(seeds.len() == 1 || seeds.len() == thetas.len()) {
        return Err(Error::Config(format!(
            "expected 1 or {} seeds, got {}",
            thetas.len(),
            seeds.len()
        )));
    }
    validate(config)?;
    let jobs: Vec<(f64, u64)> = thetas
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, if seeds.len() == 1 { seeds[0] } else { seeds[i] }))
        .collect();
    let points: Vec<SweepPoint> = jobs
        .par_iter()
        .map(|&(theta, seed)| {
            let mut c = config.clone();
            c.op_point.theta = theta;
            c.grid.seed = seed;
            let outcome = run_scenario(&c)
                .map_err(|e| e.to_string())
                .and_then(|r| r.primary().copied().ok_or_else(|| "no metrics".to_string()));
            SweepPoint { theta, seed, outcome }
        })
        .collect();
    let (ts, ps): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|m| (p.theta, m.beat_power)))
        .unzip();
    Ok(SweepResult {
        axis: "theta_rad",
        config: config.clone(),
        points,
        fit: fit_sin_squared(&ts, &ps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_with_stated_values() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
            assert_eq!(c.model.gamma, 5e6);
            assert_eq!(c.model.eta, 0.94);
            assert_eq!(c.op_point.nu_beat, 1e6);
            assert_eq!(c.analyzer.rbw, 3e3);
            assert_eq!(c.analyzer.vbw, 3e3);
            assert_eq!(c.analyzer.num_averages, 100);
            assert_eq!(c.analysis.carrier_anchor_dbm, 25.0);
            assert!((20.0 * c.impairments.crosstalk_amplitude.log10() + 65.0).abs() < 1e-12);
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn calibrated_values_are_labelled() {
        let text = preset_text("fig2a").unwrap();
        for key in [
            "model.s_raw_dc",
            "model.pedestal_diffusion_hz2",
            "model.pedestal_linewidth_hz",
            "op_point.theta_deg",
            "impairments.servo_tone_index_rad",
            "impairments.electronic_floor",
        ] {
            let line = text.lines().find(|l| l.starts_with(key)).unwrap();
            assert!(line.contains("# calibrated:"), "{key}");
        }
    }

    #[test]
    fn analytic_fig2a_floor() {
        let mut c = preset("fig2a").unwrap();
        c.mode = RunMode::Analytic;
        let r = run_scenario(&c).unwrap();
        assert!(r.simulated.is_none() && r.traces.is_none());
        let m = r.analytic.unwrap();
        // median of the band sits at the beat frequency: S_int(1 MHz)
        assert!((m.mnr_corrected_db + 4.80).abs() < 0.02, "{}", m.mnr_corrected_db);
        assert!((m.electronic_linear - 0.055 / 1.055).abs() < 1e-12);
    }

    #[test]
    fn sin_squared_fit_exact() {
        let t: Vec<f64> = [1.0f64, 5.0, 10.0, 22.5, 45.0].iter().map(|d| d.to_radians()).collect();
        let p: Vec<f64> = t.iter().map(|x| 3.0 * (2.0 * x).sin().powi(2)).collect();
        let fit = fit_sin_squared(&t, &p).unwrap();
        assert!((fit.amplitude - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_sin_squared(&[0.0], &[0.0]).is_none());
    }

    #[test]
    fn sweep_rejects_bad_seed_count() {
        let mut c = preset("fig2a").unwrap();
        c.mode = RunMode::Analytic;
        assert!(sweep_theta(&c, &[], &[1]).is_err());
        assert!(sweep_theta(&c, &[0.0, 0.1], &[1, 2, 3]).is_err());
        let one = sweep_theta(&c, &[0.0], &[7]).unwrap();
        assert_eq!(one.points.len(), 1);
        assert!(one.fit.is_none());
    }
}
