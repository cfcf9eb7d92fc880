//! Flat dotted-key scenario configuration.
//!
//! ```text
//! # comment
//! model.gamma_hz = 5.0e6   # trailing comments are allowed
//! op_point.theta_deg = -1
//! ```
//!
//! One `key = value` per line. Parsing never stops at the first problem:
//! every syntax error, unknown key, type mismatch and constraint violation
//! is collected into [`Error::Violations`].

use std::collections::BTreeMap;

use crate::error::{Error, Result, Violation};
use crate::impairments::{ImpairmentConfig, JitterMode, DEFAULT_JITTER_REVERSION};
use crate::sideband::{CorrectionMode, HeterodyneOperatingPoint, OpoNoiseModel};
use crate::spectral::{AnalyzerSettings, Window};
use crate::timeseries::SimulationGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Analytic,
    Timeseries,
    Both,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Analytic => "analytic",
            RunMode::Timeseries => "timeseries",
            RunMode::Both => "both",
        }
    }

    pub fn simulates(self) -> bool {
        self != RunMode::Analytic
    }

    pub fn evaluates_model(self) -> bool {
        self != RunMode::Timeseries
    }
}

pub fn correction_name(mode: CorrectionMode) -> &'static str {
    match mode {
        CorrectionMode::Raw => "raw",
        CorrectionMode::ElectronicCorrected => "electronic-corrected",
    }
}

fn jitter_name(mode: JitterMode) -> &'static str {
    match mode {
        JitterMode::Locked => "locked",
        JitterMode::Unlocked => "unlocked",
    }
}

/// Floor and calibration settings of the metric extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Half-width of the region around the beat left out of the floor, Hz.
    pub exclusion_halfwidth: f64,
    /// The floor is read over `nu_beat ± floor_band_halfwidth`.
    pub floor_band_halfwidth: f64,
    /// Detected θ = 45° carrier power, dBm.
    pub carrier_anchor_dbm: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            exclusion_halfwidth: 1e5,
            floor_band_halfwidth: 5e5,
            carrier_anchor_dbm: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: OpoNoiseModel,
    pub op_point: HeterodyneOperatingPoint,
    pub grid: SimulationGrid,
    pub impairments: ImpairmentConfig,
    pub analyzer: AnalyzerSettings,
    pub analysis: AnalysisConfig,
    pub mode: RunMode,
    pub correction_mode: CorrectionMode,
    /// Free-form `metadata.*` entries, not used by any computation.
    pub metadata: BTreeMap<String, String>,
}

pub const DEFAULT_SAMPLE_RATE: f64 = 64e6;
pub const DEFAULT_NUM_SAMPLES: usize = 1 << 21;
pub const DEFAULT_SEED: u64 = 1;

/// Every accepted key, with the remedy shown when it is missing or wrong.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario.name", "free text"),
    ("scenario.mode", "one of analytic, timeseries, both"),
    ("scenario.correction_mode", "one of raw, electronic-corrected"),
    ("model.gamma_hz", "cavity half-linewidth in Hz, e.g. 5.0e6"),
    ("model.s_raw_dc", "raw intensity-difference noise at DC relative to SNL, e.g. 0.26"),
    ("model.eta", "detection efficiency in (0, 1], e.g. 0.94"),
    ("model.pedestal_diffusion_hz2", "pedestal strength in Hz^2, >= 0"),
    ("model.pedestal_linewidth_hz", "pedestal half-width in Hz, > 0 when a pedestal is set"),
    ("model.image_band_coeff", "mirror-band weight, 1.0 is physical"),
    ("model.electronic_floor", "analytic-only electronics; prefer impairments.electronic_floor"),
    ("op_point.theta_deg", "rotation angle in degrees; negative values are valid"),
    ("op_point.nu_beat_hz", "beat frequency in Hz, e.g. 1.0e6"),
    ("op_point.power_1_w", "beam power in W, e.g. 1.4e-3"),
    ("op_point.power_2_w", "beam power in W, e.g. 1.4e-3"),
    ("grid.sample_rate_hz", "sample rate in Hz, above 4 x beat and 10 x gamma"),
    ("grid.num_samples", "power of two, e.g. 2097152"),
    ("grid.seed", "unsigned 64-bit integer"),
    ("impairments.crosstalk_amplitude", "field-amplitude leak in [0, 1]"),
    ("impairments.crosstalk_suppression_db", "residual beat suppression in dB, e.g. 65"),
    ("impairments.jitter_mode", "one of locked, unlocked"),
    ("impairments.jitter_excursion_hz", "peak unlocked excursion in Hz, below sample_rate/4"),
    ("impairments.jitter_reversion_s", "unlocked mean-reversion time in s, > 0"),
    ("impairments.locked_linewidth_hz", "locked beat FWHM in Hz, >= 0"),
    ("impairments.servo_tone_hz", "servo oscillation frequency in Hz, below Nyquist"),
    ("impairments.servo_tone_index_rad", "phase-modulation index in rad, >= 0"),
    ("impairments.electronic_floor", "electronics level relative to SNL, e.g. 0.055"),
    ("analyzer.rbw_hz", "resolution bandwidth in Hz, e.g. 3.0e3"),
    ("analyzer.vbw_hz", "video bandwidth in Hz, below the span width"),
    ("analyzer.num_averages", "integer >= 1"),
    ("analyzer.window", "one of hann, rectangular"),
    ("analyzer.span_start_hz", "span start in Hz, >= 0"),
    ("analyzer.span_stop_hz", "span stop in Hz, at most sample_rate/2"),
    ("analysis.exclusion_halfwidth_hz", "beat exclusion half-width in Hz, e.g. 1.0e5"),
    ("analysis.floor_band_halfwidth_hz", "floor band half-width around the beat in Hz"),
    ("analysis.carrier_anchor_dbm", "detected 45-degree carrier power in dBm, e.g. 25"),
];

pub const REQUIRED_KEYS: &[&str] = &[
    "model.gamma_hz",
    "model.s_raw_dc",
    "model.eta",
    "op_point.theta_deg",
    "op_point.nu_beat_hz",
    "op_point.power_1_w",
    "op_point.power_2_w",
];

const METADATA_PREFIX: &str = "metadata.";

fn hint_for(key: &str) -> String {
    KEYS.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, h)| h.to_string())
        .unwrap_or_default()
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    violations: Vec<Violation>,
}

impl Reader {
    fn violation(&mut self, key: &str, message: impl Into<String>, hint: impl Into<String>) {
        self.violations.push(Violation {
            key: key.to_string(),
            message: message.into(),
            hint: hint.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, kind: &str) -> Option<T> {
        let (value, line) = self.raw(key)?;
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.violation(
                    key,
                    format!("line {line}: expected {kind}, got {value:?}"),
                    hint_for(key),
                );
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.parsed::<f64>(key, "a number")?;
        if v.is_finite() {
            Some(v)
        } else {
            self.violation(key, format!("expected a finite number, got {v}"), hint_for(key));
            None
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> f64 {
        self.float(key).unwrap_or(default)
    }

    fn required_float(&mut self, key: &str) -> f64 {
        self.float(key).unwrap_or(f64::NAN)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], default: T) -> T {
        let Some((value, line)) = self.raw(key) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == value) {
            Some((_, v)) => *v,
            None => {
                self.violation(key, format!("line {line}: unknown value {value:?}"), hint_for(key));
                default
            }
        }
    }
}

fn split_line(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses and validates a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut reader = Reader {
        entries: BTreeMap::new(),
        violations: Vec::new(),
    };
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = split_line(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            reader.violation(
                &format!("line {line_no}"),
                format!("expected `key = value`, got {line:?}"),
                "write one dotted key, an equals sign and a value per line",
            );
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            reader.violation(
                &format!("line {line_no}"),
                format!("malformed key {key:?}"),
                "keys are dotted identifiers such as model.gamma_hz",
            );
            continue;
        }
        if let Some(prev) = reader.entries.get(key) {
            let first = prev.line;
            reader.violation(key, format!("line {line_no}: duplicate key, first set on line {first}"), "set each key once");
            continue;
        }
        reader.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: line_no,
                used: false,
            },
        );
    }

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !reader.entries.contains_key(*k))
        .collect();
    for key in &missing {
        reader.violation(key, "required key is missing", hint_for(key));
    }

    let name = reader.raw("scenario.name").map(|(v, _)| v).unwrap_or_else(|| "custom".to_string());
    let mode = reader.choice(
        "scenario.mode",
        &[("analytic", RunMode::Analytic), ("timeseries", RunMode::Timeseries), ("both", RunMode::Both)],
        RunMode::Timeseries,
    );
    let correction_mode = reader.choice(
        "scenario.correction_mode",
        &[("raw", CorrectionMode::Raw), ("electronic-corrected", CorrectionMode::ElectronicCorrected)],
        CorrectionMode::ElectronicCorrected,
    );

    let model = OpoNoiseModel {
        gamma: reader.required_float("model.gamma_hz"),
        s_raw_dc: reader.required_float("model.s_raw_dc"),
        eta: reader.required_float("model.eta"),
        pedestal_diffusion: reader.float_or("model.pedestal_diffusion_hz2", 0.0),
        pedestal_linewidth: reader.float_or("model.pedestal_linewidth_hz", 0.0),
        image_band_coeff: reader.float_or("model.image_band_coeff", 1.0),
        electronic_floor: reader.float_or("model.electronic_floor", 0.0),
    };
    let theta_deg = reader.required_float("op_point.theta_deg");
    let op_point = HeterodyneOperatingPoint {
        theta: theta_deg.to_radians(),
        nu_beat: reader.required_float("op_point.nu_beat_hz"),
        power_1: reader.required_float("op_point.power_1_w"),
        power_2: reader.required_float("op_point.power_2_w"),
    };
    let grid = SimulationGrid {
        sample_rate: reader.float_or("grid.sample_rate_hz", DEFAULT_SAMPLE_RATE),
        num_samples: reader.parsed("grid.num_samples", "an unsigned integer").unwrap_or(DEFAULT_NUM_SAMPLES),
        seed: reader.parsed("grid.seed", "an unsigned 64-bit integer").unwrap_or(DEFAULT_SEED),
    };

    let amplitude = reader.float("impairments.crosstalk_amplitude");
    let suppression = reader.float("impairments.crosstalk_suppression_db");
    let crosstalk_amplitude = match (amplitude, suppression) {
        (Some(_), Some(_)) => {
            reader.violation(
                "impairments.crosstalk_suppression_db",
                "conflicts with impairments.crosstalk_amplitude",
                "set only one of the two crosstalk keys",
            );
            0.0
        }
        (Some(a), None) => a,
        (None, Some(db)) => ImpairmentConfig::crosstalk_for_suppression(db),
        (None, None) => 0.0,
    };
    let impairments = ImpairmentConfig {
        crosstalk_amplitude,
        jitter_mode: reader.choice(
            "impairments.jitter_mode",
            &[("locked", JitterMode::Locked), ("unlocked", JitterMode::Unlocked)],
            JitterMode::Locked,
        ),
        jitter_excursion: reader.float_or("impairments.jitter_excursion_hz", 0.0),
        jitter_reversion_time: reader.float_or("impairments.jitter_reversion_s", DEFAULT_JITTER_REVERSION),
        locked_linewidth: reader.float_or("impairments.locked_linewidth_hz", 0.0),
        servo_tone_freq: reader.float_or("impairments.servo_tone_hz", 0.0),
        servo_tone_index: reader.float_or("impairments.servo_tone_index_rad", 0.0),
        electronic_floor: reader.float_or("impairments.electronic_floor", 0.0),
    };
    let analyzer = AnalyzerSettings {
        rbw: reader.float_or("analyzer.rbw_hz", 3e3),
        vbw: reader.float_or("analyzer.vbw_hz", 3e3),
        num_averages: reader.parsed("analyzer.num_averages", "an unsigned integer").unwrap_or(100),
        window: reader.choice(
            "analyzer.window",
            &[("hann", Window::Hann), ("rectangular", Window::Rectangular)],
            Window::Hann,
        ),
        span: (
            reader.float_or("analyzer.span_start_hz", 2e4),
            reader.float_or("analyzer.span_stop_hz", 3.5e6),
        ),
    };
    let defaults = AnalysisConfig::default();
    let analysis = AnalysisConfig {
        exclusion_halfwidth: reader.float_or("analysis.exclusion_halfwidth_hz", defaults.exclusion_halfwidth),
        floor_band_halfwidth: reader.float_or("analysis.floor_band_halfwidth_hz", defaults.floor_band_halfwidth),
        carrier_anchor_dbm: reader.float_or("analysis.carrier_anchor_dbm", defaults.carrier_anchor_dbm),
    };

    let mut metadata = BTreeMap::new();
    let mut unknown = Vec::new();
    for (key, entry) in &reader.entries {
        if let Some(rest) = key.strip_prefix(METADATA_PREFIX) {
            metadata.insert(rest.to_string(), entry.value.clone());
        } else if !entry.used && !KEYS.iter().any(|(k, _)| k == key) {
            unknown.push((key.clone(), entry.line));
        }
    }
    for (key, line) in unknown {
        let section = key.split('.').next().unwrap_or("");
        let known: Vec<&str> = KEYS
            .iter()
            .map(|(k, _)| *k)
            .filter(|k| k.split('.').next() == Some(section))
            .collect();
        let hint = if known.is_empty() {
            "sections are scenario, model, op_point, grid, impairments, analyzer, analysis, metadata".to_string()
        } else {
            format!("known keys in this section: {}", known.join(", "))
        };
        reader.violation(&key, format!("line {line}: unknown key"), hint);
    }

    let config = ScenarioConfig {
        name,
        model,
        op_point,
        grid,
        impairments,
        analyzer,
        analysis,
        mode,
        correction_mode,
        metadata,
    };
    if missing.is_empty() {
        reader.violations.extend(constraint_violations(&config));
    }
    if reader.violations.is_empty() {
        Ok(config)
    } else {
        Err(Error::Violations(reader.violations))
    }
}

fn check(out: &mut Vec<Violation>, ok: bool, key: &str, message: String) {
    if !ok {
        out.push(Violation {
            key: key.to_string(),
            message,
            hint: hint_for(key),
        });
    }
}

/// Component invariants and cross-constraints, keyed by config path.
pub fn constraint_violations(c: &ScenarioConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let m = &c.model;
    let op = &c.op_point;
    let g = &c.grid;
    let imp = &c.impairments;
    let an = &c.analyzer;

    check(&mut v, m.gamma > 0.0, "model.gamma_hz", format!("must be > 0, got {}", m.gamma));
    check(&mut v, m.s_raw_dc >= 0.0, "model.s_raw_dc", format!("must be >= 0, got {}", m.s_raw_dc));
    check(&mut v, m.eta > 0.0 && m.eta <= 1.0, "model.eta", format!("must lie in (0, 1], got {}", m.eta));
    check(&mut v, m.pedestal_diffusion >= 0.0, "model.pedestal_diffusion_hz2", format!("must be >= 0, got {}", m.pedestal_diffusion));
    check(
        &mut v,
        m.pedestal_diffusion == 0.0 || m.pedestal_linewidth > 0.0,
        "model.pedestal_linewidth_hz",
        format!("must be > 0 when a pedestal is configured, got {}", m.pedestal_linewidth),
    );
    check(&mut v, m.image_band_coeff >= 0.0, "model.image_band_coeff", format!("must be >= 0, got {}", m.image_band_coeff));
    check(&mut v, m.electronic_floor >= 0.0, "model.electronic_floor", format!("must be >= 0, got {}", m.electronic_floor));
    check(
        &mut v,
        !(m.electronic_floor > 0.0 && imp.electronic_floor > 0.0),
        "model.electronic_floor",
        "electronics set both in model and impairments; only one injection point is allowed".into(),
    );

    check(&mut v, op.nu_beat > 0.0, "op_point.nu_beat_hz", format!("must be > 0, got {}", op.nu_beat));
    check(&mut v, op.power_1 > 0.0, "op_point.power_1_w", format!("must be > 0, got {}", op.power_1));
    check(&mut v, op.power_2 > 0.0, "op_point.power_2_w", format!("must be > 0, got {}", op.power_2));

    check(&mut v, imp.crosstalk_amplitude >= 0.0 && imp.crosstalk_amplitude <= 1.0, "impairments.crosstalk_amplitude", format!("must lie in [0, 1], got {}", imp.crosstalk_amplitude));
    check(&mut v, imp.jitter_excursion >= 0.0, "impairments.jitter_excursion_hz", format!("must be >= 0, got {}", imp.jitter_excursion));
    check(&mut v, imp.jitter_reversion_time > 0.0, "impairments.jitter_reversion_s", format!("must be > 0, got {}", imp.jitter_reversion_time));
    check(&mut v, imp.locked_linewidth >= 0.0, "impairments.locked_linewidth_hz", format!("must be >= 0, got {}", imp.locked_linewidth));
    check(&mut v, imp.servo_tone_freq >= 0.0, "impairments.servo_tone_hz", format!("must be >= 0, got {}", imp.servo_tone_freq));
    check(&mut v, imp.servo_tone_index >= 0.0, "impairments.servo_tone_index_rad", format!("must be >= 0, got {}", imp.servo_tone_index));
    check(&mut v, imp.servo_tone_index == 0.0 || imp.servo_tone_freq > 0.0, "impairments.servo_tone_hz", "must be > 0 when a servo index is set".into());
    check(&mut v, imp.electronic_floor >= 0.0, "impairments.electronic_floor", format!("must be >= 0, got {}", imp.electronic_floor));

    check(&mut v, an.rbw > 0.0, "analyzer.rbw_hz", format!("must be > 0, got {}", an.rbw));
    check(&mut v, an.num_averages >= 1, "analyzer.num_averages", "must be >= 1".into());
    check(&mut v, an.span.0 >= 0.0 && an.span.1 > an.span.0, "analyzer.span_stop_hz", format!("span [{}, {}] must be nonempty", an.span.0, an.span.1));
    check(&mut v, an.vbw > 0.0 && an.vbw < an.span.1 - an.span.0, "analyzer.vbw_hz", format!("must be > 0 and below the span width, got {}", an.vbw));

    let a = &c.analysis;
    check(&mut v, a.exclusion_halfwidth >= 0.0, "analysis.exclusion_halfwidth_hz", format!("must be >= 0, got {}", a.exclusion_halfwidth));
    check(&mut v, a.floor_band_halfwidth > a.exclusion_halfwidth, "analysis.floor_band_halfwidth_hz", "must exceed the exclusion half-width".into());
    check(
        &mut v,
        op.nu_beat - a.floor_band_halfwidth >= an.span.0 && op.nu_beat + a.floor_band_halfwidth <= an.span.1,
        "analysis.floor_band_halfwidth_hz",
        format!(
            "floor band [{}, {}] Hz must lie inside the analyzer span",
            op.nu_beat - a.floor_band_halfwidth,
            op.nu_beat + a.floor_band_halfwidth
        ),
    );

    let fs = g.sample_rate;
    check(&mut v, fs > 0.0, "grid.sample_rate_hz", format!("must be > 0, got {fs}"));
    check(&mut v, an.span.1 <= fs / 2.0, "analyzer.span_stop_hz", format!("must not exceed Nyquist {} Hz", fs / 2.0));
    if c.mode.simulates() {
        check(&mut v, g.num_samples.is_power_of_two() && g.num_samples >= 2, "grid.num_samples", format!("must be a power of two, got {}", g.num_samples));
        check(&mut v, fs > 4.0 * op.nu_beat, "grid.sample_rate_hz", format!("must exceed 4 x beat = {} Hz", 4.0 * op.nu_beat));
        check(&mut v, fs >= 10.0 * m.gamma, "grid.sample_rate_hz", format!("must be >= 10 x gamma = {} Hz", 10.0 * m.gamma));
        check(&mut v, imp.jitter_excursion < fs / 4.0, "impairments.jitter_excursion_hz", format!("must stay below sample_rate/4 = {} Hz", fs / 4.0));
        check(&mut v, imp.servo_tone_freq < fs / 2.0, "impairments.servo_tone_hz", format!("must stay below Nyquist {} Hz", fs / 2.0));
        if an.rbw > 0.0 && fs > 0.0 && an.num_averages >= 1 {
            let required = an.required_samples(fs);
            check(
                &mut v,
                required <= g.num_samples,
                "grid.num_samples",
                format!(
                    "rbw {} Hz with {} averages needs {required} samples, grid has {}",
                    an.rbw, an.num_averages, g.num_samples
                ),
            );
        }
    }
    v
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

/// Renders a config that [`parse_config`] maps back to an equal value.
pub fn to_text(c: &ScenarioConfig) -> String {
    let mut lines: Vec<String> = vec![
        format!("scenario.name = {}", c.name),
        format!("scenario.mode = {}", c.mode.name()),
        format!("scenario.correction_mode = {}", correction_name(c.correction_mode)),
        format!("model.gamma_hz = {}", fmt_f(c.model.gamma)),
        format!("model.s_raw_dc = {}", fmt_f(c.model.s_raw_dc)),
        format!("model.eta = {}", fmt_f(c.model.eta)),
        format!("model.pedestal_diffusion_hz2 = {}", fmt_f(c.model.pedestal_diffusion)),
        format!("model.pedestal_linewidth_hz = {}", fmt_f(c.model.pedestal_linewidth)),
        format!("model.image_band_coeff = {}", fmt_f(c.model.image_band_coeff)),
        format!("model.electronic_floor = {}", fmt_f(c.model.electronic_floor)),
        format!("op_point.theta_deg = {}", fmt_f(c.op_point.theta.to_degrees())),
        format!("op_point.nu_beat_hz = {}", fmt_f(c.op_point.nu_beat)),
        format!("op_point.power_1_w = {}", fmt_f(c.op_point.power_1)),
        format!("op_point.power_2_w = {}", fmt_f(c.op_point.power_2)),
        format!("grid.sample_rate_hz = {}", fmt_f(c.grid.sample_rate)),
        format!("grid.num_samples = {}", c.grid.num_samples),
        format!("grid.seed = {}", c.grid.seed),
        format!("impairments.crosstalk_amplitude = {}", fmt_f(c.impairments.crosstalk_amplitude)),
        format!("impairments.jitter_mode = {}", jitter_name(c.impairments.jitter_mode)),
        format!("impairments.jitter_excursion_hz = {}", fmt_f(c.impairments.jitter_excursion)),
        format!("impairments.jitter_reversion_s = {}", fmt_f(c.impairments.jitter_reversion_time)),
        format!("impairments.locked_linewidth_hz = {}", fmt_f(c.impairments.locked_linewidth)),
        format!("impairments.servo_tone_hz = {}", fmt_f(c.impairments.servo_tone_freq)),
        format!("impairments.servo_tone_index_rad = {}", fmt_f(c.impairments.servo_tone_index)),
        format!("impairments.electronic_floor = {}", fmt_f(c.impairments.electronic_floor)),
        format!("analyzer.rbw_hz = {}", fmt_f(c.analyzer.rbw)),
        format!("analyzer.vbw_hz = {}", fmt_f(c.analyzer.vbw)),
        format!("analyzer.num_averages = {}", c.analyzer.num_averages),
        format!("analyzer.window = {}", c.analyzer.window.name()),
        format!("analyzer.span_start_hz = {}", fmt_f(c.analyzer.span.0)),
        format!("analyzer.span_stop_hz = {}", fmt_f(c.analyzer.span.1)),
        format!("analysis.exclusion_halfwidth_hz = {}", fmt_f(c.analysis.exclusion_halfwidth)),
        format!("analysis.floor_band_halfwidth_hz = {}", fmt_f(c.analysis.floor_band_halfwidth)),
        format!("analysis.carrier_anchor_dbm = {}", fmt_f(c.analysis.carrier_anchor_dbm)),
    ];
    for (k, val) in &c.metadata {
        lines.push(format!("{METADATA_PREFIX}{k} = {val}"));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
model.gamma_hz = 5e6
model.s_raw_dc = 0.26
model.eta = 0.94
op_point.theta_deg = 0
op_point.nu_beat_hz = 1e6
op_point.power_1_w = 1.4e-3
op_point.power_2_w = 1.4e-3
";

    fn violations(text: &str) -> Vec<Violation> {
        match parse_config(text) {
            Err(Error::Violations(v)) => v,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_lists_required_keys() {
        let v = violations("");
        let keys: Vec<&str> = v.iter().map(|x| x.key.as_str()).collect();
        assert_eq!(keys, REQUIRED_KEYS);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid.num_samples, DEFAULT_NUM_SAMPLES);
        assert_eq!(c.analyzer.num_averages, 100);
        assert_eq!(c.mode, RunMode::Timeseries);
        assert_eq!(c.name, "custom");
    }

    #[test]
    fn negative_theta_accepted() {
        let text = MINIMAL.replace("theta_deg = 0", "theta_deg = -1");
        let c = parse_config(&text).unwrap();
        assert!((c.op_point.theta + 1f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn all_violations_reported() {
        let text = format!("{MINIMAL}model.gama_hz = 1\ngrid.num_samples = lots\nanalyzer.window = kaiser\nnot a line\n");
        let text = text.replace("model.eta = 0.94", "model.eta = 1.5");
        let v = violations(&text);
        let keys: Vec<&str> = v.iter().map(|x| x.key.as_str()).collect();
        for k in ["model.gama_hz", "grid.num_samples", "analyzer.window", "line 11", "model.eta"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
        let unknown = v.iter().find(|x| x.key == "model.gama_hz").unwrap();
        assert!(unknown.hint.contains("model.gamma_hz"));
    }

    #[test]
    fn duplicate_and_conflicting_keys() {
        let text = format!("{MINIMAL}model.eta = 0.9\nimpairments.crosstalk_amplitude = 0.1\nimpairments.crosstalk_suppression_db = 65\n");
        let keys: Vec<String> = violations(&text).into_iter().map(|x| x.key).collect();
        assert!(keys.contains(&"model.eta".to_string()));
        assert!(keys.contains(&"impairments.crosstalk_suppression_db".to_string()));
    }

    #[test]
    fn cross_constraints() {
        let text = format!("{MINIMAL}grid.sample_rate_hz = 3e6\ngrid.num_samples = 1000\n");
        let keys: Vec<String> = violations(&text).into_iter().map(|x| x.key).collect();
        assert!(keys.iter().filter(|k| *k == "grid.sample_rate_hz").count() >= 2);
        assert!(keys.contains(&"grid.num_samples".to_string()));
        let analytic = format!("{MINIMAL}scenario.mode = analytic\ngrid.num_samples = 1000\n");
        assert!(parse_config(&analytic).is_ok());
    }

    #[test]
    fn double_electronics_rejected() {
        let text = format!("{MINIMAL}model.electronic_floor = 0.05\nimpairments.electronic_floor = 0.05\n");
        assert!(violations(&text).iter().any(|x| x.key == "model.electronic_floor"));
    }

    #[test]
    fn text_round_trip() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.metadata.insert("pump".into(), "a few percent above threshold".into());
        c.impairments.crosstalk_amplitude = ImpairmentConfig::crosstalk_for_suppression(65.0);
        let mut back = parse_config(&to_text(&c)).unwrap();
        assert!((back.op_point.theta - c.op_point.theta).abs() <= 1e-15);
        back.op_point.theta = c.op_point.theta;
        assert_eq!(back, c);
    }
}
