//! Spectrum-analyzer emulation: Welch PSD with RBW/VBW/averaging, shot-noise
//! normalization, and floor, MNR and tone extraction.
//!
//! The resolution bandwidth is realized as `ENBW x bin spacing`, so the Welch
//! segment length is `round(ENBW fs / rbw)`. Exactly `num_averages` segments
//! at 50% overlap are averaged.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::impairments::add_electronic_noise;
use crate::sideband::{to_db, Calibration, CorrectionMode, HeterodyneOperatingPoint};
use crate::timeseries::{
    apply_polarization_rotation, coherent_fields, detect_photocurrents, difference_current,
    DetectorConfig, PhotocurrentTrace, SimulationGrid,
};
use crate::fock::PolarizationRotation;

/// Minimum number of bins a floor estimate may rest on.
pub const MIN_FLOOR_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Equivalent noise bandwidth in bins.
    pub fn enbw(self) -> f64 {
        match self {
            Window::Hann => 1.5,
            Window::Rectangular => 1.0,
        }
    }

    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rectangular" | "rect" => Ok(Window::Rectangular),
            other => Err(Error::Config(format!("unknown window {other:?} (expected hann or rectangular)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSettings {
    pub rbw: f64,
    pub vbw: f64,
    pub num_averages: usize,
    pub window: Window,
    /// Displayed frequency interval `(start, stop)`, Hz.
    pub span: (f64, f64),
}

impl AnalyzerSettings {
    pub fn segment_len(&self, sample_rate: f64) -> usize {
        (self.window.enbw() * sample_rate / self.rbw).round() as usize
    }

    pub fn hop(&self, sample_rate: f64) -> usize {
        (self.segment_len(sample_rate) / 2).max(1)
    }

    /// Samples consumed by `num_averages` segments at 50% overlap.
    pub fn required_samples(&self, sample_rate: f64) -> usize {
        let seg = self.segment_len(sample_rate);
        seg + self.num_averages.saturating_sub(1) * self.hop(sample_rate)
    }

    pub fn bin_spacing(&self, sample_rate: f64) -> f64 {
        sample_rate / self.segment_len(sample_rate) as f64
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.rbw > 0.0 && self.rbw.is_finite()) {
            bad.push(format!("rbw must be > 0, got {}", self.rbw));
        }
        if !(self.vbw > 0.0 && self.vbw.is_finite()) {
            bad.push(format!("vbw must be > 0, got {}", self.vbw));
        }
        if self.num_averages == 0 {
            bad.push("num_averages must be >= 1".into());
        }
        let (start, stop) = self.span;
        if !(start >= 0.0 && stop > start && stop <= sample_rate / 2.0) {
            bad.push(format!(
                "span [{start}, {stop}] Hz must be a nonempty interval inside [0, {}] Hz",
                sample_rate / 2.0
            ));
        }
        if bad.is_empty() && self.segment_len(sample_rate) < 4 {
            bad.push(format!("rbw {} Hz is too coarse for sample_rate {sample_rate} Hz", self.rbw));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Uniform one-sided frequency grid `0, Δf, ..., fs/2`.
    pub freqs: Vec<f64>,
    /// Absolute one-sided density, W²/Hz.
    pub psd: Vec<f64>,
    /// `psd / snl_reference`.
    pub psd_rel_snl: Vec<f64>,
    /// Shot-noise density used for normalization, W²/Hz.
    pub snl_reference: f64,
    /// Converts power in W² to dBm when present.
    pub dbm_offset: Option<f64>,
    pub settings: AnalyzerSettings,
    pub bin_spacing: f64,
    /// Achieved resolution bandwidth, `ENBW x Δf`.
    pub rbw: f64,
    pub sample_rate: f64,
    /// Variance of the analyzed samples after mean removal.
    pub trace_variance: f64,
}

impl SpectrumEstimate {
    pub fn with_snl_reference(mut self, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::Numerical(format!("SNL reference must be positive, got {level}")));
        }
        self.snl_reference = level;
        self.psd_rel_snl = self.psd.iter().map(|p| p / level).collect();
        Ok(self)
    }

    pub fn with_calibration(mut self, cal: Calibration) -> Self {
        self.dbm_offset = Some(cal.dbm_offset);
        self
    }

    /// Power in one RBW at bin `i`, in dBm.
    pub fn psd_dbm(&self, i: usize) -> Option<f64> {
        self.dbm_offset
            .map(|dbm_offset| Calibration { dbm_offset }.to_dbm(self.psd[i] * self.rbw))
    }

    /// Bin indices inside `[lo, hi]`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = self.freqs.partition_point(|f| *f < lo);
        let last = self.freqs.partition_point(|f| *f <= hi);
        first..last.max(first)
    }

    pub fn span_bins(&self) -> std::ops::Range<usize> {
        self.bins_in(self.settings.span.0, self.settings.span.1)
    }

    /// Mean SNL-relative level over `[lo, hi]`.
    pub fn mean_rel(&self, lo: f64, hi: f64) -> Option<f64> {
        let r = self.bins_in(lo, hi);
        if r.is_empty() {
            return None;
        }
        let n = r.len() as f64;
        Some(self.psd_rel_snl[r].iter().sum::<f64>() / n)
    }

    /// `Σ psd Δf` over the full one-sided spectrum.
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_spacing
    }

    /// Relative Parseval mismatch `|Σ psd Δf / variance - 1|`.
    pub fn parseval_error(&self) -> f64 {
        if self.trace_variance == 0.0 {
            return if self.integrated_power() == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (self.integrated_power() / self.trace_variance - 1.0).abs()
    }
}

/// Welch estimate of a real sample sequence.
pub fn welch_psd_samples(samples: &[f64], sample_rate: f64, settings: &AnalyzerSettings) -> Result<SpectrumEstimate> {
    settings.validate(sample_rate)?;
    let required = settings.required_samples(sample_rate);
    if samples.len() < required {
        return Err(Error::InsufficientSamples {
            required,
            available: samples.len(),
        });
    }
    let seg = settings.segment_len(sample_rate);
    let hop = settings.hop(sample_rate);
    let data = &samples[..required];
    let mean = data.iter().sum::<f64>() / required as f64;
    let trace_variance = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / required as f64;

    let window = settings.window.coefficients(seg);
    let w_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let half = seg / 2;

    let periodograms: Vec<Vec<f64>> = (0..settings.num_averages)
        .into_par_iter()
        .map(|k| {
            let start = k * hop;
            let mut buf: Vec<Complex64> = data[start..start + seg]
                .iter()
                .zip(&window)
                .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..=half].iter().map(|z| z.norm_sqr()).collect()
        })
        .collect();

    let mut acc = vec![0.0; half + 1];
    for p in &periodograms {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let scale = 1.0 / (settings.num_averages as f64 * sample_rate * w_energy);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            v * scale * one_sided
        })
        .collect();
    let df = sample_rate / seg as f64;
    let freqs = (0..=half).map(|k| k as f64 * df).collect();
    Ok(SpectrumEstimate {
        freqs,
        psd_rel_snl: psd.clone(),
        psd,
        snl_reference: 1.0,
        dbm_offset: None,
        settings: *settings,
        bin_spacing: df,
        rbw: settings.window.enbw() * df,
        sample_rate,
        trace_variance,
    })
}

/// Welch estimate normalized by the trace's own shot-noise density.
pub fn welch_psd(trace: &PhotocurrentTrace, settings: &AnalyzerSettings) -> Result<SpectrumEstimate> {
    let est = welch_psd_samples(&trace.samples, trace.grid.sample_rate, settings)?;
    if trace.snl_density > 0.0 {
        est.with_snl_reference(trace.snl_density)
    } else {
        Ok(est)
    }
}

/// Centered moving average over `1 + 2 floor(vbw / 2Δf)` bins; edges average
/// over the bins available.
pub fn vbw_smooth(estimate: &SpectrumEstimate, vbw: f64) -> Result<SpectrumEstimate> {
    let (start, stop) = estimate.settings.span;
    if !(vbw > 0.0) || vbw >= stop - start {
        return Err(Error::Config(format!(
            "vbw {vbw} Hz must be positive and below the span width {} Hz",
            stop - start
        )));
    }
    let half = (vbw / (2.0 * estimate.bin_spacing)).floor() as usize;
    let mut out = estimate.clone();
    out.settings.vbw = vbw;
    if half == 0 {
        return Ok(out);
    }
    let n = estimate.psd.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &estimate.psd {
        prefix.push(prefix.last().unwrap() + v);
    }
    out.psd = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    out.psd_rel_snl = out.psd.iter().map(|p| p / out.snl_reference).collect();
    Ok(out)
}

/// Full analyzer chain: Welch followed by VBW smoothing.
pub fn analyze(trace: &PhotocurrentTrace, settings: &AnalyzerSettings) -> Result<SpectrumEstimate> {
    let est = welch_psd(trace, settings)?;
    vbw_smooth(&est, settings.vbw)
}

/// Shot-noise reference: uncorrelated coherent beams of the operating
/// point's powers, no rotation, detected with `detector.eta`. The
/// detector's electronic level is added after differencing. The returned
/// estimate is normalized to its own mean level over the span.
pub fn shot_noise_reference(
    op: &HeterodyneOperatingPoint,
    detector: &DetectorConfig,
    grid: &SimulationGrid,
    settings: &AnalyzerSettings,
    seed: u64,
) -> Result<SpectrumEstimate> {
    let grid = grid.with_seed(seed);
    let fields = coherent_fields(op, &grid)?;
    let fields = apply_polarization_rotation(fields, PolarizationRotation { theta: 0.0 });
    let bare = DetectorConfig { eta: detector.eta, electronic_floor: 0.0 };
    let trace = difference_current(&detect_photocurrents(&fields, &bare)?)?;
    let trace = add_electronic_noise(trace, detector.electronic_floor)?;
    let est = analyze(&trace, settings)?;
    let (lo, hi) = settings.span;
    let level = est.mean_rel(lo, hi).ok_or_else(|| Error::Numerical("SNL span holds no bins".into()))?
        * est.snl_reference;
    est.with_snl_reference(level)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorEstimate {
    /// SNL-relative linear level.
    pub linear: f64,
    pub db: f64,
    pub bins: usize,
}

/// Regions left out of a floor estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorExclusions {
    /// Half-width of the region removed around the beat, Hz.
    pub beat_halfwidth: f64,
    /// Additional tone frequencies to notch out.
    pub notches: Vec<f64>,
    pub notch_halfwidth: f64,
}

/// Median of the SNL-relative PSD over `band` (defaults to the span),
/// excluding the beat region and listed notches.
pub fn extract_noise_floor(
    estimate: &SpectrumEstimate,
    beat_freq: f64,
    exclusions: &FloorExclusions,
    band: Option<(f64, f64)>,
) -> Result<FloorEstimate> {
    let (lo, hi) = band.unwrap_or(estimate.settings.span);
    let (s0, s1) = estimate.settings.span;
    if lo < s0 || hi > s1 {
        return Err(Error::Config(format!(
            "floor band [{lo}, {hi}] Hz lies outside the span [{s0}, {s1}] Hz"
        )));
    }
    let mut values: Vec<f64> = estimate
        .bins_in(lo, hi)
        .filter(|&i| {
            let f = estimate.freqs[i];
            (f - beat_freq).abs() > exclusions.beat_halfwidth
                && exclusions
                    .notches
                    .iter()
                    .all(|n| (f - n).abs() > exclusions.notch_halfwidth)
        })
        .map(|i| estimate.psd_rel_snl[i])
        .collect();
    if values.len() < MIN_FLOOR_BINS {
        return Err(Error::Numerical(format!(
            "only {} bins remain for the floor estimate, need {MIN_FLOOR_BINS}",
            values.len()
        )));
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let linear = if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    };
    Ok(FloorEstimate { linear, db: to_db(linear), bins: m })
}

/// MNR in dB. Corrected mode subtracts the electronic level from both the
/// floor and the SNL; the detection efficiency is never divided out.
pub fn extract_mnr(floor: f64, electronic: f64, snl: f64, mode: CorrectionMode) -> Result<f64> {
    if !(floor >= 0.0 && snl > 0.0) {
        return Err(Error::Numerical(format!("invalid levels floor={floor} snl={snl}")));
    }
    match mode {
        CorrectionMode::Raw => Ok(to_db(floor / snl)),
        CorrectionMode::ElectronicCorrected => {
            if electronic >= floor || electronic >= snl {
                return Err(Error::Numerical(format!(
                    "electronic level {electronic} is not below the floor {floor}; correction is unphysical"
                )));
            }
            Ok(to_db((floor - electronic) / (snl - electronic)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneMeasurement {
    /// Frequency of the peak bin, Hz.
    pub freq: f64,
    /// Integrated power above the local floor, W².
    pub power: f64,
}

/// Integrates the strongest tone within `search` Hz of `freq` over
/// `±half_bins` bins around its peak, minus the median density of the
/// surrounding `±10 half_bins` bins.
pub fn tone_power(estimate: &SpectrumEstimate, freq: f64, search: f64, half_bins: usize) -> Result<ToneMeasurement> {
    let range = estimate.bins_in(freq - search, freq + search);
    let peak = range
        .clone()
        .max_by(|&a, &b| estimate.psd[a].total_cmp(&estimate.psd[b]))
        .ok_or_else(|| Error::Numerical(format!("no bins near {freq} Hz")))?;
    let n = estimate.psd.len();
    let lo = peak.saturating_sub(half_bins);
    let hi = (peak + half_bins + 1).min(n);
    let outer = 10 * half_bins.max(1);
    let mut side: Vec<f64> = (peak.saturating_sub(outer)..(peak + outer + 1).min(n))
        .filter(|i| *i < lo || *i >= hi)
        .map(|i| estimate.psd[i])
        .collect();
    side.sort_by(f64::total_cmp);
    let local = side.get(side.len() / 2).copied().unwrap_or(0.0);
    let power: f64 = estimate.psd[lo..hi].iter().map(|p| p - local).sum::<f64>() * estimate.bin_spacing;
    Ok(ToneMeasurement {
        freq: estimate.freqs[peak],
        power: power.max(0.0),
    })
}

/// Spectral width containing `fraction` of the power in `[lo, hi]` above
/// `baseline` (W²/Hz), measured between the symmetric quantiles.
pub fn occupied_bandwidth(estimate: &SpectrumEstimate, lo: f64, hi: f64, baseline: f64, fraction: f64) -> f64 {
    let r = estimate.bins_in(lo, hi);
    let excess: Vec<f64> = estimate.psd[r.clone()].iter().map(|p| (p - baseline).max(0.0)).collect();
    let total: f64 = excess.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail = 0.5 * (1.0 - fraction) * total;
    let mut acc = 0.0;
    let mut first = 0;
    for (i, e) in excess.iter().enumerate() {
        acc += e;
        if acc >= tail {
            first = i;
            break;
        }
    }
    acc = 0.0;
    let mut last = excess.len() - 1;
    for (i, e) in excess.iter().enumerate().rev() {
        acc += e;
        if acc >= tail {
            last = i;
            break;
        }
    }
    (last.saturating_sub(first) + 1) as f64 * estimate.bin_spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{stream_rng, white_gaussian};

    fn settings(rbw: f64, averages: usize, span: (f64, f64)) -> AnalyzerSettings {
        AnalyzerSettings {
            rbw,
            vbw: rbw,
            num_averages: averages,
            window: Window::Hann,
            span,
        }
    }

    #[test]
    fn segment_geometry() {
        let s = settings(3e3, 100, (5e4, 3e6));
        assert_eq!(s.segment_len(64e6), 32000);
        assert_eq!(s.required_samples(64e6), 32000 + 99 * 16000);
        assert!((s.bin_spacing(64e6) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_density() {
        let fs = 1e6;
        let s = settings(1.5e3, 100, (1e4, 4.9e5));
        let x = white_gaussian(&mut stream_rng(3, 1), s.required_samples(fs), 1.0);
        let est = welch_psd_samples(&x, fs, &s).unwrap();
        let r = est.span_bins();
        let mean = est.psd[r.clone()].iter().sum::<f64>() / r.len() as f64;
        assert!((10.0 * (mean / (2.0 / fs)).log10()).abs() < 0.2);
        assert!(est.parseval_error() < 0.01);
    }

    #[test]
    fn sinusoid_power() {
        let fs = 1e6;
        let s = settings(1.5e3, 20, (1e4, 4.9e5));
        let amp = 0.7;
        let f0 = 123_456.0;
        let x: Vec<f64> = (0..s.required_samples(fs))
            .map(|k| amp * (2.0 * std::f64::consts::PI * f0 * k as f64 / fs).cos())
            .collect();
        let est = welch_psd_samples(&x, fs, &s).unwrap();
        let tone = tone_power(&est, f0, 5e3, 3).unwrap();
        assert!((tone.power / (amp * amp / 2.0) - 1.0).abs() < 0.01);
        assert!((tone.freq - f0).abs() <= est.bin_spacing);
    }

    #[test]
    fn insufficient_samples_named() {
        let s = settings(1.5e3, 100, (1e4, 4.9e5));
        match welch_psd_samples(&[0.0; 1000], 1e6, &s) {
            Err(Error::InsufficientSamples { required, available }) => {
                assert_eq!(required, 50_500);
                assert_eq!(available, 1000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vbw_guards_and_identity() {
        let fs = 1e6;
        let s = settings(1.5e3, 4, (1e4, 4.9e5));
        let x = white_gaussian(&mut stream_rng(3, 1), s.required_samples(fs), 1.0);
        let est = welch_psd_samples(&x, fs, &s).unwrap();
        assert_eq!(vbw_smooth(&est, est.bin_spacing).unwrap().psd, est.psd);
        assert!(vbw_smooth(&est, 1e6).is_err());
    }

    #[test]
    fn floor_of_flat_trace() {
        let fs = 1e6;
        let s = settings(1.5e3, 2, (1e4, 4.9e5));
        let mut est = welch_psd_samples(&vec![0.0; s.required_samples(fs)], fs, &s).unwrap();
        let level = 10f64.powf(-0.48);
        est.psd_rel_snl.iter_mut().for_each(|v| *v = level);
        let ex = FloorExclusions { beat_halfwidth: 1e4, notches: vec![], notch_halfwidth: 0.0 };
        let f = extract_noise_floor(&est, 2e5, &ex, None).unwrap();
        assert!((f.db + 4.8).abs() < 0.05);
        let narrow = extract_noise_floor(&est, 2e5, &ex, Some((1.9e5, 2.1e5)));
        assert!(matches!(narrow, Err(Error::Numerical(_))));
    }

    #[test]
    fn mnr_examples() {
        let corrected = extract_mnr(0.331, 0.055, 1.0, CorrectionMode::ElectronicCorrected).unwrap();
        assert!((corrected - 10.0 * (0.276f64 / 0.945).log10()).abs() < 1e-9);
        assert!((corrected + 5.345).abs() < 0.01);
        let raw = extract_mnr(0.331, 0.0, 1.0, CorrectionMode::Raw).unwrap();
        let c0 = extract_mnr(0.331, 0.0, 1.0, CorrectionMode::ElectronicCorrected).unwrap();
        assert_eq!(raw, c0);
        assert!(extract_mnr(0.05, 0.055, 1.0, CorrectionMode::ElectronicCorrected).is_err());
    }
}
