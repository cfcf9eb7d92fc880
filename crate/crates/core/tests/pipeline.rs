use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use hetpol::impairments::add_electronic_noise;
use hetpol::scenario::{parse_sweep_csv, preset, run_scenario, sweep_csv, sweep_theta, RunMode, ScenarioConfig};
use hetpol::sideband::HeterodyneOperatingPoint;
use hetpol::spectral::{shot_noise_reference, tone_power, vbw_smooth, welch_psd, welch_psd_samples, AnalyzerSettings, Window};
use hetpol::timeseries::{DetectorConfig, PhotocurrentTrace, SimulationGrid};

const H: f64 = 6.626_070_15e-34;
const C: f64 = 299_792_458.0;
const LAMBDA: f64 = 1064e-9;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// fig2a operating point with every impairment and excess-noise source off.
fn bare(theta: f64) -> ScenarioConfig {
    let mut c = preset("fig2a").unwrap();
    c.mode = RunMode::Timeseries;
    c.op_point.theta = theta;
    c.model.pedestal_diffusion = 0.0;
    c.model.electronic_floor = 0.0;
    c.impairments.crosstalk_amplitude = 0.0;
    c.impairments.locked_linewidth = 0.0;
    c.impairments.servo_tone_index = 0.0;
    c.impairments.electronic_floor = 0.0;
    c
}

fn squeezing_band_error(c: &ScenarioConfig) -> f64 {
    let r = run_scenario(c).unwrap();
    let est = &r.traces.unwrap().signal;
    let (eta, s, gamma) = (c.model.eta, c.model.s_raw_dc, c.model.gamma);
    let mut worst = 0.0f64;
    for start in [100e3, 300e3, 1.5e6, 2.5e6] {
        let bins = est.bins_in(start, start + 200e3);
        let n = bins.len() as f64;
        let sim: f64 = bins.clone().map(|i| est.psd_rel_snl[i]).sum::<f64>() / n;
        let model: f64 = bins
            .map(|i| 1.0 - eta * (1.0 - s) / (1.0 + (est.freqs[i] / gamma).powi(2)))
            .sum::<f64>()
            / n;
        worst = worst.max((db(sim) - db(model)).abs());
    }
    worst
}

#[test]
fn perfect_correlation_limited_by_efficiency() {
    let mut c = bare(0.0);
    c.model.s_raw_dc = 0.0;
    assert!((db(1.0 - 0.94) + 12.2).abs() < 0.05);
    let err = squeezing_band_error(&c);
    assert!(err < 0.2, "max block deviation {err} dB");
}

#[test]
fn lossless_detection_keeps_raw_squeezing() {
    let mut c = bare(0.0);
    c.model.eta = 1.0;
    c.model.s_raw_dc = 0.1995;
    assert!((db(0.1995) + 7.0).abs() < 0.01);
    let err = squeezing_band_error(&c);
    assert!(err < 0.2, "max block deviation {err} dB");
}

fn snl_level(power: f64, eta: f64) -> f64 {
    let c = bare(0.0);
    let op = HeterodyneOperatingPoint { theta: 0.0, nu_beat: 1e6, power_1: power, power_2: power };
    let detector = DetectorConfig { eta, electronic_floor: 0.0 };
    shot_noise_reference(&op, &detector, &c.grid, &c.analyzer, 77).unwrap().snl_reference
}

#[test]
fn shot_noise_matches_photon_statistics() {
    for (p, eta) in [(1.3e-3, 0.94), (1.3e-3, 0.5), (5e-3, 1.0)] {
        let expected = 2.0 * (H * C / LAMBDA) * eta * 2.0 * p;
        let got = snl_level(p, eta);
        assert!((got / expected - 1.0).abs() < 0.01, "P={p} eta={eta}: {got:e} vs {expected:e}");
    }
}

#[test]
fn doubling_power_adds_three_db() {
    let step = db(snl_level(2.6e-3, 0.94) / snl_level(1.3e-3, 0.94));
    assert!((step - db(2.0)).abs() < 0.05, "{step} dB");
}

#[test]
fn electronics_level_relative_to_snl() {
    let c = bare(0.0);
    let trace = add_electronic_noise(PhotocurrentTrace::silent(c.grid, 0.94, 3.2e-21), 0.055).unwrap();
    let est = welch_psd(&trace, &c.analyzer).unwrap();
    let level = db(est.mean_rel(2e4, 3.5e6).unwrap());
    assert!((level - db(0.055)).abs() < 0.05, "{level} dB");
    assert!((db(0.055) + 12.6).abs() < 0.05);
}

fn bessel_j(n: i32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..30 {
        term *= -(x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
        sum += term;
    }
    sum
}

#[test]
fn servo_sidebands_follow_bessel_ratio() {
    let mut c = bare(10f64.to_radians());
    c.impairments.servo_tone_index = 0.2;
    let r = run_scenario(&c).unwrap();
    let est = &r.traces.unwrap().signal;
    let search = 2.0 * est.bin_spacing;
    let carrier = tone_power(est, 1e6, search, 3).unwrap().power;
    let expected = 2.0 * db(bessel_j(1, 0.2) / bessel_j(0, 0.2));
    for f in [1e6 - 22e3, 1e6 + 22e3] {
        let side = tone_power(est, f, search, 3).unwrap();
        assert!((side.freq - f).abs() <= est.bin_spacing);
        let ratio = db(side.power / carrier);
        assert!((ratio - expected).abs() < 0.3, "{ratio} vs {expected}");
    }
}

fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

fn rel_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n / (mean * mean)
}

#[test]
fn video_filter_variance_matches_hann_bin_correlation() {
    // periodogram correlation of neighbouring Hann bins: |2/3|², |1/6|²
    let (r1, r2) = (4.0 / 9.0, 1.0 / 36.0);
    let l = 3.0;
    let expected = (1.0 + 2.0 * (l - 1.0) / l * r1 + 2.0 * (l - 2.0) / l * r2) / l;
    let fs = 64e6;
    let settings = AnalyzerSettings { rbw: 50e3, vbw: 50e3, num_averages: 20, window: Window::Hann, span: (1e6, 2e7) };
    let bin = settings.bin_spacing(fs);
    let (mut raw, mut smooth) = (0.0, 0.0);
    let seeds = 20;
    for seed in 0..seeds {
        let est = welch_psd_samples(&white(seed, settings.required_samples(fs)), fs, &settings).unwrap();
        let filtered = vbw_smooth(&est, 2.0 * bin).unwrap();
        let bins: Vec<usize> = est.bins_in(2e6, 1.8e7).collect();
        raw += rel_variance(&bins.iter().map(|&i| est.psd[i]).collect::<Vec<_>>());
        smooth += rel_variance(&bins.iter().map(|&i| filtered.psd[i]).collect::<Vec<_>>());
    }
    let ratio = smooth / raw;
    assert!((ratio / expected - 1.0).abs() < 0.1, "{ratio} vs {expected}");
}

#[test]
fn estimator_spread_scales_with_averages() {
    let fs = 64e6;
    let spread = |averages: usize| -> f64 {
        let settings = AnalyzerSettings {
            rbw: 100e3,
            vbw: 100e3,
            num_averages: averages,
            window: Window::Hann,
            span: (1e6, 2e7),
        };
        let mut total = 0.0;
        for seed in 0..40 {
            let est = welch_psd_samples(&white(1000 + seed, settings.required_samples(fs)), fs, &settings).unwrap();
            let vals: Vec<f64> = est.bins_in(2e6, 1.8e7).map(|i| est.psd[i]).collect();
            total += rel_variance(&vals).sqrt();
        }
        total / 40.0
    };
    let ratio = spread(10) / spread(100);
    assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.3, "{ratio}");
}

#[test]
fn locked_residual_linewidth_is_unresolved() {
    let mut c = bare(10f64.to_radians());
    let clean = run_scenario(&c).unwrap();
    c.impairments.locked_linewidth = 1.0;
    let jittered = run_scenario(&c).unwrap();
    let tone = |r: &hetpol::scenario::ScenarioResult| {
        let est = &r.traces.as_ref().unwrap().signal;
        tone_power(est, 1e6, 2.0 * est.bin_spacing, 3).unwrap().power
    };
    let shift = db(tone(&jittered) / tone(&clean));
    assert!(shift.abs() < 0.05, "{shift} dB");
}

#[test]
fn analytic_sweep_matches_golden() {
    let config = preset("fig2a").unwrap();
    let mut analytic = config.clone();
    analytic.mode = RunMode::Analytic;
    let thetas: Vec<f64> = [0.0, 1.0, 5.0, 10.0, 22.5, 45.0].iter().map(|d: &f64| d.to_radians()).collect();
    let text = sweep_csv(&sweep_theta(&analytic, &thetas, &[1]).unwrap()).unwrap();
    let got = parse_sweep_csv(text.as_bytes()).unwrap();
    let golden = parse_sweep_csv(include_bytes!("golden/fig2a_analytic_sweep.csv")).unwrap();
    assert_eq!(got.len(), golden.len());
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-6 * b.abs().max(1.0),
        (None, None) => true,
        _ => false,
    };
    for (g, want) in got.iter().zip(&golden) {
        assert!(close(Some(g.theta_rad), Some(want.theta_rad)));
        assert!(close(g.floor_db, want.floor_db), "{g:?} vs {want:?}");
        assert!(close(g.mnr_db, want.mnr_db), "{g:?} vs {want:?}");
        assert!(close(g.beat_dbm, want.beat_dbm), "{g:?} vs {want:?}");
        assert_eq!(g.seed, want.seed);
    }
}

#[test]
fn short_trace_reports_needed_samples() {
    let mut c = bare(0.0);
    c.grid = SimulationGrid { num_samples: 1 << 16, ..c.grid };
    let err = run_scenario(&c).unwrap_err().to_string();
    assert!(err.contains("1616000"), "{err}");
}
