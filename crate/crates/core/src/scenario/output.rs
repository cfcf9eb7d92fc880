//! CSV and text-summary artifacts.
//!
//! Spectra: `freq_hz,psd_rel_snl_db,psd_dbm,trace_id`, one row per bin in the
//! analyzer span, traces in the order analytic, signal, snl, electronics.
//! Sweeps: `theta_rad,floor_db,mnr_db,beat_dbm,seed`; failed points keep
//! their θ and seed with empty metric fields. Numbers carry 9 significant
//! digits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sideband::to_db;
use crate::spectral::SpectrumEstimate;

use super::config::correction_name;
use super::{ScenarioResult, SweepResult};

pub const SPECTRA_HEADER: [&str; 4] = ["freq_hz", "psd_rel_snl_db", "psd_dbm", "trace_id"];
pub const SWEEP_HEADER: [&str; 5] = ["theta_rad", "floor_db", "mnr_db", "beat_dbm", "seed"];

fn num(v: f64) -> String {
    format!("{v:.8e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn spectra_csv(traces: &[(&str, &SpectrumEstimate)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SPECTRA_HEADER).map_err(csv_error)?;
    for (id, est) in traces {
        for i in est.span_bins() {
            let dbm = est.psd_dbm(i).map(num).unwrap_or_default();
            w.write_record([num(est.freqs[i]), num(to_db(est.psd_rel_snl[i])), dbm, id.to_string()])
                .map_err(csv_error)?;
        }
    }
    finish(w)
}

pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mode = result.config.correction_mode;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for p in &result.points {
        let (floor, mnr, beat) = match &p.outcome {
            Ok(m) => (num(m.floor_db), num(m.mnr_db(mode)), num(m.beat_dbm)),
            Err(_) => Default::default(),
        };
        w.write_record([num(p.theta), floor, mnr, beat, p.seed.to_string()])
            .map_err(csv_error)?;
    }
    finish(w)
}

/// Anything that renders to one of the two CSV schemas.
pub trait CsvArtifact {
    fn to_csv(&self) -> Result<String>;
}

impl CsvArtifact for ScenarioResult {
    fn to_csv(&self) -> Result<String> {
        spectra_csv(&self.spectra())
    }
}

impl CsvArtifact for SweepResult {
    fn to_csv(&self) -> Result<String> {
        sweep_csv(self)
    }
}

impl CsvArtifact for [(&str, &SpectrumEstimate)] {
    fn to_csv(&self) -> Result<String> {
        spectra_csv(self)
    }
}

pub fn emit_csv<A: CsvArtifact + ?Sized>(artifact: &A, path: &Path) -> Result<()> {
    let text = artifact.to_csv()?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraRow {
    pub freq_hz: f64,
    pub psd_rel_snl_db: f64,
    pub psd_dbm: Option<f64>,
    pub trace_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta_rad: f64,
    pub floor_db: Option<f64>,
    pub mnr_db: Option<f64>,
    pub beat_dbm: Option<f64>,
    pub seed: u64,
}

fn records(bytes: &[u8], header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let found = r.headers().map_err(csv_error)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header {}, found {}",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records().map(|rec| rec.map_err(csv_error)).collect()
}

fn field_f64(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Format(format!("row {}: bad {name} {s:?}", rec.position().map_or(0, |p| p.line()))))
}

fn optional_f64(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
    if rec.get(i).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        field_f64(rec, i, name).map(Some)
    }
}

pub fn parse_spectra_csv(bytes: &[u8]) -> Result<Vec<SpectraRow>> {
    records(bytes, &SPECTRA_HEADER)?
        .iter()
        .map(|rec| {
            Ok(SpectraRow {
                freq_hz: field_f64(rec, 0, "freq_hz")?,
                psd_rel_snl_db: field_f64(rec, 1, "psd_rel_snl_db")?,
                psd_dbm: optional_f64(rec, 2, "psd_dbm")?,
                trace_id: rec.get(3).unwrap_or("").to_string(),
            })
        })
        .collect()
}

pub fn parse_sweep_csv(bytes: &[u8]) -> Result<Vec<SweepRow>> {
    records(bytes, &SWEEP_HEADER)?
        .iter()
        .map(|rec| {
            let seed_text = rec.get(4).unwrap_or("");
            Ok(SweepRow {
                theta_rad: field_f64(rec, 0, "theta_rad")?,
                floor_db: optional_f64(rec, 1, "floor_db")?,
                mnr_db: optional_f64(rec, 2, "mnr_db")?,
                beat_dbm: optional_f64(rec, 3, "beat_dbm")?,
                seed: seed_text
                    .parse()
                    .map_err(|_| Error::Format(format!("bad seed {seed_text:?}")))?,
            })
        })
        .collect()
}

fn db2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

/// Fixed-order `key = value` block.
pub fn emit_summary(result: &ScenarioResult) -> String {
    let c = &result.config;
    let a = result.analytic.as_ref();
    let s = result.simulated.as_ref();
    let p = result.primary();
    let mode = c.correction_mode;
    let lines = [
        ("scenario", c.name.clone()),
        ("mode", c.mode.name().to_string()),
        ("correction_mode", correction_name(mode).to_string()),
        ("seed", c.grid.seed.to_string()),
        ("theta_deg", format!("{}", c.op_point.theta.to_degrees())),
        ("nu_beat_hz", format!("{}", c.op_point.nu_beat)),
        ("gamma_hz", format!("{}", c.model.gamma)),
        ("eta", format!("{}", c.model.eta)),
        ("s_raw_dc", format!("{}", c.model.s_raw_dc)),
        ("power_1_w", format!("{}", c.op_point.power_1)),
        ("power_2_w", format!("{}", c.op_point.power_2)),
        ("rbw_hz", format!("{}", c.analyzer.rbw)),
        ("vbw_hz", format!("{}", c.analyzer.vbw)),
        ("num_averages", c.analyzer.num_averages.to_string()),
        ("electronic_floor", format!("{}", c.impairments.electronic_floor + c.model.electronic_floor)),
        ("floor_db", db2(p.map(|m| m.floor_db))),
        ("floor_analytic_db", db2(a.map(|m| m.floor_db))),
        ("floor_simulated_db", db2(s.map(|m| m.floor_db))),
        ("floor_delta_db", db2(result.floor_delta_db)),
        ("MNR_raw_db", db2(p.map(|m| m.mnr_raw_db))),
        ("MNR_corrected_db", db2(p.map(|m| m.mnr_corrected_db))),
        ("MNR_corrected_analytic_db", db2(a.map(|m| m.mnr_corrected_db))),
        ("MNR_corrected_simulated_db", db2(s.map(|m| m.mnr_corrected_db))),
        ("MNR_reported_db", db2(p.map(|m| m.mnr_db(mode)))),
        ("beat_dbm", db2(p.map(|m| m.beat_dbm))),
        ("beat_analytic_dbm", db2(a.map(|m| m.beat_dbm))),
        ("beat_simulated_dbm", db2(s.map(|m| m.beat_dbm))),
        ("beat_freq_hz", p.map(|m| format!("{}", m.beat_freq)).unwrap_or_else(|| "n/a".into())),
        ("dbm_scale", format!("calibrated to carrier anchor {} dBm", c.analysis.carrier_anchor_dbm)),
    ];
    let mut out = String::new();
    for (k, v) in lines {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

pub fn emit_sweep_summary(result: &SweepResult) -> String {
    let mode = result.config.correction_mode;
    let mut out = format!("scenario = {}\naxis = {}\npoints = {}\n", result.config.name, result.axis, result.points.len());
    for (i, p) in result.points.iter().enumerate() {
        match &p.outcome {
            Ok(m) => out.push_str(&format!(
                "point {i}: theta_rad = {:.6e}, seed = {}, floor_db = {:.2}, mnr_db = {:.2}, beat_dbm = {:.2}\n",
                p.theta,
                p.seed,
                m.floor_db,
                m.mnr_db(mode),
                m.beat_dbm
            )),
            Err(e) => out.push_str(&format!(
                "point {i}: theta_rad = {:.6e}, seed = {}, failed: {e}\n",
                p.theta, p.seed
            )),
        }
    }
    match result.fit {
        Some(f) => out.push_str(&format!(
            "fit_sin2_amplitude_w2 = {:.6e}\nfit_r_squared = {:.6}\n",
            f.amplitude, f.r_squared
        )),
        None => out.push_str("fit_sin2_amplitude_w2 = n/a\nfit_r_squared = n/a\n"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spectrum_is_header_only() {
        let text = spectra_csv(&[]).unwrap();
        assert_eq!(text, "freq_hz,psd_rel_snl_db,psd_dbm,trace_id\n");
        assert!(parse_spectra_csv(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(1234.56789012), "1.23456789e3");
        assert_eq!(num(-4.8), "-4.80000000e0");
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_sweep_csv(b"theta,floor\n1,2\n").is_err());
        assert!(parse_spectra_csv(b"freq_hz,psd_rel_snl_db,psd_dbm,trace_id\nx,1,,a\n").is_err());
    }
}
