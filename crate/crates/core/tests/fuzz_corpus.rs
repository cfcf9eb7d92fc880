//! Replays the checked-in fuzz seeds through the same entry points.

use std::path::PathBuf;

use hetpol::fock::{parse_state_spec, PolarizationRotation};
use hetpol::scenario::{parse_config, parse_spectra_csv, parse_sweep_csv, to_text};
use hetpol::trace_dump::decode_trace;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("parse_config") {
        let parsed = parse_config(std::str::from_utf8(&bytes).unwrap());
        let expect_ok = name.starts_with("fig2");
        assert_eq!(parsed.is_ok(), expect_ok, "{name}");
        if let Ok(c) = parsed {
            assert_eq!(parse_config(&to_text(&c)).unwrap().name, c.name);
        }
    }
}

#[test]
fn state_seeds() {
    for (name, bytes) in seeds("parse_state_spec") {
        let parsed = parse_state_spec(std::str::from_utf8(&bytes).unwrap(), None);
        assert_eq!(parsed.is_ok(), name != "truncated", "{name}");
        if let Ok(s) = parsed {
            hetpol::fock::number_difference_moments(&s, PolarizationRotation { theta: 0.3 }).unwrap();
        }
    }
}

#[test]
fn trace_seeds() {
    for (name, bytes) in seeds("decode_trace") {
        let decoded = decode_trace(&bytes);
        assert_eq!(decoded.is_ok(), name != "short_body.bin", "{name}");
    }
    let three = decode_trace(&std::fs::read(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/decode_trace/three_samples.bin"),
    ).unwrap())
    .unwrap();
    assert_eq!(three.sample_rate, 64e6);
    assert_eq!(three.samples, vec![0.0, -1.5, 2.25]);
}

#[test]
fn csv_seeds() {
    for (name, bytes) in seeds("parse_csv") {
        let spectra = parse_spectra_csv(&bytes);
        let sweep = parse_sweep_csv(&bytes);
        assert!(spectra.is_ok() != sweep.is_ok(), "{name}: exactly one schema should accept");
    }
}
