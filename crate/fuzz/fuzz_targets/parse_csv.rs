#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = hetpol::scenario::parse_spectra_csv(data);
    let _ = hetpol::scenario::parse_sweep_csv(data);
});
