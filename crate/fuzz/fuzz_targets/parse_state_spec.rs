#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let n_max = text.len() % 3 == 0;
    if let Ok(state) = hetpol::fock::parse_state_spec(text, n_max.then_some(6)) {
        assert!((state.norm_sqr() - 1.0).abs() < 1e-9);
        // bounded so a huge truncation cannot stall the run
        if state.n_max() <= 12 {
            let _ = hetpol::fock::number_difference_moments(
                &state,
                hetpol::fock::PolarizationRotation { theta: 0.3 },
            );
        }
    }
});
