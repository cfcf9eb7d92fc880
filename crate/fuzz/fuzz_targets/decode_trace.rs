#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = hetpol::trace_dump::decode_trace(data) {
        let mut out = Vec::new();
        hetpol::trace_dump::write_trace(&mut out, trace.sample_rate, &trace.samples).unwrap();
        assert_eq!(hetpol::trace_dump::decode_trace(&out).unwrap().samples.len(), trace.samples.len());
    }
    let _ = hetpol::trace_dump::read_trace(data);
});
