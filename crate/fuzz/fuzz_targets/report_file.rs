#![no_main]

use std::path::Path;

use crash_cluster::ingest::{parse_report_file, resolve_frame_offsets};
use crash_cluster::preprocess::{trim_abort_chain, LibcPolicy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = parse_report_file(data, Path::new("fuzz.json")) {
        let report = resolve_frame_offsets(report);
        let trimmed = trim_abort_chain(&report.stack, &LibcPolicy::default());
        assert!(!trimmed.is_empty());
    }
});
