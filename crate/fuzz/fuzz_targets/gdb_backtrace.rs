#![no_main]

use crash_cluster::ingest::parse_gdb_backtrace;
use crash_cluster::similarity::similarity;
use crash_cluster::SimilarityConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(stack) = parse_gdb_backtrace(text) {
        let s = similarity(&stack, &stack, &SimilarityConfig::default()).unwrap();
        assert_eq!(s, 1.0);
    }
});
