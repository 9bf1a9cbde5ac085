#![no_main]

use crash_cluster::hac::{complete_linkage, cut_by_distance};
use crash_cluster::matrix::CondensedDistanceMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = CondensedDistanceMatrix::parse_export(text) else {
        return;
    };
    assert_eq!(CondensedDistanceMatrix::parse_export(&m.to_export_string()).unwrap(), m);
    if m.n() <= 64 {
        let merges = complete_linkage(&m);
        assert_eq!(cut_by_distance(&merges, 0.5).labels.len(), m.n());
    }
});
