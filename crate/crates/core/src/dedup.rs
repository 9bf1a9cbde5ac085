//! Exact-duplicate removal by hashing frame-key sequences.
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use xxhash_rust::xxh3::Xxh3;

use crate::error::{Error, Result};
use crate::ingest::{load_report_dir, ReportBatch};
use crate::model::{CallStack, CrashReport, Frame, SimilarityConfig};
use crate::preprocess::{comparable_frames, frame_key, FrameKey, LibcPolicy};

/// Name of the subdirectory duplicates are moved into.
pub const DUPLICATES_DIR: &str = "duplicates";

/// 128-bit digest of a length-prefixed frame-key sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StackDigest(pub u128);

pub fn stack_digest(stack: &CallStack, policy: &LibcPolicy, config: &SimilarityConfig) -> StackDigest {
    digest_frames(comparable_frames(stack, policy, config))
}

fn digest_frames(frames: &[Frame]) -> StackDigest {
    let mut h = Xxh3::new();
    h.update(&(frames.len() as u64).to_le_bytes());
    for frame in frames {
        match frame_key(frame) {
            FrameKey::ModuleOffset { module, offset } => {
                h.update(&[0]);
                update_str(&mut h, module);
                h.update(&offset.to_le_bytes());
            }
            FrameKey::SymbolLine {
                function,
                file,
                line,
            } => {
                h.update(&[1]);
                update_str(&mut h, function);
                match file {
                    Some(f) => {
                        h.update(&[1]);
                        update_str(&mut h, f);
                    }
                    None => h.update(&[0]),
                }
                h.update(&line.map_or(0u64, |l| u64::from(l) + 1).to_le_bytes());
            }
            FrameKey::RawAddress(addr) => {
                h.update(&[2]);
                h.update(&addr.to_le_bytes());
            }
        }
    }
    StackDigest(h.digest128())
}

fn update_str(h: &mut Xxh3, s: &str) {
    h.update(&(s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

/// For each report, the index of the earlier report it duplicates, if any.
///
/// Digest collisions are resolved by comparing the key sequences.
pub fn find_duplicates(
    reports: &[CrashReport],
    policy: &LibcPolicy,
    config: &SimilarityConfig,
) -> Vec<Option<usize>> {
    let digests: Vec<StackDigest> = reports
        .par_iter()
        .map(|r| stack_digest(&r.stack, policy, config))
        .collect();
    let keys = |i: usize| {
        comparable_frames(&reports[i].stack, policy, config)
            .iter()
            .map(frame_key)
    };

    let mut seen: HashMap<StackDigest, Vec<usize>> = HashMap::with_capacity(reports.len());
    let mut result = Vec::with_capacity(reports.len());
    for (i, digest) in digests.into_iter().enumerate() {
        let reps = seen.entry(digest).or_default();
        let original = reps.iter().copied().find(|&k| keys(k).eq(keys(i)));
        if original.is_none() {
            reps.push(i);
        }
        result.push(original);
    }
    result
}

/// Keeps the first report of every distinct stack, preserving order.
pub fn dedup_reports(
    batch: ReportBatch,
    policy: &LibcPolicy,
    config: &SimilarityConfig,
) -> (ReportBatch, usize) {
    let dups = find_duplicates(&batch.reports, policy, config);
    let total = batch.reports.len();
    let reports: Vec<CrashReport> = batch
        .reports
        .into_iter()
        .zip(&dups)
        .filter(|(_, d)| d.is_none())
        .map(|(r, _)| r)
        .collect();
    let removed = total - reports.len();
    (
        ReportBatch {
            reports,
            warnings: batch.warnings,
        },
        removed,
    )
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DedupSummary {
    pub kept: usize,
    pub removed: usize,
    /// Destination paths of the moved duplicates.
    pub moved: Vec<PathBuf>,
    pub warnings: Vec<(PathBuf, String)>,
}

/// Moves duplicate report files of `dir` into `dir/duplicates/`.
pub fn dedup_dir(dir: &Path, policy: &LibcPolicy, config: &SimilarityConfig) -> Result<DedupSummary> {
    let batch = load_report_dir(dir)?;
    let dups = find_duplicates(&batch.reports, policy, config);
    let mut summary = DedupSummary {
        warnings: batch.warnings,
        ..Default::default()
    };
    let target_dir = dir.join(DUPLICATES_DIR);
    for (report, dup) in batch.reports.iter().zip(&dups) {
        if dup.is_none() {
            summary.kept += 1;
            continue;
        }
        if !target_dir.is_dir() {
            std::fs::create_dir_all(&target_dir).map_err(|e| Error::io(&target_dir, e))?;
        }
        let dest = target_dir.join(report.file_name());
        if dest.exists() {
            return Err(Error::io(
                &dest,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "destination already exists"),
            ));
        }
        std::fs::rename(&report.source_path, &dest).map_err(|e| Error::io(&report.source_path, e))?;
        summary.removed += 1;
        summary.moved.push(dest);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Frame;
    use crate::similarity::frame_similarity;

    fn stack(offsets: &[u64]) -> CallStack {
        CallStack::new(
            offsets
                .iter()
                .enumerate()
                .map(|(i, &o)| Frame::builder(i).module("/bin/target", Some(o)).build().unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn batch(stacks: &[&[u64]]) -> ReportBatch {
        ReportBatch {
            reports: stacks
                .iter()
                .enumerate()
                .map(|(i, s)| CrashReport::new(format!("r{i}"), stack(s), vec![], format!("r{i}.json")))
                .collect(),
            warnings: vec![],
        }
    }

    fn digest(s: &[u64]) -> StackDigest {
        stack_digest(&stack(s), &LibcPolicy::default(), &SimilarityConfig::default())
    }

    #[test]
    fn digest_properties() {
        assert_eq!(digest(&[1, 2, 3]), digest(&[1, 2, 3]));
        assert_ne!(digest(&[1, 2, 3]), digest(&[1, 2, 4]));
        assert_ne!(digest(&[1, 2, 3]), digest(&[1, 2, 3, 4]));
    }

    #[test]
    fn digest_separates_variants() {
        let sym = CallStack::new(vec![Frame::builder(0).function("f").build().unwrap()]).unwrap();
        let sym_file = CallStack::new(vec![Frame::builder(0).function("f").source("a.c", Some(1)).build().unwrap()]).unwrap();
        let (p, c) = (LibcPolicy::default(), SimilarityConfig::default());
        assert_ne!(stack_digest(&sym, &p, &c), stack_digest(&sym_file, &p, &c));
    }

    #[test]
    fn digest_uses_trimmed_stack() {
        let libc = |i, f: &str, o| Frame::builder(i).function(f).module("/lib/libc.so.6", Some(o)).build().unwrap();
        let main = |i| Frame::builder(i).function("main").module("/bin/t", Some(9)).build().unwrap();
        let a = CallStack::new(vec![libc(0, "raise", 1), libc(1, "free", 2), main(2)]).unwrap();
        let b = CallStack::new(vec![libc(0, "abort", 7), libc(1, "free", 2), main(2)]).unwrap();
        let p = LibcPolicy::default();
        let c = SimilarityConfig::default();
        assert_eq!(stack_digest(&a, &p, &c), stack_digest(&b, &p, &c));
        let c = c.with_trim(false);
        assert_ne!(stack_digest(&a, &p, &c), stack_digest(&b, &p, &c));
    }

    #[test]
    fn three_identical() {
        let (kept, removed) = dedup_reports(batch(&[&[1, 2], &[1, 2], &[1, 2]]), &LibcPolicy::default(), &SimilarityConfig::default());
        assert_eq!(removed, 2);
        assert_eq!(kept.reports.len(), 1);
        assert_eq!(kept.reports[0].id, "r0");
    }

    #[test]
    fn all_distinct() {
        let b = batch(&[&[1], &[2], &[1, 2]]);
        let (kept, removed) = dedup_reports(b.clone(), &LibcPolicy::default(), &SimilarityConfig::default());
        assert_eq!(removed, 0);
        assert_eq!(kept.reports, b.reports);
    }

    #[test]
    fn idempotent_and_sound() {
        let b = batch(&[&[1, 2], &[3], &[1, 2], &[3, 4], &[3], &[1]]);
        let (p, c) = (LibcPolicy::default(), SimilarityConfig::default());
        let dups = find_duplicates(&b.reports, &p, &c);
        assert_eq!(dups, [None, None, Some(0), None, Some(1), None]);
        for (i, d) in dups.iter().enumerate() {
            if let Some(k) = d {
                let s = frame_similarity(b.reports[i].stack.frames(), b.reports[*k].stack.frames(), &c).unwrap();
                assert_eq!(s, 1.0);
            }
        }
        let (kept, removed) = dedup_reports(b, &p, &c);
        assert_eq!(removed, 2);
        let ids: Vec<_> = kept.reports.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["r0", "r1", "r3", "r5"]);
        let (again, removed) = dedup_reports(kept.clone(), &p, &c);
        assert_eq!(removed, 0);
        assert_eq!(again.reports, kept.reports);
    }

    #[test]
    fn prefix_match_is_not_a_duplicate() {
        // similarity is 1.0 here, yet the stacks differ
        let b = batch(&[&[1, 2], &[1, 2, 3]]);
        let c = SimilarityConfig::default();
        let s = frame_similarity(b.reports[0].stack.frames(), b.reports[1].stack.frames(), &c).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(dedup_reports(b, &LibcPolicy::default(), &c).1, 0);
    }

    const REPORT: &str = r##"{"stacktrace": ["#0  0x10 in foo ()", "#1  0x20 in main ()"]}"##;

    #[test]
    fn dir_moves_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.json"), REPORT).unwrap();
        std::fs::write(dir.path().join("b.json"), REPORT).unwrap();
        let s = dedup_dir(dir.path(), &LibcPolicy::default(), &SimilarityConfig::default()).unwrap();
        assert_eq!((s.kept, s.removed), (1, 1));
        assert!(dir.path().join("a.json").exists());
        assert!(!dir.path().join("b.json").exists());
        assert!(dir.path().join("duplicates/b.json").exists());

        let s = dedup_dir(dir.path(), &LibcPolicy::default(), &SimilarityConfig::default()).unwrap();
        assert_eq!((s.kept, s.removed), (1, 0));
    }

    #[test]
    fn dir_with_unique_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.json"), REPORT).unwrap();
        std::fs::write(dir.path().join("b.json"), r##"{"stacktrace": ["#0  0x30 in bar ()"]}"##).unwrap();
        let s = dedup_dir(dir.path(), &LibcPolicy::default(), &SimilarityConfig::default()).unwrap();
        assert_eq!((s.kept, s.removed), (2, 0));
        assert!(!dir.path().join(DUPLICATES_DIR).exists());
    }

    #[test]
    fn dir_missing() {
        let dir = tempfile::tempdir().unwrap();
        let err = dedup_dir(&dir.path().join("x"), &LibcPolicy::default(), &SimilarityConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DirNotFound(_)));
    }
}
