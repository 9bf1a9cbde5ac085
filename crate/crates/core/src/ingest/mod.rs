//! Report ingestion: parsers and deterministic directory scans.
mod gdb;
mod report_file;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use gdb::{parse_gdb_backtrace, render_gdb_backtrace};
pub use report_file::parse_report_file;

use crate::error::{Error, Result};
use crate::model::{CallStack, CrashReport};

/// Reports loaded from one directory, ordered by file name.
#[derive(Clone, Debug, Default)]
pub struct ReportBatch {
    pub reports: Vec<CrashReport>,
    /// Files that were skipped, with the reason.
    pub warnings: Vec<(PathBuf, String)>,
}

impl ReportBatch {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// Loads every regular file in `dir` (non-recursive) as a report.
///
/// Files that fail to parse become warnings. Frame offsets are resolved
/// against each report's mappings.
pub fn load_report_dir(dir: &Path) -> Result<ReportBatch> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::DirNotFound(dir.to_path_buf()))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        // follows symlinks
        if std::fs::metadata(&path).map(|m| m.is_file()).unwrap_or(false) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let parsed: Vec<Result<CrashReport>> = files
        .par_iter()
        .map(|path| {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_report_file(&bytes, path).map(resolve_frame_offsets)
        })
        .collect();

    let mut batch = ReportBatch::default();
    let mut ids = HashSet::new();
    for (path, result) in files.into_iter().zip(parsed) {
        match result {
            Ok(mut report) => {
                report.id = unique_id(&mut ids, &report);
                batch.reports.push(report);
            }
            Err(e) => batch.warnings.push((path, e.to_string())),
        }
    }
    if batch.reports.is_empty() {
        return Err(Error::NoValidReports(dir.to_path_buf()));
    }
    Ok(batch)
}

/// Falls back to the full file name, then to a numeric suffix, when the
/// report id is already taken.
fn unique_id(ids: &mut HashSet<String>, report: &CrashReport) -> String {
    let file_name = report.file_name().to_string_lossy().into_owned();
    let mut candidates = vec![report.id.clone(), file_name.clone()];
    let mut n = 2;
    loop {
        for c in candidates.drain(..) {
            if ids.insert(c.clone()) {
                return c;
            }
        }
        candidates.push(format!("{file_name}#{n}"));
        n += 1;
    }
}

/// Fills in module path and offset for frames that have only an address,
/// when exactly one mapping covers the address.
pub fn resolve_frame_offsets(report: CrashReport) -> CrashReport {
    if report.mappings.is_empty() {
        return report;
    }
    let CrashReport {
        id,
        stack,
        mappings,
        source_path,
    } = report;
    let frames = stack
        .into_frames()
        .into_iter()
        .map(|frame| {
            let Some(address) = frame.address().filter(|_| frame.module_offset().is_none()) else {
                return frame;
            };
            let mut covering = mappings.iter().filter(|m| m.contains(address));
            match (covering.next(), covering.next()) {
                (Some(m), None) => {
                    let offset = address - m.start() + m.file_offset();
                    frame.with_module(m.path(), offset)
                }
                _ => frame,
            }
        })
        .collect();
    let stack = CallStack::new(frames).expect("resolution keeps frame order and count");
    CrashReport {
        id,
        stack,
        mappings,
        source_path,
    }
}
