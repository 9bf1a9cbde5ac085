//! Command-line front end: `dedup` and `cluster` subcommands.
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::dedup::{dedup_dir, find_duplicates};
use crate::error::{Error, Result};
use crate::hac::{complete_linkage, cut_by_distance, pairwise_distances};
use crate::ingest::load_report_dir;
use crate::model::SimilarityConfig;
use crate::preprocess::{LibcPolicy, DEFAULT_LIBC_MODULE, DEFAULT_TRIGGER_FUNCTIONS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_OUTPUT_CONFLICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crash-cluster", version, about = "Deduplicate and cluster crash reports by call-stack similarity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Move exact-duplicate reports into <IN_DIR>/duplicates/
    Dedup {
        in_dir: PathBuf,
        #[command(flatten)]
        trim: TrimArgs,
        /// Worker threads (default: available processors)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Cluster reports into <OUT_DIR>/cl1 .. clK
    Cluster {
        in_dir: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        trim: TrimArgs,
        /// Worker threads (default: available processors)
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the condensed distance matrix to this file
        #[arg(long, value_name = "PATH")]
        export_matrix: Option<PathBuf>,
        /// Reuse a non-empty output directory
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Weight of the distance from the top of the stacks
    #[arg(long, default_value_t = SimilarityConfig::DEFAULT_TOP_COEF)]
    pub coef_a: f64,
    /// Weight of the distance between matched frames
    #[arg(long, default_value_t = SimilarityConfig::DEFAULT_REL_COEF)]
    pub coef_r: f64,
    /// Maximum complete-linkage distance inside one cluster
    #[arg(long, default_value_t = SimilarityConfig::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

impl Default for MetricArgs {
    fn default() -> Self {
        MetricArgs {
            coef_a: SimilarityConfig::DEFAULT_TOP_COEF,
            coef_r: SimilarityConfig::DEFAULT_REL_COEF,
            threshold: SimilarityConfig::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrimArgs {
    /// Compare stacks without removing libc abort chains
    #[arg(long)]
    pub no_trim: bool,
    /// Comma-separated functions that start an abort chain
    #[arg(long, value_name = "LIST")]
    pub libc_functions: Option<String>,
    /// Substring identifying libc in a module file name
    #[arg(long, value_name = "SUBSTR")]
    pub libc_module: Option<String>,
    /// Also remove the last libc frame of an abort chain
    #[arg(long)]
    pub trim_whole_chain: bool,
}

impl TrimArgs {
    pub fn policy(&self) -> Result<LibcPolicy> {
        let module = self.libc_module.as_deref().unwrap_or(DEFAULT_LIBC_MODULE);
        let policy = match &self.libc_functions {
            Some(list) => LibcPolicy::new(module, list.split(',').map(str::trim))?,
            None => LibcPolicy::new(module, DEFAULT_TRIGGER_FUNCTIONS.iter().copied())?,
        };
        Ok(policy.with_keep_last_libc(!self.trim_whole_chain))
    }
}

pub fn config_from(metric: &MetricArgs, trim: &TrimArgs) -> Result<SimilarityConfig> {
    Ok(SimilarityConfig::new(metric.coef_a, metric.coef_r, metric.threshold)?.with_trim(!trim.no_trim))
}

/// Columns of the summary table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub report_count: usize,
    pub unique_count: Option<usize>,
    pub cluster_count: Option<usize>,
    pub avg_reports_per_cluster: Option<usize>,
    pub clustering_seconds: Option<f64>,
    pub dedup_seconds: Option<f64>,
}

impl RunStats {
    /// Everything except the timing columns.
    pub fn counts(&self) -> (usize, Option<usize>, Option<usize>, Option<usize>) {
        (
            self.report_count,
            self.unique_count,
            self.cluster_count,
            self.avg_reports_per_cluster,
        )
    }
}

pub fn average_per_cluster(reports: usize, clusters: usize) -> usize {
    (reports as f64 / clusters as f64).round() as usize
}

pub fn print_stats(stats: &RunStats) -> String {
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map_or_else(|| "-".to_string(), |v| v.to_string())
    }
    let secs = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
    let columns = [
        ("reports", stats.report_count.to_string()),
        ("unique", opt(stats.unique_count)),
        ("clusters", opt(stats.cluster_count)),
        ("avg per cluster", opt(stats.avg_reports_per_cluster)),
        ("clustering time (s)", secs(stats.clustering_seconds)),
        ("dedup time (s)", secs(stats.dedup_seconds)),
    ];
    let widths: Vec<usize> = columns.iter().map(|(h, v)| h.len().max(v.len())).collect();
    let header: Vec<String> = columns.iter().zip(&widths).map(|((h, _), w)| format!("{h:>w$}")).collect();
    let row: Vec<String> = columns.iter().zip(&widths).map(|((_, v), w)| format!("{v:>w$}")).collect();
    format!("{}\n{}\n", header.join("  "), row.join("  "))
}

fn report_warnings(err: &mut dyn Write, warnings: &[(PathBuf, String)]) {
    for (path, msg) in warnings {
        let _ = writeln!(err, "warning: skipped {}: {msg}", path.display());
    }
}

pub fn run_dedup(
    in_dir: &Path,
    trim: &TrimArgs,
    jobs: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<RunStats> {
    let policy = trim.policy()?;
    let config = SimilarityConfig::default().with_trim(!trim.no_trim);
    let start = Instant::now();
    let summary = with_jobs(jobs, || dedup_dir(in_dir, &policy, &config))??;
    let elapsed = start.elapsed().as_secs_f64();
    report_warnings(err, &summary.warnings);
    let _ = writeln!(out, "kept {}, removed {}", summary.kept, summary.removed);
    let stats = RunStats {
        report_count: summary.kept + summary.removed,
        unique_count: Some(summary.kept),
        dedup_seconds: Some(elapsed),
        ..Default::default()
    };
    let _ = write!(out, "{}", print_stats(&stats));
    Ok(stats)
}

#[derive(Clone, Debug, Default)]
pub struct ClusterOptions {
    pub metric: MetricArgs,
    pub trim: TrimArgs,
    pub jobs: Option<usize>,
    pub export_matrix: Option<PathBuf>,
    pub force: bool,
}

/// Directory name of cluster `label` (1-based).
pub fn cluster_dir_name(label: usize) -> String {
    format!("cl{label}")
}

fn is_cluster_dir_name(name: &str) -> bool {
    name.strip_prefix("cl")
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn prepare_out_dir(out_dir: &Path, force: bool) -> Result<()> {
    if out_dir.exists() {
        let entries: Vec<_> = std::fs::read_dir(out_dir)
            .map_err(|e| Error::io(out_dir, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(out_dir, e))?;
        if entries.is_empty() {
            return Ok(());
        }
        if !force {
            return Err(Error::OutputConflict(out_dir.to_path_buf()));
        }
        for entry in entries {
            let path = entry.path();
            if path.is_dir() && is_cluster_dir_name(&entry.file_name().to_string_lossy()) {
                std::fs::remove_dir_all(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    } else {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
    }
}

pub fn run_cluster(
    in_dir: &Path,
    out_dir: &Path,
    opts: &ClusterOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<RunStats> {
    let policy = opts.trim.policy()?;
    let config = config_from(&opts.metric, &opts.trim)?;
    let batch = load_report_dir(in_dir)?;
    report_warnings(err, &batch.warnings);
    prepare_out_dir(out_dir, opts.force)?;

    let (unique, dedup_seconds, assignment, matrix, clustering_seconds) = with_jobs(opts.jobs, || {
        let start = Instant::now();
        let unique = find_duplicates(&batch.reports, &policy, &config)
            .iter()
            .filter(|d| d.is_none())
            .count();
        let dedup_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let matrix = pairwise_distances(&batch.reports, &config, &policy, None)?;
        let merges = complete_linkage(&matrix);
        let assignment = cut_by_distance(&merges, config.d());
        let clustering_seconds = start.elapsed().as_secs_f64();
        Ok::<_, Error>((unique, dedup_seconds, assignment, matrix, clustering_seconds))
    })??;

    if let Some(path) = &opts.export_matrix {
        std::fs::write(path, matrix.to_export_string()).map_err(|e| Error::io(path, e))?;
    }

    for (label, members) in assignment.clusters().into_iter().enumerate() {
        let dir = out_dir.join(cluster_dir_name(label + 1));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in members {
            let report = &batch.reports[i];
            let dest = dir.join(report.file_name());
            std::fs::copy(&report.source_path, &dest).map_err(|e| Error::io(&report.source_path, e))?;
        }
    }

    let clusters = assignment.cluster_count();
    let stats = RunStats {
        report_count: batch.len(),
        unique_count: Some(unique),
        cluster_count: Some(clusters),
        avg_reports_per_cluster: Some(average_per_cluster(batch.len(), clusters)),
        clustering_seconds: Some(clustering_seconds),
        dedup_seconds: Some(dedup_seconds),
    };
    let _ = write!(out, "{}", print_stats(&stats));
    Ok(stats)
}

/// Runs `f` inside a pool of `jobs` threads, or on the global pool.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {j} workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::OutputConflict(_) => EXIT_OUTPUT_CONFLICT,
        _ => EXIT_INPUT,
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Dedup { in_dir, trim, jobs } => run_dedup(&in_dir, &trim, jobs, out, err),
        Command::Cluster {
            in_dir,
            out_dir,
            metric,
            trim,
            jobs,
            export_matrix,
            force,
        } => {
            let opts = ClusterOptions {
                metric,
                trim,
                jobs,
                export_matrix,
                force,
            };
            run_cluster(&in_dir, &out_dir, &opts, out, err)
        }
    };
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
