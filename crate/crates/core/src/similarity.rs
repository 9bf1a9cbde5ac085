//! Weighted longest-common-subsequence similarity of two call stacks.
//!
//! `M[i][j] = max(M[i][j-1], M[i-1][j], M[i-1][j-1] + addition(i-1, j-1))`
//! where a match of frames at (0-based) positions `i`, `j` adds
//! `exp(-r * |i - j| - a * min(i, j))`. The raw score `M[n][m]` is divided
//! by the best score attainable for the shorter stack, so identical stacks
//! score exactly 1.
use crate::error::{Error, Result};
use crate::model::{CallStack, Frame, SimilarityConfig};
use crate::preprocess::frame_key;

/// Distance to the top for a matched pair: the smaller position.
pub fn top_dist(i: usize, j: usize) -> usize {
    i.min(j)
}

/// Distance between the positions of a matched pair.
pub fn rel_dist(i: usize, j: usize) -> usize {
    i.abs_diff(j)
}

pub fn addition(i: usize, j: usize, matched: bool, config: &SimilarityConfig) -> f64 {
    if !matched {
        return 0.0;
    }
    (-config.r() * rel_dist(i, j) as f64 - config.a() * top_dist(i, j) as f64).exp()
}

/// Supremum of the raw score for stacks of lengths `n` and `m`: every frame
/// of the shorter stack matched on the diagonal.
pub fn normalizer(n: usize, m: usize, config: &SimilarityConfig) -> f64 {
    (0..n.min(m)).fold(0.0, |acc, k| acc + addition(k, k, true, config))
}

/// Dynamic-programming table, reusable across comparisons.
#[derive(Clone, Debug, Default)]
pub struct DpWorkspace {
    cols: usize,
    cells: Vec<f64>,
}

impl DpWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills the `(n+1) x (m+1)` table and returns `M[n][m]`.
    pub fn fill<K: PartialEq>(&mut self, s1: &[K], s2: &[K], config: &SimilarityConfig) -> f64 {
        let cols = s2.len() + 1;
        self.cols = cols;
        self.cells.clear();
        self.cells.resize((s1.len() + 1) * cols, 0.0);
        for (i, k1) in s1.iter().enumerate() {
            let (prev, cur) = self.cells[i * cols..(i + 2) * cols].split_at_mut(cols);
            for (j, k2) in s2.iter().enumerate() {
                let diag = prev[j] + addition(i, j, k1 == k2, config);
                cur[j + 1] = cur[j].max(prev[j + 1]).max(diag);
            }
        }
        self.cells[self.cells.len() - 1]
    }

    /// `M[i][j]` of the last fill.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.cells.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Raw score `M[n][m]` for two key sequences.
pub fn raw_score<K: PartialEq>(s1: &[K], s2: &[K], config: &SimilarityConfig) -> f64 {
    DpWorkspace::new().fill(s1, s2, config)
}

/// Normalized similarity of two key sequences, in `[0, 1]`.
pub fn similarity_with<K: PartialEq>(
    workspace: &mut DpWorkspace,
    s1: &[K],
    s2: &[K],
    config: &SimilarityConfig,
) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyStack);
    }
    let score = workspace.fill(s1, s2, config);
    let norm = normalizer(s1.len(), s2.len(), config);
    Ok((score / norm).clamp(0.0, 1.0))
}

/// Similarity of two frame sequences, matching frames by [`frame_key`].
pub fn frame_similarity(s1: &[Frame], s2: &[Frame], config: &SimilarityConfig) -> Result<f64> {
    let k1: Vec<_> = s1.iter().map(frame_key).collect();
    let k2: Vec<_> = s2.iter().map(frame_key).collect();
    similarity_with(&mut DpWorkspace::new(), &k1, &k2, config)
}

/// Similarity of two call stacks as given; trimming is the caller's job.
pub fn similarity(s1: &CallStack, s2: &CallStack, config: &SimilarityConfig) -> Result<f64> {
    frame_similarity(s1.frames(), s2.frames(), config)
}

pub fn distance(s1: &CallStack, s2: &CallStack, config: &SimilarityConfig) -> Result<f64> {
    similarity(s1, s2, config).map(|s| 1.0 - s)
}
