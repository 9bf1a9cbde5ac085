//! Complete-linkage agglomerative clustering and the flat cut.
//!
//! The distance between two clusters is the largest distance between any of
//! their members. Clusters are merged closest-first until one remains; the
//! cut then keeps only merges at height `<= d`.
use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CrashReport, SimilarityConfig};
use crate::preprocess::{comparable_frames, frame_key, LibcPolicy};
use crate::similarity::{similarity_with, DpWorkspace};

pub use crate::matrix::{condensed_index, condensed_len, CondensedDistanceMatrix};

/// One agglomeration step. Observations are clusters `0..n`; the cluster
/// created by step `k` gets id `n + k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeStep {
    /// Smaller of the two merged cluster ids.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Number of observations in the merged cluster.
    pub size: usize,
}

/// Flat partition: `labels[i]` is the 1-based cluster number of observation
/// `i`. Clusters are numbered in order of their smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Members of each cluster, ordered by label.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l - 1].push(i);
        }
        out
    }
}

/// Distances between the (trimmed, if enabled) stacks of all reports.
///
/// `jobs` sizes a dedicated worker pool; `None` uses the global pool.
pub fn pairwise_distances(
    reports: &[CrashReport],
    config: &SimilarityConfig,
    policy: &LibcPolicy,
    jobs: Option<usize>,
) -> Result<CondensedDistanceMatrix> {
    let n = reports.len();
    if n == 0 {
        return Err(Error::InvalidMatrix("no observations".into()));
    }

    // Intern frame keys so the inner loop compares integers.
    let mut interned = std::collections::HashMap::new();
    let stacks: Vec<Vec<u32>> = reports
        .iter()
        .map(|r| {
            comparable_frames(&r.stack, policy, config)
                .iter()
                .map(|f| {
                    let next = interned.len() as u32;
                    *interned.entry(frame_key(f)).or_insert(next)
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0; condensed_len(n)];
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(n);
    let mut rest = values.as_mut_slice();
    for i in 0..n.saturating_sub(1) {
        let (row, tail) = std::mem::take(&mut rest).split_at_mut(n - i - 1);
        rows.push((i, row));
        rest = tail;
    }

    let compute = |rows: Vec<(usize, &mut [f64])>| -> Result<()> {
        rows.into_par_iter()
            .try_for_each_init(DpWorkspace::new, |ws, (i, row)| {
                for (k, slot) in row.iter_mut().enumerate() {
                    let j = i + 1 + k;
                    *slot = 1.0 - similarity_with(ws, &stacks[i], &stacks[j], config)?;
                }
                Ok(())
            })
    };
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {j} workers: {e}")))?;
            pool.install(|| compute(rows))?;
        }
        None => compute(rows)?,
    }
    CondensedDistanceMatrix::new(n, values)
}

/// Ordering of candidate merges: distance, then the (smaller, larger)
/// cluster id pair.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist: f64,
    lo: usize,
    hi: usize,
    partner: usize,
}

impl Candidate {
    fn cmp_key(&self, other: &Candidate) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

struct LinkageState {
    n: usize,
    dist: Vec<f64>,
    ids: Vec<usize>,
    sizes: Vec<usize>,
    alive: Vec<bool>,
    best: Vec<Option<Candidate>>,
}

impl LinkageState {
    fn d(&self, a: usize, b: usize) -> f64 {
        if a < b {
            self.dist[condensed_index(self.n, a, b)]
        } else {
            self.dist[condensed_index(self.n, b, a)]
        }
    }

    fn set_d(&mut self, a: usize, b: usize, v: f64) {
        let idx = if a < b {
            condensed_index(self.n, a, b)
        } else {
            condensed_index(self.n, b, a)
        };
        self.dist[idx] = v;
    }

    fn candidate(&self, slot: usize, partner: usize) -> Candidate {
        let (a, b) = (self.ids[slot], self.ids[partner]);
        Candidate {
            dist: self.d(slot, partner),
            lo: a.min(b),
            hi: a.max(b),
            partner,
        }
    }

    fn nearest(&self, slot: usize) -> Option<Candidate> {
        (0..self.n)
            .filter(|&k| k != slot && self.alive[k])
            .map(|k| self.candidate(slot, k))
            .min_by(Candidate::cmp_key)
    }
}

/// Agglomerates all observations; returns the `n - 1` merge steps in order.
///
/// Each slot caches its nearest live partner. Complete-linkage updates only
/// grow distances, so a cache stays valid unless it pointed at one of the
/// two merged clusters.
pub fn complete_linkage(matrix: &CondensedDistanceMatrix) -> Vec<MergeStep> {
    let n = matrix.n();
    if n < 2 {
        return Vec::new();
    }
    let mut st = LinkageState {
        n,
        dist: matrix.values().to_vec(),
        ids: (0..n).collect(),
        sizes: vec![1; n],
        alive: vec![true; n],
        best: Vec::new(),
    };
    st.best = (0..n).map(|s| st.nearest(s)).collect();

    let mut steps = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (slot, cand) = (0..n)
            .filter(|&s| st.alive[s])
            .filter_map(|s| st.best[s].map(|c| (s, c)))
            .min_by(|a, b| a.1.cmp_key(&b.1))
            .expect("at least two live clusters");
        let (keep, gone) = (slot.min(cand.partner), slot.max(cand.partner));
        let size = st.sizes[keep] + st.sizes[gone];
        steps.push(MergeStep {
            left: cand.lo,
            right: cand.hi,
            height: cand.dist,
            size,
        });

        st.alive[gone] = false;
        st.best[gone] = None;
        for k in 0..n {
            if st.alive[k] && k != keep {
                let merged = st.d(keep, k).max(st.d(gone, k));
                st.set_d(keep, k, merged);
            }
        }
        st.ids[keep] = n + step;
        st.sizes[keep] = size;

        st.best[keep] = st.nearest(keep);
        for k in 0..n {
            if !st.alive[k] || k == keep {
                continue;
            }
            match st.best[k] {
                Some(c) if c.partner == keep || c.partner == gone => st.best[k] = st.nearest(k),
                Some(c) => {
                    let to_new = st.candidate(k, keep);
                    if to_new.cmp_key(&c) == Ordering::Less {
                        st.best[k] = Some(to_new);
                    }
                }
                None => st.best[k] = st.nearest(k),
            }
        }
    }
    steps
}

/// Applies every merge of height `<= threshold`. The number of observations
/// is `merges.len() + 1`.
pub fn cut_by_distance(merges: &[MergeStep], threshold: f64) -> ClusterAssignment {
    let n = merges.len() + 1;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // any observation of each cluster id
    let mut member: Vec<usize> = (0..n).collect();
    for m in merges {
        let (a, b) = (member[m.left], member[m.right]);
        if m.height <= threshold {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        member.push(a);
    }
    let mut label_of_root = vec![0usize; n];
    let mut next = 0;
    let labels = (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            if label_of_root[root] == 0 {
                next += 1;
                label_of_root[root] = next;
            }
            label_of_root[root]
        })
        .collect();
    ClusterAssignment { labels }
}

/// Distances, linkage and cut at `config.d()` in one call.
pub fn cluster_reports(
    reports: &[CrashReport],
    config: &SimilarityConfig,
    policy: &LibcPolicy,
    jobs: Option<usize>,
) -> Result<(ClusterAssignment, Vec<MergeStep>)> {
    let matrix = pairwise_distances(reports, config, policy, jobs)?;
    let merges = complete_linkage(&matrix);
    Ok((cut_by_distance(&merges, config.d()), merges))
}
