//! Corpus generation and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crash_cluster::hac::CondensedDistanceMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LIBC: &str = "/lib/x86_64-linux-gnu/libc.so.6";
pub const TARGET: &str = "/usr/bin/target";

/// One frame of a synthetic report: a function at an offset inside a module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fr {
    pub module: String,
    pub offset: u64,
    pub func: String,
}

pub fn fr(module: &str, offset: u64, func: &str) -> Fr {
    Fr {
        module: module.to_string(),
        offset,
        func: func.to_string(),
    }
}

pub fn user(offset: u64) -> Fr {
    fr(TARGET, offset, &format!("fn_{offset:x}"))
}

pub fn libc(offset: u64, func: &str) -> Fr {
    fr(LIBC, offset, func)
}

/// Report JSON in GDB form with per-report randomized load addresses, so
/// frames only match through module + offset resolution.
pub fn report_json(frames: &[Fr], rng: &mut ChaCha8Rng) -> String {
    let mut bases: BTreeMap<&str, u64> = BTreeMap::new();
    for f in frames {
        let next = 0x5500_0000_0000u64 + bases.len() as u64 * 0x10_0000_0000 + (rng.gen_range(0..0x1000u64) << 20);
        bases.entry(f.module.as_str()).or_insert(next);
    }
    let lines: Vec<String> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            format!(
                "#{i:<2} 0x{:016x} in {} () from {}",
                bases[f.module.as_str()] + f.offset,
                f.func,
                f.module
            )
        })
        .collect();
    let mappings: Vec<serde_json::Value> = bases
        .iter()
        .map(|(path, base)| {
            serde_json::json!({
                "start": format!("{base:#x}"),
                "end": format!("{:#x}", base + 0x1000_0000),
                "offset": "0x0",
                "path": path,
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "stacktrace": lines,
        "mappings": mappings,
    }))
    .unwrap()
}

pub fn write_report(dir: &Path, name: &str, frames: &[Fr], rng: &mut ChaCha8Rng) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, report_json(frames, rng)).unwrap();
    path
}

/// `(cluster dir, file name, bytes)` for every file under `out_dir`.
pub fn layout(out_dir: &Path) -> Vec<(String, String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(out_dir) {
        let rel = entry.strip_prefix(out_dir).unwrap();
        let mut parts = rel.iter().map(|p| p.to_string_lossy().into_owned());
        let dir = parts.next().unwrap();
        let file = parts.next().unwrap_or_default();
        out.push((dir, file, std::fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

/// Clusters of an output directory as a set of sets of file contents.
pub fn content_partition(out_dir: &Path) -> Vec<Vec<Vec<u8>>> {
    let mut by_dir: BTreeMap<String, Vec<Vec<u8>>> = BTreeMap::new();
    for (dir, _, bytes) in layout(out_dir) {
        by_dir.entry(dir).or_default().push(bytes);
    }
    let mut parts: Vec<Vec<Vec<u8>>> = by_dir
        .into_values()
        .map(|mut v| {
            v.sort();
            v
        })
        .collect();
    parts.sort();
    parts
}

/// Exhaustive maximum of summed match weights over all order-preserving
/// matchings of equal symbols.
pub fn brute_force_score<K: PartialEq>(s1: &[K], s2: &[K], a: f64, r: f64) -> f64 {
    fn go<K: PartialEq>(s1: &[K], s2: &[K], i: usize, j: usize, a: f64, r: f64) -> f64 {
        let mut best = 0.0f64;
        for ii in i..s1.len() {
            for jj in j..s2.len() {
                if s1[ii] == s2[jj] {
                    let rel = (ii as f64 - jj as f64).abs();
                    let top = ii.min(jj) as f64;
                    best = best.max((-r * rel - a * top).exp() + go(s1, s2, ii + 1, jj + 1, a, r));
                }
            }
        }
        best
    }
    go(s1, s2, 0, 0, a, r)
}

/// Agglomerates by recomputing the max cross-pair distance of every cluster
/// pair from the original matrix at each step. Ties go to the smallest
/// (smaller id, larger id) pair. Returns the merge heights and the sorted
/// partition obtained by stopping before the first merge above `threshold`.
pub fn naive_complete_linkage(m: &CondensedDistanceMatrix, threshold: f64) -> (Vec<f64>, Vec<Vec<usize>>) {
    let n = m.n();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut heights = Vec::new();
    let mut cut: Option<Vec<Vec<usize>>> = None;
    let mut next_id = n;
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let mut d = 0.0f64;
                for &a in &clusters[x].1 {
                    for &b in &clusters[y].1 {
                        d = d.max(m.get(a, b));
                    }
                }
                let (ix, iy) = (clusters[x].0, clusters[y].0);
                let key = (d, ix.min(iy), ix.max(iy));
                if best.is_none_or(|b| key < (b.0, b.1, b.2)) {
                    best = Some((key.0, key.1, key.2, x, y));
                }
            }
        }
        let (d, _, _, x, y) = best.unwrap();
        if d > threshold && cut.is_none() {
            cut = Some(clusters.iter().map(|c| c.1.clone()).collect());
        }
        heights.push(d);
        let mut merged = clusters[x].1.clone();
        merged.extend(clusters[y].1.iter().copied());
        clusters.remove(y);
        clusters[x] = (next_id, merged);
        next_id += 1;
    }
    let mut part = cut.unwrap_or_else(|| clusters.into_iter().map(|c| c.1).collect());
    for c in &mut part {
        c.sort_unstable();
    }
    part.sort();
    (heights, part)
}

/// Random condensed matrix with pairwise-distinct entries in (0, 1).
pub fn distinct_matrix(rng: &mut ChaCha8Rng, n: usize) -> CondensedDistanceMatrix {
    use rand::seq::SliceRandom;
    let len = n * n.saturating_sub(1) / 2;
    let mut ranks: Vec<usize> = (1..=len).collect();
    ranks.shuffle(rng);
    let values = ranks
        .into_iter()
        .map(|r| (r as f64 + rng.gen_range(0.0..0.5)) / (len as f64 + 1.0))
        .collect();
    CondensedDistanceMatrix::new(n, values).unwrap()
}

/// Stacks for `k` well-separated templates with `per_template` variants each.
///
/// Every template is 30 frames of its own user code above a shared 3-frame
/// startup tail, topped by a libc abort chain. Variant `v` replaces one deep
/// frame (depth 20 + v) so each report is unique, while staying close to its
/// template.
pub fn template_corpus(k: usize, per_template: usize) -> Vec<(usize, Vec<Fr>)> {
    let mut out = Vec::new();
    for t in 0..k {
        for v in 0..per_template {
            let mut frames = vec![libc(0x3c5d0, "__GI_raise"), libc(0x25859, "__GI_abort"), libc(0x9a3a0, "free")];
            for depth in 0..30 {
                let offset = 0x10_0000 * (t as u64 + 1) + 0x40 * depth as u64;
                if v > 0 && depth == 19 + v {
                    frames.push(user(offset + 0x8_0000 + v as u64));
                } else {
                    frames.push(user(offset));
                }
            }
            frames.push(user(0x1149));
            frames.push(libc(0x24083, "__libc_start_main"));
            frames.push(user(0x106e));
            out.push((t, frames));
        }
    }
    out
}
