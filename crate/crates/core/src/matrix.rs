//! Condensed (upper-triangular) pairwise distance matrix and its text export.
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Pairwise distances of `n` observations; pair `(i, j)`, `i < j`, is stored
/// at `n*i - i*(i+1)/2 + (j - i - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedDistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

pub fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j < n`, in the condensed array.
#[inline]
pub fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

impl CondensedDistanceMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("no observations".into()));
        }
        if values.len() != condensed_len(n) {
            return Err(Error::InvalidMatrix(format!(
                "{} values given, {} expected for n = {n}",
                values.len(),
                condensed_len(n)
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidMatrix(format!(
                "value {} at position {pos} is outside [0, 1]",
                values[pos]
            )));
        }
        Ok(CondensedDistanceMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distance between observations `i` and `j`; 0 on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.values[condensed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.values[condensed_index(self.n, j, i)],
        }
    }

    /// Text export: `n` on the first line, then one distance per line in
    /// condensed order.
    pub fn to_export_string(&self) -> String {
        let mut out = String::with_capacity(16 + self.values.len() * 24);
        let _ = writeln!(out, "{}", self.n);
        for v in &self.values {
            let _ = writeln!(out, "{v:.17e}");
        }
        out
    }

    pub fn parse_export(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidMatrix("missing observation count".into()))?
            .parse()
            .map_err(|_| Error::InvalidMatrix("bad observation count".into()))?;
        // guard against absurd sizes before allocating
        let expected = n
            .checked_mul(n.saturating_sub(1))
            .map(|x| x / 2)
            .filter(|&len| len <= text.len())
            .ok_or_else(|| Error::InvalidMatrix(format!("observation count {n} does not fit the input")))?;
        let mut values = Vec::with_capacity(expected);
        for (k, line) in lines.enumerate() {
            let v: f64 = line
                .parse()
                .map_err(|_| Error::InvalidMatrix(format!("bad value on line {}", k + 2)))?;
            values.push(v);
        }
        CondensedDistanceMatrix::new(n, values)
    }
}
