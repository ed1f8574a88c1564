//! Cumulative entropy estimators and the discrete Shannon entropy used for
//! model selection. All logarithms are natural.

use crate::error::{Error, Result};

/// Empirical cumulative entropy of an already sorted sample:
/// `-sum_{i=1}^{m-1} (x_{i+1} - x_i) (i/m) ln(i/m)`.
///
/// Returns 0 for fewer than two points. The caller guarantees ascending order.
pub fn ce_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m < 2 {
        return 0.0;
    }
    let mf = m as f64;
    let mut acc = 0.0;
    for (i, w) in sorted.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if gap > 0.0 {
            let p = (i + 1) as f64 / mf;
            acc -= gap * p * p.ln();
        }
    }
    acc
}

/// Empirical cumulative entropy of an unordered sample.
pub fn empirical_ce(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ce_sorted(&sorted))
}

/// Disjoint, non-empty groups of record indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellGroups {
    groups: Vec<Vec<usize>>,
}

impl CellGroups {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptyInput);
        }
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidParameter("empty cell group".into()));
        }
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("cell groups overlap".into()));
        }
        Ok(CellGroups { groups })
    }

    /// Groups records by a per-record label; groups are ordered by label.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&l| l + 1);
        let mut groups = vec![Vec::new(); k];
        for (r, &l) in labels.iter().enumerate() {
            groups[l].push(r);
        }
        groups.retain(|g| !g.is_empty());
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Number of records across all groups.
    pub fn population(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Count-weighted average of within-cell cumulative entropies of `target`.
/// Weights are group size over the total size of the conditioning population.
pub fn conditional_ce(target: &[f64], cells: &CellGroups) -> Result<f64> {
    let total = cells.population();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mut acc = 0.0;
    let mut buf = Vec::new();
    for group in cells.groups() {
        buf.clear();
        for &r in group {
            let v = *target.get(r).ok_or(Error::IndexOutOfRange {
                index: r,
                len: target.len(),
            })?;
            buf.push(v);
        }
        if buf.len() < 2 {
            continue;
        }
        buf.sort_by(f64::total_cmp);
        acc += buf.len() as f64 / total as f64 * ce_sorted(&buf);
    }
    Ok(acc)
}

/// Plug-in Shannon entropy of a histogram with strictly positive counts.
pub fn shannon_entropy(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCount(i));
    }
    Ok(shannon_unchecked(counts.iter().copied()))
}

pub(crate) fn shannon_unchecked(counts: impl Iterator<Item = usize> + Clone) -> f64 {
    let total: usize = counts.clone().sum();
    let t = total as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 && c < total {
            let p = c as f64 / t;
            h -= p * p.ln();
        }
    }
    h
}
