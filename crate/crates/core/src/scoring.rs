//! Normalized dependency scores over subspaces.
//!
//! For an ordering `σ` of the dimensions,
//! `Φ_σ = Σ_{i≥2} [h(X_σ(i)) − h(X_σ(i) | X_σ(1..i−1))] / Σ_{i≥2} h(X_σ(i))`
//! with `0/0 = 0`. Each conditional term is computed by discretizing the
//! previous dimension against the current one while earlier dimensions keep
//! the bins they were given.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discretizer::{discretize_against, CellPartition, UdsParams};
use crate::entropy::ce_sorted;
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_CAP: usize = 6;

/// One position `i ≥ 2` of the ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTerm {
    pub column: usize,
    /// `h(X_σ(i))`
    pub ce: f64,
    /// `h(X_σ(i) | X_σ(1..i−1))`
    pub conditional_ce: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub score: f64,
    pub permutation: Vec<usize>,
    /// Cumulative entropy of the first dimension of the ordering.
    pub leading_ce: f64,
    pub terms: Vec<StepTerm>,
    /// Chosen bin count for each discretized dimension, `σ(1)..σ(d−1)`.
    pub bin_counts: Vec<usize>,
    /// Initial equal-frequency bins actually formed for those dimensions;
    /// below β when a column has fewer distinct values.
    pub initial_bins: Vec<usize>,
    pub numerator: f64,
    pub denominator: f64,
}

fn validate_dims(dataset: &Dataset, dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::TooFewDims(dims.len()));
    }
    for (i, &d) in dims.iter().enumerate() {
        if d >= dataset.n() {
            return Err(Error::UnknownColumn(d.to_string()));
        }
        if dims[..i].contains(&d) {
            return Err(Error::InvalidParameter(format!("column {d} listed twice")));
        }
    }
    Ok(())
}

/// Cumulative entropy of one dataset column, via its rank index.
pub fn column_ce(dataset: &Dataset, column: usize) -> Result<f64> {
    let values = dataset.column(column)?;
    Ok(ce_sorted(&dataset.rank_index(column)?.sorted_values(values)))
}

/// Orders `dims` by descending cumulative entropy, ties by ascending column id.
pub fn practical_order(dataset: &Dataset, dims: &[usize]) -> Result<Vec<usize>> {
    validate_dims(dataset, dims)?;
    let mut keyed = dims
        .iter()
        .map(|&d| Ok((column_ce(dataset, d)?, d)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, d)| d).collect())
}

/// Evaluates `Φ_σ` for the given ordering.
pub fn score_ordering(dataset: &Dataset, order: &[usize], params: &UdsParams) -> Result<ScoreResult> {
    validate_dims(dataset, order)?;
    params.validate()?;
    let mut cells = CellPartition::empty(dataset.m());
    let mut terms = Vec::with_capacity(order.len() - 1);
    let mut bin_counts = Vec::with_capacity(order.len() - 1);
    let mut initial_bins = Vec::with_capacity(order.len() - 1);
    let (mut numerator, mut denominator) = (0.0, 0.0);
    for w in order.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        let h = column_ce(dataset, cur)?;
        let step = discretize_against(dataset, prev, cur, h, &cells, params)?;
        let cond = step.conditional_ce.max(0.0);
        cells = cells.extend(&step.discretization)?;
        numerator += h - cond;
        denominator += h;
        bin_counts.push(step.selection.lambda);
        initial_bins.push(step.initial_bins);
        terms.push(StepTerm {
            column: cur,
            ce: h,
            conditional_ce: cond,
        });
    }
    let score = if denominator > 0.0 {
        (numerator / denominator).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(ScoreResult {
        score,
        permutation: order.to_vec(),
        leading_ce: column_ce(dataset, order[0])?,
        terms,
        bin_counts,
        initial_bins,
        numerator,
        denominator,
    })
}

/// Practical score: `Φ_σ` at the ordering by descending cumulative entropy.
pub fn uds_pr(dataset: &Dataset, dims: &[usize], params: &UdsParams) -> Result<ScoreResult> {
    let order = practical_order(dataset, dims)?;
    score_ordering(dataset, &order, params)
}

/// Exact score: the maximum of `Φ_σ` over all `d!` orderings. The first
/// ordering in lexicographic order of `dims` wins ties.
pub fn uds_exact(dataset: &Dataset, dims: &[usize], params: &UdsParams, max_d: usize) -> Result<ScoreResult> {
    validate_dims(dataset, dims)?;
    if dims.len() > max_d {
        return Err(Error::ExactCapExceeded {
            d: dims.len(),
            cap: max_d,
        });
    }
    let mut order = dims.to_vec();
    order.sort_unstable();
    let mut best = score_ordering(dataset, &order, params)?;
    while next_permutation(&mut order) {
        let candidate = score_ordering(dataset, &order, params)?;
        if candidate.score > best.score {
            best = candidate;
        }
    }
    Ok(best)
}

/// Numerator of `Φ_σ` for a fixed ordering.
pub fn unnormalized_score(dataset: &Dataset, order: &[usize], params: &UdsParams) -> Result<f64> {
    Ok(score_ordering(dataset, order, params)?.numerator)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}
