//! Levelwise beam search for highly dependent subspaces.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discretizer::UdsParams;
use crate::error::{Error, Result};
use crate::scoring::uds_pr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub max_dim: usize,
    pub top_k: usize,
    pub min_score: Option<f64>,
    pub params: UdsParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 10,
            max_dim: 5,
            top_k: 20,
            min_score: None,
            params: UdsParams::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::TooFewDims(n));
        }
        if self.beam_width < 1 {
            return Err(Error::InvalidParameter("beam width must be >= 1".into()));
        }
        if self.top_k < 1 {
            return Err(Error::InvalidParameter("top-k must be >= 1".into()));
        }
        if self.max_dim < 2 || self.max_dim > n {
            return Err(Error::InvalidParameter(format!(
                "max dimensionality must lie in [2, {n}], got {}",
                self.max_dim
            )));
        }
        self.params.validate()
    }
}

/// A scored subspace; `dims` is sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceScore {
    pub dims: Vec<usize>,
    pub score: f64,
}

/// Best first: score descending, then dims lexicographically.
pub fn rank_order(a: &SubspaceScore, b: &SubspaceScore) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.dims.cmp(&b.dims))
}

/// Mines the `top_k` best subspaces of size `2..=max_dim`.
///
/// Level 2 scores every pair. Each later level extends every member of the
/// previous level's beam by one more dimension. All scored subspaces from all
/// levels compete for the final ranking.
pub fn beam_search(dataset: &Dataset, config: &SearchConfig) -> Result<Vec<SubspaceScore>> {
    config.validate(dataset.n())?;
    let n = dataset.n();
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut pool: Vec<SubspaceScore> = Vec::new();

    let mut candidates: BTreeSet<Vec<usize>> = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            candidates.insert(vec![a, b]);
        }
    }

    for level in 2..=config.max_dim {
        if candidates.is_empty() {
            break;
        }
        let fresh: Vec<&Vec<usize>> = candidates.iter().filter(|c| !cache.contains_key(*c)).collect();
        let scored = fresh
            .par_iter()
            .map(|dims| uds_pr(dataset, dims, &config.params).map(|r| ((*dims).clone(), r.score)))
            .collect::<Result<Vec<_>>>()?;
        for (dims, score) in scored {
            cache.insert(dims.clone(), score);
            pool.push(SubspaceScore { dims, score });
        }

        let mut level_scores: Vec<SubspaceScore> = candidates
            .iter()
            .map(|dims| SubspaceScore {
                dims: dims.clone(),
                score: cache[dims],
            })
            .collect();
        level_scores.sort_by(rank_order);
        level_scores.truncate(config.beam_width);

        if level == config.max_dim {
            break;
        }
        candidates = BTreeSet::new();
        for member in &level_scores {
            for extra in 0..n {
                if member.dims.binary_search(&extra).is_err() {
                    let mut dims = member.dims.clone();
                    let at = dims.partition_point(|&d| d < extra);
                    dims.insert(at, extra);
                    candidates.insert(dims);
                }
            }
        }
    }

    if let Some(floor) = config.min_score {
        pool.retain(|s| s.score >= floor);
    }
    pool.sort_by(rank_order);
    pool.truncate(config.top_k);
    Ok(pool)
}
