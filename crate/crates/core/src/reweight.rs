//! Enhanced-label selection from nearest neighbours and the candidate weight
//! matrix built from it.
//!
//! For each instance one candidate, the *enhanced label*, is chosen:
//!
//! 1. a clean instance keeps its only label;
//! 2. otherwise the nearest clean neighbour whose label is a candidate wins;
//! 3. otherwise neighbours vote, restricted to the instance's candidates.
//!
//! The enhanced label then gets weight `T`, other candidates weight 1 and
//! non-candidates 0, and each row is normalised to sum to one.

use serde::{Deserialize, Serialize};

use crate::data::CandidateSet;
use crate::knn::NeighborList;
use crate::{Error, Matrix, Result};

/// How a partial neighbour's candidate set is counted in the vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    /// Each candidate receives `1 / |s|`, so every neighbour casts one vote in total.
    #[default]
    Fractional,
    /// Each candidate receives a full vote.
    Multiset,
}

const VOTE_TIE_EPS: f64 = 1e-12;

/// Picks the enhanced label of an instance with candidate set `own`.
///
/// `neighbors` must be sorted nearest first and index into `candidates`.
/// Returns `None` when no neighbour label is a candidate of `own`.
pub fn enhanced_label(
    own: &CandidateSet,
    neighbors: &NeighborList,
    candidates: &[CandidateSet],
    mode: VoteMode,
) -> Option<usize> {
    if let Some(label) = own.sole_label() {
        return Some(label);
    }

    let nearest_clean_match = neighbors
        .indices
        .iter()
        .filter_map(|&j| candidates[j].sole_label())
        .find(|&label| own.contains(label));
    if nearest_clean_match.is_some() {
        return nearest_clean_match;
    }

    // label -> (votes, distance of the nearest neighbour that voted for it)
    let m = own.num_classes();
    let mut votes = vec![0.0f64; m];
    let mut first_seen = vec![f64::INFINITY; m];
    for (&j, &dist) in neighbors.indices.iter().zip(&neighbors.distances) {
        let theirs = &candidates[j];
        let share = match mode {
            VoteMode::Fractional => 1.0 / theirs.cardinality() as f64,
            VoteMode::Multiset => 1.0,
        };
        for label in theirs.iter().filter(|&l| own.contains(l)) {
            votes[label] += share;
            if first_seen[label].is_infinite() {
                first_seen[label] = dist;
            }
        }
    }

    let mut best: Option<usize> = None;
    for label in own.iter().filter(|&l| votes[l] > 0.0) {
        let Some(b) = best else {
            best = Some(label);
            continue;
        };
        let diff = votes[label] - votes[b];
        let tol = VOTE_TIE_EPS * votes[label].max(votes[b]);
        // labels arrive in increasing order, so an exact tie keeps the lower one
        if diff > tol || (diff.abs() <= tol && first_seen[label] < first_seen[b]) {
            best = Some(label);
        }
    }
    best
}

/// Row-normalised candidate weights for a batch of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    weights: Matrix,
    temperature: f64,
}

impl WeightMatrix {
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn into_matrix(self) -> Matrix {
        self.weights
    }
}

/// Weight `T` on the enhanced label, 1 on the remaining candidates, 0
/// elsewhere, then each row divided by its sum. `None` (no enhancement)
/// gives a uniform row over the candidates.
pub fn build_weight_matrix<'a, I>(
    candidates: I,
    enhanced: &[Option<usize>],
    temperature: f64,
) -> Result<WeightMatrix>
where
    I: IntoIterator<Item = &'a CandidateSet>,
{
    if !(temperature >= 1.0 && temperature.is_finite()) {
        return Err(Error::param(
            "temperature",
            format!("{temperature} must be finite and >= 1"),
        ));
    }
    let candidates: Vec<&CandidateSet> = candidates.into_iter().collect();
    if candidates.len() != enhanced.len() {
        return Err(Error::DimensionMismatch {
            expected: candidates.len(),
            found: enhanced.len(),
        });
    }
    let m = candidates.first().map_or(0, |s| s.num_classes());
    let mut weights = Matrix::zeros(candidates.len(), m);
    for (i, (set, &boosted)) in candidates.iter().zip(enhanced).enumerate() {
        let row = weights.row_mut(i);
        let boosted = boosted.filter(|&l| set.contains(l));
        for label in set.iter() {
            row[label] = if Some(label) == boosted {
                temperature
            } else {
                1.0
            };
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|w| *w /= total);
    }
    Ok(WeightMatrix {
        weights,
        temperature,
    })
}
