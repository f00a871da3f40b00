//! Partial-label datasets: candidate sets, synthetic generation, the PLL
//! text format and train/test splitting.

mod candidate;
mod format;
mod generate;

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use candidate::CandidateSet;
pub use format::{read_pll_file, read_pll_from, write_pll_file, write_pll_to};
pub use generate::{gaussian_clusters, generate_candidates, generate_synthetic, GenerationMode};

use crate::{Error, Matrix, Result};

/// Features, candidate sets, and (optionally) the hidden true labels.
///
/// The hidden truth is only reachable through [`PartialDataset::hidden_truth`];
/// training code receives a [`TrainView`], which does not expose it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDataset {
    features: Matrix,
    candidates: Vec<CandidateSet>,
    hidden_truth: Vec<Option<usize>>,
    m: usize,
}

impl PartialDataset {
    /// `hidden_truth` may be empty (no truth at all) or hold one entry per
    /// instance.
    pub fn new(
        features: Matrix,
        candidates: Vec<CandidateSet>,
        hidden_truth: Vec<Option<usize>>,
        m: usize,
    ) -> Result<Self> {
        let n = candidates.len();
        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: features.rows(),
            });
        }
        let hidden_truth = if hidden_truth.is_empty() {
            vec![None; n]
        } else {
            hidden_truth
        };
        if hidden_truth.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hidden_truth.len(),
            });
        }
        for (i, s) in candidates.iter().enumerate() {
            if s.num_classes() != m {
                return Err(Error::param(
                    "candidates",
                    format!(
                        "instance {i} has {} classes, dataset has {m}",
                        s.num_classes()
                    ),
                ));
            }
            if let Some(t) = hidden_truth[i] {
                if t >= m {
                    return Err(Error::ClassOutOfRange { index: t, m });
                }
                if !s.contains(t) {
                    return Err(Error::param(
                        "hidden_truth",
                        format!("instance {i}: true label {t} is not a candidate"),
                    ));
                }
            }
        }
        Ok(Self {
            features,
            candidates,
            hidden_truth,
            m,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.m
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn candidates(&self) -> &[CandidateSet] {
        &self.candidates
    }

    /// Per-instance true labels, `None` where unknown. Evaluation only.
    pub fn hidden_truth(&self) -> &[Option<usize>] {
        &self.hidden_truth
    }

    /// All true labels, or `None` if any instance lacks one.
    pub fn complete_truth(&self) -> Option<Vec<usize>> {
        self.hidden_truth.iter().copied().collect()
    }

    /// Features and candidates without the hidden truth.
    pub fn training_view(&self) -> TrainView<'_> {
        TrainView {
            features: &self.features,
            candidates: &self.candidates,
            m: self.m,
        }
    }

    pub fn stats(&self) -> Result<DatasetStats> {
        compute_stats(self)
    }

    /// Copies the listed instances, in order.
    pub fn subset(&self, indices: &[usize]) -> PartialDataset {
        PartialDataset {
            features: self.features.select_rows(indices),
            candidates: indices
                .iter()
                .map(|&i| self.candidates[i].clone())
                .collect(),
            hidden_truth: indices.iter().map(|&i| self.hidden_truth[i]).collect(),
            m: self.m,
        }
    }

    /// Same instances with every true label replaced. Used to show that
    /// training never reads the truth.
    pub fn with_hidden_truth(&self, truth: Vec<Option<usize>>) -> Result<PartialDataset> {
        PartialDataset::new(
            self.features.clone(),
            self.candidates.clone(),
            truth,
            self.m,
        )
    }
}

/// Truth-free view of a dataset handed to training code.
#[derive(Debug, Clone, Copy)]
pub struct TrainView<'a> {
    pub features: &'a Matrix,
    pub candidates: &'a [CandidateSet],
    pub m: usize,
}

impl TrainView<'_> {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Mean candidate-set size.
    pub avg_candidates: f64,
    /// Fraction of instances with exactly one candidate.
    pub clean_rate: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} d={} m={} avg_candidates={:.4} clean_rate={:.6}",
            self.n, self.d, self.m, self.avg_candidates, self.clean_rate
        )
    }
}

pub fn compute_stats(dataset: &PartialDataset) -> Result<DatasetStats> {
    candidate_stats(
        dataset.candidates(),
        dataset.num_features(),
        dataset.num_classes(),
    )
}

pub(crate) fn candidate_stats(
    candidates: &[CandidateSet],
    d: usize,
    m: usize,
) -> Result<DatasetStats> {
    if candidates.is_empty() {
        return Err(Error::param("dataset", "statistics of an empty dataset"));
    }
    let n = candidates.len();
    let total: usize = candidates.iter().map(CandidateSet::cardinality).sum();
    let clean = candidates.iter().filter(|s| s.is_clean()).count();
    Ok(DatasetStats {
        n,
        d,
        m,
        avg_candidates: total as f64 / n as f64,
        clean_rate: clean as f64 / n as f64,
    })
}

/// Number of test instances for a split: `n * test_fraction` rounded to the
/// nearest integer, kept within `1..n`.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    let t = (n as f64 * test_fraction).round() as usize;
    t.clamp(1, n - 1)
}

/// Shuffled disjoint train/test partition, deterministic in `seed`.
pub fn split(
    dataset: &PartialDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(PartialDataset, PartialDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(
            "test_fraction",
            format!("{test_fraction} is outside (0, 1)"),
        ));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::param(
            "dataset",
            "need at least 2 instances to split",
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = order.split_at(test_size(n, test_fraction));
    Ok((dataset.subset(train), dataset.subset(test)))
}
