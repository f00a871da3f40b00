//! Exact Euclidean k-nearest-neighbour search by brute force.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Where neighbours are searched during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnScope {
    /// Among the instances of the current mini-batch.
    #[default]
    Batch,
    /// Among the whole training set.
    Global,
}

/// Neighbours of one query point, nearest first. Indices refer to rows of the
/// searched matrix and never include the query itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub neighbors: Vec<NeighborList>,
    pub requested_k: usize,
    /// `min(requested_k, p - 1)`.
    pub effective_k: usize,
}

impl KnnResult {
    pub fn clamped(&self) -> bool {
        self.effective_k < self.requested_k
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// k nearest neighbours of every row of `points` among the other rows.
///
/// Equal distances are ordered by lower row index. `k` larger than `p - 1` is
/// clamped; the result records both values. Rows are processed in parallel but
/// each list depends only on its own row, so the output does not depend on the
/// thread count.
pub fn knn_search(points: &Matrix, k: usize) -> Result<KnnResult> {
    let p = points.rows();
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if p < 2 {
        return Err(Error::param(
            "points",
            format!("need at least 2 points, got {p}"),
        ));
    }
    let effective_k = k.min(p - 1);
    let neighbors = (0..p)
        .into_par_iter()
        .map(|i| query(points, i, effective_k))
        .collect();
    Ok(KnnResult {
        neighbors,
        requested_k: k,
        effective_k,
    })
}

fn query(points: &Matrix, i: usize, k: usize) -> NeighborList {
    let q = points.row(i);
    let mut cand: Vec<(f64, usize)> = (0..points.rows())
        .filter(|&j| j != i)
        .map(|j| (squared_distance(q, points.row(j)), j))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_distance_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_index);
    NeighborList {
        indices: cand.iter().map(|&(_, j)| j).collect(),
        distances: cand.iter().map(|&(d2, _)| d2.sqrt()).collect(),
    }
}
