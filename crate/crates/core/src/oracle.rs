//! Slow, obviously-correct reference implementations used to check the fast
//! paths (by the test suites and by the `check` command).

use crate::count::CountInterval;
use crate::data::CandidateSet;
use crate::knn::NeighborList;
use crate::Matrix;

/// Count pmf by summing the probability of each of the `2^n` outcomes.
pub fn poisson_binomial_enumerate(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    assert!(n <= 24, "enumeration over 2^{n} outcomes");
    let mut pmf = vec![0.0; n + 1];
    for outcome in 0u32..(1 << n) {
        let mut prob = 1.0;
        for (i, &pi) in p.iter().enumerate() {
            prob *= if outcome >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        pmf[outcome.count_ones() as usize] += prob;
    }
    pmf
}

/// `P(lo <= count <= hi)` by enumeration.
pub fn interval_prob_enumerate(p: &[f64], interval: CountInterval) -> f64 {
    poisson_binomial_enumerate(p)[interval.lo..=interval.hi]
        .iter()
        .sum()
}

/// k nearest neighbours from a full distance table and a stable sort.
pub fn knn_all_pairs(points: &Matrix, k: usize) -> Vec<NeighborList> {
    let p = points.rows();
    let table: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    points
                        .row(i)
                        .iter()
                        .zip(points.row(j))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    (0..p)
        .map(|i| {
            let mut others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
            // stable: equal distances keep index order
            others.sort_by(|&a, &b| table[i][a].partial_cmp(&table[i][b]).unwrap());
            others.truncate(k);
            NeighborList {
                distances: others.iter().map(|&j| table[i][j].sqrt()).collect(),
                indices: others,
            }
        })
        .collect()
}

/// Per-class `(clean count, clean + partial count)` by a naive scan per class.
pub fn recount_intervals(candidates: &[CandidateSet], m: usize) -> Vec<CountInterval> {
    (0..m)
        .map(|j| {
            let clean = candidates
                .iter()
                .filter(|s| s.cardinality() == 1 && s.contains(j))
                .count();
            let partial = candidates
                .iter()
                .filter(|s| s.cardinality() > 1 && s.contains(j))
                .count();
            CountInterval::new(clean, clean + partial)
        })
        .collect()
}

/// Five-point central finite differences of `f` at `x` with step `h`
/// (truncation error of order `h^4`).
pub fn central_difference<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut at = |i: usize, offset: f64, probe: &mut Vec<f64>| {
        probe[i] = x[i] + offset;
        let v = f(probe);
        probe[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| {
            let (p1, m1) = (at(i, h, &mut probe), at(i, -h, &mut probe));
            let (p2, m2) = (at(i, 2.0 * h, &mut probe), at(i, -2.0 * h, &mut probe));
            (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
