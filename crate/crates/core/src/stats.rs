//! Friedman test and Bonferroni-Dunn critical difference over average ranks.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Average rank of each of `k` algorithms over `cases` cases (rank 1 = best).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub avg_ranks: Vec<f64>,
    pub cases: usize,
}

impl RankTable {
    pub fn new(avg_ranks: Vec<f64>, cases: usize) -> Self {
        Self { avg_ranks, cases }
    }

    pub fn algorithms(&self) -> usize {
        self.avg_ranks.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friedman {
    pub chi2: f64,
    /// Iman-Davenport F statistic.
    pub f_f: f64,
}

/// Friedman chi-square `12N / (k(k+1)) * (sum R_i^2 - k(k+1)^2 / 4)`.
pub fn friedman_chi2(table: &RankTable) -> Result<f64> {
    if table.algorithms() < 2 || table.cases < 2 {
        return Err(Error::Degenerate(format!(
            "need k >= 2 and N >= 2, got k={} N={}",
            table.algorithms(),
            table.cases
        )));
    }
    let k = table.algorithms() as f64;
    let n = table.cases as f64;
    let sum_sq: f64 = table.avg_ranks.iter().map(|r| r * r).sum();
    Ok(12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0))
}

/// Friedman chi-square and the F statistic
/// `(N-1) chi2 / (N(k-1) - chi2)`.
pub fn friedman(table: &RankTable) -> Result<Friedman> {
    let chi2 = friedman_chi2(table)?;
    let k = table.algorithms() as f64;
    let n = table.cases as f64;
    let denom = n * (k - 1.0) - chi2;
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "N(k-1) - chi2 = {denom} (ranks agree perfectly across cases)"
        )));
    }
    Ok(Friedman {
        chi2,
        f_f: (n - 1.0) * chi2 / denom,
    })
}

/// `q_alpha * sqrt(k (k + 1) / (6 N))`
pub fn bonferroni_dunn_cd(q_alpha: f64, k: usize, cases: usize) -> Result<f64> {
    if q_alpha.is_nan() || q_alpha <= 0.0 {
        return Err(Error::param(
            "q_alpha",
            format!("{q_alpha} must be positive"),
        ));
    }
    if cases == 0 {
        return Err(Error::param("cases", "must be at least 1"));
    }
    let k = k as f64;
    Ok(q_alpha * (k * (k + 1.0) / (6.0 * cases as f64)).sqrt())
}

/// Two-tailed Bonferroni-Dunn critical values for comparing `k` algorithms
/// against one control, for `alpha` of 0.05 or 0.10 and `2 <= k <= 10`.
pub fn bonferroni_dunn_q(k: usize, alpha: f64) -> Option<f64> {
    const Q05: [f64; 9] = [
        1.960, 2.241, 2.394, 2.498, 2.576, 2.638, 2.690, 2.724, 2.773,
    ];
    const Q10: [f64; 9] = [
        1.645, 1.960, 2.128, 2.241, 2.326, 2.394, 2.450, 2.498, 2.539,
    ];
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q10
    } else {
        return None;
    };
    k.checked_sub(2).and_then(|i| table.get(i)).copied()
}

/// Ranks of one case, 1 = highest score; ties share their average rank.
pub fn rank_case(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

/// Average ranks of an `N x k` score matrix (higher score is better).
///
/// `fixed` pins the rank of `(case, algorithm)` cells, e.g. 7.5 for results
/// that are unavailable; such cells may hold NaN. The remaining algorithms of
/// that case are ranked among themselves starting from 1.
pub fn rank_results(
    scores: &[Vec<f64>],
    fixed: &HashMap<(usize, usize), f64>,
) -> Result<RankTable> {
    let k = scores.first().map_or(0, Vec::len);
    if scores.is_empty() || k == 0 {
        return Err(Error::param("scores", "empty score matrix"));
    }
    let mut totals = vec![0.0; k];
    for (case, row) in scores.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
        let free: Vec<usize> = (0..k)
            .filter(|&a| !fixed.contains_key(&(case, a)))
            .collect();
        if let Some(&a) = free.iter().find(|&&a| row[a].is_nan()) {
            return Err(Error::param(
                "scores",
                format!("case {case}, algorithm {a}: missing score without a fixed rank"),
            ));
        }
        let sub: Vec<f64> = free.iter().map(|&a| row[a]).collect();
        for (&a, r) in free.iter().zip(rank_case(&sub)) {
            totals[a] += r;
        }
        for a in (0..k).filter(|a| !free.contains(a)) {
            totals[a] += fixed[&(case, a)];
        }
    }
    let n = scores.len() as f64;
    Ok(RankTable::new(
        totals.into_iter().map(|t| t / n).collect(),
        scores.len(),
    ))
}

/// Text rendering of a critical-difference comparison: algorithms sorted by
/// average rank, each marked by whether its gap to the best exceeds `cd`.
pub fn render_cd(names: &[String], table: &RankTable, cd: f64) -> String {
    let mut order: Vec<usize> = (0..table.algorithms()).collect();
    order.sort_by(|&a, &b| {
        table.avg_ranks[a]
            .total_cmp(&table.avg_ranks[b])
            .then(a.cmp(&b))
    });
    let best = table.avg_ranks[order[0]];
    let width = names.iter().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for &a in &order {
        let r = table.avg_ranks[a];
        let gap = r - best;
        let verdict = if a == order[0] {
            "control"
        } else if gap > cd {
            "differs"
        } else {
            "within CD"
        };
        let bar = "#".repeat((r * 4.0).round() as usize);
        writeln!(
            out,
            "{:<width$}  {r:>6.3}  +{gap:<6.3} {verdict:<9}  {bar}",
            names[a]
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE6: [f64; 8] = [3.56, 3.00, 3.16, 5.36, 6.24, 6.52, 7.08, 1.12];

    #[test]
    fn equal_ranks_give_zero() {
        let out = friedman(&RankTable::new(vec![4.5; 8], 25)).unwrap();
        assert!(out.chi2.abs() < 1e-12 && out.f_f.abs() < 1e-12);
    }

    #[test]
    fn published_ranks() {
        let out = friedman(&RankTable::new(TABLE6.to_vec(), 25)).unwrap();
        assert!((out.f_f - 69.4).abs() <= 0.2, "{}", out.f_f);
        let cd = bonferroni_dunn_cd(2.690, 8, 25).unwrap();
        assert!((cd - 1.864).abs() <= 1e-3, "{cd}");
    }

    #[test]
    fn two_algorithms_ten_cases() {
        // chi2 = 12*10/6 * (5 - 4.5) = 10 = N(k-1), so F_F is undefined
        let t = RankTable::new(vec![1.0, 2.0], 10);
        assert_eq!(friedman_chi2(&t).unwrap(), 10.0);
        assert!(matches!(friedman(&t), Err(Error::Degenerate(_))));
        let t = RankTable::new(vec![1.2, 1.8], 10);
        let out = friedman(&t).unwrap();
        assert!((out.chi2 - 3.6).abs() < 1e-12);
    }

    #[test]
    fn cd_limits() {
        assert_eq!(bonferroni_dunn_cd(1.0, 2, 1).unwrap(), 1.0);
        assert!(bonferroni_dunn_cd(2.69, 8, 1_000_000_000).unwrap() < 1e-3);
        assert!(bonferroni_dunn_cd(0.0, 2, 1).is_err());
        assert_eq!(bonferroni_dunn_q(8, 0.05), Some(2.690));
        assert_eq!(bonferroni_dunn_q(11, 0.05), None);
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_case(&[0.9, 0.8]), vec![1.0, 2.0]);
        assert_eq!(rank_case(&[0.9, 0.9]), vec![1.5, 1.5]);
        assert_eq!(rank_case(&[0.1, 0.5, 0.5, 0.9]), vec![4.0, 2.5, 2.5, 1.0]);
    }

    #[test]
    fn fixed_ranks_for_unavailable_results() {
        let scores = vec![vec![0.9, 0.7, f64::NAN, f64::NAN], vec![0.6, 0.8, 0.5, 0.4]];
        let fixed: HashMap<_, _> = [((0, 2), 3.5), ((0, 3), 3.5)].into_iter().collect();
        let t = rank_results(&scores, &fixed).unwrap();
        assert_eq!(t.avg_ranks, vec![1.5, 1.5, 3.25, 3.75]);
        assert!(rank_results(&scores, &HashMap::new()).is_err());
    }

    #[test]
    fn render_marks_significant_gaps() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let text = render_cd(&names, &RankTable::new(vec![2.0, 1.0, 3.0], 10), 1.5);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("b") && lines[0].contains("control"));
        assert!(lines[1].contains("within CD"));
        assert!(lines[2].contains("differs"));
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut ranks = TABLE6.to_vec();
            ranks.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = friedman(&RankTable::new(TABLE6.to_vec(), 25)).unwrap();
            let b = friedman(&RankTable::new(ranks, 25)).unwrap();
            prop_assert!((a.chi2 - b.chi2).abs() < 1e-9);
        }

        #[test]
        fn chi2_nonnegative(scores in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 5), 2..12)) {
            let t = rank_results(&scores, &HashMap::new()).unwrap();
            let s: f64 = t.avg_ranks.iter().sum();
            prop_assert!((s - 15.0).abs() < 1e-9);
            let chi2 = 12.0 * t.cases as f64 / 30.0 * (t.avg_ranks.iter().map(|r| r * r).sum::<f64>() - 5.0 * 36.0 / 4.0);
            prop_assert!(chi2 >= -1e-9);
        }

        #[test]
        fn strict_case_is_a_permutation(mut scores in proptest::collection::vec(0.0f64..1.0, 1..10)) {
            scores.dedup();
            let mut r = rank_case(&scores);
            r.sort_by(f64::total_cmp);
            let want: Vec<f64> = (1..=scores.len()).map(|x| x as f64).collect();
            let distinct = { let mut s = scores.clone(); s.sort_by(f64::total_cmp); s.dedup(); s.len() == scores.len() };
            prop_assume!(distinct);
            prop_assert_eq!(r, want);
        }
    }
}
