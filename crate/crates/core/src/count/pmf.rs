use super::logspace::{log1mexp_unchecked, log_add_exp, logsumexp};
use crate::data::CandidateSet;
use crate::{Error, Result};

/// Log-probabilities of the number of successes among `n` independent
/// Bernoulli trials (a Poisson-binomial distribution), indexed by count `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    log_pmf: Vec<f64>,
}

impl CountDistribution {
    pub fn log_pmf(&self) -> &[f64] {
        &self.log_pmf
    }

    /// Number of trials.
    pub fn trials(&self) -> usize {
        self.log_pmf.len() - 1
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|l| l.exp()).collect()
    }
}

/// Allowed range `lo..=hi` for the number of instances of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountInterval {
    pub lo: usize,
    pub hi: usize,
}

impl CountInterval {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.lo > self.hi || self.hi > n {
            return Err(Error::InvalidInterval {
                lo: self.lo,
                hi: self.hi,
                n,
            });
        }
        Ok(())
    }
}

/// Count distribution for success log-probabilities `log_p`.
///
/// Runs the recurrence `P_i(k) = P_{i-1}(k-1) p_i + P_{i-1}(k) (1 - p_i)`
/// in log space with a single rolling row.
pub fn count_log_pmf(log_p: &[f64]) -> Result<CountDistribution> {
    if let Some(&bad) = log_p.iter().find(|&&l| l > 0.0 || l.is_nan()) {
        return Err(Error::Domain(bad));
    }
    let log_q: Vec<f64> = log_p.iter().map(|&l| log1mexp_unchecked(l)).collect();
    Ok(count_log_pmf_split(log_p, &log_q))
}

/// Same recurrence with `log(1 - p)` supplied by the caller.
pub(crate) fn count_log_pmf_split(log_p: &[f64], log_q: &[f64]) -> CountDistribution {
    let n = log_p.len();
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    for (i, (&lp, &lq)) in log_p.iter().zip(log_q).enumerate() {
        for k in (1..=i + 1).rev() {
            row[k] = log_add_exp(row[k - 1] + lp, row[k] + lq);
        }
        row[0] += lq;
    }
    CountDistribution { log_pmf: row }
}

/// Full forward lattice: row `i` holds the count distribution of the first
/// `i` trials (length `i + 1`), stored contiguously.
pub(crate) struct Lattice {
    data: Vec<f64>,
}

impl Lattice {
    pub(crate) fn build(log_p: &[f64], log_q: &[f64]) -> Self {
        let n = log_p.len();
        let mut data = Vec::with_capacity((n + 1) * (n + 2) / 2);
        data.push(0.0);
        for i in 0..n {
            let prev_start = i * (i + 1) / 2;
            for k in 0..=i + 1 {
                let take = if k > 0 {
                    data[prev_start + k - 1] + log_p[i]
                } else {
                    f64::NEG_INFINITY
                };
                let skip = if k <= i {
                    data[prev_start + k] + log_q[i]
                } else {
                    f64::NEG_INFINITY
                };
                data.push(log_add_exp(take, skip));
            }
        }
        Self { data }
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }
}

/// `log P(lo <= count <= hi)`.
pub fn interval_log_prob(dist: &CountDistribution, interval: CountInterval) -> Result<f64> {
    interval.validate(dist.trials())?;
    Ok(logsumexp(&dist.log_pmf[interval.lo..=interval.hi]))
}

/// Per-class count intervals of a batch: `lo` counts clean instances of the
/// class, `hi` adds partial instances listing it as a candidate.
pub fn batch_intervals<'a, I>(candidates: I, m: usize) -> Vec<CountInterval>
where
    I: IntoIterator<Item = &'a CandidateSet>,
{
    let mut intervals = vec![CountInterval::new(0, 0); m];
    for set in candidates {
        let clean = set.is_clean();
        for label in set.iter() {
            if clean {
                intervals[label].lo += 1;
            }
            intervals[label].hi += 1;
        }
    }
    intervals
}

pub(crate) fn check_interval(interval: CountInterval, n: usize) -> Result<()> {
    interval.validate(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::log1mexp;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pmf_of(p: &[f64]) -> Vec<f64> {
        let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
        count_log_pmf(&lp).unwrap().pmf()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn two_fair_coins() {
        assert_close(&pmf_of(&[0.5, 0.5]), &[0.25, 0.5, 0.25], 1e-15);
    }

    #[test]
    fn deterministic_trials() {
        assert_close(&pmf_of(&[1.0, 0.0]), &[0.0, 1.0, 0.0], 0.0);
    }

    #[test]
    fn three_mixed_trials() {
        assert_close(&pmf_of(&[0.2, 0.7, 0.5]), &[0.12, 0.43, 0.38, 0.07], 1e-14);
    }

    #[test]
    fn no_trials() {
        let d = count_log_pmf(&[]).unwrap();
        assert_eq!(d.log_pmf(), &[0.0]);
    }

    #[test]
    fn rejects_positive_log_prob() {
        assert!(count_log_pmf(&[-0.1, 0.2]).is_err());
    }

    #[test]
    fn interval_examples() {
        let d = count_log_pmf(&[0.5f64.ln(), 0.5f64.ln()]).unwrap();
        assert_eq!(
            interval_log_prob(&d, CountInterval::new(0, 2)).unwrap(),
            0.0
        );
        assert!(
            (interval_log_prob(&d, CountInterval::new(1, 2)).unwrap() - 0.75f64.ln()).abs() < 1e-15
        );
        let p = [0.2f64, 0.7, 0.5];
        let d = count_log_pmf(&p.map(f64::ln)).unwrap();
        assert!(
            (interval_log_prob(&d, CountInterval::new(1, 2)).unwrap() - 0.81f64.ln()).abs() < 1e-14
        );
        assert!(interval_log_prob(&d, CountInterval::new(2, 1)).is_err());
        assert!(interval_log_prob(&d, CountInterval::new(0, 4)).is_err());
    }

    #[test]
    fn lattice_last_row_matches_rolling_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lp: Vec<f64> = (0..40).map(|_| rng.random::<f64>().ln()).collect();
        let lq: Vec<f64> = lp.iter().map(|&l| log1mexp(l).unwrap()).collect();
        let lattice = Lattice::build(&lp, &lq);
        assert_eq!(lattice.row(40), count_log_pmf_split(&lp, &lq).log_pmf());
    }

    #[test]
    fn matches_enumeration_up_to_twelve_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for n in 0..=12 {
            for _ in 0..5 {
                let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                assert_close(&pmf_of(&p), &oracle::poisson_binomial_enumerate(&p), 1e-10);
            }
        }
    }

    #[test]
    fn large_uniform_batch_stays_finite() {
        let lp = vec![0.5f64.ln(); 1024];
        let d = count_log_pmf(&lp).unwrap();
        assert!(d.log_pmf().iter().all(|l| l.is_finite()));
        assert!(logsumexp(d.log_pmf()).abs() < 1e-9);
        assert!((d.log_pmf()[0] - 1024.0 * 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn extreme_probabilities_stay_normalised() {
        let choices: [f64; 3] = [1e-12, 0.5, 1.0 - 1e-12];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1, 17, 512, 4096] {
            let lp: Vec<f64> = (0..n)
                .map(|_| choices[rng.random_range(0..3)].ln())
                .collect();
            let d = count_log_pmf(&lp).unwrap();
            let total: f64 = d.pmf().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "n={n}: {total}");
            assert!(d.log_pmf().iter().all(|l| !l.is_nan()));
        }
    }

    #[test]
    fn intervals_examples() {
        let s = |l: &[usize]| CandidateSet::from_labels(l.iter().copied(), 2).unwrap();
        let clean = [s(&[0]), s(&[0]), s(&[1])];
        assert_eq!(
            batch_intervals(&clean, 2),
            vec![CountInterval::new(2, 2), CountInterval::new(1, 1)]
        );
        let mixed = [s(&[0]), s(&[0, 1])];
        assert_eq!(
            batch_intervals(&mixed, 2),
            vec![CountInterval::new(1, 2), CountInterval::new(0, 1)]
        );
    }

    #[test]
    fn intervals_match_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let m = 10;
        let y: Vec<usize> = (0..64).map(|_| rng.random_range(0..m)).collect();
        let sets = crate::data::generate_synthetic(&y, m, 0.3, 1).unwrap();
        assert_eq!(
            batch_intervals(&sets, m),
            oracle::recount_intervals(&sets, m)
        );
    }

    proptest! {
        #[test]
        fn widening_never_decreases_probability(
            p in proptest::collection::vec(0.0f64..=1.0, 1..30),
            a in 0usize..31, b in 0usize..31, extra_lo in 0usize..5, extra_hi in 0usize..5,
        ) {
            let n = p.len();
            let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
            let d = count_log_pmf(&p.iter().map(|x| x.ln()).collect::<Vec<_>>()).unwrap();
            let inner = interval_log_prob(&d, CountInterval::new(lo, hi)).unwrap();
            let outer = interval_log_prob(
                &d,
                CountInterval::new(lo.saturating_sub(extra_lo), (hi + extra_hi).min(n)),
            ).unwrap();
            prop_assert!(outer >= inner);
        }

        #[test]
        fn normalised(p in proptest::collection::vec(0.0f64..=1.0, 0..200)) {
            let d = count_log_pmf(&p.iter().map(|x| x.ln()).collect::<Vec<_>>()).unwrap();
            prop_assert!(logsumexp(d.log_pmf()).abs() < 1e-9);
        }
    }
}
