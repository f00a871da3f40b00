//! Oracle comparisons run by the `check` command and the acceptance suite.
//!
//! Each check compares a fast path against a reference from [`crate::oracle`]
//! and reports the worst deviation seen. The count-distribution routine is
//! passed in so that a deliberately broken implementation can be checked too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::count::{
    batch_intervals, count_loss, count_loss_logits, logsumexp, CountDistribution, CountInterval,
    CountMode,
};
use crate::data::CandidateSet;
use crate::neural::{reweighted_ce, Mlp};
use crate::reweight::build_weight_matrix;
use crate::{oracle, Matrix, Result};

pub type PmfFn = fn(&[f64]) -> Result<CountDistribution>;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Random probability vectors compared against enumeration.
    pub trials: usize,
    /// Largest vector length for enumeration (2^n outcomes).
    pub max_n: usize,
    /// Random instances for each gradient check.
    pub gradient_instances: usize,
    /// Length of the underflow stress vectors.
    pub stress_n: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            max_n: 12,
            gradient_instances: 50,
            stress_n: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

fn outcome(
    name: &'static str,
    devs: impl IntoIterator<Item = f64>,
    tolerance: f64,
) -> CheckOutcome {
    // NaN counts as an infinite deviation
    let max_deviation = devs
        .into_iter()
        .map(|d| if d.is_nan() { f64::INFINITY } else { d })
        .fold(0.0, f64::max);
    CheckOutcome {
        name,
        max_deviation,
        tolerance,
    }
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect()
}

fn log_all(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| x.ln()).collect()
}

/// Max absolute error of the pmf against `2^n` enumeration.
pub fn check_pmf(cfg: &CheckConfig, pmf: PmfFn) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let devs = (0..cfg.trials).map(|_| {
        let n = rng.random_range(0..=cfg.max_n);
        let p = random_probs(&mut rng, n);
        let want = oracle::poisson_binomial_enumerate(&p);
        match pmf(&log_all(&p)) {
            Ok(d) if d.log_pmf().len() == n + 1 => d
                .pmf()
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    });
    outcome("count-pmf-vs-enumeration", devs.collect::<Vec<_>>(), 1e-10)
}

/// Max absolute error of interval probabilities against enumeration.
pub fn check_interval_probs(cfg: &CheckConfig, pmf: PmfFn) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1);
    let devs = (0..cfg.trials).map(|_| {
        let n = rng.random_range(0..=cfg.max_n);
        let p = random_probs(&mut rng, n);
        let (a, b) = (rng.random_range(0..=n), rng.random_range(0..=n));
        let iv = CountInterval::new(a.min(b), a.max(b));
        let want = oracle::interval_prob_enumerate(&p, iv);
        match pmf(&log_all(&p)) {
            Ok(d) if d.log_pmf().len() == n + 1 => {
                (logsumexp(&d.log_pmf()[iv.lo..=iv.hi]).exp() - want).abs()
            }
            _ => f64::INFINITY,
        }
    });
    outcome(
        "interval-prob-vs-enumeration",
        devs.collect::<Vec<_>>(),
        1e-10,
    )
}

fn random_prob_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let mut probs = Matrix::zeros(n, m);
    for i in 0..n {
        let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        for (j, r) in raw.iter().enumerate() {
            probs[(i, j)] = r / s;
        }
    }
    probs
}

fn random_candidates(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<CandidateSet> {
    (0..n)
        .map(|_| {
            let truth = rng.random_range(0..m);
            let extra = (0..m).filter(|&j| j != truth && rng.random::<f64>() < 0.4);
            CandidateSet::from_labels(std::iter::once(truth).chain(extra.collect::<Vec<_>>()), m)
                .unwrap()
        })
        .collect()
}

/// Count-loss gradient (both modes, with respect to probabilities and to
/// logits) against central differences with `h = 1e-4`; relative error.
pub fn check_count_gradient(cfg: &CheckConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x2);
    let mut devs = Vec::with_capacity(cfg.gradient_instances);
    for t in 0..cfg.gradient_instances {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=4);
        let mode = if t % 2 == 0 {
            CountMode::Nll
        } else {
            CountMode::Entropy
        };
        // all-ambiguous batches give every class the interval [0, n]; the
        // loss is then constant and its gradient identically zero
        let intervals = loop {
            let iv = batch_intervals(&random_candidates(&mut rng, n, m), m);
            if iv.iter().any(|c| (c.lo, c.hi) != (0, n)) {
                break iv;
            }
        };
        let probs = random_prob_matrix(&mut rng, n, m);
        let dev = match count_loss(&probs, &intervals, mode) {
            Ok(out) => {
                let fd = oracle::central_difference(probs.as_slice(), 1e-4, |x| {
                    count_loss(&Matrix::from_vec(n, m, x.to_vec()), &intervals, mode)
                        .map_or(f64::NAN, |o| o.loss)
                });
                oracle::relative_error(out.grad.as_slice(), &fd)
            }
            Err(_) => f64::INFINITY,
        };
        devs.push(dev);
        let logits: Vec<f64> = (0..n * m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dev = match count_loss_logits(&Matrix::from_vec(n, m, logits.clone()), &intervals, mode)
        {
            Ok(out) => {
                let fd = oracle::central_difference(&logits, 1e-4, |x| {
                    count_loss_logits(&Matrix::from_vec(n, m, x.to_vec()), &intervals, mode)
                        .map_or(f64::NAN, |o| o.loss)
                });
                oracle::relative_error(out.grad.as_slice(), &fd)
            }
            Err(_) => f64::INFINITY,
        };
        devs.push(dev);
    }
    outcome("count-loss-gradient", devs, 1e-6)
}

/// Parameter gradients of the full training objective (reweighted
/// cross-entropy plus weighted count loss) through an MLP, against central
/// differences with `h = 1e-5`; relative error.
pub fn check_mlp_gradient(cfg: &CheckConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x3);
    let lambda = 0.5;
    let devs: Vec<f64> = (0..cfg.gradient_instances)
        .map(|t| {
            let (n, d, m) = (10, 4, 3);
            let mut model = Mlp::new(&[d, 6, 5, m], cfg.seed.wrapping_add(t as u64)).unwrap();
            // random biases: zero biases put dead rows exactly on the ReLU kink
            let theta: Vec<f64> = (0..model.num_params())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            model.set_flat_params(&theta).unwrap();
            let x = Matrix::from_vec(
                n,
                d,
                (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            );
            let cands = random_candidates(&mut rng, n, m);
            let enhanced: Vec<Option<usize>> = cands
                .iter()
                .map(|s| {
                    let labels: Vec<usize> = s.iter().collect();
                    Some(labels[rng.random_range(0..labels.len())])
                })
                .collect();
            let weights = build_weight_matrix(&cands, &enhanced, 3.0)
                .unwrap()
                .into_matrix();
            let intervals = batch_intervals(&cands, m);
            let objective = |model: &Mlp| -> Option<(f64, Matrix)> {
                let fwd = model.forward(&x).ok()?;
                let ce = reweighted_ce(&fwd.probs, &weights).ok()?;
                let count = count_loss_logits(&fwd.logits, &intervals, CountMode::Nll).ok()?;
                let mut grad = ce.grad_logits;
                grad.add_scaled(&count.grad, lambda);
                Some((ce.loss + lambda * count.loss, grad))
            };
            let Some((_, grad_logits)) = objective(&model) else {
                return f64::INFINITY;
            };
            let fwd = model.forward(&x).unwrap();
            let analytic = model.backward(&x, &fwd, &grad_logits).unwrap().flatten();
            let fd = oracle::central_difference(&model.flat_params(), 1e-5, |theta| {
                let mut probe = model.clone();
                probe.set_flat_params(theta).unwrap();
                objective(&probe).map_or(f64::NAN, |(l, _)| l)
            });
            oracle::relative_error(&analytic, &fd)
        })
        .collect();
    outcome("mlp-objective-gradient", devs, 1e-4)
}

/// Normalisation of long count distributions built from extreme
/// probabilities (1e-12, 0.5, 1 - 1e-12); non-finite entries fail.
pub fn check_stress(cfg: &CheckConfig, pmf: PmfFn) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4);
    let choices: [f64; 3] = [1e-12, 0.5, 1.0 - 1e-12];
    let mixes: [&[usize]; 4] = [&[1], &[0, 1], &[1, 2], &[0, 1, 2]];
    let devs: Vec<f64> = mixes
        .iter()
        .map(|mix| {
            let log_p: Vec<f64> = (0..cfg.stress_n)
                .map(|_| choices[mix[rng.random_range(0..mix.len())]].ln())
                .collect();
            match pmf(&log_p) {
                Ok(d) if d.log_pmf().iter().all(|l| l.is_finite()) => {
                    (d.pmf().iter().sum::<f64>() - 1.0).abs()
                }
                _ => f64::INFINITY,
            }
        })
        .collect();
    outcome("stress-normalisation", devs, 1e-9)
}

pub fn check_logsumexp() -> CheckOutcome {
    let dev = (logsumexp(&[-1000.0, -1000.0]) - (-1000.0 + std::f64::consts::LN_2)).abs();
    outcome("logsumexp-no-underflow", [dev], 1e-12)
}

/// All checks, in a fixed order.
pub fn run_checks(cfg: &CheckConfig, pmf: PmfFn) -> Vec<CheckOutcome> {
    vec![
        check_pmf(cfg, pmf),
        check_interval_probs(cfg, pmf),
        check_count_gradient(cfg),
        check_mlp_gradient(cfg),
        check_stress(cfg, pmf),
        check_logsumexp(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::count_log_pmf;

    #[test]
    fn shifted_pmf_is_caught() {
        fn off_by_one(log_p: &[f64]) -> Result<CountDistribution> {
            // drops the last trial
            count_log_pmf(&log_p[..log_p.len().saturating_sub(1)])
        }
        let cfg = CheckConfig {
            trials: 30,
            gradient_instances: 2,
            stress_n: 64,
            ..CheckConfig::default()
        };
        assert!(!check_pmf(&cfg, off_by_one).passed());
        assert!(!check_interval_probs(&cfg, off_by_one).passed());
        assert!(check_pmf(&cfg, count_log_pmf).passed());
    }
}
