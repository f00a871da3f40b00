use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logspace::log1mexp_unchecked;
use super::pmf::{check_interval, CountInterval, Lattice};
use crate::{Error, Matrix, Result};

/// Interval log-probabilities below this are clamped when forming the loss
/// and its gradient.
pub const LOG_PROB_FLOOR: f64 = -700.0;

/// How each class's interval probability `q` becomes a loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// `-log q`
    #[default]
    Nll,
    /// `-q log q`, with `0 log 0 = 0`. Note this is also minimised by `q = 0`.
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountLoss {
    /// Sum of the per-class terms.
    pub loss: f64,
    /// Gradient of `loss` with respect to the input matrix.
    pub grad: Matrix,
    /// Unclamped `log q` for every class.
    pub class_log_probs: Vec<f64>,
    /// Some class had `log q` below [`LOG_PROB_FLOOR`] in nll mode; its term
    /// and gradient were computed from the floor.
    pub saturated: bool,
}

struct ClassTerm {
    log_q: f64,
    loss: f64,
    saturated: bool,
    /// `dL/dp_i`, or `p_i dL/dp_i` when built with `scale_by_p`.
    grad: Vec<f64>,
}

/// Streams `log sum_k exp(a[k] + b[k + offset])` over `k in 0..a.len()`.
fn log_dot(a: &[f64], b: &[f64], offset: usize) -> f64 {
    let terms = a.iter().zip(&b[offset..]).map(|(x, y)| x + y);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Forward lattice plus one adjoint sweep. `beta[k]` holds the log-probability
/// that the trials not yet swept move a running count of `k` into the interval.
fn class_term(
    log_p: &[f64],
    log_q: &[f64],
    interval: CountInterval,
    mode: CountMode,
    scale_by_p: bool,
) -> ClassTerm {
    let n = log_p.len();
    let lattice = Lattice::build(log_p, log_q);
    let mut beta = vec![f64::NEG_INFINITY; n + 2];
    beta[interval.lo..=interval.hi].fill(0.0);

    let log_q_interval = log_dot(lattice.row(n), &beta, 0);
    let clamped = log_q_interval.max(LOG_PROB_FLOOR);
    let (loss, saturated) = match mode {
        CountMode::Nll => (-clamped, log_q_interval < LOG_PROB_FLOOR),
        CountMode::Entropy if log_q_interval == f64::NEG_INFINITY => (0.0, false),
        CountMode::Entropy => (-log_q_interval.exp() * log_q_interval, false),
    };

    let mut grad = vec![0.0; n];
    let mut next = vec![f64::NEG_INFINITY; n + 2];
    for i in (0..n).rev() {
        let alpha = lattice.row(i);
        let up = log_dot(alpha, &beta, 1);
        let stay = log_dot(alpha, &beta, 0);
        let shift = if scale_by_p { log_p[i] } else { 0.0 };
        // dq/dp_i = exp(up) - exp(stay)
        grad[i] = match mode {
            CountMode::Nll => -((up + shift - clamped).exp() - (stay + shift - clamped).exp()),
            CountMode::Entropy => -(clamped + 1.0) * ((up + shift).exp() - (stay + shift).exp()),
        };
        for k in 0..=i {
            next[k] = super::log_add_exp(log_p[i] + beta[k + 1], log_q[i] + beta[k]);
        }
        next[i + 1] = f64::NEG_INFINITY;
        std::mem::swap(&mut beta, &mut next);
    }

    ClassTerm {
        log_q: log_q_interval,
        loss,
        saturated,
        grad,
    }
}

fn validate_intervals(intervals: &[CountInterval], n: usize, m: usize) -> Result<()> {
    if intervals.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: intervals.len(),
        });
    }
    if n == 0 {
        return Err(Error::param("batch", "count loss of an empty batch"));
    }
    intervals.iter().try_for_each(|&iv| check_interval(iv, n))
}

fn column(matrix: &Matrix, j: usize) -> Vec<f64> {
    matrix.iter_rows().map(|r| r[j]).collect()
}

fn assemble(terms: Vec<ClassTerm>, n: usize, m: usize) -> (f64, Matrix, Vec<f64>, bool) {
    let mut grad = Matrix::zeros(n, m);
    let mut loss = 0.0;
    let mut saturated = false;
    let mut log_probs = Vec::with_capacity(m);
    for (j, term) in terms.into_iter().enumerate() {
        loss += term.loss;
        saturated |= term.saturated;
        log_probs.push(term.log_q);
        for (i, g) in term.grad.into_iter().enumerate() {
            grad[(i, j)] = g;
        }
    }
    (loss, grad, log_probs, saturated)
}

/// Count loss of an `n x m` matrix of per-instance class probabilities.
///
/// Column `j` is read as `n` independent Bernoulli probabilities of "instance
/// is class `j`"; the loss sums the per-class terms of `q_j = P(count_j in
/// intervals[j])`. The gradient treats every entry as an independent input.
pub fn count_loss(
    probs: &Matrix,
    intervals: &[CountInterval],
    mode: CountMode,
) -> Result<CountLoss> {
    let (n, m) = (probs.rows(), probs.cols());
    validate_intervals(intervals, n, m)?;
    if let Some(&bad) = probs.as_slice().iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::param("probs", format!("{bad} is not a probability")));
    }
    let terms: Vec<ClassTerm> = (0..m)
        .into_par_iter()
        .map(|j| {
            let p = column(probs, j);
            let log_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();
            let log_q: Vec<f64> = p.iter().map(|x| (-x).ln_1p()).collect();
            class_term(&log_p, &log_q, intervals[j], mode, false)
        })
        .collect();
    let (loss, grad, class_log_probs, saturated) = assemble(terms, n, m);
    Ok(CountLoss {
        loss,
        grad,
        class_log_probs,
        saturated,
    })
}

/// Count loss of `softmax(logits)`, with the gradient taken with respect to
/// the logits. Works from log-softmax throughout, so confident rows do not
/// round probabilities to exactly 0 or 1.
pub fn count_loss_logits(
    logits: &Matrix,
    intervals: &[CountInterval],
    mode: CountMode,
) -> Result<CountLoss> {
    let (n, m) = (logits.rows(), logits.cols());
    validate_intervals(intervals, n, m)?;
    let log_probs = crate::neural::log_softmax(logits);
    let terms: Vec<ClassTerm> = (0..m)
        .into_par_iter()
        .map(|j| {
            let log_p = column(&log_probs, j);
            let log_q: Vec<f64> = log_p
                .iter()
                .map(|&l| log1mexp_unchecked(l.min(0.0)))
                .collect();
            class_term(&log_p, &log_q, intervals[j], mode, true)
        })
        .collect();
    // scaled[i][j] = p_ij dL/dp_ij ; dL/dz_ik = scaled_ik - p_ik sum_j scaled_ij
    let (loss, mut grad, class_log_probs, saturated) = assemble(terms, n, m);
    for i in 0..n {
        let row = grad.row_mut(i);
        let total: f64 = row.iter().sum();
        for (g, lp) in row.iter_mut().zip(log_probs.row(i)) {
            *g -= lp.exp() * total;
        }
    }
    Ok(CountLoss {
        loss,
        grad,
        class_log_probs,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Matrix, Vec<CountInterval>) {
        let mut probs = Matrix::zeros(n, m);
        for i in 0..n {
            let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            for j in 0..m {
                probs[(i, j)] = raw[j] / s;
            }
        }
        let intervals = (0..m)
            .map(|_| {
                // a full [0, n] interval has an identically zero gradient
                loop {
                    let a = rng.random_range(0..=n);
                    let b = rng.random_range(0..=n);
                    if (a.min(b), a.max(b)) != (0, n) {
                        break CountInterval::new(a.min(b), a.max(b));
                    }
                }
            })
            .collect();
        (probs, intervals)
    }

    #[test]
    fn certain_intervals_cost_nothing() {
        let probs = Matrix::from_rows(&[[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]]);
        let full = vec![CountInterval::new(0, 3); 2];
        for mode in [CountMode::Nll, CountMode::Entropy] {
            let out = count_loss(&probs, &full, mode).unwrap();
            assert_eq!(out.loss.abs(), 0.0);
            assert!(
                out.grad.as_slice().iter().all(|g| g.abs() < 1e-15),
                "{:?}",
                out.grad
            );
        }
    }

    #[test]
    fn two_by_two_example() {
        let probs = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        let iv = vec![CountInterval::new(1, 2); 2];
        let out = count_loss(&probs, &iv, CountMode::Nll).unwrap();
        assert!((out.loss - 2.0 * -(0.75f64.ln())).abs() < 1e-14);
        let out = count_loss(&probs, &iv, CountMode::Entropy).unwrap();
        assert!((out.loss - 2.0 * -(0.75 * 0.75f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn loss_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(1..=8);
            let (probs, iv) = random_instance(&mut rng, n, 3);
            let out = count_loss(&probs, &iv, CountMode::Nll).unwrap();
            let mut want = 0.0;
            for j in 0..3 {
                let col: Vec<f64> = probs.iter_rows().map(|r| r[j]).collect();
                let pmf = oracle::poisson_binomial_enumerate(&col);
                want -= pmf[iv[j].lo..=iv[j].hi].iter().sum::<f64>().ln();
            }
            assert!((out.loss - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [CountMode::Nll, CountMode::Entropy] {
            for _ in 0..25 {
                let n = rng.random_range(1..=8);
                let m = rng.random_range(2..=4);
                let (probs, iv) = random_instance(&mut rng, n, m);
                let out = count_loss(&probs, &iv, mode).unwrap();
                let fd = oracle::central_difference(probs.as_slice(), 1e-4, |x| {
                    count_loss(&Matrix::from_vec(n, m, x.to_vec()), &iv, mode)
                        .unwrap()
                        .loss
                });
                let err = oracle::relative_error(out.grad.as_slice(), &fd);
                assert!(err < 1e-6, "{mode:?}: relative error {err}");
            }
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for mode in [CountMode::Nll, CountMode::Entropy] {
            for _ in 0..25 {
                let n = rng.random_range(1..=10);
                let m = rng.random_range(2..=4);
                let (_, iv) = random_instance(&mut rng, n, m);
                let logits: Vec<f64> = (0..n * m).map(|_| rng.random_range(-3.0..3.0)).collect();
                let out =
                    count_loss_logits(&Matrix::from_vec(n, m, logits.clone()), &iv, mode).unwrap();
                let fd = oracle::central_difference(&logits, 1e-4, |x| {
                    count_loss_logits(&Matrix::from_vec(n, m, x.to_vec()), &iv, mode)
                        .unwrap()
                        .loss
                });
                let err = oracle::relative_error(out.grad.as_slice(), &fd);
                assert!(err < 1e-6, "{mode:?}: relative error {err}");
            }
        }
    }

    #[test]
    fn logit_and_prob_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (n, m) = (12, 4);
        let logits = Matrix::from_vec(
            n,
            m,
            (0..n * m).map(|_| rng.random_range(-2.0..2.0)).collect(),
        );
        let probs = crate::neural::softmax(&logits);
        let (_, iv) = random_instance(&mut rng, n, m);
        let a = count_loss(&probs, &iv, CountMode::Nll).unwrap();
        let b = count_loss_logits(&logits, &iv, CountMode::Nll).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-10 * a.loss.max(1.0));
    }

    #[test]
    fn unreachable_interval_saturates() {
        let probs = Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.5]]);
        let iv = vec![CountInterval::new(0, 0), CountInterval::new(0, 2)];
        let out = count_loss(&probs, &iv, CountMode::Nll).unwrap();
        assert!(out.saturated);
        assert_eq!(out.class_log_probs[0], f64::NEG_INFINITY);
        assert_eq!(out.loss, 700.0);
        assert!(out.grad.as_slice().iter().all(|g| g.is_finite()));
        // pushing p down raises q, so the gradient on column 0 is positive
        assert!(out.grad[(0, 0)] > 0.0);
        let out = count_loss(&probs, &iv, CountMode::Entropy).unwrap();
        assert!(!out.saturated);
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn nll_is_nonnegative_and_zero_only_when_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let (probs, iv) = random_instance(&mut rng, 6, 3);
            let out = count_loss(&probs, &iv, CountMode::Nll).unwrap();
            assert!(out.loss >= 0.0);
            let certain = out.class_log_probs.iter().all(|&l| l == 0.0);
            assert_eq!(out.loss == 0.0, certain);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let probs = Matrix::from_rows(&[[0.5, 0.5]]);
        assert!(count_loss(&probs, &[CountInterval::new(0, 1)], CountMode::Nll).is_err());
        assert!(count_loss(&probs, &[CountInterval::new(0, 2); 2], CountMode::Nll).is_err());
        let bad = Matrix::from_rows(&[[1.5, -0.5]]);
        assert!(count_loss(&bad, &[CountInterval::new(0, 1); 2], CountMode::Nll).is_err());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (probs, iv) = random_instance(&mut rng, 64, 10);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let a = one.install(|| count_loss(&probs, &iv, CountMode::Nll).unwrap());
        let b = many.install(|| count_loss(&probs, &iv, CountMode::Nll).unwrap());
        assert_eq!(a, b);
    }
}
