//! The training loop: per mini-batch, neighbour-driven candidate reweighting,
//! soft-target cross-entropy, count loss, and one optimiser step.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::count::{batch_intervals, count_loss_logits, CountMode};
use crate::data::{PartialDataset, TrainView};
use crate::knn::{knn_search, KnnScope, NeighborList};
use crate::neural::{argmax_rows, reweighted_ce, Mlp, Optimizer, OptimizerKind};
use crate::reweight::{build_weight_matrix, enhanced_label, VoteMode};
use crate::{Error, Matrix, Result};

/// Feature space used for the neighbour search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborSpace {
    /// Raw input features.
    #[default]
    Input,
    /// Last hidden layer of the current model, recomputed at the start of
    /// every epoch.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub k: usize,
    pub temperature: f64,
    /// Weight of the count loss in the total objective.
    pub lambda: f64,
    pub count_mode: CountMode,
    pub knn_scope: KnnScope,
    pub vote_mode: VoteMode,
    pub neighbor_space: NeighborSpace,
    pub seed: u64,
    /// Number of final epochs averaged for the reported accuracy.
    pub eval_window: usize,
    /// Test accuracy is computed every `eval_every` epochs and always after
    /// the last one.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 64,
            lr: 1e-3,
            weight_decay: 1e-5,
            optimizer: OptimizerKind::Adam,
            hidden: vec![300, 300],
            k: 10,
            temperature: 3.0,
            lambda: 1e-3,
            count_mode: CountMode::Nll,
            knn_scope: KnnScope::Batch,
            vote_mode: VoteMode::Fractional,
            neighbor_space: NeighborSpace::Input,
            seed: 0,
            eval_window: 10,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    /// Uniform candidate weights and no count loss.
    pub fn baseline() -> Self {
        Self {
            temperature: 1.0,
            lambda: 0.0,
            ..Self::default()
        }
    }

    /// Every violated constraint, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.epochs < 1 {
            out.push("epochs must be at least 1".to_string());
        }
        if self.batch_size < 2 {
            out.push(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            out.push(format!(
                "lr must be finite and non-negative, got {}",
                self.lr
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            out.push(format!(
                "weight_decay must be finite and non-negative, got {}",
                self.weight_decay
            ));
        }
        if self.hidden.contains(&0) {
            out.push("hidden widths must be positive".to_string());
        }
        if self.k < 1 {
            out.push("k must be at least 1".to_string());
        }
        if !(self.temperature >= 1.0 && self.temperature.is_finite()) {
            out.push(format!(
                "temperature must be >= 1, got {}",
                self.temperature
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.eval_window < 1 {
            out.push("eval_window must be at least 1".to_string());
        }
        if self.eval_every < 1 {
            out.push("eval_every must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::param("config", problems.join("; ")))
        }
    }

    pub fn widths(&self, d: usize, m: usize) -> Vec<usize> {
        std::iter::once(d)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(m))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Batch-size-weighted mean of the reweighted cross-entropy.
    pub reweight_loss: f64,
    /// Batch-size-weighted mean of the count loss.
    pub count_loss: f64,
    /// Batch-size-weighted mean of `reweight + lambda * count`.
    pub total_loss: f64,
    pub test_accuracy: Option<f64>,
    pub seconds: f64,
    /// Batches in which `k` exceeded the available neighbours.
    pub knn_clamped: usize,
    /// Instances left without an enhanced label.
    pub unenhanced: usize,
    /// Batches where a loss hit its log-probability floor.
    pub saturated: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: Mlp,
    pub history: Vec<EpochMetrics>,
}

/// RNG that orders the mini-batches. Separate stream from model initialisation.
pub fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Shuffles `0..n` and cuts it into batches of `batch_size`. A trailing batch
/// with fewer than two instances is merged into the previous one.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    batches
}

/// Trains a fresh model; see [`fit_with`].
pub fn fit(
    train: TrainView<'_>,
    test: Option<&PartialDataset>,
    config: &TrainConfig,
) -> Result<FitOutput> {
    fit_with(train, test, config, |_| {})
}

/// Trains a fresh model, calling `on_epoch` after each epoch.
///
/// The training data arrives as a [`TrainView`] and so cannot see any hidden
/// truth; `test` is used for accuracy only. Results depend only on the data
/// and `config`, not on the rayon thread count.
pub fn fit_with<F>(
    train: TrainView<'_>,
    test: Option<&PartialDataset>,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<FitOutput>
where
    F: FnMut(&EpochMetrics),
{
    config.validate()?;
    let n = train.len();
    if n < 2 {
        return Err(Error::param(
            "train",
            format!("need at least 2 instances, got {n}"),
        ));
    }
    if let Some(t) = test {
        if t.num_features() != train.features.cols() || t.num_classes() != train.m {
            return Err(Error::param("test", "shape differs from the training set"));
        }
        if t.complete_truth().is_none() {
            return Err(Error::MissingTruth);
        }
    }

    let mut model = Mlp::new(&config.widths(train.features.cols(), train.m), config.seed)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, config.weight_decay);
    let mut rng = shuffle_rng(config.seed);
    let reweighting = config.temperature > 1.0;
    let mut global_neighbors: Option<Vec<NeighborList>> = None;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let embedded = match config.neighbor_space {
            NeighborSpace::Embedding if reweighting => Some(model.embed(train.features)?),
            _ => None,
        };
        let space = embedded.as_ref().unwrap_or(train.features);
        let mut knn_clamped = 0;
        // input-space neighbours never change; embeddings move every epoch
        let refresh = global_neighbors.is_none() || embedded.is_some();
        if reweighting && config.knn_scope == KnnScope::Global && refresh {
            let found = knn_search(space, config.k)?;
            knn_clamped += usize::from(found.clamped());
            global_neighbors = Some(found.neighbors);
        }

        let mut sums = (0.0, 0.0, 0.0);
        let mut unenhanced = 0;
        let mut saturated = 0;
        for rows in epoch_batches(n, config.batch_size, &mut rng) {
            let batch_candidates: Vec<_> = rows.iter().map(|&i| &train.candidates[i]).collect();
            let enhanced: Vec<Option<usize>> = if reweighting {
                let neighbors: Vec<NeighborList> = match &global_neighbors {
                    Some(all) => rows.iter().map(|&i| all[i].clone()).collect(),
                    None => {
                        let found = knn_search(&space.select_rows(&rows), config.k)?;
                        knn_clamped += usize::from(found.clamped());
                        found
                            .neighbors
                            .into_iter()
                            .map(|mut nl| {
                                nl.indices.iter_mut().for_each(|j| *j = rows[*j]);
                                nl
                            })
                            .collect()
                    }
                };
                rows.iter()
                    .zip(&neighbors)
                    .map(|(&i, nl)| {
                        enhanced_label(&train.candidates[i], nl, train.candidates, config.vote_mode)
                    })
                    .collect()
            } else {
                vec![None; rows.len()]
            };
            unenhanced += enhanced.iter().filter(|e| e.is_none()).count();
            let weights = build_weight_matrix(
                batch_candidates.iter().copied(),
                &enhanced,
                config.temperature,
            )?;

            let x = train.features.select_rows(&rows);
            let fwd = model.forward(&x)?;
            let ce = reweighted_ce(&fwd.probs, weights.weights())?;
            let intervals = batch_intervals(batch_candidates.iter().copied(), train.m);
            let count = count_loss_logits(&fwd.logits, &intervals, config.count_mode)?;
            saturated += usize::from(ce.saturated || count.saturated);

            let mut grad = ce.grad_logits;
            if config.lambda != 0.0 {
                grad.add_scaled(&count.grad, config.lambda);
            }
            let total = ce.loss + config.lambda * count.loss;
            let size = rows.len() as f64;
            sums.0 += size * ce.loss;
            sums.1 += size * count.loss;
            sums.2 += size * total;

            let grads = model.backward(&x, &fwd, &grad)?;
            optimizer.step(&mut model, &grads)?;
        }

        let test_accuracy = match test {
            Some(t) if epoch % config.eval_every == 0 || epoch == config.epochs => {
                Some(evaluate(&model, t)?)
            }
            _ => None,
        };
        let metrics = EpochMetrics {
            epoch,
            reweight_loss: sums.0 / n as f64,
            count_loss: sums.1 / n as f64,
            total_loss: sums.2 / n as f64,
            test_accuracy,
            seconds: started.elapsed().as_secs_f64(),
            knn_clamped,
            unenhanced,
            saturated,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(FitOutput { model, history })
}

/// Fraction of test instances whose arg-max prediction equals the hidden truth.
pub fn evaluate(model: &Mlp, test: &PartialDataset) -> Result<f64> {
    let truth = test.complete_truth().ok_or(Error::MissingTruth)?;
    if truth.is_empty() {
        return Err(Error::param("test", "empty test set"));
    }
    let predicted = model.predict(test.features())?;
    let correct = predicted.iter().zip(&truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Accuracy of a fixed probability matrix, same tie rule as [`evaluate`].
pub fn accuracy_of(probs: &Matrix, truth: &[usize]) -> f64 {
    let predicted = argmax_rows(probs);
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Mean and population standard deviation of the last `window` recorded test
/// accuracies.
pub fn summarize(history: &[EpochMetrics], window: usize) -> Result<(f64, f64)> {
    let accs: Vec<f64> = history.iter().filter_map(|m| m.test_accuracy).collect();
    if window == 0 || window > accs.len() {
        return Err(Error::param(
            "window",
            format!(
                "{window} is not within 1..={} recorded accuracies",
                accs.len()
            ),
        ));
    }
    let tail = &accs[accs.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / window as f64;
    Ok((mean, var.sqrt()))
}

pub const METRICS_HEADER: &str = "epoch,reweight_loss,count_loss,total_loss,test_accuracy,seconds";

/// Decimal rendering with nine significant digits.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit (9.999999999 -> 10.00000000)
    let digits = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if digits > 9 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// One CSV row. `seconds` is written only when `with_time` is set, so that
/// identical runs produce identical files.
pub fn metrics_row(m: &EpochMetrics, with_time: bool) -> String {
    format!(
        "{},{},{},{},{},{}",
        m.epoch,
        format_sig9(m.reweight_loss),
        format_sig9(m.count_loss),
        format_sig9(m.total_loss),
        m.test_accuracy.map(format_sig9).unwrap_or_default(),
        if with_time {
            format_sig9(m.seconds)
        } else {
            String::new()
        },
    )
}

pub fn write_metrics_csv<W: Write>(
    history: &[EpochMetrics],
    with_time: bool,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in history {
        writeln!(out, "{}", metrics_row(m, with_time))?;
    }
    Ok(())
}
