#![allow(dead_code)]

use cleanse_core::data::{
    gaussian_clusters, generate_synthetic, split, CandidateSet, PartialDataset,
};
use cleanse_core::neural::{Mlp, Optimizer};
use cleanse_core::trainer::{epoch_batches, evaluate, shuffle_rng, TrainConfig};
use cleanse_core::Matrix;

/// 3-class 2-D Gaussian clusters with binomial candidate sets, split 600/200.
pub fn gaussian_task(q: f64, seed: u64) -> (PartialDataset, PartialDataset) {
    let (x, y) = gaussian_clusters(800, 3, 2, 1.0, seed).unwrap();
    let cands = generate_synthetic(&y, 3, q, seed.wrapping_add(1000)).unwrap();
    let ds = PartialDataset::new(x, cands, y.into_iter().map(Some).collect(), 3).unwrap();
    split(&ds, 0.25, seed.wrapping_add(2000)).unwrap()
}

pub struct BaselineRun {
    pub epoch_losses: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub model: Mlp,
}

/// Uniform-candidate cross-entropy training written out by hand: targets
/// `1/|s_i|` on every candidate, no reweighting and no count loss. Uses the
/// same initialisation, batch order and optimiser as the trainer.
pub fn reference_baseline(
    train: &PartialDataset,
    test: &PartialDataset,
    cfg: &TrainConfig,
) -> BaselineRun {
    let m = train.num_classes();
    let mut model = Mlp::new(&cfg.widths(train.num_features(), m), cfg.seed).unwrap();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.weight_decay);
    let mut rng = shuffle_rng(cfg.seed);
    let n = train.len();
    let mut epoch_losses = Vec::new();
    let mut accuracies = Vec::new();
    for _ in 0..cfg.epochs {
        let mut weighted = 0.0;
        for rows in epoch_batches(n, cfg.batch_size, &mut rng) {
            let x = train.features().select_rows(&rows);
            let fwd = model.forward(&x).unwrap();
            let nb = rows.len();
            let inv_n = 1.0 / nb as f64;
            let mut total = 0.0;
            let mut grad = Matrix::zeros(nb, m);
            for (b, &i) in rows.iter().enumerate() {
                let s: &CandidateSet = &train.candidates()[i];
                let w = 1.0 / s.cardinality() as f64;
                let mut row = 0.0;
                for j in 0..m {
                    let target = if s.contains(j) { w } else { 0.0 };
                    if s.contains(j) {
                        row += w * fwd.probs[(b, j)].ln();
                    }
                    grad[(b, j)] = (fwd.probs[(b, j)] - target) * inv_n;
                }
                total += row;
            }
            let loss = -total * inv_n;
            weighted += nb as f64 * loss;
            let grads = model.backward(&x, &fwd, &grad).unwrap();
            opt.step(&mut model, &grads).unwrap();
        }
        epoch_losses.push(weighted / n as f64);
        accuracies.push(evaluate(&model, test).unwrap());
    }
    BaselineRun {
        epoch_losses,
        accuracies,
        model,
    }
}
