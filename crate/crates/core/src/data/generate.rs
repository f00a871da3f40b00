use std::f64::consts::TAU;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::CandidateSet;
use crate::{Error, Matrix, Result};

/// How false candidates are added around each true label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenerationMode {
    /// Each of the `m - 1` false labels joins independently with probability `q`.
    Binomial { q: f64 },
    /// Set size drawn uniformly from `1..=m`; false labels sampled without
    /// replacement.
    UniformSize,
}

/// Binomial candidate generation with flip probability `q`.
pub fn generate_synthetic(
    true_labels: &[usize],
    m: usize,
    q: f64,
    seed: u64,
) -> Result<Vec<CandidateSet>> {
    generate_candidates(true_labels, m, GenerationMode::Binomial { q }, seed)
}

pub fn generate_candidates(
    true_labels: &[usize],
    m: usize,
    mode: GenerationMode,
    seed: u64,
) -> Result<Vec<CandidateSet>> {
    if m < 2 {
        return Err(Error::InvalidClassCount(m));
    }
    if let GenerationMode::Binomial { q } = mode {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", format!("{q} is outside [0, 1]")));
        }
    }
    if let Some(&bad) = true_labels.iter().find(|&&y| y >= m) {
        return Err(Error::ClassOutOfRange { index: bad, m });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(m);
    true_labels
        .iter()
        .map(|&truth| {
            labels.clear();
            labels.push(truth);
            match mode {
                GenerationMode::Binomial { q } => {
                    for j in (0..m).filter(|&j| j != truth) {
                        if rng.random::<f64>() < q {
                            labels.push(j);
                        }
                    }
                }
                GenerationMode::UniformSize => {
                    let extra = rng.random_range(0..m);
                    // indices into the m - 1 false labels
                    for k in index::sample(&mut rng, m - 1, extra) {
                        labels.push(if k < truth { k } else { k + 1 });
                    }
                }
            }
            CandidateSet::from_labels(labels.iter().copied(), m)
        })
        .collect()
}

/// Balanced isotropic Gaussian clusters with centres spread on a circle of
/// radius 4 in the first two coordinates (on a line when `dim == 1`).
///
/// Returns features and the class of each row; row `i` has class `i % classes`.
pub fn gaussian_clusters(
    n: usize,
    classes: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    const RADIUS: f64 = 4.0;
    if classes < 2 {
        return Err(Error::InvalidClassCount(classes));
    }
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::param("spread", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Matrix::zeros(n, dim);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    for (i, &c) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        if dim == 1 {
            row[0] = RADIUS * c as f64;
        } else {
            let angle = TAU * c as f64 / classes as f64;
            row[0] = RADIUS * angle.cos();
            row[1] = RADIUS * angle.sin();
        }
        for v in row.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    Ok((features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::candidate_stats;

    fn labels(n: usize, m: usize) -> Vec<usize> {
        (0..n).map(|i| (i * 7 + 3) % m).collect()
    }

    #[test]
    fn rejects_single_class() {
        assert!(matches!(
            generate_synthetic(&[0, 0], 1, 0.5, 0),
            Err(Error::InvalidClassCount(1))
        ));
    }

    #[test]
    fn q_zero_gives_clean_sets() {
        let y = labels(500, 10);
        let sets = generate_synthetic(&y, 10, 0.0, 4).unwrap();
        for (s, &t) in sets.iter().zip(&y) {
            assert_eq!(s.sole_label(), Some(t));
        }
        assert_eq!(candidate_stats(&sets, 0, 10).unwrap().clean_rate, 1.0);
    }

    #[test]
    fn q_one_gives_full_sets() {
        let sets = generate_synthetic(&labels(300, 10), 10, 1.0, 4).unwrap();
        assert_eq!(candidate_stats(&sets, 0, 10).unwrap().avg_candidates, 10.0);
    }

    #[test]
    fn truth_always_included() {
        let y = labels(10_000, 7);
        for q in [0.0, 0.1, 0.5, 0.9, 1.0] {
            for seed in 0..3 {
                let sets = generate_synthetic(&y, 7, q, seed).unwrap();
                assert!(sets.iter().zip(&y).all(|(s, &t)| s.contains(t)));
            }
        }
        let sets = generate_candidates(&y, 7, GenerationMode::UniformSize, 1).unwrap();
        assert!(sets.iter().zip(&y).all(|(s, &t)| s.contains(t)));
    }

    #[test]
    fn false_label_frequency_within_three_sigma() {
        let (n, m, q) = (20_000, 5, 0.3);
        let y = labels(n, m);
        let sets = generate_synthetic(&y, m, q, 99).unwrap();
        for j in 0..m {
            let eligible = y.iter().filter(|&&t| t != j).count() as f64;
            let hits = sets
                .iter()
                .zip(&y)
                .filter(|(s, &t)| t != j && s.contains(j))
                .count() as f64;
            let sigma = (eligible * q * (1.0 - q)).sqrt();
            assert!(
                (hits - eligible * q).abs() < 3.0 * sigma,
                "label {j}: {hits} hits of {eligible}"
            );
        }
    }

    #[test]
    fn mnist_shaped_binomial_statistics() {
        let sets = generate_synthetic(&labels(70_000, 10), 10, 0.5, 2024).unwrap();
        let s = candidate_stats(&sets, 0, 10).unwrap();
        assert!(
            (s.avg_candidates - 5.5).abs() < 0.02,
            "{}",
            s.avg_candidates
        );
        assert!(
            (s.clean_rate - 0.5f64.powi(9)).abs() < 5e-4,
            "{}",
            s.clean_rate
        );
    }

    #[test]
    fn uniform_size_mode_has_uniform_cardinality() {
        let m = 4;
        let sets =
            generate_candidates(&labels(40_000, m), m, GenerationMode::UniformSize, 8).unwrap();
        let mut counts = vec![0usize; m + 1];
        for s in &sets {
            counts[s.cardinality()] += 1;
        }
        for c in &counts[1..] {
            assert!((*c as f64 / 40_000.0 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let y = labels(1000, 6);
        assert_eq!(
            generate_synthetic(&y, 6, 0.4, 17).unwrap(),
            generate_synthetic(&y, 6, 0.4, 17).unwrap()
        );
        assert_ne!(
            generate_synthetic(&y, 6, 0.4, 17).unwrap(),
            generate_synthetic(&y, 6, 0.4, 18).unwrap()
        );
    }

    #[test]
    fn gaussian_clusters_are_balanced() {
        let (x, y) = gaussian_clusters(600, 3, 2, 1.0, 1).unwrap();
        assert_eq!((x.rows(), x.cols()), (600, 2));
        for c in 0..3 {
            assert_eq!(y.iter().filter(|&&l| l == c).count(), 200);
        }
    }
}
