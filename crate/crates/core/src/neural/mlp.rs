use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::softmax;
use crate::{Error, Matrix, Result};

/// One dense layer: `weights` is `out x in`, applied as `x W^T + b`.
/// Also used to hold gradients of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    /// `x W^T + b`
    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.outputs());
        for i in 0..x.rows() {
            let xi = x.row(i);
            for (o, v) in out.row_mut(i).iter_mut().enumerate() {
                let dot: f64 = xi.iter().zip(self.weights.row(o)).map(|(a, b)| a * b).sum();
                *v = dot + self.bias[o];
            }
        }
        out
    }
}

/// Multi-layer perceptron with ReLU hidden layers and linear output logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Post-ReLU output of every hidden layer.
    pub hidden: Vec<Matrix>,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// Parameter gradients, laid out like [`Mlp`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().into_iter().flatten().copied().collect()
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::param(
            "widths",
            "need at least input and output widths",
        ));
    }
    if widths.contains(&0) {
        return Err(Error::param("widths", "layer widths must be positive"));
    }
    Ok(())
}

impl Mlp {
    /// He-style uniform initialisation: weights in `±sqrt(6 / fan_in)`, zero bias.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let mut layer = Layer::zeros(w[0], w[1]);
                let bound = (6.0 / w[0] as f64).sqrt();
                for v in layer.weights.as_mut_slice() {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        check_widths(widths)?;
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("layers", "model needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::param(
                    "layers",
                    format!(
                        "layer {i} outputs {} but layer {} takes {}",
                        pair[0].outputs(),
                        i + 1,
                        pair[1].inputs()
                    ),
                ));
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    found: l.bias.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Forward> {
        if x.cols() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                found: x.cols(),
            });
        }
        let (last, hidden_layers) = self.layers.split_last().unwrap();
        let mut hidden = Vec::with_capacity(hidden_layers.len());
        for layer in hidden_layers {
            let mut h = layer.apply(hidden.last().unwrap_or(x));
            h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            hidden.push(h);
        }
        let logits = last.apply(hidden.last().unwrap_or(x));
        let probs = softmax(&logits);
        Ok(Forward {
            hidden,
            logits,
            probs,
        })
    }

    /// Output of the last hidden layer (the input itself for a single-layer model).
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        let mut fwd = self.forward(x)?;
        Ok(fwd.hidden.pop().unwrap_or_else(|| x.clone()))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(super::argmax_rows(&self.forward(x)?.logits))
    }

    /// Reverse-mode gradients of a loss whose gradient with respect to the
    /// logits is `grad_logits`.
    pub fn backward(&self, x: &Matrix, fwd: &Forward, grad_logits: &Matrix) -> Result<Gradients> {
        let n = x.rows();
        if grad_logits.rows() != n || grad_logits.cols() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: n * self.num_classes(),
                found: grad_logits.rows() * grad_logits.cols(),
            });
        }
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = if l == 0 { x } else { &fwd.hidden[l - 1] };
            let mut g = Layer::zeros(layer.inputs(), layer.outputs());
            for i in 0..n {
                let di = delta.row(i);
                let hi = input.row(i);
                for (o, &d) in di.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    for (w, &h) in g.weights.row_mut(o).iter_mut().zip(hi) {
                        *w += d * h;
                    }
                }
            }
            if l > 0 {
                let mut prev = Matrix::zeros(n, layer.inputs());
                for i in 0..n {
                    let out = prev.row_mut(i);
                    for (o, &d) in delta.row(i).iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (p, &w) in out.iter_mut().zip(layer.weights.row(o)) {
                            *p += d * w;
                        }
                    }
                    // ReLU mask
                    for (p, &h) in out.iter_mut().zip(input.row(i)) {
                        if h <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
                delta = prev;
            }
            grads.push(g);
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .copied()
            .collect()
    }

    /// Inverse of [`Mlp::flat_params`].
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: values.len(),
            });
        }
        let mut rest = values;
        for slice in self.param_slices_mut() {
            let (head, tail) = rest.split_at(slice.len());
            slice.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }
}
