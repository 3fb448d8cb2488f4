use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};

/// Fully connected layer, `y = x W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Rectifier on every hidden layer, identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Where an auxiliary loss attaches to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tap {
    /// Output of layer `l` after the rectifier (`l` must be hidden).
    PostActivation(usize),
    /// Pre-activation of layer `l`; for the last layer this is the output.
    PreActivation(usize),
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`; one extra entry holds nothing.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().unwrap()
    }

    pub fn tap(&self, tap: Tap) -> &Array2<f64> {
        match tap {
            Tap::PostActivation(l) => &self.inputs[l + 1],
            Tap::PreActivation(l) => &self.pre[l],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Mlp {
    /// He-normal weights, zero biases.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output sizes");
        let layers = dims
            .windows(2)
            .map(|w| {
                let scale = (2.0 / w[0] as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        scale * rng::normal(rng)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn seeded(dims: &[usize], seed: u64) -> Self {
        Self::new(dims, &mut rng::seeded(seed))
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weight.ncols()));
        dims
    }

    pub fn forward(&self, x: &Array2<f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = current.dot(&layer.weight) + &layer.bias;
            inputs.push(current);
            current = if l < last { z.mapv(relu) } else { z.clone() };
            pre.push(z);
        }
        ForwardCache { inputs, pre }
    }

    /// Gradients of a loss whose derivative is `d_output` at the output and,
    /// optionally, `extra` at a tapped activation.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: &Array2<f64>,
        extra: Option<(Tap, &Array2<f64>)>,
    ) -> Vec<DenseGrad> {
        let last = self.layers.len() - 1;
        let mut grads = vec![None; self.layers.len()];
        let mut delta = d_output.clone();
        if let Some((Tap::PreActivation(l), g)) = extra {
            if l == last {
                delta += g;
            }
        }
        for l in (0..=last).rev() {
            let input = &cache.inputs[l];
            grads[l] = Some(DenseGrad {
                weight: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if l == 0 {
                break;
            }
            let mut d_post = delta.dot(&self.layers[l].weight.t());
            if let Some((Tap::PostActivation(t), g)) = extra {
                if t == l - 1 {
                    d_post += g;
                }
            }
            // Rectifier derivative is 0 at exactly 0.
            ndarray::Zip::from(&mut d_post)
                .and(&cache.pre[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            if let Some((Tap::PreActivation(t), g)) = extra {
                if t == l - 1 {
                    d_post += g;
                }
            }
            delta = d_post;
        }
        grads.into_iter().map(Option::unwrap).collect()
    }

    pub fn apply(&mut self, grads: &[DenseGrad], learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.weight.scaled_add(-learning_rate, &g.weight);
            layer.bias.scaled_add(-learning_rate, &g.bias);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn add_grads(a: &mut [DenseGrad], b: &[DenseGrad]) {
    for (x, y) in a.iter_mut().zip(b) {
        x.weight += &y.weight;
        x.bias += &y.bias;
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        loss -= (exps[labels[i]] / total).ln();
        for (j, e) in exps.iter().enumerate() {
            let target = if j == labels[i] { 1.0 } else { 0.0 };
            grad[[i, j]] = (e / total - target) / n;
        }
    }
    (loss / n, grad)
}
