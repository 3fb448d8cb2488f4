//! Small MLPs trained with SGD and hand-written backpropagation, with an
//! optional entropy or Frobenius term on the penultimate representation.

pub mod data;
pub mod mlp;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsReport};
use crate::entropy::{self, RegularizerConfig};
use crate::error::{Error, Result};
use crate::repr::{self, RepresentationMatrix, SpectrumPath, ZERO_ROW_NORM};
use crate::rng::{self, Rng};

pub use data::{make_synthetic_dataset, Dataset, DatasetSpec};
pub use mlp::{softmax_cross_entropy, DenseGrad, ForwardCache, Mlp, Tap};

/// Entropy weight of the default I-VNE⁺ run.
pub const SSL_ALPHA2: f64 = 0.1;
/// The cosine gradient shrinks with the embedding norm, so SSL needs a much
/// larger step than cross-entropy training.
pub const SSL_LEARNING_RATE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Supervised,
    Ssl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Vanilla,
    /// Subtracts `alpha · S` from the loss.
    VnePlus,
    /// Adds `alpha · S` to the loss.
    VneMinus,
    /// Adds `alpha · ‖C - cI‖²_F`.
    Frobenius,
}

/// Which penultimate signal the supervised regularizer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    PostRectifier,
    PreRectifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub regime: Regime,
    pub alpha: f64,
    pub frobenius_c: f64,
    /// SSL invariance weight.
    pub alpha1: f64,
    /// SSL entropy weight; 0 gives the invariance-only ablation.
    pub alpha2: f64,
    /// Widths after the input. Supervised nets append a class layer, so the
    /// last entry is the penultimate width; SSL encoders end here.
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub dataset: DatasetSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::supervised(Regime::Vanilla, 0.0)
    }
}

impl TrainConfig {
    pub fn supervised(regime: Regime, alpha: f64) -> Self {
        Self {
            task: Task::Supervised,
            regime,
            alpha,
            frobenius_c: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            hidden_dims: vec![128, 64],
            activation: Activation::PostRectifier,
            epochs: 100,
            batch_size: 128,
            learning_rate: 0.1,
            seed: 0,
            dataset: DatasetSpec::default(),
        }
    }

    pub fn ssl(alpha1: f64, alpha2: f64) -> Self {
        Self {
            task: Task::Ssl,
            regime: Regime::Vanilla,
            alpha: 0.0,
            alpha1,
            alpha2,
            hidden_dims: vec![128, 128],
            batch_size: 64,
            learning_rate: SSL_LEARNING_RATE,
            ..Self::supervised(Regime::Vanilla, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 || self.batch_size > self.dataset.len() {
            return bad(format!(
                "batch_size must be in 1..={}, got {}",
                self.dataset.len(),
                self.batch_size
            ));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return bad("hidden_dims must be non-empty and positive".into());
        }
        if *self.hidden_dims.last().unwrap() < 2 {
            return bad("penultimate width must be at least 2".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!(
                "alpha must be non-negative (the regime carries the sign), got {}",
                self.alpha
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        self.weights().validate()
    }

    fn weights(&self) -> RegularizerConfig {
        RegularizerConfig {
            alpha: self.alpha,
            frobenius_c: self.frobenius_c,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
        }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.dataset.input_dim];
        dims.extend(&self.hidden_dims);
        if self.task == Task::Supervised {
            dims.push(self.dataset.classes);
        }
        dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over batches of cross-entropy (supervised) or `-α₁·alignment` (SSL).
    pub task_loss: f64,
    /// Mean over batches of the regularizer's value (entropy or Frobenius loss).
    pub regularizer: f64,
    /// Entropy of the penultimate representation on the evaluation set.
    pub entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alignment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub final_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_alignment: Option<f64>,
    /// Evaluation rows whose penultimate activation is all zeros; they are
    /// left out of the diagnostics.
    pub zero_rows: usize,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub report: TrainReport,
}

/// Loss and parameter gradients for one supervised batch.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub loss: f64,
    pub task_loss: f64,
    pub regularizer: f64,
    pub grads: Vec<DenseGrad>,
}

fn penultimate_tap(mlp: &Mlp, activation: Activation) -> Tap {
    let l = mlp.layers.len() - 2;
    match activation {
        Activation::PostRectifier => Tap::PostActivation(l),
        Activation::PreRectifier => Tap::PreActivation(l),
    }
}

/// Regularizer value and its gradient with respect to raw activations.
/// Rows with zero norm have no direction; they contribute nothing.
fn regularizer_term(h: &Array2<f64>, regime: Regime, cfg: &TrainConfig) -> Result<(f64, Array2<f64>)> {
    let live: Vec<usize> = h
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.dot(r).sqrt() > ZERO_ROW_NORM)
        .map(|(i, _)| i)
        .collect();
    let mut grad = Array2::zeros(h.dim());
    if live.is_empty() {
        return Ok((0.0, grad));
    }
    let sub = RepresentationMatrix::new(h.select(Axis(0), &live))?;
    let (value, g) = match regime {
        Regime::Vanilla => return Ok((0.0, grad)),
        Regime::VnePlus | Regime::VneMinus => {
            let (v, g) = entropy::vne_gradient(&sub)?;
            let sign = if regime == Regime::VnePlus { -1.0 } else { 1.0 };
            (v.entropy, g.grad * (sign * cfg.alpha))
        }
        Regime::Frobenius => {
            let norms = sub.row_norms();
            let z = sub.normalize_rows()?;
            let (v, dz) = entropy::frobenius_loss(&z, cfg.frobenius_c)?;
            let g = entropy::normalization_backward(z.view(), norms.as_slice().unwrap(), dz.view());
            (v, g * cfg.alpha)
        }
    };
    for (k, &i) in live.iter().enumerate() {
        grad.row_mut(i).assign(&g.row(k));
    }
    Ok((value, grad))
}

/// Cross-entropy plus the regime term for one batch.
pub fn supervised_objective(
    mlp: &Mlp,
    x: &Array2<f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<BatchObjective> {
    let cache = mlp.forward(x);
    let (task_loss, d_out) = softmax_cross_entropy(cache.output(), labels);
    if cfg.regime == Regime::Vanilla {
        return Ok(BatchObjective {
            loss: task_loss,
            task_loss,
            regularizer: 0.0,
            grads: mlp.backward(&cache, &d_out, None),
        });
    }
    let tap = penultimate_tap(mlp, cfg.activation);
    let (value, g) = regularizer_term(cache.tap(tap), cfg.regime, cfg)?;
    let reg_loss = match cfg.regime {
        Regime::VnePlus => -cfg.alpha * value,
        _ => cfg.alpha * value,
    };
    Ok(BatchObjective {
        loss: task_loss + reg_loss,
        task_loss,
        regularizer: value,
        grads: mlp.backward(&cache, &d_out, Some((tap, &g))),
    })
}

/// I-VNE⁺ loss for a batch of paired views.
pub fn ssl_objective(
    mlp: &Mlp,
    view1: &Array2<f64>,
    view2: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<(entropy::IvneLoss, Vec<DenseGrad>)> {
    let c1 = mlp.forward(view1);
    let c2 = mlp.forward(view2);
    let h1 = RepresentationMatrix::new(c1.output().clone())?;
    let h2 = RepresentationMatrix::new(c2.output().clone())?;
    let loss = entropy::ivne_loss(&h1, &h2, &cfg.weights())?;
    let mut grads = mlp.backward(&c1, &loss.grad1, None);
    mlp::add_grads(&mut grads, &mlp.backward(&c2, &loss.grad2, None));
    Ok((loss, grads))
}

pub fn train_supervised(cfg: &TrainConfig) -> Result<TrainReport> {
    Ok(train(cfg)?.report)
}

pub fn train_ssl(cfg: &TrainConfig) -> Result<TrainReport> {
    Ok(train(cfg)?.report)
}

/// Runs either task and keeps the final model.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = make_synthetic_dataset(&cfg.dataset, cfg.seed)?;
    let mut r = rng::seeded(cfg.seed.wrapping_add(1));
    let mut mlp = Mlp::new(&cfg.layer_dims(), &mut r);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut task_loss = 0.0;
        let mut regularizer = 0.0;
        let mut alignment = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = data.select(chunk);
            let grads = match cfg.task {
                Task::Supervised => {
                    let obj = supervised_objective(&mlp, &x, &labels, cfg)?;
                    task_loss += obj.task_loss;
                    regularizer += obj.regularizer;
                    obj.grads
                }
                Task::Ssl => {
                    let v1 = noisy_view(&x, cfg.dataset.noise_scale, &mut r);
                    let v2 = noisy_view(&x, cfg.dataset.noise_scale, &mut r);
                    let (loss, grads) = ssl_objective(&mlp, &v1, &v2, cfg)?;
                    task_loss -= cfg.alpha1 * loss.alignment;
                    regularizer += loss.entropy.entropy;
                    alignment += loss.alignment;
                    grads
                }
            };
            mlp.apply(&grads, cfg.learning_rate);
            batches += 1;
        }
        if !mlp.is_finite() || !task_loss.is_finite() || !regularizer.is_finite() {
            return Err(Error::NonFinite {
                what: format!(
                    "parameters after epoch {epoch} (learning rate {} too large?)",
                    cfg.learning_rate
                ),
            });
        }
        let batches = batches as f64;
        let eval = evaluate(&mlp, &data, cfg)?;
        epochs.push(EpochRecord {
            epoch,
            task_loss: task_loss / batches,
            regularizer: regularizer / batches,
            entropy: eval.entropy,
            accuracy: eval.accuracy,
            alignment: (cfg.task == Task::Ssl).then(|| alignment / batches),
        });
    }

    let eval = evaluate(&mlp, &data, cfg)?;
    let final_alignment = match cfg.task {
        Task::Ssl => Some(view_alignment(&mlp, &data, cfg)?),
        Task::Supervised => None,
    };
    let diagnostics = diagnostics::full_report(&eval.representation, cfg.seed)?;
    Ok(TrainOutcome {
        model: mlp,
        report: TrainReport {
            config: cfg.clone(),
            epochs,
            final_entropy: eval.entropy,
            final_accuracy: eval.accuracy,
            final_alignment,
            zero_rows: eval.zero_rows,
            diagnostics,
        },
    })
}

fn noisy_view(x: &Array2<f64>, scale: f64, r: &mut Rng) -> Array2<f64> {
    x.mapv(|v| v + scale * rng::normal(r))
}

struct Evaluation {
    representation: RepresentationMatrix,
    entropy: f64,
    accuracy: Option<f64>,
    zero_rows: usize,
}

/// Penultimate representation of the whole dataset, zero rows removed.
fn evaluate(mlp: &Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<Evaluation> {
    let cache = mlp.forward(&data.inputs);
    let (h, accuracy) = match cfg.task {
        Task::Supervised => {
            let tap = penultimate_tap(mlp, cfg.activation);
            let hits = cache
                .output()
                .rows()
                .into_iter()
                .zip(&data.labels)
                .filter(|(row, &y)| argmax(row.as_slice().unwrap()) == y)
                .count();
            (cache.tap(tap).clone(), Some(hits as f64 / data.len() as f64))
        }
        Task::Ssl => (cache.output().clone(), None),
    };
    let live: Vec<usize> = h
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.dot(r).sqrt() > ZERO_ROW_NORM)
        .map(|(i, _)| i)
        .collect();
    if live.is_empty() {
        return Err(Error::ZeroRow { index: 0 });
    }
    let representation = RepresentationMatrix::new(h.select(Axis(0), &live))?;
    let z = representation.normalize_rows()?;
    let entropy = entropy::vne(&repr::spectrum(&z, SpectrumPath::Auto)?).entropy;
    Ok(Evaluation {
        zero_rows: h.nrows() - live.len(),
        representation,
        entropy,
        accuracy,
    })
}

/// Mean cosine between embeddings of two fresh noisy views of every sample.
fn view_alignment(mlp: &Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let mut r = rng::seeded(cfg.seed ^ 0x5eed_a11e);
    let a = mlp.forward(&noisy_view(&data.inputs, cfg.dataset.noise_scale, &mut r));
    let b = mlp.forward(&noisy_view(&data.inputs, cfg.dataset.noise_scale, &mut r));
    let za = RepresentationMatrix::new(a.output().clone())?.normalize_rows()?;
    let zb = RepresentationMatrix::new(b.output().clone())?.normalize_rows()?;
    let total: f64 = (0..za.n()).map(|i| za.row(i).dot(&zb.row(i))).sum();
    Ok(total / za.n() as f64)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
