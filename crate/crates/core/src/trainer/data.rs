use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Gaussian-mixture classification data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub classes: usize,
    pub input_dim: usize,
    pub samples_per_class: usize,
    /// Norm of every class mean; means are mutually orthogonal.
    pub class_separation: f64,
    /// Standard deviation of the additive noise that creates SSL views.
    pub noise_scale: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            classes: 8,
            input_dim: 32,
            samples_per_class: 128,
            class_separation: 3.0,
            noise_scale: 0.3,
        }
    }
}

impl DatasetSpec {
    pub fn len(&self) -> usize {
        self.classes * self.samples_per_class
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        if self.input_dim < self.classes {
            return Err(Error::InvalidConfig(format!(
                "input_dim ({}) must be at least the number of classes ({})",
                self.input_dim, self.classes
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::InvalidConfig("samples_per_class must be positive".into()));
        }
        if !(self.class_separation >= 0.0) || !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidConfig(
                "class_separation and noise_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One sample per row, ordered class by class.
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_means: Array2<f64>,
    pub spec: DatasetSpec,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (
            self.inputs.select(Axis(0), rows),
            rows.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Class means are `class_separation` times an orthonormal frame drawn from
/// the seed; within-class noise is standard normal.
pub fn make_synthetic_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng::seeded(seed);
    let mut frame = Array2::<f64>::zeros((spec.classes, spec.input_dim));
    let mut k = 0;
    while k < spec.classes {
        let mut v = ndarray::Array1::from(rng::unit_vector(&mut r, spec.input_dim));
        for j in 0..k {
            let p = v.dot(&frame.row(j));
            v.scaled_add(-p, &frame.row(j));
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-6 {
            continue;
        }
        frame.row_mut(k).assign(&(v / norm));
        k += 1;
    }
    let class_means = frame * spec.class_separation;

    let n = spec.len();
    let mut inputs = Array2::zeros((n, spec.input_dim));
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        for s in 0..spec.samples_per_class {
            let i = c * spec.samples_per_class + s;
            for j in 0..spec.input_dim {
                inputs[[i, j]] = class_means[[c, j]] + rng::normal(&mut r);
            }
            labels.push(c);
        }
    }
    Ok(Dataset {
        inputs,
        labels,
        class_means,
        spec: spec.clone(),
    })
}
