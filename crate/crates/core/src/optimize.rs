//! Direct entropy ascent/descent on row-normalized representations.
//!
//! Each step moves `H` along `±∂S/∂H` and re-normalizes the rows, so every
//! iterate stays on the product of unit spheres.

use serde::{Deserialize, Serialize};

use crate::entropy::{self, VneValue};
use crate::error::{Error, Result};
use crate::repr::{self, RepresentationMatrix, Spectrum, SpectrumPath};

/// Minimize runs stop once the entropy drops below this.
pub const COLLAPSE_STOP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub n: usize,
    pub d: usize,
    pub mode: Mode,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            n: 16,
            d: 64,
            mode: Mode::Maximize,
            steps: 2000,
            step_size: 0.05,
            seed: 42,
            record_every: 10,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("n and d must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be a non-negative finite number, got {}",
                self.step_size
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// `(step, entropy)` pairs; always includes step 0 and the final iterate.
    pub entropy_history: Vec<(usize, f64)>,
    pub final_h: RepresentationMatrix,
    pub final_spectrum: Spectrum,
    pub final_entropy: VneValue,
    pub steps_taken: usize,
    pub stopped_early: bool,
}

/// Seeded standard Gaussian entries, rows normalized.
pub fn initial_point(n: usize, d: usize, seed: u64) -> Result<RepresentationMatrix> {
    RepresentationMatrix::gaussian(n, d, seed).normalize_rows()
}

pub fn optimize_vne(cfg: &OptimizeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let sign = match cfg.mode {
        Mode::Maximize => 1.0,
        Mode::Minimize => -1.0,
    };
    let mut h = initial_point(cfg.n, cfg.d, cfg.seed)?;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut step = 0;

    while step < cfg.steps {
        let (value, grad) = entropy::vne_gradient(&h)?;
        if step % cfg.record_every == 0 {
            history.push((step, value.entropy));
        }
        if cfg.mode == Mode::Minimize && value.entropy < COLLAPSE_STOP {
            stopped_early = true;
            break;
        }
        if cfg.step_size > 0.0 {
            let moved = &h.view() + &(grad.grad * (sign * cfg.step_size));
            if moved.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("iterate at step {} (step size too large?)", step + 1),
                });
            }
            h = RepresentationMatrix::new(moved)?.normalize_rows()?;
        }
        step += 1;
    }

    let final_spectrum = repr::spectrum(&h, SpectrumPath::Auto)?;
    let final_entropy = entropy::vne(&final_spectrum);
    if history.last().map(|&(s, _)| s) != Some(step) {
        history.push((step, final_entropy.entropy));
    }

    Ok(Trajectory {
        entropy_history: history,
        final_h: h,
        final_spectrum,
        final_entropy,
        steps_taken: step,
        stopped_early,
    })
}

/// `‖ZZᵀ - I_n‖_F`.
pub fn gram_identity_residual(z: &RepresentationMatrix) -> f64 {
    let g = z.view().dot(&z.view().t());
    let mut acc = 0.0;
    for ((i, j), &x) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        acc += (x - target).powi(2);
    }
    acc.sqrt()
}
