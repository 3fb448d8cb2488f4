//! Entropy of the autocorrelation spectrum, its analytic gradient, and the
//! losses built on it.
//!
//! Gradient chain for raw representations `H`:
//!
//! ```text
//! Z = normalize(H),  C = ZᵀZ/n = U Λ Uᵀ
//! ∂S/∂C = -U diag(1 + ln λ̂) Uᵀ,      λ̂ = max(λ, 1e-12)
//! ∂S/∂Z = (2/n) Z ∂S/∂C
//! ∂S/∂h_i = (I - z_i z_iᵀ) ∂S/∂z_i / ‖h_i‖
//! ```
//!
//! When `n < d` the same gradient is computed from the Gram matrix
//! `G = ZZᵀ/n = V M Vᵀ` as `∂S/∂Z = (2/n) ∂S/∂G Z`, which only needs an
//! `n × n` eigendecomposition.
//!
//! The entropy *value* drops eigenvalues at or below `1e-12` (`0 ln 0 = 0`);
//! the gradient instead clamps them to `1e-12` so it stays finite.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::repr::{self, RepresentationMatrix, Spectrum, SpectrumPath, SpectrumSource};

/// Eigenvalues at or below this contribute nothing to the entropy value.
pub const DROP_THRESHOLD: f64 = 1e-12;

/// Largest deviation of the eigenvalue sum from one treated as round-off.
pub const UNIT_TRACE_SLACK: f64 = 1e-9;

/// Floor applied to eigenvalues inside the gradient's logarithm.
pub const GRADIENT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VneValue {
    /// Natural-log entropy of the spectrum.
    pub entropy: f64,
    /// Eigenvalues above [`DROP_THRESHOLD`].
    pub effective_terms: usize,
}

/// `∂S/∂H` for raw (pre-normalization) representations.
#[derive(Debug, Clone, PartialEq)]
pub struct VneGradient {
    pub grad: Array2<f64>,
}

/// Weights for the entropy regularizers and the I-VNE⁺ loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    /// Entropy weight; positive rewards, negative penalizes entropy.
    pub alpha: f64,
    /// Target scale `c` of the Frobenius baseline `‖C - cI‖²_F`.
    pub frobenius_c: f64,
    /// Weight of the positive-pair cosine term.
    pub alpha1: f64,
    /// Weight of the entropy term in I-VNE⁺.
    pub alpha2: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            frobenius_c: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frobenius_c > 0.0) || !self.frobenius_c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "frobenius_c must be positive, got {}",
                self.frobenius_c
            )));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(Error::InvalidConfig(
                "alpha1 and alpha2 must be non-negative".into(),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha1.is_finite() && self.alpha2.is_finite()) {
            return Err(Error::InvalidConfig("weights must be finite".into()));
        }
        Ok(())
    }
}

/// `-Σ λ ln λ` over eigenvalues above [`DROP_THRESHOLD`].
///
/// When the kept eigenvalues sum to one up to round-off they are rescaled to
/// sum to exactly one, so a single surviving eigenvalue gives exactly 0.
pub fn vne(spec: &Spectrum) -> VneValue {
    let kept: Vec<f64> = spec
        .eigenvalues()
        .iter()
        .copied()
        .filter(|&x| x > DROP_THRESHOLD)
        .collect();
    let total: f64 = kept.iter().sum();
    let scale = if (total - 1.0).abs() < UNIT_TRACE_SLACK {
        total
    } else {
        1.0
    };
    let entropy: f64 = kept
        .iter()
        .map(|&x| {
            let p = x / scale;
            -p * p.ln()
        })
        .sum();
    VneValue {
        entropy: entropy.max(0.0),
        effective_terms: kept.len(),
    }
}

/// Entropy of raw representations: normalize, autocorrelate, decompose.
pub fn vne_of(h: &RepresentationMatrix) -> Result<VneValue> {
    let z = h.normalize_rows()?;
    Ok(vne(&repr::spectrum(&z, SpectrumPath::Auto)?))
}

/// Entropy and its gradient with respect to raw representations.
pub fn vne_gradient(h: &RepresentationMatrix) -> Result<(VneValue, VneGradient)> {
    vne_gradient_with_path(h, SpectrumPath::Auto)
}

pub fn vne_gradient_with_path(
    h: &RepresentationMatrix,
    path: SpectrumPath,
) -> Result<(VneValue, VneGradient)> {
    let norms = h.row_norms();
    let z = h.normalize_rows()?;
    let (spec, dz) = normalized_gradient(&z, path)?;
    let grad = normalization_backward(z.view(), norms.as_slice().unwrap(), dz.view());
    Ok((vne(&spec), VneGradient { grad }))
}

/// Spectrum and `∂S/∂Z` treating `Z` as free (no re-normalization).
pub fn normalized_gradient(
    z: &RepresentationMatrix,
    path: SpectrumPath,
) -> Result<(Spectrum, Array2<f64>)> {
    z.require_normalized()?;
    let n = z.n();
    let scale = 2.0 / n as f64;
    let weight = |x: f64| -(1.0 + x.max(GRADIENT_CLAMP).ln());
    match path.resolve(n, z.d()) {
        SpectrumSource::Gram => {
            if n > z.d() {
                return Err(Error::Shape(format!(
                    "Gram path requires n <= d, got n = {n}, d = {}",
                    z.d()
                )));
            }
            let eig = linalg::sym_eigh(&linalg::gram_matrix(z)?)?;
            let w = eig.spectral_map(weight);
            let dz = w.dot(&z.view()) * scale;
            let mut values = eig.eigenvalues.to_vec();
            values.resize(z.d(), 0.0);
            Ok((Spectrum::from_decomposition(values, SpectrumSource::Gram), dz))
        }
        _ => {
            let eig = linalg::sym_eigh(&repr::autocorrelation(z)?)?;
            let w = eig.spectral_map(weight);
            let dz = z.view().dot(&w) * scale;
            Ok((
                Spectrum::from_decomposition(eig.eigenvalues.to_vec(), SpectrumSource::FullEigh),
                dz,
            ))
        }
    }
}

/// Pulls a gradient with respect to `Z = normalize(H)` back to `H`:
/// row `i` becomes `(I - z_i z_iᵀ) g_i / ‖h_i‖`.
pub fn normalization_backward(
    z: ArrayView2<'_, f64>,
    norms: &[f64],
    dz: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut out = dz.to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let zi = z.row(i);
        let radial = row.dot(&zi);
        row.scaled_add(-radial, &zi);
        row /= norms[i];
    }
    out
}

/// `‖ZᵀZ/n - cI‖²_F` and its gradient `(4/n) Z (ZᵀZ/n - cI)` with respect
/// to `Z`.
pub fn frobenius_loss(z: &RepresentationMatrix, c: f64) -> Result<(f64, Array2<f64>)> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "frobenius target must be positive, got {c}"
        )));
    }
    let n = z.n() as f64;
    let mut resid = repr::autocorrelation(z)?.into_inner();
    resid.diag_mut().mapv_inplace(|x| x - c);
    let loss = resid.iter().map(|x| x * x).sum();
    let grad = z.view().dot(&resid) * (4.0 / n);
    Ok((loss, grad))
}

/// I-VNE⁺ loss value with its parts and gradients.
#[derive(Debug, Clone)]
pub struct IvneLoss {
    pub loss: f64,
    /// Mean positive-pair cosine similarity.
    pub alignment: f64,
    /// Entropy of the first view's autocorrelation.
    pub entropy: VneValue,
    pub grad1: Array2<f64>,
    pub grad2: Array2<f64>,
}

/// `-α₁ · mean_i cos(h¹_i, h²_i) - α₂ · S(C_auto(H1))`.
///
/// The entropy term is a function of `H1` only, so its gradient enters
/// `grad1` alone.
pub fn ivne_loss(
    h1: &RepresentationMatrix,
    h2: &RepresentationMatrix,
    cfg: &RegularizerConfig,
) -> Result<IvneLoss> {
    cfg.validate()?;
    if h1.shape() != h2.shape() {
        return Err(Error::ShapeMismatch {
            left: h1.shape(),
            right: h2.shape(),
        });
    }
    let n = h1.n();
    let norms1 = h1.row_norms();
    let norms2 = h2.row_norms();
    let z1 = h1.normalize_rows()?;
    let z2 = h2.normalize_rows()?;

    let mut grad1 = Array2::zeros(h1.shape());
    let mut grad2 = Array2::zeros(h2.shape());
    let mut alignment = 0.0;
    let w = -cfg.alpha1 / n as f64;
    for i in 0..n {
        let a = z1.row(i);
        let b = z2.row(i);
        let cos = a.dot(&b);
        alignment += cos;
        let mut g1 = grad1.row_mut(i);
        g1.assign(&b);
        g1.scaled_add(-cos, &a);
        g1 *= w / norms1[i];
        let mut g2 = grad2.row_mut(i);
        g2.assign(&a);
        g2.scaled_add(-cos, &b);
        g2 *= w / norms2[i];
    }
    alignment /= n as f64;

    let (spec, dz) = normalized_gradient(&z1, SpectrumPath::Auto)?;
    let entropy = vne(&spec);
    let dh = normalization_backward(z1.view(), norms1.as_slice().unwrap(), dz.view());
    grad1.scaled_add(-cfg.alpha2, &dh);

    Ok(IvneLoss {
        loss: -cfg.alpha1 * alignment - cfg.alpha2 * entropy.entropy,
        alignment,
        entropy,
        grad1,
        grad2,
    })
}

/// Convenience for callers holding a [`SymMatrix`] with unit trace.
pub fn vne_of_matrix(m: &SymMatrix) -> Result<VneValue> {
    let eig = linalg::sym_eigh(m)?;
    Ok(vne(&Spectrum::from_decomposition(
        eig.eigenvalues.to_vec(),
        SpectrumSource::External,
    )))
}
