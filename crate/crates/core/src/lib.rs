//! Von Neumann entropy (VNE) of representation autocorrelation matrices.
//!
//! For a batch of representations `H` (one row per sample) the rows are
//! L2-normalized to `Z` and the autocorrelation `C = ZᵀZ / n` is formed. `C`
//! is symmetric positive semi-definite with unit trace, so its eigenvalues
//! form a probability vector and
//!
//! ```text
//! S(C) = -Σ_j λ_j ln λ_j,   0 ≤ S ≤ ln min(n, d)
//! ```
//!
//! The crate provides:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | cyclic Jacobi eigensolver, Gram-path spectrum |
//! | [`repr`] | representation matrices, normalization, autocorrelation, spectra |
//! | [`entropy`] | entropy value, analytic gradient, Frobenius and I-VNE⁺ losses |
//! | [`diagnostics`] | rank surrogate, isotropy, pairwise similarity, dead units, total correlation |
//! | [`optimize`] | direct entropy ascent/descent on the row-normalized manifold |
//! | [`trainer`] | toy MLP training with entropy regularizers, manual backprop |
//! | [`verify`] | executable checks of the entropy/rank/disentanglement/isotropy results |
//! | [`io`] | matrix file formats and the JSON report schema |
//!
//! All computation is `f64` and deterministic for a given seed.

pub mod diagnostics;
pub mod entropy;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod repr;
pub mod trainer;
pub mod verify;

mod rng;

pub use error::{Error, Result};
pub use repr::{RepresentationMatrix, Spectrum, SpectrumPath};

/// Version string embedded in reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
