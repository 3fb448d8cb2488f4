//! Dense symmetric eigendecomposition.
//!
//! The solver is the classic cyclic Jacobi method with a threshold strategy
//! for the first sweeps. It operates on the upper triangle of a row-major
//! copy of the input, accumulates rotations into an orthogonal matrix and
//! stops once the off-diagonal Frobenius norm falls below
//! `1e-13 · ‖M‖_F`.
//!
//! Output ordering is descending, with ties broken by the lower diagonal
//! index once iteration finishes. Each eigenvector's sign is fixed so that
//! its largest-magnitude component is positive, which makes results
//! byte-reproducible for identical input.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::repr::{RepresentationMatrix, Spectrum, SpectrumSource};

/// Relative off-diagonal norm at which Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-13;

/// Maximum number of full cyclic sweeps.
pub const MAX_SWEEPS: usize = 64;

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Array2<f64>,
}

impl SymMatrix {
    /// Wraps `m` after checking squareness and
    /// `|m_ij - m_ji| ≤ 1e-12 · max(1, ‖m‖_F)`.
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (rows, cols) = m.dim();
        if rows != cols {
            return Err(Error::Shape(format!(
                "symmetric matrix must be square, got {rows}x{cols}"
            )));
        }
        if rows == 0 {
            return Err(Error::Shape("symmetric matrix must be non-empty".into()));
        }
        if let Some(bad) = m.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("{bad} in symmetric matrix"),
            });
        }
        let tol = SYMMETRY_TOLERANCE * frobenius_norm(m.view()).max(1.0);
        let mut worst = 0.0f64;
        for i in 0..rows {
            for j in (i + 1)..rows {
                worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
            }
        }
        if worst > tol {
            return Err(Error::NonSymmetric {
                max_asymmetry: worst,
            });
        }
        Ok(Self { inner: m })
    }

    /// Averages `m` with its transpose, then wraps it.
    pub fn symmetrized(m: Array2<f64>) -> Result<Self> {
        let t = m.t().to_owned();
        Self::new((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: Array2::eye(dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            inner: Array2::from_diag(&Array1::from(diag.to_vec())),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.inner.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.inner
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self.inner.view())
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Array1<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Array2<f64>,
    /// Number of Jacobi sweeps performed.
    pub sweeps: usize,
}

impl EigDecomposition {
    /// `U diag(f(λ)) Uᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        scaled.dot(&u.t())
    }
}

pub fn frobenius_norm(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigh(m: &SymMatrix) -> Result<EigDecomposition> {
    let n = m.dim();
    let scale = m.frobenius_norm();
    let stop = JACOBI_TOLERANCE * scale;

    let mut a: Vec<f64> = m.inner.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut base = diag.clone();
    let mut acc = vec![0.0; n];

    let mut sweeps = 0;
    loop {
        let (off_sq, off_abs) = upper_off_diagonal(&a, n);
        if (2.0 * off_sq).sqrt() <= stop {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }

        let threshold = if sweeps < 3 {
            0.2 * off_abs / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                if sweeps > 3
                    && diag[p].abs() + g == diag[p].abs()
                    && diag[q].abs() + g == diag[q].abs()
                {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= threshold || apq == 0.0 {
                    continue;
                }
                let h = diag[q] - diag[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let shift = t * apq;
                acc[p] -= shift;
                acc[q] += shift;
                diag[p] -= shift;
                diag[q] += shift;
                a[p * n + q] = 0.0;

                for j in 0..p {
                    rotate(&mut a, j * n + p, j * n + q, s, tau);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, p * n + j, j * n + q, s, tau);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, p * n + j, q * n + j, s, tau);
                }
                for j in 0..n {
                    rotate(&mut v, j * n + p, j * n + q, s, tau);
                }
            }
        }

        for i in 0..n {
            base[i] += acc[i];
            diag[i] = base[i];
            acc[i] = 0.0;
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal eigenvalues keep their diagonal order.
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let eigenvalues = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 1..n {
            if v[r * n + src].abs() > v[pivot * n + src].abs() {
                pivot = r;
            }
        }
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            eigenvectors[[r, k]] = sign * v[r * n + src];
        }
    }

    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

#[inline]
fn rotate(m: &mut [f64], ij: usize, kl: usize, s: f64, tau: f64) {
    let g = m[ij];
    let h = m[kl];
    m[ij] = g - s * (h + g * tau);
    m[kl] = h + s * (g - h * tau);
}

fn upper_off_diagonal(a: &[f64], n: usize) -> (f64, f64) {
    let mut sq = 0.0;
    let mut abs = 0.0;
    for p in 0..n {
        for &x in &a[p * n + p + 1..(p + 1) * n] {
            sq += x * x;
            abs += x.abs();
        }
    }
    (sq, abs)
}

/// Spectrum of `ZᵀZ/n` computed from the `n × n` Gram matrix `ZZᵀ/n`.
///
/// The two matrices share their nonzero eigenvalues; the remaining `d - n`
/// entries of the returned spectrum are zero.
pub fn gram_spectrum(z: &RepresentationMatrix) -> Result<Spectrum> {
    let (n, d) = (z.n(), z.d());
    if n > d {
        return Err(Error::Shape(format!(
            "Gram path requires n <= d, got n = {n}, d = {d}"
        )));
    }
    let gram = gram_matrix(z)?;
    let eig = sym_eigh(&gram)?;
    let mut values = eig.eigenvalues.to_vec();
    values.resize(d, 0.0);
    Ok(Spectrum::from_decomposition(values, SpectrumSource::Gram))
}

/// `ZZᵀ/n` for a normalized representation.
pub(crate) fn gram_matrix(z: &RepresentationMatrix) -> Result<SymMatrix> {
    z.require_normalized()?;
    let a = z.view();
    let g = a.dot(&a.t()) / z.n() as f64;
    SymMatrix::symmetrized(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_symmetric(dim: usize, seed: u64) -> SymMatrix {
        let mut r = rng::seeded(seed);
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in i..dim {
                let x = rng::normal(&mut r);
                m[[i, j]] = x;
                m[[j, i]] = x;
            }
        }
        SymMatrix::new(m).unwrap()
    }

    // Residuals recomputed with explicit loops, independent of ndarray's dot.
    fn residuals(m: &SymMatrix, eig: &EigDecomposition) -> (f64, f64) {
        let n = m.dim();
        let u = &eig.eigenvectors;
        let mut recon = 0.0;
        let mut ortho = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut r = 0.0;
                let mut o = 0.0;
                for k in 0..n {
                    r += u[[i, k]] * eig.eigenvalues[k] * u[[j, k]];
                    o += u[[k, i]] * u[[k, j]];
                }
                recon += (r - m.view()[[i, j]]).powi(2);
                let delta = if i == j { 1.0 } else { 0.0 };
                ortho += (o - delta).powi(2);
            }
        }
        (recon.sqrt(), ortho.sqrt())
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = sym_eigh(&SymMatrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues.to_vec(), vec![1.0, 1.0, 1.0]);
        let (_, ortho) = residuals(&SymMatrix::identity(3), &eig);
        assert!(ortho < 1e-15);
    }

    #[test]
    fn diagonal_eigenvalues_are_sorted() {
        let m = SymMatrix::from_diagonal(&[0.1, 0.7, 0.2]);
        let eig = sym_eigh(&m).unwrap();
        assert_eq!(eig.eigenvalues.to_vec(), vec![0.7, 0.2, 0.1]);
        assert_eq!(eig.eigenvectors[[1, 0]], 1.0);
        assert_eq!(eig.eigenvectors[[2, 1]], 1.0);
        assert_eq!(eig.eigenvectors[[0, 2]], 1.0);
    }

    #[test]
    fn random_16x16_residuals() {
        for seed in 0..5 {
            let m = random_symmetric(16, seed);
            let eig = sym_eigh(&m).unwrap();
            let (recon, ortho) = residuals(&m, &eig);
            assert!(recon < 1e-10 * m.frobenius_norm().max(1.0), "recon {recon}");
            assert!(ortho < 1e-10, "ortho {ortho}");
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let m = random_symmetric(24, 9);
        let a = sym_eigh(&m).unwrap();
        let b = sym_eigh(&m).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let m = SymMatrix::new(Array2::zeros((4, 4))).unwrap();
        let eig = sym_eigh(&m).unwrap();
        assert_eq!(eig.sweeps, 0);
        assert!(eig.eigenvalues.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut m = Array2::eye(3);
        m[[0, 2]] = 1e-6;
        assert!(matches!(
            SymMatrix::new(m),
            Err(Error::NonSymmetric { .. })
        ));
        assert!(matches!(
            SymMatrix::new(Array2::zeros((2, 3))),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn repeated_eigenvalues() {
        // Q diag(2, 2, 2, -1, -1) Qᵀ for a fixed rotation Q.
        let c = 0.6;
        let s = 0.8;
        let mut q = Array2::eye(5);
        q[[0, 0]] = c;
        q[[0, 3]] = -s;
        q[[3, 0]] = s;
        q[[3, 3]] = c;
        let d = Array2::from_diag(&Array1::from(vec![2.0, 2.0, 2.0, -1.0, -1.0]));
        let m = SymMatrix::symmetrized(q.dot(&d).dot(&q.t())).unwrap();
        let eig = sym_eigh(&m).unwrap();
        let expected = [2.0, 2.0, 2.0, -1.0, -1.0];
        for (got, want) in eig.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14);
        }
        let (recon, ortho) = residuals(&m, &eig);
        assert!(recon < 1e-13 && ortho < 1e-13);
    }

    #[test]
    fn spectral_map_reconstructs() {
        let m = random_symmetric(7, 3);
        let eig = sym_eigh(&m).unwrap();
        let back = eig.spectral_map(|x| x);
        let diff = &back - &m.view();
        assert!(frobenius_norm(diff.view()) < 1e-12);
    }

    #[test]
    fn gram_spectrum_orthonormal_rows() {
        let mut h = Array2::zeros((2, 4));
        h[[0, 1]] = 1.0;
        h[[1, 3]] = 1.0;
        let z = RepresentationMatrix::new(h).unwrap().normalize_rows().unwrap();
        let spec = gram_spectrum(&z).unwrap();
        assert_eq!(spec.eigenvalues(), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(spec.source(), SpectrumSource::Gram);
    }

    #[test]
    fn gram_spectrum_rank_one() {
        let h = Array2::from_shape_vec((2, 3), vec![0.6, 0.8, 0.0, 0.6, 0.8, 0.0]).unwrap();
        let z = RepresentationMatrix::new(h).unwrap().normalize_rows().unwrap();
        let spec = gram_spectrum(&z).unwrap();
        assert!((spec.eigenvalues()[0] - 1.0).abs() < 1e-15);
        assert!(spec.eigenvalues()[1].abs() < 1e-15);
    }

    #[test]
    fn gram_spectrum_matches_full_path() {
        let z = RepresentationMatrix::gaussian(8, 32, 11)
            .normalize_rows()
            .unwrap();
        let gram = gram_spectrum(&z).unwrap();
        let c = z.view().t().dot(&z.view()) / 8.0;
        let full = sym_eigh(&SymMatrix::symmetrized(c).unwrap()).unwrap();
        for k in 0..32 {
            let want = full.eigenvalues[k].max(0.0);
            assert!((gram.eigenvalues()[k] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_spectrum_rejects_tall_input() {
        let z = RepresentationMatrix::gaussian(5, 3, 0).normalize_rows().unwrap();
        assert!(matches!(gram_spectrum(&z), Err(Error::Shape(_))));
    }
}
