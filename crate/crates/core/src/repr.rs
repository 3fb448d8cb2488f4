//! Representation matrices, row normalization, autocorrelation and spectra.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::rng;

/// Rows with an L2 norm at or below this are rejected by normalization.
pub const ZERO_ROW_NORM: f64 = 1e-30;

/// Tolerance on unit row norms for matrices flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// An `n × d` matrix of representation vectors, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    data: Array2<f64>,
    normalized: bool,
}

impl RepresentationMatrix {
    /// Wraps raw (unnormalized) representations.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!(
                "representation must be at least 1x1, got {n}x{d}"
            )));
        }
        if let Some((idx, bad)) = data.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("{bad} at row {}, column {}", idx / d, idx % d),
            });
        }
        Ok(Self {
            data,
            normalized: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        for (line, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::NonRectangular {
                    line: line + 1,
                    expected: d,
                    found: row.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// Wraps a matrix that is already row-normalized, verifying the norms.
    pub fn from_normalized(data: Array2<f64>) -> Result<Self> {
        let mut m = Self::new(data)?;
        for (i, row) in m.data.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has norm {norm}, expected 1"
                )));
            }
        }
        m.normalized = true;
        Ok(m)
    }

    /// Raw matrix with i.i.d. standard normal entries.
    pub fn gaussian(n: usize, d: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let data = Array2::from_shape_simple_fn((n, d), || rng::normal(&mut r));
        Self {
            data,
            normalized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// The same data, flagged raw.
    pub fn as_raw(&self) -> Self {
        Self {
            data: self.data.clone(),
            normalized: false,
        }
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(&self.data * k)
    }

    /// L2 norm of each row.
    pub fn row_norms(&self) -> Array1<f64> {
        self.data.map_axis(Axis(1), |row| row.dot(&row).sqrt())
    }

    /// Divides every row by its L2 norm.
    pub fn normalize_rows(&self) -> Result<Self> {
        if self.normalized {
            return Ok(self.clone());
        }
        let norms = self.row_norms();
        if let Some(index) = norms.iter().position(|&r| r <= ZERO_ROW_NORM) {
            return Err(Error::ZeroRow { index });
        }
        let data = &self.data / &norms.insert_axis(Axis(1));
        Ok(Self {
            data,
            normalized: true,
        })
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "operation requires a row-normalized representation".into(),
            ))
        }
    }
}

impl Serialize for RepresentationMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<Vec<f64>> = self.data.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut st = serializer.serialize_struct("RepresentationMatrix", 4)?;
        st.serialize_field("n", &self.n())?;
        st.serialize_field("d", &self.d())?;
        st.serialize_field("normalized", &self.normalized)?;
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

/// Free-function form of [`RepresentationMatrix::normalize_rows`].
pub fn normalize_rows(h: &RepresentationMatrix) -> Result<RepresentationMatrix> {
    h.normalize_rows()
}

/// Autocorrelation `ZᵀZ / n` of a row-normalized representation.
pub fn autocorrelation(z: &RepresentationMatrix) -> Result<SymMatrix> {
    z.require_normalized()?;
    let a = z.view();
    SymMatrix::symmetrized(a.t().dot(&a) / z.n() as f64)
}

/// Which matrix the eigenvalues are extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumPath {
    /// Gram when `n < d`, otherwise full.
    #[default]
    Auto,
    FullEigh,
    Gram,
}

impl SpectrumPath {
    pub fn resolve(self, n: usize, d: usize) -> SpectrumSource {
        match self {
            SpectrumPath::Auto if n < d => SpectrumSource::Gram,
            SpectrumPath::Auto | SpectrumPath::FullEigh => SpectrumSource::FullEigh,
            SpectrumPath::Gram => SpectrumSource::Gram,
        }
    }
}

/// Where a [`Spectrum`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    /// Eigendecomposition of the `d × d` autocorrelation.
    FullEigh,
    /// Eigendecomposition of the `n × n` Gram matrix, zero-padded to `d`.
    Gram,
    /// Supplied directly by the caller.
    External,
}

/// Descending, non-negative eigenvalues of an autocorrelation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    source: SpectrumSource,
}

impl Spectrum {
    /// Builds a spectrum from arbitrary values: sorted descending, negative
    /// round-off clamped to zero.
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("spectrum must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("{bad} in spectrum"),
            });
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self::from_decomposition(values, SpectrumSource::External))
    }

    /// `values` must already be descending.
    pub(crate) fn from_decomposition(mut values: Vec<f64>, source: SpectrumSource) -> Self {
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self {
            eigenvalues: values,
            source,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Number of eigenvalues strictly greater than `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&x| x > threshold).count()
    }
}

/// Eigenvalues of `ZᵀZ / n` along the requested path.
pub fn spectrum(z: &RepresentationMatrix, path: SpectrumPath) -> Result<Spectrum> {
    z.require_normalized()?;
    match path.resolve(z.n(), z.d()) {
        SpectrumSource::Gram => linalg::gram_spectrum(z),
        _ => {
            let eig = linalg::sym_eigh(&autocorrelation(z)?)?;
            Ok(Spectrum::from_decomposition(
                eig.eigenvalues.to_vec(),
                SpectrumSource::FullEigh,
            ))
        }
    }
}
