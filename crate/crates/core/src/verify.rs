//! Randomized checks of the entropy bounds, the rank bound, the
//! decorrelation and isotropy results, the analytic gradient and the Gram
//! shortcut.
//!
//! Every suite is deterministic per seed. Single-check suites report the raw
//! violation against their tolerance; suites that combine several checks
//! report the largest excess over each check's limit, with tolerance 0.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DEFAULT_PROBES, DEFAULT_REFINE_STEPS};
use crate::entropy::{self, vne};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::optimize::{self, Mode, OptimizeConfig};
use crate::repr::{self, RepresentationMatrix, SpectrumPath};
use crate::rng::{self, Rng};

pub const BOUNDS_TOLERANCE: f64 = 1e-9;
pub const RANK_TOLERANCE: f64 = 1e-9;
pub const DISENTANGLE_TOLERANCE: f64 = 1e-6;
pub const ISOTROPY_RESIDUAL: f64 = 1e-3;
pub const ISOTROPY_ENTROPY_SLACK: f64 = 1e-4;
pub const ISOTROPY_MEAN: f64 = 0.95;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const PATH_ENTROPY_TOLERANCE: f64 = 1e-9;
pub const PATH_EIGENVALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub label: String,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub suite: String,
    pub trials: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: Vec<TrialRecord>,
}

impl VerifyOutcome {
    fn from_records(suite: &str, tolerance: f64, details: Vec<TrialRecord>) -> Self {
        let worst = details
            .iter()
            .map(|r| r.violation)
            .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || b > a { b } else { a });
        Self {
            suite: suite.to_string(),
            trials: details.len(),
            worst_violation: worst,
            tolerance,
            pass: worst <= tolerance,
            details,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Bounds,
    Rank,
    Disentangle,
    Isotropy,
    Gradient,
    Paths,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "bounds" => Suite::Bounds,
            "rank" => Suite::Rank,
            "disentangle" => Suite::Disentangle,
            "isotropy" => Suite::Isotropy,
            "gradient" => Suite::Gradient,
            "paths" => Suite::Paths,
            other => {
                return Err(Error::InvalidConfig(format!("unknown suite '{other}'")));
            }
        })
    }
}

/// Shapes checked by the isotropy suite at default settings.
pub const ISOTROPY_SHAPES: [(usize, usize); 3] = [(8, 32), (16, 64), (16, 16)];

/// Runs one suite (or all) at default sizes.
pub fn run(suite: Suite, seed: u64) -> Result<Vec<VerifyOutcome>> {
    let mut out = Vec::new();
    let wants = |s: Suite| suite == Suite::All || suite == s;
    if wants(Suite::Bounds) {
        out.push(verify_entropy_bounds(1000, seed)?);
    }
    if wants(Suite::Rank) {
        out.push(verify_rank_bound(500, seed)?);
    }
    if wants(Suite::Disentangle) {
        out.push(verify_disentanglement(16, 200, seed)?);
    }
    if wants(Suite::Isotropy) {
        for (n, d) in ISOTROPY_SHAPES {
            out.push(verify_isotropy_theorem(n, d, 2000, seed)?);
        }
    }
    if wants(Suite::Gradient) {
        out.push(verify_gradient(200, seed)?);
    }
    if wants(Suite::Paths) {
        out.push(verify_path_equivalence(500, seed)?);
    }
    Ok(out)
}

fn gaussian(n: usize, d: usize, r: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng::normal(r))
}

fn normalized(h: Array2<f64>) -> Result<RepresentationMatrix> {
    RepresentationMatrix::new(h)?.normalize_rows()
}

/// `k` orthonormal rows of length `d` (Gram-Schmidt on Gaussian draws).
fn orthonormal_rows(k: usize, d: usize, r: &mut Rng) -> Array2<f64> {
    assert!(k <= d);
    let mut q = Array2::<f64>::zeros((k, d));
    let mut i = 0;
    while i < k {
        let mut v = Array1::from(rng::unit_vector(r, d));
        for _ in 0..2 {
            for j in 0..i {
                let p = v.dot(&q.row(j));
                v.scaled_add(-p, &q.row(j));
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            q.row_mut(i).assign(&(v / norm));
            i += 1;
        }
    }
    q
}

/// `0 ≤ S ≤ ln min(n, d)` on random Gaussian representations.
pub fn verify_entropy_bounds(trials: usize, seed: u64) -> Result<VerifyOutcome> {
    let mut r = rng::seeded(seed);
    let mut details = Vec::with_capacity(trials);
    for t in 0..trials {
        let n = r.random_range(1..=40);
        let d = r.random_range(1..=40);
        let z = normalized(gaussian(n, d, &mut r))?;
        let s = vne(&repr::spectrum(&z, SpectrumPath::Auto)?).entropy;
        let bound = (n.min(d) as f64).ln();
        details.push(TrialRecord {
            label: format!("trial {t}: {n}x{d}"),
            violation: (-s).max(s - bound).max(0.0),
        });
    }
    Ok(VerifyOutcome::from_records("bounds", BOUNDS_TOLERANCE, details))
}

/// `S ≤ ln k` for rank-`k` representations built from explicit factors, and
/// equality for `k` orthonormal directions with equal weight.
pub fn verify_rank_bound(trials: usize, seed: u64) -> Result<VerifyOutcome> {
    let mut r = rng::seeded(seed);
    let mut details = Vec::with_capacity(trials + 8);
    for t in 0..trials {
        let d = r.random_range(2..=32);
        let k = r.random_range(1..=d.min(12));
        let n = r.random_range(k..=k + 30);
        let basis = gaussian(k, d, &mut r);
        let mut mixing = Array2::from_shape_simple_fn((n, k), || r.random_range(0.05..1.0));
        // Every factor appears alone at least once, so the rank is exactly k.
        for i in 0..k {
            mixing.row_mut(i).fill(0.0);
            mixing[[i, i]] = 1.0;
        }
        let z = normalized(mixing.dot(&basis))?;
        let s = vne(&repr::spectrum(&z, SpectrumPath::Auto)?).entropy;
        details.push(TrialRecord {
            label: format!("trial {t}: rank {k}, {n}x{d}"),
            violation: (s - (k as f64).ln()).max(0.0),
        });
    }
    let d = 32;
    for k in [1, 2, 3, 5, 8, 16, 32] {
        let q = orthonormal_rows(k, d, &mut r);
        let repeats = 3;
        let rows: Vec<usize> = (0..k * repeats).map(|i| i % k).collect();
        let z = RepresentationMatrix::from_normalized(q.select(ndarray::Axis(0), &rows))?;
        let s = vne(&repr::spectrum(&z, SpectrumPath::Auto)?).entropy;
        details.push(TrialRecord {
            label: format!("equality: k = {k}, d = {d}"),
            violation: (s - (k as f64).ln()).abs(),
        });
    }
    Ok(VerifyOutcome::from_records("rank", RANK_TOLERANCE, details))
}

/// Result of one entropy-ascent run on a fixed-diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationRun {
    pub initial_tc: f64,
    pub final_tc: f64,
    pub initial_entropy: f64,
    pub final_entropy: f64,
    pub steps: usize,
}

/// Start for the decorrelation run: diagonal `1/d`, first off-diagonals
/// `0.5/d`.
pub fn band_covariance(d: usize) -> SymMatrix {
    let mut m = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        m[[i, i]] = 1.0 / d as f64;
        if i + 1 < d {
            m[[i, i + 1]] = 0.5 / d as f64;
            m[[i + 1, i]] = 0.5 / d as f64;
        }
    }
    SymMatrix::new(m).expect("band matrix is symmetric")
}

/// Gradient ascent on `S(cov)` over the off-diagonal entries, keeping the
/// diagonal at `1/d`. After each step the eigenvalues are clamped to stay
/// positive and the diagonal is restored.
pub fn decorrelate(start: &SymMatrix, steps: usize, step_size: f64) -> Result<DecorrelationRun> {
    let d = start.dim();
    let floor = 1e-6 / d as f64;
    let diag: Vec<f64> = start.view().diag().to_vec();
    let tc0 = diagnostics::gaussian_total_correlation(start)?;
    let s0 = entropy::vne_of_matrix(start)?.entropy;
    let mut cov = start.view().to_owned();
    for _ in 0..steps {
        let eig = linalg::sym_eigh(&SymMatrix::symmetrized(cov.clone())?)?;
        let grad = eig.spectral_map(|x| -(1.0 + x.max(floor).ln()));
        cov.scaled_add(step_size, &grad);
        let eig = linalg::sym_eigh(&SymMatrix::symmetrized(cov)?)?;
        cov = eig.spectral_map(|x| x.max(floor));
        for (i, &v) in diag.iter().enumerate() {
            cov[[i, i]] = v;
        }
    }
    let end = SymMatrix::symmetrized(cov)?;
    Ok(DecorrelationRun {
        initial_tc: tc0,
        final_tc: diagnostics::gaussian_total_correlation(&end)?,
        initial_entropy: s0,
        final_entropy: entropy::vne_of_matrix(&end)?.entropy,
        steps,
    })
}

/// Seeded starts with diagonal `1/d` and a random symmetric off-diagonal
/// part whose smallest eigenvalue stays at least `0.25/d`.
fn random_covariance(d: usize, r: &mut Rng) -> Result<SymMatrix> {
    let mut a = gaussian(d, d, r);
    a = &a + &a.t();
    a.diag_mut().fill(0.0);
    let spectral = linalg::sym_eigh(&SymMatrix::symmetrized(a.clone())?)?;
    let radius = spectral
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = 0.75 / (d as f64 * radius.max(1e-300));
    let mut m = a * scale;
    m.diag_mut().fill(1.0 / d as f64);
    SymMatrix::symmetrized(m)
}

/// Entropy ascent at fixed marginal variances `1/d` drives the Gaussian
/// total correlation to zero.
pub fn verify_disentanglement(d: usize, steps: usize, seed: u64) -> Result<VerifyOutcome> {
    if d < 2 {
        return Err(Error::InvalidConfig(format!("need d >= 2, got {d}")));
    }
    let mut r = rng::seeded(seed);
    let step = 0.5 / d as f64;
    let target = (d as f64).ln();
    let mut starts = vec![("band".to_string(), band_covariance(d))];
    for t in 0..4 {
        starts.push((format!("random start {t}"), random_covariance(d, &mut r)?));
    }
    let mut details = Vec::new();
    for (label, start) in starts {
        let run = decorrelate(&start, steps, step)?;
        let not_decreasing = if run.initial_tc > DISENTANGLE_TOLERANCE {
            run.final_tc - run.initial_tc
        } else {
            f64::NEG_INFINITY
        };
        let violation = (run.final_tc - DISENTANGLE_TOLERANCE)
            .max(target - run.final_entropy - DISENTANGLE_TOLERANCE)
            .max(not_decreasing);
        details.push(TrialRecord {
            label: format!(
                "{label}: tc {:.3e} -> {:.3e}, entropy {:.9} (ln d = {target:.9})",
                run.initial_tc, run.final_tc, run.final_entropy
            ),
            violation,
        });
    }
    Ok(VerifyOutcome::from_records("disentangle", 0.0, details))
}

/// Entropy ascent with `n ≤ d` ends at orthonormal rows: `‖ZZᵀ - I‖_F`
/// small, `S ≈ ln n`, and a flat partition function.
pub fn verify_isotropy_theorem(n: usize, d: usize, steps: usize, seed: u64) -> Result<VerifyOutcome> {
    if n > d {
        return Err(Error::InvalidConfig(format!(
            "the isotropy result needs n <= d, got n = {n}, d = {d}"
        )));
    }
    let traj = optimize::optimize_vne(&OptimizeConfig {
        n,
        d,
        mode: Mode::Maximize,
        steps,
        seed,
        ..Default::default()
    })?;
    let residual = optimize::gram_identity_residual(&traj.final_h);
    let entropy = traj.final_entropy.entropy;
    let iso = diagnostics::isotropy_profile(&traj.final_h, DEFAULT_PROBES, DEFAULT_REFINE_STEPS, seed)?;
    let log_n = (n as f64).ln();
    let details = vec![
        TrialRecord {
            label: format!("{n}x{d}: residual {residual:.3e} (limit {ISOTROPY_RESIDUAL:e})"),
            violation: residual - ISOTROPY_RESIDUAL,
        },
        TrialRecord {
            label: format!("{n}x{d}: entropy {entropy:.9} (ln n = {log_n:.9})"),
            violation: log_n - ISOTROPY_ENTROPY_SLACK - entropy,
        },
        TrialRecord {
            label: format!(
                "{n}x{d}: mean normalized partition value {:.6} (limit {ISOTROPY_MEAN})",
                iso.mean()
            ),
            violation: ISOTROPY_MEAN - iso.mean(),
        },
    ];
    Ok(VerifyOutcome::from_records(&format!("isotropy {n}x{d}"), 0.0, details))
}

/// Largest entry-wise error between `grad` and central differences of
/// `vne_of`, relative to the largest numeric entry.
pub fn gradient_error(h: &RepresentationMatrix, grad: &Array2<f64>) -> Result<f64> {
    let base = h.view().to_owned();
    let mut max_diff = 0.0f64;
    let mut max_fd = 0.0f64;
    let mut probe = base.clone();
    for ((i, j), &x) in base.indexed_iter() {
        let step = 1e-5 * x.abs().max(1.0);
        probe[[i, j]] = x + step;
        let up = entropy::vne_of(&RepresentationMatrix::new(probe.clone())?)?.entropy;
        probe[[i, j]] = x - step;
        let down = entropy::vne_of(&RepresentationMatrix::new(probe.clone())?)?.entropy;
        probe[[i, j]] = x;
        let fd = (up - down) / (2.0 * step);
        max_diff = max_diff.max((fd - grad[[i, j]]).abs());
        max_fd = max_fd.max(fd.abs());
    }
    Ok(if max_fd > 0.0 { max_diff / max_fd } else { max_diff })
}

/// Rows `cos φ · u_i + sin φ · e` where the `u_i` form a harmonic frame over
/// `s` planes, randomly rotated into `d` dimensions and rescaled. The
/// autocorrelation has the eigenvalue `cos²φ / 2s` with multiplicity `2s`,
/// and no row is an eigenvector. Returns the matrix and the multiplicity.
fn repeated_spectrum_rows(n: usize, d: usize, r: &mut Rng) -> (Array2<f64>, usize) {
    let s = r.random_range(1..=((n - 1) / 2).min((d - 1) / 2).max(1));
    let basis = orthonormal_rows(2 * s + 1, d, r);
    let phi = r.random_range(0.2..1.3f64);
    let offset = r.random_range(0.0..std::f64::consts::TAU);
    let mut h = Array2::zeros((n, d));
    for i in 0..n {
        let mut row = &basis.row(2 * s) * phi.sin();
        for t in 0..s {
            let angle = offset + std::f64::consts::TAU * ((t + 1) * i) as f64 / n as f64;
            let w = phi.cos() / (s as f64).sqrt();
            row.scaled_add(w * angle.cos(), &basis.row(2 * t));
            row.scaled_add(w * angle.sin(), &basis.row(2 * t + 1));
        }
        let scale = r.random_range(0.5..2.0);
        h.row_mut(i).assign(&(row * scale));
    }
    (h, 2 * s)
}

/// Analytic gradient against finite differences, on Gaussian matrices and on
/// constructions with repeated eigenvalues. Both spectrum paths are checked
/// when `n ≤ d`.
pub fn verify_gradient(trials: usize, seed: u64) -> Result<VerifyOutcome> {
    let mut r = rng::seeded(seed);
    let mut details = Vec::with_capacity(trials);
    for t in 0..trials {
        let n = r.random_range(4..=12);
        let d = r.random_range(4..=24);
        let (label, h) = if t % 4 == 3 {
            let (h, fold) = repeated_spectrum_rows(n, d, &mut r);
            (format!("trial {t}: {n}x{d}, {fold}-fold eigenvalue"), h)
        } else {
            (format!("trial {t}: {n}x{d}"), gaussian(n, d, &mut r))
        };
        let h = RepresentationMatrix::new(h)?;
        let mut paths = vec![SpectrumPath::FullEigh];
        if n <= d {
            paths.push(SpectrumPath::Gram);
        }
        let mut worst = 0.0f64;
        for path in paths {
            let (_, g) = entropy::vne_gradient_with_path(&h, path)?;
            worst = worst.max(gradient_error(&h, &g.grad)?);
        }
        details.push(TrialRecord {
            label,
            violation: worst,
        });
    }
    Ok(VerifyOutcome::from_records("gradient", GRADIENT_TOLERANCE, details))
}

/// Full and Gram spectra agree for `n < d`. Eigenvalue differences are
/// scaled onto the entropy tolerance.
pub fn verify_path_equivalence(trials: usize, seed: u64) -> Result<VerifyOutcome> {
    let mut r = rng::seeded(seed);
    let scale = PATH_ENTROPY_TOLERANCE / PATH_EIGENVALUE_TOLERANCE;
    let mut details = Vec::with_capacity(trials);
    for t in 0..trials {
        let n = r.random_range(1..=20);
        let d = r.random_range(n + 1..=40);
        let z = normalized(gaussian(n, d, &mut r))?;
        let full = repr::spectrum(&z, SpectrumPath::FullEigh)?;
        let gram = repr::spectrum(&z, SpectrumPath::Gram)?;
        let ds = (vne(&full).entropy - vne(&gram).entropy).abs();
        let dl = full
            .eigenvalues()
            .iter()
            .zip(gram.eigenvalues())
            .take(n)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        details.push(TrialRecord {
            label: format!("trial {t}: {n}x{d}, dS {ds:.2e}, dλ {dl:.2e}"),
            violation: ds.max(dl * scale),
        });
    }
    Ok(VerifyOutcome::from_records("paths", PATH_ENTROPY_TOLERANCE, details))
}
