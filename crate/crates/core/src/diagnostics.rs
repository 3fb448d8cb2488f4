//! Companion metrics for a representation matrix.
//!
//! * rank surrogate: leading eigenvalues needed for a fraction of the energy
//! * rank bound gap: `ln rank - S`, never negative
//! * isotropy: the partition function `Z(c) = Σ_i exp(cᵀ z_i)` over unit
//!   directions `c`, normalized by its maximum
//! * disentanglement: cosine similarity between pairs of feature columns
//! * dead units: columns that are numerically zero over the whole set
//! * Gaussian total correlation of a covariance matrix

use ndarray::{Array1, ArrayView1};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::entropy::{self, VneValue, DROP_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::repr::{self, RepresentationMatrix, Spectrum, SpectrumPath};
use crate::rng;

pub const DEFAULT_ENERGY: f64 = 0.99;
pub const DEFAULT_EPS_RANK: f64 = 1e-10;
pub const DEFAULT_PROBES: usize = 512;
pub const DEFAULT_REFINE_STEPS: usize = 200;
pub const DEFAULT_MAX_PAIRS: usize = 2000;
pub const DEFAULT_DEAD_THRESHOLD: f64 = 1e-7;

/// Step size of the spherical ascent refining `max Z(c)`.
const REFINE_STEP: f64 = 0.1;
/// Columns at or below this norm are excluded from similarity sampling.
const LIVE_COLUMN_NORM: f64 = 1e-12;

/// Smallest `k` whose leading eigenvalues reach `energy` of the total.
///
/// The comparison is inclusive and allows a relative slack of `1e-12` so
/// sums that hit the target exactly in real arithmetic are not pushed one
/// index further by round-off.
pub fn rank_surrogate(spec: &Spectrum, energy: f64) -> Result<usize> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "energy must lie in (0, 1], got {energy}"
        )));
    }
    let total = spec.total();
    if total <= 0.0 {
        return Ok(0);
    }
    let target = energy * total - 1e-12 * total;
    let mut acc = 0.0;
    for (k, &x) in spec.eigenvalues().iter().enumerate() {
        acc += x;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(spec.dim())
}

/// `ln #{λ > eps_rank} - S`.
pub fn rank_bound_gap(spec: &Spectrum, eps_rank: f64) -> Result<f64> {
    let rank = spec.count_above(eps_rank);
    if rank == 0 {
        return Err(Error::DegenerateSpectrum {
            threshold: eps_rank,
        });
    }
    let gap = (rank as f64).ln() - entropy::vne(spec).entropy;
    debug_assert!(gap >= -1e-9, "rank bound violated: gap {gap}");
    Ok(gap)
}

/// `Z(c) = Σ_i exp(cᵀ z_i)`.
pub fn partition_function(z: &RepresentationMatrix, c: ArrayView1<'_, f64>) -> f64 {
    z.view().dot(&c).iter().map(|x| x.exp()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyProfile {
    /// `Z(c) / max_estimate` for every probe.
    pub normalized_values: Vec<f64>,
    /// Estimate of `max_{‖c‖=1} Z(c)`.
    pub max_estimate: f64,
    /// Direction attaining `max_estimate`.
    pub maximizer: Vec<f64>,
    pub probes: usize,
}

impl IsotropyProfile {
    pub fn mean(&self) -> f64 {
        mean(&self.normalized_values)
    }

    pub fn min(&self) -> f64 {
        self.normalized_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Normalized partition function over `probes` uniform directions.
///
/// The maximum over the sphere is estimated by projected gradient ascent
/// started from the best probe.
pub fn isotropy_profile(
    z: &RepresentationMatrix,
    probes: usize,
    refine_steps: usize,
    seed: u64,
) -> Result<IsotropyProfile> {
    z.require_normalized()?;
    if probes < 2 {
        return Err(Error::InvalidConfig(format!(
            "isotropy needs at least 2 probes, got {probes}"
        )));
    }
    let mut r = rng::seeded(seed);
    let d = z.d();
    let mut raw = Vec::with_capacity(probes);
    let mut best = (f64::NEG_INFINITY, Array1::zeros(d));
    for _ in 0..probes {
        let c = Array1::from(rng::unit_vector(&mut r, d));
        let value = partition_function(z, c.view());
        if value > best.0 {
            best = (value, c);
        }
        raw.push(value);
    }

    let (mut best_value, mut best_dir) = best;
    let mut c = best_dir.clone();
    for _ in 0..refine_steps {
        // Z is convex in c, so stepping along the full gradient and
        // re-normalizing never decreases it.
        let weights = z.view().dot(&c).mapv(f64::exp);
        let grad = z.view().t().dot(&weights);
        c.scaled_add(REFINE_STEP, &grad);
        let norm = c.dot(&c).sqrt();
        c /= norm;
        let value = partition_function(z, c.view());
        if value > best_value {
            best_value = value;
            best_dir = c.clone();
        }
    }

    Ok(IsotropyProfile {
        normalized_values: raw.iter().map(|v| v / best_value).collect(),
        max_estimate: best_value,
        maximizer: best_dir.to_vec(),
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    /// Cosine similarity for each entry of `pairs`.
    pub values: Vec<f64>,
    /// Column index pairs `(i, j)` with `i < j`.
    pub pairs: Vec<(usize, usize)>,
    pub pair_count: usize,
    /// Columns skipped because their norm is (numerically) zero.
    pub dead_columns: Vec<usize>,
}

impl SimilarityProfile {
    pub fn mean_abs(&self) -> f64 {
        mean(&self.values.iter().map(|x| x.abs()).collect::<Vec<_>>())
    }

    /// 95th percentile of `|cos|` (nearest rank).
    pub fn p95_abs(&self) -> f64 {
        percentile(self.values.iter().map(|x| x.abs()).collect(), 0.95)
    }
}

/// Cosine similarity between sampled pairs of distinct feature columns.
pub fn component_similarity_profile(
    a: &RepresentationMatrix,
    max_pairs: usize,
    seed: u64,
) -> Result<SimilarityProfile> {
    let view = a.view();
    let norms: Vec<f64> = view
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let (live, dead): (Vec<usize>, Vec<usize>) =
        (0..a.d()).partition(|&j| norms[j] > LIVE_COLUMN_NORM);
    if live.len() < 2 {
        return Err(Error::TooFewColumns { live: live.len() });
    }

    let l = live.len();
    let total = l * (l - 1) / 2;
    let ranks: Vec<usize> = if max_pairs >= total {
        (0..total).collect()
    } else {
        let mut r = rng::seeded(seed);
        let mut picked = index::sample(&mut r, total, max_pairs).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut pairs = Vec::with_capacity(ranks.len());
    let mut values = Vec::with_capacity(ranks.len());
    // Ranks are sorted, so the row pointer only moves forward.
    let mut i = 0;
    let mut row_start = 0;
    for k in ranks {
        while k >= row_start + (l - 1 - i) {
            row_start += l - 1 - i;
            i += 1;
        }
        let j = i + 1 + (k - row_start);
        let (ci, cj) = (live[i], live[j]);
        let cos = view.column(ci).dot(&view.column(cj)) / (norms[ci] * norms[cj]);
        pairs.push((ci, cj));
        values.push(cos.clamp(-1.0, 1.0));
    }

    Ok(SimilarityProfile {
        pair_count: pairs.len(),
        values,
        pairs,
        dead_columns: dead,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadUnits {
    pub count: usize,
    pub indices: Vec<usize>,
}

/// Columns whose maximum absolute activation is at most `threshold`.
pub fn dead_units(a: &RepresentationMatrix, threshold: f64) -> DeadUnits {
    let indices: Vec<usize> = a
        .view()
        .columns()
        .into_iter()
        .enumerate()
        .filter(|(_, col)| col.iter().all(|x| x.abs() <= threshold))
        .map(|(j, _)| j)
        .collect();
    DeadUnits {
        count: indices.len(),
        indices,
    }
}

/// Total correlation of `N(0, cov)`: `0.5 (Σ ln cov_ii - ln det cov)`.
///
/// `ln det` is taken from the eigenvalues.
pub fn gaussian_total_correlation(cov: &SymMatrix) -> Result<f64> {
    let eig = linalg::sym_eigh(cov)?;
    let min = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if !(min > 1e-12) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let log_diag: f64 = cov.view().diag().iter().map(|x| x.ln()).sum();
    let log_det: f64 = eig.eigenvalues.iter().map(|x| x.ln()).sum();
    Ok(0.5 * (log_diag - log_det))
}

/// Tunables for [`full_report_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub energy: f64,
    pub eps_rank: f64,
    pub probes: usize,
    pub refine_steps: usize,
    pub max_pairs: usize,
    pub dead_threshold: f64,
    /// Keep per-probe and per-pair values in the report.
    pub keep_values: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            energy: DEFAULT_ENERGY,
            eps_rank: DEFAULT_EPS_RANK,
            probes: DEFAULT_PROBES,
            refine_steps: DEFAULT_REFINE_STEPS,
            max_pairs: DEFAULT_MAX_PAIRS,
            dead_threshold: DEFAULT_DEAD_THRESHOLD,
            keep_values: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropySummary {
    pub mean: f64,
    pub min: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentanglementSummary {
    pub mean_abs: f64,
    pub p95: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub entropy: VneValue,
    /// `log10 λ` in descending order; `None` for dropped eigenvalues.
    pub spectrum_log10: Vec<Option<f64>>,
    pub rank_surrogate: usize,
    pub rank_bound_gap: f64,
    pub isotropy: IsotropySummary,
    /// `None` when fewer than two columns are live.
    pub disentanglement: Option<DisentanglementSummary>,
    pub dead_units: usize,
}

pub fn full_report(h: &RepresentationMatrix, seed: u64) -> Result<DiagnosticsReport> {
    full_report_with(h, &ReportOptions::default(), seed)
}

/// Every diagnostic for one matrix. `h` holds raw activations; isotropy and
/// the spectrum use its row-normalized form.
pub fn full_report_with(
    h: &RepresentationMatrix,
    opts: &ReportOptions,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let raw = h.as_raw();
    let z = h.normalize_rows()?;
    let spec = repr::spectrum(&z, SpectrumPath::Auto)?;
    let value = entropy::vne(&spec);

    let iso = isotropy_profile(&z, opts.probes, opts.refine_steps, seed)?;
    let isotropy = IsotropySummary {
        mean: iso.mean(),
        min: iso.min(),
        values: opts.keep_values.then(|| iso.normalized_values.clone()),
    };

    let disentanglement = match component_similarity_profile(&raw, opts.max_pairs, seed) {
        Ok(sim) => Some(DisentanglementSummary {
            mean_abs: sim.mean_abs(),
            p95: sim.p95_abs(),
            values: opts.keep_values.then(|| sim.values.clone()),
        }),
        Err(Error::TooFewColumns { .. }) => None,
        Err(e) => return Err(e),
    };

    Ok(DiagnosticsReport {
        entropy: value,
        spectrum_log10: spectrum_log10(&spec),
        rank_surrogate: rank_surrogate(&spec, opts.energy)?,
        rank_bound_gap: rank_bound_gap(&spec, opts.eps_rank)?,
        isotropy,
        disentanglement,
        dead_units: dead_units(&raw, opts.dead_threshold).count,
    })
}

pub fn spectrum_log10(spec: &Spectrum) -> Vec<Option<f64>> {
    spec.eigenvalues()
        .iter()
        .map(|&x| (x > DROP_THRESHOLD).then(|| x.log10()))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Nearest-rank percentile, `q` in `(0, 1]`.
fn percentile(mut xs: Vec<f64>, q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let rank = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn spec(values: &[f64]) -> Spectrum {
        Spectrum::from_eigenvalues(values.to_vec()).unwrap()
    }

    // Exact cumulative count using integer-scaled eigenvalues.
    fn cumulative_oracle(numerators: &[u64], denom: u64, energy_num: u64, energy_den: u64) -> usize {
        let mut acc = 0u64;
        for (k, &x) in numerators.iter().enumerate() {
            acc += x;
            if acc * energy_den >= energy_num * denom {
                return k + 1;
            }
        }
        numerators.len()
    }

    #[test]
    fn rank_surrogate_examples() {
        assert_eq!(rank_surrogate(&spec(&[1.0, 0.0, 0.0]), 0.99).unwrap(), 1);

        let want = cumulative_oracle(&[70, 20, 9, 1], 100, 99, 100);
        assert_eq!(want, 3);
        assert_eq!(rank_surrogate(&spec(&[0.7, 0.2, 0.09, 0.01]), 0.99).unwrap(), want);

        let want = cumulative_oracle(&[1; 64], 64, 99, 100);
        assert_eq!(want, 64);
        assert_eq!(rank_surrogate(&spec(&[1.0 / 64.0; 64]), 0.99).unwrap(), want);

        assert!(rank_surrogate(&spec(&[1.0]), 0.0).is_err());
        assert!(rank_surrogate(&spec(&[1.0]), 1.5).is_err());
    }

    #[test]
    fn rank_gap_examples() {
        assert!(rank_bound_gap(&spec(&[0.25; 4]), 1e-10).unwrap().abs() < 1e-15);
        assert_eq!(rank_bound_gap(&spec(&[1.0, 0.0, 0.0]), 1e-10).unwrap(), 0.0);
        assert!(matches!(
            rank_bound_gap(&spec(&[0.0, 0.0]), 1e-10),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn rank_gap_is_nonnegative_on_random_spectra() {
        let mut r = rng::seeded(5);
        for _ in 0..1000 {
            let d = 1 + (rng::normal(&mut r).abs() * 10.0) as usize;
            let raw: Vec<f64> = (0..d).map(|_| rng::normal(&mut r).powi(2)).collect();
            let total: f64 = raw.iter().sum();
            let s = spec(&raw.iter().map(|x| x / total).collect::<Vec<_>>());
            assert!(rank_bound_gap(&s, 1e-10).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn isotropy_two_axes_matches_grid_search() {
        let z = RepresentationMatrix::from_normalized(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        // Oracle: dense scan of the angle.
        let steps = 1_000_000;
        let mut best = f64::NEG_INFINITY;
        for k in 0..steps {
            let t = std::f64::consts::TAU * k as f64 / steps as f64;
            best = best.max(t.cos().exp() + t.sin().exp());
        }
        assert!((best - 4.056_3).abs() < 1e-4);

        let profile = isotropy_profile(&z, 512, 200, 1).unwrap();
        assert!((profile.max_estimate - best).abs() < 1e-9);
        let at_axis = partition_function(&z, array![1.0, 0.0].view()) / profile.max_estimate;
        assert!((at_axis - (std::f64::consts::E + 1.0) / best).abs() < 1e-9);
        assert!((at_axis - 0.9167).abs() < 1e-4);
        assert!(profile.normalized_values.iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn isotropy_detects_collapse() {
        let rows = vec![vec![1.0; 8]; 4];
        let z = RepresentationMatrix::from_rows(&rows).unwrap().normalize_rows().unwrap();
        let profile = isotropy_profile(&z, 512, 200, 3).unwrap();
        // Closed form: Z(c) = n exp(cᵀu), maximal at c = u.
        assert!((profile.max_estimate - 4.0 * std::f64::consts::E).abs() < 1e-9);
        assert!(profile.min() < 0.5);
    }

    #[test]
    fn isotropy_orthogonal_frame_matches_monte_carlo() {
        let q = {
            let g = RepresentationMatrix::gaussian(16, 16, 21).into_inner();
            let mut q = Array2::<f64>::zeros((16, 16));
            for i in 0..16 {
                let mut v = g.row(i).to_owned();
                for k in 0..i {
                    let p = v.dot(&q.row(k));
                    v.scaled_add(-p, &q.row(k));
                }
                let n = v.dot(&v).sqrt();
                q.row_mut(i).assign(&(v / n));
            }
            q
        };
        let z = RepresentationMatrix::from_normalized(q).unwrap();
        let profile = isotropy_profile(&z, 512, 200, 4).unwrap();
        // Max is attained at c ∝ Σ z_i: 16 exp(1/4).
        let max = 16.0 * 0.25f64.exp();
        assert!((profile.max_estimate - max).abs() < 1e-9);
        // For an orthonormal frame Z(c) = Σ_k exp(c_k) in frame coordinates,
        // so the mean over uniform c is estimated with an independent sampler.
        let mut r = rng::seeded(999);
        let trials = 200_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let c = rng::unit_vector(&mut r, 16);
            acc += c.iter().map(|x| x.exp()).sum::<f64>();
        }
        let oracle = acc / trials as f64 / max;
        assert!((oracle - 0.8034).abs() < 2e-3, "{oracle}");
        assert!((profile.mean() - oracle).abs() < 5e-3);
    }

    #[test]
    fn isotropy_requires_two_probes() {
        let z = RepresentationMatrix::gaussian(3, 3, 0).normalize_rows().unwrap();
        assert!(isotropy_profile(&z, 1, 10, 0).is_err());
    }

    #[test]
    fn similarity_duplicate_columns() {
        let mut a = RepresentationMatrix::gaussian(20, 7, 2).into_inner();
        let col = a.column(2).to_owned();
        a.column_mut(5).assign(&col);
        let a = RepresentationMatrix::new(a).unwrap();
        let profile = component_similarity_profile(&a, usize::MAX, 0).unwrap();
        assert_eq!(profile.pair_count, 21);
        let k = profile.pairs.iter().position(|&p| p == (2, 5)).unwrap();
        assert!((profile.values[k] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_orthogonal_columns() {
        let a = RepresentationMatrix::new(Array2::eye(6)).unwrap();
        let profile = component_similarity_profile(&a, 2000, 0).unwrap();
        assert!(profile.values.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn similarity_of_nonnegative_activations() {
        let a = RepresentationMatrix::gaussian(30, 40, 3)
            .into_inner()
            .mapv(|x| x.max(0.0));
        let a = RepresentationMatrix::new(a).unwrap();
        let profile = component_similarity_profile(&a, 100, 9).unwrap();
        assert_eq!(profile.pair_count, 100);
        let view = a.view();
        for (&(i, j), &v) in profile.pairs.iter().zip(&profile.values) {
            assert!(i < j);
            assert!((0.0..=1.0).contains(&v));
            let ci = view.column(i);
            let cj = view.column(j);
            let mut dot = 0.0;
            let mut ni = 0.0;
            let mut nj = 0.0;
            for k in 0..30 {
                dot += ci[k] * cj[k];
                ni += ci[k] * ci[k];
                nj += cj[k] * cj[k];
            }
            assert!((v - dot / (ni.sqrt() * nj.sqrt())).abs() < 1e-12);
        }
        let mut sorted = profile.pairs.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
    }

    #[test]
    fn similarity_skips_dead_columns() {
        let mut a = RepresentationMatrix::gaussian(5, 3, 1).into_inner();
        a.column_mut(1).fill(0.0);
        let a = RepresentationMatrix::new(a.clone()).unwrap();
        let profile = component_similarity_profile(&a, 10, 0).unwrap();
        assert_eq!(profile.dead_columns, vec![1]);
        assert_eq!(profile.pairs, vec![(0, 2)]);

        let mut b = Array2::zeros((4, 3));
        b[[0, 0]] = 1.0;
        let b = RepresentationMatrix::new(b).unwrap();
        assert!(matches!(
            component_similarity_profile(&b, 10, 0),
            Err(Error::TooFewColumns { live: 1 })
        ));
    }

    #[test]
    fn dead_unit_examples() {
        let mut a = RepresentationMatrix::gaussian(10, 100, 4).into_inner();
        assert_eq!(dead_units(&RepresentationMatrix::new(a.clone()).unwrap(), 1e-7).count, 0);
        let mut r = rng::seeded(8);
        let zeroed: Vec<usize> = {
            let mut v = index::sample(&mut r, 100, 37).into_vec();
            v.sort_unstable();
            v
        };
        for &j in &zeroed {
            a.column_mut(j).fill(0.0);
        }
        let dead = dead_units(&RepresentationMatrix::new(a).unwrap(), 1e-7);
        assert_eq!(dead.count, 37);
        assert_eq!(dead.indices, zeroed);

        let ones = RepresentationMatrix::new(Array2::ones((3, 4))).unwrap();
        assert_eq!(dead_units(&ones, 1e-7).count, 0);
    }

    #[test]
    fn total_correlation_examples() {
        let d = 5;
        let iso = SymMatrix::new(Array2::eye(d) / d as f64).unwrap();
        assert!(gaussian_total_correlation(&iso).unwrap().abs() < 1e-12);

        let rho = 0.5;
        let m = SymMatrix::new(array![[1.0, rho], [rho, 1.0]]).unwrap();
        let want = -0.5 * (1.0f64 - rho * rho).ln();
        assert!((want - 0.143_841).abs() < 1e-6);
        assert!((gaussian_total_correlation(&m).unwrap() - want).abs() < 1e-14);

        let singular = SymMatrix::new(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            gaussian_total_correlation(&singular),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn total_correlation_of_random_correlation_matrix() {
        let a = RepresentationMatrix::gaussian(6, 10, 12).into_inner();
        let s = a.dot(&a.t());
        let scale: Vec<f64> = (0..6).map(|i| s[[i, i]].sqrt()).collect();
        let corr = Array2::from_shape_fn((6, 6), |(i, j)| s[[i, j]] / (scale[i] * scale[j]));
        let corr = SymMatrix::symmetrized(corr).unwrap();
        let tc = gaussian_total_correlation(&corr).unwrap();
        assert!(tc >= 0.0);
        // Oracle: ln det by Gaussian elimination (no eigensolver).
        let mut m = corr.view().to_owned();
        let mut log_det = 0.0;
        for k in 0..6 {
            log_det += m[[k, k]].ln();
            for i in (k + 1)..6 {
                let f = m[[i, k]] / m[[k, k]];
                for j in k..6 {
                    m[[i, j]] -= f * m[[k, j]];
                }
            }
        }
        assert!((tc - (-0.5 * log_det)).abs() < 1e-10);
    }

    #[test]
    fn report_on_orthonormal_rows() {
        let h = RepresentationMatrix::new(Array2::eye(6) * 3.0).unwrap();
        let report = full_report(&h, 0).unwrap();
        assert!((report.entropy.entropy - 6f64.ln()).abs() < 1e-12);
        assert!(report.rank_bound_gap.abs() < 1e-12);
        assert_eq!(report.dead_units, 0);
        assert_eq!(report.rank_surrogate, 6);
    }

    #[test]
    fn report_on_collapse() {
        let h = RepresentationMatrix::from_rows(&vec![vec![0.5, 1.0, -2.0, 0.1]; 10]).unwrap();
        let report = full_report(&h, 0).unwrap();
        assert_eq!(report.entropy.entropy, 0.0);
        assert_eq!(report.rank_surrogate, 1);
        assert_eq!(report.spectrum_log10[1], None);
    }

    #[test]
    fn report_matches_constituents() {
        let h = RepresentationMatrix::gaussian(20, 12, 13);
        let report = full_report(&h, 77).unwrap();
        let z = h.normalize_rows().unwrap();
        let s = repr::spectrum(&z, SpectrumPath::Auto).unwrap();
        assert_eq!(report.entropy, entropy::vne(&s));
        assert_eq!(report.rank_surrogate, rank_surrogate(&s, 0.99).unwrap());
        let iso = isotropy_profile(&z, 512, 200, 77).unwrap();
        assert_eq!(report.isotropy.mean, iso.mean());
        let sim = component_similarity_profile(&h, 2000, 77).unwrap();
        assert_eq!(report.disentanglement.as_ref().unwrap().mean_abs, sim.mean_abs());
        assert_eq!(report, full_report(&h, 77).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rank_surrogate_is_monotone(raw in proptest::collection::vec(0.0f64..1.0, 1..20), e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
            prop_assume!(raw.iter().sum::<f64>() > 0.0);
            let s = spec(&raw);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(rank_surrogate(&s, lo).unwrap() <= rank_surrogate(&s, hi).unwrap());
        }

        #[test]
        fn diagonal_covariance_has_zero_tc(diag in proptest::collection::vec(1e-3f64..10.0, 1..12)) {
            let m = SymMatrix::from_diagonal(&diag);
            prop_assert!(gaussian_total_correlation(&m).unwrap().abs() < 1e-12);
        }

        #[test]
        fn isotropy_never_exceeds_one(n in 1usize..12, d in 1usize..12, seed in any::<u64>()) {
            let z = RepresentationMatrix::gaussian(n, d, seed).normalize_rows().unwrap();
            let p = isotropy_profile(&z, 16, 20, seed).unwrap();
            prop_assert!(p.normalized_values.iter().all(|&v| v <= 1.0 + 1e-12 && v > 0.0));
        }
    }
}
