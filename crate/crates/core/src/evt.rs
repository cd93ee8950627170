//! Extreme-value side: scale plans, box eigenvalues and the centering `a_L`,
//! rescaled point clouds, the Poisson test battery and per-sample diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sample, PotentialField, TailSpec};
use crate::lattice::{scale_domain, ContinuumShape, LatticeDomain, Site};
use crate::operator::{principal_eigenvalue, log_amplitudes, top_eigs, Hamiltonian, SpectralResult, DEFAULT_TOL};
use crate::verify::TAIL_KEEP;
use crate::rng::Stream;
use crate::stats::{
    bootstrap_se, chi_square_parts, distance_correlation_test, ks_test, mean, poisson_pmf_cells, quantile, quantile_sorted,
    TestResult,
};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScaleOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_l: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_l: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanRatios {
    /// `R_L / log log L`.
    pub r_over_loglog: f64,
    /// `N_L / R_L`.
    pub n_over_r: f64,
    /// `log N_L / log L`.
    pub logn_over_logl: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalePlan {
    pub l: u64,
    pub d: usize,
    pub r_l: u64,
    pub n_l: u64,
    pub m_l: usize,
    pub pitch: u64,
    /// Lower corner of each box wholly inside `D_L`.
    pub box_origins: Vec<Vec<i64>>,
    /// Number of sites of `D_L`.
    pub domain_sites: usize,
    /// Lebesgue volume of the continuum shape.
    pub volume: f64,
    pub ratios: PlanRatios,
}

pub fn default_r_l(l: u64) -> u64 {
    ((l as f64).ln().ln().powi(2)).ceil().max(1.0) as u64
}

pub fn default_n_l(l: u64) -> u64 {
    let lf = l as f64;
    (lf.ln().powi(3).ceil() as u64).min((lf / 4.0).ceil() as u64).max(1)
}

/// Box grid of pitch `N_L + 1` anchored at the lower corner of `D_L`'s bounding box.
pub fn make_plan(shape: &ContinuumShape, l: u64, overrides: &ScaleOverrides) -> Result<(ScalePlan, LatticeDomain)> {
    if l < 3 {
        return Err(Error::Plan(format!("L={l} too small")));
    }
    let domain = scale_domain(shape, l)?;
    let d = domain.dim();
    let r_l = overrides.r_l.unwrap_or_else(|| default_r_l(l));
    let n_l = overrides.n_l.unwrap_or_else(|| default_n_l(l));
    if r_l == 0 || n_l == 0 {
        return Err(Error::Plan("R_L and N_L must be positive".into()));
    }
    if n_l >= l {
        return Err(Error::Plan(format!("N_L={n_l} must satisfy log N_L < log L={l}")));
    }
    let pitch = n_l + 1;
    let (lo, hi) = domain.bounding_box().expect("nonempty domain");
    let counts: Vec<i64> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1 + 1) / pitch as i64).collect();
    let mut box_origins = Vec::new();
    let total: i64 = counts.iter().product();
    for flat in 0..total.max(0) {
        let mut rem = flat;
        let mut origin = vec![0i64; d];
        for axis in (0..d).rev() {
            origin[axis] = lo[axis] + (rem % counts[axis]) * pitch as i64;
            rem /= counts[axis];
        }
        if box_inside(&domain, &origin, n_l) {
            box_origins.push(origin);
        }
    }
    box_origins.sort();
    let m_l = box_origins.len();
    if m_l < 2 {
        return Err(Error::Plan(format!("only {m_l} boxes of side {n_l} fit at L={l}")));
    }
    let lf = l as f64;
    let plan = ScalePlan {
        l,
        d,
        r_l,
        n_l,
        m_l,
        pitch,
        box_origins,
        domain_sites: domain.len(),
        volume: shape.volume(),
        ratios: PlanRatios {
            r_over_loglog: r_l as f64 / lf.ln().ln(),
            n_over_r: n_l as f64 / r_l as f64,
            logn_over_logl: (n_l as f64).ln() / lf.ln(),
        },
    };
    Ok((plan, domain))
}

fn box_inside(domain: &LatticeDomain, origin: &[i64], side: u64) -> bool {
    let b = LatticeDomain::cuboid(origin, &vec![side as usize; origin.len()]);
    b.sites().iter().all(|s| domain.contains(s))
}

impl ScalePlan {
    pub fn boxes(&self) -> Vec<LatticeDomain> {
        self.box_origins.iter().map(|o| LatticeDomain::cuboid(o, &vec![self.n_l as usize; self.d])).collect()
    }

    /// `(N_L / L)^d`.
    pub fn tail_probability(&self) -> f64 {
        (self.n_l as f64 / self.l as f64).powi(self.d as i32)
    }
}

/// Principal Dirichlet eigenvalue of every box of the plan, in box order.
pub fn box_eigenvalues(field: &PotentialField, plan: &ScalePlan) -> Result<Vec<f64>> {
    plan.boxes()
        .par_iter()
        .map(|b| {
            let f = field.restrict(b)?;
            principal_eigenvalue(&Hamiltonian::from_potential(b, f.values())?)
        })
        .collect()
}

/// `n_mc` independent principal eigenvalues of a box of side `n`.
pub fn box_sample(spec: &TailSpec, d: usize, n: u64, n_mc: usize, seed: u64) -> Result<Vec<f64>> {
    let b = LatticeDomain::cuboid(&vec![0; d], &vec![n as usize; d]);
    let root = Stream::new(seed);
    (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let f = sample(&b, spec, root.derive(j as u64).key())?;
            principal_eigenvalue(&Hamiltonian::from_potential(&b, f.values())?)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenteringEstimate {
    pub a_l: f64,
    /// Bootstrap standard error.
    pub se: f64,
    /// Upper-tail probability `(N_L/L)^d` the quantile targets.
    pub tail: f64,
    pub n_mc: usize,
}

pub const BOOTSTRAP_REPS: usize = 200;

/// Monte Carlo `(1 − (N_L/L)^d)`-quantile of the box principal eigenvalue.
pub fn estimate_a_l(spec: &TailSpec, plan: &ScalePlan, n_mc: usize, seed: u64) -> Result<CenteringEstimate> {
    let (est, _) = estimate_a_l_with_sample(spec, plan, n_mc, seed)?;
    Ok(est)
}

/// As [`estimate_a_l`], also returning the sorted Monte Carlo sample.
pub fn estimate_a_l_with_sample(spec: &TailSpec, plan: &ScalePlan, n_mc: usize, seed: u64) -> Result<(CenteringEstimate, Vec<f64>)> {
    let tail = plan.tail_probability();
    let required = (1.0 / tail).ceil() as usize;
    if n_mc < required {
        return Err(Error::Resolution { required, got: n_mc });
    }
    let mut xs = box_sample(spec, plan.d, plan.n_l, n_mc, seed)?;
    xs.sort_by(f64::total_cmp);
    let p = 1.0 - tail;
    let a_l = quantile_sorted(&xs, p);
    let mut bs = Stream::new(seed).derive(0xB00);
    let se = bootstrap_se(&xs, BOOTSTRAP_REPS, &mut bs, |v| quantile(v, p));
    Ok((CenteringEstimate { a_l, se, tail, n_mc }, xs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub position: Vec<f64>,
    pub height: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointCloud {
    /// Decreasing in height.
    pub points: Vec<CloudPoint>,
    pub l: u64,
    pub a_l: f64,
    pub rho: f64,
    /// All points of the process with height above this value are present.
    pub complete_above: f64,
    pub volume: f64,
}

/// Maps eigenpairs to `(X_k/L, (λ_k − a_L) log|D_L| / ρ)`.
pub fn rescale(spectral: &SpectralResult, plan: &ScalePlan, a_l: f64, rho: f64) -> Result<PointCloud> {
    if !a_l.is_finite() {
        return Err(Error::InvalidParameter("a_L must be finite".into()));
    }
    let log_size = (plan.domain_sites as f64).ln();
    let lf = plan.l as f64;
    let mut points: Vec<CloudPoint> = spectral
        .eigenvalues
        .iter()
        .zip(&spectral.centers)
        .map(|(lam, x)| CloudPoint {
            position: x.coords().iter().map(|&c| c as f64 / lf).collect(),
            height: (lam - a_l) * log_size / rho,
        })
        .collect();
    points.sort_by(|p, q| q.height.total_cmp(&p.height));
    let complete_above = points.last().map_or(f64::INFINITY, |p| p.height);
    Ok(PointCloud { points, l: plan.l, a_l, rho, complete_above, volume: plan.volume })
}

/// A cloud drawn from the limit law: Poisson on `shape × (floor, ∞)` with
/// intensity `dx ⊗ e^{−h} dh`.
pub fn synthetic_cloud(shape: &ContinuumShape, floor: f64, stream: &mut Stream) -> PointCloud {
    let vol = shape.volume();
    let (lo, hi) = shape.bounds();
    let mut points = Vec::new();
    let mut gamma = 0.0;
    loop {
        gamma += stream.exp1();
        let h = -(gamma / vol).ln();
        if h < floor {
            break;
        }
        let position = loop {
            let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * stream.open01()).collect();
            if shape.contains(&p) {
                break p;
            }
        };
        points.push(CloudPoint { position, height: h });
    }
    PointCloud { points, l: 0, a_l: 0.0, rho: 1.0, complete_above: floor, volume: vol }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryOptions {
    /// Leading points per cloud entering the spacing test.
    pub top_k: usize,
    pub windows: Vec<(f64, f64)>,
    /// Bins per axis for the position test.
    pub bins: usize,
    pub max_dcor_points: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            top_k: 5,
            windows: vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 3.0)],
            bins: 5,
            max_dcor_points: 400,
            permutations: 99,
            seed: 0xBA77,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryReport {
    pub clouds: usize,
    /// Spacings `W_k − W_{k−1}`, `W_k = |D| e^{−h_k}`, against Exp(1).
    pub spacings: TestResult,
    pub windows: TestResult,
    pub positions: TestResult,
    pub independence: TestResult,
}

impl BatteryReport {
    pub fn tests(&self) -> [TestResult; 4] {
        [self.spacings, self.windows, self.positions, self.independence]
    }

    /// Family-wise test at `level` (Bonferroni over the four tests).
    pub fn passes(&self, level: f64) -> bool {
        self.tests().iter().all(|t| t.p_value >= level / 4.0)
    }
}

pub const MIN_CLOUDS: usize = 100;

/// Exp(1) spacings of `W_k = |D| e^{−h_k}` for the leading `top_k` points of each cloud.
pub fn spacings(clouds: &[PointCloud], top_k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for c in clouds {
        let mut prev = 0.0;
        for p in c.points.iter().take(top_k) {
            let w = c.volume * (-p.height).exp();
            out.push(w - prev);
            prev = w;
        }
    }
    out
}

pub fn spacing_ks(clouds: &[PointCloud], top_k: usize) -> TestResult {
    ks_test(&spacings(clouds, top_k), |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })
}

/// KS statistic of the spacings with a bootstrap standard error over clouds.
pub fn spacing_ks_with_se(clouds: &[PointCloud], top_k: usize, reps: usize, seed: u64) -> (f64, f64) {
    let stat = spacing_ks(clouds, top_k).statistic;
    let mut s = Stream::new(seed);
    let n = clouds.len();
    let reps: Vec<f64> = (0..reps)
        .map(|_| {
            let resampled: Vec<PointCloud> = (0..n).map(|_| clouds[(s.next_raw() % n as u64) as usize].clone()).collect();
            spacing_ks(&resampled, top_k).statistic
        })
        .collect();
    (stat, crate::stats::std_dev(&reps))
}

pub fn poisson_tests(clouds: &[PointCloud], shape: &ContinuumShape, opts: &BatteryOptions) -> Result<BatteryReport> {
    if clouds.len() < MIN_CLOUDS {
        return Err(Error::InsufficientEnsemble { required: MIN_CLOUDS, got: clouds.len() });
    }
    let spacings = spacing_ks(clouds, opts.top_k);

    let mut stat = 0.0;
    let mut dof = 0usize;
    for &(lo, hi) in &opts.windows {
        let counts: Vec<u64> = clouds
            .iter()
            .filter(|c| c.complete_above <= lo)
            .map(|c| c.points.iter().filter(|p| p.height >= lo && p.height < hi).count() as u64)
            .collect();
        if counts.is_empty() {
            continue;
        }
        let vol = clouds[0].volume;
        let (s, k) = poisson_pmf_cells(&counts, vol * ((-lo).exp() - (-hi).exp()));
        stat += s;
        dof += k;
    }
    let windows = chi_square_parts(stat, dof);

    let (lo, hi) = shape.bounds();
    let d = lo.len();
    let cells = opts.bins.pow(d as u32);
    let cell_of = |p: &[f64]| -> usize {
        p.iter().zip(lo.iter().zip(&hi)).fold(0, |acc, (x, (a, b))| {
            let j = (((x - a) / (b - a)) * opts.bins as f64).floor().clamp(0.0, opts.bins as f64 - 1.0) as usize;
            acc * opts.bins + j
        })
    };
    let weights = cell_weights(shape, opts.bins, &cell_of);
    let mut observed = vec![0.0; cells];
    let mut pooled: Vec<(&[f64], f64)> = Vec::new();
    for c in clouds {
        for p in &c.points {
            observed[cell_of(&p.position)] += 1.0;
            pooled.push((&p.position, p.height));
        }
    }
    let total: f64 = observed.iter().sum();
    let expected: Vec<f64> = weights.iter().map(|w| w * total).collect();
    let positions = crate::stats::chi_square(&observed, &expected, 0);

    let stride = pooled.len().div_ceil(opts.max_dcor_points).max(1);
    let picked: Vec<&(&[f64], f64)> = pooled.iter().step_by(stride).collect();
    let xs: Vec<Vec<f64>> = picked.iter().map(|p| p.0.to_vec()).collect();
    let ys: Vec<Vec<f64>> = picked.iter().map(|p| vec![p.1]).collect();
    let independence = distance_correlation_test(&xs, &ys, opts.permutations, &mut Stream::new(opts.seed));

    Ok(BatteryReport { clouds: clouds.len(), spacings, windows, positions, independence })
}

/// Fraction of the shape's volume in each position cell, by midpoint quadrature.
fn cell_weights(shape: &ContinuumShape, bins: usize, cell_of: &dyn Fn(&[f64]) -> usize) -> Vec<f64> {
    let (lo, hi) = shape.bounds();
    let d = lo.len();
    let per_axis = (bins * 40).min(match d {
        1 => 4000,
        2 => 400,
        _ => 60,
    });
    let mut w = vec![0.0; bins.pow(d as u32)];
    let total = per_axis.pow(d as u32);
    let mut p = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..d).rev() {
            let j = rem % per_axis;
            rem /= per_axis;
            p[axis] = lo[axis] + (hi[axis] - lo[axis]) * (j as f64 + 0.5) / per_axis as f64;
        }
        if shape.contains(&p) {
            w[cell_of(&p)] += 1.0;
        }
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// `max ξ − λ^(1)`.
pub fn chi_gap_statistic(spectral: &SpectralResult, field: &PotentialField) -> f64 {
    field.max() - spectral.eigenvalues[0]
}

/// `Σ_{|z − X_k| ≤ r} ψ_k(z)²` for unit `ψ_k` (`k` from 1).
pub fn localization_mass(domain: &LatticeDomain, spectral: &SpectralResult, k: usize, r: u64) -> Result<f64> {
    if k == 0 || k > spectral.len() {
        return Err(Error::InvalidParameter(format!("k={k} outside the computed spectrum")));
    }
    let psi = &spectral.eigenvectors[k - 1];
    let center = &spectral.centers[k - 1];
    let norm: f64 = psi.iter().map(|v| v * v).sum();
    let inside: f64 = domain.sites().iter().zip(psi).filter(|(s, _)| s.l1(center) <= r).map(|(_, v)| v * v).sum();
    Ok(inside / norm)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Decay rate `c₂` on `|z − X_k| < far_from`.
    pub near_slope: f64,
    /// `log c₁`.
    pub near_intercept: f64,
    pub far_slope: Option<f64>,
    pub far_from: f64,
    pub far_omitted: bool,
}

fn lsq(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Least-squares fit of `log|ψ_k|` against `|z − X_k|`, separately below and
/// beyond `far_from` (typically `log L`).
pub fn decay_fit(field: &PotentialField, spectral: &SpectralResult, k: usize, far_from: f64) -> Result<DecayFit> {
    if k == 0 || k > spectral.len() {
        return Err(Error::InvalidParameter(format!("k={k} outside the computed spectrum")));
    }
    let domain = field.domain();
    let h = Hamiltonian::from_potential(domain, field.values())?;
    let logs = log_amplitudes(&h, spectral.eigenvalues[k - 1], &spectral.eigenvectors[k - 1], TAIL_KEEP);
    let center = &spectral.centers[k - 1];
    let mut near = Vec::new();
    let mut far = Vec::new();
    for (s, &l) in domain.sites().iter().zip(&logs) {
        if l == f64::NEG_INFINITY {
            continue;
        }
        let r = s.l1(center) as f64;
        if r < far_from {
            near.push((r, l));
        } else {
            far.push((r, l));
        }
    }
    let (ns, ni) = lsq(&near).ok_or_else(|| Error::DegenerateDomain("too few sites for the near fit".into()))?;
    let distinct_far = {
        let mut r: Vec<u64> = far.iter().map(|p| p.0 as u64).collect();
        r.sort_unstable();
        r.dedup();
        r.len()
    };
    let far_slope = if distinct_far >= 3 { lsq(&far).map(|f| -f.0) } else { None };
    Ok(DecayFit { near_slope: -ns, near_intercept: ni, far_omitted: far_slope.is_none(), far_slope, far_from })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionStability {
    pub p_big: f64,
    pub p_small: f64,
    /// `−log(1 − p_big)`.
    pub lhs: f64,
    /// `(N/R)^d p_small`.
    pub scaled: f64,
    /// Smallest `c ≥ 0` with `lhs ≥ (1 − cR/N) scaled`.
    pub c: f64,
}

/// Compares box tails at sides `n` and `r` for threshold `a`.
pub fn partition_stability(spec: &TailSpec, d: usize, n: u64, r: u64, a: f64, n_mc: usize, seed: u64) -> Result<PartitionStability> {
    let big = box_sample(spec, d, n, n_mc, Stream::new(seed).derive(1).key())?;
    let small = box_sample(spec, d, r, n_mc, Stream::new(seed).derive(2).key())?;
    let frac = |v: &[f64]| v.iter().filter(|&&x| x >= a).count() as f64 / v.len() as f64;
    let p_big = frac(&big);
    let p_small = frac(&small);
    let lhs = -(1.0 - p_big).ln();
    let ratio = (n as f64 / r as f64).powi(d as i32);
    let scaled = ratio * p_small;
    let c = if scaled > 0.0 { ((1.0 - lhs / scaled) * n as f64 / r as f64).max(0.0) } else { 0.0 };
    Ok(PartitionStability { p_big, p_small, lhs, scaled, c })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailRatio {
    pub s: f64,
    pub ratio: f64,
    pub se: f64,
    pub target: f64,
}

/// `P(λ_B ≥ a_L + s b_L) / (N_L/L)^d` against `e^{−s}`, with `b_L = ρ/(d log L)`,
/// from a box Monte Carlo sample.
pub fn max_order_tail(sample: &[f64], plan: &ScalePlan, a_l: f64, rho: f64, s_values: &[f64]) -> Vec<TailRatio> {
    let b_l = rho / (plan.d as f64 * (plan.l as f64).ln());
    let tail = plan.tail_probability();
    let n = sample.len() as f64;
    s_values
        .iter()
        .map(|&s| {
            let p = sample.iter().filter(|&&x| x >= a_l + s * b_l).count() as f64 / n;
            TailRatio { s, ratio: p / tail, se: (p * (1.0 - p) / n).sqrt() / tail, target: (-s).exp() }
        })
        .collect()
}

/// One ensemble member: field on `D_L`, top-k eigenpairs and diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub l: u64,
    pub eigenvalues: Vec<f64>,
    pub centers: Vec<Site>,
    pub max_field: f64,
    pub chi_gap: f64,
}

pub fn sample_spectrum(domain: &LatticeDomain, spec: &TailSpec, k: usize, seed: u64) -> Result<(PotentialField, SpectralResult)> {
    if k > domain.len() {
        return Err(Error::InvalidParameter(format!("k={k} exceeds |D_L|={}", domain.len())));
    }
    let field = sample(domain, spec, seed)?;
    let sr = top_eigs(&Hamiltonian::from_potential(domain, field.values())?, k, DEFAULT_TOL)?;
    Ok((field, sr))
}

pub fn sample_record(l: u64, field: &PotentialField, sr: &SpectralResult) -> SampleRecord {
    SampleRecord {
        seed: field.seed,
        l,
        eigenvalues: sr.eigenvalues.clone(),
        centers: sr.centers.clone(),
        max_field: field.max(),
        chi_gap: chi_gap_statistic(sr, field),
    }
}

/// Seed of ensemble member `j`.
pub fn member_seed(seed: u64, l: u64, j: usize) -> u64 {
    Stream::new(seed).derive(l).derive(j as u64).key()
}

/// Mean of a slice, re-exported for report assembly.
pub fn ensemble_mean(x: &[f64]) -> f64 {
    mean(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(d: usize) -> ContinuumShape {
        ContinuumShape::unit_cube(d)
    }

    #[test]
    fn plan_examples() {
        let (p, dom) = make_plan(&unit(1), 10_000, &ScaleOverrides { n_l: Some(4), r_l: None }).unwrap();
        assert_eq!(dom.len(), 9999);
        assert_eq!(p.m_l, 2000);
        assert_eq!(p.box_origins[0], vec![1]);
        assert_eq!(p.box_origins[1], vec![6]);
        assert!(make_plan(&unit(1), 100, &ScaleOverrides { n_l: Some(100), r_l: None }).is_err());
        let (p, _) = make_plan(&unit(1), 2000, &ScaleOverrides { n_l: Some(100), r_l: Some(4) }).unwrap();
        assert_eq!(p.m_l, 19);
    }

    #[test]
    fn default_scales() {
        assert_eq!(default_r_l(10_000), 5);
        assert_eq!(default_n_l(10_000), 782);
        assert_eq!(default_n_l(100), 25);
    }

    #[test]
    fn constant_boxes() {
        let (plan, dom) = make_plan(&ContinuumShape::Box { lo: vec![0.0], hi: vec![0.7] }, 10, &ScaleOverrides { n_l: Some(2), r_l: None }).unwrap();
        let f = PotentialField::from_values(dom.clone(), vec![0.0; dom.len()]).unwrap();
        let ev = box_eigenvalues(&f, &plan).unwrap();
        assert_eq!(ev.len(), plan.m_l);
        for v in ev {
            assert_abs_diff_eq!(v, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rescale_examples() {
        let (plan, dom) = make_plan(&unit(1), 100, &ScaleOverrides::default()).unwrap();
        let log_size = (dom.len() as f64).ln();
        let rho = 1.5;
        let a_l = 3.0;
        let sr = SpectralResult {
            eigenvalues: vec![a_l + rho / log_size, a_l],
            eigenvectors: vec![vec![], vec![]],
            centers: vec![Site::from(50), Site::from(10)],
            residuals: vec![0.0, 0.0],
        };
        let c = rescale(&sr, &plan, a_l, rho).unwrap();
        assert_abs_diff_eq!(c.points[0].height, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.points[1].height, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.points[0].position[0], 0.5);
    }

    #[test]
    fn exponential_vector_fit() {
        let dom = LatticeDomain::interval(-30, 30);
        let psi: Vec<f64> = dom.sites().iter().map(|s| (-0.7 * s.l1(&Site::from(0)) as f64).exp()).collect();
        // potential making psi an exact eigenvector at eigenvalue 0
        let xi: Vec<f64> = dom
            .sites()
            .iter()
            .map(|s| match s.0[0] {
                0 => 2.0 - 2.0 * (-0.7f64).exp(),
                -30 | 30 => 2.0 - 0.7f64.exp(),
                _ => 2.0 - 2.0 * 0.7f64.cosh(),
            })
            .collect();
        let field = PotentialField::from_values(dom.clone(), xi).unwrap();
        let h = Hamiltonian::from_potential(&dom, field.values()).unwrap();
        assert!(h.residual(0.0, &psi) < 1e-14);
        let sr = SpectralResult { eigenvalues: vec![0.0], eigenvectors: vec![psi], centers: vec![Site::from(0)], residuals: vec![0.0] };
        let fit = decay_fit(&field, &sr, 1, 10.0).unwrap();
        assert_abs_diff_eq!(fit.near_slope, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.far_slope.unwrap(), 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(localization_mass(&dom, &sr, 1, 100).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn synthetic_cloud_heights_above_floor() {
        let mut s = Stream::new(1);
        let c = synthetic_cloud(&unit(2), -3.0, &mut s);
        assert!(c.points.iter().all(|p| p.height >= -3.0 && p.position.iter().all(|x| *x > 0.0 && *x < 1.0)));
        assert!(c.points.windows(2).all(|w| w[0].height >= w[1].height));
    }
}
