//! Deterministic checkers for the truncation, ℓ²-decay, martingale,
//! eigenfunction-decay and coupling statements. Each returns a
//! [`CheckReport`]; violated hypotheses are reported as inapplicable.

pub mod campaigns;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::lattice::{boundary, LatticeDomain, Site};
use crate::operator::{eigenvalues_above, principal_eigenvalue, log_amplitudes, top_eigenvalues, Hamiltonian, SpectralResult};
use crate::regions::{contracted_distance, extract, UNREACHABLE};
use crate::rng::Stream;

/// Relative slack absorbing floating-point error in every comparison.
pub const SLACK: f64 = 1e-9;

/// `ε_R = 2d(1 + A/2d)^{1−2R}`.
pub fn epsilon_r(d: usize, a: f64, r: u64) -> f64 {
    let d = d as f64;
    2.0 * d * (1.0 + a / (2.0 * d)).powf(1.0 - 2.0 * r as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inapplicable,
    Indeterminate,
}

/// Outcome of one check of `lhs ≤ rhs`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub theorem: String,
    pub instance: Value,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub status: CheckStatus,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckReport {
    fn build(theorem: &str, instance: Value, lhs: f64, rhs: f64, status: CheckStatus, detail: Option<String>) -> Self {
        CheckReport {
            theorem: theorem.to_string(),
            instance,
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: status == CheckStatus::Pass,
            status,
            detail,
        }
    }

    /// Pass iff `lhs ≤ rhs` up to [`SLACK`].
    pub fn compare(theorem: &str, instance: Value, lhs: f64, rhs: f64) -> Self {
        let ok = lhs <= rhs + SLACK * (1.0 + lhs.abs() + rhs.abs());
        let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        Self::build(theorem, instance, lhs, rhs, status, None)
    }

    /// The premise of the implication is false.
    pub fn vacuous(theorem: &str, instance: Value, lhs: f64, rhs: f64) -> Self {
        Self::build(theorem, instance, lhs, rhs, CheckStatus::Pass, Some("vacuous: premise false".into()))
    }

    /// A hypothesis `lhs ≤ rhs` fails.
    pub fn inapplicable(theorem: &str, instance: Value, lhs: f64, rhs: f64, reason: &str) -> Self {
        Self::build(theorem, instance, lhs, rhs, CheckStatus::Inapplicable, Some(reason.to_string()))
    }

    pub fn indeterminate(theorem: &str, instance: Value, reason: &str) -> Self {
        Self::build(theorem, instance, 0.0, 0.0, CheckStatus::Indeterminate, Some(reason.to_string()))
    }

    pub fn with_instance(mut self, instance: Value) -> Self {
        self.instance = instance;
        self
    }

    pub fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

fn describe(domain: &LatticeDomain, field: &PotentialField, params: Value) -> Value {
    json!({
        "d": domain.dim(),
        "sites": domain.len(),
        "bbox": domain.bounding_box(),
        "seed": field.seed,
        "params": params,
    })
}

fn check_field(domain: &LatticeDomain, field: &PotentialField) -> Result<()> {
    if field.domain() != domain {
        return Err(Error::FieldMismatch("field is defined on a different site set".into()));
    }
    Ok(())
}

/// Truncation: `|λ^(k)_D − λ^(k)_U| ≤ ε_R` for every `k` with
/// `λ^(k)_D ≥ λ^(1)_D − A/2`.
pub fn check_truncation(domain: &LatticeDomain, field: &PotentialField, r: u64, a: f64, u: &LatticeDomain) -> Result<CheckReport> {
    check_field(domain, field)?;
    let d = domain.dim();
    let eps = epsilon_r(d, a, r);
    let desc = describe(domain, field, json!({ "R": r, "A": a, "U_sites": u.len() }));
    if eps > a / 2.0 {
        return Ok(CheckReport::inapplicable("truncation", desc, eps, a / 2.0, "eps_R > A/2"));
    }
    if !u.is_subset_of(domain) {
        return Ok(CheckReport::inapplicable("truncation", desc, 1.0, 0.0, "U not inside D"));
    }
    let h_d = Hamiltonian::from_potential(domain, field.values())?;
    let l1 = principal_eigenvalue(&h_d)?;
    let dec = extract(domain, field, r, a, l1)?;
    if !dec.region.is_subset_of(u) {
        return Ok(CheckReport::inapplicable("truncation", desc, 1.0, 0.0, "D_{R,A} not inside U"));
    }
    let eligible = eigenvalues_above(&h_d, l1 - a / 2.0)?;
    let k = eligible.len().min(u.len());
    let uf = field.restrict(u)?;
    let upper = top_eigenvalues(&Hamiltonian::from_potential(u, uf.values())?, k);
    let worst = eligible.iter().zip(&upper).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(CheckReport::compare("truncation", desc, worst, eps).with_detail(format!("{k} eligible eigenvalues")))
}

/// ℓ² mass of an eigenfunction on a low-field set `D′`:
/// `Σ_{D′} ψ² ≤ (1+A/2d)^{2−2R}(1+A′/2d)^{−2}‖ψ‖²`.
#[allow(clippy::too_many_arguments)]
pub fn check_l2_bound(
    domain: &LatticeDomain,
    field: &PotentialField,
    lambda: f64,
    psi: &[f64],
    a: f64,
    a_prime: f64,
    r: u64,
    dprime: &LatticeDomain,
) -> Result<CheckReport> {
    check_field(domain, field)?;
    if psi.len() != domain.len() {
        return Err(Error::FieldMismatch("eigenvector length".into()));
    }
    let dd = domain.dim() as f64;
    let desc = describe(domain, field, json!({ "lambda": lambda, "A": a, "A_prime": a_prime, "R": r, "Dprime_sites": dprime.len() }));
    if !(a > 0.0) || a_prime < a {
        return Ok(CheckReport::inapplicable("l2_bound", desc, a, a_prime, "need A' >= A > 0"));
    }
    if !dprime.is_subset_of(domain) {
        return Ok(CheckReport::inapplicable("l2_bound", desc, 1.0, 0.0, "D' not inside D"));
    }
    let mut idx = Vec::with_capacity(dprime.len());
    for s in dprime.sites() {
        let i = domain.index_of(s).expect("subset");
        if field.value(i) > lambda - a_prime {
            return Ok(CheckReport::inapplicable("l2_bound", desc, field.value(i), lambda - a_prime, "field above lambda - A' on D'"));
        }
        idx.push(i);
    }
    if !dprime.is_empty() {
        for (i, x) in domain.sites().iter().enumerate() {
            if field.value(i) >= lambda - a {
                let dist = dprime.l1_distance_to(x).unwrap_or(u64::MAX);
                if dist < r {
                    return Ok(CheckReport::inapplicable("l2_bound", desc, r as f64, dist as f64, "high site closer than R to D'"));
                }
            }
        }
    }
    let norm2: f64 = psi.iter().map(|v| v * v).sum();
    let lhs: f64 = idx.iter().map(|&i| psi[i] * psi[i]).sum();
    let rhs = (1.0 + a / (2.0 * dd)).powf(2.0 - 2.0 * r as f64) * (1.0 + a_prime / (2.0 * dd)).powi(-2) * norm2;
    Ok(CheckReport::compare("l2_bound", desc, lhs, rhs))
}

/// Result of the Monte Carlo martingale check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub report: CheckReport,
    /// `E[M_{τ∧n}]`, `n = 0..=horizon`.
    pub means: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub target: f64,
}

/// Largest tolerated `|z|` in the martingale check.
pub const MARTINGALE_Z: f64 = 4.0;

const PATH_CHUNK: usize = 1024;

/// Simulates `M_{τ∧n} = ψ(Y_n) Π_{k<n} 2d/(2d + λ − ξ(Y_k))` from `start`.
#[allow(clippy::too_many_arguments)]
pub fn check_martingale(
    domain: &LatticeDomain,
    field: &PotentialField,
    lambda: f64,
    psi: &[f64],
    start: &Site,
    n_paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    check_field(domain, field)?;
    if psi.len() != domain.len() {
        return Err(Error::FieldMismatch("eigenvector length".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let d = domain.dim();
    let two_d = 2.0 * d as f64;
    let root = Stream::new(seed);
    let start_idx = domain.index_of(start);
    let target = start_idx.map_or(0.0, |i| psi[i]);

    let simulate = |p: usize, acc: &mut [(f64, f64)]| {
        let mut s = root.derive(p as u64);
        let mut pos = start.clone();
        let mut idx = start_idx;
        let mut m = target;
        let mut product = 1.0;
        let mut stopped = idx.is_none_or(|i| field.value(i) >= lambda);
        acc[0].0 += m;
        acc[0].1 += m * m;
        for slot in acc.iter_mut().skip(1) {
            if !stopped {
                let i = idx.expect("running walk is inside D");
                product *= two_d / (two_d + lambda - field.value(i));
                let dir = (s.next_raw() % (2 * d) as u64) as usize;
                let mut c = pos.0.clone();
                c[dir / 2] += if dir.is_multiple_of(2) { -1 } else { 1 };
                pos = Site(c);
                idx = domain.index_of(&pos);
                match idx {
                    None => {
                        m = 0.0;
                        stopped = true;
                    }
                    Some(j) => {
                        m = psi[j] * product;
                        stopped = field.value(j) >= lambda;
                    }
                }
            }
            slot.0 += m;
            slot.1 += m * m;
        }
    };
    let chunks: Vec<Vec<(f64, f64)>> = (0..n_paths.div_ceil(PATH_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![(0.0, 0.0); horizon + 1];
            for p in c * PATH_CHUNK..((c + 1) * PATH_CHUNK).min(n_paths) {
                simulate(p, &mut acc);
            }
            acc
        })
        .collect();
    let mut sums = vec![(0.0, 0.0); horizon + 1];
    for ch in &chunks {
        for (t, v) in sums.iter_mut().zip(ch) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    let n = n_paths as f64;
    let mut means = Vec::with_capacity(horizon + 1);
    let mut z_scores = Vec::with_capacity(horizon + 1);
    for (s1, s2) in sums {
        let mean = s1 / n;
        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        let se = (var / n).sqrt();
        let diff = mean - target;
        let z = if se > 0.0 {
            diff / se
        } else if diff.abs() <= 1e-12 * (1.0 + target.abs()) {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        };
        means.push(mean);
        z_scores.push(z);
    }
    let worst = z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max);
    let desc = describe(domain, field, json!({ "lambda": lambda, "start": start, "paths": n_paths, "horizon": horizon, "mc_seed": seed }));
    Ok(MartingaleReport {
        report: CheckReport::compare("martingale", desc, worst, MARTINGALE_Z),
        means,
        z_scores,
        target,
    })
}

/// Largest path product `Π 2d/(2d + λ − ξ(x_j))` over self-avoiding `R`-point
/// paths inside `{ξ < λ}`, as a log; `None` when no such path exists.
pub fn max_log_path_product(domain: &LatticeDomain, field: &PotentialField, lambda: f64, r: u64) -> Option<f64> {
    let two_d = 2.0 * domain.dim() as f64;
    let logf: Vec<Option<f64>> = field
        .values()
        .iter()
        .map(|&x| (x < lambda).then(|| (two_d / (two_d + lambda - x)).ln()))
        .collect();
    let mut best: Option<f64> = None;
    let mut path: Vec<usize> = Vec::with_capacity(r as usize);
    fn dfs(
        domain: &LatticeDomain,
        logf: &[Option<f64>],
        path: &mut Vec<usize>,
        acc: f64,
        left: u64,
        best: &mut Option<f64>,
    ) {
        if left == 0 {
            *best = Some(best.map_or(acc, |b| b.max(acc)));
            return;
        }
        let last = *path.last().expect("nonempty path");
        for u in domain.neighbor_indices(last) {
            if let Some(l) = logf[u] {
                if !path.contains(&u) {
                    path.push(u);
                    dfs(domain, logf, path, acc + l, left - 1, best);
                    path.pop();
                }
            }
        }
    }
    for (i, l) in logf.iter().enumerate() {
        if let Some(l) = l {
            path.push(i);
            dfs(domain, &logf, &mut path, *l, r - 1, &mut best);
            path.pop();
        }
    }
    best
}

/// Largest `R` for which the path hypothesis is searched exhaustively.
pub const EXHAUSTIVE_PATH_LIMIT: u64 = 6;

/// Eigenvector entries above this fraction of the peak are trusted as computed.
pub const TAIL_KEEP: f64 = 1e-6;

/// Per-clause outcome of the decay theorem's hypotheses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayHypotheses {
    pub eps_r: f64,
    pub gap: f64,
    pub gap_ok: bool,
    /// `Some(true)` holds, `Some(false)` fails, `None` undecided.
    pub path_ok: Option<bool>,
    pub max_log_path: Option<f64>,
    pub boundary_ok: bool,
    /// `min over components` of `((gap − 2ε)/8d ∧ 1) − 4e^{…}√|∂C′|`.
    pub boundary_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub report: CheckReport,
    pub hypotheses: Option<DecayHypotheses>,
    /// Index of the component realizing the bound.
    pub component: Option<usize>,
    pub components: usize,
}

/// Exponential decay `|ψ(z)| ≤ e^{−δh d(z,C)}` of the `k`-th eigenfunction
/// (`k` from 1) in the contracted distance, for some component `C`.
/// `spectral` must hold at least `k + 1` pairs unless `k = |D|`.
/// Reported in log form: `lhs = max_z (ln|ψ(z)| + δh d(z,C)) ≤ 0`.
#[allow(clippy::too_many_arguments)]
pub fn check_decay_theorem(
    domain: &LatticeDomain,
    field: &PotentialField,
    spectral: &SpectralResult,
    k: usize,
    r: u64,
    a: f64,
    delta: f64,
    h: f64,
) -> Result<DecayReport> {
    check_field(domain, field)?;
    let n = domain.len();
    if k == 0 || k > spectral.len() {
        return Err(Error::InvalidParameter(format!("k={k} outside the computed spectrum")));
    }
    if spectral.len() == k && k < n {
        return Err(Error::InvalidParameter("need the (k+1)-th eigenvalue for the gap".into()));
    }
    if !(delta > 0.0 && delta < 1.0) || !(h > 0.0) || r < 1 {
        return Err(Error::InvalidParameter(format!("delta={delta}, h={h}, R={r}")));
    }
    let d = domain.dim();
    let dd = d as f64;
    let eps = epsilon_r(d, a, r);
    let lambda = spectral.eigenvalues[k - 1];
    let l1 = spectral.eigenvalues[0];
    let desc = describe(domain, field, json!({ "k": k, "R": r, "A": a, "delta": delta, "h": h, "lambda": lambda }));
    let bare = |report: CheckReport| DecayReport { report, hypotheses: None, component: None, components: 0 };
    if eps >= a / 2.0 {
        return Ok(bare(CheckReport::inapplicable("decay", desc, eps, a / 2.0, "eps_R >= A/2")));
    }
    if lambda < l1 - a / 2.0 + eps {
        return Ok(bare(CheckReport::inapplicable("decay", desc, l1 - a / 2.0 + eps, lambda, "lambda below lambda_1 - A/2 + eps_R")));
    }

    let mut gap = f64::INFINITY;
    if k >= 2 {
        gap = gap.min(spectral.eigenvalues[k - 2] - lambda);
    }
    if k < spectral.len() {
        gap = gap.min(lambda - spectral.eigenvalues[k]);
    }
    let gap_ok = gap > 10.0 * eps;

    let (path_ok, max_log_path) = if r <= EXHAUSTIVE_PATH_LIMIT {
        let m = max_log_path_product(domain, field, lambda, r);
        (Some(m.is_none_or(|v| v <= -h * r as f64)), m)
    } else {
        let cut = lambda - 2.0 * dd * (h.exp() - 1.0);
        let uniform = field.values().iter().all(|&x| x >= lambda || x <= cut);
        (uniform.then_some(true), None)
    };

    let dec = extract(domain, field, r, a, l1)?;
    let lead = ((gap - 2.0 * eps) / (8.0 * dd)).min(1.0);
    let factor = 4.0 * (-(1.0 - delta) * h * r as f64 + delta * h).exp();
    let boundary_margin = dec
        .components
        .iter()
        .map(|c| lead - factor * (boundary(c).len() as f64).sqrt())
        .fold(f64::INFINITY, f64::min);
    let boundary_ok = boundary_margin > 0.0;
    let hyp = DecayHypotheses { eps_r: eps, gap, gap_ok, path_ok, max_log_path, boundary_ok, boundary_margin };
    let components = dec.components.len();
    let with = |report: CheckReport, component| DecayReport { report, hypotheses: Some(hyp.clone()), component, components };

    if !gap_ok {
        return Ok(with(CheckReport::inapplicable("decay", desc, 10.0 * eps, gap, "clause 1: gap <= 10 eps_R"), None));
    }
    match path_ok {
        Some(false) => {
            let v = max_log_path.unwrap_or(0.0);
            return Ok(with(CheckReport::inapplicable("decay", desc, v, -h * r as f64, "clause 2: path product above e^{-hR}"), None));
        }
        None => return Ok(with(CheckReport::indeterminate("decay", desc, "clause 2 undecided by the per-site bound"), None)),
        Some(true) => {}
    }
    if !boundary_ok {
        return Ok(with(CheckReport::inapplicable("decay", desc, 0.0, boundary_margin, "clause 3: boundary condition"), None));
    }

    let ham = Hamiltonian::from_potential(domain, field.values())?;
    let psi = &spectral.eigenvectors[k - 1];
    let log_norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt().ln();
    let logs = log_amplitudes(&ham, lambda, psi, TAIL_KEEP);
    let cd = contracted_distance(&dec);
    let rate = delta * h;
    let mut best: Option<(usize, f64)> = None;
    for c in 0..components {
        let worst = (0..n)
            .map(|z| {
                let dz = cd.get(c, z);
                if logs[z] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else if dz == UNREACHABLE {
                    f64::INFINITY
                } else {
                    logs[z] - log_norm + rate * dz as f64
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_none_or(|(_, b)| worst < b) {
            best = Some((c, worst));
        }
    }
    let (c, worst) = best.ok_or_else(|| Error::DegenerateDomain("no components".into()))?;
    Ok(with(CheckReport::compare("decay", desc, worst, 0.0), Some(c)))
}

/// Per-sample coupling of the top of the spectrum to sorted box eigenvalues.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingReport {
    pub report: CheckReport,
    pub box_eigenvalues: Vec<f64>,
    /// `(k, |λ^(k)_D − λ̂_k|)` over the eligible `k`.
    pub differences: Vec<(usize, f64)>,
    pub bound: f64,
}

/// `λ̂₁ − λ̂_k < A ⇒ |λ^(k)_D − λ̂_k| < 4d(1 + A/2d)^{1−2R}` for all `k`.
pub fn check_gap_to_eigenvalue_coupling(
    domain: &LatticeDomain,
    field: &PotentialField,
    r: u64,
    a: f64,
    partition: &[LatticeDomain],
) -> Result<CouplingReport> {
    check_field(domain, field)?;
    let bound = 2.0 * epsilon_r(domain.dim(), a, r);
    let desc = describe(domain, field, json!({ "R": r, "A": a, "boxes": partition.len() }));
    if partition.is_empty() {
        return Ok(CouplingReport {
            report: CheckReport::vacuous("coupling", desc, 0.0, bound),
            box_eigenvalues: vec![],
            differences: vec![],
            bound,
        });
    }
    let mut hat = partition
        .par_iter()
        .map(|b| {
            let f = field.restrict(b)?;
            principal_eigenvalue(&Hamiltonian::from_potential(b, f.values())?)
        })
        .collect::<Result<Vec<f64>>>()?;
    hat.sort_by(|x, y| y.total_cmp(x));
    let eligible = hat.iter().take_while(|&&v| hat[0] - v < a).count();
    let h_d = Hamiltonian::from_potential(domain, field.values())?;
    let top = top_eigenvalues(&h_d, eligible);
    let differences: Vec<(usize, f64)> = top.iter().zip(&hat).enumerate().map(|(i, (x, y))| (i + 1, (x - y).abs())).collect();
    let worst = differences.iter().map(|p| p.1).fold(0.0, f64::max);
    let ok = worst < bound && top.len() == eligible;
    let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(CouplingReport {
        report: CheckReport::build("coupling", desc, worst, bound, status, Some(format!("{eligible} eligible k"))),
        box_eigenvalues: hat,
        differences,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn epsilon_examples() {
        assert_abs_diff_eq!(epsilon_r(1, 2.0, 2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon_r(1, 2.0, 1), 1.0, epsilon = 1e-15);
        assert!(epsilon_r(2, 3.0, 4) < epsilon_r(2, 3.0, 3));
        assert!(epsilon_r(2, 4.0, 3) < epsilon_r(2, 3.0, 3));
    }

    #[test]
    fn report_margin_matches_status() {
        let r = CheckReport::compare("t", Value::Null, 1.0, 2.0);
        assert!(r.pass && r.margin == 1.0);
        let f = CheckReport::compare("t", Value::Null, 2.0, 1.0);
        assert_eq!(f.status, CheckStatus::Fail);
        assert!(!f.pass && f.margin < 0.0);
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"status\":\"fail\""));
    }
}
