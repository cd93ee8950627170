//! The functionals `L_C`, `L_{C,A}` and the constrained principal-eigenvalue
//! problem defining `χ_C` and `χ`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ball, LatticeDomain, Site};
use crate::operator::{top_eigs_with, top_eigenvalues, Hamiltonian, SolverKind, DEFAULT_TOL};
use crate::rng::Stream;
use crate::verify::CheckReport;

/// Lower clamp on profile values, in units of ρ.
pub const CLAMP_RHO: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub support: LatticeDomain,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(support: LatticeDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::FieldMismatch(format!("{} values for {} sites", values.len(), support.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("profile values must be finite".into()));
        }
        Ok(Profile { support, values })
    }

    pub fn constant(support: LatticeDomain, v: f64) -> Self {
        let n = support.len();
        Profile { support, values: vec![v; n] }
    }

    pub fn value_at(&self, s: &Site) -> Option<f64> {
        self.support.index_of(s).map(|i| self.values[i])
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log L_C(φ)` for raw values.
pub fn log_ell_values(values: &[f64], rho: f64) -> f64 {
    log_sum_exp(values.iter().map(|v| v / rho))
}

/// `log L_C(φ)`.
pub fn log_ell(phi: &Profile, rho: f64) -> f64 {
    log_ell_values(&phi.values, rho)
}

/// `L_C(φ) = Σ e^{φ(x)/ρ}`.
pub fn ell(phi: &Profile, rho: f64) -> f64 {
    log_ell(phi, rho).exp()
}

/// `L_{C,A}(φ)` for raw values; `a = ∞` gives the untruncated sum.
pub fn ell_truncated_values(values: &[f64], rho: f64, a: f64) -> f64 {
    let cut = -2.0 * a;
    log_sum_exp(values.iter().filter(|&&v| v >= cut).map(|v| v / rho)).exp()
}

/// `L_{C,A}(φ) = Σ e^{φ(x)/ρ} 1{φ(x) ≥ −2A}`.
pub fn ell_truncated(phi: &Profile, rho: f64, a: f64) -> f64 {
    ell_truncated_values(&phi.values, rho, a)
}

/// `η(A) = 2d(1 + A/4d)^{−1}`, zero at `A = ∞`.
pub fn eta(d: usize, a: f64) -> f64 {
    let d = d as f64;
    if a.is_infinite() {
        0.0
    } else {
        2.0 * d / (1.0 + a / (4.0 * d))
    }
}

fn principal_pair(c: &LatticeDomain, values: &[f64]) -> Result<(f64, Vec<f64>)> {
    let h = Hamiltonian::from_potential(c, values)?;
    let solver = if c.dim() >= 2 && c.len() > 300 { SolverKind::Lanczos } else { SolverKind::Auto };
    let mut sr = top_eigs_with(&h, 1, DEFAULT_TOL, solver)?;
    Ok((sr.eigenvalues[0], sr.eigenvectors.swap_remove(0)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiRun {
    pub start: String,
    pub chi: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_fallback: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiSolution {
    pub chi: f64,
    pub optimizer: Profile,
    pub eigvec: Vec<f64>,
    pub iterations: usize,
    /// `max_x |e^{φ(x)/ρ} − ψ(x)²|` at the optimizer.
    pub kkt_residual: f64,
    /// Principal eigenvalue per iteration of the winning run.
    pub trace: Vec<f64>,
    pub runs: Vec<ChiRun>,
}

#[derive(Clone, Debug)]
pub struct ChiOptions {
    pub max_iter: usize,
    /// Iteration budget per stage for the random starts; an unconverged random
    /// start is reported but does not enter the maximum.
    pub random_max_iter: usize,
    pub random_starts: usize,
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for ChiOptions {
    fn default() -> Self {
        ChiOptions { max_iter: 20_000, random_max_iter: 500, random_starts: 3, kkt_tol: 1e-8, seed: 0xC41 }
    }
}

struct Run {
    phi: Vec<f64>,
    lambda: f64,
    psi: Vec<f64>,
    iterations: usize,
    trace: Vec<f64>,
    kkt: f64,
    converged: bool,
    used_fallback: bool,
}

fn kkt_residual(phi: &[f64], psi: &[f64], rho: f64) -> f64 {
    phi.iter().zip(psi).map(|(p, s)| ((p / rho).exp() - s * s).abs()).fold(0.0, f64::max)
}

fn from_square(psi: &[f64], rho: f64) -> Vec<f64> {
    let floor = -CLAMP_RHO * rho;
    psi.iter().map(|s| (rho * (s * s).ln()).max(floor)).collect()
}

/// Alternating maximization `φ ← ρ log ψ²`.
fn fixed_point(c: &LatticeDomain, rho: f64, phi0: Vec<f64>, tol: f64, opts: &ChiOptions) -> Result<Run> {
    let mut phi = phi0;
    let (mut lambda, mut psi) = principal_pair(c, &phi)?;
    let mut trace = vec![lambda];
    let mut prev_phi = phi.clone();
    for it in 1..=opts.max_iter {
        let mut next = from_square(&psi, rho);
        let (mut l, mut v) = principal_pair(c, &next)?;
        if l < lambda - 1e-13 * (1.0 + lambda.abs()) {
            next = prev_phi
                .iter()
                .zip(&next)
                .map(|(a, b)| rho * (0.5 * (a / rho).exp() + 0.5 * (b / rho).exp()).ln())
                .collect();
            (l, v) = principal_pair(c, &next)?;
        }
        let step = (l - lambda).abs();
        prev_phi = std::mem::replace(&mut phi, next);
        lambda = l;
        psi = v;
        trace.push(lambda);
        let kkt = kkt_residual(&phi, &psi, rho);
        if step < tol && kkt < opts.kkt_tol {
            return Ok(Run { phi, lambda, psi, iterations: it, trace, kkt, converged: true, used_fallback: false });
        }
    }
    let kkt = kkt_residual(&phi, &psi, rho);
    Ok(Run { phi, lambda, psi, iterations: opts.max_iter, trace, kkt, converged: false, used_fallback: false })
}

/// Projected gradient ascent: `φ ← φ + η ψ²` followed by the shift that
/// restores `L_C(φ) = 1`.
fn projected_gradient(c: &LatticeDomain, rho: f64, phi0: Vec<f64>, tol: f64, opts: &ChiOptions) -> Result<Run> {
    let floor = -CLAMP_RHO * rho;
    let retract = |phi: &mut Vec<f64>| {
        let s = rho * log_ell_values(phi, rho);
        phi.iter_mut().for_each(|v| *v = (*v - s).max(floor));
    };
    let mut phi = phi0;
    retract(&mut phi);
    let (mut lambda, mut psi) = principal_pair(c, &phi)?;
    let mut trace = vec![lambda];
    let mut step = rho;
    for it in 1..=opts.max_iter {
        let mut trial: Vec<f64> = phi.iter().zip(&psi).map(|(p, s)| p + step * s * s).collect();
        retract(&mut trial);
        let (l, v) = principal_pair(c, &trial)?;
        if l < lambda {
            step *= 0.5;
            if step < 1e-14 * rho {
                break;
            }
            continue;
        }
        let gain = l - lambda;
        phi = trial;
        lambda = l;
        psi = v;
        trace.push(lambda);
        step = (step * 1.5).min(100.0 * rho);
        let kkt = kkt_residual(&phi, &psi, rho);
        if gain < tol && kkt < opts.kkt_tol.sqrt() {
            return Ok(Run { phi, lambda, psi, iterations: it, trace, kkt, converged: true, used_fallback: true });
        }
    }
    let kkt = kkt_residual(&phi, &psi, rho);
    Ok(Run { phi, lambda, psi, iterations: opts.max_iter, trace, kkt, converged: false, used_fallback: true })
}

/// Site minimizing the largest ℓ¹ distance to the rest of `c`.
fn center_of(c: &LatticeDomain) -> usize {
    (0..c.len())
        .min_by_key(|&i| c.sites().iter().map(|s| s.l1(c.site(i))).max().unwrap_or(0))
        .unwrap_or(0)
}

/// `χ_C` with default options.
pub fn solve_chi(c: &LatticeDomain, rho: f64, tol: f64) -> Result<ChiSolution> {
    solve_chi_with(c, rho, tol, &ChiOptions::default(), None)
}

/// `χ_C = −sup{λ₁_C(φ) : L_C(φ) ≤ 1}` by multi-start fixed-point iteration.
/// `warm` adds one more start.
pub fn solve_chi_with(c: &LatticeDomain, rho: f64, tol: f64, opts: &ChiOptions, warm: Option<&[f64]>) -> Result<ChiSolution> {
    if c.is_empty() {
        return Err(Error::DegenerateDomain("χ_C needs a nonempty C".into()));
    }
    if !(rho > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("rho={rho}, tol={tol}")));
    }
    let n = c.len();
    if n == 1 {
        let chi = 2.0 * c.dim() as f64;
        return Ok(ChiSolution {
            chi,
            optimizer: Profile::constant(c.clone(), 0.0),
            eigvec: vec![1.0],
            iterations: 0,
            kkt_residual: 0.0,
            trace: vec![-chi],
            runs: vec![ChiRun { start: "single".into(), chi, iterations: 0, converged: true, used_fallback: false }],
        });
    }
    let floor = -CLAMP_RHO * rho;
    let mut starts: Vec<(String, Vec<f64>)> = Vec::new();
    let mut delta = vec![floor; n];
    delta[center_of(c)] = 0.0;
    starts.push(("delta".into(), delta));
    let root = Stream::new(opts.seed);
    for j in 0..opts.random_starts {
        let mut s = root.derive(j as u64);
        let w: Vec<f64> = (0..n).map(|_| s.open01()).collect();
        let total: f64 = w.iter().sum();
        starts.push((format!("random{j}"), w.iter().map(|x| (rho * (x / total).ln()).max(floor)).collect()));
    }
    if let Some(w) = warm {
        if w.len() != n {
            return Err(Error::FieldMismatch("warm start has the wrong length".into()));
        }
        starts.push(("warm".into(), w.to_vec()));
    }

    let mut runs = Vec::new();
    let mut best: Option<Run> = None;
    let mut total_iter = 0;
    let budgeted = ChiOptions { max_iter: opts.random_max_iter.min(opts.max_iter), ..opts.clone() };
    for (label, phi0) in starts {
        let stage = if label.starts_with("random") { &budgeted } else { opts };
        let mut run = fixed_point(c, rho, phi0, tol, stage)?;
        if !run.converged {
            let fb = projected_gradient(c, rho, run.phi.clone(), tol, stage)?;
            let iters = run.iterations + fb.iterations;
            if fb.lambda >= run.lambda || fb.converged {
                run = fb;
            }
            run.iterations = iters;
            run.used_fallback = true;
        }
        total_iter += run.iterations;
        runs.push(ChiRun {
            start: label,
            chi: -run.lambda,
            iterations: run.iterations,
            converged: run.converged,
            used_fallback: run.used_fallback,
        });
        if run.converged && best.as_ref().is_none_or(|b| run.lambda > b.lambda) {
            best = Some(run);
        }
    }
    let best = best.ok_or(Error::NonConvergence { iterations: total_iter, best_residual: f64::NAN })?;
    Ok(ChiSolution {
        chi: -best.lambda,
        optimizer: Profile { support: c.clone(), values: best.phi },
        eigvec: best.psi,
        iterations: best.iterations,
        kkt_residual: best.kkt,
        trace: best.trace,
        runs,
    })
}

/// `χ_{B_n}` for the ℓ¹ ball of radius `n` around the origin.
pub fn chi_ball(n: u64, d: usize, rho: f64, tol: f64) -> Result<ChiSolution> {
    solve_chi(&ball(&Site::origin(d), n, None), rho, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub value: f64,
    /// Last drop `χ_{B_{n−1}} − χ_{B_n}`.
    pub error: f64,
    pub radius: u64,
    pub sequence: Vec<f64>,
}

/// `χ = lim χ_{B_n}`: grows `n` until the drop falls below `tol`.
pub fn chi_infinite(rho: f64, d: usize, tol: f64, max_radius: u64) -> Result<ChiEstimate> {
    let opts = ChiOptions { random_starts: 0, ..ChiOptions::default() };
    let inner_tol = (tol * 1e-3).max(1e-13);
    let mut sequence = Vec::new();
    let mut prev: Option<(LatticeDomain, Vec<f64>)> = None;
    for n in 0..=max_radius {
        let b = ball(&Site::origin(d), n, None);
        let warm = prev.as_ref().map(|(pb, phi)| {
            b.sites().iter().map(|s| pb.index_of(s).map_or(-CLAMP_RHO * rho, |i| phi[i])).collect::<Vec<f64>>()
        });
        let sol = solve_chi_with(&b, rho, inner_tol, &opts, warm.as_deref())?;
        // domain monotonicity: never report an increase caused by solver noise
        let chi = sequence.last().map_or(sol.chi, |&p: &f64| sol.chi.min(p));
        sequence.push(chi);
        if sequence.len() >= 2 {
            let drop = sequence[sequence.len() - 2] - chi;
            if drop < tol {
                return Ok(ChiEstimate { value: chi, error: drop, radius: n, sequence });
            }
        }
        prev = Some((b, sol.optimizer.values));
    }
    Err(Error::NonConvergence {
        iterations: max_radius as usize,
        best_residual: sequence.windows(2).last().map_or(f64::NAN, |w| w[0] - w[1]),
    })
}

/// Memo of `χ_C` keyed by the translation class of `C` and `ρ`.
#[derive(Default)]
pub struct ChiCache {
    tol: f64,
    map: Mutex<HashMap<(Vec<Site>, u64), f64>>,
}

impl ChiCache {
    pub fn new(tol: f64) -> Self {
        ChiCache { tol, map: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, c: &LatticeDomain, rho: f64) -> Result<f64> {
        let lo = c.bounding_box().map(|b| b.0).unwrap_or_default();
        let key: Vec<Site> = c
            .sites()
            .iter()
            .map(|s| Site::new(&s.coords().iter().zip(&lo).map(|(x, l)| x - l).collect::<Vec<_>>()))
            .collect();
        let key = (key, rho.to_bits());
        if let Some(&v) = self.map.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = solve_chi(c, rho, self.tol)?.chi;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn descriptor(c: &LatticeDomain, xi: &[f64], extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({ "support": c.sites(), "xi": xi, "params": extra })
}

/// Spectral-gap implication: `λ₁ − λ₂ ≤ K ⇒ λ₁ − ρ log L_C(ξ) ≤ −χ_C + K − ρ log 2`.
pub fn gap_implication_check(c: &LatticeDomain, xi: &[f64], rho: f64, k_gap: f64, chi_c: f64) -> Result<CheckReport> {
    if c.len() < 2 {
        return Err(Error::DegenerateDomain("gap check needs |C| ≥ 2".into()));
    }
    let h = Hamiltonian::from_potential(c, xi)?;
    let top = top_eigenvalues(&h, 2);
    let (l1, l2) = (top[0], top[1]);
    let desc = descriptor(c, xi, serde_json::json!({ "rho": rho, "K": k_gap, "chi_C": chi_c }));
    let lhs = l1 - rho * log_ell_values(xi, rho);
    let rhs = -chi_c + k_gap - rho * std::f64::consts::LN_2;
    if l1 - l2 > k_gap {
        return Ok(CheckReport::vacuous("spectral_gap", desc, lhs, rhs));
    }
    Ok(CheckReport::compare("spectral_gap", desc, lhs, rhs))
}

/// `λ₁_C(ξ) ≥ a ⇒ L_{C,A}(ξ − a − χ_C) ≥ e^{−η(A)/ρ}`; `a_cut = ∞` checks
/// `L_C(ξ − a − χ_C) ≥ 1`. Reported as `lhs = bound ≤ rhs = L`.
pub fn inclusion_check(c: &LatticeDomain, xi: &[f64], rho: f64, a: f64, a_cut: f64, chi_c: f64) -> Result<CheckReport> {
    let d = c.dim() as f64;
    let desc = descriptor(c, xi, serde_json::json!({ "rho": rho, "a": a, "A": a_cut, "chi_C": chi_c }));
    if a_cut.is_finite() {
        if a_cut < chi_c {
            return Ok(CheckReport::inapplicable("inclusion", desc, chi_c, a_cut, "A < chi_C"));
        }
        let q = a_cut * (1.0 + a_cut / (4.0 * d));
        if q < 4.0 * d {
            return Ok(CheckReport::inapplicable("inclusion", desc, 4.0 * d, q, "A(1+A/4d) < 4d"));
        }
    }
    let l1 = top_eigenvalues(&Hamiltonian::from_potential(c, xi)?, 1)[0];
    let phi: Vec<f64> = xi.iter().map(|x| x - a - chi_c).collect();
    let value = ell_truncated_values(&phi, rho, a_cut);
    let bound = (-eta(c.dim(), a_cut) / rho).exp();
    if l1 < a {
        return Ok(CheckReport::vacuous("inclusion", desc, bound, value));
    }
    Ok(CheckReport::compare("inclusion", desc, bound, value))
}

/// Small gap plus high principal eigenvalue forces mass:
/// `λ₁ ≥ a′ ∧ λ₁ − λ₂ ≤ ½ρ log 2 ⇒ L_{C,A}(ξ − a − χ_C) ≥ u` with
/// `log u = (a′ − a − η(A))/ρ + ½ log 2`. Reported as `lhs = u ≤ rhs = L`.
#[allow(clippy::too_many_arguments)]
pub fn gap_mass_check(c: &LatticeDomain, xi: &[f64], rho: f64, a: f64, a_prime: f64, a_cut: f64, chi_c: f64) -> Result<CheckReport> {
    let d = c.dim() as f64;
    let desc = descriptor(c, xi, serde_json::json!({ "rho": rho, "a": a, "a_prime": a_prime, "A": a_cut, "chi_C": chi_c }));
    let name = "gap_mass";
    if c.len() < 2 {
        return Ok(CheckReport::inapplicable(name, desc, 2.0, c.len() as f64, "|C| < 2"));
    }
    if a_cut < 2.0 * rho * std::f64::consts::LN_2 {
        return Ok(CheckReport::inapplicable(name, desc, 2.0 * rho * std::f64::consts::LN_2, a_cut, "A < 2 rho log 2"));
    }
    let q = a_cut * (1.0 + a_cut / (4.0 * d));
    if q < 8.0 * d {
        return Ok(CheckReport::inapplicable(name, desc, 8.0 * d, q, "A(1+A/4d) < 8d"));
    }
    let top = top_eigenvalues(&Hamiltonian::from_potential(c, xi)?, 2);
    let (l1, l2) = (top[0], top[1]);
    if l1 - a - chi_c < -a_cut {
        return Ok(CheckReport::inapplicable(name, desc, -a_cut, l1 - a - chi_c, "lambda_1 - a - chi_C < -A"));
    }
    let phi: Vec<f64> = xi.iter().map(|x| x - a - chi_c).collect();
    let kept = phi.iter().filter(|&&v| v >= -2.0 * a_cut).count();
    if kept < 2 {
        return Ok(CheckReport::inapplicable(name, desc, 2.0, kept as f64, "fewer than two sites above -2A"));
    }
    let log_u = (a_prime - a - eta(c.dim(), a_cut)) / rho + 0.5 * std::f64::consts::LN_2;
    let value = ell_truncated_values(&phi, rho, a_cut);
    let u = log_u.exp();
    if l1 < a_prime || l1 - l2 > 0.5 * rho * std::f64::consts::LN_2 {
        return Ok(CheckReport::vacuous(name, desc, u, value));
    }
    Ok(CheckReport::compare(name, desc, u, value))
}

/// Outcome of the confinement check for near-optimal fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfinementReport {
    /// Sites with `ξ > λ₁_C(ξ) − A′ + χ_C` lie within `c·r` of one site.
    pub radius: CheckReport,
    /// `diam S ≤ 2|S| r` for `S = {φ > −2A′}`.
    pub diameter: CheckReport,
}

/// `A₀` solving `A₀(1 + A₀/4d) = 4d`.
pub fn a_zero(d: usize) -> f64 {
    let d = d as f64;
    // positive root of A²/4d + A − 4d = 0
    2.0 * d * (-1.0 + 5f64.sqrt())
}

/// `A′ = −½ ρ log(2 sinh δ)`.
pub fn a_prime_of(rho: f64, delta: f64) -> f64 {
    -0.5 * rho * (2.0 * delta.sinh()).ln()
}

#[allow(clippy::too_many_arguments)]
pub fn confinement_check(
    c: &LatticeDomain,
    xi: &[f64],
    rho: f64,
    a: f64,
    a_cut: f64,
    delta: f64,
    r: u64,
    chi_c: f64,
) -> Result<ConfinementReport> {
    let dd = c.dim();
    let d = dd as f64;
    let name = "confinement";
    let desc = descriptor(c, xi, serde_json::json!({ "rho": rho, "a": a, "A": a_cut, "delta": delta, "r": r, "chi_C": chi_c }));
    let a_p = a_prime_of(rho, delta);
    let both = |rep: CheckReport| ConfinementReport { radius: rep.clone(), diameter: rep };
    if !(delta > 0.0) || r < 1 {
        return Err(Error::InvalidParameter("need delta > 0 and r ≥ 1".into()));
    }
    if a_cut < a_p {
        return Ok(both(CheckReport::inapplicable(name, desc, a_p, a_cut, "A < A'")));
    }
    if a_p < d + a_zero(dd) {
        return Ok(both(CheckReport::inapplicable(name, desc, d + a_zero(dd), a_p, "A' < d + A_0")));
    }
    if eta(dd, a_cut) / rho > delta {
        return Ok(both(CheckReport::inapplicable(name, desc, eta(dd, a_cut) / rho, delta, "eta(A)/rho > delta")));
    }
    let phi: Vec<f64> = xi.iter().map(|x| x - a - chi_c).collect();
    let mass = ell_truncated_values(&phi, rho, a_cut);
    if mass > delta.exp() {
        return Ok(both(CheckReport::inapplicable(name, desc, mass, delta.exp(), "L_{C,A} > e^delta")));
    }
    let l1 = top_eigenvalues(&Hamiltonian::from_potential(c, xi)?, 1)[0];
    let need = a + 2.0 * d * (1.0 + (a_p - d) / (2.0 * d)).powf(1.0 - 2.0 * r as f64);
    if l1 < need {
        return Ok(both(CheckReport::inapplicable(name, desc, need, l1, "lambda_1 below the required level")));
    }

    let high: Vec<&Site> = c.sites().iter().zip(xi).filter(|(_, &x)| x > l1 - a_p + chi_c).map(|(s, _)| s).collect();
    let spread = c
        .sites()
        .iter()
        .map(|x| high.iter().map(|z| z.l1(x)).max().unwrap_or(0))
        .min()
        .unwrap_or(0) as f64;
    let cr = 2.0 * (delta + 2.0 * a_cut / rho).exp() * r as f64;
    let radius = CheckReport::compare(name, desc.clone(), spread, cr);

    let s = c.filter(|i, _| phi[i] > -2.0 * a_p);
    let diameter = CheckReport::compare("confinement_diameter", desc, s.diameter() as f64, 2.0 * s.len() as f64 * r as f64);
    Ok(ConfinementReport { radius, diameter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(n: i64) -> LatticeDomain {
        LatticeDomain::interval(0, n - 1)
    }

    #[test]
    fn ell_examples() {
        let c3 = line(3);
        assert_abs_diff_eq!(ell(&Profile::constant(c3.clone(), 0.0), 1.7), 3.0, epsilon = 1e-12);
        let rho = 2.5;
        assert_abs_diff_eq!(ell(&Profile::constant(line(2), -rho * 2f64.ln()), rho), 1.0, epsilon = 1e-12);
        let p = Profile::new(line(2), vec![rho, 0.0]).unwrap();
        assert_abs_diff_eq!(ell(&p, rho), std::f64::consts::E + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ell_truncated_examples() {
        let a = 1.3;
        assert_eq!(ell_truncated(&Profile::constant(line(4), -3.0 * a), 1.0, a), 0.0);
        let z = Profile::constant(line(4), 0.0);
        assert_abs_diff_eq!(ell_truncated(&z, 0.7, a), ell(&z, 0.7), epsilon = 1e-12);
        let p = Profile::new(line(2), vec![-a, -3.0 * a]).unwrap();
        assert_abs_diff_eq!(ell_truncated(&p, 1.0, a), (-a).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(ell_truncated(&p, 1.0, f64::INFINITY), ell(&p, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn single_site_chi_is_2d() {
        for d in 1..=3 {
            let c = LatticeDomain::new(d, vec![Site::origin(d)]).unwrap();
            let sol = solve_chi(&c, 1.3, 1e-12).unwrap();
            assert_abs_diff_eq!(sol.chi, 2.0 * d as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(sol.optimizer.values[0], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn optimizer_invariants() {
        let c = LatticeDomain::cuboid(&[0, 0], &[3, 2]);
        let rho = 0.8;
        let sol = solve_chi(&c, rho, 1e-12).unwrap();
        assert_abs_diff_eq!(ell(&sol.optimizer, rho), 1.0, epsilon = 1e-8);
        assert!(sol.kkt_residual < 1e-6);
        let l1 = top_eigenvalues(&Hamiltonian::from_potential(&c, &sol.optimizer.values).unwrap(), 1)[0];
        assert_abs_diff_eq!(l1, -sol.chi, epsilon = 1e-9);
        assert!(sol.chi > 0.0 && sol.chi <= 4.0);
        assert_eq!(sol.runs.len(), 4);
        assert!(sol.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn eta_and_a_zero() {
        for d in 1..=3 {
            let a0 = a_zero(d);
            assert_abs_diff_eq!(a0 * (1.0 + a0 / (4.0 * d as f64)), 4.0 * d as f64, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(eta(1, 4.0), 1.0);
        assert_eq!(eta(2, f64::INFINITY), 0.0);
    }
}
