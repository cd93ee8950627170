//! Randomized, seed-replayable instance generators for the checkers.
//!
//! Instance `i` of a campaign with seed `s` is a pure function of `(s, i)`, so a
//! report's `instance` descriptor is enough to rebuild and rerun it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    check_decay_theorem, check_l2_bound, check_martingale, check_truncation, epsilon_r, max_log_path_product, CheckReport,
    CheckStatus,
};
use crate::error::{Error, Result};
use crate::field::{sample, PotentialField, TailSpec};
use crate::lattice::{LatticeDomain, Site};
use crate::operator::{principal_eigenvalue, top_eigs, top_eigs_with, Hamiltonian, SolverKind, DEFAULT_TOL};
use crate::regions::extract;
use crate::rng::Stream;
use crate::variational::{
    a_prime_of, a_zero, confinement_check, eta, gap_implication_check, gap_mass_check, inclusion_check, solve_chi, ChiCache,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Campaign {
    Truncation,
    L2Bound,
    SpectralGap,
    Inclusion,
    GapMass,
    Confinement,
    Decay,
}

impl Campaign {
    pub const ALL: [Campaign; 7] = [
        Campaign::Truncation,
        Campaign::L2Bound,
        Campaign::SpectralGap,
        Campaign::Inclusion,
        Campaign::GapMass,
        Campaign::Confinement,
        Campaign::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Campaign::Truncation => "truncation",
            Campaign::L2Bound => "l2_bound",
            Campaign::SpectralGap => "spectral_gap",
            Campaign::Inclusion => "inclusion",
            Campaign::GapMass => "gap_mass",
            Campaign::Confinement => "confinement",
            Campaign::Decay => "decay",
        }
    }

    pub fn parse(name: &str) -> Option<Campaign> {
        Campaign::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub instances: usize,
    pub seed: u64,
    /// Test-only: reverse the checked inequality so every applicable instance fails.
    #[serde(default)]
    pub inject_fault: bool,
    /// Tolerance of the `χ_C` solves.
    #[serde(default = "default_chi_tol")]
    pub chi_tol: f64,
}

fn default_chi_tol() -> f64 {
    1e-11
}

impl CampaignOptions {
    pub fn new(instances: usize, seed: u64) -> Self {
        CampaignOptions { instances, seed, inject_fault: false, chi_tol: default_chi_tol() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub theorem: String,
    pub instances: usize,
    pub pass: usize,
    pub fail: usize,
    pub inapplicable: usize,
    pub indeterminate: usize,
    /// Smallest margin over applicable, non-vacuous instances.
    pub worst_margin: f64,
}

impl CampaignSummary {
    pub fn from_reports(theorem: &str, reports: &[CheckReport]) -> Self {
        let mut s = CampaignSummary { theorem: theorem.into(), instances: reports.len(), worst_margin: f64::INFINITY, ..Default::default() };
        for r in reports {
            match r.status {
                CheckStatus::Pass => s.pass += 1,
                CheckStatus::Fail => s.fail += 1,
                CheckStatus::Inapplicable => s.inapplicable += 1,
                CheckStatus::Indeterminate => s.indeterminate += 1,
            }
            if matches!(r.status, CheckStatus::Pass | CheckStatus::Fail) && r.detail.as_deref() != Some("vacuous: premise false") {
                s.worst_margin = s.worst_margin.min(r.margin);
            }
        }
        s
    }
}

/// Runs instances `0..opts.instances` in parallel; reports come back in index order.
pub fn run_campaign(campaign: Campaign, opts: &CampaignOptions) -> Result<(CampaignSummary, Vec<CheckReport>)> {
    let cache = ChiCache::new(opts.chi_tol);
    let reports = (0..opts.instances)
        .into_par_iter()
        .map(|i| run_instance(campaign, opts.seed, i as u64, opts.inject_fault, &cache))
        .collect::<Result<Vec<_>>>()?;
    Ok((CampaignSummary::from_reports(campaign.name(), &reports), reports))
}

/// Reruns the instance a report describes.
pub fn replay(report: &CheckReport) -> Result<CheckReport> {
    let inst = &report.instance;
    let campaign = inst["campaign"]
        .as_str()
        .and_then(Campaign::parse)
        .ok_or_else(|| Error::InvalidParameter("report carries no campaign descriptor".into()))?;
    let seed = inst["campaign_seed"].as_u64().ok_or_else(|| Error::InvalidParameter("missing campaign_seed".into()))?;
    let index = inst["index"].as_u64().ok_or_else(|| Error::InvalidParameter("missing index".into()))?;
    let fault = inst["inject_fault"].as_bool().unwrap_or(false);
    run_instance(campaign, seed, index, fault, &ChiCache::new(inst["chi_tol"].as_f64().unwrap_or(default_chi_tol())))
}

pub fn run_instance(campaign: Campaign, seed: u64, index: u64, inject_fault: bool, cache: &ChiCache) -> Result<CheckReport> {
    let mut s = Stream::new(seed).derive(campaign as u64).derive(index);
    let report = match campaign {
        Campaign::Truncation => truncation_instance(&mut s)?,
        Campaign::L2Bound => l2_instance(&mut s)?,
        Campaign::SpectralGap => spectral_gap_instance(&mut s, cache)?,
        Campaign::Inclusion => inclusion_instance(&mut s, cache)?,
        Campaign::GapMass => gap_mass_instance(&mut s, cache)?,
        Campaign::Confinement => confinement_instance(&mut s)?,
        Campaign::Decay => decay_instance(&mut s)?,
    };
    let report = if inject_fault && report.status == CheckStatus::Pass {
        CheckReport::compare(&report.theorem, report.instance.clone(), report.rhs + 1.0, report.lhs)
    } else {
        report
    };
    let mut inst = json!({
        "campaign": campaign.name(),
        "campaign_seed": seed,
        "index": index,
        "inject_fault": inject_fault,
        "chi_tol": cache_tol(cache),
    });
    inst["checked"] = report.instance.clone();
    Ok(report.with_instance(inst))
}

fn cache_tol(cache: &ChiCache) -> f64 {
    cache.tol()
}

fn uniform(s: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.open01()
}

fn int(s: &mut Stream, lo: u64, hi: u64) -> u64 {
    lo + s.next_raw() % (hi - lo + 1)
}

/// Random interval (`d = 1`) or rectangle (`d = 2`) with at most `max_sites` sites.
fn random_box(s: &mut Stream, min_sites: u64, max_sites: u64) -> LatticeDomain {
    if s.next_raw().is_multiple_of(2) {
        let n = int(s, min_sites, max_sites);
        LatticeDomain::interval(0, n as i64 - 1)
    } else {
        loop {
            let side_max = (max_sites as f64).sqrt().floor().max(1.0) as u64 * 2;
            let a = int(s, 1, side_max.min(max_sites));
            let b = int(s, 1, (max_sites / a).max(1));
            if a * b >= min_sites && a * b <= max_sites {
                return LatticeDomain::cuboid(&[0, 0], &[a as usize, b as usize]);
            }
        }
    }
}

fn random_field(s: &mut Stream, domain: &LatticeDomain, rho: f64) -> Result<PotentialField> {
    sample(domain, &TailSpec::exact(rho)?, s.next_raw())
}

fn pick<T: Copy>(s: &mut Stream, xs: &[T]) -> T {
    xs[(s.next_raw() % xs.len() as u64) as usize]
}

fn truncation_instance(s: &mut Stream) -> Result<CheckReport> {
    let domain = if s.next_raw().is_multiple_of(2) {
        LatticeDomain::interval(0, int(s, 2, 400) as i64 - 1)
    } else {
        LatticeDomain::cuboid(&[0, 0], &[int(s, 2, 20) as usize, int(s, 2, 20) as usize])
    };
    let d = domain.dim();
    let rho = uniform(s, 0.5, 3.0);
    let field = random_field(s, &domain, rho)?;
    let (a, r) = loop {
        let a = uniform(s, 0.5, 8.0);
        let admissible: Vec<u64> = (1..=6).filter(|&r| epsilon_r(d, a, r) <= a / 2.0).collect();
        if !admissible.is_empty() {
            break (a, pick(s, &admissible));
        }
    };
    let l1 = principal_eigenvalue(&Hamiltonian::from_potential(&domain, field.values())?)?;
    let dec = extract(&domain, &field, r, a, l1)?;
    let p = pick(s, &[0.0, 0.0, 0.2, 0.6, 1.0]);
    let extra: Vec<bool> = (0..domain.len()).map(|_| s.open01() < p).collect();
    let u = domain.filter(|i, x| extra[i] || dec.region.contains(x));
    check_truncation(&domain, &field, r, a, &u)
}

fn l2_instance(s: &mut Stream) -> Result<CheckReport> {
    let domain = random_box(s, 4, 50);
    let rho = uniform(s, 0.5, 3.0);
    let mut field = random_field(s, &domain, rho)?;
    if s.open01() < 0.7 {
        let i = (s.next_raw() % domain.len() as u64) as usize;
        let mut v = field.values().to_vec();
        v[i] = field.max() + uniform(s, 2.0, 10.0);
        field = PotentialField::new(domain.clone(), v, field.spec, field.seed)?;
    }
    let k = int(s, 1, 3.min(domain.len() as u64)) as usize;
    let sr = top_eigs(&Hamiltonian::from_potential(&domain, field.values())?, k, DEFAULT_TOL)?;
    let lambda = sr.eigenvalues[k - 1];
    let a = uniform(s, 0.3, 4.0);
    let a_prime = a + uniform(s, 0.0, 4.0);
    let r = int(s, 1, 4);
    let high: Vec<&Site> = domain.sites().iter().enumerate().filter(|(i, _)| field.value(*i) >= lambda - a).map(|(_, x)| x).collect();
    let dprime = domain.filter(|i, x| field.value(i) <= lambda - a_prime && high.iter().all(|h| h.l1(x) >= r));
    check_l2_bound(&domain, &field, lambda, &sr.eigenvectors[k - 1], a, a_prime, r, &dprime)
}

fn small_shape_field(s: &mut Stream, max_sites: u64) -> Result<(LatticeDomain, f64, Vec<f64>)> {
    let c = random_box(s, 2, max_sites);
    let rho = pick(s, &[0.5, 1.0, 2.0]);
    let spec = TailSpec::exact(rho)?;
    let shift = uniform(s, -3.0, 3.0);
    let scale = pick(s, &[0.3, 1.0, 1.0, 3.0]);
    let xi: Vec<f64> = (0..c.len()).map(|_| shift + scale * spec.draw(s)).collect();
    Ok((c, rho, xi))
}

fn spectral_gap_instance(s: &mut Stream, cache: &ChiCache) -> Result<CheckReport> {
    let (c, rho, xi) = small_shape_field(s, 50)?;
    let chi = cache.get(&c, rho)?;
    let top = crate::operator::top_eigenvalues(&Hamiltonian::from_potential(&c, &xi)?, 2);
    let gap = top[0] - top[1];
    let k = if s.open01() < 0.8 { gap * uniform(s, 1.0, 1.5) } else { gap * uniform(s, 0.0, 1.0) };
    gap_implication_check(&c, &xi, rho, k, chi)
}

fn inclusion_instance(s: &mut Stream, cache: &ChiCache) -> Result<CheckReport> {
    let (c, rho, xi) = small_shape_field(s, 20)?;
    let chi = cache.get(&c, rho)?;
    let l1 = principal_eigenvalue(&Hamiltonian::from_potential(&c, &xi)?)?;
    let a = l1 - uniform(s, 0.0, 1.0).powi(2);
    let a_cut = if s.open01() < 0.25 { f64::INFINITY } else { chi.max(a_zero(c.dim())) + uniform(s, 0.0, 4.0) };
    inclusion_check(&c, &xi, rho, a, a_cut, chi)
}

fn gap_mass_instance(s: &mut Stream, cache: &ChiCache) -> Result<CheckReport> {
    let (c, rho, mut xi) = small_shape_field(s, 20)?;
    // two near-equal peaks make a small gap likely
    let n = xi.len();
    let top = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = (s.next_raw() % n as u64) as usize;
    let q = (s.next_raw() % n as u64) as usize;
    let height = top + uniform(s, 0.0, 6.0);
    xi[p] = height;
    xi[q] = height + uniform(s, 0.0, 0.3);
    let chi = cache.get(&c, rho)?;
    let d = c.dim() as f64;
    let l1 = principal_eigenvalue(&Hamiltonian::from_potential(&c, &xi)?)?;
    // smallest A with A(1 + A/4d) ≥ 8d
    let a8 = 4.0 * d;
    let a_cut = (2.0 * rho * std::f64::consts::LN_2).max(a8) + uniform(s, 0.0, 6.0);
    let a = l1 - chi + uniform(s, -1.0, 0.9) * a_cut;
    let a_prime = l1 - uniform(s, 0.0, 1.0).powi(2);
    gap_mass_check(&c, &xi, rho, a, a_prime, a_cut, chi)
}

fn confinement_instance(s: &mut Stream) -> Result<CheckReport> {
    let n = int(s, 2, 12);
    let c = LatticeDomain::interval(0, n as i64 - 1);
    let rho = 1.0;
    let delta = 1e-4;
    let a_p = a_prime_of(rho, delta);
    debug_assert!(a_p >= 1.0 + a_zero(1));
    // η(A)/ρ ≤ δ
    let a_cut = 4.0 * (2.0 / delta - 1.0) + 1.0;
    debug_assert!(eta(1, a_cut) / rho <= delta);
    let sol = solve_chi(&c, rho, 1e-12)?;
    let a = uniform(s, -2.0, 2.0);
    let xi: Vec<f64> = sol.optimizer.values.iter().map(|p| a + sol.chi + p + delta * rho * s.open01()).collect();
    let r = int(s, 6, 9);
    let rep = confinement_check(&c, &xi, rho, a, a_cut, delta, r, sol.chi)?;
    Ok(if rep.radius.status == CheckStatus::Pass { rep.diameter } else { rep.radius })
}

/// Planted peaks over a deep background; retries until the decay hypotheses hold.
fn decay_instance(s: &mut Stream) -> Result<CheckReport> {
    const ATTEMPTS: usize = 40;
    let mut last = None;
    for attempt in 0..ATTEMPTS {
        let (domain, a, r) = if s.next_raw().is_multiple_of(2) {
            (LatticeDomain::interval(0, int(s, 40, 400) as i64 - 1), 3.0, 3)
        } else {
            let (p, q) = (int(s, 8, 20), int(s, 8, 20));
            (LatticeDomain::cuboid(&[0, 0], &[p as usize, q as usize]), 6.0, 4)
        };
        let d = domain.dim();
        let n = domain.len();
        let mut xi: Vec<f64> = (0..n).map(|_| uniform(s, -16.0, -12.0)).collect();
        let peaks = int(s, 1, 3);
        let mut height = 12.0;
        for _ in 0..peaks {
            let i = (s.next_raw() % n as u64) as usize;
            xi[i] = height;
            height -= uniform(s, 1.0, 1.6);
        }
        let field = PotentialField::new(domain.clone(), xi, TailSpec::exact(1.0)?, attempt as u64)?;
        let h_op = Hamiltonian::from_potential(&domain, field.values())?;
        let want = (peaks as usize + 1).min(n);
        let solver = if d == 1 { SolverKind::Auto } else { SolverKind::Lanczos };
        let sr = top_eigs_with(&h_op, want, DEFAULT_TOL, solver)?;
        let k = int(s, 1, (want - 1).max(1) as u64) as usize;
        let lambda = sr.eigenvalues[k - 1];
        let h = match max_log_path_product(&domain, &field, lambda, r) {
            Some(v) => -v / r as f64 * 0.999,
            None => 2.0,
        };
        let delta = pick(s, &[0.1, 0.2, 0.3]);
        let rep = check_decay_theorem(&domain, &field, &sr, k, r, a, delta, h)?;
        let ok = rep.report.status != CheckStatus::Inapplicable && rep.report.status != CheckStatus::Indeterminate;
        let report = rep.report.with_detail(format!("attempt {attempt}, k={k}, h={h:.6}"));
        if ok {
            return Ok(report);
        }
        last = Some(report);
    }
    Ok(last.expect("at least one attempt"))
}

/// Martingale statistic for one random instance: `|D| = 20`, `d = 1`,
/// principal pair, start at the site nearest the center with `ξ < λ`.
pub fn martingale_instance(seed: u64, index: u64, n_paths: usize, horizon: usize) -> Result<super::MartingaleReport> {
    let mut s = Stream::new(seed).derive(0x3A27).derive(index);
    let domain = LatticeDomain::interval(0, 19);
    let rho = uniform(&mut s, 0.5, 3.0);
    let field = random_field(&mut s, &domain, rho)?;
    let sr = top_eigs(&Hamiltonian::from_potential(&domain, field.values())?, 1, DEFAULT_TOL)?;
    let lambda = sr.eigenvalues[0];
    let center = &sr.centers[0];
    let start = domain
        .sites()
        .iter()
        .enumerate()
        .filter(|(i, _)| field.value(*i) < lambda)
        .min_by_key(|(_, x)| (x.l1(center), (*x).clone()))
        .map(|(_, x)| x.clone())
        .unwrap_or_else(|| center.clone());
    check_martingale(&domain, &field, lambda, &sr.eigenvectors[0], &start, n_paths, horizon, s.next_raw())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_reproduces_report() {
        let opts = CampaignOptions::new(3, 17);
        let (_, reports) = run_campaign(Campaign::Truncation, &opts).unwrap();
        for r in &reports {
            let again = replay(r).unwrap();
            assert_eq!(serde_json::to_string(r).unwrap(), serde_json::to_string(&again).unwrap());
        }
    }

    #[test]
    fn injected_fault_fails() {
        let mut opts = CampaignOptions::new(4, 5);
        opts.inject_fault = true;
        let (summary, _) = run_campaign(Campaign::Truncation, &opts).unwrap();
        assert!(summary.fail > 0);
    }
}
