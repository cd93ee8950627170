use anderson_edge::evt::{
    estimate_a_l, make_plan, member_seed, poisson_tests, rescale, sample_record, sample_spectrum, spacing_ks_with_se, spacings,
    PointCloud, ScaleOverrides, MIN_CLOUDS,
};
use anderson_edge::field::sample;
use anderson_edge::operator::principal_eigenvalue;
use anderson_edge::regions::extract;
use anderson_edge::variational::{chi_ball, chi_infinite};
use anderson_edge::verify::campaigns::{run_campaign, Campaign, CampaignOptions, CampaignSummary};
use anderson_edge::verify::{check_truncation, CheckReport, CheckStatus};
use anderson_edge::{Error as CoreError, Hamiltonian, Site};
use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, Csv, Header, Jsonl};

/// Result of a command that ran to completion.
pub enum Outcome {
    Done,
    /// At least one deterministic check was falsified.
    Falsified,
}

fn overrides(cfg: &RunConfig) -> ScaleOverrides {
    ScaleOverrides { n_l: cfg.n_l, r_l: cfg.r_l }
}

fn coords(s: &Site) -> String {
    s.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Serialize)]
struct SpectrumLine {
    #[serde(rename = "L")]
    l: u64,
    sample: usize,
    #[serde(flatten)]
    record: anderson_edge::evt::SampleRecord,
    heights: Vec<f64>,
    region_components: usize,
    region_sites: usize,
    #[serde(rename = "a_L")]
    a_l: f64,
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let shape = cfg.shape();
    let spec = cfg.tail_spec()?;
    let plans = cfg
        .l
        .iter()
        .map(|&l| {
            let (plan, dom) = make_plan(&shape, l, &overrides(cfg))?;
            if cfg.k > dom.len() {
                return Err(ConfigError::Invalid(format!("k={} exceeds |D_L|={} at L={l}", cfg.k, dom.len())).into());
            }
            Ok((plan, dom))
        })
        .collect::<Result<Vec<_>>>()?;
    let header = Header::new("spectrum", cfg);
    let dir = cfg.out_dir();
    let mut jsonl = Jsonl::create(&dir, "spectrum.jsonl", &header)?;
    let mut csv = Csv::create(&dir, "spectrum_summary.csv", &header, &[
        "L", "sample", "seed", "rank", "eigenvalue", "height", "center", "max_field", "chi_gap",
    ])?;
    for (plan, dom) in &plans {
        let l = plan.l;
        let n_mc = (cfg.spectrum.centering_exceedances / plan.tail_probability()).ceil().max(1.0) as usize;
        let a_l = estimate_a_l(&spec, plan, n_mc, member_seed(cfg.seed, l, usize::MAX))?.a_l;
        let lines = (0..cfg.ensemble)
            .into_par_iter()
            .map(|j| -> Result<SpectrumLine> {
                let (field, sr) = sample_spectrum(dom, &spec, cfg.k, member_seed(cfg.seed, l, j))?;
                let dec = extract(dom, &field, plan.r_l, cfg.spectrum.a, sr.eigenvalues[0])?;
                let cloud = rescale(&sr, plan, a_l, spec.rho)?;
                Ok(SpectrumLine {
                    l,
                    sample: j,
                    record: sample_record(l, &field, &sr),
                    heights: cloud.points.iter().map(|p| p.height).collect(),
                    region_components: dec.components.len(),
                    region_sites: dec.region.len(),
                    a_l,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for line in &lines {
            jsonl.record(line)?;
            let r = &line.record;
            for (i, lam) in r.eigenvalues.iter().enumerate() {
                csv.row([
                    l.to_string(),
                    line.sample.to_string(),
                    r.seed.to_string(),
                    (i + 1).to_string(),
                    num(*lam),
                    num(line.heights[i]),
                    coords(&r.centers[i]),
                    num(r.max_field),
                    num(r.chi_gap),
                ])?;
            }
        }
    }
    jsonl.finish()?;
    csv.finish()?;
    Ok(Outcome::Done)
}

fn fixed_truncation(cfg: &RunConfig, r: u64, a: f64) -> Result<(CampaignSummary, Vec<CheckReport>)> {
    let spec = cfg.tail_spec()?;
    let l = cfg.l[0];
    let (_, dom) = make_plan(&cfg.shape(), l, &overrides(cfg))?;
    let reports = (0..cfg.verify.instances)
        .into_par_iter()
        .map(|i| -> Result<CheckReport> {
            let field = sample(&dom, &spec, member_seed(cfg.seed, l, i))?;
            let lambda1 = principal_eigenvalue(&Hamiltonian::from_potential(&dom, field.values())?)?;
            let u = extract(&dom, &field, r, a, lambda1)?.region;
            let rep = check_truncation(&dom, &field, r, a, &u)?;
            let rep = if cfg.verify.inject_fault && rep.status == CheckStatus::Pass {
                CheckReport::compare(&rep.theorem, rep.instance.clone(), rep.rhs + 1.0, rep.lhs)
            } else {
                rep
            };
            let inst = json!({ "campaign": "truncation_fixed", "L": l, "index": i, "checked": rep.instance });
            Ok(rep.with_instance(inst))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((CampaignSummary::from_reports("truncation", &reports), reports))
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let campaigns = cfg
        .verify
        .campaigns
        .iter()
        .map(|name| {
            Campaign::parse(name).ok_or_else(|| {
                let known: Vec<&str> = Campaign::ALL.iter().map(|c| c.name()).collect();
                ConfigError::Invalid(format!("unknown campaign {name:?}; known: {}", known.join(", ")))
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let header = Header::new("verify", cfg);
    let dir = cfg.out_dir();
    let mut jsonl = Jsonl::create(&dir, "verify.jsonl", &header)?;
    let mut csv = Csv::create(&dir, "verify_summary.csv", &header, &[
        "theorem", "instances", "pass", "fail", "inapplicable", "indeterminate", "worst_margin",
    ])?;
    let mut witnesses: Vec<CheckReport> = Vec::new();
    for c in campaigns {
        let (summary, reports) = match (c, cfg.verify.r, cfg.verify.a) {
            (Campaign::Truncation, Some(r), Some(a)) => fixed_truncation(cfg, r, a)?,
            _ => {
                let opts = CampaignOptions {
                    instances: cfg.verify.instances,
                    seed: cfg.seed,
                    inject_fault: cfg.verify.inject_fault,
                    chi_tol: cfg.verify.chi_tol,
                };
                run_campaign(c, &opts)?
            }
        };
        for rep in &reports {
            jsonl.record(rep)?;
        }
        witnesses.extend(reports.into_iter().filter(|r| r.status == CheckStatus::Fail));
        if summary.instances > 0 && summary.inapplicable == summary.instances {
            eprintln!("warning: every {} instance was inapplicable", summary.theorem);
        }
        csv.row([
            summary.theorem.clone(),
            summary.instances.to_string(),
            summary.pass.to_string(),
            summary.fail.to_string(),
            summary.inapplicable.to_string(),
            summary.indeterminate.to_string(),
            num(summary.worst_margin),
        ])?;
    }
    jsonl.finish()?;
    csv.finish()?;
    if witnesses.is_empty() {
        return Ok(Outcome::Done);
    }
    let mut w = Jsonl::create(&dir, "witnesses.jsonl", &header)?;
    for rep in &witnesses {
        w.record(rep)?;
        eprintln!("falsified: {}", serde_json::to_string(rep)?);
    }
    w.finish()?;
    Ok(Outcome::Falsified)
}

pub fn chi(cfg: &RunConfig) -> Result<Outcome> {
    let header = Header::new("chi", cfg);
    let dir = cfg.out_dir();
    let knobs = &cfg.chi;
    let pairs: Vec<(usize, f64)> = knobs.dims.iter().flat_map(|&d| knobs.rhos.iter().map(move |&rho| (d, rho))).collect();
    let tables = pairs
        .par_iter()
        .map(|&(d, rho)| -> Result<Vec<[String; 7]>> {
            (0..=knobs.max_n[d - 1])
                .map(|n| {
                    let sol = chi_ball(n, d, rho, knobs.tol)?;
                    Ok([
                        num(rho),
                        d.to_string(),
                        n.to_string(),
                        sol.optimizer.support.len().to_string(),
                        num(sol.chi),
                        num(sol.kkt_residual),
                        sol.iterations.to_string(),
                    ])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::create(&dir, "chi.csv", &header, &["rho", "d", "n", "sites", "chi", "kkt_residual", "iterations"])?;
    for row in tables.iter().flatten() {
        csv.row(row)?;
    }
    csv.finish()?;
    if knobs.limit {
        let limits = pairs
            .par_iter()
            .map(|&(d, rho)| match chi_infinite(rho, d, knobs.limit_tol, knobs.limit_max_radius[d - 1]) {
                Ok(e) => Ok([num(rho), d.to_string(), num(e.value), num(e.error), e.radius.to_string(), "true".into()]),
                Err(CoreError::NonConvergence { iterations, best_residual }) => {
                    Ok([num(rho), d.to_string(), "nan".into(), num(best_residual), iterations.to_string(), "false".into()])
                }
                Err(e) => Err(e),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut csv = Csv::create(&dir, "chi_limit.csv", &header, &["rho", "d", "chi", "last_drop", "radius", "converged"])?;
        for row in &limits {
            csv.row(row)?;
        }
        csv.finish()?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct EvtLine {
    #[serde(rename = "L")]
    l: u64,
    n_l: u64,
    r_l: u64,
    boxes: usize,
    centering: anderson_edge::evt::CenteringEstimate,
    battery: Option<anderson_edge::evt::BatteryReport>,
    battery_passes: Option<bool>,
    spacing_ks: f64,
    spacing_ks_se: f64,
    chi_gap_mean: f64,
}

pub fn evt(cfg: &RunConfig) -> Result<Outcome> {
    let shape = cfg.shape();
    let spec = cfg.tail_spec()?;
    let header = Header::new("evt", cfg);
    let dir = cfg.out_dir();
    let knobs = &cfg.evt;
    let top_k = knobs.battery.top_k.min(cfg.k);
    let mut jsonl = Jsonl::create(&dir, "evt.jsonl", &header)?;
    let mut points = Csv::create(&dir, "evt_points.csv", &header, &["L", "sample", "rank", "height", "position"])?;
    let mut quantiles = Csv::create(&dir, "evt_quantiles.csv", &header, &["L", "i", "spacing", "exp_quantile"])?;
    for &l in &cfg.l {
        let (plan, dom) = make_plan(&shape, l, &overrides(cfg))?;
        if cfg.k > dom.len() {
            return Err(ConfigError::Invalid(format!("k={} exceeds |D_L|={} at L={l}", cfg.k, dom.len())).into());
        }
        let n_mc = (knobs.centering_exceedances / plan.tail_probability()).ceil().max(1.0) as usize;
        let centering = estimate_a_l(&spec, &plan, n_mc, member_seed(cfg.seed, l, usize::MAX))?;
        let members = (0..cfg.ensemble)
            .into_par_iter()
            .map(|j| -> Result<(PointCloud, f64)> {
                let (field, sr) = sample_spectrum(&dom, &spec, cfg.k, member_seed(cfg.seed, l, j))?;
                Ok((rescale(&sr, &plan, centering.a_l, spec.rho)?, field.max() - sr.eigenvalues[0]))
            })
            .collect::<Result<Vec<_>>>()?;
        let (clouds, gaps): (Vec<PointCloud>, Vec<f64>) = members.into_iter().unzip();
        let battery = if clouds.len() >= MIN_CLOUDS {
            let opts = anderson_edge::evt::BatteryOptions { top_k, ..knobs.battery.clone() };
            Some(poisson_tests(&clouds, &shape, &opts)?)
        } else {
            None
        };
        let (ks, ks_se) = spacing_ks_with_se(&clouds, top_k, knobs.bootstrap, cfg.seed);
        jsonl.record(&EvtLine {
            l,
            n_l: plan.n_l,
            r_l: plan.r_l,
            boxes: plan.box_origins.len(),
            battery_passes: battery.as_ref().map(|b| b.passes(knobs.level)),
            battery,
            centering,
            spacing_ks: ks,
            spacing_ks_se: ks_se,
            chi_gap_mean: gaps.iter().sum::<f64>() / gaps.len() as f64,
        })?;
        for (j, c) in clouds.iter().enumerate() {
            for (i, p) in c.points.iter().enumerate() {
                let pos = p.position.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
                points.row([l.to_string(), j.to_string(), (i + 1).to_string(), num(p.height), pos])?;
            }
        }
        let mut w = spacings(&clouds, top_k);
        w.sort_by(f64::total_cmp);
        let n = w.len() as f64;
        for (i, x) in w.iter().enumerate() {
            let q = -(-(i as f64 + 0.5) / n).ln_1p();
            quantiles.row([l.to_string(), (i + 1).to_string(), num(*x), num(q)])?;
        }
    }
    jsonl.finish()?;
    points.finish()?;
    quantiles.finish()?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SampleLine {
    #[serde(rename = "L")]
    l: u64,
    sample: usize,
    #[serde(flatten)]
    field: anderson_edge::field::FieldRecord,
}

pub fn sample_fields(cfg: &RunConfig) -> Result<Outcome> {
    let shape = cfg.shape();
    let spec = cfg.tail_spec()?;
    let header = Header::new("sample", cfg);
    let dir = cfg.out_dir();
    let mut jsonl = Jsonl::create(&dir, "sample.jsonl", &header)?;
    let mut csv = Csv::create(&dir, "sample_summary.csv", &header, &["L", "sample", "seed", "sites", "max", "mean"])?;
    for &l in &cfg.l {
        let (_, dom) = make_plan(&shape, l, &overrides(cfg))?;
        for j in 0..cfg.ensemble {
            let f = sample(&dom, &spec, member_seed(cfg.seed, l, j))?;
            let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
            csv.row([l.to_string(), j.to_string(), f.seed.to_string(), dom.len().to_string(), num(f.max()), num(mean)])?;
            jsonl.record(&SampleLine { l, sample: j, field: f.record() })?;
        }
    }
    jsonl.finish()?;
    csv.finish()?;
    Ok(Outcome::Done)
}
