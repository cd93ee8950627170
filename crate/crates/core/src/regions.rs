//! The large-field region `D_{R,A}(ξ)`, its components, trimming, and the
//! contracted graph distance to a component.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::lattice::{ball, boundary, component_labels, LatticeDomain, Site};
use crate::operator::{top_eigs, Hamiltonian, DEFAULT_TOL};
use crate::verify::epsilon_r;

/// Sentinel for "unreachable inside D".
pub const UNREACHABLE: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct RegionDecomposition {
    pub base: LatticeDomain,
    pub r: u64,
    pub a: f64,
    /// `λ^(1)_D(ξ)` the region was cut against.
    pub lambda1: f64,
    pub region: LatticeDomain,
    pub components: Vec<LatticeDomain>,
    /// Principal eigenvalue and unit eigenvector of each component.
    pub principal: Vec<(f64, Vec<f64>)>,
    pub trimmed: Vec<bool>,
    /// Component index per base site, `None` outside the region.
    labels: Vec<Option<usize>>,
}

/// `D_{R,A}(ξ) = ⋃_{ξ(z) ≥ λ₁ − 2A} B_R(z) ∩ D` with per-component data.
pub fn extract(domain: &LatticeDomain, field: &PotentialField, r: u64, a: f64, lambda1: f64) -> Result<RegionDecomposition> {
    if r < 1 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("A must be positive, got {a}")));
    }
    if field.domain() != domain {
        return Err(Error::FieldMismatch("field is defined on a different site set".into()));
    }
    let cut = lambda1 - 2.0 * a;
    let mut in_region = vec![false; domain.len()];
    for (i, z) in domain.sites().iter().enumerate() {
        if field.value(i) >= cut {
            for y in ball(z, r, Some(domain)).sites() {
                in_region[domain.index_of(y).expect("ball restricted to domain")] = true;
            }
        }
    }
    let region = domain.filter(|i, _| in_region[i]);
    let (_, members) = component_labels(&region);
    let mut labels = vec![None; domain.len()];
    let mut components = Vec::with_capacity(members.len());
    let mut principal = Vec::with_capacity(members.len());
    for (c, idx) in members.iter().enumerate() {
        let comp = LatticeDomain::new(domain.dim(), idx.iter().map(|&i| region.site(i).clone()).collect())?;
        let values: Vec<f64> = comp
            .sites()
            .iter()
            .map(|s| {
                let i = domain.index_of(s).expect("component inside domain");
                labels[i] = Some(c);
                field.value(i)
            })
            .collect();
        let h = Hamiltonian::from_potential(&comp, &values)?;
        let sr = top_eigs(&h, 1, DEFAULT_TOL)?;
        principal.push((sr.eigenvalues[0], sr.eigenvectors[0].clone()));
        components.push(comp);
    }
    let eps = epsilon_r(domain.dim(), a, r);
    let top = principal
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
        .map(|(i, _)| i);
    let trimmed = principal
        .iter()
        .enumerate()
        .map(|(i, (l, _))| {
            let below = *l < lambda1 - a;
            if Some(i) == top && below {
                *l < lambda1 - a - eps
            } else {
                below
            }
        })
        .collect();
    Ok(RegionDecomposition {
        base: domain.clone(),
        r,
        a,
        lambda1,
        region,
        components,
        principal,
        trimmed,
        labels,
    })
}

impl RegionDecomposition {
    /// Component index of base site `i`, if it lies in the region.
    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn record(&self, distances: Option<&ContractedDistance>) -> DecompositionRecord {
        DecompositionRecord {
            r: self.r,
            a: self.a,
            lambda1: self.lambda1,
            components: self.components.iter().map(|c| c.sites().to_vec()).collect(),
            principal_eigenvalues: self.principal.iter().map(|p| p.0).collect(),
            trimmed: self.trimmed.clone(),
            distances: distances.map(|d| d.dist.clone()),
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub r: u64,
    pub a: f64,
    pub lambda1: f64,
    pub components: Vec<Vec<Site>>,
    pub principal_eigenvalues: Vec<f64>,
    pub trimmed: Vec<bool>,
    /// Per component, per base site; [`UNREACHABLE`] encodes +∞.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<u64>>>,
}

/// Union of the untrimmed components.
pub fn trim(dec: &RegionDecomposition) -> Result<LatticeDomain> {
    let kept: Vec<Site> = dec
        .components
        .iter()
        .zip(&dec.trimmed)
        .filter(|(_, t)| !**t)
        .flat_map(|(c, _)| c.sites().iter().cloned())
        .collect();
    if kept.is_empty() {
        return Err(Error::AllTrimmed);
    }
    LatticeDomain::new(dec.base.dim(), kept)
}

/// Graph distance in `D` after contracting each component to a vertex.
#[derive(Clone, Debug)]
pub struct ContractedDistance {
    /// `dist[c][i]` = distance from base site `i` to component `c`.
    pub dist: Vec<Vec<u64>>,
}

impl ContractedDistance {
    pub fn get(&self, component: usize, site: usize) -> u64 {
        self.dist[component][site]
    }
}

pub fn contracted_distance(dec: &RegionDecomposition) -> ContractedDistance {
    let base = &dec.base;
    let members: Vec<Vec<usize>> = dec
        .components
        .iter()
        .map(|c| c.sites().iter().map(|s| base.index_of(s).expect("component in base")).collect())
        .collect();
    let dist = (0..dec.components.len())
        .map(|c| {
            let mut d = vec![UNREACHABLE; base.len()];
            let mut queue = VecDeque::new();
            for &i in &members[c] {
                d[i] = 0;
                queue.push_back(i);
            }
            while let Some(v) = queue.pop_front() {
                let next = d[v] + 1;
                for u in base.neighbor_indices(v) {
                    if d[u] != UNREACHABLE {
                        continue;
                    }
                    match dec.labels[u] {
                        Some(other) if other != c => {
                            for &w in &members[other] {
                                d[w] = next;
                                queue.push_back(w);
                            }
                        }
                        _ => {
                            d[u] = next;
                            queue.push_back(u);
                        }
                    }
                }
            }
            d
        })
        .collect();
    ContractedDistance { dist }
}

/// Violation counts of the distance axioms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    pub checked: usize,
}

/// Exhaustive check of (D0)–(D2). The `y` in (D1) ranges over sites joined to
/// `z` by an `R`-step path inside `D`, the sites a walk started at `z` can
/// reach on leaving `B_{R−1}(z)`.
pub fn check_axioms(dec: &RegionDecomposition, cd: &ContractedDistance) -> AxiomReport {
    let base = &dec.base;
    let mut rep = AxiomReport::default();
    let plus = |a: u64, b: u64| a.saturating_add(b);
    for c in 0..dec.components.len() {
        let d = &cd.dist[c];
        for s in dec.components[c].sites() {
            rep.checked += 1;
            if d[base.index_of(s).unwrap()] != 0 {
                rep.d0 += 1;
            }
        }
        for z in 0..base.len() {
            if dec.labels[z].is_some() {
                continue;
            }
            for y in sites_at_path_distance(base, z, dec.r) {
                rep.checked += 1;
                if d[z] > plus(d[y], dec.r) {
                    rep.d1 += 1;
                }
            }
        }
        for (other, comp) in dec.components.iter().enumerate() {
            if other == c {
                continue;
            }
            let bd = boundary(comp);
            for z in comp.sites() {
                let dz = d[base.index_of(z).unwrap()];
                for y in bd.sites() {
                    rep.checked += 1;
                    let dy = base.index_of(y).map_or(UNREACHABLE, |j| d[j]);
                    if dz > plus(dy, 1) {
                        rep.d2 += 1;
                    }
                }
            }
        }
    }
    rep
}

/// Sites at graph distance exactly `r` from `start` inside `domain`.
fn sites_at_path_distance(domain: &LatticeDomain, start: usize, r: u64) -> Vec<usize> {
    let mut seen = std::collections::HashMap::new();
    seen.insert(start, 0u64);
    let mut frontier = vec![start];
    for step in 1..=r {
        let mut next = Vec::new();
        for &v in &frontier {
            for u in domain.neighbor_indices(v) {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(u) {
                    e.insert(step);
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    frontier
}

/// Comparison of the contracted distance with the ℓ¹ distance.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceComparison {
    /// Pairs with `d(x,C) > dist(x,C)`.
    pub upper_violations: usize,
    pub samples: usize,
    /// Least-squares slope of `d` against `dist`.
    pub c1: f64,
    /// Smallest `c₂` with `d ≥ c₁·dist − c₂·R` on the sample.
    pub c2: f64,
    /// Smallest `c₂` with `d ≥ dist − c₂·R`.
    pub c2_unit_slope: f64,
}

pub fn distance_compare(dec: &RegionDecomposition, cd: &ContractedDistance) -> DistanceComparison {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut upper_violations = 0;
    for (c, comp) in dec.components.iter().enumerate() {
        for (i, x) in dec.base.sites().iter().enumerate() {
            let d = cd.dist[c][i];
            if d == UNREACHABLE {
                continue;
            }
            let l1 = comp.l1_distance_to(x).unwrap_or(0);
            if d > l1 {
                upper_violations += 1;
            }
            pairs.push((l1 as f64, d as f64));
        }
    }
    let r = dec.r as f64;
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    let need = |slope: f64| pairs.iter().map(|p| (slope * p.0 - p.1) / r).fold(0.0, f64::max);
    DistanceComparison {
        upper_violations,
        samples: pairs.len(),
        c1,
        c2: need(c1),
        c2_unit_slope: need(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::principal_eigenvalue;

    fn line_field(values: Vec<f64>) -> (LatticeDomain, PotentialField) {
        let d = LatticeDomain::interval(0, values.len() as i64 - 1);
        let f = PotentialField::from_values(d.clone(), values).unwrap();
        (d, f)
    }

    fn lambda1(d: &LatticeDomain, f: &PotentialField) -> f64 {
        principal_eigenvalue(&Hamiltonian::from_potential(d, f.values()).unwrap()).unwrap()
    }

    #[test]
    fn constant_field_is_all_region() {
        let (d, f) = line_field(vec![0.0, 0.0]);
        let dec = extract(&d, &f, 1, 0.5, -1.0).unwrap();
        assert_eq!(dec.region, d);
        assert_eq!(dec.components.len(), 1);
        assert_eq!(trim(&dec).unwrap(), d);
    }

    #[test]
    fn single_peak_region() {
        let mut v = vec![-10.0; 21];
        v[3] = 10.0;
        let (d, f) = line_field(v);
        let l1 = lambda1(&d, &f);
        assert!(l1 > 8.0 && l1 < 9.0);
        let dec = extract(&d, &f, 2, 1.0, l1).unwrap();
        assert_eq!(dec.region, LatticeDomain::interval(1, 5));
        assert_eq!(dec.components.len(), 1);
        assert!(!dec.trimmed[0]);
    }

    #[test]
    fn huge_a_covers_everything() {
        let mut v = vec![-3.0; 9];
        v[4] = 2.0;
        let (d, f) = line_field(v);
        let l1 = lambda1(&d, &f);
        let dec = extract(&d, &f, 1, 100.0, l1).unwrap();
        assert_eq!(dec.region, d);
    }

    #[test]
    fn low_peak_component_trimmed() {
        let mut v = vec![-10.0; 100];
        v[20] = 10.0;
        v[70] = 2.0;
        let (d, f) = line_field(v);
        let l1 = lambda1(&d, &f);
        let dec = extract(&d, &f, 2, 5.0, l1).unwrap();
        assert_eq!(dec.components.len(), 2);
        assert_eq!(dec.trimmed, vec![false, true]);
        assert_eq!(trim(&dec).unwrap(), LatticeDomain::interval(18, 22));
    }

    #[test]
    fn contracted_distance_examples() {
        let mut v = vec![-10.0; 11];
        v[5] = 10.0;
        let (d, f) = line_field(v);
        let l1 = lambda1(&d, &f);
        let dec = extract(&d, &f, 1, 1.0, l1).unwrap();
        assert_eq!(dec.components[0], LatticeDomain::interval(4, 6));
        let cd = contracted_distance(&dec);
        assert_eq!(cd.get(0, 5), 0);
        assert_eq!(cd.get(0, 7), 1);
        assert_eq!(cd.get(0, 9), 3);
        assert_eq!(check_axioms(&dec, &cd), AxiomReport { checked: check_axioms(&dec, &cd).checked, ..Default::default() });
    }

    #[test]
    fn intervening_component_shortens_distance() {
        // components {0,1} and {3..7}: from 11 the contracted path is 6 steps
        let mut v = vec![-20.0; 12];
        v[0] = 10.0;
        v[4] = 9.8;
        v[5] = 9.8;
        v[6] = 9.8;
        let (d, f) = line_field(v);
        let l1 = lambda1(&d, &f);
        let dec = extract(&d, &f, 1, 1.5, l1).unwrap();
        let cd = contracted_distance(&dec);
        let target = dec.components.iter().position(|c| c.contains(&Site::from(0))).unwrap();
        let widths: Vec<usize> = dec.components.iter().map(|c| c.len()).collect();
        let middle = widths[1 - target];
        let dist = dec.components[target].l1_distance_to(&Site::from(11)).unwrap();
        assert_eq!(widths.len(), 2);
        assert_eq!(cd.get(target, 11), dist - middle as u64 + 1);
        assert_eq!(cd.get(target, 11), 6);
    }

    #[test]
    fn unreachable_sites_get_sentinel() {
        let d = LatticeDomain::new(1, vec![0, 1, 2, 6, 7].into_iter().map(Site::from).collect()).unwrap();
        let f = PotentialField::from_values(d.clone(), vec![5.0, -9.0, -9.0, -9.0, -9.0]).unwrap();
        let l1 = lambda1(&d, &f);
        let dec = extract(&d, &f, 1, 0.5, l1).unwrap();
        let cd = contracted_distance(&dec);
        assert_eq!(cd.get(0, 4), UNREACHABLE);
        let rec = serde_json::to_value(dec.record(Some(&cd))).unwrap();
        assert_eq!(rec["distances"][0][4], serde_json::json!(u64::MAX));
    }
}
