//! Finite subsets of `Z^d`: domains, ℓ¹ balls, components and boundaries.
//!
//! Sites are kept in lexicographic order everywhere, so "first in order" is
//! the tie-break used by localization centers and component ordering alike.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A lattice point. Ordering is lexicographic in the coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(d: usize) -> Self {
        Site(SmallVec::from_elem(0, d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    /// The `2d` nearest neighbours, in the fixed order −e₁, +e₁, −e₂, ...
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut c = self.0.clone();
                c[axis] += step;
                Site(c)
            })
        })
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site(SmallVec::from_vec(v))
    }
}

impl From<i64> for Site {
    fn from(x: i64) -> Self {
        Site::new(&[x])
    }
}

/// A finite subset of `Z^d` with nearest-neighbour adjacency.
#[derive(Clone, Serialize, Deserialize)]
#[serde(into = "DomainRepr", try_from = "DomainRepr")]
pub struct LatticeDomain {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    d: usize,
    sites: Vec<Vec<i64>>,
}

impl From<LatticeDomain> for DomainRepr {
    fn from(dom: LatticeDomain) -> Self {
        DomainRepr {
            d: dom.d,
            sites: dom.sites.iter().map(|s| s.coords().to_vec()).collect(),
        }
    }
}

impl TryFrom<DomainRepr> for LatticeDomain {
    type Error = Error;

    fn try_from(r: DomainRepr) -> Result<Self> {
        LatticeDomain::new(r.d, r.sites.into_iter().map(Site::from).collect())
    }
}

impl PartialEq for LatticeDomain {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.sites == other.sites
    }
}

impl fmt::Debug for LatticeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeDomain")
            .field("d", &self.d)
            .field("sites", &self.sites)
            .finish()
    }
}

impl LatticeDomain {
    /// Builds a domain from any collection of sites; duplicates are merged.
    pub fn new(d: usize, mut sites: Vec<Site>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if let Some(bad) = sites.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(Self::from_sorted(d, sites))
    }

    fn from_sorted(d: usize, sites: Vec<Site>) -> Self {
        let index = sites.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        LatticeDomain { d, sites, index }
    }

    pub fn empty(d: usize) -> Self {
        Self::from_sorted(d, Vec::new())
    }

    /// One-dimensional interval `{lo, ..., hi}`.
    pub fn interval(lo: i64, hi: i64) -> Self {
        Self::from_sorted(1, (lo..=hi).map(Site::from).collect())
    }

    /// The box `∏ [lo_i, lo_i + side_i)`.
    pub fn cuboid(lo: &[i64], sides: &[usize]) -> Self {
        let d = lo.len();
        let mut sites = vec![Site::new(lo)];
        for axis in 0..d {
            let mut next = Vec::with_capacity(sites.len() * sides[axis]);
            for s in &sites {
                for step in 0..sides[axis] as i64 {
                    let mut c = s.clone();
                    c.0[axis] += step;
                    next.push(c);
                }
            }
            sites = next;
        }
        if sides.contains(&0) {
            sites.clear();
        }
        sites.sort_unstable();
        Self::from_sorted(d, sites)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    /// Indices of in-domain neighbours of site `i`.
    pub fn neighbor_indices(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.sites[i].neighbors().filter_map(move |y| self.index_of(&y))
    }

    pub fn is_subset_of(&self, other: &LatticeDomain) -> bool {
        self.d == other.d && self.sites.iter().all(|s| other.contains(s))
    }

    /// Sites satisfying `keep`, order preserved.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Site) -> bool) -> LatticeDomain {
        let sites = self
            .sites
            .iter()
            .enumerate()
            .filter(|(i, s)| keep(*i, s))
            .map(|(_, s)| s.clone())
            .collect();
        Self::from_sorted(self.d, sites)
    }

    pub fn difference(&self, other: &LatticeDomain) -> LatticeDomain {
        self.filter(|_, s| !other.contains(s))
    }

    pub fn union(&self, other: &LatticeDomain) -> LatticeDomain {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        sites.sort_unstable();
        sites.dedup();
        Self::from_sorted(self.d, sites)
    }

    /// Inclusive coordinate-wise bounds, `None` for the empty domain.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let first = self.sites.first()?;
        let mut lo = first.coords().to_vec();
        let mut hi = lo.clone();
        for s in &self.sites {
            for (a, &c) in s.coords().iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        Some((lo, hi))
    }

    /// ℓ¹ distance from `x` to the nearest site of the domain.
    pub fn l1_distance_to(&self, x: &Site) -> Option<u64> {
        self.sites.iter().map(|s| s.l1(x)).min()
    }

    /// ℓ¹ diameter, `0` for fewer than two sites.
    pub fn diameter(&self) -> u64 {
        let mut best = 0;
        for (i, a) in self.sites.iter().enumerate() {
            for b in &self.sites[i + 1..] {
                best = best.max(a.l1(b));
            }
        }
        best
    }
}

/// Bounded open region of `R^d` in continuum units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuumShape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    UnionOfBoxes { boxes: Vec<(Vec<f64>, Vec<f64>)> },
}

impl ContinuumShape {
    /// The open unit interval or cube `(0,1)^d`.
    pub fn unit_cube(d: usize) -> Self {
        ContinuumShape::Box { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            ContinuumShape::Box { lo, .. } => lo.len(),
            ContinuumShape::Ball { center, .. } => center.len(),
            ContinuumShape::UnionOfBoxes { boxes } => boxes.first().map_or(0, |b| b.0.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("shape has no dimensions".into()));
        }
        let check_box = |lo: &[f64], hi: &[f64]| -> Result<()> {
            if lo.len() != d || hi.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: lo.len().max(hi.len()) });
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                return Err(Error::InvalidParameter("box needs finite lo < hi".into()));
            }
            Ok(())
        };
        match self {
            ContinuumShape::Box { lo, hi } => check_box(lo, hi),
            ContinuumShape::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter("ball needs finite center and radius > 0".into()));
                }
                Ok(())
            }
            ContinuumShape::UnionOfBoxes { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::InvalidParameter("union of zero boxes".into()));
                }
                boxes.iter().try_for_each(|(lo, hi)| check_box(lo, hi))
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let in_box = |lo: &[f64], hi: &[f64]| p.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a < x && x < b);
        match self {
            ContinuumShape::Box { lo, hi } => in_box(lo, hi),
            ContinuumShape::Ball { center, radius } => {
                let r2: f64 = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                r2 < radius * radius
            }
            ContinuumShape::UnionOfBoxes { boxes } => boxes.iter().any(|(lo, hi)| in_box(lo, hi)),
        }
    }

    /// Closed bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ContinuumShape::Box { lo, hi } => (lo.clone(), hi.clone()),
            ContinuumShape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ContinuumShape::UnionOfBoxes { boxes } => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for (a, b) in boxes {
                    for i in 0..d {
                        lo[i] = lo[i].min(a[i]);
                        hi[i] = hi[i].max(b[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match self {
            ContinuumShape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            ContinuumShape::Ball { radius, .. } => {
                let d = self.dim() as f64;
                let half_d = d / 2.0;
                std::f64::consts::PI.powf(half_d) / statrs::function::gamma::gamma(half_d + 1.0)
                    * radius.powf(d)
            }
            ContinuumShape::UnionOfBoxes { boxes } => union_volume(boxes),
        }
    }
}

/// Exact volume of a union of boxes by coordinate compression.
fn union_volume(boxes: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let d = boxes[0].0.len();
    let mut grids: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut g: Vec<f64> = boxes.iter().flat_map(|(lo, hi)| [lo[i], hi[i]]).collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    let counts: Vec<usize> = grids.iter_mut().map(|g| g.len() - 1).collect();
    if counts.contains(&0) {
        return 0.0;
    }
    loop {
        let mid: Vec<f64> = (0..d).map(|i| 0.5 * (grids[i][idx[i]] + grids[i][idx[i] + 1])).collect();
        if boxes.iter().any(|(lo, hi)| (0..d).all(|i| lo[i] < mid[i] && mid[i] < hi[i])) {
            total += (0..d).map(|i| grids[i][idx[i] + 1] - grids[i][idx[i]]).product::<f64>();
        }
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == d {
                return total;
            }
        }
    }
}

/// `D_L = {x ∈ Z^d : x/L ∈ shape}`.
pub fn scale_domain(shape: &ContinuumShape, l: u64) -> Result<LatticeDomain> {
    if l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    shape.validate()?;
    let d = shape.dim();
    let lf = l as f64;
    let (lo, hi) = shape.bounds();
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|i| ((lo[i] * lf).floor() as i64, (hi[i] * lf).ceil() as i64))
        .collect();
    let mut sites = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut point = vec![0.0; d];
    'outer: loop {
        for i in 0..d {
            point[i] = cur[i] as f64 / lf;
        }
        if shape.contains(&point) {
            sites.push(Site::new(&cur));
        }
        // odometer with the last axis fastest keeps the output lexicographic
        let mut axis = d;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            cur[axis] += 1;
            if cur[axis] <= ranges[axis].1 {
                break;
            }
            cur[axis] = ranges[axis].0;
        }
    }
    if sites.is_empty() {
        return Err(Error::DegenerateDomain(format!("no lattice points at L={l}")));
    }
    Ok(LatticeDomain::from_sorted(d, sites))
}

/// ℓ¹ ball `B_R(center)`, optionally intersected with a domain.
pub fn ball(center: &Site, r: u64, within: Option<&LatticeDomain>) -> LatticeDomain {
    let d = center.dim();
    let r = r as i64;
    let mut sites = Vec::new();
    let mut offset = vec![-r; d];
    'outer: loop {
        let norm: i64 = offset.iter().map(|o| o.abs()).sum();
        if norm <= r {
            let s = Site(center.0.iter().zip(&offset).map(|(c, o)| c + o).collect());
            if within.is_none_or(|w| w.contains(&s)) {
                sites.push(s);
            }
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            offset[axis] += 1;
            if offset[axis] <= r {
                break;
            }
            offset[axis] = -r;
        }
    }
    LatticeDomain::from_sorted(d, sites)
}

/// ℓ¹ sphere `{y : |y − center|₁ = r}`.
pub fn sphere(center: &Site, r: u64) -> Vec<Site> {
    ball(center, r, None)
        .sites()
        .iter()
        .filter(|s| s.l1(center) == r)
        .cloned()
        .collect()
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Maximal nearest-neighbour-connected pieces, ordered by smallest site.
pub fn connected_components(u: &LatticeDomain) -> Vec<LatticeDomain> {
    component_labels(u)
        .1
        .into_iter()
        .map(|members| LatticeDomain::from_sorted(u.dim(), members.into_iter().map(|i| u.site(i).clone()).collect()))
        .collect()
}

/// Component label per site plus the member indices of each component, in
/// order of each component's smallest site.
pub fn component_labels(u: &LatticeDomain) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = u.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in u.neighbor_indices(i) {
            if j > i {
                uf.union(i, j);
            }
        }
    }
    let mut label_of_root: HashMap<usize, usize> = HashMap::new();
    let mut labels = vec![0; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    // sites are sorted, so the first time a root shows up is at its smallest site
    for (i, label) in labels.iter_mut().enumerate() {
        let root = uf.find(i);
        let next = label_of_root.len();
        let l = *label_of_root.entry(root).or_insert(next);
        if l == members.len() {
            members.push(Vec::new());
        }
        members[l].push(i);
        *label = l;
    }
    (labels, members)
}

/// Outer vertex boundary: sites outside `v` with a neighbour in `v`.
pub fn boundary(v: &LatticeDomain) -> LatticeDomain {
    let mut out: Vec<Site> = v
        .sites()
        .iter()
        .flat_map(|s| s.neighbors())
        .filter(|y| !v.contains(y))
        .collect();
    out.sort_unstable();
    out.dedup();
    LatticeDomain::from_sorted(v.dim(), out)
}
