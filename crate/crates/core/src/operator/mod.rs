//! `H_{D,ξ} = Δ + ξ` with Dirichlet conditions outside `D`, and its top
//! eigenpairs.
//!
//! Three solver routes share one contract: dense symmetric decomposition,
//! Sturm bisection with inverse iteration for tridiagonal (d = 1) operators,
//! and Lanczos with full reorthogonalization and locking.

mod dense;
pub mod lanczos;
pub mod tail;
pub mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::lattice::{LatticeDomain, Site};

pub use tail::log_amplitudes;
pub use tridiag::Tridiagonal;

/// Largest size handled by the dense route under [`SolverKind::Auto`].
pub const DENSE_LIMIT: usize = 2000;

/// Default residual tolerance, relative to `‖H‖∞`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Sparse symmetric operator in lexicographic site order.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    domain: LatticeDomain,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    adj: Vec<usize>,
}

impl Hamiltonian {
    /// Operator with potential `values` (one per site) on `domain`.
    pub fn from_potential(domain: &LatticeDomain, values: &[f64]) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::FieldMismatch(format!("{} values for {} sites", values.len(), domain.len())));
        }
        let two_d = 2.0 * domain.dim() as f64;
        let n = domain.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(n * 2 * domain.dim());
        offsets.push(0);
        for i in 0..n {
            adj.extend(domain.neighbor_indices(i));
            offsets.push(adj.len());
        }
        Ok(Hamiltonian {
            domain: domain.clone(),
            diag: values.iter().map(|v| v - two_d).collect(),
            offsets,
            adj,
        })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal entries `ξ(x) − 2d`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// The potential `ξ` recovered from the diagonal.
    pub fn potential(&self) -> Vec<f64> {
        let two_d = 2.0 * self.domain.dim() as f64;
        self.diag.iter().map(|v| v + two_d).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim() {
            let mut acc = self.diag[i] * x[i];
            for &j in self.neighbors(i) {
                acc += x[j];
            }
            y[i] = acc;
        }
    }

    /// `max_i Σ_j |H_ij|`.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.diag[i].abs() + self.neighbors(i).len() as f64)
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &j in self.neighbors(i) {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// The tridiagonal form, when every edge joins consecutive indices
    /// (always the case for `d = 1`).
    pub fn as_tridiagonal(&self) -> Option<Tridiagonal> {
        let n = self.dim();
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            for &j in self.neighbors(i) {
                if j == i + 1 {
                    off[i] = 1.0;
                } else if j + 1 != i {
                    return None;
                }
            }
        }
        Some(Tridiagonal::new(self.diag.clone(), off))
    }

    /// `‖Hψ − λψ‖₂`.
    pub fn residual(&self, lambda: f64, psi: &[f64]) -> f64 {
        let mut y = vec![0.0; psi.len()];
        self.apply(psi, &mut y);
        y.iter().zip(psi).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
    }
}

/// `H_{D,ξ}` for a field sampled on `domain`.
pub fn assemble(domain: &LatticeDomain, field: &PotentialField) -> Result<Hamiltonian> {
    if field.domain() != domain {
        return Err(Error::FieldMismatch("field is defined on a different site set".into()));
    }
    Hamiltonian::from_potential(domain, field.values())
}

/// `H` with `s` subtracted from the diagonal on `D ∖ U`.
pub fn rank_one_deform(h: &Hamiltonian, u: &LatticeDomain, s: f64) -> Result<Hamiltonian> {
    if !u.is_subset_of(&h.domain) {
        return Err(Error::NotSubset("U"));
    }
    let mut out = h.clone();
    for (i, site) in h.domain.sites().iter().enumerate() {
        if !u.contains(site) {
            out.diag[i] -= s;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Tridiagonal route when available, dense up to [`DENSE_LIMIT`], Lanczos beyond.
    #[default]
    Auto,
    Dense,
    Tridiagonal,
    Lanczos,
}

/// Top-k eigenpairs in decreasing order.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub centers: Vec<Site>,
    pub residuals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct SpectralRecord {
    pub eigenvalues: Vec<f64>,
    pub centers: Vec<Site>,
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn record(&self, with_vectors: bool) -> SpectralRecord {
        SpectralRecord {
            eigenvalues: self.eigenvalues.clone(),
            centers: self.centers.clone(),
            residuals: self.residuals.clone(),
            eigenvectors: with_vectors.then(|| self.eigenvectors.clone()),
        }
    }
}

/// Lexicographically first maximiser of `|ψ|`.
pub fn localization_center(domain: &LatticeDomain, psi: &[f64]) -> Result<Site> {
    Ok(domain.site(center_index(psi)?).clone())
}

/// Index form of [`localization_center`]; sites are stored in lexicographic
/// order, so the first maximal index is the tie-break winner.
pub fn center_index(psi: &[f64]) -> Result<usize> {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, v) in psi.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if best_abs <= 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(best)
}

/// Top-k eigenpairs with the default route.
pub fn top_eigs(h: &Hamiltonian, k: usize, tol: f64) -> Result<SpectralResult> {
    top_eigs_with(h, k, tol, SolverKind::Auto)
}

/// Top-k eigenpairs; `tol` is relative to `‖H‖∞`.
pub fn top_eigs_with(h: &Hamiltonian, k: usize, tol: f64, solver: SolverKind) -> Result<SpectralResult> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} outside 1..={n}")));
    }
    let scale = h.norm_inf().max(1.0);
    let abs_tol = tol * scale;
    let (vals, mut vecs) = match resolve(h, solver) {
        SolverKind::Dense => dense::top_pairs(h, k),
        SolverKind::Tridiagonal => {
            let t = h.as_tridiagonal().ok_or_else(|| {
                Error::InvalidParameter("tridiagonal solver needs a chain-ordered operator".into())
            })?;
            t.top_pairs(k)
        }
        _ => lanczos::top_pairs(h, k, abs_tol, &lanczos::LanczosOptions::default())?,
    };
    let mut centers = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (lambda, v) in vals.iter().zip(vecs.iter_mut()) {
        let c = center_index(v)?;
        if v[c] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        centers.push(h.domain.site(c).clone());
        let r = h.residual(*lambda, v);
        if !(r <= abs_tol.max(1e-12 * scale)) {
            return Err(Error::NonConvergence { iterations: 0, best_residual: r });
        }
        residuals.push(r);
    }
    Ok(SpectralResult { eigenvalues: vals, eigenvectors: vecs, centers, residuals })
}

fn resolve(h: &Hamiltonian, solver: SolverKind) -> SolverKind {
    match solver {
        SolverKind::Auto if h.domain.dim() == 1 => SolverKind::Tridiagonal,
        SolverKind::Auto if h.dim() <= DENSE_LIMIT => SolverKind::Dense,
        SolverKind::Auto => SolverKind::Lanczos,
        other => other,
    }
}

/// Full spectrum, decreasing, eigenvalues only.
pub fn eigenvalues(h: &Hamiltonian) -> Vec<f64> {
    match h.as_tridiagonal() {
        Some(t) if h.domain.dim() == 1 => t.top_values(h.dim()),
        _ => dense::all_values(h),
    }
}

/// Top-k eigenvalues only; cheaper than [`top_eigs`] when vectors are not needed.
pub fn top_eigenvalues(h: &Hamiltonian, k: usize) -> Vec<f64> {
    let k = k.min(h.dim());
    match h.as_tridiagonal() {
        Some(t) if h.domain.dim() == 1 => t.top_values(k),
        _ if h.dim() > DENSE_LIMIT => top_eigs(h, k, DEFAULT_TOL).map(|r| r.eigenvalues).unwrap_or_default(),
        _ => dense::reduced(h).top_values(k),
    }
}

/// All eigenvalues `≥ x`, decreasing.
pub fn eigenvalues_above(h: &Hamiltonian, x: f64) -> Result<Vec<f64>> {
    let n = h.dim();
    match h.as_tridiagonal() {
        Some(t) if h.domain.dim() == 1 => {
            // count_below is strict, so this keeps values equal to x
            let above = n - t.count_below(x);
            Ok(t.top_values(above))
        }
        _ if n <= DENSE_LIMIT => {
            let t = dense::reduced(h);
            Ok(t.top_values(n - t.count_below(x)))
        }
        _ => {
            let mut k = 8.min(n);
            loop {
                let vals = top_eigs(h, k, DEFAULT_TOL)?.eigenvalues;
                if vals.last().is_none_or(|&v| v < x) || k == n {
                    return Ok(vals.into_iter().filter(|&v| v >= x).collect());
                }
                k = (2 * k).min(n);
            }
        }
    }
}

/// Principal eigenvalue `λ^(1)`.
pub fn principal_eigenvalue(h: &Hamiltonian) -> Result<f64> {
    if h.dim() == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    match h.as_tridiagonal() {
        Some(t) if h.domain.dim() == 1 => Ok(t.kth_largest(1)),
        _ if h.dim() > DENSE_LIMIT => Ok(top_eigs(h, 1, DEFAULT_TOL)?.eigenvalues[0]),
        _ => Ok(dense::reduced(h).kth_largest(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h1(values: &[f64]) -> Hamiltonian {
        Hamiltonian::from_potential(&LatticeDomain::interval(0, values.len() as i64 - 1), values).unwrap()
    }

    #[test]
    fn assembly_examples() {
        let single = h1(&[5.0]);
        assert_eq!(single.to_dense()[(0, 0)], 3.0);
        let pair = h1(&[0.0, 0.0]).to_dense();
        assert_eq!(pair, nalgebra::DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]));
        let d2 = LatticeDomain::cuboid(&[0, 0], &[1, 1]);
        assert_eq!(Hamiltonian::from_potential(&d2, &[0.0]).unwrap().diag(), &[-4.0]);
    }

    #[test]
    fn assemble_rejects_mismatch() {
        let f = crate::field::PotentialField::from_values(LatticeDomain::interval(0, 2), vec![0.0; 3]).unwrap();
        assert!(assemble(&LatticeDomain::interval(0, 3), &f).is_err());
    }

    #[test]
    fn two_by_two_all_routes() {
        for solver in [SolverKind::Dense, SolverKind::Tridiagonal, SolverKind::Lanczos] {
            let r = top_eigs_with(&h1(&[0.0, 0.0]), 2, DEFAULT_TOL, solver).unwrap();
            assert_abs_diff_eq!(r.eigenvalues[0], -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.eigenvalues[1], -3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn path_principal_closed_form() {
        let r = top_eigs(&h1(&[0.0; 3]), 1, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(r.eigenvalues[0], -2.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn center_examples() {
        let d = LatticeDomain::interval(0, 1);
        assert_eq!(localization_center(&d, &[0.6, 0.8]).unwrap(), Site::from(1));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(localization_center(&d, &[h, h]).unwrap(), Site::from(0));
        let d3 = LatticeDomain::interval(0, 2);
        assert_eq!(localization_center(&d3, &[0.0, -1.0, 0.0]).unwrap(), Site::from(1));
        assert!(matches!(localization_center(&d, &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn deform_examples() {
        let h = h1(&[0.0, 0.0]);
        let u = LatticeDomain::interval(0, 0);
        assert_eq!(rank_one_deform(&h, &u, 0.0).unwrap().diag(), h.diag());
        assert_eq!(rank_one_deform(&h, &u, 10.0).unwrap().diag(), &[-2.0, -12.0]);
        let far = rank_one_deform(&h, &u, 1e6).unwrap();
        assert_abs_diff_eq!(principal_eigenvalue(&far).unwrap(), -2.0, epsilon = 1e-5);
        assert!(rank_one_deform(&h, &LatticeDomain::interval(5, 5), 1.0).is_err());
    }

    #[test]
    fn k_out_of_range() {
        assert!(top_eigs(&h1(&[0.0; 3]), 4, DEFAULT_TOL).is_err());
        assert!(top_eigs(&h1(&[0.0; 3]), 0, DEFAULT_TOL).is_err());
    }
}
