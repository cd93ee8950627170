//! Lanczos iteration with full reorthogonalization, locking of converged
//! Ritz pairs and explicit restarts.
//!
//! Each cycle builds a Krylov basis orthogonal to the locked vectors, extracts
//! the top Ritz pairs, verifies their residuals on `H` directly and locks the
//! leading run of converged ones. The next cycle starts from the sum of the
//! still-wanted Ritz vectors.

use super::tridiag::Tridiagonal;
use super::Hamiltonian;
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Krylov basis size per cycle.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Seed of the start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { max_basis: 300, max_restarts: 60, seed: 0x5EED_1A2C }
    }
}

/// Top-k eigenpairs of `h`, residuals below `abs_tol`.
pub fn top_pairs(h: &Hamiltonian, k: usize, abs_tol: f64, opts: &LanczosOptions) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = h.dim();
    let scale = h.norm_inf().max(1.0);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let root = Stream::new(opts.seed);
    let mut start = random_unit(&mut root.derive(0), n);
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0;
    let mut w = vec![0.0; n];

    for cycle in 0..opts.max_restarts {
        let need = k - locked.len();
        if need == 0 {
            break;
        }
        orthogonalize(&mut start, &locked);
        orthogonalize(&mut start, &locked);
        if norm(&start) < 1e-8 {
            start = random_unit(&mut root.derive(cycle as u64 + 1), n);
            orthogonalize(&mut start, &locked);
            orthogonalize(&mut start, &locked);
        }
        scale_to_unit(&mut start);

        let m_max = (n - locked.len()).min(opts.max_basis).max(1);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        for j in 0..m_max {
            iterations += 1;
            h.apply(&basis[j], &mut w);
            let alpha = dot(&basis[j], &w);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                orthogonalize(&mut w, &locked);
                orthogonalize(&mut w, &basis);
            }
            alphas.push(alpha);
            let beta = norm(&w);
            let exhausted = beta <= 1e-12 * scale || j + 1 == m_max;
            if j + 1 >= need && ((j + 1) % 10 == 0 || exhausted) {
                let t = Tridiagonal::new(alphas.clone(), betas.clone());
                let (_, s) = t.top_pairs(need.min(j + 1));
                let converged = s.iter().all(|si| beta * si[j].abs() < 0.1 * abs_tol);
                if converged && s.len() == need {
                    break;
                }
            }
            if exhausted {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let m = alphas.len();
        basis.truncate(m);
        betas.truncate(m.saturating_sub(1));
        let t = Tridiagonal::new(alphas, betas);
        let (theta, s) = t.top_pairs(need.min(m));
        let mut progressed = false;
        let mut pending: Vec<Vec<f64>> = Vec::new();
        let mut still_leading = true;
        for (th, si) in theta.iter().zip(&s) {
            let mut y = vec![0.0; n];
            for (q, c) in basis.iter().zip(si) {
                axpy(*c, q, &mut y);
            }
            orthogonalize(&mut y, &locked);
            scale_to_unit(&mut y);
            let r = h.residual(*th, &y);
            best_residual = best_residual.min(r);
            if still_leading && r <= abs_tol {
                locked_vals.push(*th);
                locked.push(y);
                progressed = true;
            } else {
                still_leading = false;
                pending.push(y);
            }
        }
        start = vec![0.0; n];
        for y in &pending {
            axpy(1.0, y, &mut start);
        }
        if pending.is_empty() || (!progressed && cycle % 7 == 6) {
            let mut fresh = random_unit(&mut root.derive(1000 + cycle as u64), n);
            axpy(1.0, &start, &mut fresh);
            start = fresh;
        }
    }

    if locked.len() < k {
        return Err(Error::NonConvergence { iterations, best_residual });
    }
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked_vals[b].total_cmp(&locked_vals[a]));
    order.truncate(k);
    let vals = order.iter().map(|&i| locked_vals[i]).collect();
    let vecs = order.iter().map(|&i| locked[i].clone()).collect();
    Ok((vals, vecs))
}

fn random_unit(stream: &mut Stream, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| stream.open01() - 0.5).collect();
    scale_to_unit(&mut v);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_to_unit(v: &mut [f64]) {
    let nv = norm(v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
}

/// One modified Gram–Schmidt sweep against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, v);
        axpy(-c, q, v);
    }
}
