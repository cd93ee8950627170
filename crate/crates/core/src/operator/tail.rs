//! Eigenvector tails below roundoff.
//!
//! Dense and Krylov eigenvectors are accurate relative to their largest entry,
//! so entries far from the localization center sit at the `1e-16` floor. Given
//! an accurate eigenvalue, the tail is recovered level by level: entries that
//! are resolved are held fixed and the eigen-equation is solved for the rest,
//! rescaled so the next decade of magnitudes is resolved in turn.

use nalgebra::{DMatrix, DVector};

use super::tridiag::Tridiagonal;
use super::{Hamiltonian, DENSE_LIMIT};

const MAX_LEVELS: usize = 100_000;

/// `ln|ψ(x)|` with tiny entries resolved in relative terms. Entries with
/// `|ψ(x)| ≥ keep · max|ψ|` are trusted as given; `−∞` marks exact zeros.
pub fn log_amplitudes(h: &Hamiltonian, lambda: f64, psi: &[f64], keep: f64) -> Vec<f64> {
    let n = h.dim();
    assert_eq!(psi.len(), n);
    let top = psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let plain = || psi.iter().map(|v| v.abs().ln()).collect();
    if top == 0.0 || (n > DENSE_LIMIT && h.domain.dim() > 1) {
        return plain();
    }
    let chain = h.domain.dim() == 1 && h.as_tridiagonal().is_some();
    let mut mant = psi.to_vec();
    let mut scale = vec![0.0; n];
    let mut known: Vec<bool> = psi.iter().map(|v| v.abs() >= keep * top).collect();
    for _ in 0..MAX_LEVELS {
        let unknown: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
        if unknown.is_empty() {
            break;
        }
        let log_drive = |u: usize| {
            h.neighbors(u)
                .iter()
                .filter(|&&k| known[k] && mant[k] != 0.0)
                .map(|&k| mant[k].abs().ln() + scale[k])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let s_max = unknown.iter().map(|&u| log_drive(u)).fold(f64::NEG_INFINITY, f64::max);
        if s_max == f64::NEG_INFINITY {
            // nothing drives the rest
            for &u in &unknown {
                mant[u] = 0.0;
                known[u] = true;
            }
            break;
        }
        let mut b: Vec<f64> = unknown
            .iter()
            .map(|&u| {
                -h.neighbors(u)
                    .iter()
                    .filter(|&&k| known[k])
                    .map(|&k| mant[k] * (scale[k] - s_max).exp())
                    .sum::<f64>()
            })
            .collect();
        let x = if chain { solve_chain(h, &unknown, lambda, &mut b) } else { solve_dense(h, &unknown, lambda, b) };
        let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !(m > 0.0) || !m.is_finite() {
            for &u in &unknown {
                mant[u] = if m == 0.0 { 0.0 } else { psi[u] };
                known[u] = true;
            }
            break;
        }
        for (j, &u) in unknown.iter().enumerate() {
            if x[j].abs() >= keep * m {
                mant[u] = x[j];
                scale[u] = s_max;
                known[u] = true;
            }
        }
    }
    (0..n).map(|i| if mant[i] == 0.0 { f64::NEG_INFINITY } else { mant[i].abs().ln() + scale[i] }).collect()
}

fn solve_chain(h: &Hamiltonian, unknown: &[usize], lambda: f64, b: &mut Vec<f64>) -> Vec<f64> {
    let diag: Vec<f64> = unknown.iter().map(|&u| h.diag[u]).collect();
    let off: Vec<f64> = unknown
        .windows(2)
        .map(|w| if h.neighbors(w[0]).contains(&w[1]) { 1.0 } else { 0.0 })
        .collect();
    Tridiagonal::new(diag, off).solve_shifted(lambda, b);
    std::mem::take(b)
}

fn solve_dense(h: &Hamiltonian, unknown: &[usize], lambda: f64, b: Vec<f64>) -> Vec<f64> {
    let m = unknown.len();
    let mut pos = vec![usize::MAX; h.dim()];
    for (j, &u) in unknown.iter().enumerate() {
        pos[u] = j;
    }
    let mut a = DMatrix::zeros(m, m);
    for (j, &u) in unknown.iter().enumerate() {
        a[(j, j)] = h.diag[u] - lambda;
        for &v in h.neighbors(u) {
            if pos[v] != usize::MAX {
                a[(j, pos[v])] = 1.0;
            }
        }
    }
    match a.lu().solve(&DVector::from_vec(b)) {
        Some(x) => x.iter().copied().collect(),
        None => vec![f64::NAN; m],
    }
}
