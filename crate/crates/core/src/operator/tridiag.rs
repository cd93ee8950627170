//! Symmetric tridiagonal eigenproblems: Sturm-count bisection for the values,
//! inverse iteration with partial pivoting for the vectors.

use crate::rng::Stream;

#[derive(Clone, Debug)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    off_sq: Vec<f64>,
}

impl Tridiagonal {
    /// `diag` has length `n`, `off` length `n − 1`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len(), diag.len().saturating_sub(1));
        let off_sq = off.iter().map(|b| b * b).collect();
        Tridiagonal { diag, off, off_sq }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    fn norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn pivmin(&self) -> f64 {
        let m = self.off_sq.iter().copied().fold(1.0, f64::max);
        f64::MIN_POSITIVE * m
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            q = if i == 0 {
                self.diag[0] - x
            } else {
                self.diag[i] - x - self.off_sq[i - 1] / q
            };
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th largest eigenvalue (`k` from 1).
    pub fn kth_largest(&self, k: usize) -> f64 {
        let n = self.len();
        assert!(k >= 1 && k <= n);
        let below = n - k;
        let (glo, ghi) = self.gershgorin();
        let pad = 2.0 * f64::EPSILON * self.norm() + self.pivmin();
        let mut lo = glo - pad;
        let mut hi = ghi + pad;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                return mid;
            }
            if self.count_below(mid) > below {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// The k largest eigenvalues, decreasing.
    pub fn top_values(&self, k: usize) -> Vec<f64> {
        (1..=k.min(self.len())).map(|j| self.kth_largest(j)).collect()
    }

    /// The k largest eigenpairs with unit eigenvectors.
    pub fn top_pairs(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let vals = self.top_values(k);
        let norm = self.norm();
        let ortol = 1e-3 * norm;
        let sep = 10.0 * f64::EPSILON * norm;
        let n = self.len();
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(vals.len());
        let mut last_shift = f64::INFINITY;
        for (j, &lambda) in vals.iter().enumerate() {
            let mut shift = lambda;
            if last_shift - shift < sep {
                shift = last_shift - sep;
            }
            last_shift = shift;
            let lu = TridiagLu::factor(self, shift, f64::EPSILON * norm);
            let cluster: Vec<usize> = (0..j).filter(|&i| (vals[i] - lambda).abs() < ortol).collect();
            let mut stream = Stream::new(0x7D1A_6000 + j as u64);
            let mut x: Vec<f64> = (0..n).map(|_| stream.open01() - 0.5).collect();
            normalize(&mut x);
            for iter in 0..12 {
                lu.solve(&mut x);
                for &i in &cluster {
                    let c = dot(&x, &vecs[i]);
                    axpy(-c, &vecs[i], &mut x);
                }
                normalize(&mut x);
                if iter >= 1 && self.residual(lambda, &x) <= 4.0 * f64::EPSILON * norm * (n as f64).sqrt() {
                    break;
                }
            }
            vecs.push(x);
        }
        (vals, vecs)
    }

    /// Solves `(T − σI) x = rhs` in place.
    pub fn solve_shifted(&self, sigma: f64, rhs: &mut [f64]) {
        if rhs.is_empty() {
            return;
        }
        TridiagLu::factor(self, sigma, f64::EPSILON * self.norm()).solve(rhs);
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y.iter().zip(x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
    }
}

/// LU factors of `T − σI` with partial (row) pivoting.
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &Tridiagonal, sigma: f64, tiny: f64) -> Self {
        let n = t.len();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut d: Vec<f64> = t.diag.iter().map(|a| a - sigma).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for v in d.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagLu { dl, d, du, du2, swapped }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            // overflow on an exactly singular shift: rescale and continue
            let m = x.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
            for v in x.iter_mut() {
                *v = if v.is_finite() { *v / m.max(1.0) } else { v.signum() };
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(x: &mut [f64]) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return;
    }
    x.iter_mut().for_each(|v| *v /= m);
    let norm = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laplacian_path_spectrum() {
        let n = 7;
        let t = Tridiagonal::new(vec![-2.0; n], vec![1.0; n - 1]);
        let vals = t.top_values(n);
        for (k, v) in vals.iter().enumerate() {
            let exact = -2.0 + 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn split_blocks_with_repeated_eigenvalues() {
        // two identical decoupled 2-site blocks: eigenvalues −1, −1, −3, −3
        let t = Tridiagonal::new(vec![-2.0; 4], vec![1.0, 0.0, 1.0]);
        let (vals, vecs) = t.top_pairs(4);
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(vals[1], -1.0, epsilon = 1e-13);
        for i in 0..4 {
            assert!(t.residual(vals[i], &vecs[i]) < 1e-12);
            for j in 0..i {
                assert!(dot(&vecs[i], &vecs[j]).abs() < 1e-10);
            }
        }
    }
}
