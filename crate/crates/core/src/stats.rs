//! Goodness-of-fit and dependence tests used by the extreme-value checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Hyndman–Fan type 7 quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

/// Bootstrap standard error of `stat` over `b` resamples.
pub fn bootstrap_se(x: &[f64], b: usize, stream: &mut Stream, stat: impl Fn(&[f64]) -> f64) -> f64 {
    let n = x.len();
    let mut buf = vec![0.0; n];
    let reps: Vec<f64> = (0..b)
        .map(|_| {
            for v in buf.iter_mut() {
                *v = x[(stream.next_raw() % n as u64) as usize];
            }
            stat(&buf)
        })
        .collect();
    std_dev(&reps)
}

/// Kolmogorov distribution survival function `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // theta-function form converges fast for small t
        let s = (2.0 * std::f64::consts::PI).sqrt() / t;
        let q = (-std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp();
        let mut cdf = 0.0;
        for k in 0..20 {
            cdf += q.powi((2 * k + 1) * (2 * k + 1));
        }
        return (1.0 - s * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS test with the asymptotic p-value and Stephens' finite-n correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let d = ks_statistic(sample, cdf);
    let rn = (sample.len() as f64).sqrt();
    TestResult { statistic: d, p_value: kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d) }
}

/// Pearson chi-square statistic and degrees of freedom. Adjacent cells are
/// pooled until each expected count is at least 5; `fitted` parameters are
/// subtracted from the degrees of freedom.
pub fn chi_square_stat(observed: &[f64], expected: &[f64], fitted: usize) -> (f64, usize) {
    assert_eq!(observed.len(), expected.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= 5.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let stat: f64 = cells.iter().filter(|c| c.1 > 0.0).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() as i64 - 1 - fitted as i64).max(0) as usize;
    (stat, dof)
}

/// p-value of a chi-square statistic; zero degrees of freedom give p = 1.
pub fn chi_square_parts(stat: f64, dof: usize) -> TestResult {
    if dof == 0 {
        return TestResult { statistic: stat, p_value: 1.0 };
    }
    let p = ChiSquared::new(dof as f64).map(|c| c.sf(stat)).unwrap_or(f64::NAN);
    TestResult { statistic: stat, p_value: p }
}

pub fn chi_square(observed: &[f64], expected: &[f64], fitted: usize) -> TestResult {
    let (stat, dof) = chi_square_stat(observed, expected, fitted);
    chi_square_parts(stat, dof)
}

/// Chi-square statistic and degrees of freedom of integer counts against Poisson(`mean`).
pub fn poisson_pmf_cells(counts: &[u64], mean: f64) -> (f64, usize) {
    if counts.is_empty() || !(mean > 0.0) {
        return (0.0, 0);
    }
    let pois = Poisson::new(mean).expect("positive mean");
    let n = counts.len() as f64;
    let top = counts.iter().copied().max().unwrap_or(0).max((mean + 6.0 * mean.sqrt()).ceil() as u64).max(1) as usize;
    let mut observed = vec![0.0; top + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=top).map(|k| n * pois.pmf(k as u64)).collect();
    // last cell absorbs the upper tail
    expected[top] = n * pois.sf(top as u64 - 1).max(0.0);
    chi_square_stat(&observed, &expected, 0)
}

/// Chi-square test of integer counts against Poisson(`mean`).
pub fn poisson_counts_test(counts: &[u64], mean: f64) -> TestResult {
    let (stat, dof) = poisson_pmf_cells(counts, mean);
    chi_square_parts(stat, dof)
}

fn centered_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = x[i].iter().zip(&x[j]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            a[i * n + j] = d;
            a[j * n + i] = d;
        }
    }
    let row: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] -= row[i] + row[j] - all;
        }
    }
    a
}

fn dcov2(a: &[f64], b: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut s = 0.0;
    for i in 0..n {
        let pi = perm[i] * n;
        for j in 0..n {
            s += a[i * n + j] * b[pi + perm[j]];
        }
    }
    s / (n * n) as f64
}

/// Sample distance correlation of paired vectors.
pub fn distance_correlation(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let a = centered_distances(x);
    let b = centered_distances(y);
    let id: Vec<usize> = (0..x.len()).collect();
    let vx = dcov2(&a, &a, &id);
    let vy = dcov2(&b, &b, &id);
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (dcov2(&a, &b, &id).max(0.0) / (vx * vy).sqrt()).sqrt()
}

/// Permutation test of independence based on distance covariance.
pub fn distance_correlation_test(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, stream: &mut Stream) -> TestResult {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 3 {
        return TestResult { statistic: 0.0, p_value: 1.0 };
    }
    let a = centered_distances(x);
    let b = centered_distances(y);
    let mut perm: Vec<usize> = (0..n).collect();
    let observed = dcov2(&a, &b, &perm);
    let mut exceed = 0;
    for _ in 0..permutations {
        for i in (1..n).rev() {
            let j = (stream.next_raw() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        if dcov2(&a, &b, &perm) >= observed {
            exceed += 1;
        }
    }
    TestResult {
        statistic: distance_correlation(x, y),
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
    }
}
