//! Independent oracles for the variational constant on tiny sets.

use anderson_edge::variational::{chi_ball, solve_chi};
use anderson_edge::{LatticeDomain, Site};

/// `−max_ψ [⟨ψ, (adjacency − 2d)ψ⟩ + ρ Σ ψ² ln ψ²]` over unit vectors, found by
/// a coarse grid on the sphere followed by a shrinking coordinate search.
fn entropy_dual(dom: &LatticeDomain, rho: f64) -> f64 {
    let n = dom.len();
    let d = dom.dim() as f64;
    let value = |angles: &[f64]| {
        let mut psi = vec![0.0; n];
        let mut r = 1.0;
        for (i, a) in angles.iter().enumerate() {
            psi[i] = r * a.cos();
            r *= a.sin();
        }
        psi[n - 1] = r;
        let mut v = -2.0 * d;
        for i in 0..n {
            for j in dom.neighbor_indices(i) {
                v += psi[i] * psi[j];
            }
            let p = psi[i] * psi[i];
            if p > 0.0 {
                v += rho * p * p.ln();
            }
        }
        v
    };
    let m = n - 1;
    let grid = 24;
    let mut best = (f64::NEG_INFINITY, vec![0.0; m]);
    let mut idx = vec![0usize; m];
    loop {
        let angles: Vec<f64> = idx.iter().map(|&k| (k as f64 + 0.5) * std::f64::consts::FRAC_PI_2 / grid as f64).collect();
        let v = value(&angles);
        if v > best.0 {
            best = (v, angles);
        }
        let mut p = 0;
        while p < m {
            idx[p] += 1;
            if idx[p] < grid {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == m {
            break;
        }
    }
    let (mut f, mut x) = best;
    let mut step = 0.05;
    while step > 1e-12 {
        let mut moved = false;
        for i in 0..m {
            for s in [step, -step] {
                let mut y = x.clone();
                y[i] += s;
                let v = value(&y);
                if v > f {
                    f = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    -f
}

/// `−max_p λ₁` for two sites with `φ = ρ(ln p, ln(1−p))`.
fn pair_primal(rho: f64) -> f64 {
    let lambda = |p: f64| {
        let (a, b) = (rho * p.ln(), rho * (1.0 - p).ln());
        0.5 * (a + b) - 2.0 + (0.25 * (a - b).powi(2) + 1.0).sqrt()
    };
    let mut best = (f64::NEG_INFINITY, 0.5);
    for j in 1..100_000 {
        let p = j as f64 / 100_000.0;
        if lambda(p) > best.0 {
            best = (lambda(p), p);
        }
    }
    let (mut lo, mut hi) = ((best.1 - 1e-5f64).max(1e-12), (best.1 + 1e-5f64).min(1.0 - 1e-12));
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if lambda(a) < lambda(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    -lambda(0.5 * (lo + hi))
}

#[test]
fn two_sites_agree_with_primal_and_dual() {
    let pair = LatticeDomain::interval(0, 1);
    for rho in [0.3, 1.0, 2.5] {
        let chi = solve_chi(&pair, rho, 1e-12).unwrap().chi;
        let primal = pair_primal(rho);
        let dual = entropy_dual(&pair, rho);
        assert!((chi - primal).abs() < 1e-7, "rho {rho}: {chi} vs primal {primal}");
        assert!((chi - dual).abs() < 1e-7, "rho {rho}: {chi} vs dual {dual}");
    }
}

#[test]
fn symmetric_pair_value() {
    // At ρ = 1 the optimum is the symmetric profile, so χ = 1 + ln 2.
    let chi = solve_chi(&LatticeDomain::interval(0, 1), 1.0, 1e-12).unwrap().chi;
    assert!((chi - (1.0 + 2f64.ln())).abs() < 1e-9);
}

#[test]
fn small_sets_agree_with_dual() {
    let sets = [
        LatticeDomain::interval(0, 2),
        LatticeDomain::interval(0, 3),
        LatticeDomain::cuboid(&[0, 0], &[2, 2]),
        LatticeDomain::new(2, vec![Site::new(&[0, 0]), Site::new(&[1, 0]), Site::new(&[0, 1])]).unwrap(),
    ];
    for dom in &sets {
        for rho in [0.5, 1.0, 2.0] {
            let chi = solve_chi(dom, rho, 1e-12).unwrap().chi;
            let dual = entropy_dual(dom, rho);
            assert!((chi - dual).abs() < 1e-6, "{} sites rho {rho}: {chi} vs dual {dual}", dom.len());
        }
    }
}

#[test]
fn single_site_is_two_d() {
    for d in 1..=3 {
        let chi = solve_chi(&LatticeDomain::new(d, vec![Site::origin(d)]).unwrap(), 1.3, 1e-12).unwrap().chi;
        assert!((chi - 2.0 * d as f64).abs() < 1e-12);
        assert!((chi_ball(0, d, 1.3, 1e-12).unwrap().chi - chi).abs() < 1e-12);
    }
}
