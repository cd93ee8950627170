use anderson_edge::evt::{box_eigenvalues, make_plan, rescale, ScaleOverrides};
use anderson_edge::field::{sample, sample_site};
use anderson_edge::lattice::connected_components;
use anderson_edge::operator::{eigenvalues, principal_eigenvalue, top_eigs, top_eigs_with, SolverKind};
use anderson_edge::regions::{check_axioms, contracted_distance, extract};
use anderson_edge::variational::{ell, log_ell, log_ell_values, solve_chi, Profile};
use anderson_edge::verify::epsilon_r;
use anderson_edge::{ContinuumShape, Hamiltonian, LatticeDomain, PotentialField, TailSpec};
use proptest::prelude::*;

fn field_on(dom: &LatticeDomain, values: Vec<f64>) -> PotentialField {
    PotentialField::from_values(dom.clone(), values).unwrap()
}

fn lambda1(dom: &LatticeDomain, f: &PotentialField) -> f64 {
    principal_eigenvalue(&Hamiltonian::from_potential(dom, f.values()).unwrap()).unwrap()
}

/// Random potential on a small 1D or 2D box, heavy-tailed enough to make
/// several region components.
fn instance() -> impl Strategy<Value = (LatticeDomain, Vec<f64>)> {
    prop_oneof![
        (8usize..60).prop_flat_map(|n| (Just(LatticeDomain::interval(0, n as i64 - 1)), prop::collection::vec(-6.0..6.0f64, n))),
        (3usize..10, 3usize..10).prop_flat_map(|(p, q)| {
            (Just(LatticeDomain::cuboid(&[0, 0], &[p, q])), prop::collection::vec(-6.0..6.0f64, p * q))
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ell_shift_equivariance(values in prop::collection::vec(-20.0..5.0f64, 1..30), c in -10.0..10.0f64, rho in 0.2..4.0f64) {
        let dom = LatticeDomain::interval(0, values.len() as i64 - 1);
        let phi = Profile::new(dom.clone(), values.clone()).unwrap();
        let shifted = Profile::new(dom, values.iter().map(|v| v + c).collect()).unwrap();
        prop_assert!((log_ell(&shifted, rho) - log_ell(&phi, rho) - c / rho).abs() < 1e-10);
        prop_assert!((ell(&phi, rho).ln() - log_ell_values(&values, rho)).abs() < 1e-10);
    }

    #[test]
    fn region_monotone_in_a_and_r((dom, values) in instance(), a in 0.2..3.0f64, da in 0.0..3.0f64, r in 1u64..4) {
        let f = field_on(&dom, values);
        let l1 = lambda1(&dom, &f);
        let small = extract(&dom, &f, r, a, l1).unwrap();
        let wider = extract(&dom, &f, r, a + da, l1).unwrap();
        let longer = extract(&dom, &f, r + 1, a, l1).unwrap();
        prop_assert!(small.region.is_subset_of(&wider.region));
        prop_assert!(small.region.is_subset_of(&longer.region));
    }

    #[test]
    fn distance_axioms_hold((dom, values) in instance(), a in 0.3..2.0f64, r in 1u64..4) {
        let f = field_on(&dom, values);
        let dec = extract(&dom, &f, r, a, lambda1(&dom, &f)).unwrap();
        let cd = contracted_distance(&dec);
        let rep = check_axioms(&dec, &cd);
        prop_assert_eq!((rep.d0, rep.d1, rep.d2), (0, 0, 0));
    }

    #[test]
    fn region_spectrum_is_union_over_components((dom, values) in instance(), a in 0.3..2.0f64, r in 1u64..3) {
        let f = field_on(&dom, values);
        let dec = extract(&dom, &f, r, a, lambda1(&dom, &f)).unwrap();
        prop_assume!(!dec.region.is_empty());
        let whole = eigenvalues(&Hamiltonian::from_potential(&dec.region, f.restrict(&dec.region).unwrap().values()).unwrap());
        let mut parts: Vec<f64> = connected_components(&dec.region)
            .iter()
            .flat_map(|c| eigenvalues(&Hamiltonian::from_potential(c, f.restrict(c).unwrap().values()).unwrap()))
            .collect();
        parts.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(whole.len(), parts.len());
        for (x, y) in whole.iter().zip(&parts) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn spectrum_shifts_with_field((dom, values) in instance(), c in -5.0..5.0f64) {
        let f = field_on(&dom, values);
        let g = f.shifted(c);
        let a = eigenvalues(&Hamiltonian::from_potential(&dom, f.values()).unwrap());
        let b = eigenvalues(&Hamiltonian::from_potential(&dom, g.values()).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - x - c).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_decreasing(d in 1usize..4, a in 0.1..10.0f64, da in 0.01..5.0f64, r in 1u64..20) {
        prop_assert!(epsilon_r(d, a, r + 1) < epsilon_r(d, a, r));
        prop_assert!(epsilon_r(d, a + da, r) < epsilon_r(d, a, r));
        prop_assert!(epsilon_r(d, a, 1) <= 2.0 * d as f64 + 1e-12);
    }

    #[test]
    fn lanczos_matches_dense((dom, values) in instance()) {
        let h = Hamiltonian::from_potential(&dom, &values).unwrap();
        let k = 3.min(dom.len());
        let dense = top_eigs_with(&h, k, 1e-12, SolverKind::Dense).unwrap();
        let lanczos = top_eigs_with(&h, k, 1e-12, SolverKind::Lanczos).unwrap();
        for (x, y) in dense.eigenvalues.iter().zip(&lanczos.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-8);
        }
        prop_assert!(dense.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampler_is_site_keyed(seed in any::<u64>(), lo in -50i64..50, n in 1usize..200, rho in 0.3..3.0f64) {
        let spec = TailSpec::exact(rho).unwrap();
        let dom = LatticeDomain::interval(lo, lo + n as i64 - 1);
        let f = sample(&dom, &spec, seed).unwrap();
        let again = sample(&dom, &spec, seed).unwrap();
        prop_assert_eq!(f.values(), again.values());
        for (i, s) in dom.sites().iter().enumerate() {
            prop_assert_eq!(f.value(i).to_bits(), sample_site(&spec, seed, s).to_bits());
        }
        let sub = LatticeDomain::interval(lo + n as i64 / 2, lo + n as i64 - 1);
        let g = sample(&sub, &spec, seed).unwrap();
        let restricted = f.restrict(&sub).unwrap();
        prop_assert_eq!(g.values(), restricted.values());
    }

    #[test]
    fn box_eigenvalues_follow_box_contents(seed in any::<u64>(), i in 0usize..9, j in 0usize..9) {
        let (plan, dom) = make_plan(&ContinuumShape::unit_cube(1), 200, &ScaleOverrides { n_l: Some(20), r_l: Some(2) }).unwrap();
        let boxes = plan.boxes();
        prop_assume!(i < boxes.len() && j < boxes.len());
        let f = sample(&dom, &TailSpec::exact(1.0).unwrap(), seed).unwrap();
        let mut swapped = f.values().to_vec();
        for (a, b) in boxes[i].sites().iter().zip(boxes[j].sites()) {
            let (ia, ib) = (dom.index_of(a).unwrap(), dom.index_of(b).unwrap());
            swapped[ia] = f.value(ib);
            swapped[ib] = f.value(ia);
        }
        let g = PotentialField::from_values(dom.clone(), swapped).unwrap();
        let before = box_eigenvalues(&f, &plan).unwrap();
        let mut after = box_eigenvalues(&g, &plan).unwrap();
        after.swap(i, j);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn rescale_is_affine_in_centering(seed in any::<u64>(), shift in -3.0..3.0f64, rho in 0.5..3.0f64) {
        let (plan, dom) = make_plan(&ContinuumShape::unit_cube(1), 300, &ScaleOverrides::default()).unwrap();
        let f = sample(&dom, &TailSpec::exact(rho).unwrap(), seed).unwrap();
        let sr = top_eigs(&Hamiltonian::from_potential(&dom, f.values()).unwrap(), 4, 1e-10).unwrap();
        let a_l = sr.eigenvalues[0];
        let base = rescale(&sr, &plan, a_l, rho).unwrap();
        let moved = rescale(&sr, &plan, a_l + shift, rho).unwrap();
        let factor = (plan.domain_sites as f64).ln() / rho;
        prop_assert!(base.points.windows(2).all(|w| w[0].height >= w[1].height));
        prop_assert!(base.points[0].height.abs() < 1e-12);
        for (p, q) in base.points.iter().zip(&moved.points) {
            prop_assert!((p.height - q.height - shift * factor).abs() < 1e-9 * (1.0 + p.height.abs()));
            prop_assert_eq!(&p.position, &q.position);
            prop_assert!(p.position.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chi_optimizer_is_stationary(n in 1usize..8, two_d in any::<bool>(), rho in 0.5..3.0f64) {
        let dom = if two_d { LatticeDomain::cuboid(&[0, 0], &[n.min(4), 2]) } else { LatticeDomain::interval(0, n as i64 - 1) };
        let d = dom.dim() as f64;
        let sol = solve_chi(&dom, rho, 1e-10).unwrap();
        prop_assert!(sol.chi > 0.0 && sol.chi <= 2.0 * d + 1e-9);
        prop_assert!(sol.kkt_residual < 1e-4, "kkt residual {}", sol.kkt_residual);
        prop_assert!(log_ell(&sol.optimizer, rho) <= 1e-8);
        let h = Hamiltonian::from_potential(&dom, &sol.optimizer.values).unwrap();
        let lambda = principal_eigenvalue(&h).unwrap();
        prop_assert!((lambda + sol.chi).abs() < 1e-8);
    }
}
