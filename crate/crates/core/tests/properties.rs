use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wilson_index::clifford::build_gamma_rep;
use wilson_index::Error;
use wilson_index::gauge::{
    discretize, gauge_matrix, gauge_transform, make_generalized_link, plaquette_charge, random_gauge,
    ConnectionDescriptor, FourierMode, LinkField, Perturbation,
};
use wilson_index::interp::{build_maps, CutoffRho};
use wilson_index::latops::{backward_diff, forward_diff, wilson_dirac, LatticeSpace};
use wilson_index::linalg::{adjoint, hermitian_eigenvalues, max_abs_diff, random_unitary, random_vector, CMat};
use wilson_index::overlap::{build_overlap, gw_residual, overlap_index};
use wilson_index::spectral::{eta, spectral_flow, AffineFamily, MassGrid};

fn flux(q: i64, size: usize) -> LinkField {
    discretize(&make_generalized_link(ConnectionDescriptor::u1_flux(q)).unwrap(), size).unwrap()
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let u = random_unitary(rng, n);
    let d: Vec<f64> = (0..n).map(|i| i as f64 - n as f64 / 2.0 + 0.37).collect();
    let scaled = faer::Mat::from_fn(n, n, |i, j| u[(i, j)] * d[j]);
    &scaled * adjoint(&u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clifford_relations(n in 1usize..=4) {
        let rep = build_gamma_rep(n).unwrap();
        prop_assert!(rep.algebra_defect() < 1e-14);
    }

    #[test]
    fn wilson_spectrum_is_gauge_invariant(q in -3i64..=3, size in 4usize..=6, seed in any::<u64>(), m in -2.0f64..2.0) {
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(q, size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gauge(&mut rng, lf.lattice(), 1);
        let moved = gauge_transform(&lf, &g).unwrap();
        let a = wilson_dirac(&lf, &rep, m).unwrap().eigenvalues().unwrap();
        let b = wilson_dirac(&moved, &rep, m).unwrap().eigenvalues().unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn operator_transforms_covariantly(q in -2i64..=2, seed in any::<u64>()) {
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(q, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gauge(&mut rng, lf.lattice(), 1);
        let moved = gauge_transform(&lf, &g).unwrap();
        let gm = gauge_matrix(&g, rep.spinor_dim());
        let h = wilson_dirac(&lf, &rep, 0.3).unwrap().to_dense();
        let hg = wilson_dirac(&moved, &rep, 0.3).unwrap().to_dense();
        let conj = &(&gm * &h) * adjoint(&gm);
        prop_assert!(max_abs_diff(&conj, &hg) < 1e-12);
    }

    #[test]
    fn plaquette_charge_is_gauge_invariant(q in -5i64..=5, size in 6usize..=10, seed in any::<u64>()) {
        let lf = flux(q, size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moved = gauge_transform(&lf, &random_gauge(&mut rng, lf.lattice(), 1)).unwrap();
        prop_assert_eq!(plaquette_charge(&lf).unwrap().charge, q);
        prop_assert_eq!(plaquette_charge(&moved).unwrap().charge, q);
    }

    #[test]
    fn smooth_perturbation_keeps_the_charge(q in -2i64..=2, amp in -0.3f64..0.3, k in 1i64..=2) {
        let p = Perturbation::new(vec![FourierMode { direction: 1, k: [k, 0], cos: amp, sin: 0.5 * amp }]);
        let link = make_generalized_link(ConnectionDescriptor::u1_flux_plus_smooth(q, p)).unwrap();
        prop_assert_eq!(plaquette_charge(&discretize(&link, 10).unwrap()).unwrap().charge, q);
    }

    #[test]
    fn covariant_differences_are_adjoint(q in -2i64..=2, dir in 0usize..2, seed in any::<u64>()) {
        // backward_diff is ∇_i* for the volume-weighted inner product
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(q, 5);
        let space = LatticeSpace::of(&lf, &rep);
        let f = forward_diff(&lf, &rep, dir).unwrap().to_dense();
        let b = backward_diff(&lf, &rep, dir).unwrap().to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(&mut rng, space.dim());
        let v = random_vector(&mut rng, space.dim());
        let fu = wilson_index::linalg::matvec(&f, &u);
        let bv = wilson_index::linalg::matvec(&b, &v);
        let lhs = space.inner(&fu, &v);
        let rhs = space.inner(&u, &bv);
        prop_assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn partition_of_unity_at_random_points(size in 2usize..=20, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let rho = CutoffRho::new(2, size);
        prop_assert!((rho.partition_sum(&[x, y]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_a_tent(size in 2usize..=20, t in -1.0f64..2.0) {
        let rho = CutoffRho::new(1, size);
        let a = 1.0 / size as f64;
        let v = rho.axis(t);
        prop_assert!(v >= 0.0 && v <= 1.0 / a + 1e-12);
        prop_assert!((v - rho.axis(t + 1.0)).abs() < 1e-9);
        prop_assert!((v - rho.axis(-t)).abs() < 1e-9);
    }

    #[test]
    fn flow_matches_eta_difference(seed in any::<u64>(), dim in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_hermitian(&mut rng, 2 * dim);
        let slope = random_hermitian(&mut rng, 2 * dim);
        let fam = AffineFamily::new(base, slope).unwrap();
        let grid = MassGrid::uniform(3.0, 33).unwrap();
        match spectral_flow(&fam, &grid, None) {
            Ok(r) => prop_assert_eq!(r.sf, r.sf_from_eta()),
            Err(e) => prop_assert!(!matches!(e, Error::MethodMismatch { .. }), "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lift_and_restrict_are_adjoint(q in -2i64..=2, size in 4usize..=6, seed in any::<u64>()) {
        let rep = build_gamma_rep(2).unwrap();
        let link = make_generalized_link(if q == 0 { ConnectionDescriptor::trivial(2, 1) } else { ConnectionDescriptor::u1_flux(q) }).unwrap();
        let maps = build_maps(&link, &rep, size, None).unwrap();
        let space = maps.space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_vector(&mut rng, space.dim());
        let psi: Vec<_> = maps.nodes().map(|_| random_vector(&mut rng, 2)).collect();
        let lhs = maps.l2_inner(&maps.lift(&phi).unwrap(), &psi);
        let rhs = space.inner(&phi, &maps.restrict(&psi).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn overlap_satisfies_ginsparg_wilson(q in -2i64..=2, seed in any::<u64>()) {
        let rep = build_gamma_rep(2).unwrap();
        let lf = flux(q, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moved = gauge_transform(&lf, &random_gauge(&mut rng, lf.lattice(), 1)).unwrap();
        let ov = build_overlap(&moved, &rep, 1.0).unwrap();
        prop_assert!(gw_residual(&ov) < 1e-9);
        let e = eta(&wilson_dirac(&moved, &rep, -1.0).unwrap()).unwrap().eta;
        prop_assert_eq!(overlap_index(&ov).unwrap(), -e / 2);
    }
}

#[test]
fn wilson_operator_is_hermitian() {
    let rep = build_gamma_rep(2).unwrap();
    let h = wilson_dirac(&flux(1, 6), &rep, -0.4).unwrap().to_dense();
    assert!(max_abs_diff(&h, &adjoint(&h)) < 1e-12);
    let vals = hermitian_eigenvalues(&h).unwrap();
    assert_eq!(vals.len(), 72);
}
