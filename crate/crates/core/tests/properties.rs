use dhym_core::formula::Formula;
use dhym_core::geometry::fit_affine;
use dhym_core::io::{decode_field, decode_path, encode_field, encode_path};
use dhym_core::pencil::{
    calibrated_volume, curvature_integrand, curvature_integrand_lines, lagrangian_property_check, pencil_eigenvalues,
    phase, q_integrand, radius,
};
use dhym_core::{HermitianMatrix, PathField, ScalarField, TorusGrid, C64};
use proptest::prelude::*;

fn hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
        let mut m = HermitianMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, C64::new(v[i * n + i], 0.0));
            for j in (i + 1)..n {
                m.set(i, j, C64::new(v[i * n + j], v[j * n + i]));
            }
        }
        m
    })
}

fn covector(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), n)
}

/// Eigenvalues with a phase offset small enough for a positive calibrated
/// real part.
fn calibrated(n: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-3.0f64..3.0, n), -1.4f64..1.4).prop_map(|(l, off)| {
        let t = phase(&l) - off;
        (l, t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arctan_trace_agrees_on_random_matrices(m in (1usize..=3).prop_flat_map(hermitian)) {
        let direct: f64 = m.eigh().values().iter().map(|v| v.atan()).sum();
        prop_assert!((m.arctan_trace() - direct).abs() < 1e-12, "{} vs {direct}", m.arctan_trace());
    }

    #[test]
    fn pencil_phase_is_congruence_invariant(
        (a, p) in (1usize..=3).prop_flat_map(|n| (hermitian(n), hermitian(n))),
    ) {
        let n = a.dim();
        // ω = I + P² is positive definite; the pencil (α, ω) and its
        // congruence by (I + iP) have the same eigenvalues
        let omega = HermitianMatrix::identity(n).add(&HermitianMatrix::from_mat_symmetrized(&p.as_mat().mul(&p.as_mat())));
        let mut g = p.as_mat().scale(C64::new(0.0, 1.0));
        for i in 0..n {
            g.set(i, i, g.get(i, i) + C64::new(1.0, 0.0));
        }
        let a2 = g.congruence(&a);
        let o2 = g.congruence(&omega);
        let l1 = pencil_eigenvalues(&a, &omega).unwrap();
        let l2 = pencil_eigenvalues(&a2, &o2).unwrap();
        prop_assert!((phase(&l1) - phase(&l2)).abs() < 1e-9);
    }

    #[test]
    fn calibrated_parts_lie_on_the_radius_circle((l, t) in (1usize..=3).prop_flat_map(calibrated)) {
        let c = calibrated_volume(&l, t);
        let r = radius(&l);
        prop_assert!((c.real_part.hypot(c.imag_part) - r).abs() <= 1e-12 * r);
        prop_assert!(c.real_part > 0.0);
        prop_assert!((c.imag_part / c.real_part - c.tangent.unwrap()).abs() <= 1e-9 * (1.0 + c.tangent.unwrap().abs()));
    }

    #[test]
    fn connection_form_is_symmetric(
        ((l, t), a, b) in (1usize..=3).prop_flat_map(|n| (calibrated(n), covector(n), covector(n))),
    ) {
        prop_assert_eq!(q_integrand(&l, t, &a, &b).unwrap(), q_integrand(&l, t, &b, &a).unwrap());
    }

    #[test]
    fn curvature_integrand_is_non_positive(
        ((l, t), a, b) in (1usize..=3).prop_flat_map(|n| (calibrated(n), covector(n), covector(n))),
    ) {
        let k = curvature_integrand(&l, t, &a, &b).unwrap();
        let scale: f64 = curvature_integrand_lines(&l, t, &a, &b).unwrap().iter().map(|x| x.abs()).sum();
        prop_assert!(k <= 1e-12 * scale.max(1e-300), "{k} (scale {scale})");
    }

    #[test]
    fn curvature_integrand_vanishes_on_flat_planes(
        ((l, t), a, c) in (1usize..=3).prop_flat_map(|n| (calibrated(n), covector(n), -3.0f64..3.0)),
    ) {
        let b: Vec<C64> = a.iter().map(|z| z * c).collect();
        let k = curvature_integrand(&l, t, &a, &b).unwrap();
        let scale: f64 = curvature_integrand_lines(&l, t, &a, &b).unwrap().iter().map(|x| x.abs()).sum();
        prop_assert!(k.abs() <= 1e-12 * scale.max(1e-300), "{k} (scale {scale})");
    }

    #[test]
    fn lagrangian_bounds_follow_from_the_phase_hypothesis(
        mus in prop::collection::vec(-20.0f64..20.0, 1..=4),
        eta in 0.01f64..1.5,
    ) {
        let r = lagrangian_property_check(&mus, eta);
        prop_assume!(r.hypothesis_met);
        prop_assert!(r.all_hold(), "{mus:?} eta {eta}: {r:?}");
    }

    #[test]
    fn affine_fit_is_exact_on_affine_data(d in -5.0f64..5.0, a in -5.0f64..5.0) {
        let x: Vec<f64> = [0.8f64, 0.4, 0.2, 0.1, 0.05].iter().map(|e| e * e).collect();
        let y: Vec<f64> = x.iter().map(|v| d + a * v).collect();
        let (c, s, r) = fit_affine(&x, &y);
        prop_assert!((c - d).abs() < 1e-12 && (s - a).abs() < 1e-10 && r < 1e-12);
    }

    #[test]
    fn field_and_path_files_round_trip(values in prop::collection::vec(any::<f64>(), 64), steps in 3usize..6) {
        let g = TorusGrid::standard(1, 8).unwrap();
        let f = ScalarField::from_values(g, values.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect()).unwrap();
        let bytes = encode_field(&f);
        prop_assert_eq!(encode_field(&decode_field(&bytes).unwrap()), bytes);
        let p = PathField::linear(&f, &f.map(|v| 0.5 * v), steps).unwrap();
        let bytes = encode_path(&p);
        let back = decode_path(&bytes).unwrap();
        prop_assert_eq!(back.data(), p.data());
        let twice = back.reversed().reversed();
        prop_assert_eq!(twice.data(), p.data());
    }

    #[test]
    fn formula_constants_evaluate_exactly(c in -1e6f64..1e6, k in 1i32..6) {
        let f = Formula::parse(&format!("{c:e} + 0*sin({k}*x1)")).unwrap();
        prop_assert_eq!(f.eval(&[0.3, 0.1, 0.0, 0.0]), c);
    }
}

mod fields {
    use dhym_core::geometry::distance_lower_bound;
    use dhym_core::sampling::trig_field_with_offset;
    use dhym_core::{Background, HermitianMatrix, Pencil, TorusGrid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn background() -> Background {
        let g = TorusGrid::standard(1, 16).unwrap();
        let id = HermitianMatrix::identity(1);
        Background::new(Pencil::constant(g, id, id).unwrap()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn metric_is_symmetric_and_positive(seed in any::<u64>()) {
            let bg = background();
            let g = *bg.grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = trig_field_with_offset(g, &mut rng, 3, 2, 0.1, 0.5);
            let a = trig_field_with_offset(g, &mut rng, 3, 2, 1.0, 1.0);
            let b = trig_field_with_offset(g, &mut rng, 3, 2, 1.0, 1.0);
            let ab = bg.metric_inner(&phi, &a, &b).unwrap();
            let ba = bg.metric_inner(&phi, &b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(bg.metric_inner(&phi, &a, &a).unwrap() > 0.0);
        }

        #[test]
        fn lower_bound_is_symmetric_and_vanishes_on_the_diagonal(seed in any::<u64>()) {
            let bg = background();
            let g = *bg.grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = trig_field_with_offset(g, &mut rng, 3, 2, 0.1, 0.5);
            let q = trig_field_with_offset(g, &mut rng, 3, 2, 0.1, 0.5);
            prop_assert_eq!(distance_lower_bound(&bg, &p, &q).unwrap(), distance_lower_bound(&bg, &q, &p).unwrap());
            prop_assert_eq!(distance_lower_bound(&bg, &p, &p).unwrap(), 0.0);
        }
    }
}
