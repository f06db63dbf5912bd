use super::*;
use crate::grid::TorusGrid;
use crate::linalg::HermitianMatrix;
use crate::space::Pencil;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn calibrated(points: usize) -> Background {
    let g = TorusGrid::standard(1, points).unwrap();
    let id = HermitianMatrix::identity(1);
    Background::new(Pencil::constant(g, id, id).unwrap()).unwrap()
}

fn small_config(steps: usize) -> SolverConfig {
    SolverConfig { time_steps: steps, ..SolverConfig::default() }
}

#[test]
fn affine_path_is_exact() {
    let bg = calibrated(16);
    let g = *bg.grid();
    let pr = EpsilonProblem::with_config(
        &bg,
        ScalarField::zeros(g),
        ScalarField::constant(g, 0.7),
        0.3,
        small_config(9),
    )
    .unwrap();
    let r = residual(&pr, &pr.linear_path()).unwrap();
    assert!(sup(r.data()) <= 1e-12);
    let (path, rep) = solve(&pr).unwrap();
    assert!(rep.final_residual <= 1e-12);
    assert!(rep.newton_steps <= 2);
    assert_eq!(path.slice(0), pr.phi0.values());
    assert_eq!(path.slice(8), pr.phi1.values());
    assert!(rep.diagnostics.min_phi_tt.abs() < 1e-12);
    assert!(rep.diagnostics.max_energy_rate < 1e-12);
}

#[test]
fn jacobian_matches_centered_differences() {
    let g = TorusGrid::standard(1, 12).unwrap();
    let om = HermitianMatrix::identity(1);
    let pot = ScalarField::from_fn(g, |x| 0.2 * x[0].cos());
    let bg = Background::new(Pencil::with_potential(g, om, om.scale(2.0), &pot).unwrap()).unwrap();
    let phi0 = ScalarField::from_fn(g, |x| 0.1 * x[1].sin());
    let phi1 = ScalarField::from_fn(g, |x| 0.15 * (x[0] + x[1]).cos() + 0.3);
    let pr = EpsilonProblem::with_config(&bg, phi0, phi1, 0.4, small_config(7)).unwrap();
    let base = pr.linear_path();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    for _ in 0..5 {
        let p = g.len();
        let mut d = vec![0.0; base.data().len()];
        for v in &mut d[p..6 * p] {
            *v = rng.gen_range(-1.0..1.0) * 0.05;
        }
        let dir = PathField::from_data(g, 7, d.clone()).unwrap();
        let jd = linearization_apply(&pr, &base, &dir).unwrap();
        let shift = |s: f64| {
            let data: Vec<f64> = base.data().iter().zip(&d).map(|(a, b)| a + s * b).collect();
            residual(&pr, &PathField::from_data(g, 7, data).unwrap()).unwrap()
        };
        let (rp, rm) = (shift(h), shift(-h));
        let fd: Vec<f64> = rp.data().iter().zip(rm.data()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let num: f64 = fd.iter().zip(jd.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = jd.data().iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den < 1e-4, "relative error {}", num / den);
    }
}

#[test]
fn nontrivial_solve_converges_and_stays_member() {
    let bg = calibrated(16);
    let g = *bg.grid();
    let phi0 = ScalarField::from_fn(g, |x| 0.1 * x[0].sin());
    let phi1 = ScalarField::from_fn(g, |x| 0.1 * (x[0] + x[1]).cos() + 0.2);
    let pr = EpsilonProblem::with_config(&bg, phi0, phi1, 0.1, small_config(9)).unwrap();
    let (path, rep) = solve(&pr).unwrap();
    assert!(rep.final_residual <= 1e-9, "{}", rep.to_key_value());
    assert!(rep.diagnostics.min_margin > 0.0);
    assert!(rep.diagnostics.lagrangian.as_ref().unwrap().all_hold());
    let r = residual(&pr, &path).unwrap();
    assert!(sup(r.data()) <= 1e-9);
    assert!(rep.to_csv().starts_with("step,residual\n0,"));
}

#[test]
fn equal_endpoints() {
    // A potential solving the phase equation gives the constant path exactly.
    let bg = calibrated(12);
    let g = *bg.grid();
    let c = ScalarField::constant(g, 0.4);
    let pr = EpsilonProblem::with_config(&bg, c.clone(), c.clone(), 0.2, small_config(9)).unwrap();
    let (path, _) = solve(&pr).unwrap();
    assert!(path.data().iter().all(|v| (v - 0.4).abs() < 1e-12));

    // Otherwise the path bows by O(ε²): the corner entry is φ̈/(4ε²).
    let phi = ScalarField::from_fn(g, |x| 0.2 * x[0].sin() * x[1].cos());
    let bow = |eps: f64| {
        let pr = EpsilonProblem::with_config(&bg, phi.clone(), phi.clone(), eps, small_config(9)).unwrap();
        let (path, _) = solve(&pr).unwrap();
        path.data().chunks(g.len()).flat_map(|s| s.iter().zip(phi.values()).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
    };
    let (b1, b2) = (bow(0.1), bow(0.05));
    assert!(b1 < 0.05, "{b1}");
    let ratio = b1 / b2;
    assert!((ratio - 4.0).abs() < 0.4, "bow ratio {ratio} ({b1}, {b2})");
}

#[test]
fn rejects_bad_schedules_and_non_members() {
    let bg = calibrated(12);
    let g = *bg.grid();
    let z = ScalarField::zeros(g);
    let cfg = SolverConfig { schedule: Some(vec![0.5, 0.7]), ..small_config(5) };
    assert!(EpsilonProblem::with_config(&bg, z.clone(), z.clone(), 0.1, cfg).is_err());
    let bump = ScalarField::from_fn(g, |x| 3.0 * (2.0 * x[0]).cos());
    assert!(matches!(EpsilonProblem::new(&bg, z, bump, 0.1), Err(Error::NotMember(_))));
}
