//! Criteria that do not need the distance ensemble: pointwise algebra,
//! affine exactness, the linearization, curvature and connection checks,
//! and the Monge–Ampère cross-check.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use dhym_core::curvature::{
    curvature_csv, metric_compatibility, pointwise_oracle_pairs, sectional_curvature, torsion_defect, CurvatureRow,
    TwoParamFamily,
};
use dhym_core::formula::Formula;
use dhym_core::pencil::{pencil_eigenvalues, phase};
use dhym_core::sampling::trig_field;
use dhym_core::solver::{self, linearization_apply, residual, EpsilonProblem, SolverConfig};
use dhym_core::{Background, HermitianMatrix, PathField, ScalarField, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ma_oracle::MaOracle;
use super::{failed, flat_n1, instances, product_n2, varying_n1, CriterionResult, N1_POINTS};
use crate::{write_file, CliError};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn finish(id: usize, title: &'static str, r: Result<CriterionResult, CliError>) -> CriterionResult {
    r.unwrap_or_else(|e| failed(id, title, e))
}

fn rand_herm(rng: &mut ChaCha8Rng, n: usize, s: f64) -> HermitianMatrix {
    let mut m = HermitianMatrix::zeros(n);
    for i in 0..n {
        m.set(i, i, C64::new(rng.gen_range(-s..s), 0.0));
        for j in (i + 1)..n {
            m.set(i, j, C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s)) * 0.5);
        }
    }
    m
}

fn rand_covector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub const ORACLE_DRAWS: usize = 1000;
pub const ORACLE_TOL: f64 = 1e-9;

pub fn oracle_equivalence(seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "oracle equivalence";
    finish(1, TITLE, (|| {
        let mut rng = rng_for(seed, 1);
        // (conditioned gap, plain relative gap) per quantity
        let mut worst: BTreeMap<(usize, &'static str), (f64, f64)> = BTreeMap::new();
        for n in 1..=3 {
            for _ in 0..ORACLE_DRAWS {
                let omega = rand_herm(&mut rng, n, 0.3).add(&HermitianMatrix::identity(n).scale(1.5));
                let alpha = rand_herm(&mut rng, n, 1.5);
                let theta_hat = phase(&pencil_eigenvalues(&alpha, &omega)?) + rng.gen_range(-1.2..1.2);
                let (a, b) = (rand_covector(&mut rng, n), rand_covector(&mut rng, n));
                let h = rand_herm(&mut rng, n, 1.0);
                for p in pointwise_oracle_pairs(&omega, &alpha, theta_hat, &a, &b, &h)? {
                    let e = worst.entry((n, p.name)).or_insert((0.0, 0.0));
                    *e = (e.0.max(p.relative_gap()), e.1.max(p.plain_relative_gap()));
                }
            }
        }
        let mut csv = String::from("n,quantity,draws,max_relative_gap,max_plain_relative_gap\n");
        for ((n, name), (g, plain)) in &worst {
            let _ = writeln!(csv, "{n},{name},{ORACLE_DRAWS},{g:e},{plain:e}");
        }
        write_file(out, "c01_oracle.csv", csv)?;
        let max = worst.values().map(|g| g.0).fold(0.0, f64::max);
        let (worst_plain, plain) =
            worst.iter().map(|(k, g)| (k, g.1)).fold(((0, ""), 0.0), |a, (k, g)| if g > a.1 { (*k, g) } else { a });
        Ok(CriterionResult {
            id: 1,
            title: TITLE,
            pass: max < ORACLE_TOL,
            detail: format!(
                "{} quantity/dimension pairs x {ORACLE_DRAWS} pencils: max gap relative to the oracle terms {max:.2e} (tol {ORACLE_TOL:e}); largest plain relative gap {plain:.2e} ({} at n = {})",
                worst.len(),
                worst_plain.1,
                worst_plain.0
            ),
        })
    })())
}

pub const AFFINE_SHIFT: f64 = 0.5;
pub const AFFINE_RESIDUAL: f64 = 1e-12;
pub const AFFINE_LENGTH_TOL: f64 = 1e-8;

pub fn affine_exactness(_seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "affine exactness";
    finish(2, TITLE, (|| {
        let bg = flat_n1(N1_POINTS)?;
        let g = *bg.grid();
        let schedule = dhym_core::geometry::DEFAULT_SCHEDULE.to_vec();
        let cfg = SolverConfig { newton_tol: AFFINE_RESIDUAL, ..SolverConfig::default() };
        let problem = EpsilonProblem::with_config(
            &bg,
            ScalarField::zeros(g),
            ScalarField::constant(g, AFFINE_SHIFT),
            *schedule.last().unwrap(),
            cfg,
        )?;
        let sols = solver::solve_ladder(&problem, &schedule)?;
        let exact = AFFINE_SHIFT.abs() * 2f64.powf(0.25) * TAU;
        let mut csv = String::from("epsilon,newtonSteps,finalResidual,length,exact\n");
        let (mut max_res, mut max_steps, mut max_gap) = (0.0f64, 0usize, 0.0f64);
        for s in &sols {
            let len = bg.path_length(&s.path)?;
            let res = *s.residual_history.last().unwrap();
            let steps = s.residual_history.len() - 1;
            let _ = writeln!(csv, "{:e},{steps},{res:e},{len:e},{exact:e}", s.epsilon);
            max_res = max_res.max(res);
            max_steps = max_steps.max(steps);
            max_gap = max_gap.max((len - exact).abs());
        }
        write_file(out, "c02_affine.csv", csv)?;
        Ok(CriterionResult {
            id: 2,
            title: TITLE,
            pass: max_res <= AFFINE_RESIDUAL && max_steps <= 2 && max_gap <= AFFINE_LENGTH_TOL,
            detail: format!(
                "shift {AFFINE_SHIFT} at {} epsilons: max residual {max_res:.1e} (tol {AFFINE_RESIDUAL:e}), max Newton steps {max_steps} (limit 2), max |length - |c|2^(1/4)2pi| {max_gap:.1e} (tol {AFFINE_LENGTH_TOL:e})",
                sols.len()
            ),
        })
    })())
}

pub const LINEARIZATION_DIRECTIONS: usize = 20;
pub const LINEARIZATION_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

pub fn linearization_consistency(seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "linearization consistency";
    finish(3, TITLE, (|| {
        let mut csv = String::from("background,direction,relative_error\n");
        let mut worst = 0.0f64;
        for (bi, inst) in instances()?.into_iter().enumerate() {
            let bg = &inst.bg;
            let g = *bg.grid();
            let mut rng = rng_for(seed, 300 + bi as u64);
            let draw = |rng: &mut ChaCha8Rng| trig_field(g, rng, 3, inst.max_freq, inst.amplitude);
            let (phi0, phi1) = (draw(&mut rng), draw(&mut rng));
            let problem = EpsilonProblem::new(bg, phi0.clone(), phi1.clone(), 0.2)?;
            let steps = problem.config.time_steps;
            // a non-affine state: the straight path bent by a smooth bump
            let bend = trig_field(g, &mut rng, 3, inst.max_freq, 0.02);
            let lin = problem.linear_path();
            let bent = along_time(&lin, &bend, &ScalarField::zeros(g), 1.0)?;
            for d in 0..LINEARIZATION_DIRECTIONS {
                let f1 = trig_field(g, &mut rng, 3, inst.max_freq, 1.0);
                let f2 = trig_field(g, &mut rng, 3, inst.max_freq, 1.0);
                let zero = PathField::linear(&ScalarField::zeros(g), &ScalarField::zeros(g), steps)?;
                let dir = along_time(&zero, &f1, &f2, 1.0)?;
                let jv = linearization_apply(&problem, &bent, &dir)?;
                let plus = residual(&problem, &along_time(&bent, &f1, &f2, FD_STEP)?)?;
                let minus = residual(&problem, &along_time(&bent, &f1, &f2, -FD_STEP)?)?;
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for i in 0..jv.data().len() {
                    let fd = (plus.data()[i] - minus.data()[i]) / (2.0 * FD_STEP);
                    num = num.max((fd - jv.data()[i]).abs());
                    den = den.max(jv.data()[i].abs());
                }
                let rel = num / den;
                worst = worst.max(rel);
                let _ = writeln!(csv, "{},{d},{rel:e}", inst.name);
            }
        }
        write_file(out, "c03_linearization.csv", csv)?;
        Ok(CriterionResult {
            id: 3,
            title: TITLE,
            pass: worst < LINEARIZATION_TOL,
            detail: format!(
                "{LINEARIZATION_DIRECTIONS} directions x 3 backgrounds, centered step {FD_STEP:e}: max relative error {worst:.2e} (tol {LINEARIZATION_TOL:e})"
            ),
        })
    })())
}

/// `path + c(sin(πt) f1 + sin(2πt) f2)` on interior slices.
fn along_time(path: &PathField, f1: &ScalarField, f2: &ScalarField, c: f64) -> Result<PathField, CliError> {
    let p = path.grid().len();
    let m = path.time_steps();
    let mut data = path.data().to_vec();
    for k in 1..m - 1 {
        let t = path.time(k);
        let (a, b) = ((std::f64::consts::PI * t).sin(), (TAU * t).sin());
        for i in 0..p {
            data[k * p + i] += c * (a * f1.values()[i] + b * f2.values()[i]);
        }
    }
    Ok(PathField::from_data(*path.grid(), m, data)?)
}

pub const CURVATURE_DRAWS: usize = 1000;
pub const FLAT_DRAWS: usize = 50;
pub const K_SIGN_TOL: f64 = 1e-10;
pub const FLAT_TOL: f64 = 1e-10;

pub fn curvature_sign(seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "non-positive sectional curvature";
    finish(9, TITLE, (|| {
        let mut parts = Vec::new();
        let mut pass = true;
        for (bi, inst) in instances()?.into_iter().enumerate() {
            let bg = &inst.bg;
            let g = *bg.grid();
            let mut rng = rng_for(seed, 900 + bi as u64);
            let mut planes = Vec::with_capacity(CURVATURE_DRAWS + FLAT_DRAWS);
            for draw in 0..CURVATURE_DRAWS + FLAT_DRAWS {
                let phi = trig_field(g, &mut rng, 3, inst.max_freq, 0.1);
                let psi = trig_field(g, &mut rng, 3, inst.max_freq, 1.0);
                let flat = draw >= CURVATURE_DRAWS;
                let eta = if flat {
                    let (a, b): (f64, f64) = (rng.gen_range(0.2..2.0), rng.gen_range(-1.0..1.0));
                    psi.map(|v| a * v + b)
                } else {
                    trig_field(g, &mut rng, 3, inst.max_freq, 1.0)
                };
                planes.push((draw, phi, psi, eta, flat));
            }
            let evaluated: Vec<_> = planes
                .par_iter()
                .map(|(draw, phi, psi, eta, flat)| (*draw, *flat, sectional_curvature(bg, phi, psi, eta)))
                .collect();
            let mut rows = Vec::new();
            let (mut max_k, mut max_gap, mut max_flat, mut errors) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, Vec::new());
            for (draw, flat, k) in evaluated {
                match k {
                    Ok(k) => {
                        if flat {
                            max_flat = max_flat.max(k.k_route_a.abs()).max(k.k_route_b.abs());
                        } else {
                            max_k = max_k.max(k.k_route_a).max(k.k_route_b);
                        }
                        max_gap = max_gap.max(k.route_gap);
                        rows.push(CurvatureRow {
                            draw,
                            k_route_a: k.k_route_a,
                            k_route_b: k.k_route_b,
                            denominator: k.denominator,
                            flat,
                        });
                    }
                    Err(e) => errors.push(format!("draw {draw}: {e}")),
                }
            }
            write_file(out, &format!("c09_curvature_{}.csv", inst.name), curvature_csv(&rows))?;
            let ok = errors.is_empty()
                && max_k <= K_SIGN_TOL
                && max_gap < dhym_core::curvature::ROUTE_TOLERANCE
                && max_flat <= FLAT_TOL;
            pass &= ok;
            let mut part = format!(
                "{}: max K {max_k:.2e}, max route gap {max_gap:.1e}, max flat |K| {max_flat:.1e}",
                inst.name
            );
            if !errors.is_empty() {
                let _ = write!(part, ", {} failed draws ({})", errors.len(), errors[0]);
            }
            parts.push(part);
        }
        Ok(CriterionResult {
            id: 9,
            title: TITLE,
            pass,
            detail: format!(
                "{CURVATURE_DRAWS} planes + {FLAT_DRAWS} flat planes per background; {} (tol K <= {K_SIGN_TOL:e}, gap < {:e}, flat {FLAT_TOL:e})",
                parts.join("; "),
                dhym_core::curvature::ROUTE_TOLERANCE
            ),
        })
    })())
}

pub const COMPAT_RATIO: (f64, f64) = (3.0, 5.0);
pub const TORSION_TOL: f64 = 1e-14;

struct CompatFields {
    phi: &'static str,
    phi_dot: &'static str,
    phi_ddot: &'static str,
    psi1: &'static str,
    psi1_dot: &'static str,
    psi2: &'static str,
}

const N1_FIELDS: CompatFields = CompatFields {
    phi: "0.1*sin(x1)*cos(y1)",
    phi_dot: "0.2*cos(x1 + 0.5) + 0.1*sin(y1 - x1)",
    phi_ddot: "0.1*sin(y1 + 1)",
    psi1: "1 + cos(x1) + 0.5*sin(y1 + 0.3)",
    psi1_dot: "sin(2*y1) + 0.2",
    psi2: "sin(x1 - 0.7) + 0.4*cos(x1 + y1) + 0.5",
};

const N2_FIELDS: CompatFields = CompatFields {
    phi: "0.05*sin(x1)*cos(y2) + 0.04*cos(x2 + y1)",
    phi_dot: "0.2*cos(x1 + 0.5) + 0.1*sin(y2 - x2)",
    phi_ddot: "0.1*sin(y1 + x2 + 1)",
    psi1: "1 + cos(x2) + 0.5*sin(y1 + 0.3)",
    psi1_dot: "sin(y2 + x1) + 0.2",
    psi2: "sin(x1 - 0.7) + 0.4*cos(y1 + y2) + 0.5",
};

fn compat_defect(bg: &Background, f: &CompatFields, delta: f64) -> Result<(f64, f64), CliError> {
    let g = *bg.grid();
    let s = |src: &str| -> Result<ScalarField, CliError> { Ok(Formula::parse(src)?.sample(g)?) };
    let d = metric_compatibility(
        bg,
        &s(f.phi)?,
        &s(f.phi_dot)?,
        &s(f.phi_ddot)?,
        &s(f.psi1)?,
        &s(f.psi1_dot)?,
        &s(f.psi2)?,
        delta,
    )?;
    Ok((d.defect, d.relative()))
}

pub fn connection_checks(seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "connection checks";
    finish(10, TITLE, (|| {
        type Maker = fn(usize) -> Result<Background, CliError>;
        let cases: [(&str, Maker, &CompatFields, usize); 3] = [
            ("flat-n1", flat_n1, &N1_FIELDS, 32),
            ("varying-n1", varying_n1, &N1_FIELDS, 32),
            ("product-n2", product_n2, &N2_FIELDS, 8),
        ];
        let mut csv = String::from("background,points,delta,defect,relative_defect\n");
        let mut parts = Vec::new();
        let mut pass = true;
        for (name, make, fields, coarse) in cases {
            let (dc, rc) = compat_defect(&make(coarse)?, fields, 0.1)?;
            let (df, rf) = compat_defect(&make(2 * coarse)?, fields, 0.05)?;
            let _ = writeln!(csv, "{name},{coarse},0.1,{dc:e},{rc:e}");
            let _ = writeln!(csv, "{name},{},0.05,{df:e},{rf:e}", 2 * coarse);
            let ratio = dc / df;
            let ok = (COMPAT_RATIO.0..=COMPAT_RATIO.1).contains(&ratio);
            pass &= ok;
            parts.push(format!("{name} defect ratio {ratio:.2} under halving"));
        }
        let mut torsion = 0.0f64;
        for (bi, inst) in instances()?.into_iter().enumerate() {
            let g = *inst.bg.grid();
            let mut rng = rng_for(seed, 1000 + bi as u64);
            for _ in 0..3 {
                let fam = TwoParamFamily::new(
                    trig_field(g, &mut rng, 3, inst.max_freq, 0.1),
                    trig_field(g, &mut rng, 3, inst.max_freq, 1.0),
                    trig_field(g, &mut rng, 3, inst.max_freq, 1.0),
                )?;
                fam.check_members(&inst.bg)?;
                torsion = torsion.max(torsion_defect(&inst.bg, &fam)?);
            }
        }
        pass &= torsion <= TORSION_TOL;
        let _ = writeln!(csv, "torsion,all,0,{torsion:e},0");
        write_file(out, "c10_connection.csv", csv)?;
        Ok(CriterionResult {
            id: 10,
            title: TITLE,
            pass,
            detail: format!(
                "metric compatibility: {} (accepted [{}, {}]); torsion sup defect {torsion:.1e} over 9 affine families (tol {TORSION_TOL:e})",
                parts.join(", "),
                COMPAT_RATIO.0,
                COMPAT_RATIO.1
            ),
        })
    })())
}

pub const MA_EPSILON: f64 = 0.1;
pub const MA_FACTOR: f64 = 5.0;
const MA_PHI0: &str = "0.2*sin(x1)*cos(y1)";
const MA_PHI1: &str = "0.15*cos(x1 + y1) - 0.1*sin(2*y1) + 0.3";

pub fn monge_ampere_cross_check(_seed: u64, out: &Path) -> CriterionResult {
    const TITLE: &str = "Monge-Ampere cross-check";
    finish(12, TITLE, (|| {
        let bg = flat_n1(N1_POINTS)?;
        let g = *bg.grid();
        let phi0 = Formula::parse(MA_PHI0)?.sample(g)?;
        let phi1 = Formula::parse(MA_PHI1)?.sample(g)?;
        let cfg = SolverConfig { schedule: Some(vec![0.8, 0.4, 0.2]), ..SolverConfig::default() };
        let problem = EpsilonProblem::with_config(&bg, phi0.clone(), phi1.clone(), MA_EPSILON, cfg)?;
        let (dhym_path, _) = solver::solve(&problem)?;
        let oracle = MaOracle::new(&phi0, &phi1, dhym_path.time_steps(), MA_EPSILON)?;
        let start_residual = oracle.residual_sup(&dhym_path);
        let ma = oracle.solve(&dhym_path, 1e-10, 30)?;
        let diff = ma.path.data().iter().zip(dhym_path.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let h = g.spacing();
        let bound = MA_FACTOR * h * h;
        let constant = diff / (h * h);
        let mut s = String::new();
        let _ = writeln!(s, "epsilon = {MA_EPSILON:e}");
        let _ = writeln!(s, "pointsPerAxis = {}", g.points_per_axis());
        let _ = writeln!(s, "h = {h:e}");
        let _ = writeln!(s, "maResidualOfDhymPath = {start_residual:e}");
        let _ = writeln!(s, "maNewtonSteps = {}", ma.newton_steps);
        let _ = writeln!(s, "maFinalResidual = {:e}", ma.residual);
        let _ = writeln!(s, "supDifference = {diff:e}");
        let _ = writeln!(s, "supDifferenceOverH2 = {constant:e}");
        let _ = writeln!(s, "bound = {bound:e}");
        write_file(out, "c12_monge_ampere.txt", s)?;
        Ok(CriterionResult {
            id: 12,
            title: TITLE,
            pass: diff < bound && constant <= 10.0,
            detail: format!(
                "64^2, epsilon {MA_EPSILON}: sup |dHYM - MA| {diff:.3e} = {constant:.3} h^2 (bound {MA_FACTOR} h^2 = {bound:.3e})"
            ),
        })
    })())
}
