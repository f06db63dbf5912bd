//! Criteria built on the random distance ensemble: five member potentials
//! per background, the ten distances between them, and what is read off
//! those solves (scaling laws, constant speed, the lower bound, the
//! derivative formula, comparison triangles and the Hessian diagnostic).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dhym_core::formula::Formula;
use dhym_core::geometry::{
    cat0_from_parts, distance, distance_derivative, distance_lower_bound, distance_seeded, loglog_slope,
    DistanceOptions, DistanceResult,
};
use dhym_core::sampling::trig_field;
use dhym_core::{Background, PathField, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{failed, flat_n1, instances, product_n2, CriterionResult, Instance, Selection, N2_POINTS};
use crate::{write_file, CliError};

pub const POOL: usize = 5;
pub const MIN_PHI_TT_EXPONENT: f64 = 1.7;
pub const RATE_EXPONENT: (f64, f64) = (1.7, 2.3);
/// The energy-rate fit uses the smallest four scheduled epsilons. At 0.8 the
/// rate still carries a visible eps^4 term, which steepens the slope without
/// saying anything about the small-eps law; the full-schedule slope is
/// reported next to it.
pub const RATE_FIT_POINTS: usize = 4;
pub const SPEED_DEFECT: f64 = 0.05;
pub const DERIVATIVE_TOL: f64 = 0.05;
pub const DERIVATIVE_STEP: f64 = 0.1;
pub const HESSIAN_VARIATION: f64 = 0.1;
pub const CAT0_LAMBDAS: [f64; 3] = [0.25, 0.5, 0.75];

const T4: &str = "min phi_tt scaling";
const T5: &str = "energy-rate scaling";
const T6: &str = "constant speed";
const T7: &str = "distance lower bound";
const T8: &str = "distance derivative";
const T11: &str = "CAT(0) comparison";
const T13: &str = "C^{1,1} diagnostic";

/// Everything measured on one solved pair.
struct Pair {
    i: usize,
    j: usize,
    result: DistanceResult,
    lower_bound: f64,
    /// Sup of real second differences over interior time slices, per ε.
    hessian: Vec<f64>,
}

struct Solved {
    inst: Instance,
    pool: Vec<ScalarField>,
    pairs: BTreeMap<(usize, usize), Pair>,
}

impl Solved {
    /// The distance from `pool[a]` to `pool[b]`, reversing a stored pair
    /// when needed.
    fn oriented(&self, a: usize, b: usize) -> DistanceResult {
        if a < b {
            return self.pairs[&(a, b)].result.clone();
        }
        let mut r = self.pairs[&(b, a)].result.clone();
        for s in &mut r.solutions {
            s.path = s.path.reversed();
        }
        r
    }
}

fn options() -> DistanceOptions {
    DistanceOptions { full_diagnostics: true, ..DistanceOptions::default() }
}

fn interior_hessian_sup(path: &PathField) -> f64 {
    let g = *path.grid();
    let mut h = 0.0f64;
    for k in 1..path.time_steps() - 1 {
        let s = path.slice(k);
        for idx in 0..g.len() {
            h = h.max(g.real_hessian_sup_at(s, idx));
        }
    }
    h
}

fn variation(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max
}

fn draw_pool(inst: &Instance, rng: &mut ChaCha8Rng) -> Result<Vec<ScalarField>, CliError> {
    let g = *inst.bg.grid();
    let mut pool = Vec::with_capacity(POOL);
    while pool.len() < POOL {
        let f = trig_field(g, rng, 3, inst.max_freq, inst.amplitude);
        if inst.bg.is_member(&f)?.member {
            pool.push(f);
        }
    }
    Ok(pool)
}

fn solve_instance(seed: u64, bi: usize, inst: Instance) -> Result<Solved, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(400 + bi as u64);
    let pool = draw_pool(&inst, &mut rng)?;
    let opts = options();
    let mut pairs: BTreeMap<(usize, usize), Pair> = BTreeMap::new();
    for i in 0..POOL {
        for j in (i + 1)..POOL {
            let result = match pairs.get(&(i, j - 1)) {
                Some(prev) => distance_seeded(&inst.bg, &pool[i], &pool[j], &opts, &prev.result)?,
                None => distance(&inst.bg, &pool[i], &pool[j], &opts)?,
            };
            let lower_bound = distance_lower_bound(&inst.bg, &pool[i], &pool[j])?;
            let hessian = result.solutions.iter().map(|s| interior_hessian_sup(&s.path)).collect();
            pairs.insert((i, j), Pair { i, j, result, lower_bound, hessian });
        }
    }
    Ok(Solved { inst, pool, pairs })
}

/// Exponent of `-min φ_tt` against ε. Values at which `min φ_tt ≥ 0`
/// satisfy the bound outright; the exponent is fitted on the others and
/// reported as `None` when fewer than three remain.
fn min_phi_tt_exponent(eps: &[f64], min_tt: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = eps.iter().zip(min_tt).filter(|(_, m)| **m < 0.0).map(|(e, m)| (*e, -*m)).unzip();
    (x.len() >= 3).then(|| loglog_slope(&x, &y).0)
}

struct PairStats {
    tt_exponent: Option<f64>,
    rate_exponent: f64,
    rate_exponent_full: f64,
    speed: f64,
    bound_gap: f64,
    hess_variation: f64,
}

fn pair_stats(p: &Pair) -> Result<PairStats, CliError> {
    let r = &p.result;
    let eps: Vec<f64> = r.records.iter().map(|e| e.epsilon).collect();
    let mut min_tt = Vec::new();
    for rec in &r.records {
        let d = rec.diagnostics.as_ref().ok_or_else(|| CliError::Config("diagnostics missing".into()))?;
        min_tt.push(d.min_phi_tt);
    }
    let rates: Vec<f64> = r.records.iter().map(|e| e.max_energy_rate).collect();
    Ok(PairStats {
        tt_exponent: min_phi_tt_exponent(&eps, &min_tt),
        rate_exponent: {
            let k = eps.len().saturating_sub(RATE_FIT_POINTS);
            loglog_slope(&eps[k..], &rates[k..]).0
        },
        rate_exponent_full: loglog_slope(&eps, &rates).0,
        speed: r.energy_spread / r.mean_energy,
        bound_gap: p.lower_bound - r.d,
        hess_variation: variation(&p.hessian),
    })
}

fn write_pair_reports(out: &Path, s: &Solved) -> Result<Vec<(usize, usize, PairStats, f64)>, CliError> {
    let mut ens = String::from(
        "i,j,epsilon,length,minE,maxE,max|dE/dt|,minPhiTT,interiorHessianSup,newtonSteps,lagrangianHolds\n",
    );
    let mut summary = String::from(
        "i,j,d,lowerBound,tolerance,fitResidual,spreadOverMean,minPhiTTExponent,rateExponent,rateExponentFullSchedule,hessianVariation\n",
    );
    let mut stats = Vec::new();
    for p in s.pairs.values() {
        for (rec, h) in p.result.records.iter().zip(&p.hessian) {
            let d = rec.diagnostics.as_ref();
            let _ = writeln!(
                ens,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                p.i,
                p.j,
                rec.epsilon,
                rec.length,
                rec.min_energy,
                rec.max_energy,
                rec.max_energy_rate,
                d.map_or(f64::NAN, |d| d.min_phi_tt),
                h,
                rec.newton_steps,
                d.and_then(|d| d.lagrangian.as_ref()).map_or("n/a".to_string(), |l| l.all_hold().to_string()),
            );
        }
        let st = pair_stats(p)?;
        let r = &p.result;
        let _ = writeln!(
            summary,
            "{},{},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
            p.i,
            p.j,
            r.d,
            p.lower_bound,
            r.tolerance(),
            r.fit_residual,
            st.speed,
            st.tt_exponent.map_or("nonnegative".to_string(), |e| format!("{e:e}")),
            st.rate_exponent,
            st.rate_exponent_full,
            st.hess_variation,
        );
        stats.push((p.i, p.j, st, r.tolerance()));
    }
    write_file(out, &format!("ensemble_{}.csv", s.inst.name), ens)?;
    write_file(out, &format!("pairs_{}.csv", s.inst.name), summary)?;
    Ok(stats)
}

/// Centered differences of `t ↦ d(φ₀, ψ₀ + tχ)` against the first-variation
/// formula evaluated on the geodesic from ψ₀ to φ₀.
fn derivative_case(s: &Solved, i: usize, j: usize, chi: &ScalarField) -> Result<(f64, f64), CliError> {
    let bg = &s.inst.bg;
    let (phi0, psi0) = (&s.pool[i], &s.pool[j]);
    let base = &s.pairs[&(i, j)].result;
    let back = s.oriented(j, i);
    let psi1 = psi0.lin_comb(1.0, chi, 1.0)?;
    let psi_path = PathField::linear(psi0, &psi1, base.smallest().path.time_steps())?;
    let formula = distance_derivative(bg, phi0, &psi_path, &back.smallest().path)?;
    let opts = DistanceOptions::default();
    let plus = psi0.lin_comb(1.0, chi, DERIVATIVE_STEP)?;
    let minus = psi0.lin_comb(1.0, chi, -DERIVATIVE_STEP)?;
    for f in [&plus, &minus] {
        bg.geometry(f)?.require_member("perturbed endpoint")?;
    }
    let dp = distance_seeded(bg, phi0, &plus, &opts, base)?;
    let dm = distance_seeded(bg, phi0, &minus, &opts, base)?;
    Ok((formula, (dp.d - dm.d) / (2.0 * DERIVATIVE_STEP)))
}

const DERIVATIVE_CASES: [(usize, usize, usize); 5] = [(0, 0, 1), (0, 2, 3), (1, 0, 1), (1, 2, 3), (2, 0, 1)];

fn derivative_check(seed: u64, out: &Path, solved: &[Solved]) -> Result<CriterionResult, CliError> {
    let mut csv = String::from("background,i,j,formula,finiteDifference,relativeError\n");
    let mut worst = 0.0f64;
    for (case, &(bi, i, j)) in DERIVATIVE_CASES.iter().enumerate() {
        let s = &solved[bi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(800 + case as u64);
        let chi = trig_field(*s.inst.bg.grid(), &mut rng, 3, s.inst.max_freq, 0.1);
        let (formula, fd) = derivative_case(s, i, j, &chi)?;
        let rel = (formula - fd).abs() / fd.abs().max(formula.abs());
        worst = worst.max(rel);
        let _ = writeln!(csv, "{},{i},{j},{formula:e},{fd:e},{rel:e}", s.inst.name);
    }
    write_file(out, "c08_derivative.csv", csv)?;
    Ok(CriterionResult {
        id: 8,
        title: T8,
        pass: worst < DERIVATIVE_TOL,
        detail: format!(
            "{} instances, centered step {DERIVATIVE_STEP}: max relative error {worst:.2e} (tol {DERIVATIVE_TOL})",
            DERIVATIVE_CASES.len()
        ),
    })
}

const TRIANGLES: [(usize, usize, usize); 5] = [(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 4, 0), (4, 0, 1)];

/// Smallest `slack + tolerance` over λ, and the tolerance there.
fn triangle_margin(bg: &Background, pq: &DistanceResult, rp: &DistanceResult, rq: &DistanceResult, r: &ScalarField) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let rep = cat0_from_parts(bg, pq, rp, rq, r, &CAT0_LAMBDAS, &DistanceOptions::default())?;
    Ok(rep.slacks.iter().map(|c| (c.lambda, c.slack, c.tolerance)).collect())
}

fn cat0_check(out: &Path, solved: &[Solved]) -> Result<CriterionResult, CliError> {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in solved {
        let mut csv = String::from("p,q,r,lambda,slack,tolerance\n");
        let mut min_margin = f64::INFINITY;
        for &(p, q, r) in &TRIANGLES {
            let rows = triangle_margin(&s.inst.bg, &s.oriented(p, q), &s.oriented(r, p), &s.oriented(r, q), &s.pool[r])?;
            for (lam, slack, tol) in rows {
                let _ = writeln!(csv, "{p},{q},{r},{lam:e},{slack:e},{tol:e}");
                min_margin = min_margin.min(slack + tol);
            }
        }
        write_file(out, &format!("cat0_{}.csv", s.inst.name), csv)?;
        pass &= min_margin >= 0.0;
        parts.push(format!("{} min(slack + tol) {min_margin:.2e}", s.inst.name));
    }
    // constant triangle on the flat background: every side is a straight
    // line and the comparison holds with equality
    let bg = flat_n1(super::N1_POINTS)?;
    let g = *bg.grid();
    let (p, q, r) = (ScalarField::zeros(g), ScalarField::constant(g, 0.6), ScalarField::constant(g, -0.4));
    let opts = DistanceOptions::default();
    let pq = distance(&bg, &p, &q, &opts)?;
    let rp = distance(&bg, &r, &p, &opts)?;
    let rq = distance(&bg, &r, &q, &opts)?;
    let rows = triangle_margin(&bg, &pq, &rp, &rq, &r)?;
    let mut csv = String::from("lambda,slack,tolerance\n");
    let mut worst = 0.0f64;
    for (lam, slack, tol) in rows {
        let _ = writeln!(csv, "{lam:e},{slack:e},{tol:e}");
        pass &= slack.abs() <= tol;
        worst = worst.max(slack.abs() / tol);
    }
    write_file(out, "cat0_constant.csv", csv)?;
    Ok(CriterionResult {
        id: 11,
        title: T11,
        pass,
        detail: format!(
            "{} triangles x lambda {:?} per background: {}; constant triangle max |slack|/tol {worst:.2e}",
            TRIANGLES.len(),
            CAT0_LAMBDAS,
            parts.join(", ")
        ),
    })
}

const PRODUCT_PHI0: &str = "0.03*sin(3*x1)*cos(2*y1)";
const PRODUCT_PHI1: &str = "0.03*cos(3*x1 - y1) + 0.02*sin(x1 + 2*y1) + 0.2";

/// The product construction with data oscillating on the first factor only:
/// interior Hessian sup per ε, and how far the solution strays from being
/// constant along the second factor.
fn product_monitor(out: &Path) -> Result<String, CliError> {
    let bg = product_n2(N2_POINTS)?;
    let g = *bg.grid();
    let phi0 = Formula::parse(PRODUCT_PHI0)?.sample(g)?;
    let phi1 = Formula::parse(PRODUCT_PHI1)?.sample(g)?;
    let r = distance(&bg, &phi0, &phi1, &DistanceOptions::default())?;
    let inner = g.points_per_axis() * g.points_per_axis();
    let mut csv = String::from("epsilon,interiorHessianSup,factorDefect\n");
    let mut hess = Vec::new();
    for s in &r.solutions {
        let h = interior_hessian_sup(&s.path);
        // the last two axes run fastest: blocks of `inner` share (x1, y1)
        let defect = s
            .path
            .data()
            .chunks(inner)
            .map(|b| b.iter().map(|v| (v - b[0]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let _ = writeln!(csv, "{:e},{h:e},{defect:e}", s.epsilon);
        hess.push(h);
    }
    write_file(out, "c13_product.csv", csv)?;
    Ok(format!("product construction (reported only): d {:.4e}, Hessian sup variation {:.2e}", r.d, variation(&hess)))
}

pub fn run(seed: u64, out: &Path, sel: &Selection) -> Result<Vec<CriterionResult>, CliError> {
    let mut solved = Vec::new();
    for (bi, inst) in instances()?.into_iter().enumerate() {
        solved.push(solve_instance(seed, bi, inst)?);
    }
    let mut stats = Vec::new();
    for s in &solved {
        stats.push((s.inst.name, write_pair_reports(out, s)?));
    }

    let mut results = Vec::new();
    let per_bg = |f: &dyn Fn(&[(usize, usize, PairStats, f64)]) -> (bool, String)| -> (bool, String) {
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, st) in &stats {
            let (ok, msg) = f(st);
            pass &= ok;
            parts.push(format!("{name} {msg}"));
        }
        (pass, parts.join("; "))
    };
    let pairs = POOL * (POOL - 1) / 2;

    if sel.has(4) {
        let (pass, detail) = per_bg(&|st| {
            let fitted: Vec<f64> = st.iter().filter_map(|(_, _, s, _)| s.tt_exponent).collect();
            let min = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
            let trivial = st.len() - fitted.len();
            (min >= MIN_PHI_TT_EXPONENT, format!("min exponent {min:.3} ({trivial} pairs with min phi_tt >= 0 at most epsilons)"))
        });
        results.push(CriterionResult {
            id: 4,
            title: T4,
            pass,
            detail: format!("{pairs} pairs per background: {detail} (need >= {MIN_PHI_TT_EXPONENT})"),
        });
    }
    if sel.has(5) {
        let (pass, detail) = per_bg(&|st| {
            let e: Vec<f64> = st.iter().map(|(_, _, s, _)| s.rate_exponent).collect();
            let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let full = st.iter().map(|(_, _, s, _)| s.rate_exponent_full).fold(f64::NEG_INFINITY, f64::max);
            (
                lo >= RATE_EXPONENT.0 && hi <= RATE_EXPONENT.1,
                format!("exponents in [{lo:.3}, {hi:.3}] (full schedule max {full:.3})"),
            )
        });
        results.push(CriterionResult {
            id: 5,
            title: T5,
            pass,
            detail: format!(
                "{pairs} pairs per background, fit over the {RATE_FIT_POINTS} smallest epsilons: {detail} (need [{}, {}])",
                RATE_EXPONENT.0,
                RATE_EXPONENT.1
            ),
        });
    }
    if sel.has(6) {
        let (pass, detail) = per_bg(&|st| {
            let m = st.iter().map(|(_, _, s, _)| s.speed).fold(0.0, f64::max);
            (m < SPEED_DEFECT, format!("max spread/mean {m:.2e}"))
        });
        results.push(CriterionResult {
            id: 6,
            title: T6,
            pass,
            detail: format!("{pairs} pairs per background at epsilon 0.05: {detail} (tol {SPEED_DEFECT})"),
        });
    }
    if sel.has(7) {
        let (mut pass, detail) = per_bg(&|st| {
            let m = st.iter().map(|(_, _, s, tol)| s.bound_gap - tol).fold(f64::NEG_INFINITY, f64::max);
            (m <= 0.0, format!("max (lb - d - tol) {m:.2e}"))
        });
        let bg = flat_n1(super::N1_POINTS)?;
        let g = *bg.grid();
        let (a, b) = (ScalarField::zeros(g), ScalarField::constant(g, 0.5));
        let r = distance(&bg, &a, &b, &DistanceOptions::default())?;
        let lb = distance_lower_bound(&bg, &a, &b)?;
        let eq = (r.d - lb).abs();
        pass &= eq <= r.tolerance();
        results.push(CriterionResult {
            id: 7,
            title: T7,
            pass,
            detail: format!(
                "{pairs} pairs per background: {detail}; constant shift |d - lb| {eq:.1e} (tol {:.1e})",
                r.tolerance()
            ),
        });
    }
    if sel.has(8) {
        results.push(derivative_check(seed, out, &solved).unwrap_or_else(|e| failed(8, T8, e)));
    }
    if sel.has(11) {
        results.push(cat0_check(out, &solved).unwrap_or_else(|e| failed(11, T11, e)));
    }
    if sel.has(13) {
        let (pass, detail) = per_bg(&|st| {
            let m = st.iter().map(|(_, _, s, _)| s.hess_variation).fold(0.0, f64::max);
            (m < HESSIAN_VARIATION, format!("max variation {m:.2e}"))
        });
        let product = product_monitor(out).unwrap_or_else(|e| format!("product construction failed: {e}"));
        results.push(CriterionResult {
            id: 13,
            title: T13,
            pass,
            detail: format!(
                "interior-slice Hessian sup over epsilon in [0.05, 0.8], {pairs} pairs per background: {detail} (tol {HESSIAN_VARIATION}); {product}"
            ),
        });
    }
    Ok(results)
}
