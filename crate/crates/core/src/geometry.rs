//! Distances on the space of almost calibrated potentials.
//!
//! The distance between two potentials is the ε → 0 limit of the lengths of
//! ε-geodesics. We solve on a decreasing ε ladder and fit
//! `length(ε) = d + a ε²` by least squares; the worst fit residual is kept
//! as the accuracy yardstick for every inequality built on top.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{integrate, same_grid, ScalarField};
use crate::solver::{self, diagnostics, Diagnostics, EpsilonProblem, EpsilonSolution, SolverConfig};
use crate::space::{length_from_energies, Background, PathField};

pub const DEFAULT_SCHEDULE: [f64; 5] = [0.8, 0.4, 0.2, 0.1, 0.05];

/// Absolute slack added to every fit-based tolerance so that exact fits
/// still leave room for rounding, relative to `max(1, d)`.
pub const ROUNDING_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceOptions {
    pub schedule: Vec<f64>,
    pub solver: SolverConfig,
    /// The fit is flagged unreliable when its residual exceeds this
    /// fraction of `max(d, 1)`.
    pub fit_threshold: f64,
    /// Run the full solver diagnostics at every ε (costly on 4-d grids).
    pub full_diagnostics: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            solver: SolverConfig::default(),
            fit_threshold: 1e-2,
            full_diagnostics: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub length: f64,
    pub energies: Vec<f64>,
    pub min_energy: f64,
    pub max_energy: f64,
    pub max_energy_rate: f64,
    pub newton_steps: usize,
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Clone, Debug)]
pub struct DistanceResult {
    pub d: f64,
    /// Coefficient `a` of the ε² term.
    pub slope: f64,
    /// Largest absolute residual of the least-squares fit.
    pub fit_residual: f64,
    pub unreliable: bool,
    pub records: Vec<EpsilonRecord>,
    /// `max_t |E(t) − d²|` at the smallest ε.
    pub constant_speed_defect: f64,
    /// `max_t |E(t) − mean E|` at the smallest ε.
    pub energy_spread: f64,
    pub mean_energy: f64,
    pub solutions: Vec<EpsilonSolution>,
}

impl DistanceResult {
    /// Three times the fit residual plus a rounding floor.
    pub fn tolerance(&self) -> f64 {
        3.0 * self.fit_residual + ROUNDING_FLOOR * self.d.abs().max(1.0)
    }

    /// The same tolerance expressed for `d²`.
    pub fn squared_tolerance(&self) -> f64 {
        let t = self.tolerance();
        2.0 * self.d.abs() * t + t * t
    }

    pub fn smallest(&self) -> &EpsilonSolution {
        self.solutions.last().expect("non-empty schedule")
    }

    /// One row per ε.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,length,minE,maxE,max|dE/dt|\n");
        for r in &self.records {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e},{:e}", r.epsilon, r.length, r.min_energy, r.max_energy, r.max_energy_rate);
        }
        s
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d = {:e}", self.d);
        let _ = writeln!(s, "slope = {:e}", self.slope);
        let _ = writeln!(s, "fitResidual = {:e}", self.fit_residual);
        let _ = writeln!(s, "tolerance = {:e}", self.tolerance());
        let _ = writeln!(s, "unreliable = {}", self.unreliable);
        let _ = writeln!(s, "constantSpeedDefect = {:e}", self.constant_speed_defect);
        let _ = writeln!(s, "energySpread = {:e}", self.energy_spread);
        let _ = writeln!(s, "meanEnergy = {:e}", self.mean_energy);
        s
    }
}

/// Least-squares fit `y = c + a x`, returning `(c, a, max |residual|)`.
pub fn fit_affine(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    if x.len() == 1 {
        return (y[0], 0.0, 0.0);
    }
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c = my - a * mx;
    let res = x.iter().zip(y).map(|(a_, b)| (b - c - a * a_).abs()).fold(0.0, f64::max);
    (c, a, res)
}

/// Log-log slope of `|y|` against `x`, with the fit residual.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let (_, a, r) = fit_affine(&lx, &ly);
    (a, r)
}

fn record(problem: &EpsilonProblem, sol: &EpsilonSolution, full: bool) -> Result<EpsilonRecord> {
    let energies = problem.bg.path_energy_profile(&sol.path)?;
    let rate = crate::solver::energy_rate(&energies, sol.path.dt());
    let diagnostics = if full { Some(diagnostics(problem, &sol.path)?) } else { None };
    Ok(EpsilonRecord {
        epsilon: sol.epsilon,
        length: length_from_energies(&energies, sol.path.dt()),
        min_energy: energies.iter().cloned().fold(f64::INFINITY, f64::min),
        max_energy: energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_energy_rate: rate.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        newton_steps: sol.residual_history.len() - 1,
        energies,
        diagnostics,
    })
}

fn distance_impl(
    bg: &Background,
    phi0: &ScalarField,
    phi1: &ScalarField,
    opts: &DistanceOptions,
    seed: Option<&DistanceResult>,
) -> Result<DistanceResult> {
    let last = *opts.schedule.last().ok_or_else(|| Error::Domain("empty epsilon schedule".into()))?;
    let problem = EpsilonProblem::with_config(bg, phi0.clone(), phi1.clone(), last, opts.solver.clone())?;
    let solutions = match seed {
        Some(s) => solver::solve_ladder_seeded(&problem, &opts.schedule, &s.solutions)?,
        None => solver::solve_ladder(&problem, &opts.schedule)?,
    };
    let mut records = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        let p = EpsilonProblem { epsilon: sol.epsilon, ..problem.clone() };
        records.push(record(&p, sol, opts.full_diagnostics)?);
    }
    let x: Vec<f64> = records.iter().map(|r| r.epsilon * r.epsilon).collect();
    let y: Vec<f64> = records.iter().map(|r| r.length).collect();
    let (d, slope, fit_residual) = fit_affine(&x, &y);
    let e = &records.last().unwrap().energies;
    let mean_energy = e.iter().sum::<f64>() / e.len() as f64;
    Ok(DistanceResult {
        d,
        slope,
        fit_residual,
        unreliable: fit_residual > opts.fit_threshold * d.abs().max(1.0),
        constant_speed_defect: e.iter().map(|v| (v - d * d).abs()).fold(0.0, f64::max),
        energy_spread: e.iter().map(|v| (v - mean_energy).abs()).fold(0.0, f64::max),
        mean_energy,
        records,
        solutions,
    })
}

/// Extrapolated distance from `phi0` to `phi1`.
pub fn distance(bg: &Background, phi0: &ScalarField, phi1: &ScalarField, opts: &DistanceOptions) -> Result<DistanceResult> {
    distance_impl(bg, phi0, phi1, opts, None)
}

/// [`distance`] warm-started from a solved ladder with nearby endpoints.
pub fn distance_seeded(
    bg: &Background,
    phi0: &ScalarField,
    phi1: &ScalarField,
    opts: &DistanceOptions,
    seed: &DistanceResult,
) -> Result<DistanceResult> {
    distance_impl(bg, phi0, phi1, opts, Some(seed))
}

/// `sqrt(max(∫_{φ₀>φ₁}(φ₀−φ₁)² W_{φ₀}, ∫_{φ₁>φ₀}(φ₁−φ₀)² W_{φ₁}))`.
pub fn distance_lower_bound(bg: &Background, phi0: &ScalarField, phi1: &ScalarField) -> Result<f64> {
    let w0 = bg.weight(phi0)?;
    let w1 = bg.weight(phi1)?;
    same_grid(phi0.grid(), phi1.grid())?;
    let above = phi0.zip_map(phi1, |a, b| if a > b { (a - b) * (a - b) } else { 0.0 })?;
    let below = phi0.zip_map(phi1, |a, b| if b > a { (b - a) * (b - a) } else { 0.0 })?;
    Ok(integrate(&above, &w0)?.max(integrate(&below, &w1)?).sqrt())
}

/// `d/dt|₀ d(φ₀, ψ(t)) = −∫ φ_s(0) ψ_t(0) W_{ψ(0)} / (∫ φ_s(0)² W_{ψ(0)})^{1/2}`
/// where `φ` is the (small-ε) geodesic from `ψ(0)` to `φ₀`.
pub fn distance_derivative(
    bg: &Background,
    phi0: &ScalarField,
    psi_path: &PathField,
    geodesic_from_psi0: &PathField,
) -> Result<f64> {
    same_grid(bg.grid(), psi_path.grid())?;
    same_grid(bg.grid(), geodesic_from_psi0.grid())?;
    same_grid(bg.grid(), phi0.grid())?;
    let m = geodesic_from_psi0.time_steps();
    if geodesic_from_psi0.slice(0) != psi_path.slice(0) {
        return Err(Error::Domain("geodesic does not start at psi(0)".into()));
    }
    if geodesic_from_psi0.slice(m - 1) != phi0.values() {
        return Err(Error::Domain("geodesic does not end at phi0".into()));
    }
    let psi0 = psi_path.slice_field(0);
    let w = bg.weight(&psi0)?;
    let phis = ScalarField::from_values(*bg.grid(), geodesic_from_psi0.velocity(0))?;
    let psit = ScalarField::from_values(*bg.grid(), psi_path.velocity(0))?;
    let den = integrate(&phis.map(|v| v * v), &w)?;
    if den < 1e-12 {
        return Err(Error::Domain(format!("degenerate input: zero-speed geodesic (speed² {den:e})")));
    }
    let num = integrate(&phis.zip_map(&psit, |a, b| a * b)?, &w)?;
    Ok(-num / den.sqrt())
}

/// Slice of a path at a real time, linear in t between grid times.
pub fn path_point(path: &PathField, t: f64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    let m = path.time_steps();
    let x = t * (m - 1) as f64;
    let k = x.round();
    if (x - k).abs() < 1e-9 {
        return Ok(path.slice_field(k as usize));
    }
    let k0 = x.floor() as usize;
    let f = x - k0 as f64;
    let (a, b) = (path.slice(k0), path.slice(k0 + 1));
    ScalarField::from_values(*path.grid(), a.iter().zip(b).map(|(u, v)| (1.0 - f) * u + f * v).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSlack {
    pub lambda: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub distance_squared: f64,
}

#[derive(Clone, Debug)]
pub struct Cat0Report {
    pub d_pq: f64,
    pub d_rp: f64,
    pub d_rq: f64,
    pub slacks: Vec<ComparisonSlack>,
}

impl Cat0Report {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,slack,tolerance,dist2\n");
        for c in &self.slacks {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", c.lambda, c.slack, c.tolerance, c.distance_squared);
        }
        s
    }
}

/// Slack of `d(R, φ(λ))² ≤ (1−λ)d(R,P)² + λd(R,Q)² − λ(1−λ)d(P,Q)²`, where
/// `φ(λ)` is read off the smallest-ε geodesic from P to Q.
pub fn cat0_comparison(
    bg: &Background,
    p: &ScalarField,
    q: &ScalarField,
    r: &ScalarField,
    lambdas: &[f64],
    opts: &DistanceOptions,
) -> Result<Cat0Report> {
    let pq = distance(bg, p, q, opts)?;
    let rp = distance(bg, r, p, opts)?;
    let rq = distance_seeded(bg, r, q, opts, &rp)?;
    cat0_from_parts(bg, &pq, &rp, &rq, r, lambdas, opts)
}

/// [`cat0_comparison`] reusing already computed side distances
/// (`pq` from P to Q, `rp` from R to P, `rq` from R to Q).
pub fn cat0_from_parts(
    bg: &Background,
    pq: &DistanceResult,
    rp: &DistanceResult,
    rq: &DistanceResult,
    r: &ScalarField,
    lambdas: &[f64],
    opts: &DistanceOptions,
) -> Result<Cat0Report> {
    let geo = &pq.smallest().path;
    let mut slacks = Vec::with_capacity(lambdas.len());
    let mut prev: Option<DistanceResult> = None;
    for &lam in lambdas {
        let point = path_point(geo, lam)?;
        let rl_owned;
        let rl: &DistanceResult = if point.values() == geo.slice(0) {
            rp
        } else if point.values() == geo.slice(geo.time_steps() - 1) {
            rq
        } else {
            let seed = prev.as_ref().unwrap_or(if lam < 0.5 { rp } else { rq });
            rl_owned = distance_seeded(bg, r, &point, opts, seed)?;
            prev = Some(rl_owned.clone());
            &rl_owned
        };
        let rhs = (1.0 - lam) * rp.d * rp.d + lam * rq.d * rq.d - lam * (1.0 - lam) * pq.d * pq.d;
        let lhs = rl.d * rl.d;
        let tolerance = (1.0 - lam) * rp.squared_tolerance()
            + lam * rq.squared_tolerance()
            + lam * (1.0 - lam) * pq.squared_tolerance()
            + rl.squared_tolerance();
        slacks.push(ComparisonSlack { lambda: lam, slack: rhs - lhs, tolerance, distance_squared: lhs });
    }
    Ok(Cat0Report { d_pq: pq.d, d_rp: rp.d, d_rq: rq.d, slacks })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleReport {
    pub d01: f64,
    pub d12: f64,
    pub d02: f64,
    /// `d(φ₀,φ₂) − d(φ₀,φ₁) − d(φ₁,φ₂)`; non-positive up to `tolerance`.
    pub slack: f64,
    pub tolerance: f64,
}

pub fn triangle_inequality_check(
    bg: &Background,
    phi0: &ScalarField,
    phi1: &ScalarField,
    phi2: &ScalarField,
    opts: &DistanceOptions,
) -> Result<TriangleReport> {
    let a = distance(bg, phi0, phi1, opts)?;
    let b = distance(bg, phi1, phi2, opts)?;
    let c = distance_seeded(bg, phi0, phi2, opts, &a)?;
    Ok(TriangleReport {
        d01: a.d,
        d12: b.d,
        d02: c.d,
        slack: c.d - a.d - b.d,
        tolerance: a.tolerance() + b.tolerance() + c.tolerance(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::linalg::HermitianMatrix;
    use crate::space::Pencil;
    use std::f64::consts::TAU;

    fn calibrated(points: usize) -> Background {
        let g = TorusGrid::standard(1, points).unwrap();
        let id = HermitianMatrix::identity(1);
        Background::new(Pencil::constant(g, id, id).unwrap()).unwrap()
    }

    fn quick() -> DistanceOptions {
        DistanceOptions { solver: SolverConfig { time_steps: 9, ..SolverConfig::default() }, ..DistanceOptions::default() }
    }

    #[test]
    fn fit_recovers_exact_models() {
        let x = [0.64, 0.16, 0.04, 0.01];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.3 * v).collect();
        let (c, a, r) = fit_affine(&x, &y);
        assert!((c - 2.5).abs() < 1e-14 && (a + 0.3).abs() < 1e-13 && r < 1e-14);
        let (s, _) = loglog_slope(&[0.1, 0.2, 0.4], &[0.02, 0.08, 0.32]);
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_distance_is_exact() {
        let bg = calibrated(16);
        let g = *bg.grid();
        let c = 0.35;
        let res = distance(&bg, &ScalarField::zeros(g), &ScalarField::constant(g, c), &quick()).unwrap();
        let exact = c * 2f64.powf(0.25) * TAU;
        for r in &res.records {
            assert!((r.length - exact).abs() < 1e-8, "{} vs {exact}", r.length);
        }
        assert!((res.d - exact).abs() < 1e-8);
        let lb = distance_lower_bound(&bg, &ScalarField::zeros(g), &ScalarField::constant(g, c)).unwrap();
        assert!((lb - exact).abs() < 1e-12);
        assert!(res.to_csv().starts_with("epsilon,length,minE,maxE,max|dE/dt|\n"));
    }

    #[test]
    fn zero_distance_and_lower_bound() {
        let bg = calibrated(12);
        let g = *bg.grid();
        let phi = ScalarField::from_fn(g, |x| 0.1 * x[0].sin());
        assert_eq!(distance_lower_bound(&bg, &phi, &phi).unwrap(), 0.0);
        let res = distance(&bg, &phi, &phi, &quick()).unwrap();
        // the ε-path bows by O(ε²), so its length vanishes only in the limit
        assert!(res.d.abs() <= res.tolerance() + 1e-6, "{}", res.to_key_value());
    }

    #[test]
    fn distance_derivative_signs() {
        let bg = calibrated(12);
        let g = *bg.grid();
        let phi0 = ScalarField::zeros(g);
        let psi0 = ScalarField::constant(g, 0.5);
        let problem = EpsilonProblem::with_config(&bg, psi0.clone(), phi0.clone(), 0.05, quick().solver).unwrap();
        let (geo, _) = solver::solve(&problem).unwrap();
        // ψ moving along the geodesic toward φ₀
        let toward = geo.clone();
        let v = distance_derivative(&bg, &phi0, &toward, &geo).unwrap();
        let speed = (0.5f64 * 0.5 * 2f64.sqrt() * TAU * TAU).sqrt();
        assert!((v + speed).abs() < 1e-9, "{v} vs {}", -speed);
        let still = PathField::from_slices(&[psi0.clone(), psi0.clone()]).unwrap();
        assert_eq!(distance_derivative(&bg, &phi0, &still, &geo).unwrap(), 0.0);
        let flat = PathField::from_slices(&[phi0.clone(), phi0.clone()]).unwrap();
        assert!(distance_derivative(&bg, &phi0, &flat, &flat).is_err());
    }

    #[test]
    fn collinear_constants_are_additive() {
        let bg = calibrated(12);
        let g = *bg.grid();
        let k = |c: f64| ScalarField::constant(g, c);
        let t = triangle_inequality_check(&bg, &k(0.0), &k(0.2), &k(0.4), &quick()).unwrap();
        assert!(t.slack.abs() <= t.tolerance, "{t:?}");
        let cat = cat0_comparison(&bg, &k(0.0), &k(0.3), &k(-0.2), &[0.0, 0.25, 0.5, 1.0], &quick()).unwrap();
        for s in &cat.slacks {
            assert!(s.slack.abs() <= s.tolerance, "{s:?}");
        }
        assert_eq!(cat.slacks[0].slack, 0.0);
        assert_eq!(cat.slacks[3].slack, 0.0);
    }
}
