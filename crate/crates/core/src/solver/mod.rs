//! The ε-geodesic boundary value problem.
//!
//! A path `φ(x, s)`, `s ∈ [0, 1]`, is an ε-geodesic when at every interior
//! space-time point the (n+1)×(n+1) augmented matrix
//!
//! ```text
//! [ L⁻¹(α + i∂∂̄φ)L⁻*      L⁻¹ b ]      b_j = e^s ∂_j φ̇ / (2ε)
//! [ (L⁻¹ b)^*             c     ]      c   = e^{2s} φ̈ / (4ε²)
//! ```
//!
//! has phase `Σ arctan μ_i = θ̂`. Here `ω = LL^*`. Newton's method runs on
//! the interior slices with a right-preconditioned GMRES inner solver and
//! continuation from large ε down to the target.

mod gmres;
mod operator;
mod precond;
mod report;

pub use report::{Diagnostics, LagrangianFlags, SolverReport, StageSummary};

use crate::error::{Error, Result};
use crate::grid::{same_grid, ScalarField, Stencil};
use crate::space::{Background, PathField};

use operator::{Assembly, SpaceTime};
use precond::Preconditioner;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub time_steps: usize,
    /// Target sup-norm of the residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    /// Decreasing ε values to pass through before the target. `None` gives
    /// `1, 2^{-1/2}, 1/2, …` down to the target.
    pub schedule: Option<Vec<f64>>,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// How many times a failed continuation step may be split.
    pub max_splits: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_steps: 33,
            newton_tol: 1e-9,
            max_newton: 50,
            damping: 0.5,
            schedule: None,
            gmres_restart: 60,
            gmres_max_iter: 600,
            max_splits: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpsilonProblem<'a> {
    pub bg: &'a Background,
    pub phi0: ScalarField,
    pub phi1: ScalarField,
    pub epsilon: f64,
    pub config: SolverConfig,
}

impl<'a> EpsilonProblem<'a> {
    pub fn new(bg: &'a Background, phi0: ScalarField, phi1: ScalarField, epsilon: f64) -> Result<Self> {
        Self::with_config(bg, phi0, phi1, epsilon, SolverConfig::default())
    }

    pub fn with_config(
        bg: &'a Background,
        phi0: ScalarField,
        phi1: ScalarField,
        epsilon: f64,
        config: SolverConfig,
    ) -> Result<Self> {
        same_grid(bg.grid(), phi0.grid())?;
        same_grid(bg.grid(), phi1.grid())?;
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if config.time_steps < 3 {
            return Err(Error::Domain(format!("need at least 3 time steps, got {}", config.time_steps)));
        }
        if !(config.damping > 0.0 && config.damping < 1.0) {
            return Err(Error::Domain(format!("damping must lie in (0, 1), got {}", config.damping)));
        }
        if let Some(s) = &config.schedule {
            check_decreasing(s)?;
        }
        bg.geometry(&phi0)?.require_member("phi0")?;
        bg.geometry(&phi1)?.require_member("phi1")?;
        Ok(EpsilonProblem { bg, phi0, phi1, epsilon, config })
    }

    fn check_path(&self, path: &PathField) -> Result<()> {
        same_grid(self.bg.grid(), path.grid())?;
        if path.time_steps() != self.config.time_steps {
            return Err(Error::GridMismatch(format!(
                "path has {} time steps, problem expects {}",
                path.time_steps(),
                self.config.time_steps
            )));
        }
        Ok(())
    }

    /// Initial guess `(1 − t)φ₀ + tφ₁`.
    pub fn linear_path(&self) -> PathField {
        PathField::linear(&self.phi0, &self.phi1, self.config.time_steps).expect("validated endpoints")
    }

    /// The continuation ladder ending at `epsilon`.
    pub fn ladder(&self) -> Vec<f64> {
        let mut out: Vec<f64> = match &self.config.schedule {
            Some(s) => s.iter().copied().filter(|&e| e > self.epsilon).collect(),
            None => (0..)
                .map(|k| 2f64.powf(-0.5 * k as f64))
                .take_while(|&e| e > self.epsilon * (1.0 + 1e-12))
                .collect(),
        };
        out.push(self.epsilon);
        out
    }
}

fn check_decreasing(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Domain("empty epsilon schedule".into()));
    }
    if s.iter().any(|e| !(e.is_finite() && *e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(format!("epsilon schedule must be positive and strictly decreasing: {s:?}")));
    }
    Ok(())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn space_time<'b>(problem: &EpsilonProblem<'b>, stencil: &'b Stencil, epsilon: f64) -> SpaceTime<'b> {
    SpaceTime { bg: problem.bg, stencil, epsilon, steps: problem.config.time_steps }
}

fn embed(path: &PathField, interior: &[f64]) -> PathField {
    let p = path.grid().len();
    let mut out = path.data().to_vec();
    let steps = path.time_steps();
    for v in &mut out[..p] {
        *v = 0.0;
    }
    for v in &mut out[(steps - 1) * p..] {
        *v = 0.0;
    }
    out[p..(steps - 1) * p].copy_from_slice(interior);
    PathField::from_data(*path.grid(), steps, out).expect("finite values")
}

/// Residual `Σ arctan μ − θ̂` on the space-time grid; boundary slices are 0.
pub fn residual(problem: &EpsilonProblem, path: &PathField) -> Result<PathField> {
    problem.check_path(path)?;
    let stencil = Stencil::new(*problem.bg.grid());
    let st = space_time(problem, &stencil, problem.epsilon);
    let a = st.assemble(path, false)?;
    Ok(embed(path, &a.residual))
}

/// Jacobian of [`residual`] at `path` applied to `direction`. The boundary
/// slices of `direction` are ignored (Dirichlet directions).
pub fn linearization_apply(problem: &EpsilonProblem, path: &PathField, direction: &PathField) -> Result<PathField> {
    problem.check_path(path)?;
    problem.check_path(direction)?;
    let stencil = Stencil::new(*problem.bg.grid());
    let st = space_time(problem, &stencil, problem.epsilon);
    let a = st.assemble(path, true)?;
    let p = stencil.grid().len();
    let steps = problem.config.time_steps;
    let d = &direction.data()[p..(steps - 1) * p];
    let mut out = vec![0.0; d.len()];
    st.apply(&a.coeffs, d, &mut out);
    Ok(embed(path, &out))
}

struct NewtonOutcome {
    history: Vec<f64>,
    linear_iterations: usize,
}

fn newton(st: &SpaceTime, path: &mut PathField, cfg: &SolverConfig) -> std::result::Result<NewtonOutcome, (String, Vec<f64>)> {
    let p = st.points();
    let steps = st.steps;
    let lo = p;
    let hi = (steps - 1) * p;
    let fail = |msg: String, h: &Vec<f64>| Err((msg, h.clone()));
    let mut asm: Assembly = match st.assemble(path, true) {
        Ok(a) => a,
        Err(e) => return fail(e.to_string(), &vec![]),
    };
    let mut rn = sup(&asm.residual);
    let mut history = vec![rn];
    let mut linear_iterations = 0;
    let mut delta = vec![0.0; st.unknowns()];
    for _ in 0..cfg.max_newton {
        if rn <= cfg.newton_tol {
            return Ok(NewtonOutcome { history, linear_iterations });
        }
        let rhs: Vec<f64> = asm.residual.iter().map(|r| -r).collect();
        let pc = Preconditioner::new(*st.stencil.grid(), steps, &asm.coeffs);
        let coeffs = &asm.coeffs;
        let forcing = (1e-2f64).min(rn).max(1e-10);
        let out = gmres::gmres(
            |x, y| st.apply(coeffs, x, y),
            |r, z| pc.apply(r, z),
            &rhs,
            &mut delta,
            forcing,
            cfg.gmres_restart,
            cfg.gmres_max_iter,
        );
        linear_iterations += out.iterations;
        if !out.relative_residual.is_finite() {
            return fail("linear solve produced non-finite values".into(), &history);
        }
        let base = path.data()[lo..hi].to_vec();
        let mut tau = 1.0;
        loop {
            {
                let data = path.data_mut();
                for (i, v) in data[lo..hi].iter_mut().enumerate() {
                    *v = base[i] + tau * delta[i];
                }
            }
            let trial = st.assemble(path, true);
            if let Ok(a) = trial {
                let tn = sup(&a.residual);
                if tn.is_finite() && tn < (1.0 - 1e-4 * tau) * rn {
                    asm = a;
                    rn = tn;
                    break;
                }
            }
            tau *= cfg.damping;
            if tau < 1e-6 {
                path.data_mut()[lo..hi].copy_from_slice(&base);
                return fail(
                    format!("line search stalled at residual {rn:.3e} (linear solve reached {:.1e})", out.relative_residual),
                    &history,
                );
            }
        }
        history.push(rn);
    }
    if rn <= cfg.newton_tol {
        Ok(NewtonOutcome { history, linear_iterations })
    } else {
        fail(format!("no convergence after {} Newton steps", cfg.max_newton), &history)
    }
}

/// Solved path at one ε together with its Newton record.
#[derive(Clone, Debug)]
pub struct EpsilonSolution {
    pub epsilon: f64,
    pub path: PathField,
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
}

/// Runs continuation from the linear path through `targets` (strictly
/// decreasing) and returns the solution at every target. Failed steps are
/// split geometrically up to `max_splits` times.
pub fn solve_ladder(problem: &EpsilonProblem, targets: &[f64]) -> Result<Vec<EpsilonSolution>> {
    continuation(problem, targets, None)
}

/// Like [`solve_ladder`], but first tries a related solved ladder (same
/// grid, time steps and ε values, different boundary data) shifted by the
/// change in endpoints: `seed + (1 − t)(φ₀ − seed₀) + t(φ₁ − seed₁)`.
/// Falls back to plain continuation where that guess fails.
pub fn solve_ladder_seeded(
    problem: &EpsilonProblem,
    targets: &[f64],
    seed: &[EpsilonSolution],
) -> Result<Vec<EpsilonSolution>> {
    for s in seed {
        problem.check_path(&s.path)?;
    }
    continuation(problem, targets, Some(seed))
}

fn shifted_seed(problem: &EpsilonProblem, seed: &PathField) -> PathField {
    let steps = seed.time_steps();
    let p = seed.grid().len();
    let (s0, s1) = (seed.slice(0), seed.slice(steps - 1));
    let (a, b) = (problem.phi0.values(), problem.phi1.values());
    let mut data = seed.data().to_vec();
    for k in 0..steps {
        let t = seed.time(k);
        let row = &mut data[k * p..(k + 1) * p];
        if k == 0 {
            row.copy_from_slice(a);
        } else if k == steps - 1 {
            row.copy_from_slice(b);
        } else {
            for i in 0..p {
                row[i] += (1.0 - t) * (a[i] - s0[i]) + t * (b[i] - s1[i]);
            }
        }
    }
    PathField::from_data(*seed.grid(), steps, data).expect("finite shifted seed")
}

fn check_branch(problem: &EpsilonProblem, path: &PathField, eps: f64) -> Result<()> {
    for k in 0..path.time_steps() {
        let m = problem.bg.geometry_raw(path.slice(k)).membership();
        if !m.member {
            return Err(Error::NotMember(format!(
                "left the branch: slice {k} of the converged path at epsilon {eps} has margin {:.3e}",
                m.margin
            )));
        }
    }
    Ok(())
}

fn continuation(problem: &EpsilonProblem, targets: &[f64], seed: Option<&[EpsilonSolution]>) -> Result<Vec<EpsilonSolution>> {
    check_decreasing(targets)?;
    let stencil = Stencil::new(*problem.bg.grid());
    let cfg = &problem.config;
    let mut solved: Vec<EpsilonSolution> = Vec::new();
    let mut out = Vec::new();
    let mut pending: Vec<(f64, bool, usize)> = targets.iter().rev().map(|&e| (e, true, 0)).collect();
    while let Some((eps, wanted, depth)) = pending.pop() {
        let st = space_time(problem, &stencil, eps);
        let mut guesses = Vec::new();
        if let Some(sd) = seed.and_then(|sd| sd.iter().find(|x| (x.epsilon - eps).abs() <= 1e-12 * eps)) {
            guesses.push(shifted_seed(problem, &sd.path));
        }
        match solved.len() {
            0 => guesses.push(problem.linear_path()),
            1 => guesses.push(solved[0].path.clone()),
            _ => {
                let (a, b) = (&solved[solved.len() - 2], &solved[solved.len() - 1]);
                let f = (eps * eps - b.epsilon * b.epsilon) / (b.epsilon * b.epsilon - a.epsilon * a.epsilon);
                let data: Vec<f64> =
                    b.path.data().iter().zip(a.path.data()).map(|(pb, pa)| pb + f * (pb - pa)).collect();
                guesses.push(PathField::from_data(*b.path.grid(), b.path.time_steps(), data)?);
                guesses.push(b.path.clone());
            }
        }
        let mut last_err = None;
        let mut done = None;
        for mut g in guesses {
            match newton(&st, &mut g, cfg) {
                Ok(o) => {
                    done = Some(EpsilonSolution {
                        epsilon: eps,
                        path: g,
                        residual_history: o.history,
                        linear_iterations: o.linear_iterations,
                    });
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match done {
            Some(sol) => {
                check_branch(problem, &sol.path, eps)?;
                if wanted {
                    out.push(sol.clone());
                }
                solved.push(sol);
            }
            None => {
                let (msg, trace) = last_err.expect("at least one guess was tried");
                let prev = solved.last().map(|s| s.epsilon);
                match prev {
                    Some(pe) if depth < cfg.max_splits => {
                        pending.push((eps, wanted, depth + 1));
                        pending.push(((pe * eps).sqrt(), false, depth + 1));
                    }
                    _ => {
                        let trace: Vec<String> = trace.iter().map(|r| format!("{r:.3e}")).collect();
                        return Err(Error::Solver(format!(
                            "Newton stagnation at epsilon {eps}: {msg}; residual trace [{}]",
                            trace.join(", ")
                        )));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Solves at `problem.epsilon` by continuation and reports diagnostics.
pub fn solve(problem: &EpsilonProblem) -> Result<(PathField, SolverReport)> {
    let ladder = problem.ladder();
    let sols = solve_ladder(problem, &ladder)?;
    let last = sols.last().expect("ladder ends at the target").clone();
    let stages = sols
        .iter()
        .map(|s| StageSummary {
            epsilon: s.epsilon,
            newton_steps: s.residual_history.len() - 1,
            final_residual: *s.residual_history.last().unwrap(),
        })
        .collect();
    let diag = diagnostics(problem, &last.path)?;
    let report = SolverReport::new(problem, &last, stages, diag);
    Ok((last.path, report))
}

/// Newton from a given initial path at the problem's ε, no continuation.
pub fn solve_from(problem: &EpsilonProblem, initial: PathField) -> Result<(PathField, SolverReport)> {
    problem.check_path(&initial)?;
    if initial.slice(0) != problem.phi0.values() || initial.slice(initial.time_steps() - 1) != problem.phi1.values() {
        return Err(Error::Domain("initial path does not carry the problem's boundary data".into()));
    }
    let stencil = Stencil::new(*problem.bg.grid());
    let st = space_time(problem, &stencil, problem.epsilon);
    let mut path = initial;
    let o = newton(&st, &mut path, &problem.config).map_err(|(msg, trace)| {
        Error::Solver(format!("Newton stagnation at epsilon {}: {msg}; residual trace {trace:?}", problem.epsilon))
    })?;
    check_branch(problem, &path, problem.epsilon)?;
    let sol = EpsilonSolution {
        epsilon: problem.epsilon,
        path: path.clone(),
        residual_history: o.history,
        linear_iterations: o.linear_iterations,
    };
    let stage = StageSummary {
        epsilon: sol.epsilon,
        newton_steps: sol.residual_history.len() - 1,
        final_residual: *sol.residual_history.last().unwrap(),
    };
    let diag = diagnostics(problem, &path)?;
    Ok((path, SolverReport::new(problem, &sol, vec![stage], diag)))
}

pub use report::diagnostics;
pub(crate) use report::energy_rate;

#[cfg(test)]
mod tests;
