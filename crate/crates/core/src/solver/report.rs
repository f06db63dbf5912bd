use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use super::operator::SpaceTime;
use super::{EpsilonProblem, EpsilonSolution};
use crate::error::Result;
use crate::grid::Stencil;
use crate::pencil::lagrangian_property_check;
use crate::space::PathField;

/// Outcome of the eigenvalue-property check over all interior space-time
/// points of a converged path.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianFlags {
    pub eta: f64,
    pub points: usize,
    pub hypothesis_failures: usize,
    pub property_failures: usize,
}

impl LagrangianFlags {
    pub fn all_hold(&self) -> bool {
        self.hypothesis_failures == 0 && self.property_failures == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Minimum over interior slices of the central second difference in t.
    pub min_phi_tt: f64,
    pub sup_phi_tt: f64,
    pub energies: Vec<f64>,
    pub max_energy_rate: f64,
    /// Largest real second difference in space over all slices.
    pub sup_spatial_hessian: f64,
    pub sup_grad_velocity: f64,
    pub slice_margins: Vec<f64>,
    pub min_margin: f64,
    /// Present on hypercritical backgrounds.
    pub lagrangian: Option<LagrangianFlags>,
}

/// Differences of an energy profile: central inside, one-sided second
/// order at the ends.
pub(crate) fn energy_rate(e: &[f64], dt: f64) -> Vec<f64> {
    let m = e.len();
    if m < 3 {
        return vec![(e[m - 1] - e[0]) / dt; m];
    }
    (0..m)
        .map(|k| {
            if k == 0 {
                (-3.0 * e[0] + 4.0 * e[1] - e[2]) / (2.0 * dt)
            } else if k == m - 1 {
                (3.0 * e[m - 1] - 4.0 * e[m - 2] + e[m - 3]) / (2.0 * dt)
            } else {
                (e[k + 1] - e[k - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

pub fn diagnostics(problem: &EpsilonProblem, path: &PathField) -> Result<Diagnostics> {
    problem.check_path(path)?;
    let bg = problem.bg;
    let grid = *bg.grid();
    let steps = path.time_steps();
    let energies = bg.path_energy_profile(path)?;
    let max_energy_rate = energy_rate(&energies, path.dt()).iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut min_phi_tt = f64::INFINITY;
    let mut sup_phi_tt = 0.0f64;
    for k in 1..steps - 1 {
        for a in path.acceleration(k) {
            min_phi_tt = min_phi_tt.min(a);
            sup_phi_tt = sup_phi_tt.max(a.abs());
        }
    }
    let mut sup_spatial_hessian = 0.0f64;
    let mut sup_grad_velocity = 0.0f64;
    let mut slice_margins = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = path.slice(k);
        let v = path.velocity(k);
        for idx in 0..grid.len() {
            sup_spatial_hessian = sup_spatial_hessian.max(grid.real_hessian_sup_at(s, idx));
            sup_grad_velocity = sup_grad_velocity.max(grid.real_gradient_norm_at(&v, idx));
        }
        slice_margins.push(bg.geometry_raw(s).membership().margin);
    }
    let min_margin = slice_margins.iter().cloned().fold(f64::INFINITY, f64::min);

    let lagrangian = if bg.is_hypercritical() {
        let n = bg.complex_dim() as f64;
        let eta = bg.theta_hat() - (n - 1.0) * FRAC_PI_2 - 1e-6;
        let stencil = Stencil::new(grid);
        let st = SpaceTime { bg, stencil: &stencil, epsilon: problem.epsilon, steps };
        let mut flags = LagrangianFlags { eta, points: 0, hypothesis_failures: 0, property_failures: 0 };
        for k in 1..steps - 1 {
            for idx in 0..grid.len() {
                let eig = st.augmented(path.data(), k, idx).eigh();
                let rep = lagrangian_property_check(eig.values(), eta);
                flags.points += 1;
                if !rep.hypothesis_met {
                    flags.hypothesis_failures += 1;
                } else if !rep.all_hold() {
                    flags.property_failures += 1;
                }
            }
        }
        Some(flags)
    } else {
        None
    };

    Ok(Diagnostics {
        min_phi_tt,
        sup_phi_tt,
        energies,
        max_energy_rate,
        sup_spatial_hessian,
        sup_grad_velocity,
        slice_margins,
        min_margin,
        lagrangian,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageSummary {
    pub epsilon: f64,
    pub newton_steps: usize,
    pub final_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub epsilon: f64,
    pub time_steps: usize,
    pub newton_tol: f64,
    /// Sup-norm residual after each Newton step at the target ε (entry 0 is
    /// the initial guess).
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub newton_steps: usize,
    pub linear_iterations: usize,
    pub stages: Vec<StageSummary>,
    pub diagnostics: Diagnostics,
}

impl SolverReport {
    pub(crate) fn new(
        problem: &EpsilonProblem,
        sol: &EpsilonSolution,
        stages: Vec<StageSummary>,
        diagnostics: Diagnostics,
    ) -> Self {
        SolverReport {
            epsilon: sol.epsilon,
            time_steps: problem.config.time_steps,
            newton_tol: problem.config.newton_tol,
            final_residual: *sol.residual_history.last().unwrap(),
            newton_steps: sol.residual_history.len() - 1,
            residual_history: sol.residual_history.clone(),
            linear_iterations: sol.linear_iterations,
            stages,
            diagnostics,
        }
    }

    /// Flat `key = value` record.
    pub fn to_key_value(&self) -> String {
        let d = &self.diagnostics;
        let mut s = String::new();
        let _ = writeln!(s, "epsilon = {:e}", self.epsilon);
        let _ = writeln!(s, "timeSteps = {}", self.time_steps);
        let _ = writeln!(s, "newtonTol = {:e}", self.newton_tol);
        let _ = writeln!(s, "finalResidual = {:e}", self.final_residual);
        let _ = writeln!(s, "newtonSteps = {}", self.newton_steps);
        let _ = writeln!(s, "linearIterations = {}", self.linear_iterations);
        let stages: Vec<String> =
            self.stages.iter().map(|st| format!("{:e}:{}:{:e}", st.epsilon, st.newton_steps, st.final_residual)).collect();
        let _ = writeln!(s, "continuation = {}", stages.join(" "));
        let _ = writeln!(s, "minPhiTT = {:e}", d.min_phi_tt);
        let _ = writeln!(s, "supPhiTT = {:e}", d.sup_phi_tt);
        let _ = writeln!(s, "maxEnergyRate = {:e}", d.max_energy_rate);
        let _ = writeln!(s, "supSpatialHessian = {:e}", d.sup_spatial_hessian);
        let _ = writeln!(s, "supGradVelocity = {:e}", d.sup_grad_velocity);
        let _ = writeln!(s, "minMargin = {:e}", d.min_margin);
        let margins: Vec<String> = d.slice_margins.iter().map(|m| format!("{m:e}")).collect();
        let _ = writeln!(s, "sliceMargins = {}", margins.join(" "));
        let energies: Vec<String> = d.energies.iter().map(|m| format!("{m:e}")).collect();
        let _ = writeln!(s, "energies = {}", energies.join(" "));
        match &d.lagrangian {
            Some(f) => {
                let _ = writeln!(s, "eigenPropertyEta = {:e}", f.eta);
                let _ = writeln!(s, "eigenPropertyPoints = {}", f.points);
                let _ = writeln!(s, "eigenPropertyHypothesisFailures = {}", f.hypothesis_failures);
                let _ = writeln!(s, "eigenPropertyFailures = {}", f.property_failures);
                let _ = writeln!(s, "eigenPropertiesHold = {}", f.all_hold());
            }
            None => {
                let _ = writeln!(s, "eigenPropertiesHold = not-hypercritical");
            }
        }
        s
    }

    /// `step,residual` rows of the final Newton run.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,residual\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(s, "{i},{r:e}");
        }
        s
    }
}
