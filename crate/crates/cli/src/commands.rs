//! One function per subcommand. Each reads a validated [`RunConfig`] and
//! writes its reports into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dhym_core::curvature::{curvature_csv, sectional_curvature, CurvatureRow};
use dhym_core::geometry::{self, DistanceOptions};
use dhym_core::io::{decode_path, encode_field, encode_path};
use dhym_core::sampling::trig_field;
use dhym_core::solver::{self, EpsilonProblem};
use dhym_core::{Background, PathField, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_epsilon_list, RunConfig};
use crate::{ensure_dir, write_file, CliError};

pub const DEFAULT_OUT: &str = "dhym-out";

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epsilon: Option<String>,
}

/// Loads the config, applies overrides and creates the output directory.
pub fn prepare(config: &Path, ov: &Overrides) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(e) = &ov.epsilon {
        cfg.schedule = parse_epsilon_list(e)?;
    }
    let out = ov.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    ensure_dir(&out)?;
    Ok((cfg, out))
}

fn distance_options(cfg: &RunConfig) -> DistanceOptions {
    DistanceOptions {
        schedule: cfg.schedule.clone(),
        solver: cfg.solver.clone(),
        fit_threshold: cfg.fit_threshold,
        full_diagnostics: false,
    }
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(s, "{key} = {value}");
}

pub fn phase(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let phi = cfg.endpoint_or_zero("phi", *bg.grid())?;
    let lifted = bg.pencil().lift_phase(&phi)?;
    let vol = bg.pencil().complex_volume();
    let mut s = String::new();
    kv(&mut s, "n", bg.complex_dim());
    kv(&mut s, "pointsPerAxis", bg.grid().points_per_axis());
    kv(&mut s, "complexVolumeRe", format!("{:e}", vol.re));
    kv(&mut s, "complexVolumeIm", format!("{:e}", vol.im));
    kv(&mut s, "topologicalAngle", format!("{:e}", bg.pencil().topological_angle()?));
    kv(&mut s, "thetaHat", format!("{:e}", lifted));
    kv(&mut s, "thetaHatOverPi", format!("{:e}", lifted / std::f64::consts::PI));
    kv(&mut s, "hypercritical", bg.is_hypercritical());
    write_file(out, "phase.txt", s)
}

pub fn member(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let grid = *bg.grid();
    let phi = cfg.endpoint_or_zero("phi", grid)?;
    let geo = bg.geometry(&phi)?;
    let m = geo.membership();
    let margins: Vec<f64> =
        (0..grid.len()).map(|i| std::f64::consts::FRAC_PI_2 - (geo.theta(i) - bg.theta_hat()).abs()).collect();
    let map = ScalarField::from_values(grid, margins)?;
    let x = grid.coords(m.worst_index);
    let coords: Vec<String> = x[..grid.real_axes()].iter().map(|c| format!("{c:e}")).collect();
    let mut s = String::new();
    kv(&mut s, "member", m.member);
    kv(&mut s, "margin", format!("{:e}", m.margin));
    kv(&mut s, "minRealPart", format!("{:e}", m.min_real_part));
    kv(&mut s, "worstIndex", m.worst_index);
    kv(&mut s, "worstCoords", coords.join(" "));
    write_file(out, "member.txt", s)?;
    write_file(out, "margin.fld", encode_field(&map))
}

pub fn geodesic(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let grid = *bg.grid();
    let (phi0, phi1) = (cfg.endpoint("phi0", grid)?, cfg.endpoint("phi1", grid)?);
    let eps = *cfg.schedule.last().expect("validated schedule");
    let mut sc = cfg.solver.clone();
    sc.schedule = Some(cfg.schedule.clone());
    let problem = EpsilonProblem::with_config(&bg, phi0, phi1, eps, sc)?;
    let (path, report) = solver::solve(&problem)?;
    write_file(out, "geodesic.tph", encode_path(&path))?;
    write_file(out, "solver_report.txt", report.to_key_value())?;
    write_file(out, "solver_residuals.csv", report.to_csv())
}

pub fn distance(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let grid = *bg.grid();
    let (phi0, phi1) = (cfg.endpoint("phi0", grid)?, cfg.endpoint("phi1", grid)?);
    let r = geometry::distance(&bg, &phi0, &phi1, &distance_options(cfg))?;
    let lb = geometry::distance_lower_bound(&bg, &phi0, &phi1)?;
    let mut s = r.to_key_value();
    kv(&mut s, "lowerBound", format!("{lb:e}"));
    write_file(out, "distance.txt", s)?;
    write_file(out, "distance.csv", r.to_csv())?;
    write_file(out, "geodesic.tph", encode_path(&r.smallest().path))
}

/// Random 2-planes at random base points; every fifth draw is a flat plane
/// `η = aψ + b`.
pub fn curvature_rows(bg: &Background, cfg: &RunConfig) -> Result<Vec<CurvatureRow>, CliError> {
    let grid = *bg.grid();
    let c = &cfg.curvature;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(c.draws);
    for draw in 0..c.draws {
        let phi = trig_field(grid, &mut rng, 3, c.max_freq, c.base_amplitude);
        let psi = trig_field(grid, &mut rng, 3, c.max_freq, c.direction_amplitude);
        let flat = draw % 5 == 4;
        let eta = if flat {
            psi.map(|v| 0.7 * v - 0.4)
        } else {
            trig_field(grid, &mut rng, 3, c.max_freq, c.direction_amplitude)
        };
        let k = sectional_curvature(bg, &phi, &psi, &eta)?;
        rows.push(CurvatureRow { draw, k_route_a: k.k_route_a, k_route_b: k.k_route_b, denominator: k.denominator, flat });
    }
    Ok(rows)
}

pub fn curvature(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let rows = curvature_rows(&bg, cfg)?;
    let max_k = rows.iter().filter(|r| !r.flat).map(|r| r.k_route_b).fold(f64::NEG_INFINITY, f64::max);
    let max_flat = rows.iter().filter(|r| r.flat).map(|r| r.k_route_b.abs()).fold(0.0, f64::max);
    let mut s = String::new();
    kv(&mut s, "draws", rows.len());
    kv(&mut s, "maxK", format!("{max_k:e}"));
    kv(&mut s, "maxFlatAbsK", format!("{max_flat:e}"));
    write_file(out, "curvature.txt", s)?;
    write_file(out, "curvature.csv", curvature_csv(&rows))
}

pub fn cat0(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let grid = *bg.grid();
    let (p, q, r) = (cfg.endpoint("p", grid)?, cfg.endpoint("q", grid)?, cfg.endpoint("r", grid)?);
    let rep = geometry::cat0_comparison(&bg, &p, &q, &r, &cfg.cat0_lambdas, &distance_options(cfg))?;
    let min_margin = rep.slacks.iter().map(|c| c.slack + c.tolerance).fold(f64::INFINITY, f64::min);
    let mut s = String::new();
    kv(&mut s, "dPQ", format!("{:e}", rep.d_pq));
    kv(&mut s, "dRP", format!("{:e}", rep.d_rp));
    kv(&mut s, "dRQ", format!("{:e}", rep.d_rq));
    kv(&mut s, "holds", min_margin >= 0.0);
    write_file(out, "cat0.txt", s)?;
    write_file(out, "cat0.csv", rep.to_csv())
}

fn jfun_csv(path: &PathField, j: &[f64]) -> String {
    let mut s = String::from("t,J\n");
    for (k, v) in j.iter().enumerate() {
        let _ = writeln!(s, "{:e},{:e}", path.time(k), v);
    }
    s
}

pub fn jfun(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bg = cfg.background()?;
    let grid = *bg.grid();
    if let Some(bytes) = &cfg.jfun_path {
        let path = decode_path(bytes)?;
        let j = bg.j_functional_along(&path)?;
        let mut s = String::new();
        kv(&mut s, "timeSteps", path.time_steps());
        kv(&mut s, "finalJ", format!("{:e}", j.last().unwrap()));
        write_file(out, "jfun.txt", s)?;
        return write_file(out, "jfun.csv", jfun_csv(&path, &j));
    }
    // loop closure: 𝒥 is exact, so it returns to zero around a loop up to
    // the O(dt²) error of the discretization
    let center = cfg.endpoint_or_zero("phi", grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = match cfg.endpoints.contains_key("loop_a") {
        true => cfg.endpoint("loop_a", grid)?,
        false => trig_field(grid, &mut rng, 3, 2, 0.1),
    };
    let b = match cfg.endpoints.contains_key("loop_b") {
        true => cfg.endpoint("loop_b", grid)?,
        false => trig_field(grid, &mut rng, 3, 2, 0.1),
    };
    let m = cfg.jfun_loop_steps;
    let closure = |steps: usize| -> Result<(PathField, Vec<f64>), CliError> {
        let path = PathField::closed_loop(&center, &a, &b, steps)?;
        let j = bg.j_functional_along(&path)?;
        Ok((path, j))
    };
    let (path, j) = closure(m)?;
    let (_, j2) = closure(2 * m - 1)?;
    let scale = j.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let (c1, c2) = (j[m - 1].abs(), j2[2 * m - 2].abs());
    let mut s = String::new();
    kv(&mut s, "loopSteps", m);
    kv(&mut s, "maxAbsJ", format!("{scale:e}"));
    kv(&mut s, "closureDefect", format!("{c1:e}"));
    kv(&mut s, "closureDefectHalfStep", format!("{c2:e}"));
    kv(&mut s, "refinementRatio", format!("{:e}", if c2 > 0.0 { c1 / c2 } else { f64::INFINITY }));
    write_file(out, "jfun.txt", s)?;
    write_file(out, "jfun.csv", jfun_csv(&path, &j))
}

pub fn suite(config: Option<&Path>, ov: &Overrides) -> Result<(), CliError> {
    let (seed, cfg_out) = match config {
        Some(p) => {
            let c = RunConfig::load(p)?;
            (c.seed, c.out)
        }
        None => (crate::suite::DEFAULT_SEED, None),
    };
    let seed = ov.seed.unwrap_or(seed);
    let out = ov.out.clone().or(cfg_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    ensure_dir(&out)?;
    let outcome = crate::suite::run(seed, &out, &mut std::io::stdout())?;
    match outcome.failures() {
        0 => Ok(()),
        n => Err(CliError::Failed(n)),
    }
}
