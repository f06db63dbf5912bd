//! Run configuration: a TOML file with `[section]` headers and `key = value`
//! lines.
//!
//! ```toml
//! [background]
//! n = 1
//! points = 64
//! omega = [1.0]          # diagonal of ω (default all ones)
//! alpha = [1.0]          # diagonal of the constant part of α
//! alpha_potential = "0.1*sin(x1)"   # optional: α = α₀ + i∂∂̄g
//!
//! [endpoints]
//! phi0 = "0"
//! phi1 = "0.2*sin(x1)*cos(y1) + 0.3"
//! psi = { file = "psi.fld" }
//!
//! [schedule]
//! epsilon = [0.8, 0.4, 0.2, 0.1, 0.05]
//!
//! [solver]
//! time_steps = 33
//!
//! [run]
//! seed = 7
//! ```
//!
//! Relative file paths are resolved against the directory of the config
//! file. Field files are read (and decoded) at load time, so a config that
//! loads is never missing data later.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dhym_core::formula::Formula;
use dhym_core::geometry::DEFAULT_SCHEDULE;
use dhym_core::solver::SolverConfig;
use dhym_core::{Background, HermitianMatrix, Pencil, ScalarField, TorusGrid};
use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    background: RawBackground,
    #[serde(default)]
    endpoints: BTreeMap<String, RawEndpoint>,
    schedule: Option<RawSchedule>,
    solver: Option<RawSolver>,
    run: Option<RawRun>,
    curvature: Option<RawCurvature>,
    cat0: Option<RawCat0>,
    jfun: Option<RawJfun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackground {
    n: usize,
    points: usize,
    period: Option<f64>,
    omega: Option<Vec<f64>>,
    alpha: Vec<f64>,
    alpha_potential: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEndpoint {
    Formula(String),
    File {
        file: String,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    epsilon: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    time_steps: Option<usize>,
    newton_tol: Option<f64>,
    max_newton: Option<usize>,
    damping: Option<f64>,
    gmres_restart: Option<usize>,
    gmres_max_iter: Option<usize>,
    max_splits: Option<usize>,
    fit_threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    out: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurvature {
    draws: Option<usize>,
    base_amplitude: Option<f64>,
    direction_amplitude: Option<f64>,
    max_freq: Option<i32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCat0 {
    lambdas: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJfun {
    path: Option<String>,
    loop_steps: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BackgroundSpec {
    pub n: usize,
    pub points: usize,
    pub period: f64,
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_potential: Option<Formula>,
}

#[derive(Clone, Debug)]
pub enum Endpoint {
    Formula(Formula),
    Field(ScalarField),
}

#[derive(Clone, Debug)]
pub struct CurvatureSpec {
    pub draws: usize,
    pub base_amplitude: f64,
    pub direction_amplitude: f64,
    pub max_freq: i32,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub background: BackgroundSpec,
    pub endpoints: BTreeMap<String, Endpoint>,
    pub schedule: Vec<f64>,
    pub solver: SolverConfig,
    pub fit_threshold: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub curvature: CurvatureSpec,
    pub cat0_lambdas: Vec<f64>,
    /// Encoded path for `jfun`; without it `jfun` runs a loop-closure test.
    pub jfun_path: Option<Vec<u8>>,
    pub jfun_loop_steps: usize,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn check_schedule(s: &[f64]) -> Result<(), CliError> {
    if s.is_empty() {
        return Err(bad("epsilon schedule is empty"));
    }
    if s.iter().any(|e| !(e.is_finite() && *e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
        return Err(bad(format!("epsilon schedule must be positive and strictly decreasing: {s:?}")));
    }
    Ok(())
}

/// Parses an `--epsilon` override such as `0.4,0.2,0.1`.
pub fn parse_epsilon_list(s: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad epsilon value '{t}'"))))
        .collect::<Result<_, _>>()?;
    check_schedule(&v)?;
    Ok(v)
}

fn read_file(base: Option<&Path>, name: &str) -> Result<Vec<u8>, CliError> {
    let p = match base {
        Some(b) => b.join(name),
        None => PathBuf::from(name),
    };
    std::fs::read(&p).map_err(|e| bad(format!("cannot read {}: {e}", p.display())))
}

impl RunConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Parses config text; relative file names are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let b = raw.background;
        if !(1..=2).contains(&b.n) {
            return Err(bad(format!("background.n must be 1 or 2, got {}", b.n)));
        }
        if b.points < 4 || b.points > 1024 {
            return Err(bad(format!("background.points must lie in 4..=1024, got {}", b.points)));
        }
        if b.n == 2 && b.points > 64 {
            return Err(bad(format!("background.points must be at most 64 when n = 2, got {}", b.points)));
        }
        let period = positive("background.period", b.period.unwrap_or(std::f64::consts::TAU))?;
        let omega = b.omega.unwrap_or_else(|| vec![1.0; b.n]);
        if omega.len() != b.n || b.alpha.len() != b.n {
            return Err(bad(format!("background.omega and background.alpha need {} entries", b.n)));
        }
        for w in &omega {
            positive("background.omega entry", *w)?;
        }
        if b.alpha.iter().any(|a| !a.is_finite()) {
            return Err(bad("background.alpha entries must be finite"));
        }
        let alpha_potential = b
            .alpha_potential
            .map(|s| Formula::parse(&s).map_err(|e| bad(format!("background.alpha_potential: {e}"))))
            .transpose()?;
        let background = BackgroundSpec { n: b.n, points: b.points, period, omega, alpha: b.alpha, alpha_potential };
        if let Some(f) = &background.alpha_potential {
            check_formula_dim(f, b.n, "background.alpha_potential")?;
        }

        let mut endpoints = BTreeMap::new();
        for (name, e) in raw.endpoints {
            let ep = match e {
                RawEndpoint::Formula(s) => {
                    let f = Formula::parse(&s).map_err(|err| bad(format!("endpoints.{name}: {err}")))?;
                    check_formula_dim(&f, b.n, &format!("endpoints.{name}"))?;
                    Endpoint::Formula(f)
                }
                RawEndpoint::File { file } => {
                    let bytes = read_file(base, &file)?;
                    let field = dhym_core::io::decode_field(&bytes)
                        .map_err(|err| bad(format!("endpoints.{name} ({file}): {err}")))?;
                    Endpoint::Field(field)
                }
            };
            endpoints.insert(name, ep);
        }

        let schedule = match raw.schedule {
            Some(s) => s.epsilon,
            None => DEFAULT_SCHEDULE.to_vec(),
        };
        check_schedule(&schedule)?;

        let mut solver = SolverConfig::default();
        let mut fit_threshold = 1e-2;
        if let Some(s) = raw.solver {
            if let Some(v) = s.time_steps {
                if !(3..=4097).contains(&v) {
                    return Err(bad(format!("solver.time_steps must lie in 3..=4097, got {v}")));
                }
                solver.time_steps = v;
            }
            if let Some(v) = s.newton_tol {
                solver.newton_tol = positive("solver.newton_tol", v)?;
            }
            if let Some(v) = s.max_newton {
                solver.max_newton = v;
            }
            if let Some(v) = s.damping {
                if !(v > 0.0 && v < 1.0) {
                    return Err(bad(format!("solver.damping must lie in (0, 1), got {v}")));
                }
                solver.damping = v;
            }
            if let Some(v) = s.gmres_restart {
                solver.gmres_restart = v.max(1);
            }
            if let Some(v) = s.gmres_max_iter {
                solver.gmres_max_iter = v.max(1);
            }
            if let Some(v) = s.max_splits {
                solver.max_splits = v;
            }
            if let Some(v) = s.fit_threshold {
                fit_threshold = positive("solver.fit_threshold", v)?;
            }
        }

        let (seed, out) = match raw.run {
            Some(r) => (r.seed.unwrap_or(0), r.out.map(|o| base.map_or_else(|| PathBuf::from(&o), |b| b.join(&o)))),
            None => (0, None),
        };

        let mut curvature = CurvatureSpec { draws: 100, base_amplitude: 0.1, direction_amplitude: 1.0, max_freq: 2 };
        if let Some(c) = raw.curvature {
            if let Some(v) = c.draws {
                curvature.draws = v;
            }
            if let Some(v) = c.base_amplitude {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(format!("curvature.base_amplitude must be finite and non-negative, got {v}")));
                }
                curvature.base_amplitude = v;
            }
            if let Some(v) = c.direction_amplitude {
                curvature.direction_amplitude = positive("curvature.direction_amplitude", v)?;
            }
            if let Some(v) = c.max_freq {
                if !(1..=64).contains(&v) {
                    return Err(bad(format!("curvature.max_freq must lie in 1..=64, got {v}")));
                }
                curvature.max_freq = v;
            }
        }

        let cat0_lambdas = raw.cat0.and_then(|c| c.lambdas).unwrap_or_else(|| vec![0.25, 0.5, 0.75]);
        if cat0_lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(bad(format!("cat0.lambdas must lie in [0, 1]: {cat0_lambdas:?}")));
        }

        let (jfun_path, jfun_loop_steps) = match raw.jfun {
            Some(j) => (j.path.map(|p| read_file(base, &p)).transpose()?, j.loop_steps.unwrap_or(33)),
            None => (None, 33),
        };
        if !(3..=4097).contains(&jfun_loop_steps) {
            return Err(bad(format!("jfun.loop_steps must lie in 3..=4097, got {jfun_loop_steps}")));
        }

        Ok(RunConfig {
            background,
            endpoints,
            schedule,
            solver,
            fit_threshold,
            seed,
            out,
            curvature,
            cat0_lambdas,
            jfun_path,
            jfun_loop_steps,
        })
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        let b = &self.background;
        TorusGrid::new(b.n, b.points, b.period).map_err(|e| bad(format!("background grid: {e}")))
    }

    /// Builds the pencil and lifts its phase at the zero potential.
    pub fn background(&self) -> Result<Background, CliError> {
        let grid = self.grid()?;
        let b = &self.background;
        let omega = HermitianMatrix::diagonal(&b.omega);
        let alpha = HermitianMatrix::diagonal(&b.alpha);
        let pencil = match &b.alpha_potential {
            Some(f) => Pencil::with_potential(grid, omega, alpha, &f.sample(grid)?)?,
            None => Pencil::constant(grid, omega, alpha)?,
        };
        Ok(Background::new(pencil)?)
    }

    /// Samples a named endpoint on `grid`.
    pub fn endpoint(&self, name: &str, grid: TorusGrid) -> Result<ScalarField, CliError> {
        match self.endpoints.get(name) {
            Some(Endpoint::Formula(f)) => Ok(f.sample(grid)?),
            Some(Endpoint::Field(field)) => {
                if *field.grid() != grid {
                    return Err(bad(format!("endpoint {name}: field file grid differs from the background grid")));
                }
                Ok(field.clone())
            }
            None => Err(bad(format!("missing endpoint '{name}' in [endpoints]"))),
        }
    }

    pub fn endpoint_or_zero(&self, name: &str, grid: TorusGrid) -> Result<ScalarField, CliError> {
        if self.endpoints.contains_key(name) {
            self.endpoint(name, grid)
        } else {
            Ok(ScalarField::zeros(grid))
        }
    }
}

fn check_formula_dim(f: &Formula, n: usize, what: &str) -> Result<(), CliError> {
    if f.complex_dim_used() > n {
        return Err(bad(format!("{what} uses coordinates of complex dimension {} on an n = {n} background", f.complex_dim_used())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse("[background]\nn = 1\npoints = 16\nalpha = [1.0]\n", None).unwrap();
        assert_eq!(c.schedule, DEFAULT_SCHEDULE.to_vec());
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.background.omega, vec![1.0]);
        assert_eq!(c.cat0_lambdas, vec![0.25, 0.5, 0.75]);
        let bg = c.background().unwrap();
        assert!((bg.theta_hat() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let base = "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n";
        for extra in [
            "[schedule]\nepsilon = [0.1, 0.2]\n",
            "[schedule]\nepsilon = []\n",
            "[schedule]\nepsilon = [0.1, -0.2]\n",
            "[endpoints]\nphi0 = \"sin(x2)\"\n",
            "[endpoints]\nphi0 = \"sin(\"\n",
            "[endpoints]\nphi0 = { file = \"/nonexistent/none.fld\" }\n",
            "[solver]\ndamping = 1.5\n",
            "[unknown]\nx = 1\n",
        ] {
            let text = format!("{base}{extra}");
            assert!(matches!(RunConfig::parse(&text, None), Err(CliError::Config(_))), "{extra}");
        }
        assert!(RunConfig::parse("[background]\nn = 3\npoints = 8\nalpha = [1, 1, 1]\n", None).is_err());
        assert!(RunConfig::parse("[background]\nn = 1\npoints = 16\nalpha = [1.0, 2.0]\n", None).is_err());
        assert!(RunConfig::parse("not toml at all", None).is_err());
    }

    #[test]
    fn epsilon_override() {
        assert_eq!(parse_epsilon_list("0.4,0.2 0.1").unwrap(), vec![0.4, 0.2, 0.1]);
        assert!(parse_epsilon_list("0.1,0.2").is_err());
        assert!(parse_epsilon_list("x").is_err());
    }
}
