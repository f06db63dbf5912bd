//! The space of almost calibrated potentials over a fixed background.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::grid::{complex_hessian, integrate, same_grid, Form11Field, ScalarField, TorusGrid};
use crate::linalg::{HermitianMatrix, C64};
use crate::pencil::{OmegaFrame, PencilPoint};

#[derive(Clone, Debug)]
enum AlphaField {
    Constant(HermitianMatrix),
    Varying(Form11Field),
}

/// Flat Kähler form ω and closed background form α on a torus grid, before
/// a branch of the phase has been chosen.
#[derive(Clone, Debug)]
pub struct Pencil {
    grid: TorusGrid,
    frame: OmegaFrame,
    alpha: AlphaField,
}

impl Pencil {
    pub fn constant(grid: TorusGrid, omega: HermitianMatrix, alpha: HermitianMatrix) -> Result<Self> {
        let n = grid.complex_dim();
        if omega.dim() != n || alpha.dim() != n {
            return Err(Error::Domain(format!("omega/alpha must be {n}x{n} for this grid")));
        }
        Ok(Pencil { grid, frame: OmegaFrame::new(&omega)?, alpha: AlphaField::Constant(alpha) })
    }

    /// `α = α₀ + i∂∂̄g`: a non-constant representative of the class of α₀.
    pub fn with_potential(
        grid: TorusGrid,
        omega: HermitianMatrix,
        alpha0: HermitianMatrix,
        potential: &ScalarField,
    ) -> Result<Self> {
        let base = Self::constant(grid, omega, alpha0)?;
        same_grid(&grid, potential.grid())?;
        let field = Form11Field::constant(grid, alpha0)?.add(&complex_hessian(potential))?;
        Ok(Pencil { alpha: AlphaField::Varying(field), ..base })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn frame(&self) -> &OmegaFrame {
        &self.frame
    }

    pub fn omega(&self) -> &HermitianMatrix {
        self.frame.omega()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.alpha, AlphaField::Constant(_))
    }

    #[inline]
    pub fn alpha_at(&self, idx: usize) -> HermitianMatrix {
        match &self.alpha {
            AlphaField::Constant(a) => *a,
            AlphaField::Varying(f) => *f.at(idx),
        }
    }

    /// `α_φ = α + i∂∂̄φ` at one point.
    #[inline]
    pub fn alpha_phi_at(&self, phi: &[f64], idx: usize) -> HermitianMatrix {
        self.alpha_at(idx).add(&self.grid.hessian_at(phi, idx))
    }

    pub fn point(&self, phi: &[f64], idx: usize) -> PencilPoint {
        PencilPoint::new(&self.frame, &self.alpha_phi_at(phi, idx))
    }

    /// Complex volume `∫ Ω^n` in units where `ω^n` integrates to the
    /// `det ω`-weighted coordinate volume.
    pub fn complex_volume(&self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let zero = vec![0.0; self.grid.len()];
        for idx in 0..self.grid.len() {
            let p = self.point(&zero, idx);
            acc += p.lambdas().iter().fold(C64::new(1.0, 0.0), |z, &l| z * C64::new(1.0, l));
        }
        acc * (self.frame.det() * self.grid.cell_volume())
    }

    /// Principal argument of `∫(ω + iα)^n`.
    pub fn topological_angle(&self) -> Result<f64> {
        let v = self.complex_volume();
        if v.norm() <= 1e-8 * self.grid.volume() {
            return Err(Error::Domain(format!(
                "the complex volume integral vanishes ({:e}); the standing nonvanishing assumption fails",
                v.norm()
            )));
        }
        Ok(v.arg())
    }

    /// Pointwise phase field `Θ(α_φ)`.
    pub fn phase_field(&self, phi: &ScalarField) -> Result<Vec<f64>> {
        same_grid(&self.grid, phi.grid())?;
        Ok((0..self.grid.len()).map(|i| crate::pencil::phase(self.point(phi.values(), i).lambdas())).collect())
    }

    /// The unique representative β ∈ (−nπ/2, nπ/2) of the topological angle
    /// with `|Θ(α_φ) − β| < π/2` everywhere on the grid.
    pub fn lift_phase(&self, phi: &ScalarField) -> Result<f64> {
        let top = self.topological_angle()?;
        let theta = self.phase_field(phi)?;
        let lo = theta.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let half = self.grid.complex_dim() as f64 * FRAC_PI_2;
        let mut found = Vec::new();
        for k in -3i32..=3 {
            let beta = top + TAU * k as f64;
            if beta <= -half || beta >= half {
                continue;
            }
            if hi - beta < FRAC_PI_2 && beta - lo < FRAC_PI_2 {
                found.push(beta);
            }
        }
        match found.len() {
            1 => Ok(found[0]),
            0 => Err(Error::NotMember(format!(
                "no branch of the topological angle {top:.6} fits the phase range [{lo:.6}, {hi:.6}]"
            ))),
            _ => Err(Error::AmbiguousBranch(format!("candidates {found:?}"))),
        }
    }
}

/// A pencil together with its lifted phase θ̂.
#[derive(Clone, Debug)]
pub struct Background {
    pencil: Pencil,
    theta_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `min (π/2 − |Θ − θ̂|)` over the grid.
    pub margin: f64,
    pub min_real_part: f64,
    /// Flat index of the point realizing the margin.
    pub worst_index: usize,
}

/// Pointwise pencil data of one potential.
#[derive(Clone, Debug)]
pub struct SliceGeometry {
    grid: TorusGrid,
    det: f64,
    theta_hat: f64,
    points: Vec<PencilPoint>,
    theta: Vec<f64>,
    real: Vec<f64>,
    imag: Vec<f64>,
}

impl SliceGeometry {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn point(&self, idx: usize) -> &PencilPoint {
        &self.points[idx]
    }

    pub fn theta(&self, idx: usize) -> f64 {
        self.theta[idx]
    }

    /// `Re(e^{-iθ̂}Π(1+iλ))` at a point (no `det ω` factor).
    pub fn real_part(&self, idx: usize) -> f64 {
        self.real[idx]
    }

    pub fn imag_part(&self, idx: usize) -> f64 {
        self.imag[idx]
    }

    /// `tan(Θ − θ̂)`.
    pub fn tangent(&self, idx: usize) -> f64 {
        (self.theta[idx] - self.theta_hat).tan()
    }

    pub fn membership(&self) -> Membership {
        let mut margin = f64::INFINITY;
        let mut worst = 0;
        let mut min_re = f64::INFINITY;
        for i in 0..self.theta.len() {
            let m = FRAC_PI_2 - (self.theta[i] - self.theta_hat).abs();
            if m < margin {
                margin = m;
                worst = i;
            }
            min_re = min_re.min(self.real[i]);
        }
        Membership { member: margin > 0.0 && min_re > 0.0, margin, min_real_part: min_re, worst_index: worst }
    }

    pub fn require_member(&self, what: &str) -> Result<()> {
        let m = self.membership();
        if !m.member {
            let x = self.grid.coords(m.worst_index);
            return Err(Error::NotMember(format!(
                "{what}: margin {:.3e} at grid point {} (coords {:?})",
                m.margin,
                m.worst_index,
                &x[..self.grid.real_axes()]
            )));
        }
        Ok(())
    }

    /// Volume weight `Re(e^{-iθ̂}Ω_φ^n)/dx` used by the metric.
    pub fn weight(&self) -> ScalarField {
        ScalarField::from_values(self.grid, self.real.iter().map(|r| r * self.det).collect())
            .expect("weight is finite")
    }

    /// `Im(e^{-iθ̂}Ω_φ^n)/dx`.
    pub fn imag_weight(&self) -> ScalarField {
        ScalarField::from_values(self.grid, self.imag.iter().map(|r| r * self.det).collect())
            .expect("imaginary weight is finite")
    }
}

impl Background {
    /// Lifts the phase using the zero potential.
    pub fn new(pencil: Pencil) -> Result<Self> {
        let zero = ScalarField::zeros(pencil.grid);
        let theta_hat = pencil.lift_phase(&zero)?;
        Ok(Background { pencil, theta_hat })
    }

    /// Lifts the phase using a given member potential.
    pub fn lifted_at(pencil: Pencil, phi: &ScalarField) -> Result<Self> {
        let theta_hat = pencil.lift_phase(phi)?;
        Ok(Background { pencil, theta_hat })
    }

    pub fn pencil(&self) -> &Pencil {
        &self.pencil
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.pencil.grid
    }

    pub fn complex_dim(&self) -> usize {
        self.pencil.grid.complex_dim()
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    /// θ̂ ∈ ((n−1)π/2, nπ/2).
    pub fn is_hypercritical(&self) -> bool {
        let n = self.complex_dim() as f64;
        self.theta_hat > (n - 1.0) * FRAC_PI_2 && self.theta_hat < n * FRAC_PI_2
    }

    pub fn geometry(&self, phi: &ScalarField) -> Result<SliceGeometry> {
        same_grid(self.grid(), phi.grid())?;
        Ok(self.geometry_raw(phi.values()))
    }

    pub(crate) fn geometry_raw(&self, phi: &[f64]) -> SliceGeometry {
        let g = *self.grid();
        let mut points = Vec::with_capacity(g.len());
        let mut theta = Vec::with_capacity(g.len());
        let mut real = Vec::with_capacity(g.len());
        let mut imag = Vec::with_capacity(g.len());
        for idx in 0..g.len() {
            let p = self.pencil.point(phi, idx);
            let cal = crate::pencil::calibrated_volume(p.lambdas(), self.theta_hat);
            theta.push(crate::pencil::phase(p.lambdas()));
            real.push(cal.real_part);
            imag.push(cal.imag_part);
            points.push(p);
        }
        SliceGeometry { grid: g, det: self.pencil.frame.det(), theta_hat: self.theta_hat, points, theta, real, imag }
    }

    pub fn is_member(&self, phi: &ScalarField) -> Result<Membership> {
        Ok(self.geometry(phi)?.membership())
    }

    /// Member-checked metric weight of `φ`.
    pub fn weight(&self, phi: &ScalarField) -> Result<ScalarField> {
        let geo = self.geometry(phi)?;
        geo.require_member("potential")?;
        Ok(geo.weight())
    }

    /// `⟨ψ₁, ψ₂⟩_φ = ∫ ψ₁ψ₂ Re(e^{-iθ̂}Ω_φ^n)`.
    pub fn metric_inner(&self, phi: &ScalarField, psi1: &ScalarField, psi2: &ScalarField) -> Result<f64> {
        let w = self.weight(phi)?;
        same_grid(self.grid(), psi1.grid())?;
        same_grid(self.grid(), psi2.grid())?;
        let prod = psi1.zip_map(psi2, |a, b| a * b)?;
        integrate(&prod, &w)
    }

    /// `E(t_k) = ∫ φ̇(t_k)² Re(e^{-iθ̂}Ω_{φ(t_k)}^n)`.
    pub fn path_energy_profile(&self, path: &PathField) -> Result<Vec<f64>> {
        same_grid(self.grid(), path.grid())?;
        (0..path.time_steps())
            .map(|k| {
                let geo = self.geometry_raw(path.slice(k));
                geo.require_member(&format!("time slice {k}"))?;
                let v = ScalarField::from_values(*path.grid(), path.velocity(k))?;
                integrate(&v.map(|x| x * x), &geo.weight())
            })
            .collect()
    }

    /// Trapezoid rule over `√E(t_k)`.
    pub fn path_length(&self, path: &PathField) -> Result<f64> {
        Ok(length_from_energies(&self.path_energy_profile(path)?, path.dt()))
    }

    /// `δ𝒥_φ(ψ) = −∫ ψ Im(e^{-iθ̂}Ω_φ^n)`.
    pub fn j_functional_delta(&self, phi: &ScalarField, psi: &ScalarField) -> Result<f64> {
        let geo = self.geometry(phi)?;
        same_grid(self.grid(), psi.grid())?;
        Ok(-integrate(psi, &geo.imag_weight())?)
    }

    /// `𝒥(t_k)` along a path by the trapezoid rule in t, with `𝒥(t_0) = 0`.
    pub fn j_functional_along(&self, path: &PathField) -> Result<Vec<f64>> {
        same_grid(self.grid(), path.grid())?;
        let mut deltas = Vec::with_capacity(path.time_steps());
        for k in 0..path.time_steps() {
            let phi = path.slice_field(k);
            let v = ScalarField::from_values(*path.grid(), path.velocity(k))?;
            deltas.push(self.j_functional_delta(&phi, &v)?);
        }
        let dt = path.dt();
        let mut out = vec![0.0; deltas.len()];
        for k in 1..deltas.len() {
            out[k] = out[k - 1] + 0.5 * dt * (deltas[k - 1] + deltas[k]);
        }
        Ok(out)
    }
}

pub fn length_from_energies(e: &[f64], dt: f64) -> f64 {
    e.windows(2).map(|w| 0.5 * dt * (w[0].max(0.0).sqrt() + w[1].max(0.0).sqrt())).sum()
}

/// A family `φ(·, t_k)`, `t_k = k/(m−1)`, on one spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathField {
    grid: TorusGrid,
    steps: usize,
    data: Vec<f64>,
}

impl PathField {
    pub fn from_data(grid: TorusGrid, steps: usize, data: Vec<f64>) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Domain(format!("a path needs at least 2 time steps, got {steps}")));
        }
        if data.len() != steps * grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {steps} slices of {} points",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite path value".into()));
        }
        Ok(PathField { grid, steps, data })
    }

    pub fn from_slices(slices: &[ScalarField]) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::Domain("empty slice list".into()))?;
        let grid = *first.grid();
        let mut data = Vec::with_capacity(slices.len() * grid.len());
        for s in slices {
            same_grid(&grid, s.grid())?;
            data.extend_from_slice(s.values());
        }
        Self::from_data(grid, slices.len(), data)
    }

    /// `(1 − t)φ₀ + tφ₁`, endpoints copied exactly.
    pub fn linear(phi0: &ScalarField, phi1: &ScalarField, steps: usize) -> Result<Self> {
        same_grid(phi0.grid(), phi1.grid())?;
        if steps < 2 {
            return Err(Error::Domain(format!("a path needs at least 2 time steps, got {steps}")));
        }
        let grid = *phi0.grid();
        let mut data = Vec::with_capacity(steps * grid.len());
        for k in 0..steps {
            let t = k as f64 / (steps - 1) as f64;
            if k == 0 {
                data.extend_from_slice(phi0.values());
            } else if k == steps - 1 {
                data.extend_from_slice(phi1.values());
            } else {
                data.extend(phi0.values().iter().zip(phi1.values()).map(|(a, b)| (1.0 - t) * a + t * b));
            }
        }
        Self::from_data(grid, steps, data)
    }

    /// The closed loop `c + a sin(2πt) + b(1 − cos(2πt))`, sampled on
    /// `steps` points with both ends equal to `c` bit for bit.
    pub fn closed_loop(c: &ScalarField, a: &ScalarField, b: &ScalarField, steps: usize) -> Result<Self> {
        same_grid(c.grid(), a.grid())?;
        same_grid(c.grid(), b.grid())?;
        if steps < 3 {
            return Err(Error::Domain(format!("a loop needs at least 3 time steps, got {steps}")));
        }
        let grid = *c.grid();
        let mut data = Vec::with_capacity(steps * grid.len());
        for k in 0..steps {
            if k == 0 || k == steps - 1 {
                data.extend_from_slice(c.values());
                continue;
            }
            let t = std::f64::consts::TAU * k as f64 / (steps - 1) as f64;
            let (st, ct) = (t.sin(), 1.0 - t.cos());
            data.extend((0..grid.len()).map(|i| c.values()[i] + st * a.values()[i] + ct * b.values()[i]));
        }
        Self::from_data(grid, steps, data)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn time_steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.steps - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let p = self.grid.len();
        &self.data[k * p..(k + 1) * p]
    }

    pub fn slice_field(&self, k: usize) -> ScalarField {
        ScalarField::from_values(self.grid, self.slice(k).to_vec()).expect("path slices are finite")
    }

    /// `∂_t φ` at `t_k`: central differences inside, one-sided second order
    /// at the ends (first order when there are only two slices).
    pub fn velocity(&self, k: usize) -> Vec<f64> {
        let m = self.steps;
        let dt = self.dt();
        let s = |j: usize| self.slice(j);
        if m == 2 {
            return s(1).iter().zip(s(0)).map(|(b, a)| (b - a) / dt).collect();
        }
        if k == 0 {
            let (a, b, c) = (s(0), s(1), s(2));
            (0..a.len()).map(|i| (-3.0 * a[i] + 4.0 * b[i] - c[i]) / (2.0 * dt)).collect()
        } else if k == m - 1 {
            let (a, b, c) = (s(m - 1), s(m - 2), s(m - 3));
            (0..a.len()).map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * dt)).collect()
        } else {
            let (a, c) = (s(k - 1), s(k + 1));
            (0..a.len()).map(|i| (c[i] - a[i]) / (2.0 * dt)).collect()
        }
    }

    /// Central second difference in t at an interior step.
    pub fn acceleration(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1 && k + 1 < self.steps, "acceleration needs an interior step");
        let dt2 = self.dt() * self.dt();
        let (a, b, c) = (self.slice(k - 1), self.slice(k), self.slice(k + 1));
        (0..a.len()).map(|i| (c[i] - 2.0 * b[i] + a[i]) / dt2).collect()
    }

    /// Same path traversed backwards.
    pub fn reversed(&self) -> PathField {
        let p = self.grid.len();
        let mut data = Vec::with_capacity(self.data.len());
        for k in (0..self.steps).rev() {
            data.extend_from_slice(&self.data[k * p..(k + 1) * p]);
        }
        PathField { grid: self.grid, steps: self.steps, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn calibrated_n1(points: usize) -> Background {
        let g = TorusGrid::standard(1, points).unwrap();
        let id = HermitianMatrix::identity(1);
        Background::new(Pencil::constant(g, id, id).unwrap()).unwrap()
    }

    #[test]
    fn calibrated_torus_phase() {
        let bg = calibrated_n1(16);
        assert!((bg.pencil().topological_angle().unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((bg.theta_hat() - FRAC_PI_4).abs() < 1e-15);
        assert!(bg.is_hypercritical());
    }

    #[test]
    fn zero_alpha_has_zero_angle() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let p = Pencil::constant(g, HermitianMatrix::identity(2), HermitianMatrix::zeros(2)).unwrap();
        assert_eq!(p.topological_angle().unwrap(), 0.0);
    }

    #[test]
    fn product_background_angle() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let a = (3.0 * PI / 8.0).tan();
        let p = Pencil::constant(g, HermitianMatrix::identity(2), HermitianMatrix::diagonal(&[1.0, a])).unwrap();
        let expected = FRAC_PI_4 + 3.0 * PI / 8.0;
        let got = p.topological_angle().unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        let bg = Background::new(p).unwrap();
        assert!((bg.theta_hat() - 5.0 * PI / 8.0).abs() < 1e-12);
        assert!(bg.is_hypercritical());
    }

    #[test]
    fn n2_identity_alpha_lifts_to_half_pi() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let id = HermitianMatrix::identity(2);
        let bg = Background::new(Pencil::constant(g, id, id).unwrap()).unwrap();
        assert!((bg.theta_hat() - FRAC_PI_2).abs() < 1e-15);
        assert!(!bg.is_hypercritical());
    }

    #[test]
    fn large_bump_is_not_a_member() {
        let bg = calibrated_n1(32);
        let mut amp = 0.5;
        let witness = loop {
            let phi = ScalarField::from_fn(*bg.grid(), |x| amp * x[0].cos() * x[1].cos());
            let m = bg.is_member(&phi).unwrap();
            if !m.member {
                break (phi, m);
            }
            amp *= 1.5;
        };
        let (phi, m) = witness;
        assert!(m.margin <= 0.0);
        // The located witness really violates positivity there.
        let geo = bg.geometry(&phi).unwrap();
        assert!(geo.real_part(m.worst_index) <= 0.0 || geo.theta(m.worst_index) - bg.theta_hat() <= -FRAC_PI_2);
        assert!(bg.pencil().lift_phase(&phi).is_err());
        assert!(bg.metric_inner(&phi, &phi, &phi).is_err());
    }

    #[test]
    fn metric_and_length_on_constant_shift() {
        let bg = calibrated_n1(16);
        let g = *bg.grid();
        let one = ScalarField::constant(g, 1.0);
        let zero = ScalarField::zeros(g);
        let v = bg.metric_inner(&zero, &one, &one).unwrap();
        assert!((v - 2f64.sqrt() * TAU * TAU).abs() < 1e-11);
        let c = -0.75;
        let path = PathField::linear(&zero, &ScalarField::constant(g, c), 9).unwrap();
        let e = bg.path_energy_profile(&path).unwrap();
        for x in &e {
            assert!((x - c * c * 2f64.sqrt() * TAU * TAU).abs() < 1e-10);
        }
        let l = bg.path_length(&path).unwrap();
        assert!((l - c.abs() * 2f64.powf(0.25) * TAU).abs() < 1e-11);
    }

    #[test]
    fn j_functional_vanishes_on_calibrated_slices() {
        let bg = calibrated_n1(16);
        let g = *bg.grid();
        let psi = ScalarField::from_fn(g, |x| x[0].sin() + 0.3);
        assert_eq!(bg.j_functional_delta(&ScalarField::zeros(g), &psi).unwrap(), 0.0);
        let path = PathField::linear(&ScalarField::constant(g, 0.2), &ScalarField::constant(g, -1.0), 5).unwrap();
        assert!(bg.j_functional_along(&path).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn j_functional_closes_around_loops() {
        // 𝒥 is exact along any path, so its increment around a loop vanishes
        // up to the O(dt²) error of the difference stencils and quadrature
        let bg = calibrated_n1(16);
        let g = *bg.grid();
        let c = ScalarField::from_fn(g, |x| 0.15 * (x[0] + 0.3).sin() * x[1].cos());
        let a = ScalarField::from_fn(g, |x| 0.1 * (x[1] - x[0]).cos());
        let b = ScalarField::from_fn(g, |x| 0.1 * (2.0 * x[0]).sin() + 0.05);
        let closure = |steps| {
            let path = PathField::closed_loop(&c, &a, &b, steps).unwrap();
            let j = bg.j_functional_along(&path).unwrap();
            let scale = j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (j[steps - 1].abs(), scale)
        };
        let (d1, scale) = closure(33);
        let (d2, _) = closure(65);
        assert!(scale > 1e-3, "loop too small to test: {scale}");
        assert!(d1 < 1e-2 * scale, "{d1} vs {scale}");
        assert!(d2 < d1 / 3.0 || d2 < 1e-12 * scale, "{d1} -> {d2}");
    }

    #[test]
    fn velocity_stencils_are_exact_on_quadratics() {
        let g = TorusGrid::standard(1, 8).unwrap();
        let slices: Vec<ScalarField> =
            (0..5).map(|k| ScalarField::constant(g, (k as f64 / 4.0).powi(2))).collect();
        let p = PathField::from_slices(&slices).unwrap();
        for k in 0..5 {
            let t = k as f64 / 4.0;
            assert!((p.velocity(k)[0] - 2.0 * t).abs() < 1e-14, "k={k}");
        }
        assert!((p.acceleration(2)[3] - 2.0).abs() < 1e-13);
    }
}
