//! Levi-Civita connection and curvature of the space of almost calibrated
//! potentials.
//!
//! The connection along a path is `∇_{φ̇}ψ = ψ̇ + Q(∇φ̇, ∇ψ)` with
//!
//! `Q(∇ψ, ∇η) = (n/2)(i∂ψ∧∂̄η + i∂η∧∂̄ψ) ∧ Im(e^{-iθ̂}Ω_φ^{n−1}) / Re(e^{-iθ̂}Ω_φ^n)`.
//!
//! Pointwise everything is evaluated in the frame where ω = I and α_φ is
//! diagonal. Gradients of assembled Q fields go through the same difference
//! stencils as every other gradient, so the closed-form curvature tensor and
//! the finite-difference commutator of covariant derivatives see identical
//! discrete data.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{complex_gradient, complex_hessian, integrate, same_grid, GradientField, ScalarField};
use crate::linalg::{HermitianMatrix, C64};
use crate::pencil::{curvature_integrand, PencilPoint};
use crate::space::{Background, SliceGeometry};
use crate::wedge::{curvature_terms_by_wedges, wedge_oracle};

/// Default step of the (t, s) stencil.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Relative gap above which the two sectional-curvature routes are treated
/// as disagreeing.
pub const ROUTE_TOLERANCE: f64 = 1e-8;

/// `φ(t, s) = φ + tψ + sη`.
#[derive(Clone, Debug)]
pub struct TwoParamFamily {
    pub base: ScalarField,
    pub psi: ScalarField,
    pub eta: ScalarField,
    pub delta: f64,
}

impl TwoParamFamily {
    pub fn new(base: ScalarField, psi: ScalarField, eta: ScalarField) -> Result<Self> {
        Self::with_delta(base, psi, eta, DEFAULT_DELTA)
    }

    pub fn with_delta(base: ScalarField, psi: ScalarField, eta: ScalarField, delta: f64) -> Result<Self> {
        same_grid(base.grid(), psi.grid())?;
        same_grid(base.grid(), eta.grid())?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("stencil step must be positive, got {delta}")));
        }
        Ok(TwoParamFamily { base, psi, eta, delta })
    }

    pub fn at(&self, t: f64, s: f64) -> ScalarField {
        let v = self
            .base
            .values()
            .iter()
            .zip(self.psi.values())
            .zip(self.eta.values())
            .map(|((b, p), e)| b + t * p + s * e)
            .collect();
        ScalarField::from_values(*self.base.grid(), v).expect("same grid")
    }

    /// Every node of the five-point (t, s) stencil must be a member.
    pub fn check_members(&self, bg: &Background) -> Result<()> {
        let d = self.delta;
        for (t, s) in [(0.0, 0.0), (d, 0.0), (-d, 0.0), (0.0, d), (0.0, -d)] {
            bg.geometry(&self.at(t, s))?.require_member(&format!("family node (t, s) = ({t:e}, {s:e})"))?;
        }
        Ok(())
    }
}

/// `Σ_i (T − λ_i) Re(a_i b̄_i)/(1+λ_i²)` for eigenframe covectors.
fn q_eig(p: &PencilPoint, t: f64, a: &[C64], b: &[C64]) -> f64 {
    p.lambdas().iter().enumerate().map(|(i, &l)| (t - l) * (a[i] * b[i].conj()).re / (1.0 + l * l)).sum()
}

/// `n i∂∂̄f ∧ Im(e^{-iθ̂}Ω^{n−1}) / Re(e^{-iθ̂}Ω^n)` from the eigenframe Hessian.
fn hessian_trace_term(p: &PencilPoint, t: f64, h: &HermitianMatrix) -> f64 {
    p.lambdas().iter().enumerate().map(|(i, &l)| (t - l) * h.get(i, i).re / (1.0 + l * l)).sum()
}

/// `(n(n−1)/2)(i∂a∧∂̄b + i∂b∧∂̄a) ∧ i∂∂̄f ∧ Re(e^{-iθ̂}Ω^{n−2}) / Re(e^{-iθ̂}Ω^n)`
/// from eigenframe data.
fn pair_hessian_term(p: &PencilPoint, t: f64, a: &[C64], b: &[C64], h: &HermitianMatrix) -> f64 {
    let lam = p.lambdas();
    let n = lam.len();
    let form = |j: usize, k: usize| a[j] * b[k].conj() + b[j] * a[k].conj();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = ((1.0 - lam[i] * lam[j]) + t * (lam[i] + lam[j])) / ((1.0 + lam[i] * lam[i]) * (1.0 + lam[j] * lam[j]));
            let m = form(i, i).re * h.get(j, j).re + form(j, j).re * h.get(i, i).re
                - 2.0 * (form(i, j) * h.get(j, i)).re;
            acc += c * m;
        }
    }
    0.5 * acc
}

/// A pointwise quantity evaluated in the eigenframe and by the wedge oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OraclePair {
    pub name: &'static str,
    pub shortcut: f64,
    pub oracle: f64,
    /// Sum of the absolute values of the terms the oracle adds up. For a
    /// single-term quantity this is `|oracle|`.
    pub oracle_terms: f64,
}

impl OraclePair {
    fn single(name: &'static str, shortcut: f64, oracle: f64) -> Self {
        OraclePair { name, shortcut, oracle, oracle_terms: oracle.abs() }
    }

    fn gap_over(&self, scale: f64) -> f64 {
        if scale == 0.0 {
            0.0
        } else {
            (self.shortcut - self.oracle).abs() / scale
        }
    }

    /// `|shortcut − oracle|` over the size of the terms entering the oracle
    /// sum. When those terms cancel (n = 1, nearly parallel gradients in the
    /// curvature integrand) neither route can carry more relative accuracy
    /// than this.
    pub fn relative_gap(&self) -> f64 {
        self.gap_over(self.shortcut.abs().max(self.oracle.abs()).max(self.oracle_terms))
    }

    /// `|shortcut − oracle| / max(|shortcut|, |oracle|)`.
    pub fn plain_relative_gap(&self) -> f64 {
        self.gap_over(self.shortcut.abs().max(self.oracle.abs()))
    }
}

/// Every eigenframe shortcut at the pencil (ω, α) next to its wedge-product
/// value: calibrated real and imaginary parts, the phase offset, `Q(a, b)`,
/// the curvature integrand of the plane (a, b), and the two Hessian
/// contractions entering the curvature tensor for a test form `h`.
pub fn pointwise_oracle_pairs(
    omega: &HermitianMatrix,
    alpha: &HermitianMatrix,
    theta_hat: f64,
    a: &[C64],
    b: &[C64],
    h: &HermitianMatrix,
) -> Result<Vec<OraclePair>> {
    let n = omega.dim();
    let frame = crate::pencil::OmegaFrame::new(omega)?;
    let p = PencilPoint::new(&frame, alpha);
    let cal = crate::pencil::calibrated_volume(p.lambdas(), theta_hat);
    let t = cal.tangent.ok_or_else(|| Error::Domain(format!("pencil not calibrated at thetaHat = {theta_hat}")))?;
    let w = wedge_oracle(omega, alpha, &[], &[], theta_hat)?;
    let offset = crate::pencil::phase(p.lambdas()) - theta_hat;
    let wrapped = offset - std::f64::consts::TAU * (offset / std::f64::consts::TAU).round();
    let (ca, cb) = (p.covector(a), p.covector(b));
    let he = p.to_eigen.congruence(h);
    let nf = n as f64;
    let terms = curvature_terms_by_wedges(omega, alpha, a, b, theta_hat)?;

    let mut out = vec![
        OraclePair::single("realPart", cal.real_part, w.re),
        OraclePair::single("imagPart", cal.imag_part, w.im),
        OraclePair::single("phaseOffset", wrapped, w.arg()),
        OraclePair::single("Q", q_eig(&p, t, &ca, &cb), crate::wedge::q_by_wedges(omega, alpha, a, b, theta_hat)?),
        OraclePair {
            name: "curvatureIntegrand",
            shortcut: curvature_integrand(p.lambdas(), theta_hat, &ca[..n], &cb[..n])?,
            oracle: terms.iter().sum(),
            oracle_terms: terms.iter().map(|x| x.abs()).sum(),
        },
        OraclePair::single(
            "hessianTrace",
            hessian_trace_term(&p, t, &he),
            nf * wedge_oracle(omega, alpha, &[*h], &[], theta_hat)?.im / w.re,
        ),
    ];
    if n >= 2 {
        let z = wedge_oracle(omega, alpha, &[*h], &[(a.to_vec(), b.to_vec())], theta_hat)?
            + wedge_oracle(omega, alpha, &[*h], &[(b.to_vec(), a.to_vec())], theta_hat)?;
        out.push(OraclePair::single(
            "pairHessian",
            pair_hessian_term(&p, t, &ca, &cb, &he),
            0.5 * nf * (nf - 1.0) * z.re / w.re,
        ));
    }
    Ok(out)
}

struct Frame<'a> {
    geo: &'a SliceGeometry,
}

impl<'a> Frame<'a> {
    fn point(&self, idx: usize) -> (&PencilPoint, f64) {
        (self.geo.point(idx), self.geo.tangent(idx))
    }

    fn covector(&self, g: &GradientField, idx: usize) -> [C64; 4] {
        self.geo.point(idx).covector(g.at(idx))
    }

    fn q(&self, a: &GradientField, b: &GradientField) -> ScalarField {
        let grid = *self.geo.grid();
        let v = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (p, t) = self.point(idx);
                q_eig(p, t, &self.covector(a, idx), &self.covector(b, idx))
            })
            .collect();
        ScalarField::from_values(grid, v).expect("finite connection field")
    }
}

fn member_geometry(bg: &Background, phi: &ScalarField) -> Result<SliceGeometry> {
    let geo = bg.geometry(phi)?;
    geo.require_member("base potential")?;
    Ok(geo)
}

/// The pointwise field `Q(∇a, ∇b)` at `φ`.
pub fn connection_term(bg: &Background, phi: &ScalarField, a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    same_grid(bg.grid(), a.grid())?;
    same_grid(bg.grid(), b.grid())?;
    let geo = member_geometry(bg, phi)?;
    Ok(Frame { geo: &geo }.q(&complex_gradient(a), &complex_gradient(b)))
}

/// `∇_{φ̇}ψ = ψ̇ + Q(∇φ̇, ∇ψ)` at the path point `φ`.
pub fn covariant_derivative(
    bg: &Background,
    phi: &ScalarField,
    phi_dot: &ScalarField,
    psi: &ScalarField,
    psi_dot: &ScalarField,
) -> Result<ScalarField> {
    let q = connection_term(bg, phi, phi_dot, psi)?;
    psi_dot.lin_comb(1.0, &q, 1.0)
}

/// `R(φ_t, φ_s)ζ` at the family base point by the closed six-term form.
pub fn curvature_tensor(bg: &Background, family: &TwoParamFamily, field: &ScalarField) -> Result<ScalarField> {
    same_grid(bg.grid(), field.grid())?;
    family.check_members(bg)?;
    let geo = member_geometry(bg, &family.base)?;
    let fr = Frame { geo: &geo };
    let grid = *bg.grid();
    let (gp, ge, gz) = (complex_gradient(&family.psi), complex_gradient(&family.eta), complex_gradient(field));
    let (hp, he) = (complex_hessian(&family.psi), complex_hessian(&family.eta));
    let q_ez = fr.q(&ge, &gz);
    let q_pz = fr.q(&gp, &gz);
    let nested_t = fr.q(&gp, &complex_gradient(&q_ez));
    let nested_s = fr.q(&ge, &complex_gradient(&q_pz));
    let v = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (p, t) = fr.point(idx);
            let m = &p.to_eigen;
            let (a_p, a_e, a_z) = (fr.covector(&gp, idx), fr.covector(&ge, idx), fr.covector(&gz, idx));
            let (h_p, h_e) = (m.congruence(hp.at(idx)), m.congruence(he.at(idx)));
            pair_hessian_term(p, t, &a_e, &a_z, &h_p) - pair_hessian_term(p, t, &a_p, &a_z, &h_e)
                + q_ez.values()[idx] * hessian_trace_term(p, t, &h_p)
                - q_pz.values()[idx] * hessian_trace_term(p, t, &h_e)
                + nested_t.values()[idx]
                - nested_s.values()[idx]
        })
        .collect();
    ScalarField::from_values(grid, v)
}

/// `∇_t∇_sζ − ∇_s∇_tζ` for a field `ζ` constant in (t, s), with the t and s
/// derivatives of the connection fields taken by centered differences over
/// the family stencil.
pub fn curvature_commutator(bg: &Background, family: &TwoParamFamily, field: &ScalarField) -> Result<ScalarField> {
    family.check_members(bg)?;
    let d = family.delta;
    let (psi, eta) = (&family.psi, &family.eta);
    let q_at = |t: f64, s: f64, a: &ScalarField| connection_term(bg, &family.at(t, s), a, field);
    let v_s = q_at(0.0, 0.0, eta)?;
    let v_t = q_at(0.0, 0.0, psi)?;
    let dt_vs = q_at(d, 0.0, eta)?.lin_comb(1.0 / (2.0 * d), &q_at(-d, 0.0, eta)?, -1.0 / (2.0 * d))?;
    let ds_vt = q_at(0.0, d, psi)?.lin_comb(1.0 / (2.0 * d), &q_at(0.0, -d, psi)?, -1.0 / (2.0 * d))?;
    let ts = covariant_derivative(bg, &family.base, psi, &v_s, &dt_vs)?;
    let st = covariant_derivative(bg, &family.base, eta, &v_t, &ds_vt)?;
    ts.lin_comb(1.0, &st, -1.0)
}

/// Both torsion terms `∇_{φ_t}φ_s` and `∇_{φ_s}φ_t` of the affine family,
/// returned with the sup of their difference.
pub fn torsion_defect(bg: &Background, family: &TwoParamFamily) -> Result<f64> {
    let g = *bg.grid();
    let zero = ScalarField::zeros(g);
    // φ_st = 0 for the affine family
    let a = covariant_derivative(bg, &family.base, &family.psi, &family.eta, &zero)?;
    let b = covariant_derivative(bg, &family.base, &family.eta, &family.psi, &zero)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Metric compatibility along `φ(t) = φ + tφ̇ + ½t²φ̈` with fields
/// `ψ₁(t) = ψ₁ + tψ̇₁` and a fixed `ψ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityDefect {
    /// Centered difference of `⟨ψ₁, ψ₂⟩_{φ(t)}` at t = 0.
    pub lhs: f64,
    /// `⟨∇ψ₁, ψ₂⟩ + ⟨ψ₁, ∇ψ₂⟩` at t = 0.
    pub rhs: f64,
    pub defect: f64,
    /// Sum of the absolute sizes of the terms entering `rhs`.
    pub scale: f64,
}

impl CompatibilityDefect {
    pub fn relative(&self) -> f64 {
        self.defect / self.scale.max(f64::MIN_POSITIVE)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn metric_compatibility(
    bg: &Background,
    phi: &ScalarField,
    phi_dot: &ScalarField,
    phi_ddot: &ScalarField,
    psi1: &ScalarField,
    psi1_dot: &ScalarField,
    psi2: &ScalarField,
    delta: f64,
) -> Result<CompatibilityDefect> {
    let at = |t: f64| -> Result<(ScalarField, ScalarField)> {
        let p = phi.lin_comb(1.0, phi_dot, t)?.lin_comb(1.0, phi_ddot, 0.5 * t * t)?;
        Ok((p, psi1.lin_comb(1.0, psi1_dot, t)?))
    };
    let (pp, qp) = at(delta)?;
    let (pm, qm) = at(-delta)?;
    let lhs = (bg.metric_inner(&pp, &qp, psi2)? - bg.metric_inner(&pm, &qm, psi2)?) / (2.0 * delta);
    let zero = ScalarField::zeros(*bg.grid());
    let n1 = covariant_derivative(bg, phi, phi_dot, psi1, psi1_dot)?;
    let n2 = covariant_derivative(bg, phi, phi_dot, psi2, &zero)?;
    let a = bg.metric_inner(phi, &n1, psi2)?;
    let b = bg.metric_inner(phi, psi1, &n2)?;
    Ok(CompatibilityDefect { lhs, rhs: a + b, defect: (lhs - a - b).abs(), scale: a.abs() + b.abs() + lhs.abs() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionalCurvature {
    /// Wedge-product terms of the numerator, integrated separately.
    pub terms_a: [f64; 3],
    pub numerator_a: f64,
    pub numerator_b: f64,
    pub denominator: f64,
    pub k_route_a: f64,
    pub k_route_b: f64,
    /// `|a − b|` relative to the summed absolute sizes of the route-(a) terms.
    pub route_gap: f64,
}

/// `K(ψ, η) = ⟨R(ψ,η)η,ψ⟩ / (⟨ψ,ψ⟩⟨η,η⟩ − ⟨ψ,η⟩²)`.
///
/// Route (a) integrates the three wedge-product terms evaluated by explicit
/// permutation expansion; route (b) integrates the diagonalized integrand.
/// The value of route (b) is the one reported as K.
pub fn sectional_curvature(
    bg: &Background,
    phi: &ScalarField,
    psi: &ScalarField,
    eta: &ScalarField,
) -> Result<SectionalCurvature> {
    same_grid(bg.grid(), psi.grid())?;
    same_grid(bg.grid(), eta.grid())?;
    let geo = member_geometry(bg, phi)?;
    let grid = *bg.grid();
    let w = geo.weight();
    let pp = integrate(&psi.map(|v| v * v), &w)?;
    let ee = integrate(&eta.map(|v| v * v), &w)?;
    let pe = integrate(&psi.zip_map(eta, |a, b| a * b)?, &w)?;
    let denominator = pp * ee - pe * pe;
    if !(denominator > 1e-12) {
        return Err(Error::Domain(format!("degenerate 2-plane: Gram determinant {denominator:e}")));
    }
    let (gp, ge) = (complex_gradient(psi), complex_gradient(eta));
    let omega = *bg.pencil().omega();
    let det = bg.pencil().frame().det();
    let th = bg.theta_hat();

    let per_point: Vec<Result<([f64; 3], f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let alpha = bg.pencil().alpha_phi_at(phi.values(), idx);
            let ratio = wedge_oracle(&omega, &alpha, &[], &[], th)?.re;
            let terms = curvature_terms_by_wedges(&omega, &alpha, gp.at(idx), ge.at(idx), th)?;
            let wa = ratio * det;
            let p = geo.point(idx);
            let b = curvature_integrand(p.lambdas(), th, &p.covector(gp.at(idx)), &p.covector(ge.at(idx)))?;
            Ok(([terms[0] * wa, terms[1] * wa, terms[2] * wa], b * w.values()[idx]))
        })
        .collect();
    let mut terms_a = [0.0; 3];
    let mut numerator_b = 0.0;
    for r in per_point {
        let (t, b) = r?;
        for k in 0..3 {
            terms_a[k] += t[k];
        }
        numerator_b += b;
    }
    let cell = grid.cell_volume();
    terms_a.iter_mut().for_each(|t| *t *= cell);
    numerator_b *= cell;
    let numerator_a: f64 = terms_a.iter().sum();
    let scale = terms_a.iter().map(|t| t.abs()).sum::<f64>();
    let route_gap = if scale > 0.0 { (numerator_a - numerator_b).abs() / scale } else { (numerator_a - numerator_b).abs() };
    if route_gap > ROUTE_TOLERANCE {
        return Err(Error::Numeric(format!(
            "sectional curvature routes disagree: {numerator_a:e} vs {numerator_b:e} (relative gap {route_gap:e})"
        )));
    }
    Ok(SectionalCurvature {
        terms_a,
        numerator_a,
        numerator_b,
        denominator,
        k_route_a: numerator_a / denominator,
        k_route_b: numerator_b / denominator,
        route_gap,
    })
}

/// `⟨R(ψ,η)η, ψ⟩` through the six-term tensor. It agrees with the
/// sectional-curvature numerator up to the discretization error of the
/// integrations by parts behind the closed form.
pub fn numerator_from_tensor(bg: &Background, phi: &ScalarField, psi: &ScalarField, eta: &ScalarField) -> Result<f64> {
    let fam = TwoParamFamily::new(phi.clone(), psi.clone(), eta.clone())?;
    let r = curvature_tensor(bg, &fam, eta)?;
    bg.metric_inner(phi, &r, psi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureRow {
    pub draw: usize,
    pub k_route_a: f64,
    pub k_route_b: f64,
    pub denominator: f64,
    pub flat: bool,
}

/// Rows of an ensemble report.
pub fn curvature_csv(rows: &[CurvatureRow]) -> String {
    let mut s = String::from("draw id,K_route_a,K_route_b,denominator,flat_flag\n");
    for r in rows {
        let _ = writeln!(s, "{},{:e},{:e},{:e},{}", r.draw, r.k_route_a, r.k_route_b, r.denominator, r.flat as u8);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::sampling::trig_field;
    use crate::space::Pencil;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n1_background(points: usize) -> Background {
        let g = TorusGrid::standard(1, points).unwrap();
        let id = HermitianMatrix::identity(1);
        Background::new(Pencil::constant(g, id, id).unwrap()).unwrap()
    }

    fn n2_background(points: usize) -> Background {
        let g = TorusGrid::standard(2, points).unwrap();
        let mut om = HermitianMatrix::identity(2);
        om.set(0, 1, C64::new(0.2, -0.1));
        let mut al = HermitianMatrix::diagonal(&[1.5, 2.5]);
        al.set(0, 1, C64::new(0.1, 0.3));
        Background::new(Pencil::constant(g, om, al).unwrap()).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
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

    #[test]
    fn eigenframe_terms_match_wedge_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for trial in 0..600 {
            let n = 1 + trial % 3;
            let omega = rand_herm(&mut rng, n, 0.3).add(&HermitianMatrix::identity(n).scale(1.5));
            let alpha = rand_herm(&mut rng, n, 1.5);
            let frame = crate::pencil::OmegaFrame::new(&omega).unwrap();
            let p = PencilPoint::new(&frame, &alpha);
            let th = crate::pencil::phase(p.lambdas()) + rng.gen_range(-1.0..1.0);
            let cal = crate::pencil::calibrated_volume(p.lambdas(), th);
            let Some(t) = cal.tangent else { continue };
            let (a, b) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
            let h = rand_herm(&mut rng, n, 1.0);
            let ratio = wedge_oracle(&omega, &alpha, &[], &[], th).unwrap().re;
            let nf = n as f64;

            let hess = hessian_trace_term(&p, t, &p.to_eigen.congruence(&h));
            let w = nf * wedge_oracle(&omega, &alpha, &[h], &[], th).unwrap().im / ratio;
            assert!((hess - w).abs() <= 1e-10 * (1.0 + w.abs()), "n={n}: {hess} vs {w}");

            let pair = pair_hessian_term(&p, t, &p.covector(&a), &p.covector(&b), &p.to_eigen.congruence(&h));
            let w2 = if n >= 2 {
                let z = wedge_oracle(&omega, &alpha, &[h], &[(a.clone(), b.clone())], th).unwrap()
                    + wedge_oracle(&omega, &alpha, &[h], &[(b.clone(), a.clone())], th).unwrap();
                0.5 * nf * (nf - 1.0) * z.re / ratio
            } else {
                0.0
            };
            assert!((pair - w2).abs() <= 1e-10 * (1.0 + w2.abs()), "n={n}: {pair} vs {w2}");
            checked += 1;
        }
        assert!(checked > 300);
    }

    #[test]
    fn oracle_pairs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut checked = 0;
        for trial in 0..90 {
            let n = 1 + trial % 3;
            let omega = rand_herm(&mut rng, n, 0.3).add(&HermitianMatrix::identity(n).scale(1.5));
            let alpha = rand_herm(&mut rng, n, 1.5);
            let lam = crate::pencil::pencil_eigenvalues(&alpha, &omega).unwrap();
            let th = crate::pencil::phase(&lam) + rng.gen_range(-1.2..1.2);
            let (a, b) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
            let h = rand_herm(&mut rng, n, 1.0);
            for pair in pointwise_oracle_pairs(&omega, &alpha, th, &a, &b, &h).unwrap() {
                assert!(pair.relative_gap() < 1e-10, "n={n}: {pair:?}");
            }
            checked += 1;
        }
        assert_eq!(checked, 90);
        let id = HermitianMatrix::identity(1);
        assert!(pointwise_oracle_pairs(&id, &id, 2.5, &[C64::new(1.0, 0.0)], &[C64::new(1.0, 0.0)], &id).is_err());
    }

    #[test]
    fn covariant_derivative_examples() {
        let bg = n1_background(16);
        let g = *bg.grid();
        let phi = ScalarField::from_fn(g, |x| 0.1 * x[0].cos());
        let psi = ScalarField::from_fn(g, |x| x[1].sin());
        let psi_dot = ScalarField::from_fn(g, |x| (x[0] + x[1]).cos());
        let zero = ScalarField::zeros(g);
        let d = covariant_derivative(&bg, &phi, &zero, &psi, &psi_dot).unwrap();
        assert_eq!(d.values(), psi_dot.values());
        let d = covariant_derivative(&bg, &phi, &psi, &ScalarField::constant(g, 2.0), &zero).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tensor_vanishes_on_constants_and_is_antisymmetric() {
        let bg = n2_background(8);
        let g = *bg.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = trig_field(g, &mut rng, 3, 1, 0.1);
        let psi = trig_field(g, &mut rng, 3, 2, 1.0);
        let eta = trig_field(g, &mut rng, 3, 2, 1.0);
        let zeta = trig_field(g, &mut rng, 3, 2, 1.0);
        let f = TwoParamFamily::new(phi.clone(), psi.clone(), eta.clone()).unwrap();
        let r = curvature_tensor(&bg, &f, &ScalarField::constant(g, 1.3)).unwrap();
        assert!(r.sup_norm() < 1e-13);
        let rev = TwoParamFamily::new(phi, eta, psi).unwrap();
        let a = curvature_tensor(&bg, &f, &zeta).unwrap();
        let b = curvature_tensor(&bg, &rev, &zeta).unwrap();
        let gap = a.values().iter().zip(b.values()).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-12 * (1.0 + a.sup_norm()), "{gap}");
    }

    #[test]
    fn closed_form_matches_commutator() {
        for bg in [n1_background(16), n2_background(8)] {
            let g = *bg.grid();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let phi = trig_field(g, &mut rng, 3, 1, 0.1);
            let psi = trig_field(g, &mut rng, 3, 2, 0.5);
            let eta = trig_field(g, &mut rng, 3, 2, 0.5);
            let zeta = trig_field(g, &mut rng, 3, 2, 0.5);
            let f = TwoParamFamily::new(phi, psi, eta).unwrap();
            let a = curvature_tensor(&bg, &f, &zeta).unwrap();
            let b = curvature_commutator(&bg, &f, &zeta).unwrap();
            let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den: f64 = a.values().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(den > 1e-6);
            assert!(num / den < 1e-5, "relative {}", num / den);
        }
    }

    #[test]
    fn torsion_free_on_affine_family() {
        let bg = n2_background(8);
        let g = *bg.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = TwoParamFamily::new(
            trig_field(g, &mut rng, 2, 1, 0.1),
            trig_field(g, &mut rng, 3, 2, 1.0),
            trig_field(g, &mut rng, 3, 2, 1.0),
        )
        .unwrap();
        assert_eq!(torsion_defect(&bg, &f).unwrap(), 0.0);
    }

    #[test]
    fn metric_compatibility_converges() {
        let defect = |points: usize, delta: f64| {
            let bg = n1_background(points);
            let g = *bg.grid();
            let phi = ScalarField::from_fn(g, |x| 0.1 * x[0].sin() * x[1].cos());
            let a = ScalarField::from_fn(g, |x| 0.2 * (x[0] + 0.5).cos() + 0.1 * (x[1] - x[0]).sin());
            let b = ScalarField::from_fn(g, |x| 0.1 * (x[1] + 1.0).sin());
            let u = ScalarField::from_fn(g, |x| 1.0 + x[0].cos() + 0.5 * (x[1] + 0.3).sin());
            let v = ScalarField::from_fn(g, |x| (2.0 * x[1]).sin() + 0.2);
            let w = ScalarField::from_fn(g, |x| (x[0] - 0.7).sin() + 0.4 * (x[0] + x[1]).cos() + 0.5);
            metric_compatibility(&bg, &phi, &a, &b, &u, &v, &w, delta).unwrap()
        };
        let c = defect(32, 0.1);
        let f = defect(64, 0.05);
        assert!(c.relative() < 5e-2, "{c:?}");
        let ratio = c.defect / f.defect;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}: {c:?} {f:?}");
    }

    #[test]
    fn sectional_curvature_examples() {
        let bg = n1_background(32);
        let g = *bg.grid();
        let zero = ScalarField::zeros(g);
        let psi = ScalarField::from_fn(g, |x| x[0].sin());
        let eta = ScalarField::from_fn(g, |x| x[0].cos());
        let k = sectional_curvature(&bg, &zero, &psi, &eta).unwrap();
        // both gradients are real multiples of one covector here, so the
        // plane is flat; compare against the size of the individual terms
        let floor = k.terms_a.iter().map(|t| t.abs()).sum::<f64>() / k.denominator;
        assert!(k.route_gap < 1e-8 && k.k_route_b <= 1e-10);
        assert!((k.k_route_a - k.k_route_b).abs() <= 1e-6 * (k.k_route_b.abs() + floor));
        assert!(k.k_route_b.abs() < 1e-10);
        // η = aψ + b with affine a spans a flat plane
        let flat = psi.map(|v| 0.7 * v + 0.3);
        let k = sectional_curvature(&bg, &zero, &psi, &flat).unwrap();
        assert!(k.k_route_b.abs() < 1e-10 && k.k_route_a.abs() < 1e-10, "{k:?}");
        assert!(sectional_curvature(&bg, &zero, &psi, &psi.map(|v| 2.0 * v)).is_err());

        let bg = n2_background(8);
        let g = *bg.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi = trig_field(g, &mut rng, 3, 1, 0.1);
        let psi = trig_field(g, &mut rng, 3, 2, 1.0);
        let eta = trig_field(g, &mut rng, 3, 2, 1.0);
        let k = sectional_curvature(&bg, &phi, &psi, &eta).unwrap();
        assert!(k.k_route_b < 0.0);
        let rows = [CurvatureRow { draw: 0, k_route_a: k.k_route_a, k_route_b: k.k_route_b, denominator: k.denominator, flat: false }];
        assert!(curvature_csv(&rows).starts_with("draw id,K_route_a,K_route_b,denominator,flat_flag\n0,"));
    }

    #[test]
    fn tensor_numerator_converges_to_closed_form() {
        // the closed form integrates by parts, which holds on the grid only
        // up to O(h²)
        let gap = |points: usize| {
            let bg = n1_background(points);
            let g = *bg.grid();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let phi = trig_field(g, &mut rng, 3, 1, 0.1);
            let psi = trig_field(g, &mut rng, 3, 1, 1.0);
            let eta = trig_field(g, &mut rng, 3, 1, 1.0);
            let k = sectional_curvature(&bg, &phi, &psi, &eta).unwrap();
            (numerator_from_tensor(&bg, &phi, &psi, &eta).unwrap() - k.numerator_b).abs()
        };
        let ratio = gap(32) / gap(64);
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }
}
