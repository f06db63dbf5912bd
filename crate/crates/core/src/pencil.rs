//! Pointwise algebra of the Hermitian pencil (ω, α).
//!
//! Everything here acts on a single point of the torus. Gradients passed to
//! [`q_integrand`] and [`curvature_integrand`] are expressed in a frame where
//! ω is the identity and α is diagonal with entries `lambdas`; use
//! [`OmegaFrame`] and [`PencilPoint`] to get there from coordinates.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, SmallMat, C64, MAX_DIM};

/// Cholesky data of the flat Kähler form ω.
#[derive(Clone, Copy, Debug)]
pub struct OmegaFrame {
    omega: HermitianMatrix,
    linv: SmallMat,
    det: f64,
}

impl OmegaFrame {
    pub fn new(omega: &HermitianMatrix) -> Result<Self> {
        let l = omega.cholesky()?;
        let linv = l.lower_triangular_inverse();
        let mut det = 1.0;
        for i in 0..omega.dim() {
            det *= l.get(i, i).re * l.get(i, i).re;
        }
        Ok(OmegaFrame { omega: *omega, linv, det })
    }

    pub fn omega(&self) -> &HermitianMatrix {
        &self.omega
    }

    /// `L^{-1}` where `ω = L L^*`.
    pub fn linv(&self) -> &SmallMat {
        &self.linv
    }

    /// `det ω`, the density of ω^n against the coordinate measure.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// `L^{-1} α L^{-*}`: α in an ω-orthonormal frame.
    pub fn reduce(&self, alpha: &HermitianMatrix) -> HermitianMatrix {
        self.linv.congruence(alpha)
    }
}

/// Eigen-frame of the pencil at one point.
///
/// `to_eigen` maps coordinate (1,0)-covectors `∂_j f` to their components in
/// the frame where ω = I and α = diag(λ).
#[derive(Clone, Copy, Debug)]
pub struct PencilPoint {
    pub dim: usize,
    pub lambdas: [f64; MAX_DIM],
    pub to_eigen: SmallMat,
}

impl PencilPoint {
    pub fn new(frame: &OmegaFrame, alpha: &HermitianMatrix) -> Self {
        let e = frame.reduce(alpha).eigh();
        PencilPoint {
            dim: e.dim,
            lambdas: e.values,
            to_eigen: e.vectors.adjoint().mul(frame.linv()),
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas[..self.dim]
    }

    pub fn covector(&self, grad: &[C64]) -> [C64; MAX_DIM] {
        self.to_eigen.mul_vec(grad)
    }
}

/// Eigenvalues of ω^{-1}α in descending order.
pub fn pencil_eigenvalues(alpha: &HermitianMatrix, omega: &HermitianMatrix) -> Result<Vec<f64>> {
    if alpha.dim() != omega.dim() {
        return Err(Error::Domain(format!(
            "alpha is {0}x{0} but omega is {1}x{1}",
            alpha.dim(),
            omega.dim()
        )));
    }
    let frame = OmegaFrame::new(omega)?;
    Ok(frame.reduce(alpha).eigh().values().to_vec())
}

/// Lagrangian phase `Σ arctan λ_i` (principal branch of each term).
pub fn phase(lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|l| l.atan()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePointData {
    pub lambdas: Vec<f64>,
    pub theta: f64,
    pub radius: f64,
}

pub fn phase_point(lambdas: &[f64]) -> PhasePointData {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    PhasePointData { theta: phase(&sorted), radius: radius(&sorted), lambdas: sorted }
}

/// `Π √(1+λ_i²)`.
pub fn radius(lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|l| 1f64.hypot(*l)).product()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationData {
    pub theta_hat: f64,
    pub real_part: f64,
    pub imag_part: f64,
    /// `tan(Θ − θ̂)`, present only when the real part is positive.
    pub tangent: Option<f64>,
}

pub fn calibrated_volume(lambdas: &[f64], theta_hat: f64) -> CalibrationData {
    let r = radius(lambdas);
    let d = phase(lambdas) - theta_hat;
    let real_part = r * d.cos();
    let imag_part = r * d.sin();
    CalibrationData {
        theta_hat,
        real_part,
        imag_part,
        tangent: (real_part > 0.0).then(|| d.tan()),
    }
}

fn tangent_or_err(lambdas: &[f64], theta_hat: f64) -> Result<f64> {
    let cal = calibrated_volume(lambdas, theta_hat);
    cal.tangent.ok_or_else(|| {
        Error::Domain(format!(
            "calibration violated: real part {:e} at phase offset {:e}",
            cal.real_part,
            phase(lambdas) - theta_hat
        ))
    })
}

#[inline]
fn re_prod(a: C64, b: C64) -> f64 {
    // Re(a · conj b), symmetric in (a, b) bit-for-bit.
    a.re * b.re + a.im * b.im
}

/// Connection integrand `Σ_i (T − λ_i) Re(∂_iψ ∂_īη)/(1+λ_i²)` with
/// `T = tan(Θ − θ̂)`.
pub fn q_integrand(lambdas: &[f64], theta_hat: f64, grad_psi: &[C64], grad_eta: &[C64]) -> Result<f64> {
    let t = tangent_or_err(lambdas, theta_hat)?;
    Ok(q_with_tangent(lambdas, t, grad_psi, grad_eta))
}

pub(crate) fn q_with_tangent(lambdas: &[f64], t: f64, grad_psi: &[C64], grad_eta: &[C64]) -> f64 {
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| (t - l) * re_prod(grad_psi[i], grad_eta[i]) / (1.0 + l * l))
        .sum()
}

/// The three lines of the diagonalized sectional-curvature integrand, each
/// evaluated in its expanded double-sum form.
pub fn curvature_integrand_lines(
    lambdas: &[f64],
    theta_hat: f64,
    grad_psi: &[C64],
    grad_eta: &[C64],
) -> Result<[f64; 3]> {
    let t = tangent_or_err(lambdas, theta_hat)?;
    let n = lambdas.len();
    let sec2 = 1.0 + t * t;
    let (mut l1, mut l2, mut l3) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let wi = 1.0 + lambdas[i] * lambdas[i];
        let pe_i = grad_psi[i] * grad_eta[i].conj();
        for j in 0..n {
            let wj = 1.0 + lambdas[j] * lambdas[j];
            let w = wi * wj;
            let pe_j = grad_psi[j] * grad_eta[j].conj();
            l1 += grad_psi[i].norm_sqr() * grad_eta[j].norm_sqr() / w;
            // Re(∂_jψ ∂_j̄η ∂_iη ∂_īψ)
            l2 += (pe_j * pe_i.conj()).re / w;
            l3 += (t - lambdas[i]) * (t - lambdas[j]) * pe_j.im * pe_i.im / w;
        }
    }
    Ok([-sec2 * l1, sec2 * l2, -l3])
}

/// Pointwise integrand of `⟨R(ψ,η)η,ψ⟩` against `Re(e^{-iθ̂}Ω^n)`.
pub fn curvature_integrand(lambdas: &[f64], theta_hat: f64, grad_psi: &[C64], grad_eta: &[C64]) -> Result<f64> {
    let l = curvature_integrand_lines(lambdas, theta_hat, grad_psi, grad_eta)?;
    Ok(l[0] + l[1] + l[2])
}

/// The square whose negative is the third curvature line.
pub fn curvature_third_line_root(lambdas: &[f64], theta_hat: f64, grad_psi: &[C64], grad_eta: &[C64]) -> Result<f64> {
    let t = tangent_or_err(lambdas, theta_hat)?;
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| (t - l) * (grad_psi[i] * grad_eta[i].conj()).im / (1.0 + l * l))
        .sum())
}

/// Which eigenvalue properties of the rescaled augmented pencil hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagrangianReport {
    pub hypothesis_met: bool,
    /// All but the last eigenvalue positive, last two sum non-negative.
    pub positivity: bool,
    /// Second-to-last ≥ tan(η/2) and last ≥ −cot η.
    pub lower_bounds: bool,
    /// If the last eigenvalue is negative: second-to-last ≥ tan(η₁) and
    /// Σ 1/μ < −tan(η₁), with η₁ = η/2.
    pub negative_tail: bool,
}

impl LagrangianReport {
    pub fn all_hold(&self) -> bool {
        self.hypothesis_met && self.positivity && self.lower_bounds && self.negative_tail
    }
}

/// Checks the eigenvalue properties enjoyed by a list `μ` (any order) with
/// `Σ arctan μ ≥ (N−2)π/2 + η`, where `N = mus.len()`.
pub fn lagrangian_property_check(mus: &[f64], eta: f64) -> LagrangianReport {
    let mut mu = mus.to_vec();
    mu.sort_by(|a, b| b.total_cmp(a));
    let n = mu.len();
    let hypothesis_met = n >= 1 && eta > 0.0 && eta < FRAC_PI_2 && phase(&mu) >= (n as f64 - 2.0) * FRAC_PI_2 + eta;
    if !hypothesis_met {
        return LagrangianReport { hypothesis_met: false, positivity: false, lower_bounds: false, negative_tail: false };
    }
    if n == 1 {
        // Single eigenvalue: arctan μ ≥ η − π/2 bounds it below by −cot η.
        let ok = mu[0] >= -1.0 / eta.tan();
        return LagrangianReport { hypothesis_met, positivity: true, lower_bounds: ok, negative_tail: true };
    }
    let last = mu[n - 1];
    let second = mu[n - 2];
    let positivity = mu[..n - 1].iter().all(|&m| m > 0.0) && second + last >= 0.0;
    let lower_bounds = second >= (eta / 2.0).tan() && last >= -1.0 / eta.tan();
    let eta1 = eta / 2.0;
    let negative_tail = if last < 0.0 {
        let inv_sum: f64 = mu.iter().map(|m| 1.0 / m).sum();
        second >= eta1.tan() && inv_sum < -eta1.tan()
    } else {
        true
    };
    LagrangianReport { hypothesis_met, positivity, lower_bounds, negative_tail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn diagonal_and_zero_pencils() {
        let om = HermitianMatrix::identity(2);
        assert_eq!(pencil_eigenvalues(&HermitianMatrix::diagonal(&[1.0, 2.0]), &om).unwrap(), vec![2.0, 1.0]);
        let mut om3 = HermitianMatrix::diagonal(&[2.0, 1.0, 3.0]);
        om3.set(0, 1, C64::new(0.3, 0.4));
        let z = pencil_eigenvalues(&HermitianMatrix::zeros(3), &om3).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pencil_rejects_indefinite_omega() {
        let err = pencil_eigenvalues(&HermitianMatrix::identity(2), &HermitianMatrix::diagonal(&[1.0, -2.0]))
            .unwrap_err()
            .to_string();
        assert!(err.contains("smallest eigenvalue -2e0"), "{err}");
    }

    #[test]
    fn phase_values() {
        assert_eq!(phase(&[1.0]), FRAC_PI_4);
        assert!((phase(&[1.0, 1.0]) - PI / 2.0).abs() < 1e-16);
        assert!((phase(&[1.0, 2.0]) - 1.892_546_881_191_538_7).abs() < 1e-15);
    }

    #[test]
    fn calibrated_volume_examples() {
        let c = calibrated_volume(&[1.0, 1.0], PI / 2.0);
        assert!((c.real_part - 2.0).abs() < 1e-14 && c.imag_part.abs() < 1e-14);
        let c = calibrated_volume(&[0.0, 0.0, 0.0], 0.0);
        assert_eq!((c.real_part, c.imag_part), (1.0, 0.0));
        // Exact Gaussian-integer expansion of Π(1 + iλ) for integer λ.
        let exact = [1i64, 2, 3].iter().fold((1i64, 0i64), |(a, b), &l| (a - b * l, a * l + b));
        assert_eq!(exact, (-10, 0));
        let c = calibrated_volume(&[1.0, 2.0, 3.0], 0.0);
        assert!((c.real_part - exact.0 as f64).abs() < 1e-12, "{}", c.real_part);
        assert!((c.imag_part - exact.1 as f64).abs() < 1e-12);
        assert!(c.tangent.is_none());
    }

    #[test]
    fn q_examples() {
        let e1 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let zero = [C64::new(0.0, 0.0); 2];
        let lam = [0.7, 1.3];
        let th = phase(&lam);
        assert_eq!(q_integrand(&lam, th, &e1, &zero).unwrap(), 0.0);
        let q = q_integrand(&lam, th, &e1, &e1).unwrap();
        assert!((q + 0.7 / (1.0 + 0.49)).abs() < 1e-15);
        assert!(q_integrand(&lam, th + 2.0, &e1, &e1).is_err());
    }

    #[test]
    fn curvature_degenerate_planes_vanish() {
        let lam = [0.4, 2.0];
        let th = phase(&lam) - 0.3;
        let g = [C64::new(0.3, -1.2), C64::new(0.8, 0.1)];
        let z = [C64::new(0.0, 0.0); 2];
        assert_eq!(curvature_integrand(&lam, th, &g, &z).unwrap(), 0.0);
        assert!(curvature_integrand(&lam, th, &g, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn lagrangian_examples() {
        let r = lagrangian_property_check(&[10.0], 0.1);
        assert!(r.all_hold());
        let t80 = (80f64).to_radians().tan();
        let r = lagrangian_property_check(&[t80, t80], 70f64.to_radians());
        assert!(r.hypothesis_met && r.lower_bounds && r.all_hold());
        let r = lagrangian_property_check(&[0.1, 0.1], 0.5);
        assert!(!r.hypothesis_met);
    }
}
