//! Brute-force evaluation of top-degree wedge products of (1,1)-forms.
//!
//! A product `A_1 ∧ … ∧ A_n` of (1,1)-forms with coefficient matrices `A_k`
//! equals `Σ_{σ,τ} sgn σ sgn τ Π_k A_k[σ(k), τ(k)]` times the coordinate
//! volume element, and `ω^n` is `n! det ω` times the same element. No
//! eigenvalues are used anywhere in this module, which is the point: it
//! independently checks the diagonalized formulas in [`crate::pencil`].

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, SmallMat, C64};

/// Permutations of `0..n` with their signs, in lexicographic order.
fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if p[i] > p[j] {
                        inversions += 1;
                    }
                }
            }
            (p, if inversions % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

fn permutation_table() -> &'static [Vec<(Vec<usize>, f64)>; 4] {
    static TABLE: OnceLock<[Vec<(Vec<usize>, f64)>; 4]> = OnceLock::new();
    TABLE.get_or_init(|| [permutations(0), permutations(1), permutations(2), permutations(3)])
}

/// `e^{-iθ̂} · (forms ∧ pairs ∧ Ω^{n−k}) / ω^n` where `Ω = ω + iα` fills the
/// remaining slots.
///
/// Each entry `(u, v)` of `pairs` contributes the form `i ∂u ∧ ∂̄v`, whose
/// coefficient matrix is `u v^*`.
pub fn wedge_oracle(
    omega: &HermitianMatrix,
    alpha: &HermitianMatrix,
    forms: &[HermitianMatrix],
    pairs: &[(Vec<C64>, Vec<C64>)],
    theta_hat: f64,
) -> Result<C64> {
    let n = omega.dim();
    if n > 3 {
        return Err(Error::Domain(format!("wedge oracle supports n <= 3, got n = {n}")));
    }
    if alpha.dim() != n {
        return Err(Error::Domain("alpha and omega dimensions differ".into()));
    }
    let degree = forms.len() + pairs.len();
    if degree > n {
        return Err(Error::Domain(format!(
            "degree mismatch: {degree} (1,1)-factors exceed complex dimension {n}"
        )));
    }
    let mut factors: Vec<SmallMat> = Vec::with_capacity(n);
    for f in forms {
        if f.dim() != n {
            return Err(Error::Domain("form dimension differs from omega".into()));
        }
        factors.push(f.as_mat());
    }
    for (u, v) in pairs {
        if u.len() != n || v.len() != n {
            return Err(Error::Domain("one-form length differs from omega".into()));
        }
        factors.push(SmallMat::outer(u, v));
    }
    let big_omega = omega.as_mat().add(&alpha.as_mat().scale(C64::new(0.0, 1.0)));
    while factors.len() < n {
        factors.push(big_omega);
    }
    let perms = &permutation_table()[n];
    let mut sum = C64::new(0.0, 0.0);
    for (s, ss) in perms {
        for (t, ts) in perms {
            let mut prod = C64::new(ss * ts, 0.0);
            for k in 0..n {
                prod *= factors[k].get(s[k], t[k]);
            }
            sum += prod;
        }
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let det = omega.determinant();
    Ok(sum / (factorial * det) * Complex64::from_polar(1.0, -theta_hat))
}

/// `Re(e^{-iθ̂} Ω^n / ω^n)`, the calibrated volume density ratio.
fn calibrated_ratio(omega: &HermitianMatrix, alpha: &HermitianMatrix, theta_hat: f64) -> Result<C64> {
    wedge_oracle(omega, alpha, &[], &[], theta_hat)
}

/// Connection integrand assembled from wedge products:
/// `(n/2)(i∂ψ∧∂̄η + i∂η∧∂̄ψ) ∧ Im(e^{-iθ̂}Ω^{n−1}) / Re(e^{-iθ̂}Ω^n)`.
pub fn q_by_wedges(
    omega: &HermitianMatrix,
    alpha: &HermitianMatrix,
    grad_psi: &[C64],
    grad_eta: &[C64],
    theta_hat: f64,
) -> Result<f64> {
    let n = omega.dim() as f64;
    let w = calibrated_ratio(omega, alpha, theta_hat)?.re;
    if !(w > 0.0) {
        return Err(Error::Domain(format!("calibrated real part {w:e} is not positive")));
    }
    let a = wedge_oracle(omega, alpha, &[], &[(grad_psi.to_vec(), grad_eta.to_vec())], theta_hat)?;
    let b = wedge_oracle(omega, alpha, &[], &[(grad_eta.to_vec(), grad_psi.to_vec())], theta_hat)?;
    Ok(0.5 * n * (a.im + b.im) / w)
}

/// Terms of the sectional-curvature integrand (divided by the calibrated
/// volume ratio) computed from wedge products:
/// `[−n(n−1) i∂ψ∧∂̄ψ∧i∂η∧∂̄η∧Re(e^{-iθ̂}Ω^{n−2}) / Re(e^{-iθ̂}Ω^n),
///   −Q(ψ,ψ)Q(η,η), Q(ψ,η)²]`.
pub fn curvature_terms_by_wedges(
    omega: &HermitianMatrix,
    alpha: &HermitianMatrix,
    grad_psi: &[C64],
    grad_eta: &[C64],
    theta_hat: f64,
) -> Result<[f64; 3]> {
    let n = omega.dim();
    let w = calibrated_ratio(omega, alpha, theta_hat)?.re;
    if !(w > 0.0) {
        return Err(Error::Domain(format!("calibrated real part {w:e} is not positive")));
    }
    let four = if n >= 2 {
        let p = grad_psi.to_vec();
        let e = grad_eta.to_vec();
        wedge_oracle(omega, alpha, &[], &[(p.clone(), p), (e.clone(), e)], theta_hat)?.re
    } else {
        0.0
    };
    let qpp = q_by_wedges(omega, alpha, grad_psi, grad_psi, theta_hat)?;
    let qee = q_by_wedges(omega, alpha, grad_eta, grad_eta, theta_hat)?;
    let qpe = q_by_wedges(omega, alpha, grad_psi, grad_eta, theta_hat)?;
    Ok([-((n * (n.saturating_sub(1))) as f64) * four / w, -qpp * qee, qpe * qpe])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn permutation_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        let total: f64 = p.iter().map(|(_, s)| s).sum();
        assert_eq!(total, 0.0);
        assert_eq!(p[1], (vec![0, 2, 1], -1.0));
    }

    #[test]
    fn top_power_of_omega_is_one() {
        for n in 1..=3 {
            let mut om = HermitianMatrix::identity(n).scale(1.5);
            if n > 1 {
                om.set(0, 1, c(0.2, -0.1));
            }
            let v = wedge_oracle(&om, &HermitianMatrix::zeros(n), &[], &[], 0.0).unwrap();
            assert!((v - c(1.0, 0.0)).norm() < 1e-14, "n={n}: {v}");
        }
    }

    #[test]
    fn diagonal_alpha_gives_product() {
        let lam = [0.5, -1.25, 2.0];
        let v = wedge_oracle(&HermitianMatrix::identity(3), &HermitianMatrix::diagonal(&lam), &[], &[], 0.0).unwrap();
        let expected = lam.iter().fold(c(1.0, 0.0), |acc, &l| acc * c(1.0, l));
        assert!((v - expected).norm() < 1e-14);
    }

    #[test]
    fn four_form_coefficient_in_dimension_two() {
        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let e2 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let om = HermitianMatrix::identity(2);
        let al = HermitianMatrix::diagonal(&[0.3, 0.9]);
        let v = wedge_oracle(&om, &al, &[], &[(e1.clone(), e1), (e2.clone(), e2)], 0.0).unwrap();
        // n(n−1) · (form) must reproduce |∂_1ψ|²|∂_2η|² = 1.
        assert!((2.0 * v - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn degree_errors() {
        let om = HermitianMatrix::identity(1);
        let g = vec![c(1.0, 0.0)];
        let e = wedge_oracle(&om, &om, &[], &[(g.clone(), g.clone()), (g.clone(), g)], 0.0);
        assert!(e.is_err());
        let om4 = HermitianMatrix::identity(4);
        assert!(wedge_oracle(&om4, &om4, &[], &[], 0.0).is_err());
    }
}
