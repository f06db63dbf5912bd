//! Space-time residual of the rescaled phase equation and its Jacobian.
//!
//! Unknowns live on the interior slices `k = 1..m−1`; vectors of length
//! `(m−2)·P` index slice `k` at offset `(k−1)·P`. The boundary slices are
//! Dirichlet data and never move.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Stencil, MAX_FIELD_DIM};
use crate::linalg::{HermitianMatrix, C64};
use crate::space::{Background, PathField};

/// Linearization weights at one space-time point. The Jacobian applied to a
/// direction `d` there is
///
/// `Σ_{jl} G_jl ∂_l∂̄_j d_k + 2 Re Σ_j v_j ∂_j(d_{k+1} − d_{k−1}) + w (d_{k+1} − 2d_k + d_{k−1})`
///
/// with the time-step factors already folded into `v` and `w`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PointCoeff {
    /// `G_00`, `G_11`, `Re G_01`, `Im G_01`.
    pub g: [f64; 4],
    pub v: [C64; MAX_FIELD_DIM],
    pub w: f64,
}

pub(crate) struct Assembly {
    pub residual: Vec<f64>,
    pub coeffs: Vec<PointCoeff>,
}

pub(crate) struct SpaceTime<'a> {
    pub bg: &'a Background,
    pub stencil: &'a Stencil,
    pub epsilon: f64,
    pub steps: usize,
}

impl<'a> SpaceTime<'a> {
    pub fn points(&self) -> usize {
        self.stencil.grid().len()
    }

    pub fn unknowns(&self) -> usize {
        (self.steps - 2) * self.points()
    }

    fn dt(&self) -> f64 {
        1.0 / (self.steps - 1) as f64
    }

    /// `(n+1)×(n+1)` augmented matrix in the ω̂_ε-orthonormal frame at an
    /// interior slice.
    pub fn augmented(&self, path: &[f64], k: usize, idx: usize) -> HermitianMatrix {
        let p = self.points();
        let n = self.bg.complex_dim();
        let (prev, cur, next) = (&path[(k - 1) * p..k * p], &path[k * p..(k + 1) * p], &path[(k + 1) * p..(k + 2) * p]);
        let dt = self.dt();
        let es = (k as f64 * dt).exp();
        let frame = self.bg.pencil().frame();
        let alpha = self.bg.pencil().alpha_at(idx).add(&self.stencil.hessian_at(cur, idx));
        let spatial = frame.reduce(&alpha);
        let gp = self.stencil.gradient_at(next, idx);
        let gm = self.stencil.gradient_at(prev, idx);
        let scale = es / (2.0 * self.epsilon) / (2.0 * dt);
        let mut b = [C64::new(0.0, 0.0); MAX_FIELD_DIM];
        for j in 0..n {
            b[j] = (gp[j] - gm[j]) * scale;
        }
        let mixed = frame.linv().mul_vec(&b[..n]);
        let corner = es * es * (next[idx] - 2.0 * cur[idx] + prev[idx]) / (dt * dt) / (4.0 * self.epsilon * self.epsilon);
        let mut m = HermitianMatrix::zeros(n + 1);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, spatial.get(i, j));
            }
            m.set(i, n, mixed[i]);
        }
        m.set(n, n, C64::new(corner, 0.0));
        m
    }

    fn point(&self, path: &[f64], k: usize, idx: usize, want: bool) -> Result<(f64, PointCoeff)> {
        let n = self.bg.complex_dim();
        let m = self.augmented(path, k, idx);
        let r = m.arctan_trace() - self.bg.theta_hat();
        if !r.is_finite() {
            let x = self.stencil.grid().coords(idx);
            return Err(Error::Numeric(format!(
                "phase evaluation failed at slice {k}, point {idx} (coords {:?})",
                &x[..2 * n]
            )));
        }
        if !want {
            return Ok((r, PointCoeff::default()));
        }
        let f = m.arctan_weights();
        let linv = self.bg.pencil().frame().linv();
        let dt = self.dt();
        let es = (k as f64 * dt).exp();
        // G = L^{-*} F_ss L^{-1}
        let mut g = [[C64::new(0.0, 0.0); MAX_FIELD_DIM]; MAX_FIELD_DIM];
        for j in 0..n {
            for l in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..n {
                    for bb in 0..n {
                        acc += linv.get(a, j).conj() * f.get(a, bb) * linv.get(bb, l);
                    }
                }
                g[j][l] = acc;
            }
        }
        let vscale = es / (2.0 * self.epsilon) / (2.0 * dt);
        let mut v = [C64::new(0.0, 0.0); MAX_FIELD_DIM];
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += f.get(n, i) * linv.get(i, j);
            }
            v[j] = acc * vscale;
        }
        let w = f.get(n, n).re * es * es / (4.0 * self.epsilon * self.epsilon) / (dt * dt);
        let gg = if n == 2 { [g[0][0].re, g[1][1].re, g[0][1].re, g[0][1].im] } else { [g[0][0].re, 0.0, 0.0, 0.0] };
        Ok((r, PointCoeff { g: gg, v, w }))
    }

    /// Residual on interior slices, optionally with linearization weights.
    pub fn assemble(&self, path: &PathField, want_coeffs: bool) -> Result<Assembly> {
        let p = self.points();
        let data = path.data();
        let slices: Vec<Result<(Vec<f64>, Vec<PointCoeff>)>> = (1..self.steps - 1)
            .into_par_iter()
            .map(|k| {
                let mut r = Vec::with_capacity(p);
                let mut c = Vec::with_capacity(if want_coeffs { p } else { 0 });
                for idx in 0..p {
                    let (ri, ci) = self.point(data, k, idx, want_coeffs)?;
                    r.push(ri);
                    if want_coeffs {
                        c.push(ci);
                    }
                }
                Ok((r, c))
            })
            .collect();
        let mut residual = Vec::with_capacity(self.unknowns());
        let mut coeffs = Vec::with_capacity(if want_coeffs { self.unknowns() } else { 0 });
        for s in slices {
            let (r, c) = s?;
            residual.extend(r);
            coeffs.extend(c);
        }
        Ok(Assembly { residual, coeffs })
    }

    /// Matrix-free Jacobian product on interior unknowns.
    pub fn apply(&self, coeffs: &[PointCoeff], d: &[f64], out: &mut [f64]) {
        let p = self.points();
        let inner = self.steps - 2;
        let n = self.bg.complex_dim();
        let zero = vec![0.0; p];
        let slice = |j: usize| -> &[f64] {
            // j indexes interior slices 0..inner; anything else is Dirichlet zero
            if j < inner {
                &d[j * p..(j + 1) * p]
            } else {
                &zero
            }
        };
        out.par_chunks_mut(p).enumerate().for_each(|(j, o)| {
            let cur = slice(j);
            let prev = if j == 0 { &zero[..] } else { slice(j - 1) };
            let next = slice(j + 1);
            let cs = &coeffs[j * p..(j + 1) * p];
            for idx in 0..p {
                let c = &cs[idx];
                let h = self.stencil.hessian_at(cur, idx);
                let mut val = c.g[0] * h.get(0, 0).re;
                if n == 2 {
                    let g01 = C64::new(c.g[2], c.g[3]);
                    val += c.g[1] * h.get(1, 1).re + 2.0 * (g01 * h.get(1, 0)).re;
                }
                let gp = self.stencil.gradient_at(next, idx);
                let gm = self.stencil.gradient_at(prev, idx);
                let mut mix = C64::new(0.0, 0.0);
                for a in 0..n {
                    mix += c.v[a] * (gp[a] - gm[a]);
                }
                val += 2.0 * mix.re;
                val += c.w * (next[idx] - 2.0 * cur[idx] + prev[idx]);
                o[idx] = val;
            }
        });
    }
}
