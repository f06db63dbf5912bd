//! Frozen-coefficient preconditioner: per interior slice the Jacobian weights
//! are averaged over space, which makes each slice operator diagonal in
//! Fourier space; the remaining coupling in t is a complex tridiagonal
//! system per mode, solved by the Thomas algorithm.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::operator::PointCoeff;
use crate::grid::{TorusGrid, MAX_FIELD_DIM};
use crate::linalg::C64;

pub(crate) struct Preconditioner {
    grid: TorusGrid,
    inner: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Per interior slice: lower, diagonal and upper symbols of every mode.
    lower: Vec<Vec<C64>>,
    diag: Vec<Vec<C64>>,
    upper: Vec<Vec<C64>>,
}

fn fft_axes(grid: &TorusGrid, fft: &Arc<dyn Fft<f64>>, buf: &mut [C64]) {
    let n = grid.points_per_axis();
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // the fastest axis is contiguous: one batched call
    fft.process_with_scratch(buf, &mut scratch);
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..grid.real_axes() - 1 {
        let stride = grid.stride(axis);
        for block in (0..buf.len()).step_by(n * stride) {
            for start in block..block + stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = buf[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, l) in line.iter().enumerate() {
                    buf[start + i * stride] = *l;
                }
            }
        }
    }
}

impl Preconditioner {
    pub fn new(grid: TorusGrid, steps: usize, coeffs: &[PointCoeff]) -> Self {
        let p = grid.len();
        let inner = steps - 2;
        let n = grid.complex_dim();
        let pts = grid.points_per_axis();
        let h = grid.spacing();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(pts);
        let inverse = planner.plan_fft_inverse(pts);

        // mode-dependent symbols, shared by all slices
        let sin_t: Vec<f64> = (0..pts).map(|q| (std::f64::consts::TAU * q as f64 / pts as f64).sin()).collect();
        let cos_t: Vec<f64> = (0..pts).map(|q| (std::f64::consts::TAU * q as f64 / pts as f64).cos()).collect();
        let mut hsym = Vec::with_capacity(p);
        let mut gam = Vec::with_capacity(p);
        for mode in 0..p {
            let dg = grid.digits(mode);
            let sigma: Vec<C64> = (0..2 * n).map(|a| C64::new(0.0, sin_t[dg[a]] / h)).collect();
            let dd = |a: usize, b: usize| -> C64 {
                if a == b {
                    C64::new((2.0 * cos_t[dg[a]] - 2.0) / (h * h), 0.0)
                } else {
                    sigma[a] * sigma[b]
                }
            };
            // symbol of ∂_l ∂̄_j, stored at [l][j]
            let mut hs = [[C64::new(0.0, 0.0); MAX_FIELD_DIM]; MAX_FIELD_DIM];
            for l in 0..n {
                for j in 0..n {
                    let (xl, yl, xj, yj) = (2 * l, 2 * l + 1, 2 * j, 2 * j + 1);
                    hs[l][j] = 0.25 * ((dd(xl, xj) + dd(yl, yj)) + C64::i() * (dd(xl, yj) - dd(yl, xj)));
                }
            }
            let mut gm = [[C64::new(0.0, 0.0); 2]; MAX_FIELD_DIM];
            for j in 0..n {
                let (sx, sy) = (sigma[2 * j], sigma[2 * j + 1]);
                gm[j] = [0.5 * (sx - C64::i() * sy), 0.5 * (sx + C64::i() * sy)];
            }
            hsym.push(hs);
            gam.push(gm);
        }

        let mut lower = Vec::with_capacity(inner);
        let mut diag = Vec::with_capacity(inner);
        let mut upper = Vec::with_capacity(inner);
        for j in 0..inner {
            let cs = &coeffs[j * p..(j + 1) * p];
            let mut g = [0.0; 4];
            let mut v = [C64::new(0.0, 0.0); MAX_FIELD_DIM];
            let mut w = 0.0;
            for c in cs {
                for a in 0..4 {
                    g[a] += c.g[a];
                }
                for a in 0..n {
                    v[a] += c.v[a];
                }
                w += c.w;
            }
            let inv = 1.0 / p as f64;
            g.iter_mut().for_each(|x| *x *= inv);
            v.iter_mut().for_each(|x| *x *= inv);
            w *= inv;
            let gmat = [[C64::new(g[0], 0.0), C64::new(g[2], g[3])], [C64::new(g[2], -g[3]), C64::new(g[1], 0.0)]];
            let (mut lo, mut di, mut up) = (Vec::with_capacity(p), Vec::with_capacity(p), Vec::with_capacity(p));
            for mode in 0..p {
                let mut s = C64::new(0.0, 0.0);
                for jj in 0..n {
                    for l in 0..n {
                        s += gmat[jj][l] * hsym[mode][l][jj];
                    }
                }
                let mut mu = C64::new(0.0, 0.0);
                for a in 0..n {
                    mu += v[a] * gam[mode][a][0] + v[a].conj() * gam[mode][a][1];
                }
                lo.push(w - mu);
                di.push(s - 2.0 * w);
                up.push(w + mu);
            }
            lower.push(lo);
            diag.push(di);
            upper.push(up);
        }
        Preconditioner { grid, inner, forward, inverse, lower, diag, upper }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let p = self.grid.len();
        let mut spec: Vec<Vec<C64>> = (0..self.inner)
            .map(|j| {
                let mut buf: Vec<C64> = r[j * p..(j + 1) * p].iter().map(|&x| C64::new(x, 0.0)).collect();
                fft_axes(&self.grid, &self.forward, &mut buf);
                buf
            })
            .collect();
        let mut cp = vec![C64::new(0.0, 0.0); self.inner];
        for mode in 0..p {
            // Thomas algorithm along t
            let mut prev_c = C64::new(0.0, 0.0);
            let mut prev_d = C64::new(0.0, 0.0);
            for j in 0..self.inner {
                let a = if j == 0 { C64::new(0.0, 0.0) } else { self.lower[j][mode] };
                let b = self.diag[j][mode];
                let c = self.upper[j][mode];
                let mut denom = b - a * prev_c;
                if denom.norm() < 1e-300 {
                    denom = C64::new(1.0, 0.0);
                }
                prev_c = c / denom;
                prev_d = (spec[j][mode] - a * prev_d) / denom;
                cp[j] = prev_c;
                spec[j][mode] = prev_d;
            }
            for j in (0..self.inner.saturating_sub(1)).rev() {
                let next = spec[j + 1][mode];
                spec[j][mode] -= cp[j] * next;
            }
        }
        let scale = 1.0 / p as f64;
        for (j, mut buf) in spec.into_iter().enumerate() {
            fft_axes(&self.grid, &self.inverse, &mut buf);
            for (o, v) in z[j * p..(j + 1) * p].iter_mut().zip(&buf) {
                *o = v.re * scale;
            }
        }
    }
}
