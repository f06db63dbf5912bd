//! Periodic grids on flat tori `(ℂ/Λ)^n` and the complex difference calculus.
//!
//! Real axes are ordered `x_1, y_1, …, x_n, y_n` and values are stored
//! row-major, so `y_n` varies fastest. Holomorphic coordinate `z_j` is
//! `x_j + i y_j`.

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};

/// Largest complex dimension the field containers support.
pub const MAX_FIELD_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    n: usize,
    points: usize,
    period: f64,
}

impl TorusGrid {
    pub fn new(complex_dim: usize, points_per_axis: usize, period: f64) -> Result<Self> {
        if !(1..=MAX_FIELD_DIM).contains(&complex_dim) {
            return Err(Error::Domain(format!("complex dimension {complex_dim} not in {{1, 2}}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::Domain(format!(
                "points per axis must be an even integer >= 8, got {points_per_axis}"
            )));
        }
        if points_per_axis > 1024 {
            return Err(Error::Domain(format!("points per axis {points_per_axis} exceeds 1024")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!("period must be positive and finite, got {period}")));
        }
        Ok(TorusGrid { n: complex_dim, points: points_per_axis, period })
    }

    /// Grid with the default period 2π.
    pub fn standard(complex_dim: usize, points_per_axis: usize) -> Result<Self> {
        Self::new(complex_dim, points_per_axis, std::f64::consts::TAU)
    }

    #[inline]
    pub fn complex_dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    #[inline]
    pub fn real_axes(&self) -> usize {
        2 * self.n
    }

    /// Total number of grid points, `pointsPerAxis^(2n)`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(2 * self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^{2n}`, the quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(2 * self.n as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(2 * self.n as i32)
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((2 * self.n - 1 - axis) as u32)
    }

    /// Integer coordinates of a flat index, one per real axis.
    pub fn digits(&self, idx: usize) -> [usize; 2 * MAX_FIELD_DIM] {
        let mut d = [0; 2 * MAX_FIELD_DIM];
        let mut rest = idx;
        for axis in (0..self.real_axes()).rev() {
            d[axis] = rest % self.points;
            rest /= self.points;
        }
        d
    }

    /// Real coordinates `(x_1, y_1, …)` of a flat index.
    pub fn coords(&self, idx: usize) -> [f64; 2 * MAX_FIELD_DIM] {
        let d = self.digits(idx);
        let h = self.spacing();
        let mut x = [0.0; 2 * MAX_FIELD_DIM];
        for a in 0..self.real_axes() {
            x[a] = d[a] as f64 * h;
        }
        x
    }

    /// Neighbour of `idx` one step along `axis` (periodic).
    #[inline]
    pub fn step(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let digit = (idx / s) % self.points;
        if forward {
            if digit + 1 == self.points {
                idx + s - self.points * s
            } else {
                idx + s
            }
        } else if digit == 0 {
            idx + (self.points - 1) * s
        } else {
            idx - s
        }
    }

    fn check_len(&self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.len());
    }

    /// Central first difference along one real axis.
    #[inline]
    pub fn d1(&self, f: &[f64], idx: usize, axis: usize) -> f64 {
        d1_with(f, idx, axis, self.spacing(), |i, a, fw| self.step(i, a, fw))
    }

    /// Second difference along the real axes `a` and `b`: the three-point
    /// stencil when `a == b`, the four-corner cross stencil otherwise.
    #[inline]
    pub fn d2(&self, f: &[f64], idx: usize, a: usize, b: usize) -> f64 {
        d2_with(f, idx, a, b, self.spacing(), |i, a, fw| self.step(i, a, fw))
    }

    /// `∂_j f = ½(∂_{x_j} − i ∂_{y_j}) f` at one point.
    #[inline]
    pub fn gradient_at(&self, f: &[f64], idx: usize) -> [C64; MAX_FIELD_DIM] {
        self.check_len(f);
        gradient_with(f, idx, self.n, self.spacing(), |i, a, fw| self.step(i, a, fw))
    }

    /// `∂_j ∂_k̄ f` at one point; Hermitian by construction.
    #[inline]
    pub fn hessian_at(&self, f: &[f64], idx: usize) -> HermitianMatrix {
        self.check_len(f);
        hessian_with(f, idx, self.n, self.spacing(), |i, a, fw| self.step(i, a, fw))
    }

    /// Largest absolute entry of the real Hessian at one point.
    pub fn real_hessian_sup_at(&self, f: &[f64], idx: usize) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..self.real_axes() {
            for b in a..self.real_axes() {
                m = m.max(self.d2(f, idx, a, b).abs());
            }
        }
        m
    }

    /// Euclidean norm of the real gradient at one point.
    pub fn real_gradient_norm_at(&self, f: &[f64], idx: usize) -> f64 {
        (0..self.real_axes()).map(|a| self.d1(f, idx, a).powi(2)).sum::<f64>().sqrt()
    }
}

#[inline(always)]
fn d1_with(f: &[f64], idx: usize, axis: usize, h: f64, nb: impl Fn(usize, usize, bool) -> usize) -> f64 {
    (f[nb(idx, axis, true)] - f[nb(idx, axis, false)]) / (2.0 * h)
}

#[inline(always)]
fn d2_with(f: &[f64], idx: usize, a: usize, b: usize, h: f64, nb: impl Fn(usize, usize, bool) -> usize) -> f64 {
    if a == b {
        (f[nb(idx, a, true)] - 2.0 * f[idx] + f[nb(idx, a, false)]) / (h * h)
    } else {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let pa = nb(idx, a, true);
        let ma = nb(idx, a, false);
        ((f[nb(pa, b, true)] - f[nb(pa, b, false)]) - (f[nb(ma, b, true)] - f[nb(ma, b, false)])) / (4.0 * h * h)
    }
}

#[inline(always)]
fn gradient_with(
    f: &[f64],
    idx: usize,
    n: usize,
    h: f64,
    nb: impl Fn(usize, usize, bool) -> usize + Copy,
) -> [C64; MAX_FIELD_DIM] {
    let mut g = [C64::new(0.0, 0.0); MAX_FIELD_DIM];
    for j in 0..n {
        g[j] = C64::new(0.5 * d1_with(f, idx, 2 * j, h, nb), -0.5 * d1_with(f, idx, 2 * j + 1, h, nb));
    }
    g
}

#[inline(always)]
fn hessian_with(
    f: &[f64],
    idx: usize,
    n: usize,
    h: f64,
    nb: impl Fn(usize, usize, bool) -> usize + Copy,
) -> HermitianMatrix {
    let mut m = HermitianMatrix::zeros(n);
    for j in 0..n {
        let (xj, yj) = (2 * j, 2 * j + 1);
        let diag = 0.25 * (d2_with(f, idx, xj, xj, h, nb) + d2_with(f, idx, yj, yj, h, nb));
        m.set(j, j, C64::new(diag, 0.0));
        for k in (j + 1)..n {
            let (xk, yk) = (2 * k, 2 * k + 1);
            let re = d2_with(f, idx, xj, xk, h, nb) + d2_with(f, idx, yj, yk, h, nb);
            let im = d2_with(f, idx, xj, yk, h, nb) - d2_with(f, idx, yj, xk, h, nb);
            m.set(j, k, C64::new(0.25 * re, 0.25 * im));
        }
    }
    m
}

/// Precomputed periodic neighbour indices; same stencils as the
/// [`TorusGrid`] methods without the index arithmetic.
#[derive(Clone, Debug)]
pub struct Stencil {
    grid: TorusGrid,
    plus: Vec<[u32; 2 * MAX_FIELD_DIM]>,
    minus: Vec<[u32; 2 * MAX_FIELD_DIM]>,
}

impl Stencil {
    pub fn new(grid: TorusGrid) -> Self {
        let mut plus = vec![[0u32; 2 * MAX_FIELD_DIM]; grid.len()];
        let mut minus = vec![[0u32; 2 * MAX_FIELD_DIM]; grid.len()];
        for idx in 0..grid.len() {
            for a in 0..grid.real_axes() {
                plus[idx][a] = grid.step(idx, a, true) as u32;
                minus[idx][a] = grid.step(idx, a, false) as u32;
            }
        }
        Stencil { grid, plus, minus }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    #[inline(always)]
    fn nb(&self, idx: usize, axis: usize, forward: bool) -> usize {
        if forward {
            self.plus[idx][axis] as usize
        } else {
            self.minus[idx][axis] as usize
        }
    }

    #[inline]
    pub fn gradient_at(&self, f: &[f64], idx: usize) -> [C64; MAX_FIELD_DIM] {
        gradient_with(f, idx, self.grid.n, self.grid.spacing(), |i, a, fw| self.nb(i, a, fw))
    }

    #[inline]
    pub fn hessian_at(&self, f: &[f64], idx: usize) -> HermitianMatrix {
        hessian_with(f, idx, self.grid.n, self.grid.spacing(), |i, a, fw| self.nb(i, a, fw))
    }

    #[inline]
    pub fn d1(&self, f: &[f64], idx: usize, axis: usize) -> f64 {
        d1_with(f, idx, axis, self.grid.spacing(), |i, a, fw| self.nb(i, a, fw))
    }

    #[inline]
    pub fn d2(&self, f: &[f64], idx: usize, a: usize, b: usize) -> f64 {
        d2_with(f, idx, a, b, self.grid.spacing(), |i, a, fw| self.nb(i, a, fw))
    }
}

/// Real function sampled on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..grid.real_axes()])
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect(),
        })
    }
}

pub fn same_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Field of (1,0)-covectors `(∂_1 f, …, ∂_n f)`.
#[derive(Clone, Debug)]
pub struct GradientField {
    grid: TorusGrid,
    values: Vec<[C64; MAX_FIELD_DIM]>,
}

impl GradientField {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &[C64] {
        &self.values[idx][..self.grid.complex_dim()]
    }
}

/// Field of Hermitian matrices, one per grid point.
#[derive(Clone, Debug)]
pub struct Form11Field {
    grid: TorusGrid,
    values: Vec<HermitianMatrix>,
}

impl Form11Field {
    pub fn constant(grid: TorusGrid, m: HermitianMatrix) -> Result<Self> {
        if m.dim() != grid.complex_dim() {
            return Err(Error::Domain("form dimension differs from grid dimension".into()));
        }
        Ok(Form11Field { grid, values: vec![m; grid.len()] })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &HermitianMatrix {
        &self.values[idx]
    }

    pub fn add(&self, other: &Form11Field) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Form11Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        self.values.iter().fold(0.0, |m, h| m.max(h.hermitian_defect()))
    }
}

pub fn complex_gradient(f: &ScalarField) -> GradientField {
    let g = f.grid;
    GradientField { grid: g, values: (0..g.len()).map(|i| g.gradient_at(&f.values, i)).collect() }
}

pub fn complex_hessian(f: &ScalarField) -> Form11Field {
    let g = f.grid;
    Form11Field { grid: g, values: (0..g.len()).map(|i| g.hessian_at(&f.values, i)).collect() }
}

/// Trace of the complex Hessian, `Σ_j ∂_j∂_j̄ f` (a quarter of the flat
/// Laplacian).
pub fn complex_laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let values = (0..g.len())
        .map(|i| {
            let h = g.hessian_at(&f.values, i);
            (0..g.complex_dim()).map(|j| h.get(j, j).re).sum()
        })
        .collect();
    ScalarField { grid: g, values }
}

/// Riemann sum `Σ f · weight · h^{2n}`.
pub fn integrate(f: &ScalarField, weight: &ScalarField) -> Result<f64> {
    same_grid(&f.grid, &weight.grid)?;
    let s: f64 = f.values.iter().zip(&weight.values).map(|(a, b)| a * b).sum();
    Ok(s * f.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::standard(3, 16).is_err());
        assert!(TorusGrid::standard(1, 7).is_err());
        assert!(TorusGrid::standard(1, 6).is_err());
        assert!(TorusGrid::new(1, 16, -1.0).is_err());
        let g = TorusGrid::standard(2, 8).unwrap();
        assert_eq!(g.len(), 4096);
    }

    #[test]
    fn steps_wrap_around() {
        let g = TorusGrid::standard(2, 8).unwrap();
        for idx in [0, 1, 7, 8, 511, 4095, 1234] {
            for axis in 0..4 {
                let f = g.step(idx, axis, true);
                assert_eq!(g.step(f, axis, false), idx);
                let d0 = g.digits(idx);
                let d1 = g.digits(f);
                assert_eq!(d1[axis], (d0[axis] + 1) % 8);
            }
        }
    }

    #[test]
    fn integrals_of_trigonometric_polynomials() {
        let g = TorusGrid::standard(1, 16).unwrap();
        let one = ScalarField::constant(g, 1.0);
        assert!((integrate(&one, &one).unwrap() - TAU * TAU).abs() < 1e-12);
        let s = ScalarField::from_fn(g, |x| x[0].sin());
        assert!(integrate(&s, &one).unwrap().abs() < 1e-12);
        let s2 = ScalarField::from_fn(g, |x| x[0].sin().powi(2));
        assert!((integrate(&s2, &one).unwrap() - TAU * TAU / 2.0).abs() < 1e-12);
        let other = ScalarField::constant(TorusGrid::standard(1, 8).unwrap(), 1.0);
        assert!(integrate(&one, &other).is_err());
    }

    #[test]
    fn stencil_table_matches_index_arithmetic() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let st = Stencil::new(g);
        let f = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() * x[2].cos() + (x[3] - x[0]).cos());
        for idx in [0, 17, 999, 4095] {
            assert_eq!(st.hessian_at(f.values(), idx), g.hessian_at(f.values(), idx));
            assert_eq!(st.gradient_at(f.values(), idx), g.gradient_at(f.values(), idx));
        }
    }

    #[test]
    fn constant_fields_have_zero_derivatives() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let c = ScalarField::constant(g, 3.25);
        let gr = complex_gradient(&c);
        let he = complex_hessian(&c);
        for i in 0..g.len() {
            assert!(gr.at(i).iter().all(|z| z.norm() == 0.0));
            assert_eq!(he.at(i).frobenius_norm(), 0.0);
        }
    }
}
