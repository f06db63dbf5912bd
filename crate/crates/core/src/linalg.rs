//! Fixed-capacity complex matrices for the pointwise pencil algebra.
//!
//! Every matrix here is at most `MAX_DIM` square: the spatial blocks are
//! n×n with n ≤ 3 and the augmented space-time blocks are (n+1)×(n+1) with
//! n ≤ 2 for fields. Keeping them on the stack matters because the solver
//! builds one per space-time grid point per Newton iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// General (not necessarily Hermitian) square complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    dim: usize,
    e: [[C64; MAX_DIM]; MAX_DIM],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "matrix dimension {dim} out of range");
        SmallMat { dim, e: [[ZERO; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = ONE;
        }
        m
    }

    /// Rank-one matrix `u v^*`, the coefficient matrix of `i ∂u ∧ ∂̄v`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        let mut m = Self::zeros(u.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m.e[i][j] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.e[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.e[i][j] = z;
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.e[i][j] = self.e[j][i].conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.e[i][k] * other.e[k][j];
                }
                m.e[i][j] = acc;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[C64]) -> [C64; MAX_DIM] {
        let mut out = [ZERO; MAX_DIM];
        for i in 0..self.dim {
            let mut acc = ZERO;
            for k in 0..self.dim {
                acc += self.e[i][k] * v[k];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> SmallMat {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.e[i][j] *= s;
            }
        }
        m
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_triangular_inverse(&self) -> SmallMat {
        let n = self.dim;
        let mut inv = Self::zeros(n);
        for col in 0..n {
            for i in col..n {
                let mut acc = if i == col { ONE } else { ZERO };
                for k in col..i {
                    acc -= self.e[i][k] * inv.e[k][col];
                }
                inv.e[i][col] = acc / self.e[i][i];
            }
        }
        inv
    }

    /// `self · H · self^*`, which stays Hermitian.
    pub fn congruence(&self, h: &HermitianMatrix) -> HermitianMatrix {
        let m = self.mul(&h.as_mat()).mul(&self.adjoint());
        HermitianMatrix::from_mat_symmetrized(&m)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; `None`
    /// when a pivot vanishes.
    pub fn inverse(&self) -> Option<SmallMat> {
        let n = self.dim;
        if n == 2 || n == 3 {
            let d = self.determinant();
            if d == ZERO {
                return None;
            }
            let e = &self.e;
            let mut m = SmallMat::zeros(n);
            if n == 2 {
                m.e = [[e[1][1], -e[0][1], ZERO, ZERO], [-e[1][0], e[0][0], ZERO, ZERO], [ZERO; 4], [ZERO; 4]];
            } else {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor of (j, i)
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        m.e[i][j] = e[r0][c0] * e[r1][c1] - e[r0][c1] * e[r1][c0];
                    }
                }
            }
            let inv = ONE / d;
            for i in 0..n {
                for j in 0..n {
                    m.e[i][j] *= inv;
                }
            }
            return Some(m);
        }
        let mut a = self.e;
        let mut inv = Self::identity(n).e;
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
            if a[piv][col].norm() == 0.0 {
                return None;
            }
            a.swap(col, piv);
            inv.swap(col, piv);
            let d = ONE / a[col][col];
            for j in 0..n {
                a[col][j] *= d;
                inv[col][j] *= d;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i][col];
                    if f != ZERO {
                        for j in 0..n {
                            let (ac, ic) = (a[col][j], inv[col][j]);
                            a[i][j] -= f * ac;
                            inv[i][j] -= f * ic;
                        }
                    }
                }
            }
        }
        Some(SmallMat { dim: n, e: inv })
    }

    pub fn determinant(&self) -> C64 {
        let n = self.dim;
        let e = &self.e;
        match n {
            1 => e[0][0],
            2 => e[0][0] * e[1][1] - e[0][1] * e[1][0],
            3 => {
                e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                    - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                    + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
            }
            _ => {
                // Laplace expansion along the first row.
                let mut acc = ZERO;
                for c in 0..n {
                    let mut minor = SmallMat::zeros(n - 1);
                    for i in 1..n {
                        let mut jj = 0;
                        for j in 0..n {
                            if j != c {
                                minor.e[i - 1][jj] = e[i][j];
                                jj += 1;
                            }
                        }
                    }
                    let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                    acc += e[0][c] * minor.determinant() * sign;
                }
                acc
            }
        }
    }
}

fn inertia_from(c: &[f64; MAX_DIM + 1], n: usize) -> (usize, usize) {
    let changes = |flip: bool| {
        let mut count = 0;
        let mut last = 0.0f64;
        for k in (0..=n).rev() {
            // p(−λ) has the odd-degree coefficients negated (up to overall sign)
            let v = if flip && (n - k) % 2 == 1 { -c[k] } else { c[k] };
            if v != 0.0 {
                if last != 0.0 && (v > 0.0) != (last > 0.0) {
                    count += 1;
                }
                last = v;
            }
        }
        count
    };
    (changes(false), changes(true))
}

/// Hermitian matrix of dimension at most `MAX_DIM`.
///
/// Houses the coefficient matrices of real (1,1)-forms: `α_{jk̄}`, `ω_{jk̄}`
/// and the augmented space-time matrices of the solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    e: [[C64; MAX_DIM]; MAX_DIM],
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "matrix dimension {dim} out of range");
        HermitianMatrix { dim, e: [[ZERO; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.e[i][i] = C64::new(x, 0.0);
        }
        m
    }

    /// Builds from full rows; rejects input that is not Hermitian to 1e-12.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Domain(format!("matrix dimension {n} outside 1..={MAX_DIM}")));
        }
        let mut m = SmallMat::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain(format!("row {i} has length {} (expected {n})", row.len())));
            }
            for (j, &z) in row.iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Domain(format!("non-finite entry at ({i},{j})")));
                }
                m.e[i][j] = z;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = (m.e[i][j] - m.e[j][i].conj()).norm();
                let scale = 1.0f64.max(m.e[i][j].norm());
                if d > 1e-12 * scale {
                    return Err(Error::Domain(format!(
                        "entries ({i},{j}) and ({j},{i}) are not conjugate (defect {d:e})"
                    )));
                }
            }
        }
        Ok(Self::from_mat_symmetrized(&m))
    }

    /// Takes the Hermitian part `(m + m^*)/2`.
    pub fn from_mat_symmetrized(m: &SmallMat) -> Self {
        let n = m.dim;
        let mut h = Self::zeros(n);
        for i in 0..n {
            h.e[i][i] = C64::new(m.e[i][i].re, 0.0);
            for j in (i + 1)..n {
                let z = (m.e[i][j] + m.e[j][i].conj()) * 0.5;
                h.e[i][j] = z;
                h.e[j][i] = z.conj();
            }
        }
        h
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.e[i][j]
    }

    /// Sets entry (i, j) and its mirror (j, i). Diagonal entries keep only
    /// the real part.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        if i == j {
            self.e[i][i] = C64::new(z.re, 0.0);
        } else {
            self.e[i][j] = z;
            self.e[j][i] = z.conj();
        }
    }

    pub fn as_mat(&self) -> SmallMat {
        SmallMat { dim: self.dim, e: self.e }
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.e[i][j] *= s;
            }
        }
        m
    }

    /// Largest deviation from exact Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self.e[i][j] - self.e[j][i].conj()).norm());
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Cholesky factor `L` (lower triangular, positive real diagonal) with
    /// `self = L L^*`. Fails with the smallest eigenvalue when the matrix is
    /// not positive definite.
    pub fn cholesky(&self) -> Result<SmallMat> {
        let n = self.dim;
        let mut l = SmallMat::zeros(n);
        for j in 0..n {
            let mut d = self.e[j][j].re;
            for k in 0..j {
                d -= l.e[j][k].norm_sqr();
            }
            if !(d > 0.0) {
                let smallest = self.eigh().values[n - 1];
                return Err(Error::Domain(format!(
                    "matrix is not positive definite (smallest eigenvalue {smallest:e})"
                )));
            }
            let djj = d.sqrt();
            l.e[j][j] = C64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut acc = self.e[i][j];
                for k in 0..j {
                    acc -= l.e[i][k] * l.e[j][k].conj();
                }
                l.e[i][j] = acc / djj;
            }
        }
        Ok(l)
    }

    pub fn determinant(&self) -> f64 {
        self.as_mat().determinant().re
    }

    /// Eigen-decomposition by cyclic complex Jacobi rotations.
    ///
    /// Eigenvalues are returned in descending order; column `k` of
    /// `vectors` is the unit eigenvector for `values[k]`.
/// Coefficients `c_0..c_n` of `det(λI − A) = Σ c_k λ^k` by the
    /// Faddeev–LeVerrier recursion (`c_n = 1`).
    pub fn char_poly(&self) -> [f64; MAX_DIM + 1] {
        let n = self.dim;
        let e = &self.e;
        let mut c = [0.0; MAX_DIM + 1];
        c[n] = 1.0;
        match n {
            1 => c[0] = -e[0][0].re,
            2 => {
                c[1] = -(e[0][0].re + e[1][1].re);
                c[0] = e[0][0].re * e[1][1].re - e[0][1].norm_sqr();
            }
            3 => {
                let (a, b, d) = (e[0][0].re, e[1][1].re, e[2][2].re);
                let (x, y, z) = (e[0][1], e[0][2], e[1][2]);
                let (xx, yy, zz) = (x.norm_sqr(), y.norm_sqr(), z.norm_sqr());
                c[2] = -(a + b + d);
                c[1] = a * b - xx + a * d - yy + b * d - zz;
                c[0] = -(a * b * d + 2.0 * (x * z * y.conj()).re - a * zz - b * yy - d * xx);
            }
            _ => {
                let a = self.as_mat();
                let mut mk = SmallMat::zeros(n);
                for k in 1..=n {
                    let mut next = a.mul(&mk);
                    for i in 0..n {
                        next.e[i][i] += c[n - k + 1];
                    }
                    mk = next;
                    let am = a.mul(&mk);
                    let tr: f64 = (0..n).map(|i| am.e[i][i].re).sum();
                    c[n - k] = -tr / k as f64;
                }
            }
        }
        c
    }

    /// Numbers of positive and negative eigenvalues, by Descartes' rule on
    /// the (real-rooted) characteristic polynomial.
    pub fn inertia(&self) -> (usize, usize) {
        inertia_from(&self.char_poly(), self.dim)
    }

    /// `Σ arctan μ_i` over the eigenvalues, computed as the argument of
    /// `det(I + iA) = Π(1 + iμ_i)` with the branch fixed by the inertia.
    /// The branch is unambiguous for dimension ≤ 3; larger matrices fall
    /// back to the eigenvalues.
    pub fn arctan_trace(&self) -> f64 {
        self.arctan_data(false).0
    }

    /// `(I + A²)^{-1}`, the derivative weights of [`Self::arctan_trace`]:
    /// `d Σ arctan μ = tr((I + A²)^{-1} dA)`.
    pub fn arctan_weights(&self) -> HermitianMatrix {
        self.arctan_data(true).1.expect("weights requested")
    }

    /// Both of the above in one pass.
    pub fn arctan_data(&self, weights: bool) -> (f64, Option<HermitianMatrix>) {
        let n = self.dim;
        let sum = if n > 3 {
            self.eigh().values().iter().map(|m| m.atan()).sum()
        } else {
            let c = self.char_poly();
            // det(I + iA) = Σ_k (−i)^k c_{n−k}
            let mut z = ZERO;
            let mut pow = ONE;
            for k in 0..=n {
                z += pow * c[n - k];
                pow *= C64::new(0.0, -1.0);
            }
            let arg = z.arg();
            let (p, q) = inertia_from(&c, n);
            let mid = (p as f64 - q as f64) * std::f64::consts::FRAC_PI_4;
            let k = ((mid - arg) / std::f64::consts::TAU).round();
            arg + std::f64::consts::TAU * k
        };
        if !weights {
            return (sum, None);
        }
        // I + A² = (I + iA)^*(I + iA), so its inverse is B B^* with B = (I + iA)^{-1}.
        let mut m = self.as_mat().scale(C64::new(0.0, 1.0));
        for i in 0..n {
            m.e[i][i] += ONE;
        }
        let b = m.inverse().expect("I + iA is invertible for Hermitian A");
        let mut f = HermitianMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += b.e[i][k] * b.e[j][k].conj();
                }
                f.set(i, j, acc);
            }
        }
        (sum, Some(f))
    }

    pub fn eigh(&self) -> Eigh {
        let n = self.dim;
        let mut a = self.e;
        let mut v = SmallMat::identity(n);
        for _sweep in 0..64 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let g = a[p][q];
                    let ag = g.norm();
                    if ag == 0.0 {
                        continue;
                    }
                    let app = a[p][p].re;
                    let aqq = a[q][q].re;
                    if ag <= 1e-18 * (app.abs() + aqq.abs()) {
                        a[p][q] = ZERO;
                        a[q][p] = ZERO;
                        continue;
                    }
                    rotated = true;
                    let ph = g / ag;
                    let theta = (aqq - app) / (2.0 * ag);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // J = D R with D = diag(1, conj(ph)) on (p, q).
                    let jpp = C64::new(c, 0.0);
                    let jpq = C64::new(s, 0.0);
                    let jqp = ph.conj() * (-s);
                    let jqq = ph.conj() * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = akp * jpp + akq * jqp;
                        a[k][q] = akp * jpq + akq * jqq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = jpp.conj() * apk + jqp.conj() * aqk;
                        a[q][k] = jpq.conj() * apk + jqq.conj() * aqk;
                    }
                    a[p][p] = C64::new(app - t * ag, 0.0);
                    a[q][q] = C64::new(aqq + t * ag, 0.0);
                    a[p][q] = ZERO;
                    a[q][p] = ZERO;
                    for k in 0..n {
                        let vkp = v.e[k][p];
                        let vkq = v.e[k][q];
                        v.e[k][p] = vkp * jpp + vkq * jqp;
                        v.e[k][q] = vkp * jpq + vkq * jqq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order = [0usize, 1, 2, 3];
        let vals: [f64; MAX_DIM] = std::array::from_fn(|i| if i < n { a[i][i].re } else { 0.0 });
        order[..n].sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        let mut values = [0.0; MAX_DIM];
        let mut vectors = SmallMat::zeros(n);
        for (k, &src) in order[..n].iter().enumerate() {
            values[k] = vals[src];
            for i in 0..n {
                vectors.e[i][k] = v.e[i][src];
            }
        }
        Eigh { dim: n, values, vectors }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Eigh {
    pub dim: usize,
    pub values: [f64; MAX_DIM],
    pub vectors: SmallMat,
}

impl Eigh {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    /// `Σ_k f(λ_k) u_k u_k^*`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim;
        let mut h = HermitianMatrix::zeros(n);
        let w: [f64; MAX_DIM] = std::array::from_fn(|k| if k < n { f(self.values[k]) } else { 0.0 });
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.vectors.e[i][k] * self.vectors.e[j][k].conj() * w[k];
                }
                h.set(i, j, acc);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
        let mut h = HermitianMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let z = if i == j {
                    C64::new(rng.gen_range(-3.0..3.0), 0.0)
                } else {
                    C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
                };
                h.set(i, j, z);
            }
        }
        h
    }

    #[test]
    fn eigh_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            for _ in 0..200 {
                let h = random_hermitian(&mut rng, n);
                let e = h.eigh();
                let back = e.spectral_map(|x| x);
                let err = back.add(&h.scale(-1.0)).frobenius_norm();
                assert!(err < 1e-12 * (1.0 + h.frobenius_norm()), "n={n} err={err}");
                for k in 1..n {
                    assert!(e.values[k - 1] >= e.values[k]);
                }
                let uu = e.vectors.adjoint().mul(&e.vectors);
                for i in 0..n {
                    for j in 0..n {
                        let target = if i == j { 1.0 } else { 0.0 };
                        assert!((uu.get(i, j) - target).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn eigh_handles_degenerate_spectra() {
        let h = HermitianMatrix::identity(3).scale(2.5);
        assert_eq!(h.eigh().values(), &[2.5, 2.5, 2.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_hermitian(&mut rng, 3).eigh().vectors;
        let d = HermitianMatrix::diagonal(&[1.0, 1.0, -2.0]);
        let h = q.congruence(&d);
        let v = h.eigh();
        assert!((v.values[0] - 1.0).abs() < 1e-14);
        assert!((v.values[1] - 1.0).abs() < 1e-14);
        assert!((v.values[2] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_round_trip_and_failure() {
        let mut h = HermitianMatrix::diagonal(&[2.0, 3.0]);
        h.set(0, 1, C64::new(0.5, -0.25));
        let l = h.cholesky().unwrap();
        let back = l.mul(&l.adjoint());
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.get(i, j) - h.get(i, j)).norm() < 1e-15);
            }
        }
        let linv = l.lower_triangular_inverse();
        let id = linv.mul(&l);
        assert!((id.get(0, 0) - 1.0).norm() < 1e-15 && id.get(1, 0).norm() < 1e-15);

        let bad = HermitianMatrix::diagonal(&[1.0, -0.5]);
        let msg = bad.cholesky().unwrap_err().to_string();
        assert!(msg.contains("-5e-1"), "{msg}");
    }

    #[test]
    fn from_rows_rejects_non_hermitian() {
        let rows = vec![
            vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0)],
        ];
        assert!(HermitianMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn determinant_matches_eigenvalue_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let h = random_hermitian(&mut rng, n);
            let prod: f64 = h.eigh().values().iter().product();
            assert!((h.determinant() - prod).abs() < 1e-11 * (1.0 + prod.abs()));
        }
    }

    #[test]
    fn arctan_trace_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..3000 {
            let n = 1 + trial % 3;
            let scale = [0.1, 1.0, 30.0][(trial / 3) % 3];
            let mut m = HermitianMatrix::zeros(n);
            for i in 0..n {
                m.set(i, i, C64::new(scale * rng.gen_range(-1.0..1.0), 0.0));
                for j in (i + 1)..n {
                    m.set(i, j, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale);
                }
            }
            if trial % 7 == 0 {
                m = HermitianMatrix::diagonal(&[40.0, 25.0, 1e-3][..n]);
            }
            let e = m.eigh();
            let expect: f64 = e.values().iter().map(|v| v.atan()).sum();
            assert!((m.arctan_trace() - expect).abs() < 1e-12, "{m:?}");
            let w = m.arctan_weights();
            let ew = e.spectral_map(|v| 1.0 / (1.0 + v * v));
            for i in 0..n {
                for j in 0..n {
                    assert!((w.get(i, j) - ew.get(i, j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inertia_counts_signs() {
        assert_eq!(HermitianMatrix::diagonal(&[2.0, -1.0, 0.5]).inertia(), (2, 1));
        assert_eq!(HermitianMatrix::diagonal(&[2.0, 0.0, -0.5]).inertia(), (1, 1));
        assert_eq!(HermitianMatrix::diagonal(&[-3.0]).inertia(), (0, 1));
    }
}
