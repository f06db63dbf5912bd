//! Restarted GMRES with right preconditioning, so the monitored residual is
//! the true residual of the unpreconditioned system.

pub(crate) struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x = 0`.
pub(crate) fn gmres(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    mut apply_m: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let len = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return GmresOutcome { iterations: 0, relative_residual: 0.0 };
    }
    let mut r = b.to_vec();
    let mut total = 0;
    let mut tmp = vec![0.0; len];
    let mut w = vec![0.0; len];
    loop {
        let beta = norm(&r);
        if beta <= rtol * bnorm || total >= max_iter {
            return GmresOutcome { iterations: total, relative_residual: beta / bnorm };
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut hcols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        for j in 0..restart {
            apply_m(&v[j], &mut tmp);
            apply_a(&tmp, &mut w);
            total += 1;
            let mut h = vec![0.0; j + 2];
            for i in 0..=j {
                h[i] = dot(&w, &v[i]);
                let hi = h[i];
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= hi * b);
            }
            // one reorthogonalization pass keeps the basis honest on long cycles
            for i in 0..=j {
                let c = dot(&w, &v[i]);
                h[i] += c;
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= c * b);
            }
            h[j + 1] = norm(&w);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            let hj1 = h[j + 1];
            h[j] = c * h[j] + s * hj1;
            h[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            let res = g[j + 1].abs();
            let breakdown = hj1 <= 1e-14 * beta;
            hcols.push(h);
            if !breakdown {
                v.push(w.iter().map(|x| x / hj1).collect());
            }
            if res <= rtol * bnorm || total >= max_iter || breakdown {
                break;
            }
        }
        // back substitution for the Krylov coefficients
        let k = hcols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in (i + 1)..k {
                acc -= hcols[l][i] * y[l];
            }
            y[i] = acc / hcols[i][i];
        }
        let mut update = vec![0.0; len];
        for (i, yi) in y.iter().enumerate() {
            update.iter_mut().zip(&v[i]).for_each(|(a, b)| *a += yi * b);
        }
        apply_m(&update, &mut tmp);
        x.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        apply_a(x, &mut w);
        r.iter_mut().zip(b.iter().zip(&w)).for_each(|(ri, (bi, wi))| *ri = bi - wi);
    }
}
