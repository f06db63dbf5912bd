//! Seeded random test data: low-frequency trigonometric potentials and
//! directions.

use rand::Rng;

use crate::grid::{ScalarField, TorusGrid};

/// A random trigonometric polynomial with integer frequencies in
/// `-max_freq..=max_freq` along every real axis, scaled so that its sup over
/// the grid equals `amplitude` (unless the draw is identically zero).
pub fn trig_field<R: Rng>(grid: TorusGrid, rng: &mut R, terms: usize, max_freq: i32, amplitude: f64) -> ScalarField {
    let axes = grid.real_axes();
    let scale = std::f64::consts::TAU / grid.period();
    let mut modes = Vec::with_capacity(terms);
    for _ in 0..terms {
        let mut k = [0i32; 6];
        loop {
            for v in k.iter_mut().take(axes) {
                *v = rng.gen_range(-max_freq..=max_freq);
            }
            if k[..axes].iter().any(|&v| v != 0) {
                break;
            }
        }
        let a: f64 = rng.gen_range(-1.0..1.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        modes.push((k, a, phase));
    }
    let f = ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| {
                let arg: f64 = (0..axes).map(|i| k[i] as f64 * x[i]).sum::<f64>() * scale;
                a * (arg + ph).cos()
            })
            .sum()
    });
    let s = f.sup_norm();
    if s > 0.0 {
        f.map(|v| v * amplitude / s)
    } else {
        f
    }
}

/// [`trig_field`] plus a random constant in `[-offset, offset]`.
pub fn trig_field_with_offset<R: Rng>(
    grid: TorusGrid,
    rng: &mut R,
    terms: usize,
    max_freq: i32,
    amplitude: f64,
    offset: f64,
) -> ScalarField {
    let f = trig_field(grid, rng, terms, max_freq, amplitude);
    let c: f64 = if offset > 0.0 { rng.gen_range(-offset..=offset) } else { 0.0 };
    f.map(|v| v + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn amplitude_and_determinism() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let a = trig_field(g, &mut ChaCha8Rng::seed_from_u64(5), 4, 2, 0.3);
        let b = trig_field(g, &mut ChaCha8Rng::seed_from_u64(5), 4, 2, 0.3);
        assert_eq!(a.values(), b.values());
        assert!((a.sup_norm() - 0.3).abs() < 1e-15);
        // zero mean: every mode has a nonzero frequency
        assert!(a.mean().abs() < 1e-12);
    }
}
