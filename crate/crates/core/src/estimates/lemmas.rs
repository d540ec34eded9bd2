//! Band-limited norm comparison and the discrete derivative on a box.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::decomp::DecompFamily;
use crate::ensemble::{random_band_limited, rng, Support};
use crate::error::{invalid, Error, Result};
use crate::field::{Field, Kind, Rep};
use crate::grid::Grid;
use crate::norms::{lp_spatial, mixed_norm, MixedNormSpec};
use crate::propagator::{partial_riesz, ZeroPlane};

/// `‖□_k D^σ_{x_i} u‖ / ‖□_k u‖` in `L^{p1}_{x_1} L^{p2} L^{p2}_t`.
pub fn discrete_derivative_ratio(
    u: &Field,
    family: &DecompFamily,
    k: &[i64],
    axis: usize,
    sigma: f64,
    p1: f64,
    p2: f64,
) -> Result<f64> {
    if u.kind() != Kind::SpaceTime {
        return invalid("the discrete derivative is measured on space-time fields");
    }
    let b = family.apply_box(k, &u.to_frequency())?;
    let d = partial_riesz(&b, axis, sigma, ZeroPlane::Reject)?.field;
    let spec = MixedNormSpec::axis(0, p1, p2);
    let den = mixed_norm(&b, &spec)?;
    if den == 0.0 {
        return Err(Error::Numerical(format!("box {k:?} is empty")));
    }
    Ok(mixed_norm(&d, &spec)? / den)
}

/// `‖f‖_q / ‖f‖_p` of a spatial field.
pub fn nikolskii_ratio(f: &Field, p: f64, q: f64) -> Result<f64> {
    if p > q {
        return invalid(format!("need p ≤ q, got p = {p}, q = {q}"));
    }
    Ok(lp_spatial(f, q)? / lp_spatial(f, p)?)
}

/// Largest `‖f‖_q / ‖f‖_p` over `samples` Gaussian fields with `f̂`
/// supported in the ball `B(k, √n)`.
pub fn nikolskii_constant(grid: &Grid, k: &[i64], p: f64, q: f64, samples: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let f = random_band_limited(grid, &Support::Cube(k.to_vec()), r.gen())?;
        worst = worst.max(nikolskii_ratio(&f, p, q)?);
    }
    Ok(worst)
}

/// `e^{ik·x} f`, done exactly as an index shift of the spectrum. Fails if a
/// nonzero coefficient would cross the Nyquist edge.
pub fn modulate(f: &Field, k: &[i64]) -> Result<Field> {
    let g = f.grid();
    let n = g.dim();
    if k.len() != n {
        return invalid(format!("shift {k:?} does not match dimension {n}"));
    }
    let steps: Vec<i64> = k.iter().map(|&c| c * (1i64 << g.r())).collect();
    let fhat = f.to_frequency();
    let strides = g.strides();
    let mut idx = vec![0; n];
    let mut out = vec![C64::new(0.0, 0.0); fhat.data().len()];
    let len = g.len();
    for (q, z) in fhat.data().iter().enumerate() {
        if z.re == 0.0 && z.im == 0.0 {
            continue;
        }
        let (slice, p) = (q / len, q % len);
        g.unravel(p, &mut idx);
        let mut target = slice * len;
        for a in 0..n {
            let m = g.freq_index(a, idx[a]) + steps[a];
            let j = g
                .index_of_freq(a, m)
                .ok_or_else(|| Error::Nyquist(format!("modulation by {k:?} leaves the frequency grid")))?;
            target += j * strides[a];
        }
        out[target] = *z;
    }
    Field::from_vec(g, f.kind(), Rep::Frequency, out)
}
