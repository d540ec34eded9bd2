//! Maximal-function norms `‖□_k S(t) u₀‖_{L^q_{x_i} L^∞ L^∞_t}` at large `k`
//! through the Galilean identity, and the sharpness construction.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{fit_scaling, Fit};
use crate::decomp::{eta, DecompFamily};
use crate::ensemble::{random_localized, Support};
use crate::error::{invalid, Result};
use crate::field::{Field, Kind};
use crate::grid::{transform_axis, Grid};
use crate::norms::{bracket1, mixed_norm, MixedNormSpec};
use crate::propagator::evolve_trajectory;

/// Direct evaluation on the lab grid: `□_k` applied to `u0`, evolved on the
/// grid's time nodes, then the anisotropic maximal norm.
pub fn maximal_norm_lab(u0: &Field, family: &DecompFamily, k: &[i64], axis: usize, q: f64) -> Result<f64> {
    let b = family.apply_box(k, u0)?;
    let traj = evolve_trajectory(&b.to_frequency())?;
    mixed_norm(&traj, &MixedNormSpec::Anisotropic { axis, p_axis: q, p_rest: f64::INFINITY, p_time: f64::INFINITY })
}

/// `‖S(t)(e^{ik·x} v)‖_{L^q_{x_i} L^∞ L^∞_t}` on `ℝⁿ × [−T, T]` from the
/// envelope `v` alone, using `|S(t)(e^{ik·x}v)(x)| = |S(t)v(x + 2εkt)|`.
///
/// `v` lives on the envelope torus, which must be wide enough that `S(t)v`
/// stays away from its edges for `|t| ≤ T`; it is then read as a function
/// on the line. Time steps are `h_i / 2|k_i|`, so the lab point moves by
/// exactly one cell per step. For `k_i = 0` the grid's own time nodes are used.
pub fn maximal_norm_moving(v: &Field, k: &[i64], axis: usize, q: f64) -> Result<f64> {
    let g = v.grid();
    let n = g.dim();
    if v.kind() != Kind::Spatial {
        return invalid("the envelope must be a spatial field");
    }
    if k.len() != n || axis >= n {
        return invalid(format!("box {k:?} / axis {axis} do not match dimension {n}"));
    }
    if !(q >= 1.0) {
        return invalid(format!("exponent {q} is below 1"));
    }
    let ni = g.points_on(axis);
    let h = g.spacing(axis);
    let speed = 2.0 * g.eps()[axis] * k[axis] as f64;
    let t_half = g.t_half();
    let (dt, steps) = if k[axis] == 0 {
        (g.dt(), g.nt())
    } else {
        let dt = h / speed.abs();
        (dt, (2.0 * t_half / dt + 1e-9).floor() as usize + 1)
    };
    let sign: i64 = if speed > 0.0 {
        1
    } else if speed < 0.0 {
        -1
    } else {
        0
    };
    let width = if sign == 0 { ni } else { ni + steps - 1 };
    let mut best = vec![0.0f64; width];

    let vhat = v.to_frequency();
    let omega = g.dispersion();
    let nodes: Vec<(usize, C64, f64)> = vhat
        .data()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
        .map(|(p, z)| (p, *z, omega[p]))
        .collect();
    let mut shape = vec![1];
    shape.extend_from_slice(g.points());
    let stride = g.strides()[axis];
    let mut buf = vec![C64::new(0.0, 0.0); g.len()];
    let mut line = vec![0.0f64; ni];
    for m in 0..steps {
        let t = -t_half + m as f64 * dt;
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(p, z, w) in &nodes {
            buf[p] = z * C64::from_polar(1.0, t * w);
        }
        for a in (0..n).rev() {
            transform_axis(&mut buf, &shape, a + 1, true);
        }
        line.iter_mut().for_each(|x| *x = 0.0);
        for (p, z) in buf.iter().enumerate() {
            let j = (p / stride) % ni;
            let e = z.norm_sqr();
            if e > line[j] {
                line[j] = e;
            }
        }
        for (j, &e) in line.iter().enumerate() {
            // position along the line, increasing from −L/2
            let c = ((j + ni / 2) % ni) as i64;
            let idx = match sign {
                0 => c,
                1 => c - m as i64 + (steps as i64 - 1),
                _ => c + m as i64,
            } as usize;
            if e > best[idx] {
                best[idx] = e;
            }
        }
    }
    Ok(if q.is_infinite() {
        best.iter().cloned().fold(0.0, f64::max).sqrt()
    } else {
        (h * best.iter().map(|e| e.powf(0.5 * q)).sum::<f64>()).powf(1.0 / q)
    })
}

/// Output of the sharpness construction for one `k₁`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub k1: i64,
    pub q: f64,
    /// `∫_{|x₁| ≤ c k₁} |A(x₁, t*)|^q Π_{j≥2} sup_{|x_j|<c} |B_j(x_j, t*)|^q dx₁`
    /// with `t* = −x₁ / 2ε₁k₁`, `c = 1`.
    pub lower_bound: f64,
    /// Number of `x₁` probes.
    pub probes: usize,
    /// Time window actually used (enlarged if the probes needed it).
    pub t_half: f64,
}

const WITNESS_C: f64 = 1.0;

/// `(Δξ/√2π) Σ_m η²(ξ_m − k) e^{i(xξ_m + εtξ_m²)}` over the lattice `ξ_m = mΔξ`.
fn packet(dxi: f64, k: i64, eps: f64, x: f64, t: f64) -> C64 {
    let s = (1.0 / dxi).round() as i64;
    let norm = dxi / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for m in (k * s - s + 1)..(k * s + s) {
        let xi = m as f64 * dxi;
        let e = eta(xi - k as f64);
        if e == 0.0 {
            continue;
        }
        acc += C64::from_polar(e * e, x * xi + eps * t * xi * xi);
    }
    acc * norm
}

/// Lower-bound quantity of the sharpness construction with
/// `ℱu₀ = η_{k₁}(ξ₁) η₀(ξ₂)⋯η₀(ξ_n)`, evaluated by direct Fourier sums on the
/// lattice of `grid` and integrated over the lab points `x₁ = j h₁`,
/// `|x₁| ≤ k₁`. The torus must hold `[−k₁, k₁]` with room to spare.
pub fn sharpness_witness(k1: i64, q: f64, grid: &Grid) -> Result<Witness> {
    if k1 < 8 {
        return invalid(format!("the witness needs k₁ ≥ 8, got {k1}"));
    }
    if !(q >= 1.0) || q.is_infinite() {
        return invalid(format!("q = {q} must be finite and ≥ 1"));
    }
    let n = grid.dim();
    let reach = WITNESS_C * k1 as f64;
    if grid.side() / 2.0 < reach + 4.0 {
        return invalid(format!(
            "torus side {} too short for probes up to |x₁| = {reach}; raise r",
            grid.side()
        ));
    }
    let t_half = grid.t_half().max(reach / (2.0 * k1 as f64));
    let dxi = grid.dxi();
    let eps = grid.eps();
    let h = grid.spacing(0);
    let jmax = (reach / h).floor() as i64;
    let transverse: Vec<f64> = (0..41).map(|s| WITNESS_C * (-1.0 + (2 * s + 1) as f64 / 41.0)).collect();
    let mut total = 0.0;
    for j in -jmax..=jmax {
        let x1 = j as f64 * h;
        let t = -x1 / (2.0 * eps[0] * k1 as f64);
        let mut v = packet(dxi, k1, eps[0], x1, t).norm().powf(q);
        for &e in &eps[1..n] {
            let sup = transverse.iter().map(|&x| packet(dxi, 0, e, x, t).norm()).fold(0.0, f64::max);
            v *= sup.powf(q);
        }
        total += h * v;
    }
    Ok(Witness { k1, q, lower_bound: total, probes: (2 * jmax + 1) as usize, t_half })
}

/// `‖□_k S(t) u₀‖^q` for the witness datum, `k = (k₁, 0, …, 0)`, through the
/// moving frame on `envelope` (its window `[−T, T]` is the time range).
pub fn witness_norm(k1: i64, q: f64, envelope: &Grid) -> Result<f64> {
    let n = envelope.dim();
    let v = Field::from_symbol(envelope, |xi| C64::new(xi.iter().map(|&x| eta(x).powi(2)).product(), 0.0));
    let mut k = vec![0; n];
    k[0] = k1;
    Ok(maximal_norm_moving(&v, &k, 0, q)?.powf(q))
}

/// `‖□_k S(t) u₀‖ / ‖u₀‖` against `⟨k₁⟩` along `k = (k₁, 0, …, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalSweep {
    pub q: f64,
    pub k1: Vec<i64>,
    /// Sample mean per `k₁`.
    pub values: Vec<f64>,
    pub fit: Fit,
}

/// Moving-frame sweep over `samples` unit-cube packets of width 1.5 centered
/// at the origin; each is boxed by `□₀` and shifted to `k` as a phase.
pub fn maximal_scaling(family: &DecompFamily, k1: &[i64], q: f64, samples: usize, seed: u64) -> Result<MaximalSweep> {
    if samples == 0 {
        return invalid("the sweep needs at least one sample");
    }
    let g = family.grid();
    let n = g.dim();
    let zero = vec![0; n];
    let boxes = (0..samples as u64)
        .map(|s| {
            let v = random_localized(g, &Support::Cube(zero.clone()), 1.5, seed.wrapping_add(s))?;
            family.apply_box(&zero, &v)
        })
        .collect::<Result<Vec<Field>>>()?;
    let values = k1
        .iter()
        .map(|&k| {
            let mut kk = zero.clone();
            kk[0] = k;
            let mut acc = 0.0;
            for b in &boxes {
                acc += maximal_norm_moving(b, &kk, 0, q)? / b.l2();
            }
            Ok(acc / samples as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = k1.iter().map(|&k| bracket1(k)).collect();
    let fit = fit_scaling(&xs, &values)?;
    Ok(MaximalSweep { q, k1: k1.to_vec(), values, fit })
}
