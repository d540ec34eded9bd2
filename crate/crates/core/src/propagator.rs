//! Free Schrödinger group `S(t) = e^{itΔ±}`, the Duhamel operator and the
//! one-dimensional multipliers used by the estimates.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{Field, Kind};

/// What to do with a negative-order symbol on the plane `ξ_i = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroPlane {
    /// Fail if the field has mass on the plane.
    Reject,
    /// Map the plane to zero and raise the flag.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MultiplierSpec {
    /// `|ξ_i|^σ`.
    Riesz { axis: usize, order: f64 },
    /// `(iξ_i)^{-1}`.
    Antiderivative { axis: usize },
    /// `iξ_i`.
    Derivative { axis: usize },
    /// `e^{it Σ ε_j ξ_j²}`.
    FreePhase(f64),
}

/// A multiplier output and whether the zero-plane convention was used on
/// nonzero data.
#[derive(Clone, Debug)]
pub struct Multiplied {
    pub field: Field,
    pub flagged: bool,
}

/// Relative energy on `ξ_axis = 0` above which the plane counts as occupied.
const PLANE_TOL: f64 = 1e-24;

fn plane_mass(f: &Field, axis: usize) -> bool {
    let fhat = f.to_frequency();
    let g = f.grid();
    let strides = g.strides();
    let len = g.len();
    let (mut on, mut total) = (0.0, 0.0);
    for (q, z) in fhat.data().iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if ((q % len) / strides[axis]) % g.points_on(axis) == 0 {
            on += e;
        }
    }
    total > 0.0 && on > PLANE_TOL * total
}

pub fn apply_multiplier(spec: MultiplierSpec, f: &Field, policy: ZeroPlane) -> Result<Multiplied> {
    let n = f.grid().dim();
    let check_axis = |axis: usize| {
        if axis >= n {
            Err(Error::Invalid(format!("axis {axis} out of range for n = {n}")))
        } else {
            Ok(())
        }
    };
    match spec {
        MultiplierSpec::Riesz { axis, order } => {
            check_axis(axis)?;
            let singular = order < 0.0;
            let flagged = singular && plane_mass(f, axis);
            if flagged && policy == ZeroPlane::Reject {
                return Err(Error::Numerical(format!("negative order on a field with mass at ξ_{} = 0", axis + 1)));
            }
            let field = f.multiplier(|xi| {
                let a = xi[axis].abs();
                if a == 0.0 {
                    C64::new(if order == 0.0 { 1.0 } else { 0.0 }, 0.0)
                } else {
                    C64::new(a.powf(order), 0.0)
                }
            });
            Ok(Multiplied { field, flagged })
        }
        MultiplierSpec::Antiderivative { axis } => {
            check_axis(axis)?;
            let flagged = plane_mass(f, axis);
            if flagged && policy == ZeroPlane::Reject {
                return Err(Error::Numerical(format!("antiderivative of a field with mass at ξ_{} = 0", axis + 1)));
            }
            let field = f.multiplier(|xi| {
                if xi[axis] == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, -1.0 / xi[axis])
                }
            });
            Ok(Multiplied { field, flagged })
        }
        MultiplierSpec::Derivative { axis } => {
            check_axis(axis)?;
            Ok(Multiplied { field: f.multiplier(|xi| C64::new(0.0, xi[axis])), flagged: false })
        }
        MultiplierSpec::FreePhase(t) => Ok(Multiplied { field: free_evolve(f, t), flagged: false }),
    }
}

pub fn partial_riesz(f: &Field, axis: usize, order: f64, policy: ZeroPlane) -> Result<Multiplied> {
    apply_multiplier(MultiplierSpec::Riesz { axis, order }, f, policy)
}

pub fn partial_antiderivative(f: &Field, axis: usize, policy: ZeroPlane) -> Result<Multiplied> {
    apply_multiplier(MultiplierSpec::Antiderivative { axis }, f, policy)
}

/// `∂_{x_i} f`.
pub fn derivative(f: &Field, axis: usize) -> Field {
    f.multiplier(|xi| C64::new(0.0, xi[axis]))
}

fn phases(f: &Field, t: f64) -> Vec<C64> {
    f.grid().dispersion().into_iter().map(|w| C64::from_polar(1.0, t * w)).collect()
}

/// `S(t) f`, in the representation of `f`. Space-time fields are evolved
/// slice by slice by the same `t`.
pub fn free_evolve(f: &Field, t: f64) -> Field {
    let g = f.grid();
    let e = phases(f, t);
    let physical = f.is_physical();
    let mut fhat = f.to_frequency();
    for chunk in fhat.data_mut().chunks_mut(g.len()) {
        chunk.iter_mut().zip(&e).for_each(|(z, p)| *z *= p);
    }
    back(fhat, f, physical)
}

fn back(fhat: Field, like: &Field, physical: bool) -> Field {
    if physical {
        fhat.into_physical()
    } else if like.is_frequency() {
        fhat
    } else {
        let n = like.grid().dim();
        match like.rep() {
            crate::field::Rep::Partial(mask) => {
                let axes: Vec<usize> = (0..n).filter(|&a| mask & (1 << a) == 0).collect();
                fhat.inverse_axes(&axes).expect("axes are in frequency")
            }
            _ => fhat,
        }
    }
}

/// Space-time field whose slice `m` is `S(t_m) f`.
pub fn evolve_trajectory(f: &Field) -> Result<Field> {
    if f.kind() != Kind::Spatial {
        return Err(Error::Invalid("trajectory needs a spatial field".into()));
    }
    let g = f.grid();
    let physical = f.is_physical();
    let fhat = f.to_frequency();
    let omega = g.dispersion();
    let mut out = Field::zeros(g, Kind::SpaceTime).into_frequency();
    for m in 0..g.nt() {
        let t = g.time(m);
        out.slice_mut(m).iter_mut().zip(fhat.data()).zip(&omega).for_each(|((o, z), w)| {
            if z.re != 0.0 || z.im != 0.0 {
                *o = z * C64::from_polar(1.0, t * w);
            }
        });
    }
    Ok(back(out, f, physical))
}

/// `𝒜f(t) = ∫₀ᵗ S(t−τ) f(τ) dτ` on the time grid.
pub fn duhamel(f: &Field) -> Result<Field> {
    let m0 = f
        .grid()
        .zero_index()
        .ok_or_else(|| Error::Invalid("t = 0 is not a time node (Nt must be even)".into()))?;
    duhamel_from(f, m0)
}

/// `∫_{t_{m0}}^t S(t−τ) f(τ) dτ`: exact phase on each panel, trapezoid on the
/// forcing, marched forward and backward from node `m0`.
pub fn duhamel_from(f: &Field, m0: usize) -> Result<Field> {
    if f.kind() != Kind::SpaceTime {
        return Err(Error::Invalid("Duhamel needs a space-time forcing".into()));
    }
    let g = f.grid();
    let nt = g.nt();
    if m0 >= nt {
        return Err(Error::Invalid(format!("start node {m0} outside 0..{nt}")));
    }
    let physical = f.is_physical();
    let fhat = f.to_frequency();
    let dt = g.dt();
    let half = C64::new(0.5 * dt, 0.0);
    let e = phases(f, dt);
    let len = g.len();
    let mut out = Field::zeros(g, Kind::SpaceTime).into_frequency();
    let src = fhat.data();
    let dst = out.data_mut();
    for m in m0..nt - 1 {
        let (lo, hi) = dst.split_at_mut((m + 1) * len);
        let a = &lo[m * len..];
        let next = &mut hi[..len];
        let fm = &src[m * len..(m + 1) * len];
        let fn_ = &src[(m + 1) * len..(m + 2) * len];
        for p in 0..len {
            next[p] = e[p] * a[p] + half * (e[p] * fm[p] + fn_[p]);
        }
    }
    for m in (1..=m0).rev() {
        let (lo, hi) = dst.split_at_mut(m * len);
        let prev = &mut lo[(m - 1) * len..];
        let a = &hi[..len];
        let fm = &src[m * len..(m + 1) * len];
        let fp = &src[(m - 1) * len..m * len];
        for p in 0..len {
            let inv = e[p].conj();
            prev[p] = inv * a[p] - half * (fp[p] + inv * fm[p]);
        }
    }
    Ok(back(out, f, physical))
}

/// `Σ_m Δt S(−t_m) f(t_m)`, the whole-window integral `∫ S(−τ) f(τ) dτ`.
pub fn backpropagated_sum(f: &Field) -> Result<Field> {
    if f.kind() != Kind::SpaceTime {
        return Err(Error::Invalid("needs a space-time field".into()));
    }
    let g = f.grid();
    let physical = f.is_physical();
    let fhat = f.to_frequency();
    let omega = g.dispersion();
    let dt = g.dt();
    let mut acc = Field::zeros(g, Kind::Spatial).into_frequency();
    for m in 0..g.nt() {
        let t = g.time(m);
        acc.data_mut().iter_mut().zip(fhat.slice(m)).zip(&omega).for_each(|((a, z), w)| {
            if z.re != 0.0 || z.im != 0.0 {
                *a += z * C64::from_polar(dt, -t * w);
            }
        });
    }
    Ok(if physical { acc.into_physical() } else { acc })
}
