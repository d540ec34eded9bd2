//! Frequency-uniform decomposition `□_k`, sharp dyadic shells and the angular
//! projections `P₁`, `P₂` in the `(ξ₁, ξ₂)` plane.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{Field, Kind};
use crate::grid::Grid;
use crate::norms::lp_spatial;

/// Coefficients below this are stored as exact zeros.
pub const CLAMP: f64 = 1e-300;

fn h(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Plateau mollifier: 1 on `|s| ≤ 1/2`, 0 on `|s| ≥ 1`, smooth in between.
pub fn rho(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        let u = h(1.0 - a);
        u / (u + h(a - 0.5))
    }
}

/// `η(s) = ρ(s) / Σ_j ρ(s − j)`; its integer translates sum to one.
pub fn eta(s: f64) -> f64 {
    let r = rho(s);
    if r == 0.0 {
        return 0.0;
    }
    let base = s.floor() as i64;
    let total: f64 = (base - 1..=base + 2).map(|j| rho(s - j as f64)).sum();
    let v = r / total;
    if v < CLAMP {
        0.0
    } else {
        v
    }
}

/// The family `σ_k(ξ) = Π η(ξ_i − k_i)` for `k ∈ {−K..K}ⁿ`.
#[derive(Clone, Debug)]
pub struct DecompFamily {
    grid: Grid,
    k_max: i64,
    /// `tables[axis][k + K]` lists the nonzero `(node, η)` pairs of `η_k` on that axis.
    tables: Vec<Vec<Vec<(usize, f64)>>>,
}

impl DecompFamily {
    pub fn new(grid: &Grid, k_max: i64) -> Result<Self> {
        if k_max < 0 {
            return Err(Error::Invalid(format!("K = {k_max} must be nonnegative")));
        }
        let n = grid.dim();
        let pad = (n as f64).sqrt().ceil();
        if k_max as f64 + pad > grid.nyquist() {
            return Err(Error::Nyquist(format!(
                "K + ⌈√n⌉ = {} exceeds Δξ·N/2 = {}",
                k_max as f64 + pad,
                grid.nyquist()
            )));
        }
        let tables = (0..n)
            .map(|a| {
                let xi = grid.xi_axis(a);
                (-k_max..=k_max)
                    .map(|k| {
                        xi.iter()
                            .enumerate()
                            .filter_map(|(j, &x)| {
                                let v = eta(x - k as f64);
                                (v != 0.0).then_some((j, v))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(DecompFamily { grid: grid.clone(), k_max, tables })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    /// Every index of the family in lexicographic order.
    pub fn indices(&self) -> Vec<Vec<i64>> {
        let n = self.grid.dim();
        let side = (2 * self.k_max + 1) as usize;
        (0..side.pow(n as u32))
            .map(|mut p| {
                let mut k = vec![0; n];
                for a in (0..n).rev() {
                    k[a] = (p % side) as i64 - self.k_max;
                    p /= side;
                }
                k
            })
            .collect()
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.grid.dim() && k.iter().all(|c| c.abs() <= self.k_max)
    }

    fn check(&self, k: &[i64]) -> Result<()> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(Error::Invalid(format!("box {k:?} outside family range K = {}", self.k_max)))
        }
    }

    /// Nonzero samples of `η_{k_i}` on `axis`.
    pub fn axis_table(&self, axis: usize, k: i64) -> &[(usize, f64)] {
        &self.tables[axis][(k + self.k_max) as usize]
    }

    pub fn sigma(&self, k: &[i64], xi: &[f64]) -> f64 {
        k.iter().zip(xi).map(|(&k, &x)| eta(x - k as f64)).product()
    }

    /// `σ_k` sampled on the whole frequency grid.
    pub fn symbol(&self, k: &[i64]) -> Result<Vec<f64>> {
        self.check(k)?;
        let mut out = vec![0.0; self.grid.len()];
        self.for_each_node(k, |p, s| out[p] = s);
        Ok(out)
    }

    /// Visit the nonzero nodes of `σ_k` as `(flat index, value)`.
    pub fn for_each_node(&self, k: &[i64], mut f: impl FnMut(usize, f64)) {
        let n = self.grid.dim();
        let strides = self.grid.strides();
        let tabs: Vec<&[(usize, f64)]> = (0..n).map(|a| self.axis_table(a, k[a])).collect();
        if tabs.iter().any(|t| t.is_empty()) {
            return;
        }
        let mut pos = vec![0usize; n];
        loop {
            let mut p = 0;
            let mut s = 1.0;
            for a in 0..n {
                let (j, v) = tabs[a][pos[a]];
                p += j * strides[a];
                s *= v;
            }
            f(p, s);
            let mut a = n;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < tabs[a].len() {
                    break;
                }
                pos[a] = 0;
            }
        }
    }

    /// `σ_k f̂` for a frequency-representation field, slice by slice.
    pub fn box_frequency(&self, k: &[i64], fhat: &Field) -> Result<Field> {
        self.check(k)?;
        if !fhat.is_frequency() {
            return Err(Error::Rep("box_frequency needs a frequency field".into()));
        }
        let mut out = Field::zeros(fhat.grid(), fhat.kind()).to_frequency();
        let len = self.grid.len();
        let src = fhat.data();
        let dst = out.data_mut();
        self.for_each_node(k, |p, s| {
            let mut q = p;
            while q < src.len() {
                dst[q] = src[q] * s;
                q += len;
            }
        });
        Ok(out)
    }

    /// `□_k f = ℱ⁻¹ σ_k ℱ f`, returned in the input representation.
    pub fn apply_box(&self, k: &[i64], f: &Field) -> Result<Field> {
        if f.grid().points() != self.grid.points() {
            return Err(Error::Invalid("field and family live on different grids".into()));
        }
        let out = self.box_frequency(k, &f.to_frequency())?;
        Ok(if f.is_physical() { out.into_physical() } else if f.is_frequency() { out } else { to_rep(out, f) })
    }

    /// `max |Σ_k σ_k(ξ) − 1|` over frequency nodes with `|ξ|∞ ≤ radius`.
    pub fn partition_residual(&self, radius: f64) -> f64 {
        let mut total = vec![0.0; self.grid.len()];
        for k in self.indices() {
            self.for_each_node(&k, |p, s| total[p] += s);
        }
        let n = self.grid.dim();
        let mut idx = vec![0; n];
        let mut worst: f64 = 0.0;
        for (p, &t) in total.iter().enumerate() {
            self.grid.unravel(p, &mut idx);
            if (0..n).all(|a| self.grid.xi(a, idx[a]).abs() <= radius + 1e-12) {
                worst = worst.max((t - 1.0).abs());
            }
        }
        worst
    }

    /// Smallest value of `σ_k` on the closed unit cube centered at `k`, over
    /// all family members. This is the constant `c` of the lower bound.
    pub fn cube_floor(&self) -> f64 {
        let mut c = f64::INFINITY;
        for k in self.indices() {
            let n = self.grid.dim();
            let mut idx = vec![0; n];
            self.for_each_node(&k, |p, s| {
                self.grid.unravel(p, &mut idx);
                if (0..n).all(|a| (self.grid.xi(a, idx[a]) - k[a] as f64).abs() <= 0.5 + 1e-12) {
                    c = c.min(s);
                }
            });
        }
        c
    }

    /// Fraction of the energy of a frequency field lying outside `|ξ|∞ ≤ K`.
    pub fn uncovered_fraction(&self, fhat: &Field) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let k = self.k_max as f64 + 1e-12;
        let mut idx = vec![0; n];
        let inside: Vec<bool> = (0..g.len())
            .map(|p| {
                g.unravel(p, &mut idx);
                (0..n).all(|a| g.xi(a, idx[a]).abs() <= k)
            })
            .collect();
        let (mut outside, mut total) = (0.0, 0.0);
        for (q, z) in fhat.data().iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if !inside[q % g.len()] {
                outside += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }

    /// Rows `(k, axis, node, η)` for plotting.
    pub fn dump(&self) -> Vec<(i64, usize, usize, f64)> {
        let mut rows = Vec::new();
        for (a, tabs) in self.tables.iter().enumerate() {
            for (i, t) in tabs.iter().enumerate() {
                for &(j, v) in t {
                    rows.push((i as i64 - self.k_max, a, j, v));
                }
            }
        }
        rows
    }
}

pub fn build_family(grid: &Grid, k_max: i64) -> Result<DecompFamily> {
    DecompFamily::new(grid, k_max)
}

fn to_rep(mut out: Field, like: &Field) -> Field {
    let n = like.grid().dim();
    if let crate::field::Rep::Partial(mask) = like.rep() {
        let axes: Vec<usize> = (0..n).filter(|&a| mask & (1 << a) == 0).collect();
        out = out.inverse_axes(&axes).expect("axes are in frequency");
    }
    out
}

/// Angular bump: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn psi(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let u = h(2.0 - x);
        u / (u + h(x - 1.0))
    }
}

/// `ψ₁(ξ) = ψ(ξ₂ / 2ξ₁)`, with `ψ₁ = 0` on the line `ξ₁ = 0, ξ₂ ≠ 0` and
/// `ψ₁(0) = 1`.
pub fn psi1(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        if xi2 == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        psi(xi2 / (2.0 * xi1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Angular {
    P1,
    P2,
}

impl Angular {
    pub fn symbol(self, xi1: f64, xi2: f64) -> f64 {
        match self {
            Angular::P1 => psi1(xi1, xi2),
            Angular::P2 => 1.0 - psi1(xi1, xi2),
        }
    }
}

pub fn apply_angular(which: Angular, f: &Field) -> Result<Field> {
    if f.grid().dim() < 2 {
        return Err(Error::Invalid("angular projections need n ≥ 2".into()));
    }
    Ok(f.multiplier(|xi| C64::new(which.symbol(xi[0], xi[1]), 0.0)))
}

/// Shell index of `|ξ|`: 0 for `|ξ| ≤ 1`, `j` for `2^{j−1} < |ξ| ≤ 2^j`.
pub fn shell(xi_norm: f64) -> u32 {
    if xi_norm <= 1.0 {
        0
    } else {
        let mut j = 1;
        while xi_norm > (1u64 << j) as f64 {
            j += 1;
        }
        j
    }
}

/// Apply a multiplier to a spatial field and report `‖φ(D)f‖_r / ‖f‖_r`.
pub fn bernstein_apply(phi: impl Fn(&[f64]) -> f64, f: &Field, r: f64) -> Result<(Field, f64)> {
    if f.kind() != Kind::Spatial {
        return Err(Error::Invalid("multiplier ratio needs a spatial field".into()));
    }
    let out = f.multiplier(|xi| C64::new(phi(xi), 0.0));
    let num = lp_spatial(&out.to_physical(), r)?;
    let den = lp_spatial(&f.to_physical(), r)?;
    Ok((out, if den == 0.0 { 0.0 } else { num / den }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_partitions_the_line() {
        for i in 0..2000 {
            let s = -5.0 + i as f64 * 0.005;
            let total: f64 = (-8..=8).map(|k| eta(s - k as f64)).sum();
            assert!((total - 1.0).abs() < 1e-14, "s = {s}: {total}");
        }
    }

    #[test]
    fn eta_support_and_plateau() {
        assert_eq!(eta(1.0), 0.0);
        assert_eq!(eta(-1.0), 0.0);
        assert_eq!(eta(0.0), 1.0);
        assert!((eta(0.5) - 0.5).abs() < 1e-15);
        // ρ(−3/4) = 1/2, so η(1/4) = 1/(1 + 1/2)
        assert!((eta(0.25) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn psi_limits() {
        assert_eq!(psi(0.7), 1.0);
        assert_eq!(psi(2.5), 0.0);
        assert!(psi(1.5) > 0.0 && psi(1.5) < 1.0);
        assert_eq!(psi1(0.0, 1.0), 0.0);
        assert_eq!(psi1(0.0, 0.0), 1.0);
    }

    #[test]
    fn shells() {
        assert_eq!(shell(0.5), 0);
        assert_eq!(shell(1.0), 0);
        assert_eq!(shell(1.5), 1);
        assert_eq!(shell(2.0), 1);
        assert_eq!(shell(2.01), 2);
    }
}
