//! Seeded random band-limited test data.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{Field, Kind, Rep};
use crate::grid::Grid;

/// Frequency support of a random field.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Euclidean ball of radius `√n` around the integer point `k`.
    Cube(Vec<i64>),
    /// All frequencies with `|ξ|∞ ≤ K`.
    Ball(i64),
}

impl Support {
    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            Support::Cube(k) => {
                let n = xi.len() as f64;
                let d2: f64 = xi.iter().zip(k).map(|(x, &k)| (x - k as f64).powi(2)).sum();
                d2 <= n + 1e-12
            }
            Support::Ball(kk) => xi.iter().all(|x| x.abs() <= *kk as f64 + 1e-12),
        }
    }

    /// Largest `|ξ_i|` the support reaches on any axis.
    pub fn reach(&self, n: usize) -> f64 {
        match self {
            Support::Cube(k) => k.iter().map(|k| k.abs() as f64).fold(0.0, f64::max) + (n as f64).sqrt(),
            Support::Ball(kk) => *kk as f64,
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if let Support::Cube(k) = self {
            if k.len() != grid.dim() {
                return Err(Error::Invalid(format!("box index has {} entries, expected {}", k.len(), grid.dim())));
            }
        }
        // nodes exist up to Δξ(N/2 − 1) on the positive side
        let top = grid.nyquist() - grid.dxi();
        if self.reach(grid.dim()) > top + 1e-12 {
            return Err(Error::Nyquist(format!(
                "support reaches |ξ| = {:.3}, grid resolves {:.3}",
                self.reach(grid.dim()),
                top
            )));
        }
        Ok(())
    }

    /// 0/1 indicator on the frequency grid.
    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let n = grid.dim();
        let xis: Vec<Vec<f64>> = (0..n).map(|a| grid.xi_axis(a)).collect();
        let mut idx = vec![0; n];
        let mut xi = vec![0.0; n];
        (0..grid.len())
            .map(|p| {
                grid.unravel(p, &mut idx);
                for a in 0..n {
                    xi[a] = xis[a][idx[a]];
                }
                self.contains(&xi)
            })
            .collect()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent complex Gaussian coefficients on the support, zero elsewhere,
/// unit L² norm. Returned in frequency representation so the support is exact.
pub fn random_band_limited(grid: &Grid, support: &Support, seed: u64) -> Result<Field> {
    support.check(grid)?;
    let mut r = rng(seed);
    let mask = support.mask(grid);
    let data: Vec<C64> =
        mask.iter().map(|&m| if m { complex_normal(&mut r) } else { C64::new(0.0, 0.0) }).collect();
    let f = Field::from_vec(grid, Kind::Spatial, Rep::Frequency, data)?;
    normalize(f)
}

/// Band-limited field concentrated near the origin in space.
///
/// White noise is multiplied by a Gaussian of standard deviation `width`,
/// transformed, and cut to the support, so the support stays exact while the
/// packet has physical size of order `width` plus the band-limiting blur.
/// Frequency representation.
pub fn random_localized(grid: &Grid, support: &Support, width: f64, seed: u64) -> Result<Field> {
    support.check(grid)?;
    if !(width > 0.0) {
        return Err(Error::Invalid(format!("window width {width} must be positive")));
    }
    let n = grid.dim();
    let mut r = rng(seed);
    let mut idx = vec![0; n];
    let data: Vec<C64> = (0..grid.len())
        .map(|p| {
            grid.unravel(p, &mut idx);
            let x2: f64 = (0..n).map(|a| grid.x_centered(a, idx[a]).powi(2)).sum();
            complex_normal(&mut r) * (-x2 / (2.0 * width * width)).exp()
        })
        .collect();
    let mut f = Field::from_vec(grid, Kind::Spatial, Rep::Physical, data)?.into_frequency();
    let mask = support.mask(grid);
    f.data_mut().iter_mut().zip(&mask).for_each(|(z, &m)| {
        if !m {
            *z = C64::new(0.0, 0.0);
        }
    });
    normalize(f)
}

/// Space-time forcing `Σ_r φ_r(t) g_r(x)` with a few localized profiles `g_r`
/// and Gaussian time bumps of standard deviation `t_width` centered uniformly
/// in `[-t_spread, t_spread]`. The centers and widths do not depend on the
/// grid's time window, so the same seed gives the same continuum forcing on
/// any window that contains it. Unit space-time L² norm, frequency
/// representation.
pub fn random_forcing(
    grid: &Grid,
    support: &Support,
    width: f64,
    t_width: f64,
    t_spread: f64,
    terms: usize,
    seed: u64,
) -> Result<Field> {
    let mut r = rng(seed);
    let mut profiles = Vec::with_capacity(terms);
    for _ in 0..terms {
        let g = random_localized(grid, support, width, r.gen())?;
        let center = t_spread * (2.0 * r.gen::<f64>() - 1.0);
        profiles.push((g, center, complex_normal(&mut r)));
    }
    let mut out = Field::zeros(grid, Kind::SpaceTime).into_frequency();
    for m in 0..grid.nt() {
        let t = grid.time(m);
        let slice = out.slice_mut(m);
        for (g, c, a) in &profiles {
            let phi = *a * (-(t - c).powi(2) / (2.0 * t_width * t_width)).exp();
            slice.iter_mut().zip(g.data()).for_each(|(s, v)| *s += phi * v);
        }
    }
    normalize(out)
}

fn normalize(f: Field) -> Result<Field> {
    let norm = f.l2();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical("random field has zero norm".into()));
    }
    Ok(f.scale(C64::new(1.0 / norm, 0.0)))
}
