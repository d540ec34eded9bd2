//! Complex samples on a [`Grid`], spatial or space-time, with a per-axis
//! record of which spatial axes are currently in frequency representation.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{transform_axis, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Spatial,
    SpaceTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Physical,
    Frequency,
    /// Bit `a` set means axis `a` is in frequency representation.
    Partial(u8),
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    kind: Kind,
    freq: u8,
    data: Vec<C64>,
}

impl Field {
    pub fn zeros(grid: &Grid, kind: Kind) -> Self {
        let slices = match kind {
            Kind::Spatial => 1,
            Kind::SpaceTime => grid.nt(),
        };
        Field { grid: grid.clone(), kind, freq: 0, data: vec![C64::new(0.0, 0.0); slices * grid.len()] }
    }

    /// Spatial field in frequency representation with `f̂(ξ) = symbol(ξ)`.
    pub fn from_symbol(grid: &Grid, symbol: impl Fn(&[f64]) -> C64) -> Self {
        let n = grid.dim();
        let mut idx = vec![0; n];
        let mut xi = vec![0.0; n];
        let data = (0..grid.len())
            .map(|p| {
                grid.unravel(p, &mut idx);
                for a in 0..n {
                    xi[a] = grid.xi(a, idx[a]);
                }
                symbol(&xi)
            })
            .collect();
        Field { grid: grid.clone(), kind: Kind::Spatial, freq: ((1u16 << n) - 1) as u8, data }
    }

    pub fn from_vec(grid: &Grid, kind: Kind, rep: Rep, data: Vec<C64>) -> Result<Self> {
        let mut f = Field::zeros(grid, kind);
        if data.len() != f.data.len() {
            return Err(Error::Invalid(format!("expected {} samples, got {}", f.data.len(), data.len())));
        }
        f.data = data;
        f.freq = f.mask_of(rep);
        Ok(f)
    }

    /// Space-time field whose slices are the given spatial fields.
    pub fn stack(grid: &Grid, slices: &[Field]) -> Result<Self> {
        if slices.len() != grid.nt() {
            return Err(Error::Invalid(format!("expected {} slices, got {}", grid.nt(), slices.len())));
        }
        let mut out = Field::zeros(grid, Kind::SpaceTime);
        let rep = slices[0].freq;
        for (m, s) in slices.iter().enumerate() {
            if s.kind != Kind::Spatial || s.grid.points() != grid.points() {
                return Err(Error::Invalid("slice is not a spatial field on this grid".into()));
            }
            if s.freq != rep {
                return Err(Error::Rep("slices in different representations".into()));
            }
            out.slice_mut(m).copy_from_slice(&s.data);
        }
        out.freq = rep;
        Ok(out)
    }

    fn full_mask(&self) -> u8 {
        ((1u16 << self.grid.dim()) - 1) as u8
    }

    fn mask_of(&self, rep: Rep) -> u8 {
        match rep {
            Rep::Physical => 0,
            Rep::Frequency => self.full_mask(),
            Rep::Partial(m) => m & self.full_mask(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kind(&self) -> Kind {
        self.kind
    }
    pub fn rep(&self) -> Rep {
        match self.freq {
            0 => Rep::Physical,
            m if m == self.full_mask() => Rep::Frequency,
            m => Rep::Partial(m),
        }
    }
    pub fn is_physical(&self) -> bool {
        self.freq == 0
    }
    pub fn is_frequency(&self) -> bool {
        self.freq == self.full_mask()
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }
    pub fn slices(&self) -> usize {
        self.data.len() / self.grid.len()
    }
    pub fn slice(&self, m: usize) -> &[C64] {
        let len = self.grid.len();
        &self.data[m * len..(m + 1) * len]
    }
    pub fn slice_mut(&mut self, m: usize) -> &mut [C64] {
        let len = self.grid.len();
        &mut self.data[m * len..(m + 1) * len]
    }
    /// Slice `m` as a standalone spatial field.
    pub fn at(&self, m: usize) -> Field {
        Field { grid: self.grid.clone(), kind: Kind::Spatial, freq: self.freq, data: self.slice(m).to_vec() }
    }

    fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.slices()];
        s.extend_from_slice(self.grid.points());
        s
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        match axes.iter().find(|&&a| a >= self.grid.dim()) {
            Some(a) => Err(Error::Invalid(format!("axis {a} out of range for n = {}", self.grid.dim()))),
            None => Ok(()),
        }
    }

    /// Forward transform over `axes`; every listed axis must be physical.
    pub fn forward_axes(&self, axes: &[usize]) -> Result<Field> {
        self.check_axes(axes)?;
        if let Some(a) = axes.iter().find(|&&a| self.freq & (1 << a) != 0) {
            return Err(Error::Rep(format!("axis {a} is already in frequency representation")));
        }
        let mut out = self.clone();
        out.transform(axes, false);
        Ok(out)
    }

    /// Inverse transform over `axes`; every listed axis must be in frequency.
    pub fn inverse_axes(&self, axes: &[usize]) -> Result<Field> {
        self.check_axes(axes)?;
        if let Some(a) = axes.iter().find(|&&a| self.freq & (1 << a) == 0) {
            return Err(Error::Rep(format!("axis {a} is already in physical representation")));
        }
        let mut out = self.clone();
        out.transform(axes, true);
        Ok(out)
    }

    pub fn forward(&self) -> Result<Field> {
        if self.freq != 0 {
            return Err(Error::Rep("forward transform needs a physical field".into()));
        }
        let axes: Vec<usize> = (0..self.grid.dim()).collect();
        self.forward_axes(&axes)
    }

    pub fn inverse(&self) -> Result<Field> {
        if !self.is_frequency() {
            return Err(Error::Rep("inverse transform needs a frequency field".into()));
        }
        let axes: Vec<usize> = (0..self.grid.dim()).collect();
        self.inverse_axes(&axes)
    }

    fn transform(&mut self, axes: &[usize], inverse: bool) {
        let shape = self.shape();
        for &a in axes {
            transform_axis(&mut self.data, &shape, a + 1, inverse);
            if inverse {
                self.freq &= !(1 << a);
            } else {
                self.freq |= 1 << a;
            }
        }
    }

    /// Full frequency representation, converting whatever axes are needed.
    pub fn to_frequency(&self) -> Field {
        let axes: Vec<usize> = (0..self.grid.dim()).filter(|&a| self.freq & (1 << a) == 0).collect();
        let mut out = self.clone();
        out.transform(&axes, false);
        out
    }

    pub fn to_physical(&self) -> Field {
        let axes: Vec<usize> = (0..self.grid.dim()).filter(|&a| self.freq & (1 << a) != 0).collect();
        let mut out = self.clone();
        out.transform(&axes, true);
        out
    }

    pub fn into_frequency(mut self) -> Field {
        let axes: Vec<usize> = (0..self.grid.dim()).filter(|&a| self.freq & (1 << a) == 0).collect();
        self.transform(&axes, false);
        self
    }

    pub fn into_physical(mut self) -> Field {
        let axes: Vec<usize> = (0..self.grid.dim()).filter(|&a| self.freq & (1 << a) != 0).collect();
        self.transform(&axes, true);
        self
    }

    /// Sum of squared moduli times the Riemann weight (cell volume, and `Δt`
    /// for space-time fields). Identical in both representations.
    pub fn energy(&self) -> f64 {
        let w = match self.kind {
            Kind::Spatial => self.grid.cell(),
            Kind::SpaceTime => self.grid.cell() * self.grid.dt(),
        };
        w * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn l2(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Spatial L² norm of slice `m`.
    pub fn l2_slice(&self, m: usize) -> f64 {
        (self.grid.cell() * self.slice(m).iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    pub fn scale(&self, c: C64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.kind != other.kind || self.grid.points() != other.grid.points() || self.data.len() != other.data.len()
        {
            return Err(Error::Invalid("fields live on different grids".into()));
        }
        if self.freq != other.freq {
            return Err(Error::Rep("fields in different representations".into()));
        }
        Ok(())
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: C64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += c * b);
        Ok(out)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// Multiply every slice by a real symbol sampled on the frequency grid.
    pub fn apply_symbol(&self, symbol: &[f64]) -> Result<Field> {
        if !self.is_frequency() {
            return Err(Error::Rep("symbol multiplication needs a frequency field".into()));
        }
        let mut out = self.clone();
        let len = self.grid.len();
        for chunk in out.data.chunks_mut(len) {
            chunk.iter_mut().zip(symbol).for_each(|(z, &s)| *z *= s);
        }
        Ok(out)
    }

    /// Apply a real or complex multiplier in whatever representation the field
    /// is in, returning the result in the input representation.
    pub fn multiplier(&self, symbol: impl Fn(&[f64]) -> C64) -> Field {
        let rep = self.freq;
        let mut f = self.to_frequency();
        let g = &self.grid;
        let n = g.dim();
        let xis: Vec<Vec<f64>> = (0..n).map(|a| g.xi_axis(a)).collect();
        let mut idx = vec![0; n];
        let mut xi = vec![0.0; n];
        let table: Vec<C64> = (0..g.len())
            .map(|p| {
                g.unravel(p, &mut idx);
                for a in 0..n {
                    xi[a] = xis[a][idx[a]];
                }
                symbol(&xi)
            })
            .collect();
        let len = g.len();
        for chunk in f.data.chunks_mut(len) {
            chunk.iter_mut().zip(&table).for_each(|(z, s)| *z *= s);
        }
        if rep == 0 {
            f.into_physical()
        } else {
            let back: Vec<usize> = (0..n).filter(|&a| rep & (1 << a) == 0).collect();
            f.transform(&back, true);
            f
        }
    }

    /// Pointwise map in the current representation.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z = f(*z));
        out
    }

    /// Pointwise binary map of two fields in the same representation.
    pub fn map_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a = f(*a, *b));
        Ok(out)
    }

    /// Relative distance `‖self − other‖₂ / max(‖other‖₂, tiny)` in L².
    pub fn rel_diff(&self, other: &Field) -> Result<f64> {
        let d = self.sub(other)?.l2();
        Ok(d / other.l2().max(f64::MIN_POSITIVE))
    }

    /// Replace the grid by an equivalent one (same points) with a different
    /// time window or signature. Space-time fields keep their slice count.
    pub fn regrid(mut self, grid: &Grid) -> Result<Field> {
        if grid.points() != self.grid.points() {
            return Err(Error::Invalid("regrid needs identical spatial points".into()));
        }
        if self.kind == Kind::SpaceTime && grid.nt() != self.slices() {
            return Err(Error::Invalid("regrid needs identical time samples".into()));
        }
        self.grid = grid.clone();
        Ok(self)
    }
}
