//! Periodic space-time grid.
//!
//! Whole space is modelled by a torus of side `L = 2π/Δξ` with `Δξ = 2^-r`,
//! so every unit frequency cube holds exactly `2^r` nodes per axis. Time is
//! sampled on `[-T, T)` with `Nt` cells of width `Δt = 2T/Nt`; node `m` sits at
//! `t_m = -T + mΔt`, so `t = 0` is the node `Nt/2` whenever `Nt` is even.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    ns: Vec<usize>,
    r: u32,
    dxi: f64,
    l: f64,
    t_half: f64,
    nt: usize,
    eps: Vec<f64>,
}

impl Grid {
    /// Isotropic grid: `N` points on every axis.
    pub fn new(n: usize, points: usize, r: u32, t_half: f64, nt: usize, eps: &[i8]) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return invalid(format!("dimension {n} not in 1..=3"));
        }
        Self::with_points(&vec![points; n], r, t_half, nt, eps)
    }

    /// Grid with a separate point count per axis and a shared frequency spacing.
    pub fn with_points(ns: &[usize], r: u32, t_half: f64, nt: usize, eps: &[i8]) -> Result<Self> {
        let n = ns.len();
        if !(1..=3).contains(&n) {
            return invalid(format!("dimension {n} not in 1..=3"));
        }
        for &p in ns {
            if p < 2 || !p.is_power_of_two() {
                return invalid(format!("N = {p} is not a power of two"));
            }
        }
        if r < 2 || r > 20 {
            return invalid(format!("r = {r} outside 2..=20"));
        }
        if !(t_half > 0.0) || !t_half.is_finite() {
            return invalid(format!("T = {t_half} must be positive"));
        }
        if nt < 2 {
            return invalid(format!("Nt = {nt} must be at least 2"));
        }
        if eps.len() != n {
            return invalid(format!("signature has {} entries, expected {n}", eps.len()));
        }
        if eps.iter().any(|&e| e != 1 && e != -1) {
            return invalid("signature entries must be +1 or -1");
        }
        let dxi = 0.5f64.powi(r as i32);
        Ok(Grid {
            n,
            ns: ns.to_vec(),
            r,
            dxi,
            l: 2.0 * PI / dxi,
            t_half,
            nt,
            eps: eps.iter().map(|&e| f64::from(e)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn points(&self) -> &[usize] {
        &self.ns
    }
    pub fn points_on(&self, axis: usize) -> usize {
        self.ns[axis]
    }
    pub fn r(&self) -> u32 {
        self.r
    }
    pub fn dxi(&self) -> f64 {
        self.dxi
    }
    pub fn side(&self) -> f64 {
        self.l
    }
    pub fn t_half(&self) -> f64 {
        self.t_half
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }
    pub fn dt(&self) -> f64 {
        2.0 * self.t_half / self.nt as f64
    }
    pub fn time(&self, m: usize) -> f64 {
        -self.t_half + m as f64 * self.dt()
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|m| self.time(m)).collect()
    }
    /// Index of the `t = 0` node, if the time grid has one.
    pub fn zero_index(&self) -> Option<usize> {
        (self.nt % 2 == 0).then_some(self.nt / 2)
    }
    pub fn len(&self) -> usize {
        self.ns.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.l / self.ns[axis] as f64
    }
    /// Riemann weight of one spatial cell.
    pub fn cell(&self) -> f64 {
        (0..self.n).map(|a| self.spacing(a)).product()
    }
    /// Largest `|ξ_i|` representable on every axis: `Δξ · min N_i / 2`.
    pub fn nyquist(&self) -> f64 {
        self.dxi * (*self.ns.iter().min().unwrap() / 2) as f64
    }
    pub fn nyquist_on(&self, axis: usize) -> f64 {
        self.dxi * (self.ns[axis] / 2) as f64
    }

    /// Signed integer frequency of FFT index `j` on `axis`: `ξ = Δξ · m`.
    pub fn freq_index(&self, axis: usize, j: usize) -> i64 {
        let p = self.ns[axis];
        if j < p / 2 {
            j as i64
        } else {
            j as i64 - p as i64
        }
    }
    /// FFT index of signed frequency `m`, or `None` outside `[-N/2, N/2)`.
    pub fn index_of_freq(&self, axis: usize, m: i64) -> Option<usize> {
        let p = self.ns[axis] as i64;
        if m < -p / 2 || m >= p / 2 {
            None
        } else {
            Some(m.rem_euclid(p) as usize)
        }
    }
    pub fn xi(&self, axis: usize, j: usize) -> f64 {
        self.dxi * self.freq_index(axis, j) as f64
    }
    pub fn xi_axis(&self, axis: usize) -> Vec<f64> {
        (0..self.ns[axis]).map(|j| self.xi(axis, j)).collect()
    }
    /// Spatial node `x_j = (L/N) j`.
    pub fn x(&self, axis: usize, j: usize) -> f64 {
        self.spacing(axis) * j as f64
    }
    /// Periodic coordinate of node `j` folded into `[-L/2, L/2)`.
    pub fn x_centered(&self, axis: usize, j: usize) -> f64 {
        self.spacing(axis) * self.freq_index(axis, j) as f64
    }
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n];
        for a in (0..self.n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.ns[a + 1];
        }
        s
    }
    /// Multi-index of the flat position `p`.
    pub fn unravel(&self, mut p: usize, out: &mut [usize]) {
        for a in (0..self.n).rev() {
            out[a] = p % self.ns[a];
            p /= self.ns[a];
        }
    }

    /// Same torus with a new time window.
    pub fn with_time(&self, t_half: f64, nt: usize) -> Result<Self> {
        let eps: Vec<i8> = self.eps.iter().map(|&e| e as i8).collect();
        Grid::with_points(&self.ns, self.r, t_half, nt, &eps)
    }
    /// Same frequency spacing and time window, new point counts.
    pub fn resized(&self, ns: &[usize]) -> Result<Self> {
        let eps: Vec<i8> = self.eps.iter().map(|&e| e as i8).collect();
        Grid::with_points(ns, self.r, self.t_half, self.nt, &eps)
    }

    /// Free Schrödinger dispersion `Σ ε_j ξ_j²` at flat frequency index `p`.
    pub fn dispersion(&self) -> Vec<f64> {
        let xis: Vec<Vec<f64>> = (0..self.n).map(|a| self.xi_axis(a)).collect();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0; self.n];
        for (p, w) in out.iter_mut().enumerate() {
            self.unravel(p, &mut idx);
            *w = (0..self.n).map(|a| self.eps[a] * xis[a][idx[a]].powi(2)).sum();
        }
        out
    }
}

pub fn make_grid(n: usize, points: usize, r: u32, t_half: f64, nt: usize, eps: &[i8]) -> Result<Grid> {
    Grid::new(n, points, r, t_half, nt, eps)
}

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap();
    let (planner, map) = &mut *guard;
    map.entry((len, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) })
        .clone()
}

/// Unitary 1-D transforms along `axis` of every line of a row-major block.
///
/// Lines that are identically zero are skipped, which matters for box
/// localised data where most lines vanish.
pub(crate) fn transform_axis(data: &mut [C64], shape: &[usize], axis: usize, inverse: bool) {
    let len = shape[axis];
    if len == 1 {
        return;
    }
    let stride: usize = shape[axis + 1..].iter().product();
    let block = len * stride;
    let fft = plan(len, inverse);
    let scale = 1.0 / (len as f64).sqrt();
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf: Vec<C64> = Vec::with_capacity(block);
    let mut live: Vec<usize> = Vec::with_capacity(stride);
    for chunk in data.chunks_mut(block) {
        if stride == 1 {
            if chunk.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            fft.process_with_scratch(chunk, &mut scratch);
            chunk.iter_mut().for_each(|z| *z *= scale);
            continue;
        }
        live.clear();
        buf.clear();
        for i in 0..stride {
            if (0..len).any(|j| {
                let z = chunk[j * stride + i];
                z.re != 0.0 || z.im != 0.0
            }) {
                live.push(i);
                buf.extend((0..len).map(|j| chunk[j * stride + i]));
            }
        }
        if live.is_empty() {
            continue;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (line, &i) in live.iter().enumerate() {
            for j in 0..len {
                chunk[j * stride + i] = buf[line * len + j] * scale;
            }
        }
    }
}

/// Unitary 1-D transform of a single contiguous vector.
pub fn fft_1d(data: &mut [C64], inverse: bool) {
    let n = data.len();
    transform_axis(data, &[n], 0, inverse);
}
