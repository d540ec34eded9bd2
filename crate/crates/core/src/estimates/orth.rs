//! Support arithmetic of products of boxes: `□_k(Π_i □_{k⁽ⁱ⁾} f_i) = 0`
//! once `k` is far from `Σ_i k⁽ⁱ⁾`, checked by exact sparse convolution on the
//! frequency lattice.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use super::{EstimateId, EstimateReport, EstimateSpec, Ensemble, SampleRatio};
use crate::decomp::{eta, DecompFamily};
use crate::ensemble::{complex_normal, rng};
use crate::error::{invalid, Result};
use crate::field::{Field, Kind, Rep};

/// Dense block of lattice coefficients `ξ = mΔξ`, `m ∈ lo + [0, shape)`.
#[derive(Clone, Debug)]
struct Block {
    lo: Vec<i64>,
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Block {
    fn len(shape: &[usize]) -> usize {
        shape.iter().product()
    }

    fn unravel(shape: &[usize], mut p: usize, out: &mut [usize]) {
        for a in (0..shape.len()).rev() {
            out[a] = p % shape[a];
            p /= shape[a];
        }
    }

    /// Random coefficients times `σ_k` on the nodes where `σ_k ≠ 0`.
    fn random_box(k: &[i64], r: u32, rng: &mut impl Rng) -> Block {
        let s = 1i64 << r;
        let dxi = 1.0 / s as f64;
        let n = k.len();
        let lo: Vec<i64> = k.iter().map(|&c| c * s - s + 1).collect();
        let shape = vec![(2 * s - 1) as usize; n];
        let mut idx = vec![0; n];
        let data = (0..Block::len(&shape))
            .map(|p| {
                Block::unravel(&shape, p, &mut idx);
                let w: f64 = (0..n).map(|a| eta((lo[a] + idx[a] as i64) as f64 * dxi - k[a] as f64)).product();
                let z = complex_normal(rng);
                if w == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    z * w
                }
            })
            .collect();
        Block { lo, shape, data }
    }

    fn convolve(&self, other: &Block) -> Block {
        let n = self.lo.len();
        let lo: Vec<i64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect();
        let shape: Vec<usize> = self.shape.iter().zip(&other.shape).map(|(a, b)| a + b - 1).collect();
        let mut data = vec![C64::new(0.0, 0.0); Block::len(&shape)];
        let mut ia = vec![0; n];
        let mut ib = vec![0; n];
        for (pa, za) in self.data.iter().enumerate() {
            if za.re == 0.0 && za.im == 0.0 {
                continue;
            }
            Block::unravel(&self.shape, pa, &mut ia);
            for (pb, zb) in other.data.iter().enumerate() {
                if zb.re == 0.0 && zb.im == 0.0 {
                    continue;
                }
                Block::unravel(&other.shape, pb, &mut ib);
                let mut q = 0;
                for a in 0..n {
                    q = q * shape[a] + ia[a] + ib[a];
                }
                data[q] += za * zb;
            }
        }
        Block { lo, shape, data }
    }

    /// `‖σ_k · self‖_{ℓ²}` over the lattice.
    fn boxed_norm(&self, k: &[i64], r: u32) -> f64 {
        let dxi = 1.0 / (1i64 << r) as f64;
        let n = self.lo.len();
        let mut idx = vec![0; n];
        let mut e = 0.0;
        for (p, z) in self.data.iter().enumerate() {
            if z.re == 0.0 && z.im == 0.0 {
                continue;
            }
            Block::unravel(&self.shape, p, &mut idx);
            let w: f64 = (0..n).map(|a| eta((self.lo[a] + idx[a] as i64) as f64 * dxi - k[a] as f64)).product();
            e += w * w * z.norm_sqr();
        }
        e.sqrt()
    }

    fn l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthTuple {
    pub factors: Vec<Vec<i64>>,
    pub k: Vec<i64>,
    /// Seed of the factor coefficients.
    pub seed: u64,
}

impl OrthTuple {
    /// `|k − Σ_i k⁽ⁱ⁾|∞`.
    pub fn distance(&self) -> i64 {
        (0..self.k.len())
            .map(|a| (self.k[a] - self.factors.iter().map(|f| f[a]).sum::<i64>()).abs())
            .max()
            .unwrap_or(0)
    }

    fn blocks(&self, r: u32) -> Vec<Block> {
        let mut g = rng(self.seed);
        self.factors.iter().map(|k| Block::random_box(k, r, &mut g)).collect()
    }

    /// `‖□_k Π_i □_{k⁽ⁱ⁾} f_i‖ / Π_i ‖□_{k⁽ⁱ⁾} f_i‖` in lattice `ℓ²`.
    fn sparse_ratio(&self, r: u32) -> f64 {
        let blocks = self.blocks(r);
        let norms: f64 = blocks.iter().map(Block::l2).product();
        let mut acc = blocks[0].clone();
        for b in &blocks[1..] {
            acc = acc.convolve(b);
        }
        acc.boxed_norm(&self.k, r) / norms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthFailure {
    pub tuple: OrthTuple,
    pub distance: i64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthReport {
    pub dim: usize,
    pub r: u32,
    pub factors: usize,
    pub tuples: usize,
    /// `(κ+1)⌈√n⌉ + 1`: outputs must vanish beyond this distance.
    pub coarse_radius: i64,
    /// `κ + 2`: the exact lattice bound, outputs vanish at or beyond it.
    pub sharp_radius: i64,
    pub beyond_coarse: usize,
    pub beyond_sharp: usize,
    pub coarse_failures: Vec<OrthFailure>,
    pub sharp_failures: Vec<OrthFailure>,
    /// Largest distance with a nonzero output.
    pub max_nonzero_distance: i64,
    pub distances: Vec<i64>,
    pub ratios: Vec<f64>,
}

/// Draw `tuples` random index tuples with `factors` boxes each, factor indices
/// in `[−k_range, k_range]ⁿ` and `k` within `coarse_radius + 2` of their sum,
/// and compute every output exactly on the lattice `Δξ = 2^{-r}`.
pub fn orth_check(n: usize, r: u32, factors: usize, tuples: usize, k_range: i64, seed: u64) -> Result<OrthReport> {
    if !(1..=3).contains(&n) || factors == 0 || !(1..=6).contains(&r) {
        return invalid(format!("unsupported ORTH setup n = {n}, r = {r}, factors = {factors}"));
    }
    let root = (n as f64).sqrt().ceil() as i64;
    let coarse_radius = factors as i64 * root + 1;
    let sharp_radius = factors as i64 + 1;
    let spread = coarse_radius + 2;
    let mut g = rng(seed);
    let mut report = OrthReport {
        dim: n,
        r,
        factors,
        tuples,
        coarse_radius,
        sharp_radius,
        beyond_coarse: 0,
        beyond_sharp: 0,
        coarse_failures: vec![],
        sharp_failures: vec![],
        max_nonzero_distance: -1,
        distances: Vec::with_capacity(tuples),
        ratios: Vec::with_capacity(tuples),
    };
    for _ in 0..tuples {
        let fs: Vec<Vec<i64>> = (0..factors).map(|_| (0..n).map(|_| g.gen_range(-k_range..=k_range)).collect()).collect();
        let k: Vec<i64> =
            (0..n).map(|a| fs.iter().map(|f| f[a]).sum::<i64>() + g.gen_range(-spread..=spread)).collect();
        let t = OrthTuple { factors: fs, k, seed: g.gen() };
        let d = t.distance();
        let ratio = t.sparse_ratio(r);
        if ratio != 0.0 {
            report.max_nonzero_distance = report.max_nonzero_distance.max(d);
        }
        if d > coarse_radius {
            report.beyond_coarse += 1;
            if ratio != 0.0 {
                report.coarse_failures.push(OrthFailure { tuple: t.clone(), distance: d, ratio });
            }
        }
        if d >= sharp_radius {
            report.beyond_sharp += 1;
            if ratio != 0.0 {
                report.sharp_failures.push(OrthFailure { tuple: t.clone(), distance: d, ratio });
            }
        }
        report.distances.push(d);
        report.ratios.push(ratio);
    }
    Ok(report)
}

/// Recompute one tuple through physical-space products and FFTs on the
/// family's grid. Returns `(sparse ratio, FFT ratio)`. The grid must hold the
/// product spectrum without aliasing.
pub fn orth_fft_crosscheck(family: &DecompFamily, tuple: &OrthTuple) -> Result<(f64, f64)> {
    let g = family.grid();
    let n = g.dim();
    let r = g.r();
    let reach: i64 = (0..n)
        .map(|a| tuple.factors.iter().map(|f| f[a].abs()).sum::<i64>() + tuple.factors.len() as i64)
        .max()
        .unwrap_or(0);
    if reach as f64 >= g.nyquist() {
        return invalid(format!("product spectrum reaches {reach}, beyond the Nyquist limit {}", g.nyquist()));
    }
    let blocks = tuple.blocks(r);
    let mut product: Option<Field> = None;
    let mut idx = vec![0; n];
    let strides = g.strides();
    for b in &blocks {
        let mut data = vec![C64::new(0.0, 0.0); g.len()];
        for (p, z) in b.data.iter().enumerate() {
            Block::unravel(&b.shape, p, &mut idx);
            let mut flat = 0;
            for a in 0..n {
                let j = g.index_of_freq(a, b.lo[a] + idx[a] as i64).expect("checked against Nyquist");
                flat += j * strides[a];
            }
            data[flat] = *z;
        }
        let f = Field::from_vec(g, Kind::Spatial, Rep::Frequency, data)?.into_physical();
        product = Some(match product {
            None => f,
            Some(acc) => acc.map_with(&f, |x, y| x * y)?,
        });
    }
    let total = g.len() as f64;
    let scale = total.powf(0.5 * (blocks.len() as f64 - 1.0));
    let out = family.apply_box(&tuple.k, &product.expect("at least one factor").into_frequency())?;
    let norms: f64 = blocks.iter().map(Block::l2).product();
    let coeff = out.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok((tuple.sparse_ratio(r), scale * coeff / norms))
}

pub(super) fn orth_report(
    spec: &EstimateSpec,
    n: usize,
    r: u32,
    ens: &Ensemble,
    seeds: Vec<u64>,
) -> Result<EstimateReport> {
    let rep = orth_check(n, r, 3, ens.samples, 3, ens.seed)?;
    let samples: Vec<SampleRatio> = rep
        .distances
        .iter()
        .zip(&rep.ratios)
        .enumerate()
        .filter(|(_, (d, _))| **d > rep.coarse_radius)
        .map(|(i, (_, &ratio))| SampleRatio { seed: seeds[i], k: None, lhs: ratio, rhs: 1.0, power: 1.0, ratio })
        .collect();
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let mean_ratio =
        if samples.is_empty() { 0.0 } else { samples.iter().map(|s| s.ratio).sum::<f64>() / samples.len() as f64 };
    Ok(EstimateReport {
        id: EstimateId::Orth,
        params: spec.params,
        growth: "0".into(),
        grid: [0.0, r as f64, 0.0, 0.0],
        seeds,
        skipped: ens.samples - samples.len(),
        samples,
        max_ratio,
        mean_ratio,
        per_box: vec![],
        fit: None,
    })
}
