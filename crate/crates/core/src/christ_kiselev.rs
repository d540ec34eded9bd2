//! Whitney decomposition of the triangle `{x < y} ⊂ [0,1]²`, the level
//! function `F`, preimage bounds and the restriction identity
//! `T_re f = Σ_{I∼J} χ_{F⁻¹(J)} T(χ_{F⁻¹(I)} f)` on a discrete time grid.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, Kind, Rep};
use crate::grid::Grid;
use crate::norms::{mixed_norm, MixedNormSpec};

/// `[a 2^{-j}, (a+1) 2^{-j})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub offset: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, offset: u64) -> Result<Self> {
        if level == 0 || level > 62 || offset >= 1u64 << level {
            return invalid(format!("no dyadic interval at level {level}, offset {offset}"));
        }
        Ok(DyadicInterval { level, offset })
    }
    pub fn len(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }
    pub fn lo(&self) -> f64 {
        self.offset as f64 * self.len()
    }
    pub fn hi(&self) -> f64 {
        (self.offset + 1) as f64 * self.len()
    }
    /// Half-open membership.
    pub fn contains(&self, y: f64) -> bool {
        self.lo() <= y && y < self.hi()
    }
    pub fn dist(&self, other: &DyadicInterval) -> f64 {
        (other.lo() - self.hi()).max(self.lo() - other.hi()).max(0.0)
    }
}

/// Square `I × J` with `I` on the horizontal axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct WhitneyPair {
    pub i: DyadicInterval,
    pub j: DyadicInterval,
}

impl WhitneyPair {
    pub fn level(&self) -> u32 {
        self.i.level
    }
    pub fn area(&self) -> f64 {
        self.i.len() * self.j.len()
    }
}

pub const MAX_DEPTH: u32 = 20;

/// All squares of side `≥ 2^{-J_max}`. Level 1 is the side-½ square, which
/// touches the diagonal and is split at once, so squares start at level 2:
/// each diagonal square `[a h, (a+1)h) × [(a+1)h, (a+2)h)` of the previous
/// level gives up its three quarters away from the diagonal and passes the
/// fourth on. Level `j` therefore holds `3 (2^{j−1} − 1)` squares.
pub fn whitney_decompose(j_max: u32) -> Result<Vec<WhitneyPair>> {
    if !(1..=MAX_DEPTH).contains(&j_max) {
        return invalid(format!("depth {j_max} outside 1..={MAX_DEPTH}"));
    }
    let mut out = Vec::new();
    for level in 2..=j_max {
        let parents = (1u64 << (level - 1)) - 1;
        for a in 0..parents {
            for (i, j) in [(2 * a, 2 * a + 3), (2 * a + 1, 2 * a + 3), (2 * a, 2 * a + 2)] {
                out.push(WhitneyPair { i: DyadicInterval { level, offset: i }, j: DyadicInterval { level, offset: j } });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhitneyReport {
    pub depth: u32,
    pub pairs: usize,
    /// `(level, count)`.
    pub per_level: Vec<(u32, usize)>,
    /// (i) `|I| = |J|` and `dist(I, J) ≥ |I|` for every pair.
    pub separated: bool,
    /// Every square lies in `{x < y}`.
    pub inside: bool,
    /// (ii) squares pairwise disjoint.
    pub disjoint: bool,
    /// (iii) largest number of `I` paired with one `J`.
    pub max_partners: usize,
    pub covered_area: f64,
    /// `1/2 − covered_area`.
    pub uncovered_area: f64,
}

impl WhitneyReport {
    pub fn all_hold(&self) -> bool {
        self.separated && self.inside && self.disjoint && self.max_partners <= 2
    }
}

pub fn whitney_report(depth: u32, pairs: &[WhitneyPair]) -> WhitneyReport {
    let mut per: HashMap<u32, usize> = HashMap::new();
    let mut partners: HashMap<DyadicInterval, usize> = HashMap::new();
    let mut separated = true;
    let mut inside = true;
    let mut seen: HashSet<(u32, u64, u64)> = HashSet::new();
    let mut covered = 0.0;
    for p in pairs {
        *per.entry(p.level()).or_default() += 1;
        *partners.entry(p.j).or_default() += 1;
        // exact dyadic arithmetic: compare offsets at the common level
        separated &= p.i.level == p.j.level && p.j.offset >= p.i.offset + 2;
        inside &= p.i.offset < p.j.offset;
        seen.insert((p.level(), p.i.offset, p.j.offset));
        covered += p.area();
    }
    // dyadic squares are nested or disjoint: reject duplicates and ancestors
    let mut disjoint = seen.len() == pairs.len();
    for &(l, i, j) in &seen {
        for up in 1..l {
            if seen.contains(&(l - up, i >> up, j >> up)) {
                disjoint = false;
            }
        }
    }
    let mut per_level: Vec<(u32, usize)> = per.into_iter().collect();
    per_level.sort();
    WhitneyReport {
        depth,
        pairs: pairs.len(),
        per_level,
        separated,
        inside,
        disjoint,
        max_partners: partners.values().copied().max().unwrap_or(0),
        covered_area: covered,
        uncovered_area: 0.5 - covered,
    }
}

/// `r^a − s^a ≤ C (r^b − s^b)(r^{a−b} + s^{a−b})` for `a ≥ b > 0`,
/// `0 ≤ s ≤ r`, with `C = a/b`. Returns `RHS − LHS`.
pub fn ineq_b1_gap(r: f64, s: f64, a: f64, b: f64) -> f64 {
    let c = a / b;
    c * (r.powf(b) - s.powf(b)) * (r.powf(a - b) + s.powf(a - b)) - (r.powf(a) - s.powf(a))
}

/// `r^a − s^a ≤ (r^b − s^b)^{a/b}` for `0 < a ≤ b`, `0 ≤ s ≤ r`.
/// Returns `RHS − LHS`.
pub fn ineq_b2_gap(r: f64, s: f64, a: f64, b: f64) -> f64 {
    (r.powf(b) - s.powf(b)).powf(a / b) - (r.powf(a) - s.powf(a))
}

/// Exponents `(q₁, q₂, q₃)` of `L^{q₁}_{x_i} L^{q₂}_{x'} L^{q₃}_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Exponents {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub axis: usize,
}

impl Exponents {
    pub fn new(q1: f64, q2: f64, q3: f64, axis: usize) -> Result<Self> {
        if [q1, q2, q3].iter().any(|q| !(*q >= 1.0) || q.is_infinite()) {
            return invalid(format!("exponents ({q1}, {q2}, {q3}) must be finite and ≥ 1"));
        }
        Ok(Exponents { q1, q2, q3, axis })
    }

    pub fn spec(&self) -> MixedNormSpec {
        MixedNormSpec::Anisotropic { axis: self.axis, p_axis: self.q1, p_rest: self.q2, p_time: self.q3 }
    }

    /// `min(q₂/(q₁q₃), 1/q₁, 1/q₂, 1/q₃)`.
    pub fn interval_power(&self) -> f64 {
        (self.q2 / (self.q1 * self.q3)).min(1.0 / self.q1).min(1.0 / self.q2).min(1.0 / self.q3)
    }
}

/// Hypothesis of the first restriction statement: `min pᵢ > max(max qᵢ, q₁q₃/q₂)`.
pub fn restriction_hypothesis(q: &Exponents, p: &Exponents) -> bool {
    let pmin = p.q1.min(p.q2).min(p.q3);
    let qmax = q.q1.max(q.q2).max(q.q3).max(q.q1 * q.q3 / q.q2);
    pmin > qmax
}

/// `F(t) = ‖(∫_{−T}^t |f|^{q₃})^{1/q₃}‖^{q₁}_{L^{q₁}_{x_i} L^{q₂}}` of the
/// normalized field, with `f` constant on each cell `[t_m, t_m + Δt)`.
#[derive(Clone, Debug)]
pub struct LevelFunction {
    grid: Grid,
    exps: Exponents,
    /// `‖f‖` before normalization.
    pub norm: f64,
    /// `F` at the cell boundaries `t_0, …, t_{Nt}`.
    pub values: Vec<f64>,
    /// `|f_m(x)|^{q₃} Δt` of the normalized field, per cell.
    rates: Vec<f64>,
    /// Cumulative time integrals at the cell boundaries.
    cumulative: Vec<f64>,
}

impl LevelFunction {
    pub fn new(f: &Field, exps: Exponents) -> Result<Self> {
        if f.kind() != Kind::SpaceTime {
            return invalid("the level function needs a space-time field");
        }
        let g = f.grid().clone();
        if exps.axis >= g.dim() {
            return invalid(format!("axis {} outside dimension {}", exps.axis, g.dim()));
        }
        let norm = mixed_norm(f, &exps.spec())?;
        if norm == 0.0 {
            return Err(Error::Numerical("the level function of a zero field is undefined".into()));
        }
        let phys = f.to_physical();
        let len = g.len();
        let nt = g.nt();
        let dt = g.dt();
        let rates: Vec<f64> = phys.data().iter().map(|z| dt * (z.norm() / norm).powf(exps.q3)).collect();
        let mut cumulative = vec![0.0; (nt + 1) * len];
        for m in 0..nt {
            for p in 0..len {
                cumulative[(m + 1) * len + p] = cumulative[m * len + p] + rates[m * len + p];
            }
        }
        let mut lf = LevelFunction { grid: g, exps, norm, values: vec![], rates, cumulative };
        let values = (0..=nt).map(|m| lf.outer(&lf.cumulative[m * len..(m + 1) * len])).collect();
        lf.values = values;
        // rounding can leave the last value a hair away from 1
        let last = *lf.values.last().expect("nt ≥ 1");
        if (last - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!("level function ends at {last}, not 1")));
        }
        if lf.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Numerical("level function is not monotone".into()));
        }
        Ok(lf)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn exponents(&self) -> Exponents {
        self.exps
    }

    /// `‖G^{1/q₃}‖^{q₁}` over space for a cumulative profile `G`.
    fn outer(&self, cum: &[f64]) -> f64 {
        let g = &self.grid;
        let e = &self.exps;
        let axis = e.axis;
        let stride = g.strides()[axis];
        let ni = g.points_on(axis);
        let h = g.spacing(axis);
        let rest_cell = g.cell() / h;
        let mut rest = vec![0.0; ni];
        for (p, &c) in cum.iter().enumerate() {
            rest[(p / stride) % ni] += rest_cell * c.powf(e.q2 / e.q3);
        }
        rest.iter().map(|r| h * r.powf(e.q1 / e.q2)).sum()
    }

    /// `F(t_m + τΔt)` for `τ ∈ [0, 1]`.
    fn inside(&self, m: usize, tau: f64) -> f64 {
        let len = self.grid.len();
        let cum: Vec<f64> = (0..len).map(|p| self.cumulative[m * len + p] + tau * self.rates[m * len + p]).collect();
        self.outer(&cum)
    }

    /// `inf {t : F(t) ≥ y}` in units of cells from `−T`.
    pub fn preimage_point(&self, y: f64) -> f64 {
        let nt = self.grid.nt();
        if y <= self.values[0] {
            return 0.0;
        }
        let m = self.values.partition_point(|&v| v < y);
        if m > nt {
            return nt as f64;
        }
        // F(t_{m−1}) < y ≤ F(t_m)
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.inside(m - 1, mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (m - 1) as f64 + hi
    }

    /// Fraction of every cell lying in `F⁻¹([a, b))`.
    pub fn preimage_weights(&self, a: f64, b: f64) -> Vec<f64> {
        let t1 = self.preimage_point(a);
        let t2 = if b > 1.0 { self.grid.nt() as f64 } else { self.preimage_point(b) };
        cell_overlaps(self.grid.nt(), t1, t2)
    }

    /// `‖χ_{F⁻¹(I)} f‖` of the normalized field, `I = [a, b)`.
    pub fn restricted_norm(&self, a: f64, b: f64) -> f64 {
        let w = self.preimage_weights(a, b);
        let len = self.grid.len();
        let mut cum = vec![0.0; len];
        for (m, &wm) in w.iter().enumerate() {
            if wm == 0.0 {
                continue;
            }
            for p in 0..len {
                cum[p] += wm * self.rates[m * len + p];
            }
        }
        self.outer(&cum).powf(1.0 / self.exps.q1)
    }
}

fn cell_overlaps(nt: usize, t1: f64, t2: f64) -> Vec<f64> {
    (0..nt)
        .map(|m| {
            let lo = (m as f64).max(t1);
            let hi = ((m + 1) as f64).min(t2);
            (hi - lo).max(0.0)
        })
        .collect()
}

/// `‖χ_{F⁻¹(I)} f‖ / |I|^e` with `e = min(q₂/(q₁q₃), 1/q₁, 1/q₂, 1/q₃)`.
/// Zero for an empty preimage.
pub fn lemma_a2_ratio(level: &LevelFunction, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b <= a {
        return invalid(format!("[{a}, {b}) is not a nonempty subinterval of [0, 1]"));
    }
    let num = level.restricted_norm(a, b);
    Ok(if num == 0.0 { 0.0 } else { num / (b - a).powf(level.exponents().interval_power()) })
}

/// Time kernel `K(t_m, t_{m'})` acting pointwise in space:
/// `Tf(t_m) = Σ_{m'} Δt K(t_m, t_{m'}) f(t_{m'})`.
#[derive(Clone, Debug)]
pub struct DiscreteKernelOperator {
    nt: usize,
    dt: f64,
    kernel: Vec<C64>,
}

impl DiscreteKernelOperator {
    pub fn from_fn(grid: &Grid, k: impl Fn(f64, f64) -> C64) -> Self {
        let nt = grid.nt();
        let times = grid.times();
        let mut kernel = Vec::with_capacity(nt * nt);
        for &t in &times {
            for &s in &times {
                kernel.push(k(t, s));
            }
        }
        DiscreteKernelOperator { nt, dt: grid.dt(), kernel }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::from_fn(grid, |_, _| C64::new(0.0, 0.0))
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.kind() != Kind::SpaceTime || f.slices() != self.nt {
            return invalid("kernel and field time grids differ");
        }
        Ok(())
    }

    /// `Σ_{m'} Δt K(t_m, t_{m'}) w_{m'} f(t_{m'})` for `m` in `targets`.
    fn apply_weighted(&self, f: &[C64], len: usize, weights: &[f64], targets: std::ops::Range<usize>, out: &mut [C64]) {
        for m in targets {
            let row = &self.kernel[m * self.nt..(m + 1) * self.nt];
            let dst = &mut out[m * len..(m + 1) * len];
            for (mp, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let c = row[mp] * (w * self.dt);
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let src = &f[mp * len..(mp + 1) * len];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += c * s);
            }
        }
    }

    /// Whole-window operator `Tf`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let g = f.grid();
        let phys = f.to_physical();
        let mut out = vec![C64::new(0.0, 0.0); phys.data().len()];
        self.apply_weighted(phys.data(), g.len(), &vec![1.0; self.nt], 0..self.nt, &mut out);
        Field::from_vec(g, Kind::SpaceTime, Rep::Physical, out)
    }

    /// Restricted operator `T_re f(t_m) = Σ_{m' < m} Δt K(t_m, t_{m'}) f(t_{m'})`.
    pub fn apply_restricted(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let g = f.grid();
        let len = g.len();
        let phys = f.to_physical();
        let mut out = vec![C64::new(0.0, 0.0); phys.data().len()];
        for m in 0..self.nt {
            let w: Vec<f64> = (0..self.nt).map(|mp| if mp < m { 1.0 } else { 0.0 }).collect();
            self.apply_weighted(phys.data(), len, &w, m..m + 1, &mut out);
        }
        Field::from_vec(g, Kind::SpaceTime, Rep::Physical, out)
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// `Σ_{I∼J} χ_{F⁻¹(J)} T(χ_{F⁻¹(I)} f)` over squares down to `J_max`.
    pub whitney: Field,
    /// `T_re f`.
    pub direct: Field,
    /// `‖whitney − direct‖` in the target norm.
    pub defect: f64,
}

/// Rebuild `T_re f` from whole-window applications of `T` on preimages of
/// Whitney intervals, for the normalized `f`. Targets are read at the nodes
/// `t_m`, so `χ_{F⁻¹(J)}(t_m) = 1` iff `F(t_m) ∈ J`.
pub fn restriction_via_whitney(
    op: &DiscreteKernelOperator,
    f: &Field,
    q: Exponents,
    target: MixedNormSpec,
    j_max: u32,
) -> Result<Reconstruction> {
    op.check(f)?;
    let level = LevelFunction::new(f, q)?;
    let g = f.grid();
    let len = g.len();
    let nt = g.nt();
    let normalized = f.to_physical().scale(C64::new(1.0 / level.norm, 0.0));
    let pairs = whitney_decompose(j_max)?;

    // preimage points of every breakpoint a 2^{-J_max}
    let fine = 1u64 << j_max;
    let breaks: Vec<f64> = (0..=fine).map(|a| level.preimage_point(a as f64 / fine as f64)).collect();
    let point = |iv: &DyadicInterval, end: u64| breaks[((iv.offset + end) << (j_max - iv.level)) as usize];

    let mut out = vec![C64::new(0.0, 0.0); nt * len];
    let vals = &level.values[..nt];
    for p in &pairs {
        let lo = vals.partition_point(|&v| v < p.j.lo());
        let hi = vals.partition_point(|&v| v < p.j.hi());
        if lo >= hi {
            continue;
        }
        let w = cell_overlaps(nt, point(&p.i, 0), point(&p.i, 1));
        op.apply_weighted(normalized.data(), len, &w, lo..hi, &mut out);
    }
    let whitney = Field::from_vec(g, Kind::SpaceTime, Rep::Physical, out)?;
    let direct = op.apply_restricted(&normalized)?;
    let defect = mixed_norm(&whitney.sub(&direct)?, &target)?;
    Ok(Reconstruction { whitney, direct, defect })
}
