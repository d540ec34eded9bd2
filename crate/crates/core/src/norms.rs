//! Mixed space-time Lebesgue norms, modulation and Besov norms, box sums and
//! the composite working norms used by the solver.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::decomp::{shell, DecompFamily};
use crate::error::{Error, Result};
use crate::field::{Field, Kind};
use crate::grid::Grid;

/// Nesting order and exponents of a space-time norm. `f64::INFINITY` means a
/// supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum MixedNormSpec {
    /// `L^{p_axis}_{x_i} L^{p_rest}_{(x_j)_{j≠i}} L^{p_time}_t`.
    Anisotropic { axis: usize, p_axis: f64, p_rest: f64, p_time: f64 },
    /// `L^γ_t L^r_x`.
    TimeOuter { gamma: f64, r: f64 },
    /// `L^p_{x,t}`.
    Joint { p: f64 },
}

impl MixedNormSpec {
    /// `L^{p1}_{x_i} L^{p2}_{(x_j)_{j≠i}} L^{p2}_t`.
    pub fn axis(axis: usize, p1: f64, p2: f64) -> Self {
        MixedNormSpec::Anisotropic { axis, p_axis: p1, p_rest: p2, p_time: p2 }
    }
    pub fn time_outer(gamma: f64, r: f64) -> Self {
        MixedNormSpec::TimeOuter { gamma, r }
    }
    pub fn joint(p: f64) -> Self {
        MixedNormSpec::Joint { p }
    }

    fn exponents(&self) -> Vec<f64> {
        match *self {
            MixedNormSpec::Anisotropic { p_axis, p_rest, p_time, .. } => vec![p_axis, p_rest, p_time],
            MixedNormSpec::TimeOuter { gamma, r } => vec![gamma, r],
            MixedNormSpec::Joint { p } => vec![p],
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for p in self.exponents() {
            if !(p >= 1.0) {
                return Err(Error::Invalid(format!("exponent {p} is below 1")));
            }
        }
        if let MixedNormSpec::Anisotropic { axis, .. } = *self {
            if axis >= grid.dim() {
                return Err(Error::Invalid(format!("axis {axis} out of range")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let e = |p: f64| if p.is_infinite() { "inf".to_string() } else { format!("{p}") };
        match *self {
            MixedNormSpec::Anisotropic { axis, p_axis, p_rest, p_time } => {
                format!("L{}_x{} L{}_x' L{}_t", e(p_axis), axis + 1, e(p_rest), e(p_time))
            }
            MixedNormSpec::TimeOuter { gamma, r } => format!("L{}_t L{}_x", e(gamma), e(r)),
            MixedNormSpec::Joint { p } => format!("L{}_xt", e(p)),
        }
    }
}

/// `|z|^p`, with fast paths when `2p` is an integer.
#[inline]
fn pow_abs(z: C64, p: f64) -> f64 {
    let s = z.norm_sqr();
    let twice = 2.0 * p;
    if twice.fract() == 0.0 && twice <= 16.0 {
        let k = twice as i32;
        if k % 2 == 0 {
            let base = s.powi(k / 4);
            if k % 4 == 2 {
                base * s.sqrt()
            } else {
                base
            }
        } else {
            let a = s.sqrt();
            a.powi(k / 2) * a.sqrt()
        }
    } else {
        s.powf(0.5 * p)
    }
}

/// Sum-of-powers reduction that switches to a maximum for `p = ∞`.
#[inline]
fn fold(acc: &mut f64, v: f64, w: f64, p: f64) {
    if p.is_infinite() {
        *acc = acc.max(v);
    } else {
        *acc += w * v.powf(p);
    }
}

#[inline]
fn root(acc: f64, p: f64) -> f64 {
    if p.is_infinite() {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// Streaming evaluation of a mixed norm, fed one time slice at a time.
pub struct MixedAccumulator {
    spec: MixedNormSpec,
    grid: Grid,
    point: Vec<f64>,
    scalar: f64,
}

impl MixedAccumulator {
    pub fn new(spec: MixedNormSpec, grid: &Grid) -> Result<Self> {
        spec.validate(grid)?;
        let point = match spec {
            MixedNormSpec::Anisotropic { .. } => vec![0.0; grid.len()],
            _ => Vec::new(),
        };
        Ok(MixedAccumulator { spec, grid: grid.clone(), point, scalar: 0.0 })
    }

    /// Add one physical time slice.
    pub fn push(&mut self, slice: &[C64]) {
        let dt = self.grid.dt();
        match self.spec {
            MixedNormSpec::Anisotropic { p_time, .. } => {
                if p_time.is_infinite() {
                    self.point.iter_mut().zip(slice).for_each(|(a, z)| *a = a.max(z.norm_sqr()));
                } else {
                    self.point.iter_mut().zip(slice).for_each(|(a, z)| *a += dt * pow_abs(*z, p_time));
                }
            }
            MixedNormSpec::TimeOuter { gamma, r } => {
                let s = if r.is_infinite() {
                    slice.iter().fold(0.0f64, |a, z| a.max(z.norm_sqr())).sqrt()
                } else {
                    let sum: f64 = slice.iter().map(|z| pow_abs(*z, r)).sum();
                    (self.grid.cell() * sum).powf(1.0 / r)
                };
                fold(&mut self.scalar, s, dt, gamma);
            }
            MixedNormSpec::Joint { p } => {
                if p.is_infinite() {
                    self.scalar = slice.iter().fold(self.scalar, |a, z| a.max(z.norm_sqr()));
                } else {
                    let sum: f64 = slice.iter().map(|z| pow_abs(*z, p)).sum();
                    self.scalar += dt * self.grid.cell() * sum;
                }
            }
        }
    }

    pub fn finish(self) -> f64 {
        match self.spec {
            MixedNormSpec::Anisotropic { axis, p_axis, p_rest, p_time } => {
                let g = &self.grid;
                let stride = g.strides()[axis];
                let len_i = g.points_on(axis);
                let h_i = g.spacing(axis);
                let rest_cell = g.cell() / h_i;
                let mut rest = vec![0.0; len_i];
                let same = p_rest == p_time;
                for (p, &a) in self.point.iter().enumerate() {
                    let j = (p / stride) % len_i;
                    if same && p_rest.is_finite() {
                        rest[j] += rest_cell * a;
                    } else {
                        let v = if p_time.is_infinite() { a.sqrt() } else { root(a, p_time) };
                        fold(&mut rest[j], v, rest_cell, p_rest);
                    }
                }
                let mut outer = 0.0;
                for r in rest {
                    fold(&mut outer, root(r, p_rest), h_i, p_axis);
                }
                root(outer, p_axis)
            }
            MixedNormSpec::TimeOuter { gamma, .. } => root(self.scalar, gamma),
            MixedNormSpec::Joint { p } => {
                if p.is_infinite() {
                    self.scalar.sqrt()
                } else {
                    root(self.scalar, p)
                }
            }
        }
    }
}

/// Mixed norm of a space-time field.
pub fn mixed_norm(f: &Field, spec: &MixedNormSpec) -> Result<f64> {
    if f.kind() != Kind::SpaceTime {
        return Err(Error::Invalid("mixed norms need a space-time field".into()));
    }
    let f = if f.is_physical() { std::borrow::Cow::Borrowed(f) } else { std::borrow::Cow::Owned(f.to_physical()) };
    let mut acc = MixedAccumulator::new(*spec, f.grid())?;
    for m in 0..f.slices() {
        acc.push(f.slice(m));
    }
    Ok(acc.finish())
}

/// `‖f‖_{L^p_x}` of a spatial field.
pub fn lp_spatial(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Invalid(format!("exponent {p} is below 1")));
    }
    let f = if f.is_physical() { std::borrow::Cow::Borrowed(f) } else { std::borrow::Cow::Owned(f.to_physical()) };
    let data = f.data();
    Ok(if p.is_infinite() {
        data.iter().fold(0.0, |a, z| a.max(z.norm()))
    } else {
        (f.grid().cell() * data.iter().map(|z| pow_abs(*z, p)).sum::<f64>()).powf(1.0 / p)
    })
}

/// `⟨k⟩ = 1 + |k|` with the Euclidean length.
pub fn bracket(k: &[i64]) -> f64 {
    1.0 + (k.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
}

/// `⟨k_i⟩ = 1 + |k_i|`.
pub fn bracket1(k: i64) -> f64 {
    1.0 + k.abs() as f64
}

pub(crate) fn check_coverage(family: &DecompFamily, fhat: &Field) -> Result<()> {
    let frac = family.uncovered_fraction(fhat);
    if frac > 1e-8 {
        return Err(Error::Nyquist(format!(
            "{frac:.3e} of the energy lies outside the family range K = {}",
            family.k_max()
        )));
    }
    Ok(())
}

/// `‖□_k f‖₂` for every index of the family (spatial field).
pub fn box_l2(f: &Field, family: &DecompFamily) -> Result<Vec<(Vec<i64>, f64)>> {
    let fhat = f.to_frequency();
    let cell = f.grid().cell();
    let w = if f.kind() == Kind::SpaceTime { cell * f.grid().dt() } else { cell };
    let len = f.grid().len();
    let data = fhat.data();
    Ok(family
        .indices()
        .into_iter()
        .map(|k| {
            let mut e = 0.0;
            family.for_each_node(&k, |p, s| {
                let mut q = p;
                while q < data.len() {
                    e += s * s * data[q].norm_sqr();
                    q += len;
                }
            });
            let v = (w * e).sqrt();
            (k, v)
        })
        .collect())
}

/// `Σ_k ⟨k⟩^s ‖□_k f‖₂`.
pub fn modulation_norm(f: &Field, s: f64, family: &DecompFamily) -> Result<f64> {
    if f.kind() != Kind::Spatial {
        return Err(Error::Invalid("modulation norm needs a spatial field".into()));
    }
    check_coverage(family, &f.to_frequency())?;
    Ok(box_l2(f, family)?.into_iter().map(|(k, v)| bracket(&k).powf(s) * v).sum())
}

/// `‖ℱf‖_{L²(|ξ|≤1)} + Σ_j 2^{sj} ‖ℱf‖_{L²(2^{j−1}<|ξ|≤2^j)}` with sharp shells.
pub fn besov_norm(f: &Field, s: f64) -> Result<f64> {
    if f.kind() != Kind::Spatial {
        return Err(Error::Invalid("Besov norm needs a spatial field".into()));
    }
    let g = f.grid();
    let fhat = f.to_frequency();
    let n = g.dim();
    let mut idx = vec![0; n];
    let mut shells: Vec<f64> = Vec::new();
    for (p, z) in fhat.data().iter().enumerate() {
        g.unravel(p, &mut idx);
        let r = (0..n).map(|a| g.xi(a, idx[a]).powi(2)).sum::<f64>().sqrt();
        let j = shell(r) as usize;
        if shells.len() <= j {
            shells.resize(j + 1, 0.0);
        }
        shells[j] += z.norm_sqr();
    }
    Ok(shells.iter().enumerate().map(|(j, e)| 2f64.powf(s * j as f64) * (g.cell() * e).sqrt()).sum())
}

/// Box weight in a composite norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Weight {
    /// `⟨k⟩^s`.
    Bracket(f64),
    /// `⟨k_i⟩^s`.
    Axis { axis: usize, s: f64 },
}

impl Weight {
    pub fn at(&self, k: &[i64]) -> f64 {
        match *self {
            Weight::Bracket(s) => bracket(k).powf(s),
            Weight::Axis { axis, s } => bracket1(k[axis]).powf(s),
        }
    }
}

/// Which boxes enter a sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Restriction {
    All,
    /// `|k_i| > bound`.
    AxisAbove { axis: usize, bound: i64 },
}

impl Restriction {
    pub fn admits(&self, k: &[i64]) -> bool {
        match *self {
            Restriction::All => true,
            Restriction::AxisAbove { axis, bound } => k[axis].abs() > bound,
        }
    }
}

/// One `ℓ¹_□` term: `Σ_{admitted k} weight(k) ‖∂^α □_k u‖_{inner}`, where an
/// inner list of several specs stands for their intersection (sum of norms).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Component {
    pub label: String,
    pub deriv: Option<usize>,
    pub weight: Weight,
    pub restriction: Restriction,
    pub inner: Vec<MixedNormSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkingNormSpec {
    pub name: String,
    /// Regularity `s` of the `M^s_{2,1}` datum norm paired with this norm.
    pub datum_s: f64,
    pub components: Vec<Component>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormBreakdown {
    pub total: f64,
    pub components: Vec<(String, f64)>,
}

fn inf() -> f64 {
    f64::INFINITY
}

fn derivs(with: bool, n: usize) -> Vec<(String, Option<usize>)> {
    let mut out = vec![];
    for l in 0..n {
        out.push((format!("a0,l{}", l + 1), None));
        if with {
            out.push((format!("a1,l{}", l + 1), Some(l)));
        }
    }
    out
}

impl WorkingNormSpec {
    /// Three-part norm with derivatives, general `m > 2`.
    pub fn x(n: usize, m: f64) -> Self {
        Self::with_derivs("X", 1.5, n, 1.0, 0.5 - 1.0 / m, m, vec![MixedNormSpec::time_outer(inf(), 2.0), MixedNormSpec::joint(2.0 + m)], 0.5)
    }

    /// Three-part norm with derivatives for `m = 2`.
    pub fn y(n: usize) -> Self {
        Self::with_derivs("Y", 2.5, n, 2.0, 0.0, 2.0, vec![MixedNormSpec::time_outer(inf(), 2.0), MixedNormSpec::time_outer(3.0, 6.0)], 1.5)
    }

    /// Three-part norm without derivatives for `∂(u^{κ+1})` nonlinearities.
    pub fn x1(n: usize, kappa: f64) -> Self {
        Self::plain("X1", 0.5, n, 1.0, 0.5 - 1.0 / kappa, kappa, vec![MixedNormSpec::time_outer(inf(), 2.0), MixedNormSpec::joint(2.0 + kappa)], 0.5)
    }

    /// Three-part norm without derivatives for `κ = 2`.
    pub fn y1(n: usize) -> Self {
        Self::plain("Y1", 1.5, n, 2.0, 0.0, 2.0, vec![MixedNormSpec::time_outer(inf(), 2.0), MixedNormSpec::time_outer(3.0, 6.0)], 1.5)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_derivs(
        name: &str,
        datum_s: f64,
        n: usize,
        smooth_s: f64,
        max_s: f64,
        max_q: f64,
        strichartz: Vec<MixedNormSpec>,
        str_s: f64,
    ) -> Self {
        let mut components = Vec::new();
        for (tag, d) in derivs(true, n) {
            for i in 0..n {
                components.push(Component {
                    label: format!("smooth,{tag},i{}", i + 1),
                    deriv: d,
                    weight: Weight::Axis { axis: i, s: smooth_s },
                    restriction: Restriction::AxisAbove { axis: i, bound: 4 },
                    inner: vec![MixedNormSpec::axis(i, inf(), 2.0)],
                });
            }
        }
        for (tag, d) in derivs(true, n) {
            for i in 0..n {
                components.push(Component {
                    label: format!("maximal,{tag},i{}", i + 1),
                    deriv: d,
                    weight: Weight::Bracket(max_s),
                    restriction: Restriction::All,
                    inner: vec![MixedNormSpec::axis(i, max_q, inf())],
                });
            }
        }
        for (tag, d) in derivs(true, n) {
            components.push(Component {
                label: format!("strichartz,{tag}"),
                deriv: d,
                weight: Weight::Bracket(str_s),
                restriction: Restriction::All,
                inner: strichartz.clone(),
            });
        }
        WorkingNormSpec { name: name.into(), datum_s, components }
    }

    #[allow(clippy::too_many_arguments)]
    fn plain(
        name: &str,
        datum_s: f64,
        n: usize,
        smooth_s: f64,
        max_s: f64,
        max_q: f64,
        strichartz: Vec<MixedNormSpec>,
        str_s: f64,
    ) -> Self {
        let mut components = Vec::new();
        for i in 0..n {
            components.push(Component {
                label: format!("smooth,i{}", i + 1),
                deriv: None,
                weight: Weight::Axis { axis: i, s: smooth_s },
                restriction: Restriction::AxisAbove { axis: i, bound: 4 },
                inner: vec![MixedNormSpec::axis(i, inf(), 2.0)],
            });
        }
        for i in 0..n {
            components.push(Component {
                label: format!("maximal,i{}", i + 1),
                deriv: None,
                weight: Weight::Bracket(max_s),
                restriction: Restriction::All,
                inner: vec![MixedNormSpec::axis(i, max_q, inf())],
            });
        }
        components.push(Component {
            label: "strichartz".into(),
            deriv: None,
            weight: Weight::Bracket(str_s),
            restriction: Restriction::All,
            inner: strichartz,
        });
        WorkingNormSpec { name: name.into(), datum_s, components }
    }

    pub fn by_name(name: &str, n: usize, m: f64) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "X" => Ok(Self::x(n, m)),
            "Y" => Ok(Self::y(n)),
            "X1" | "X₁" => Ok(Self::x1(n, m)),
            "Y1" | "Y₁" => Ok(Self::y1(n)),
            other => Err(Error::Invalid(format!("unknown working norm {other}"))),
        }
    }
}

/// Visit `(k, physical □_k g)` for every admitted box with nonzero content,
/// where `g` is given in frequency representation.
pub fn for_each_box(
    ghat: &Field,
    family: &DecompFamily,
    admit: impl Fn(&[i64]) -> bool,
    mut visit: impl FnMut(&[i64], &Field) -> Result<()>,
) -> Result<()> {
    for k in family.indices() {
        if !admit(&k) {
            continue;
        }
        let b = family.box_frequency(&k, ghat)?;
        if b.data().iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let b = b.into_physical();
        visit(&k, &b)?;
    }
    Ok(())
}

/// Mixed norms of `□_k g` for a frequency-representation space-time `g`,
/// computed one time slice at a time without materializing the box.
/// Returns `None` when the box is identically zero.
pub fn box_mixed_norms(
    ghat: &Field,
    family: &DecompFamily,
    k: &[i64],
    specs: &[MixedNormSpec],
) -> Result<Option<Vec<f64>>> {
    if !ghat.is_frequency() {
        return Err(Error::Rep("box norms need a frequency field".into()));
    }
    let g = ghat.grid();
    let mut nodes: Vec<(usize, f64)> = Vec::new();
    family.for_each_node(k, |p, s| nodes.push((p, s)));
    let mut accs = specs.iter().map(|s| MixedAccumulator::new(*s, g)).collect::<Result<Vec<_>>>()?;
    let mut shape = vec![1];
    shape.extend_from_slice(g.points());
    let mut buf = vec![C64::new(0.0, 0.0); g.len()];
    let mut any = false;
    for m in 0..ghat.slices() {
        let src = ghat.slice(m);
        let mut live = false;
        for &(p, s) in &nodes {
            let v = src[p] * s;
            live |= v.re != 0.0 || v.im != 0.0;
            buf[p] = v;
        }
        if live {
            any = true;
            // the sparse axis goes first so most lines of the dense pass are skipped
            for a in (0..g.dim()).rev() {
                crate::grid::transform_axis(&mut buf, &shape, a + 1, true);
            }
        }
        accs.iter_mut().for_each(|acc| acc.push(&buf));
        if live {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
    }
    Ok(any.then(|| accs.into_iter().map(MixedAccumulator::finish).collect()))
}

/// Evaluate several mixed norms of one physical space-time field in a single pass.
pub fn mixed_norms(f: &Field, specs: &[MixedNormSpec]) -> Result<Vec<f64>> {
    let mut accs = specs.iter().map(|s| MixedAccumulator::new(*s, f.grid())).collect::<Result<Vec<_>>>()?;
    let f = if f.is_physical() { std::borrow::Cow::Borrowed(f) } else { std::borrow::Cow::Owned(f.to_physical()) };
    for m in 0..f.slices() {
        let s = f.slice(m);
        accs.iter_mut().for_each(|a| a.push(s));
    }
    Ok(accs.into_iter().map(MixedAccumulator::finish).collect())
}

/// Composite norm evaluation; components that share a derivative share the
/// box computations.
pub fn evaluate_components(f: &Field, components: &[Component], family: &DecompFamily) -> Result<NormBreakdown> {
    if f.kind() != Kind::SpaceTime {
        return Err(Error::Invalid("composite norms need a space-time field".into()));
    }
    let fhat = f.to_frequency();
    check_coverage(family, &fhat)?;
    let mut values = vec![0.0; components.len()];
    let mut groups: Vec<Option<usize>> = Vec::new();
    for c in components {
        if !groups.contains(&c.deriv) {
            groups.push(c.deriv);
        }
    }
    for d in groups {
        let members: Vec<usize> = (0..components.len()).filter(|&j| components[j].deriv == d).collect();
        let mut specs: Vec<MixedNormSpec> = Vec::new();
        for &j in &members {
            for s in &components[j].inner {
                if !specs.contains(s) {
                    specs.push(*s);
                }
            }
        }
        let g = match d {
            None => fhat.clone(),
            Some(l) => crate::propagator::derivative(&fhat, l),
        };
        for k in family.indices() {
            if !members.iter().any(|&j| components[j].restriction.admits(&k)) {
                continue;
            }
            let Some(vals) = box_mixed_norms(&g, family, &k, &specs)? else {
                continue;
            };
            for &j in &members {
                let c = &components[j];
                if !c.restriction.admits(&k) {
                    continue;
                }
                let inner: f64 = c.inner.iter().map(|s| vals[specs.iter().position(|t| t == s).unwrap()]).sum();
                values[j] += c.weight.at(&k) * inner;
            }
        }
    }
    Ok(NormBreakdown {
        total: values.iter().sum(),
        components: components.iter().zip(values).map(|(c, v)| (c.label.clone(), v)).collect(),
    })
}

pub fn working_norm(f: &Field, spec: &WorkingNormSpec, family: &DecompFamily) -> Result<NormBreakdown> {
    evaluate_components(f, &spec.components, family)
}

/// `Σ_{admitted k} weight(k) ‖□_k f‖_{inner}`.
pub fn box_sum_norm(
    f: &Field,
    weight: Weight,
    restriction: Restriction,
    inner: &[MixedNormSpec],
    family: &DecompFamily,
) -> Result<f64> {
    let c = Component { label: "box".into(), deriv: None, weight, restriction, inner: inner.to_vec() };
    Ok(evaluate_components(f, &[c], family)?.total)
}
