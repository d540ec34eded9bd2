//! Executable catalog of the linear estimates: every entry measures
//! `LHS / (growth(k) · RHS)` over a seeded ensemble, so a bounded report that
//! stays put under grid refinement is the numerical signature of the
//! inequality at this scale.

mod lemmas;
mod maximal;
mod orth;

pub use lemmas::{discrete_derivative_ratio, modulate, nikolskii_constant, nikolskii_ratio};
pub use maximal::{
    maximal_norm_lab, maximal_norm_moving, maximal_scaling, sharpness_witness, witness_norm, MaximalSweep, Witness,
};
pub use orth::{orth_check, orth_fft_crosscheck, OrthFailure, OrthReport, OrthTuple};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{apply_angular, Angular, DecompFamily};
use crate::ensemble::{random_forcing, random_localized, rng, Support};
use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::norms::{bracket, bracket1, box_mixed_norms, check_coverage, mixed_norm, mixed_norms, MixedNormSpec};
use crate::propagator::{
    backpropagated_sum, derivative, duhamel, evolve_trajectory, partial_antiderivative, partial_riesz, ZeroPlane,
};

const INF: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateId {
    Gse1,
    Gse2,
    Gse3,
    Stri,
    Max,
    Maxd,
    Sm1,
    Smmax,
    Stsm,
    Int1,
    Int2,
    Kmax1,
    Kmax2,
    Orth,
}

impl EstimateId {
    pub const ALL: [EstimateId; 14] = [
        EstimateId::Gse1,
        EstimateId::Gse2,
        EstimateId::Gse3,
        EstimateId::Stri,
        EstimateId::Max,
        EstimateId::Maxd,
        EstimateId::Sm1,
        EstimateId::Smmax,
        EstimateId::Stsm,
        EstimateId::Int1,
        EstimateId::Int2,
        EstimateId::Kmax1,
        EstimateId::Kmax2,
        EstimateId::Orth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateId::Gse1 => "GSE1",
            EstimateId::Gse2 => "GSE2",
            EstimateId::Gse3 => "GSE3",
            EstimateId::Stri => "STRI",
            EstimateId::Max => "MAX",
            EstimateId::Maxd => "MAXD",
            EstimateId::Sm1 => "SM1",
            EstimateId::Smmax => "SMMAX",
            EstimateId::Stsm => "STSM",
            EstimateId::Int1 => "INT1",
            EstimateId::Int2 => "INT2",
            EstimateId::Kmax1 => "KMAX1",
            EstimateId::Kmax2 => "KMAX2",
            EstimateId::Orth => "ORTH",
        }
    }

    /// Entries measured one box at a time.
    pub fn box_localized(self) -> bool {
        matches!(
            self,
            EstimateId::Max
                | EstimateId::Maxd
                | EstimateId::Sm1
                | EstimateId::Smmax
                | EstimateId::Stsm
                | EstimateId::Int1
                | EstimateId::Kmax1
        )
    }

    /// Number of inequalities grouped under the entry.
    pub fn variants(self) -> usize {
        match self {
            EstimateId::Stri | EstimateId::Sm1 | EstimateId::Int2 => 2,
            EstimateId::Int1 => 4,
            EstimateId::Stsm => 11,
            _ => 1,
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        EstimateId::ALL
            .into_iter()
            .find(|id| id.name() == up)
            .ok_or_else(|| Error::Invalid(format!("unknown estimate id {s:?}")))
    }
}

/// Exponents of an entry. `axis` is the distinguished direction `i`
/// (zero-based); `alpha` the direction carrying `k_max` in KMAX2; `p` the
/// exponent of the `L^{2+p}_{t,x}` norm in the corollary variants of STSM,
/// replaced by `L³_t L⁶_x` when `l3l6` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub axis: usize,
    pub q: f64,
    pub gamma: f64,
    pub r: f64,
    pub p: f64,
    pub sigma: f64,
    pub alpha: usize,
    pub variant: usize,
    pub l3l6: bool,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams { axis: 0, q: 4.0, gamma: 6.0, r: 4.0, p: 2.0, sigma: 1.0, alpha: 0, variant: 0, l3l6: false }
    }
}

/// `p' = p / (p − 1)`.
pub fn dual(p: f64) -> f64 {
    if p == 1.0 {
        INF
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `γ(r)` with `2/γ(r) = n(1/2 − 1/r)`.
pub fn gamma_of(n: usize, r: f64) -> f64 {
    let d = n as f64 * (0.5 - 1.0 / r);
    if d <= 0.0 {
        INF
    } else {
        2.0 / d
    }
}

/// One factor `⟨·⟩^e` of the expected growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Bracket {
    /// `⟨k_i⟩ = 1 + |k_i|`.
    Axis(usize),
    /// `⟨k_max⟩ = 1 + max_i |k_i|`.
    Max,
}

impl Bracket {
    pub fn at(self, k: &[i64]) -> f64 {
        match self {
            Bracket::Axis(i) => bracket1(k[i]),
            Bracket::Max => 1.0 + k.iter().map(|c| c.abs()).max().unwrap_or(0) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateSpec {
    pub id: EstimateId,
    pub params: EstimateParams,
    /// Boxes for box-localized entries; ignored otherwise.
    pub boxes: Vec<Vec<i64>>,
}

impl EstimateSpec {
    pub fn new(id: EstimateId, params: EstimateParams) -> Self {
        EstimateSpec { id, params, boxes: Vec::new() }
    }

    pub fn with_boxes(mut self, boxes: Vec<Vec<i64>>) -> Self {
        self.boxes = boxes;
        self
    }

    fn lp(&self) -> MixedNormSpec {
        let p = &self.params;
        if p.l3l6 {
            MixedNormSpec::time_outer(3.0, 6.0)
        } else {
            MixedNormSpec::joint(2.0 + p.p)
        }
    }

    fn lp_dual(&self) -> MixedNormSpec {
        let p = &self.params;
        if p.l3l6 {
            MixedNormSpec::time_outer(1.5, 1.2)
        } else {
            MixedNormSpec::joint(dual(2.0 + p.p))
        }
    }

    /// Expected growth `Π ⟨·⟩^e` that the ratio is normalized by.
    pub fn growth(&self) -> Vec<(Bracket, f64)> {
        let p = &self.params;
        let i = p.axis;
        let v = p.variant;
        let q = 1.0 / p.q;
        match self.id {
            EstimateId::Max | EstimateId::Maxd => vec![(Bracket::Axis(i), q)],
            EstimateId::Sm1 if v == 1 => vec![(Bracket::Axis(i), 0.5)],
            EstimateId::Smmax => vec![(Bracket::Axis(i), 0.5 + q)],
            EstimateId::Stsm => match v {
                2 | 3 | 7 | 10 => vec![(Bracket::Axis(i), 0.5)],
                4 => vec![(Bracket::Axis(i), q)],
                5 | 8 => vec![(Bracket::Axis(i), 1.0 + q)],
                _ => vec![],
            },
            EstimateId::Int1 => match v {
                2 => vec![(Bracket::Axis(i), 0.5), (Bracket::Axis(0), q)],
                3 => vec![(Bracket::Axis(i), 1.0), (Bracket::Axis(0), q)],
                _ => vec![],
            },
            EstimateId::Kmax1 => vec![(Bracket::Max, 1.0 + q)],
            _ => vec![],
        }
    }

    pub fn power(&self, k: &[i64]) -> f64 {
        self.growth().iter().map(|(b, e)| b.at(k).powf(*e)).product()
    }

    /// Human-readable growth, e.g. `<k_1>^0.25`.
    pub fn growth_label(&self) -> String {
        let g = self.growth();
        if g.is_empty() {
            return "1".into();
        }
        g.iter()
            .map(|(b, e)| match b {
                Bracket::Axis(i) => format!("<k_{}>^{e}", i + 1),
                Bracket::Max => format!("<k_max>^{e}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Validity range of the cited inequality.
    pub fn validate(&self, n: usize) -> Result<()> {
        let p = &self.params;
        let nf = n as f64;
        if p.axis >= n || p.alpha >= n {
            return invalid(format!("axis {} / alpha {} outside dimension {n}", p.axis, p.alpha));
        }
        if p.variant >= self.id.variants() {
            return invalid(format!("{} has {} variants, got {}", self.id, self.id.variants(), p.variant));
        }
        let q_max = |strict2: bool| {
            let ok = p.q > 4.0 / nf && if strict2 { p.q > 2.0 } else { p.q >= 2.0 };
            if ok {
                Ok(())
            } else {
                invalid(format!("q = {} outside the range q > 4/n, q {} 2", p.q, if strict2 { ">" } else { "≥" }))
            }
        };
        let strichartz = |strict: bool| {
            let g = gamma_of(n, p.r);
            let ok = (2.0..INF).contains(&p.r)
                && if strict { p.gamma > g.max(2.0) } else { p.gamma >= g && p.gamma > 2.0 };
            if ok {
                Ok(())
            } else {
                invalid(format!("(γ, r) = ({}, {}) not admissible; γ(r) = {g}", p.gamma, p.r))
            }
        };
        match self.id {
            EstimateId::Max | EstimateId::Maxd => q_max(false),
            EstimateId::Smmax => q_max(true),
            EstimateId::Stri => {
                let g = gamma_of(n, p.r);
                if (2.0..INF).contains(&p.r) && p.gamma >= g.max(2.0) {
                    Ok(())
                } else {
                    invalid(format!("(γ, r) = ({}, {}) not admissible", p.gamma, p.r))
                }
            }
            EstimateId::Stsm => {
                strichartz(true)?;
                if matches!(p.variant, 4 | 5) {
                    q_max(false)?;
                    if p.q.is_infinite() {
                        return invalid("q must be finite here");
                    }
                }
                if p.variant >= 6 {
                    if !(p.p >= 4.0 / nf) || p.p.is_infinite() {
                        return invalid(format!("p = {} outside 4/n ≤ p < ∞", p.p));
                    }
                    if p.variant == 8 {
                        q_max(false)?;
                    }
                }
                Ok(())
            }
            EstimateId::Int1 | EstimateId::Kmax1 => {
                if self.id == EstimateId::Int1 && p.axis == 0 {
                    return invalid("the interaction estimates use a direction i ≥ 2");
                }
                strichartz(false)?;
                q_max(self.id == EstimateId::Int1 && p.variant == 2)
            }
            EstimateId::Int2 => {
                if n < 2 {
                    return invalid("the angular split needs n ≥ 2");
                }
                let floor = if p.variant == 0 { 0.0 } else { 1.0 };
                if p.sigma < floor {
                    return invalid(format!("σ = {} below {floor}", p.sigma));
                }
                Ok(())
            }
            EstimateId::Kmax2 => {
                if !(p.q > 2.0 && p.q > 4.0 / nf) || p.sigma < 0.0 {
                    return invalid(format!("q = {}, σ = {} outside q > 2 ∨ 4/n, σ ≥ 0", p.q, p.sigma));
                }
                Ok(())
            }
            EstimateId::Orth => {
                if p.variant != 0 {
                    return invalid("ORTH has no variants");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Seeded ensemble shared by all entries. Data are Gaussian band-limited
/// packets of physical width `width`; forcings carry `terms` packets with
/// Gaussian time bumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub samples: usize,
    pub seed: u64,
    /// Frequency support `|ξ|∞ ≤ ball` for whole-space entries.
    pub ball: i64,
    pub width: f64,
    pub t_width: f64,
    pub t_spread: f64,
    pub terms: usize,
}

impl Default for Ensemble {
    fn default() -> Self {
        Ensemble { samples: 50, seed: 0, ball: 4, width: 2.0, t_width: 0.5, t_spread: 1.0, terms: 3 }
    }
}

impl Ensemble {
    pub fn seeds(&self) -> Vec<u64> {
        let mut r = rng(self.seed);
        (0..self.samples).map(|_| r.gen()).collect()
    }

    fn datum(&self, grid: &Grid, support: &Support, seed: u64) -> Result<Field> {
        random_localized(grid, support, self.width, seed)
    }

    fn forcing(&self, grid: &Grid, support: &Support, seed: u64) -> Result<Field> {
        random_forcing(grid, support, self.width, self.t_width, self.t_spread, self.terms, seed)
    }
}

/// One measured `(LHS, RHS)` pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRatio {
    pub seed: u64,
    pub k: Option<Vec<i64>>,
    pub lhs: f64,
    pub rhs: f64,
    /// Expected growth at `k`.
    pub power: f64,
    /// `lhs / (power · rhs)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSummary {
    pub k: Vec<i64>,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Mean of `lhs / rhs` without the growth factor.
    pub mean_raw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub id: EstimateId,
    pub params: EstimateParams,
    pub growth: String,
    pub grid: [f64; 4],
    pub seeds: Vec<u64>,
    pub samples: Vec<SampleRatio>,
    /// Samples dropped because the right-hand side vanished.
    pub skipped: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub per_box: Vec<BoxSummary>,
    /// Log-log slope of the raw ratio against the first growth bracket, when
    /// at least four distinct values are available.
    pub fit: Option<Fit>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_scaling(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return invalid("x and y lengths differ");
    }
    if xs.len() < 4 {
        return invalid(format!("a scaling fit needs at least 4 points, got {}", xs.len()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("x values must be strictly increasing");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid("log-log fit needs positive finite data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(Fit { slope, stderr, intercept, points: lx.len() })
}

fn conj(p: f64) -> f64 {
    dual(p)
}

fn aniso(axis: usize, q: f64) -> MixedNormSpec {
    MixedNormSpec::Anisotropic { axis, p_axis: q, p_rest: INF, p_time: INF }
}

fn norm(f: &Field, spec: MixedNormSpec) -> Result<f64> {
    mixed_norm(f, &spec)
}

fn sum_norms(f: &Field, specs: &[MixedNormSpec]) -> Result<f64> {
    Ok(mixed_norms(f, specs)?.iter().sum())
}

/// `Σ_k w(k) ‖□_k f‖_{spec}` over the boxes where `weight` returns a value.
pub fn weighted_box_sum(
    f: &Field,
    family: &DecompFamily,
    spec: MixedNormSpec,
    weight: impl Fn(&[i64]) -> Option<f64>,
) -> Result<f64> {
    let fhat = f.to_frequency();
    check_coverage(family, &fhat)?;
    let mut total = 0.0;
    for k in family.indices() {
        let Some(w) = weight(&k) else { continue };
        if let Some(v) = box_mixed_norms(&fhat, family, &k, &[spec])? {
            total += w * v[0];
        }
    }
    Ok(total)
}

fn all_boxes(_: &[i64]) -> Option<f64> {
    Some(1.0)
}

/// `(LHS, RHS)` of a box-localized entry for one seed.
fn box_pair(spec: &EstimateSpec, family: &DecompFamily, ens: &Ensemble, k: &[i64], seed: u64) -> Result<(f64, f64)> {
    let g = family.grid();
    let p = &spec.params;
    let i = p.axis;
    let support = Support::Cube(k.to_vec());
    let boxed = |f: Field| family.box_frequency(k, &f.to_frequency());
    let st = MixedNormSpec::time_outer(p.gamma, p.r);
    let st_dual = MixedNormSpec::time_outer(conj(p.gamma), conj(p.r));
    let energy = MixedNormSpec::time_outer(INF, 2.0);
    let smooth = MixedNormSpec::axis(i, INF, 2.0);
    let smooth_dual = MixedNormSpec::axis(i, 1.0, 2.0);
    let data_pair = |lhs: &dyn Fn(&Field) -> Result<f64>| -> Result<(f64, f64)> {
        let u0 = boxed(ens.datum(g, &support, seed)?)?;
        let traj = evolve_trajectory(&u0)?;
        Ok((lhs(&traj)?, u0.l2()))
    };
    match (spec.id, p.variant) {
        (EstimateId::Max, _) => data_pair(&|u| norm(u, aniso(i, p.q))),
        (EstimateId::Stsm, 0) => data_pair(&|u| norm(u, st)),
        (EstimateId::Stsm, 6) => data_pair(&|u| sum_norms(u, &[spec.lp(), energy])),
        _ => {
            let f = boxed(ens.forcing(g, &support, seed)?)?;
            let d = |f: &Field| duhamel(f);
            let di = |f: &Field| duhamel(&derivative(f, i));
            let (lhs, rhs) = match (spec.id, p.variant) {
                (EstimateId::Maxd, _) => {
                    (backpropagated_sum(&f)?.l2(), norm(&f, MixedNormSpec::Anisotropic {
                        axis: i,
                        p_axis: conj(p.q),
                        p_rest: 1.0,
                        p_time: 1.0,
                    })?)
                }
                (EstimateId::Sm1, 0) => (norm(&di(&f)?, smooth)?, norm(&f, smooth_dual)?),
                (EstimateId::Sm1, _) => (norm(&di(&f)?, energy)?, norm(&f, smooth_dual)?),
                (EstimateId::Smmax, _) => (norm(&di(&f)?, aniso(i, p.q))?, norm(&f, smooth_dual)?),
                (EstimateId::Stsm, 1) => (sum_norms(&d(&f)?, &[energy, st])?, norm(&f, st_dual)?),
                (EstimateId::Stsm, 2) => (norm(&di(&f)?, st)?, norm(&f, smooth_dual)?),
                (EstimateId::Stsm, 3) => (norm(&di(&f)?, smooth)?, norm(&f, st_dual)?),
                (EstimateId::Stsm, 4) => (norm(&d(&f)?, aniso(i, p.q))?, norm(&f, st_dual)?),
                (EstimateId::Stsm, 5) => (norm(&di(&f)?, aniso(i, p.q))?, norm(&f, st_dual)?),
                (EstimateId::Stsm, 7) => (sum_norms(&d(&f)?, &[energy, spec.lp()])?, norm(&f, smooth_dual)?),
                (EstimateId::Stsm, 8) => (norm(&di(&f)?, aniso(i, p.q))?, norm(&f, spec.lp_dual())?),
                (EstimateId::Stsm, 9) => (sum_norms(&d(&f)?, &[energy, spec.lp()])?, norm(&f, spec.lp_dual())?),
                (EstimateId::Stsm, 10) => (norm(&di(&f)?, smooth)?, norm(&f, spec.lp_dual())?),
                (EstimateId::Int1, v) => {
                    let lhs_field = di(&f)?;
                    match v {
                        0 => {
                            let r = partial_antiderivative(&derivative(&f, i), 0, ZeroPlane::Reject)?.field;
                            (norm(&lhs_field, MixedNormSpec::axis(0, INF, 2.0))?, norm(&r, MixedNormSpec::axis(0, 1.0, 2.0))?)
                        }
                        1 => {
                            let r = partial_riesz(&derivative(&f, i), 0, -0.5, ZeroPlane::Reject)?.field;
                            (norm(&lhs_field, MixedNormSpec::axis(0, INF, 2.0))?, norm(&r, st_dual)?)
                        }
                        2 => (norm(&lhs_field, aniso(0, p.q))?, norm(&f, smooth_dual)?),
                        _ => (norm(&lhs_field, aniso(0, p.q))?, norm(&f, st_dual)?),
                    }
                }
                (EstimateId::Kmax1, _) => (norm(&di(&f)?, aniso(0, p.q))?, norm(&f, st_dual)?),
                (id, v) => return invalid(format!("{id} variant {v} is not box-localized")),
            };
            Ok((lhs, rhs))
        }
    }
}

/// `(LHS, RHS)` of a whole-space entry for one seed.
fn global_pair(spec: &EstimateSpec, family: &DecompFamily, ens: &Ensemble, seed: u64) -> Result<(f64, f64)> {
    let g = family.grid();
    let p = &spec.params;
    let i = p.axis;
    let support = Support::Ball(ens.ball);
    match (spec.id, p.variant) {
        (EstimateId::Gse2, _) => {
            let u0 = ens.datum(g, &support, seed)?;
            let d = partial_riesz(&u0, i, 0.5, ZeroPlane::Zero)?.field;
            Ok((norm(&evolve_trajectory(&d)?, MixedNormSpec::axis(i, INF, 2.0))?, u0.l2()))
        }
        (EstimateId::Stri, 0) => {
            let u0 = ens.datum(g, &support, seed)?;
            let traj = evolve_trajectory(&u0)?;
            let lhs = weighted_box_sum(&traj, family, MixedNormSpec::time_outer(p.gamma, p.r), all_boxes)?;
            Ok((lhs, crate::norms::modulation_norm(&u0, 0.0, family)?))
        }
        _ => {
            let f = ens.forcing(g, &support, seed)?;
            match (spec.id, p.variant) {
                (EstimateId::Gse1, _) => Ok((
                    norm(&duhamel(&derivative(&f, i))?, MixedNormSpec::axis(i, INF, 2.0))?,
                    norm(&f, MixedNormSpec::axis(i, 1.0, 2.0))?,
                )),
                (EstimateId::Gse3, _) => {
                    let d = partial_riesz(&f, i, 0.5, ZeroPlane::Zero)?.field;
                    Ok((
                        norm(&duhamel(&derivative(&f, i))?, MixedNormSpec::time_outer(INF, 2.0))?,
                        norm(&d, MixedNormSpec::axis(i, 1.0, 2.0))?,
                    ))
                }
                (EstimateId::Stri, _) => {
                    let a = duhamel(&f)?;
                    let lhs = weighted_box_sum(&a, family, MixedNormSpec::time_outer(p.gamma, p.r), all_boxes)?
                        + weighted_box_sum(&a, family, MixedNormSpec::time_outer(INF, 2.0), all_boxes)?;
                    let rhs = weighted_box_sum(
                        &f,
                        family,
                        MixedNormSpec::time_outer(dual(p.gamma), dual(p.r)),
                        all_boxes,
                    )?;
                    Ok((lhs, rhs))
                }
                (EstimateId::Int2, v) => {
                    let which = if v == 0 { Angular::P1 } else { Angular::P2 };
                    let a = apply_angular(which, &duhamel(&derivative(&f, 1))?)?;
                    let sigma = p.sigma;
                    let lhs = weighted_box_sum(&a, family, MixedNormSpec::axis(0, INF, 2.0), |k| {
                        (k[0].abs() > 4).then(|| bracket1(k[0]).powf(sigma))
                    })?;
                    let axis = if v == 0 { 0 } else { 1 };
                    let rhs = weighted_box_sum(&f, family, MixedNormSpec::axis(0, 1.0, 2.0), |k| {
                        (k[axis].abs() > 4).then(|| bracket1(k[axis]).powf(sigma))
                    })?;
                    Ok((lhs, rhs))
                }
                (EstimateId::Kmax2, _) => {
                    let a = duhamel(&derivative(&f, i))?;
                    let (al, sigma, q) = (p.alpha, p.sigma, p.q);
                    let lhs = weighted_box_sum(&a, family, aniso(0, q), |k| {
                        let kmax = k.iter().map(|c| c.abs()).max().unwrap_or(0);
                        (k[al].abs() == kmax && kmax > 4).then(|| bracket(k).powf(sigma))
                    })?;
                    let rhs = weighted_box_sum(&f, family, MixedNormSpec::axis(al, 1.0, 2.0), |k| {
                        (k[al].abs() > 4).then(|| bracket1(k[al]).powf(sigma + 0.5 + 1.0 / q))
                    })?;
                    Ok((lhs, rhs))
                }
                (id, v) => invalid(format!("{id} variant {v} is not a whole-space entry")),
            }
        }
    }
}

/// Run one catalog entry over a seeded ensemble.
pub fn run_estimate(spec: &EstimateSpec, family: &DecompFamily, ens: &Ensemble) -> Result<EstimateReport> {
    let g = family.grid();
    spec.validate(g.dim())?;
    if ens.samples == 0 {
        return invalid("ensemble needs at least one sample");
    }
    let seeds = ens.seeds();
    if spec.id == EstimateId::Orth {
        return orth::orth_report(spec, g.dim(), g.r(), ens, seeds);
    }
    let boxes: Vec<Option<Vec<i64>>> = if spec.id.box_localized() {
        if spec.boxes.is_empty() {
            return invalid(format!("{} needs at least one box", spec.id));
        }
        for k in &spec.boxes {
            if !family.contains(k) {
                return invalid(format!("box {k:?} outside family range K = {}", family.k_max()));
            }
        }
        spec.boxes.iter().cloned().map(Some).collect()
    } else {
        vec![None]
    };
    let jobs: Vec<(Option<Vec<i64>>, u64)> =
        boxes.iter().flat_map(|k| seeds.iter().map(move |&s| (k.clone(), s))).collect();
    let measured: Vec<Result<(Option<Vec<i64>>, u64, f64, f64)>> = jobs
        .into_par_iter()
        .map(|(k, s)| {
            let (lhs, rhs) = match &k {
                Some(k) => box_pair(spec, family, ens, k, s)?,
                None => global_pair(spec, family, ens, s)?,
            };
            if !lhs.is_finite() || !rhs.is_finite() {
                return Err(Error::Numerical(format!("{} produced a non-finite norm (seed {s})", spec.id)));
            }
            Ok((k, s, lhs, rhs))
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = 0;
    for m in measured {
        let (k, seed, lhs, rhs) = m?;
        if rhs == 0.0 {
            skipped += 1;
            continue;
        }
        let power = k.as_deref().map_or(1.0, |k| spec.power(k));
        samples.push(SampleRatio { seed, k, lhs, rhs, power, ratio: lhs / (power * rhs) });
    }
    if samples.is_empty() {
        return Err(Error::Numerical("every sample had a vanishing right-hand side".into()));
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let mean_ratio = samples.iter().map(|s| s.ratio).sum::<f64>() / samples.len() as f64;
    let mut per_box = Vec::new();
    for k in boxes.iter().flatten() {
        let mine: Vec<&SampleRatio> = samples.iter().filter(|s| s.k.as_ref() == Some(k)).collect();
        if mine.is_empty() {
            continue;
        }
        let c = mine.len() as f64;
        per_box.push(BoxSummary {
            k: k.clone(),
            max_ratio: mine.iter().map(|s| s.ratio).fold(0.0, f64::max),
            mean_ratio: mine.iter().map(|s| s.ratio).sum::<f64>() / c,
            mean_raw: mine.iter().map(|s| s.lhs / s.rhs).sum::<f64>() / c,
        });
    }
    let fit = growth_fit(spec, &per_box);
    Ok(EstimateReport {
        id: spec.id,
        params: spec.params,
        growth: spec.growth_label(),
        grid: [g.points()[0] as f64, g.r() as f64, g.nt() as f64, g.t_half()],
        seeds,
        samples,
        skipped,
        max_ratio,
        mean_ratio,
        per_box,
        fit,
    })
}

fn growth_fit(spec: &EstimateSpec, per_box: &[BoxSummary]) -> Option<Fit> {
    let bracket = spec.growth().first().map(|(b, _)| *b).unwrap_or(Bracket::Axis(spec.params.axis));
    let mut pts: Vec<(f64, f64)> = per_box.iter().map(|b| (bracket.at(&b.k), b.mean_raw)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_scaling(&xs, &ys).ok()
}

/// The next grid in a refinement study: twice the points, twice the torus,
/// twice the time window at the same `Δt`.
pub fn refine_grid(g: &Grid) -> Result<Grid> {
    let ns: Vec<usize> = g.points().iter().map(|n| 2 * n).collect();
    Grid::with_points(&ns, g.r() + 1, 2.0 * g.t_half(), 2 * g.nt(), &eps_i8(g))
}

pub(crate) fn eps_i8(g: &Grid) -> Vec<i8> {
    g.eps().iter().map(|&e| e as i8).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refinement {
    pub coarse: EstimateReport,
    pub fine: EstimateReport,
    /// `max(a/b, b/a)` of the two maximal normalized ratios.
    pub factor: f64,
}

/// Run the same entry and ensemble on `coarse` and `fine` families.
pub fn refinement_factor(
    spec: &EstimateSpec,
    ens: &Ensemble,
    coarse: &DecompFamily,
    fine: &DecompFamily,
) -> Result<Refinement> {
    let a = run_estimate(spec, coarse, ens)?;
    let b = run_estimate(spec, fine, ens)?;
    let r = a.max_ratio / b.max_ratio;
    Ok(Refinement { factor: r.max(1.0 / r), coarse: a, fine: b })
}
