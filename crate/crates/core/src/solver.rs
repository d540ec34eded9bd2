//! Small-data Picard solver for `i u_t + Δ± u = F(u, ū, ∇u, ∇ū)` on the
//! torus, with working-norm contraction diagnostics and scattering states.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::DecompFamily;
use crate::ensemble::{random_localized, Support};
use crate::error::{invalid, Error, Result};
use crate::field::{Field, Kind, Rep};
use crate::grid::{transform_axis, Grid};
use crate::norms::{modulation_norm, working_norm, WorkingNormSpec};
use crate::propagator::{derivative, duhamel_from, evolve_trajectory, free_evolve};

/// `c · u^{β₀} ū^{β₁} Π (∂_j u)^{β_{2+j}} Π (∂_j ū)^{β_{2+n+j}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub beta: Vec<u32>,
    pub coeff: C64,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.beta.iter().sum()
    }
}

/// Finite polynomial nonlinearity in `(u, ū, ∇u, ∇ū)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub n: usize,
    /// Every monomial has degree at least `m + 1`.
    pub m: u32,
    pub monomials: Vec<Monomial>,
}

impl NonlinearitySpec {
    pub fn new(n: usize, m: u32, monomials: Vec<Monomial>) -> Result<Self> {
        let spec = NonlinearitySpec { n, m, monomials };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(n: usize, m: u32) -> Self {
        NonlinearitySpec { n, m, monomials: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        for mono in &self.monomials {
            if mono.beta.len() != 2 * self.n + 2 {
                return invalid(format!("exponent vector {:?} needs {} entries", mono.beta, 2 * self.n + 2));
            }
            if mono.degree() < self.m + 1 {
                return invalid(format!("monomial {:?} has degree below m + 1 = {}", mono.beta, self.m + 1));
            }
            if !mono.coeff.re.is_finite() || !mono.coeff.im.is_finite() {
                return invalid("non-finite coefficient");
            }
        }
        Ok(())
    }

    /// `Σ_i λ_i ∂_{x_i}(u^{κ_i+1})`, expanded as `λ_i (κ_i+1) u^{κ_i} ∂_i u`.
    pub fn dnls1(lambda: &[C64], kappa: &[u32]) -> Result<Self> {
        let n = lambda.len();
        if kappa.len() != n || n == 0 {
            return invalid("λ and κ need one entry per direction");
        }
        let mut monomials = Vec::new();
        for i in 0..n {
            if lambda[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut beta = vec![0; 2 * n + 2];
            beta[0] = kappa[i];
            beta[2 + i] = 1;
            monomials.push(Monomial { beta, coeff: lambda[i] * (kappa[i] + 1) as f64 });
        }
        let m = kappa.iter().copied().min().unwrap_or(0);
        NonlinearitySpec::new(n, m, monomials)
    }

    /// `c |u|² u`.
    pub fn cubic(n: usize, c: C64) -> Self {
        let mut beta = vec![0; 2 * n + 2];
        beta[0] = 2;
        beta[1] = 1;
        NonlinearitySpec { n, m: 2, monomials: vec![Monomial { beta, coeff: c }] }
    }

    pub fn max_degree(&self) -> u32 {
        self.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    fn needs_gradient(&self) -> bool {
        self.monomials.iter().any(|m| m.beta[2..].iter().any(|&b| b > 0))
    }
}

/// Working norm the contraction is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormChoice {
    X,
    Y,
    X1,
    Y1,
}

impl NormChoice {
    pub fn spec(self, n: usize, m: u32) -> WorkingNormSpec {
        match self {
            NormChoice::X => WorkingNormSpec::x(n, m as f64),
            NormChoice::Y => WorkingNormSpec::y(n),
            NormChoice::X1 => WorkingNormSpec::x1(n, m as f64),
            NormChoice::Y1 => WorkingNormSpec::y1(n),
        }
    }

    /// Regularity `s` of the datum space `M^s_{2,1}`.
    pub fn datum_s(self) -> f64 {
        match self {
            NormChoice::X => 1.5,
            NormChoice::Y => 2.5,
            NormChoice::X1 => 0.5,
            NormChoice::Y1 => 1.5,
        }
    }
}

impl std::str::FromStr for NormChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "X" => Ok(NormChoice::X),
            "Y" => Ok(NormChoice::Y),
            "X1" => Ok(NormChoice::X1),
            "Y1" => Ok(NormChoice::Y1),
            other => invalid(format!("unknown working norm {other}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nonlinearity: NonlinearitySpec,
    /// `‖u₀‖_{M^s_{2,1}}`, with `s` fixed by the norm.
    pub delta: f64,
    pub norm: NormChoice,
    pub max_iter: usize,
    pub tol: f64,
    /// Zero-padding factor before products; raised per monomial to
    /// `⌈(deg+1)/2⌉` when that is larger.
    pub padding: usize,
}

impl SolverConfig {
    pub fn new(nonlinearity: NonlinearitySpec, delta: f64, norm: NormChoice) -> Self {
        SolverConfig { nonlinearity, delta, norm, max_iter: 8, tol: 1e-6, padding: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        self.nonlinearity.validate()?;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return invalid(format!("δ = {} must be positive", self.delta));
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tolerance {} must be positive", self.tol));
        }
        if self.padding < 1 {
            return invalid("padding must be at least 1");
        }
        if self.max_iter == 0 {
            return invalid("max_iter must be at least 1");
        }
        Ok(())
    }

    pub fn working_norm(&self) -> WorkingNormSpec {
        self.norm.spec(self.nonlinearity.n, self.nonlinearity.m)
    }

    /// Hypotheses of the well-posedness theorem paired with the chosen norm
    /// that this configuration violates. Not fatal.
    pub fn warnings(&self) -> Vec<String> {
        let nl = &self.nonlinearity;
        let (n, m) = (nl.n as f64, nl.m as f64);
        let mut out = Vec::new();
        match self.norm {
            NormChoice::X | NormChoice::X1 => {
                if nl.n < 2 {
                    out.push("theorem assumes n ≥ 2".to_string());
                }
                if !(m > 2.0 && m > 4.0 / n) {
                    out.push(format!("theorem assumes m > 2 and m > 4/n, got m = {m}"));
                }
            }
            NormChoice::Y | NormChoice::Y1 => {
                if nl.n < 3 {
                    out.push("theorem assumes n ≥ 3".to_string());
                }
                if nl.m != 2 {
                    out.push(format!("theorem assumes m = 2, got m = {m}"));
                }
            }
        }
        if matches!(self.norm, NormChoice::X1 | NormChoice::Y1) {
            let divergence = nl.monomials.iter().all(|mono| {
                let grads: Vec<usize> = (0..nl.n).filter(|&j| mono.beta[2 + j] > 0).collect();
                mono.beta[1] == 0
                    && grads.len() == 1
                    && mono.beta[2 + grads[0]] == 1
                    && mono.beta[2 + nl.n..].iter().all(|&b| b == 0)
            });
            if !divergence {
                out.push("norm without derivatives expects ∂_i(u^{κ+1}) terms only".to_string());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringData {
    /// `‖u_±‖_{M^s_{2,1}}`.
    pub plus_norm: f64,
    pub minus_norm: f64,
    /// Distance between the `+` states extracted at `T` and `T/2`, then at
    /// `T/2` and `T/4`.
    pub cauchy_plus: [f64; 2],
    pub cauchy_minus: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionDiagnostics {
    pub norm: String,
    /// `‖u^{(m)}‖` for each computed iterate.
    pub norms: Vec<f64>,
    /// `d_m = ‖u^{(m+1)} − u^{(m)}‖`.
    pub differences: Vec<f64>,
    /// `d_{m+1} / d_m`.
    pub ratios: Vec<f64>,
    /// `‖u − 𝒯u‖` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    /// Set when the ratio stayed at or above 1 for three consecutive steps.
    pub non_contracting: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub scattering: Option<ScatteringData>,
}

fn padded_points(grid: &Grid, p: usize) -> Vec<usize> {
    grid.points().iter().map(|&n| n * p).collect()
}

/// Spread the coefficients of one slice onto the padded lattice and return
/// physical values there.
fn pad_to_physical(grid: &Grid, src: &[C64], big: &[usize], scale: f64, out: &mut [C64]) {
    let n = grid.dim();
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    let mut idx = vec![0; n];
    for (p, z) in src.iter().enumerate() {
        if z.re == 0.0 && z.im == 0.0 {
            continue;
        }
        grid.unravel(p, &mut idx);
        let mut q = 0;
        for a in 0..n {
            let m = grid.freq_index(a, idx[a]);
            q = q * big[a] + m.rem_euclid(big[a] as i64) as usize;
        }
        out[q] = *z * scale;
    }
    let mut shape = vec![1];
    shape.extend_from_slice(big);
    for a in (0..n).rev() {
        transform_axis(out, &shape, a + 1, true);
    }
}

/// Forward transform on the padded lattice and keep the coefficients the
/// base grid can hold.
fn truncate_from_physical(grid: &Grid, buf: &mut [C64], big: &[usize], scale: f64, out: &mut [C64]) {
    let n = grid.dim();
    let mut shape = vec![1];
    shape.extend_from_slice(big);
    for a in 0..n {
        transform_axis(buf, &shape, a + 1, false);
    }
    let mut idx = vec![0; n];
    for (p, o) in out.iter_mut().enumerate() {
        grid.unravel(p, &mut idx);
        let mut q = 0;
        for a in 0..n {
            let m = grid.freq_index(a, idx[a]);
            q = q * big[a] + m.rem_euclid(big[a] as i64) as usize;
        }
        *o += buf[q] * scale;
    }
}

/// `F(u)` with products formed on a zero-padded lattice and truncated back
/// to the grid. Returned in the representation of `u`.
pub fn eval_nonlinearity(u: &Field, spec: &NonlinearitySpec, padding: usize) -> Result<Field> {
    let g = u.grid();
    let n = g.dim();
    if spec.n != n {
        return invalid(format!("nonlinearity is for n = {}, field has n = {n}", spec.n));
    }
    spec.validate()?;
    let physical_in = u.is_physical();
    let uhat = u.to_frequency();
    let grads: Vec<Field> = if spec.needs_gradient() { (0..n).map(|j| derivative(&uhat, j)).collect() } else { vec![] };
    let len = g.len();
    let slices = uhat.slices();
    let mut out = vec![C64::new(0.0, 0.0); slices * len];

    // group monomials by the padding they need
    let mut groups: Vec<(usize, Vec<&Monomial>)> = Vec::new();
    for mono in &spec.monomials {
        let p = padding.max((mono.degree() as usize + 2) / 2);
        match groups.iter_mut().find(|(q, _)| *q == p) {
            Some((_, v)) => v.push(mono),
            None => groups.push((p, vec![mono])),
        }
    }
    for (p, monos) in &groups {
        let big = padded_points(g, *p);
        let big_len: usize = big.iter().product();
        let up = ((big_len as f64) / (len as f64)).sqrt();
        let down = 1.0 / up;
        let uses_grad: Vec<bool> = (0..n)
            .map(|j| monos.iter().any(|m| m.beta[2 + j] > 0 || m.beta[2 + n + j] > 0))
            .collect();
        out.par_chunks_mut(len).enumerate().for_each(|(s, dst)| {
            let mut vars: Vec<Vec<C64>> = Vec::with_capacity(1 + n);
            let mut buf = vec![C64::new(0.0, 0.0); big_len];
            pad_to_physical(g, uhat.slice(s), &big, up, &mut buf);
            vars.push(buf.clone());
            for j in 0..n {
                if uses_grad[j] {
                    pad_to_physical(g, grads[j].slice(s), &big, up, &mut buf);
                    vars.push(buf.clone());
                } else {
                    vars.push(Vec::new());
                }
            }
            for (q, acc) in buf.iter_mut().enumerate() {
                let u = vars[0][q];
                let ubar = u.conj();
                let mut total = C64::new(0.0, 0.0);
                for mono in monos {
                    let b = &mono.beta;
                    let mut v = mono.coeff * u.powu(b[0]) * ubar.powu(b[1]);
                    for j in 0..n {
                        if b[2 + j] > 0 {
                            v *= vars[1 + j][q].powu(b[2 + j]);
                        }
                        if b[2 + n + j] > 0 {
                            v *= vars[1 + j][q].conj().powu(b[2 + n + j]);
                        }
                    }
                    total += v;
                }
                *acc = total;
            }
            truncate_from_physical(g, &mut buf, &big, down, dst);
        });
    }
    let f = Field::from_vec(g, u.kind(), Rep::Frequency, out)?;
    if out_has_nan(&f) {
        return Err(Error::Numerical("nonlinearity overflowed".into()));
    }
    Ok(if physical_in { f.into_physical() } else if u.is_frequency() { f } else { f.to_physical() })
}

fn out_has_nan(f: &Field) -> bool {
    f.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
}

/// Zero every coefficient outside `|ξ|∞ ≤ K` so the iterates stay where the
/// family forms a partition of unity.
pub fn galerkin_project(f: &Field, k_max: i64) -> Field {
    let limit = k_max as f64 + 1e-12;
    f.multiplier(|xi| if xi.iter().all(|x| x.abs() <= limit) { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `−i 𝒜 F(u)` from node `m0`, projected onto the family band.
fn nonlinear_part(u: &Field, config: &SolverConfig, family: &DecompFamily, m0: usize) -> Result<Field> {
    let f = eval_nonlinearity(u, &config.nonlinearity, config.padding)?;
    let f = galerkin_project(&f, family.k_max());
    Ok(duhamel_from(&f, m0)?.scale(C64::new(0.0, -1.0)))
}

fn zero_node(grid: &Grid) -> Result<usize> {
    grid.zero_index().ok_or_else(|| Error::Invalid("t = 0 is not a time node (Nt must be even)".into()))
}

/// `𝒯u = S(t)u₀ − i𝒜F(u)`.
pub fn integral_map(u: &Field, u0: &Field, config: &SolverConfig, family: &DecompFamily) -> Result<Field> {
    let m0 = zero_node(u.grid())?;
    let free = evolve_trajectory(&u0.to_frequency())?;
    free.add(&nonlinear_part(&u.to_frequency(), config, family, m0)?)
}

/// `‖u − 𝒯u‖` in the configured working norm.
pub fn residual(u: &Field, u0: &Field, config: &SolverConfig, family: &DecompFamily) -> Result<f64> {
    let tu = integral_map(u, u0, config, family)?;
    Ok(working_norm(&u.to_frequency().sub(&tu)?, &config.working_norm(), family)?.total)
}

/// Picard iteration from `u^{(0)} = S(t)u₀`. The solution is returned in
/// frequency representation.
pub fn picard_solve(
    u0: &Field,
    config: &SolverConfig,
    family: &DecompFamily,
) -> Result<(Field, SolutionDiagnostics)> {
    let start = evolve_trajectory(&u0.to_frequency())?;
    picard_solve_from(u0, start, config, family)
}

/// Picard iteration from an arbitrary first iterate.
pub fn picard_solve_from(
    u0: &Field,
    first: Field,
    config: &SolverConfig,
    family: &DecompFamily,
) -> Result<(Field, SolutionDiagnostics)> {
    let m0 = zero_node(u0.grid())?;
    solve_anchored(u0, first, config, family, m0)
}

fn solve_anchored(
    u0: &Field,
    first: Field,
    config: &SolverConfig,
    family: &DecompFamily,
    m0: usize,
) -> Result<(Field, SolutionDiagnostics)> {
    config.validate()?;
    if u0.kind() != Kind::Spatial {
        return invalid("the datum must be a spatial field");
    }
    if first.kind() != Kind::SpaceTime {
        return invalid("the first iterate must be a space-time field");
    }
    let norm_spec = config.working_norm();
    let xnorm = |f: &Field| -> Result<f64> { Ok(working_norm(f, &norm_spec, family)?.total) };
    let g = u0.grid();
    let free = {
        let traj = evolve_trajectory(&u0.to_frequency())?;
        // S(t − t_{m0}) u₀ on every node
        free_evolve(&traj, -g.time(m0))
    };
    let mut diag = SolutionDiagnostics {
        norm: norm_spec.name.clone(),
        norms: vec![],
        differences: vec![],
        ratios: vec![],
        residual: f64::INFINITY,
        converged: false,
        non_contracting: false,
        iterations: 0,
        warnings: config.warnings(),
        scattering: None,
    };

    // Increments are propagated as differences of nonlinear terms so that
    // d_m stays resolvable far below the size of the iterates.
    let mut u = first.to_frequency();
    let mut prev_nl: Option<Field> = None;
    let mut step: Field;
    let mut above = 0;
    for it in 0..config.max_iter {
        let nl = nonlinear_part(&u, config, family, m0)?;
        step = match &prev_nl {
            None => free.add(&nl)?.sub(&u)?,
            Some(p) => nl.sub(p)?,
        };
        if out_has_nan(&step) {
            return Err(Error::Numerical(format!("iterate {} is not finite", it + 1)));
        }
        diag.norms.push(xnorm(&u)?);
        let d = xnorm(&step)?;
        if !d.is_finite() {
            return Err(Error::Numerical(format!("iterate {} overflowed", it + 1)));
        }
        if let Some(&last) = diag.differences.last() {
            let ratio = if last > 0.0 { d / last } else { 0.0 };
            diag.ratios.push(ratio);
            above = if ratio >= 1.0 { above + 1 } else { 0 };
        }
        diag.differences.push(d);
        diag.iterations = it + 1;
        let next = u.add(&step)?;
        prev_nl = Some(nl);
        // d is ‖u − 𝒯u‖ of the iterate we just stepped from
        if d <= config.tol {
            diag.residual = d;
            diag.converged = true;
            return Ok((u, diag));
        }
        if above >= 3 {
            diag.non_contracting = true;
            diag.residual = d;
            return Ok((u, diag));
        }
        u = next;
    }
    // residual of the final iterate
    let nl = nonlinear_part(&u, config, family, m0)?;
    let last = match &prev_nl {
        None => free.add(&nl)?.sub(&u)?,
        Some(p) => nl.sub(p)?,
    };
    diag.norms.push(xnorm(&u)?);
    diag.residual = xnorm(&last)?;
    diag.converged = diag.residual <= config.tol;
    Ok((u, diag))
}

/// Random localized datum rescaled so that `‖u₀‖_{M^s_{2,1}} = δ`.
pub fn scaled_datum(
    grid: &Grid,
    family: &DecompFamily,
    support: &Support,
    width: f64,
    seed: u64,
    delta: f64,
    s: f64,
) -> Result<Field> {
    let v = random_localized(grid, support, width, seed)?;
    let norm = modulation_norm(&v, s, family)?;
    Ok(v.scale(C64::new(delta / norm, 0.0)))
}

/// Which end of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Plus,
    Minus,
}

/// `S(−t) u(t)` at node `m`.
fn pulled_back(u: &Field, m: usize) -> Field {
    free_evolve(&u.at(m).to_frequency(), -u.grid().time(m))
}

fn end_nodes(g: &Grid, dir: Direction) -> [usize; 3] {
    let nt = g.nt();
    let z = nt / 2;
    match dir {
        Direction::Plus => [nt - 1, z + nt / 4, z + nt / 8],
        Direction::Minus => [0, z - nt / 4, z - nt / 8],
    }
}

/// `u_± = S(∓T) u(±T)`, taken at the last (first) time node. Frequency
/// representation.
pub fn scattering_state(u: &Field, dir: Direction) -> Result<Field> {
    if u.kind() != Kind::SpaceTime {
        return invalid("scattering states are read from a space-time solution");
    }
    Ok(pulled_back(u, end_nodes(u.grid(), dir)[0]))
}

/// Norms of `u_±` and the window-halving Cauchy differences, in `M^s_{2,1}`.
pub fn scattering_report(u: &Field, s: f64, family: &DecompFamily) -> Result<ScatteringData> {
    let g = u.grid();
    if g.nt() % 8 != 0 {
        return invalid("window halving needs Nt divisible by 8");
    }
    let mut norms = [0.0; 2];
    let mut cauchy = [[0.0; 2]; 2];
    for (d, dir) in [Direction::Plus, Direction::Minus].into_iter().enumerate() {
        let states: Vec<Field> = end_nodes(g, dir).iter().map(|&m| pulled_back(u, m)).collect();
        norms[d] = modulation_norm(&states[0], s, family)?;
        cauchy[d][0] = modulation_norm(&states[0].sub(&states[1])?, s, family)?;
        cauchy[d][1] = modulation_norm(&states[1].sub(&states[2])?, s, family)?;
    }
    Ok(ScatteringData { plus_norm: norms[0], minus_norm: norms[1], cauchy_plus: cauchy[0], cauchy_minus: cauchy[1] })
}

/// Solve once and attach scattering data to the diagnostics. Fails if the
/// iteration did not converge.
pub fn solve_and_scatter(
    u0: &Field,
    config: &SolverConfig,
    family: &DecompFamily,
) -> Result<(Field, SolutionDiagnostics)> {
    let (u, mut diag) = picard_solve(u0, config, family)?;
    if !diag.converged {
        return Err(Error::Numerical(format!("solve did not converge (residual {:.3e})", diag.residual)));
    }
    diag.scattering = Some(scattering_report(&u, config.norm.datum_s(), family)?);
    Ok((u, diag))
}

/// `u₊` from `u₋`: solve `v(t) = S(t)u₋ − i∫_{−T}^t S(t−τ)F(v) dτ` on the
/// window and return `S(−T)v(T)`.
pub fn scattering_operator(
    u_minus: &Field,
    config: &SolverConfig,
    family: &DecompFamily,
) -> Result<(Field, SolutionDiagnostics)> {
    if u_minus.kind() != Kind::Spatial {
        return invalid("u₋ must be a spatial field");
    }
    let u_minus = u_minus.to_frequency();
    let first = evolve_trajectory(&u_minus)?;
    let (v, diag) = solve_anchored_free(&u_minus, first, config, family)?;
    if diag.non_contracting {
        return Err(Error::Numerical("scattering iteration is not contracting".into()));
    }
    Ok((scattering_state(&v, Direction::Plus)?, diag))
}

/// Like [`solve_anchored`] with the Duhamel integral started at the first
/// node and the free part `S(t)u₋` (not `S(t − t₀)`).
fn solve_anchored_free(
    u_minus: &Field,
    first: Field,
    config: &SolverConfig,
    family: &DecompFamily,
) -> Result<(Field, SolutionDiagnostics)> {
    // S(t − t₀)w = S(t)u₋ for w = S(t₀)u₋
    let w = free_evolve(u_minus, u_minus.grid().time(0));
    solve_anchored(&w, first, config, family, 0)
}
