//! Batch front-end. Every command resolves a TOML config plus flag
//! overrides, validates it, runs, and writes CSV/JSON under the output
//! directory. Reports embed the resolved config and the library version.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::christ_kiselev::{restriction_via_whitney, whitney_decompose, whitney_report, DiscreteKernelOperator, Exponents};
use crate::decomp::{build_family, DecompFamily};
use crate::ensemble::{complex_normal, rng, Support};
use crate::error::{invalid, Error, Result};
use crate::estimates::{
    fit_scaling, maximal_scaling, run_estimate, sharpness_witness, Ensemble, EstimateId, EstimateParams, EstimateSpec,
};
use crate::field::{Field, Kind};
use crate::grid::{make_grid, Grid};
use crate::io;
use crate::norms::{lp_spatial, mixed_norm, modulation_norm, working_norm, MixedNormSpec};
use crate::solver::{scaled_datum, scattering_state, solve_and_scatter, picard_solve, Direction, NonlinearitySpec, NormChoice, SolverConfig};
use crate::C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub points: usize,
    pub r: u32,
    pub t_half: f64,
    pub nt: usize,
    pub eps: Vec<i8>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 2, points: 128, r: 3, t_half: 4.0, nt: 64, eps: vec![1, -1] }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        make_grid(self.n, self.points, self.r, self.t_half, self.nt, &self.eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    pub q: f64,
    pub k1: Vec<i64>,
    pub axis: usize,
    pub ball: i64,
    pub width: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { samples: 10, q: 4.0, k1: vec![8, 16, 32, 64], axis: 0, ball: 4, width: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessConfig {
    /// Points per axis of the witness grid; the first axis is the long one.
    pub points: Vec<usize>,
    pub r: u32,
    pub t_half: f64,
    pub q: f64,
    pub k1: Vec<i64>,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        SharpnessConfig { points: vec![2048, 64], r: 5, t_half: 1.0, q: 4.0, k1: vec![8, 16, 32, 64] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub preset: String,
    pub delta: f64,
    pub norm: Option<NormChoice>,
    pub max_iter: usize,
    pub tol: f64,
    pub padding: usize,
    /// Datum support `|ξ|∞ ≤ ball` and packet width.
    pub ball: i64,
    pub width: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            preset: "dnls1-n2-k3".into(),
            delta: 1e-3,
            norm: None,
            max_iter: 8,
            tol: 1e-6,
            padding: 2,
            ball: 2,
            width: 2.0,
        }
    }
}

pub const PRESETS: [&str; 3] = ["dnls1-n2-k3", "dnls1-n3-k2", "cubic"];

impl SolverSection {
    pub fn build(&self, n: usize) -> Result<SolverConfig> {
        let (nl, norm) = match self.preset.as_str() {
            "dnls1-n2-k3" => {
                require_dim(n, 2, &self.preset)?;
                (NonlinearitySpec::dnls1(&[C64::new(1.0, 0.0); 2], &[3, 3])?, NormChoice::X)
            }
            "dnls1-n3-k2" => {
                require_dim(n, 3, &self.preset)?;
                (NonlinearitySpec::dnls1(&[C64::new(1.0, 0.0); 3], &[2, 2, 2])?, NormChoice::Y)
            }
            "cubic" => (NonlinearitySpec::cubic(n, C64::new(1.0, 0.0)), NormChoice::X),
            other => return invalid(format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))),
        };
        let mut cfg = SolverConfig::new(nl, self.delta, self.norm.unwrap_or(norm));
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        cfg.padding = self.padding;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require_dim(n: usize, want: usize, preset: &str) -> Result<()> {
    if n != want {
        return invalid(format!("preset {preset} needs n = {want}, grid has n = {n}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhitneyConfig {
    pub depth: u32,
    /// Depths for the reconstruction-defect table; empty skips it.
    pub defect_depths: Vec<u32>,
    pub q: [f64; 3],
    /// Exponent of the `L^p_{x,t}` norm the defect is measured in.
    pub target_p: f64,
}

impl Default for WhitneyConfig {
    fn default() -> Self {
        WhitneyConfig { depth: 10, defect_depths: vec![], q: [2.0, 2.0, 2.0], target_p: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub family_k: i64,
    pub seed: u64,
    pub output: PathBuf,
    pub verify: VerifyConfig,
    pub sharpness: SharpnessConfig,
    pub solver: SolverSection,
    pub whitney: WhitneyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridConfig::default(),
            family_k: 6,
            seed: 0,
            output: PathBuf::from("out"),
            verify: VerifyConfig::default(),
            sharpness: SharpnessConfig::default(),
            solver: SolverSection::default(),
            whitney: WhitneyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn family(&self) -> Result<(Grid, DecompFamily)> {
        let g = self.grid.build()?;
        let fam = build_family(&g, self.family_k)?;
        Ok((g, fam))
    }
}

#[derive(Parser, Debug)]
#[command(name = "unidec", version, about = "Frequency-uniform decomposition laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true)]
    pub r: Option<u32>,
    #[arg(long, global = true)]
    pub t_half: Option<f64>,
    #[arg(long, global = true)]
    pub nt: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps: Option<Vec<i8>>,
    #[arg(long, global = true)]
    pub family_k: Option<i64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one catalog entry; MAX runs the ⟨k₁⟩ sweep.
    Verify {
        id: String,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        k1: Option<Vec<i64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        axis: Option<usize>,
    },
    /// Lower-bound witness for the maximal estimate.
    Sharpness {
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        k1: Option<Vec<i64>>,
    },
    /// Picard solve from a random datum of size δ.
    Solve(SolveArgs),
    /// Solve and extract the scattering states.
    Scatter(SolveArgs),
    /// Norms of a `.udf` snapshot.
    Norms { snapshot: PathBuf },
    /// Whitney decomposition and its properties.
    Whitney {
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        defect_depths: Option<Vec<u32>>,
    },
    /// Collect the summaries of every JSON report in a directory into CSV.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub norm: Option<String>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Config file (or defaults) with the flags applied.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let c = &cli.common;
    set(&mut cfg.output, c.out.clone());
    set(&mut cfg.seed, c.seed);
    set(&mut cfg.grid.n, c.n);
    set(&mut cfg.grid.points, c.points);
    set(&mut cfg.grid.r, c.r);
    set(&mut cfg.grid.t_half, c.t_half);
    set(&mut cfg.grid.nt, c.nt);
    set(&mut cfg.grid.eps, c.eps.clone());
    set(&mut cfg.family_k, c.family_k);
    match &cli.command {
        Command::Verify { q, k1, samples, axis, .. } => {
            set(&mut cfg.verify.q, *q);
            set(&mut cfg.verify.k1, k1.clone());
            set(&mut cfg.verify.samples, *samples);
            set(&mut cfg.verify.axis, *axis);
        }
        Command::Sharpness { q, k1 } => {
            set(&mut cfg.sharpness.q, *q);
            set(&mut cfg.sharpness.k1, k1.clone());
        }
        Command::Solve(a) | Command::Scatter(a) => {
            set(&mut cfg.solver.preset, a.preset.clone());
            set(&mut cfg.solver.delta, a.delta);
            set(&mut cfg.solver.tol, a.tol);
            set(&mut cfg.solver.max_iter, a.max_iter);
            if let Some(n) = &a.norm {
                cfg.solver.norm = Some(n.parse()?);
            }
        }
        Command::Whitney { depth, defect_depths } => {
            set(&mut cfg.whitney.depth, *depth);
            set(&mut cfg.whitney.defect_depths, defect_depths.clone());
        }
        Command::Norms { .. } | Command::Report { .. } => {}
    }
    Ok(cfg)
}

/// Report envelope shared by all commands.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    summary: BTreeMap<String, f64>,
    result: T,
}

struct Out<'a> {
    dir: &'a Path,
    cfg: &'a ExperimentConfig,
}

impl Out<'_> {
    fn json<T: Serialize>(&self, file: &str, command: &str, summary: BTreeMap<String, f64>, result: T) -> Result<()> {
        let env = Envelope { command, version: VERSION, config: self.cfg, summary, result };
        let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join(file), text + "\n")?;
        Ok(())
    }

    fn csv(&self, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(file)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn summary(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("UNIDEC_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Invalid(format!("UNIDEC_THREADS={v:?} is not a count")))?;
        if n == 0 {
            return invalid("UNIDEC_THREADS must be at least 1");
        }
        // a pool built earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_INVALID,
            };
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command.
pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = resolve(cli)?;
    fs::create_dir_all(&cfg.output)?;
    let out = Out { dir: &cfg.output, cfg: &cfg };
    match &cli.command {
        Command::Verify { id, .. } => verify(&out, id),
        Command::Sharpness { .. } => sharpness(&out),
        Command::Solve(_) => solve(&out),
        Command::Scatter(_) => scatter(&out),
        Command::Norms { snapshot } => norms(&out, snapshot),
        Command::Whitney { .. } => whitney(&out),
        Command::Report { input } => report(&out, input.as_deref().unwrap_or(&cfg.output)),
    }
}

fn verify(out: &Out, id: &str) -> Result<i32> {
    let cfg = out.cfg;
    let v = &cfg.verify;
    let id: EstimateId = id.parse()?;
    let (_, fam) = cfg.family()?;
    if id == EstimateId::Max {
        if v.k1.len() < 4 {
            return invalid("the MAX sweep needs at least four k₁ values");
        }
        let sweep = maximal_scaling(&fam, &v.k1, v.q, v.samples, cfg.seed)?;
        out.csv(
            "verify-MAX.csv",
            &["k1", "bracket", "mean_ratio"],
            sweep.k1.iter().zip(&sweep.values).map(|(k, y)| vec![k.to_string(), (1 + k.abs()).to_string(), y.to_string()]),
        )?;
        let s = summary(&[("slope", sweep.fit.slope), ("stderr", sweep.fit.stderr), ("expected", 1.0 / v.q)]);
        out.json("fits.json", "verify", s, &sweep)?;
        return Ok(EXIT_OK);
    }
    let params = EstimateParams { axis: v.axis, q: v.q, ..EstimateParams::default() };
    let spec = EstimateSpec::new(id, params);
    let ens = Ensemble { samples: v.samples, seed: cfg.seed, ball: v.ball, width: v.width, ..Ensemble::default() };
    let rep = run_estimate(&spec, &fam, &ens)?;
    out.csv(
        &format!("verify-{id}.csv"),
        &["seed", "k", "lhs", "rhs", "power", "ratio"],
        rep.samples.iter().map(|s| {
            let k = s.k.as_ref().map(|k| k.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default();
            vec![s.seed.to_string(), k, s.lhs.to_string(), s.rhs.to_string(), s.power.to_string(), s.ratio.to_string()]
        }),
    )?;
    let mut s = summary(&[("max_ratio", rep.max_ratio), ("mean_ratio", rep.mean_ratio), ("skipped", rep.skipped as f64)]);
    if let Some(f) = rep.fit {
        s.insert("slope".into(), f.slope);
    }
    out.json("fits.json", "verify", s.clone(), &rep.fit)?;
    out.json(&format!("verify-{id}.json"), "verify", s, &rep)?;
    Ok(EXIT_OK)
}

fn sharpness(out: &Out) -> Result<i32> {
    let cfg = out.cfg;
    let sh = &cfg.sharpness;
    if sh.points.len() != cfg.grid.eps.len() {
        return invalid("sharpness.points and grid.eps must have the same length");
    }
    let g = Grid::with_points(&sh.points, sh.r, sh.t_half, 4, &cfg.grid.eps)?;
    let ws = sh.k1.iter().map(|&k| sharpness_witness(k, sh.q, &g)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = sh.k1.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = ws.iter().map(|w| w.lower_bound).collect();
    let fit = fit_scaling(&xs, &ys)?;
    out.csv(
        "sharpness.csv",
        &["k1", "lower_bound", "probes", "t_half"],
        ws.iter().map(|w| vec![w.k1.to_string(), w.lower_bound.to_string(), w.probes.to_string(), w.t_half.to_string()]),
    )?;
    let s = summary(&[("slope", fit.slope), ("stderr", fit.stderr)]);
    out.json("sharpness.json", "sharpness", s, (&ws, fit))?;
    Ok(EXIT_OK)
}

fn solver_setup(cfg: &ExperimentConfig) -> Result<(Grid, DecompFamily, SolverConfig, Field)> {
    let (g, fam) = cfg.family()?;
    let sc = cfg.solver.build(g.dim())?;
    let u0 = scaled_datum(&g, &fam, &Support::Ball(cfg.solver.ball), cfg.solver.width, cfg.seed, sc.delta, sc.norm.datum_s())?;
    Ok((g, fam, sc, u0))
}

fn iterate_rows(d: &crate::solver::SolutionDiagnostics) -> Vec<Vec<String>> {
    (0..d.norms.len())
        .map(|m| {
            let at = |v: &Vec<f64>| v.get(m).map(|x| x.to_string()).unwrap_or_default();
            vec![m.to_string(), d.norms[m].to_string(), at(&d.differences), at(&d.ratios)]
        })
        .collect()
}

fn solve(out: &Out) -> Result<i32> {
    let (_, fam, sc, u0) = solver_setup(out.cfg)?;
    let (u, d) = picard_solve(&u0, &sc, &fam)?;
    out.csv("iterates.csv", &["iterate", "norm", "difference", "ratio"], iterate_rows(&d))?;
    io::save(&out.dir.join("datum.udf"), &u0)?;
    io::save(&out.dir.join("solution.udf"), &u)?;
    let s = summary(&[
        ("converged", flag(d.converged)),
        ("residual", d.residual),
        ("iterations", d.iterations as f64),
        ("max_ratio", d.ratios.iter().copied().fold(0.0, f64::max)),
    ]);
    out.json("solve.json", "solve", s, (&sc, &d))?;
    Ok(if d.non_contracting { EXIT_NUMERICAL } else { EXIT_OK })
}

fn scatter(out: &Out) -> Result<i32> {
    let (_, fam, sc, u0) = solver_setup(out.cfg)?;
    let (u, d) = solve_and_scatter(&u0, &sc, &fam)?;
    let sd = d.scattering.clone().expect("solve_and_scatter attaches scattering data");
    io::save(&out.dir.join("u_plus.udf"), &scattering_state(&u, Direction::Plus)?)?;
    io::save(&out.dir.join("u_minus.udf"), &scattering_state(&u, Direction::Minus)?)?;
    out.csv(
        "cauchy.csv",
        &["direction", "window", "difference"],
        [("plus", sd.cauchy_plus), ("minus", sd.cauchy_minus)]
            .iter()
            .flat_map(|(dir, c)| [(dir, "T vs T/2", c[0]), (dir, "T/2 vs T/4", c[1])])
            .map(|(dir, w, v)| vec![dir.to_string(), w.to_string(), v.to_string()])
            .collect::<Vec<_>>(),
    )?;
    let s = summary(&[
        ("plus_norm", sd.plus_norm),
        ("minus_norm", sd.minus_norm),
        ("plus_over_delta", sd.plus_norm / sc.delta),
        ("residual", d.residual),
    ]);
    out.json("scatter.json", "scatter", s, (&sc, &d))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct NormTable {
    kind: String,
    l2: f64,
    /// `(s, ‖f‖_{M^s_{2,1}})` for spatial fields, `(label, value)` otherwise.
    entries: Vec<(String, f64)>,
}

fn norms(out: &Out, snapshot: &Path) -> Result<i32> {
    let cfg = out.cfg;
    let f = io::load(snapshot, cfg.grid.t_half, &cfg.grid.eps)?;
    let fam = build_family(f.grid(), cfg.family_k)?;
    let mut entries = Vec::new();
    let kind = match f.kind() {
        Kind::Spatial => {
            for s in [0.0, 0.5, 1.5, 2.5] {
                entries.push((format!("M^{s}_2,1"), modulation_norm(&f, s, &fam)?));
            }
            entries.push(("L^4".into(), lp_spatial(&f, 4.0)?));
            "spatial"
        }
        Kind::SpaceTime => {
            for spec in [MixedNormSpec::joint(4.0), MixedNormSpec::time_outer(f64::INFINITY, 2.0)] {
                entries.push((spec.label(), mixed_norm(&f, &spec)?));
            }
            let sc = cfg.solver.build(f.grid().dim())?;
            let wn = working_norm(&f, &sc.working_norm(), &fam)?;
            entries.push((sc.working_norm().name, wn.total));
            entries.extend(wn.components);
            "spacetime"
        }
    };
    let table = NormTable { kind: kind.into(), l2: f.l2(), entries };
    out.csv("norms.csv", &["norm", "value"], table.entries.iter().map(|(k, v)| vec![k.clone(), v.to_string()]))?;
    let mut s = summary(&[("l2", table.l2)]);
    for (k, v) in &table.entries {
        s.insert(k.clone(), *v);
    }
    out.json("norms.json", "norms", s, &table)?;
    Ok(EXIT_OK)
}

/// Random spatial profile times a positive time envelope: the level
/// function then grows at a rate bounded below across the window.
fn steady_field(g: &Grid, seed: u64) -> Result<Field> {
    let mut r = rng(seed);
    let base: Vec<C64> = (0..g.len()).map(|_| complex_normal(&mut r)).collect();
    let mut data = Vec::with_capacity(g.nt() * g.len());
    for m in 0..g.nt() {
        let w = 1.0 + 0.5 * g.time(m).sin();
        data.extend(base.iter().map(|b| w * b));
    }
    Field::from_vec(g, Kind::SpaceTime, crate::Rep::Physical, data)
}

fn whitney(out: &Out) -> Result<i32> {
    let cfg = out.cfg;
    let w = &cfg.whitney;
    let pairs = whitney_decompose(w.depth)?;
    let rep = whitney_report(w.depth, &pairs);
    out.csv(
        "whitney_pairs.csv",
        &["level", "i_offset", "j_offset"],
        pairs.iter().map(|p| vec![p.level().to_string(), p.i.offset.to_string(), p.j.offset.to_string()]),
    )?;
    let bound = (1.0 - w.depth as f64).exp2();
    let mut s = summary(&[
        ("pairs", rep.pairs as f64),
        ("separated", flag(rep.separated)),
        ("disjoint", flag(rep.disjoint)),
        ("inside", flag(rep.inside)),
        ("max_partners", rep.max_partners as f64),
        ("uncovered_area", rep.uncovered_area),
        ("uncovered_bound", bound),
    ]);
    if !w.defect_depths.is_empty() {
        let g = cfg.grid.build()?;
        let f = steady_field(&g, cfg.seed)?;
        let q = Exponents::new(w.q[0], w.q[1], w.q[2], 0)?;
        let op = DiscreteKernelOperator::from_fn(&g, |t, s| C64::new((t - s).cos(), 0.0) * (-(t - s).powi(2)).exp());
        let target = MixedNormSpec::joint(w.target_p);
        let defects = w
            .defect_depths
            .iter()
            .map(|&j| Ok((j, restriction_via_whitney(&op, &f, q, target, j)?.defect)))
            .collect::<Result<Vec<_>>>()?;
        out.csv("whitney_defect.csv", &["depth", "defect"], defects.iter().map(|(j, d)| vec![j.to_string(), d.to_string()]))?;
        for (j, d) in &defects {
            s.insert(format!("defect_{j}"), *d);
        }
    }
    out.json("whitney.json", "whitney", s, &rep)?;
    Ok(if rep.all_hold() && rep.uncovered_area <= bound { EXIT_OK } else { EXIT_NUMERICAL })
}

fn report(out: &Out, input: &Path) -> Result<i32> {
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for p in &files {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
        let (Some(cmd), Some(sum)) = (v.get("command").and_then(|c| c.as_str()), v.get("summary").and_then(|s| s.as_object())) else {
            continue;
        };
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for (k, val) in sum {
            rows.push(vec![name.clone(), cmd.to_string(), k.clone(), val.to_string()]);
        }
    }
    if rows.is_empty() {
        return invalid(format!("no reports found in {}", input.display()));
    }
    out.csv("summary.csv", &["file", "command", "key", "value"], rows)?;
    Ok(EXIT_OK)
}
