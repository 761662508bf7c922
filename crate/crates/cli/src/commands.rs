//! Subcommand drivers. Each one resolves its settings, runs to completion in
//! memory, and only then commits its artifacts.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use gap_minmax::continuation::{epsilon_refine, linear_grid, nu_sweep, SweepConfig};
use gap_minmax::dirac::{
    analytic_level, assemble_channel, channel_spectrum, split, Discretization, RadialChannel, Splitting,
};
use gap_minmax::fuzz::{
    oracle_fuzz, property_suite, property_suite_on, FuzzFailure, OracleFuzzSummary, PropertySuiteSummary,
    ORACLE_TOL,
};
use gap_minmax::inequalities::{
    bump_scaling_check, classical_hardy_margin, free_energy_inequality_margin, margins_csv, summarize,
    talman_homogeneous_margin, talman_inhomogeneous_margin, Generator, MarginSummary, ScalingCheck, TestFamily,
    EQUALITY_TOL, FREE_ENERGY_TOL, TALMAN_TOL,
};
use gap_minmax::minmax::{read_matrix_file, write_matrix_text, HypothesisReport, LevelRecord};
use gap_minmax::potential::{Interpolation, PotentialSpec, TabulatedPotential};
use gap_minmax::spline::RadialGrid;
use gap_minmax::{Error as CoreError, Execution, SolveOptions, SplitOperator};
use serde::Serialize;

use crate::artifacts::{write_replay, Artifacts};
use crate::config::{parse_list, parse_range, Settings};
use crate::error::CliError;
use crate::ChannelArgs;

pub struct Context<'a> {
    pub settings: Settings,
    pub out: PathBuf,
    pub execution: Execution,
    pub command: &'static str,
    pub args: &'a [String],
}

impl Context<'_> {
    fn artifacts(&self) -> Artifacts {
        Artifacts::new(&self.out)
    }

    fn commit(&self, artifacts: Artifacts) -> Result<(), CliError> {
        self.settings.finish()?;
        for path in artifacts.commit(self.command, self.args)? {
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    /// Leaves the replay file and turns the failure into exit code 3.
    fn fail(&self, replay: &str, message: String) -> CliError {
        match write_replay(&self.out, replay) {
            Ok(path) => CliError::Property(format!("{message}; replay written to {}", path.display())),
            Err(e) => CliError::Property(format!("{message}; replay could not be written: {e}")),
        }
    }
}

/// Resolved channel settings.
struct ChannelSetup {
    kappa: i32,
    nu: f64,
    mass: f64,
    potential: PotentialSpec,
    disc: Discretization,
}

fn discretization(s: &Settings, a: &ChannelArgs, nu: f64) -> Result<Discretization, CliError> {
    let mut disc =
        if s.switch("refined", a.refined)? { Discretization::refined(nu) } else { Discretization::reference(nu) };
    disc.order = s.or("order", a.order, disc.order)?;
    let grid = RadialGrid::new(
        s.or("r-max", a.r_max, disc.grid.r_max)?,
        s.or("intervals", a.intervals, disc.grid.n_intervals)?,
        s.or("stretch", a.stretch, disc.grid.stretch)?,
    )?;
    disc.grid = grid;
    Ok(disc)
}

fn interpolation(text: &str) -> Result<Interpolation, CliError> {
    match text {
        "linear" => Ok(Interpolation::Linear),
        "cubic" => Ok(Interpolation::Cubic),
        other => Err(CliError::Usage(format!("unknown interpolation {other:?} (linear or cubic)"))),
    }
}

fn channel_setup(s: &Settings, a: &ChannelArgs) -> Result<ChannelSetup, CliError> {
    let kappa: i32 = s.or("kappa", a.kappa, -1)?;
    if kappa == 0 {
        return Err(CliError::Usage("kappa must be a nonzero integer".into()));
    }
    let nu: f64 = s.or("nu", a.nu, 0.5)?;
    let mass: f64 = s.or("mass", a.mass, 1.0)?;
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(CliError::Usage(format!("mass must be finite and >= 0, got {mass}")));
    }
    let eps: f64 = s.or("eps", a.eps, 0.0)?;
    let interp = interpolation(&s.or("interp", a.interp.clone(), "linear".to_string())?)?;
    let table: Option<PathBuf> = s.get("table", a.table.clone())?;
    let disc = discretization(s, a, nu)?;
    let potential = match table {
        Some(path) => {
            let bounded = TabulatedPotential::load(&path, interp)?;
            let lo = bounded.values().iter().copied().fold(0.0, f64::min);
            let hi = bounded.values().iter().copied().fold(0.0, f64::max);
            PotentialSpec::CoulombPlusBounded { nu, bounded, c1: -lo, c2: hi }
        }
        None if eps > 0.0 => PotentialSpec::RegularizedCoulomb { nu, epsilon: eps },
        None if eps == 0.0 => PotentialSpec::Coulomb { nu },
        None => return Err(CliError::Usage(format!("eps must be >= 0, got {eps}"))),
    };
    let report = potential.check_admissible(disc.grid.r_max);
    if !report.passed() {
        let detail: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(CliError::Usage(format!("potential is not admissible ({})", detail.join("; "))));
    }
    Ok(ChannelSetup { kappa, nu, mass, potential, disc })
}

fn assemble(setup: &ChannelSetup) -> Result<RadialChannel, CliError> {
    Ok(assemble_channel(setup.kappa, setup.mass, setup.potential.clone(), setup.disc)?)
}

#[derive(Serialize)]
struct ChannelInfo<'a> {
    kappa: i32,
    mass: f64,
    potential: &'a PotentialSpec,
    discretization: Discretization,
    dim_plus: usize,
    dim_minus: usize,
    gap_constant: f64,
}

#[derive(Serialize)]
struct LevelOut {
    k: usize,
    lambda: f64,
    residual: f64,
    iterations: usize,
    bracket: [f64; 2],
    suspect: bool,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    kind: &'static str,
    channel: ChannelInfo<'a>,
    splitting: Splitting,
    hypothesis: HypothesisReport,
    levels: Vec<LevelOut>,
    analytic_reference: Option<Vec<f64>>,
    abs_error: Option<Vec<f64>>,
}

pub fn solve(
    ctx: &Context,
    a: &ChannelArgs,
    split_flag: Option<String>,
    kmax: Option<usize>,
    tol: Option<f64>,
    export_matrix: bool,
) -> Result<(), CliError> {
    let s = &ctx.settings;
    let setup = channel_setup(s, a)?;
    let splitting: Splitting = s.or("split", split_flag, "talman".to_string())?.parse()?;
    let kmax: usize = s.or("kmax", kmax, 1)?;
    let tol: f64 = s.or("tol", tol, SolveOptions::default().tol)?;
    let export = s.switch("export-matrix", export_matrix)?;
    s.finish()?;
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("tol must be positive, got {tol}")));
    }

    let ch = assemble(&setup)?;
    let op = split(&ch, splitting)?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    let sol = channel_spectrum(&ch, splitting, kmax, &opts)?;

    let analytic = match setup.potential {
        PotentialSpec::Coulomb { nu } if setup.mass > 0.0 && nu > 0.0 => Some(
            (1..=kmax)
                .map(|k| analytic_level(nu, setup.kappa, k).map(|e| e * setup.mass))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let abs_error =
        analytic.as_ref().map(|r| r.iter().zip(&sol.levels).map(|(e, l)| (l.lambda - e).abs()).collect());
    let output = SolveOutput {
        kind: "solve",
        channel: ChannelInfo {
            kappa: setup.kappa,
            mass: setup.mass,
            potential: &setup.potential,
            discretization: setup.disc,
            dim_plus: op.dim_plus(),
            dim_minus: op.dim_minus(),
            gap_constant: op.gap_constant(),
        },
        splitting,
        hypothesis: sol.hypothesis.clone(),
        levels: sol
            .levels
            .iter()
            .map(|l| LevelOut {
                k: l.k,
                lambda: l.lambda,
                residual: l.residual,
                iterations: l.iterations,
                bracket: [l.bracket_lo, l.bracket_hi],
                suspect: l.suspect,
            })
            .collect(),
        analytic_reference: analytic,
        abs_error,
    };
    let mut data = String::from("# k lambda\n");
    for l in &sol.levels {
        data.push_str(&format!("{} {:.15e}\n", l.k, l.lambda));
    }
    for l in &sol.levels {
        println!("k = {}  lambda = {:.12}", l.k, l.lambda);
    }

    let mut art = ctx.artifacts();
    art.json("solve.json", &output)?;
    art.text("solve.dat", data);
    if export {
        art.text("matrix.txt", write_matrix_text(&op));
    }
    ctx.commit(art)
}

pub struct VerifyArgs {
    pub fuzz: Option<usize>,
    pub dim: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub matrix: Option<PathBuf>,
    pub channel_properties: bool,
}

fn parse_dims(text: &str) -> Result<RangeInclusive<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad dimension {text:?}; expected n or lo:hi with n >= 2"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let range = match text.split_once(':') {
        Some((lo, hi)) => parse(lo)?..=parse(hi)?,
        None => {
            let n = parse(text)?;
            n..=n
        }
    };
    if *range.start() < 2 || range.is_empty() {
        return Err(bad());
    }
    Ok(range)
}

#[derive(Serialize)]
struct MatrixCheck {
    file: String,
    hypothesis: Option<HypothesisReport>,
    rejected: Option<String>,
    levels: Vec<f64>,
    oracle: Vec<f64>,
    max_abs_error: f64,
    properties: Option<PropertySuiteSummary>,
    passed: bool,
}

#[derive(Serialize)]
struct ChannelProperties {
    kappa: i32,
    nu: f64,
    summary: PropertySuiteSummary,
}

#[derive(Serialize)]
struct VerifyOutput {
    kind: &'static str,
    seed: u64,
    fuzz: Option<OracleFuzzSummary>,
    properties: Option<PropertySuiteSummary>,
    channel_properties: Option<ChannelProperties>,
    matrix: Option<MatrixCheck>,
    passed: bool,
}

fn check_matrix(path: &Path, samples: usize, seed: u64, exec: Execution) -> Result<(MatrixCheck, SplitOperator), CliError> {
    let op = read_matrix_file(path)?;
    let file = path.display().to_string();
    let mut check = MatrixCheck {
        file,
        hypothesis: None,
        rejected: None,
        levels: Vec::new(),
        oracle: Vec::new(),
        max_abs_error: 0.0,
        properties: None,
        passed: false,
    };
    match op.lower_probe() {
        Err(e @ CoreError::HypothesisViolated { .. }) => {
            check.rejected = Some(e.to_string());
            return Ok((check, op));
        }
        Err(e) => return Err(e.into()),
        Ok(report) => check.hypothesis = Some(report),
    }
    let opts = SolveOptions::default();
    check.oracle = op.dense_oracle(op.gap_constant(), f64::INFINITY)?;
    for k in 1..=op.dim_plus() {
        check.levels.push(op.solve_level(k, &opts)?.lambda);
    }
    check.max_abs_error = check
        .levels
        .iter()
        .zip(&check.oracle)
        .map(|(l, o)| (l - o).abs())
        .fold(0.0, f64::max);
    let props = property_suite_on(&op, samples, seed, exec)?;
    check.passed = check.oracle.len() >= op.dim_plus() && check.max_abs_error <= ORACLE_TOL && props.passed();
    check.properties = Some(props);
    Ok((check, op))
}

fn replay_text(failure: &FuzzFailure, total: usize) -> String {
    format!("# case {} ({} failing in total): {}\n{}", failure.index, total, failure.detail, failure.matrix)
}

pub fn verify(ctx: &Context, a: &ChannelArgs, v: VerifyArgs) -> Result<(), CliError> {
    let s = &ctx.settings;
    let seed: u64 = s.or("seed", v.seed, 0)?;
    let dims = parse_dims(&s.or("dim", v.dim, "4:40".to_string())?)?;
    let matrix: Option<PathBuf> = s.get("matrix", v.matrix)?;
    let channel_properties = s.switch("channel-properties", v.channel_properties)?;
    let fuzz: Option<usize> = s.get("fuzz", v.fuzz)?;
    let samples: Option<usize> = s.get("samples", v.samples)?;
    let channel = if channel_properties { Some(channel_setup(s, a)?) } else { None };
    let default_run = matrix.is_none() && !channel_properties && fuzz.is_none() && samples.is_none();
    s.finish()?;

    let mut output =
        VerifyOutput { kind: "verify", seed, fuzz: None, properties: None, channel_properties: None, matrix: None, passed: true };
    let mut replays: Vec<String> = Vec::new();

    if let Some(n) = fuzz.or(if default_run { Some(500) } else { None }) {
        let summary = oracle_fuzz(n, n / 10, dims.clone(), seed, &SolveOptions::default(), ctx.execution)?;
        println!(
            "fuzz: {}/{} agree, max abs err {:.2e}, {}/{} counterexamples rejected",
            summary.agreements, summary.cases, summary.max_abs_error, summary.counterexamples_rejected, summary.counterexamples
        );
        if let Some(f) = summary.failures.first() {
            replays.push(replay_text(f, summary.failures.len()));
        }
        output.passed &= summary.passed();
        output.fuzz = Some(summary);
    }
    // --samples goes to the channel or matrix when one is given
    if default_run || (samples.is_some() && matrix.is_none() && !channel_properties) {
        let summary = property_suite(samples.unwrap_or(1000), dims.clone(), seed, ctx.execution)?;
        println!("properties: {} samples, {} violations", summary.samples, summary.violations);
        if let Some(f) = summary.failures.first() {
            replays.push(replay_text(f, summary.failures.len()));
        }
        output.passed &= summary.passed();
        output.properties = Some(summary);
    }
    if let Some(setup) = channel {
        let ch = assemble(&setup)?;
        let summary = property_suite_on(&split(&ch, Splitting::Talman)?, samples.unwrap_or(200), seed, ctx.execution)?;
        println!("channel properties: {} samples, {} violations", summary.samples, summary.violations);
        if let Some(f) = summary.failures.first() {
            replays.push(replay_text(f, summary.failures.len()));
        }
        output.passed &= summary.passed();
        output.channel_properties = Some(ChannelProperties { kappa: setup.kappa, nu: setup.nu, summary });
    }
    if let Some(path) = matrix {
        let (check, op) = check_matrix(&path, samples.unwrap_or(200), seed, ctx.execution)?;
        match &check.rejected {
            Some(msg) => println!("matrix: hypothesis fails ({msg})"),
            None => println!("matrix: {} levels, max abs err {:.2e}", check.levels.len(), check.max_abs_error),
        }
        if !check.passed {
            let why = check.rejected.clone().unwrap_or_else(|| "oracle or property mismatch".into());
            replays.push(format!("# {}: {why}\n{}", check.file, write_matrix_text(&op)));
        }
        output.passed &= check.passed;
        output.matrix = Some(check);
    }

    if !output.passed {
        let summary = serde_json::to_string_pretty(&output).map_err(|e| CliError::Usage(e.to_string()))?;
        println!("{summary}");
        let first = replays.into_iter().next().unwrap_or_default();
        return Err(ctx.fail(&first, "verification failed".into()));
    }
    let mut art = ctx.artifacts();
    art.json("verify.json", &output)?;
    ctx.commit(art)
}

pub fn sweep(
    ctx: &Context,
    a: &ChannelArgs,
    nu_grid: Option<String>,
    refine: bool,
    eps_list: Option<String>,
) -> Result<(), CliError> {
    let s = &ctx.settings;
    let kappa: i32 = s.or("kappa", a.kappa, -1)?;
    if kappa == 0 {
        return Err(CliError::Usage("kappa must be a nonzero integer".into()));
    }
    let mut art = ctx.artifacts();
    if s.switch("refine", refine)? {
        let nu: f64 = s.or("nu", a.nu, 0.5)?;
        let eps = parse_list(&s.or("eps-list", eps_list, "0.2,0.1,0.05,0.01".to_string())?)?;
        let disc = discretization(s, a, nu)?;
        s.finish()?;
        let run = epsilon_refine(kappa, nu, &eps, disc, &SolveOptions::default(), ctx.execution)?;
        for (e, l) in &run.records {
            println!("eps = {e:<8} lambda1 = {l:.12}");
        }
        if !run.monotone {
            return Err(ctx.fail(&run.to_csv(), format!("lambda1 increases by {:.3e} as eps decreases", run.max_increase)));
        }
        art.text("refine.csv", run.to_csv());
        art.json("refine.json", &Tagged { kind: "refine", run: &run })?;
    } else {
        let eps: f64 = s.or("eps", a.eps, 0.1)?;
        let (lo, hi, step) = parse_range(&s.or("nu-grid", nu_grid, "0:0.9:0.1".to_string())?)?;
        let grid = linear_grid(lo, hi, step)?;
        let mut cfg = SweepConfig::new(kappa, eps, grid);
        let nu_min = cfg.nu_grid.iter().copied().filter(|&v| v > 0.0).fold(1.0, f64::min);
        cfg.disc = discretization(s, a, nu_min)?;
        cfg.execution = ctx.execution;
        s.finish()?;
        let run = nu_sweep(&cfg)?;
        for n in &run.nodes {
            println!("nu = {:<5} lambda1 = {:.12}", n.nu, n.lambda1);
        }
        if !run.passed() {
            return Err(ctx.fail(&run.to_csv(), format!("sweep invariant violated: {}", run.failures.join("; "))));
        }
        art.text("sweep.csv", run.to_csv());
        art.json("sweep.json", &Tagged { kind: "sweep", run: &run })?;
    }
    ctx.commit(art)
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    kind: &'static str,
    #[serde(flatten)]
    run: &'a T,
}

#[derive(Serialize)]
struct HardyOutput {
    kind: &'static str,
    family: TestFamily,
    kappa: i32,
    nu: f64,
    mass: f64,
    summaries: Vec<MarginSummary>,
    equality_margin: Option<f64>,
    scaling: Option<ScalingCheck>,
    passed: bool,
}

pub fn hardy(
    ctx: &Context,
    a: &ChannelArgs,
    family: Option<String>,
    count: Option<usize>,
    seed: Option<u64>,
    scales: Option<String>,
) -> Result<(), CliError> {
    let s = &ctx.settings;
    let kappa: i32 = s.or("kappa", a.kappa, -1)?;
    let nu: f64 = s.or("nu", a.nu, 0.5)?;
    let mass: f64 = s.or("mass", a.mass, 1.0)?;
    let count: usize = s.or("count", count, 200)?;
    let seed: u64 = s.or("seed", seed, 0)?;
    let kind = s.or("family", family, "random".to_string())?;
    let scales = parse_list(&s.or("scales", scales, "1,0.5,0.25,0.125".to_string())?)?;
    let disc = discretization(s, a, nu.clamp(0.1, 0.99))?;
    s.finish()?;
    if kappa == 0 || !(0.0..=1.0).contains(&nu) || !(mass >= 0.0) || count == 0 {
        return Err(CliError::Usage("need kappa != 0, 0 <= nu <= 1, mass >= 0 and count >= 1".into()));
    }
    let generator = match kind.as_str() {
        "random" => Generator::RandomSpline,
        "bumps" => Generator::NearOriginBumps { scales: scales.clone() },
        "ground" if nu < 1.0 => Generator::GroundState { nu },
        "ground" => return Err(CliError::Usage("the ground-state family needs nu < 1".into())),
        other => return Err(CliError::Usage(format!("unknown family {other:?} (random, bumps or ground)"))),
    };
    let family = TestFamily::new(generator, count, seed);
    let ch = assemble_channel(kappa, mass, PotentialSpec::Free, disc)?;
    let members = family.sample(&ch)?;

    let exec = ctx.execution;
    let inhom = talman_inhomogeneous_margin(&members, nu, kappa, exec);
    let hom = talman_homogeneous_margin(&members, kappa, exec);
    let classical = classical_hardy_margin(&members, exec);
    let mut summaries = vec![
        summarize("talman-inhomogeneous", &inhom, TALMAN_TOL),
        summarize("talman-homogeneous", &hom, TALMAN_TOL),
        summarize("classical-hardy", &classical, TALMAN_TOL),
    ];
    let mut records = [inhom.clone(), hom, classical].concat();
    if matches!(family.generator, Generator::RandomSpline) {
        let free = free_energy_inequality_margin(&ch, nu, count, seed, exec)?;
        summaries.push(summarize(&free[0].tag, &free, FREE_ENERGY_TOL));
        records.extend(free);
    }
    let equality_margin = match family.generator {
        Generator::GroundState { .. } => Some(inhom[0].relative()),
        _ => None,
    };
    let scaling = match family.generator {
        Generator::NearOriginBumps { ref scales } => Some(bump_scaling_check(kappa, scales)?),
        _ => None,
    };
    let passed = summaries.iter().all(|s| s.passed)
        && equality_margin.map_or(true, |m| m.abs() <= EQUALITY_TOL)
        && scaling.as_ref().map_or(true, |c| c.passed);
    for s in &summaries {
        println!("{:<22} min relative margin {:+.3e}  {}", s.tag, s.min_relative, if s.passed { "ok" } else { "FAIL" });
    }
    if let Some(m) = equality_margin {
        println!("ground-state relative margin {m:+.3e}");
    }
    let csv = margins_csv(&records);
    if !passed {
        return Err(ctx.fail(&csv, "inequality margin below tolerance".into()));
    }
    let output = HardyOutput { kind: "hardy", family, kappa, nu, mass, summaries, equality_margin, scaling, passed };
    let mut art = ctx.artifacts();
    art.text("hardy.csv", csv);
    art.json("hardy.json", &output)?;
    ctx.commit(art)
}

#[derive(Serialize)]
struct MatrixOutput {
    kind: &'static str,
    dim_plus: usize,
    dim_minus: usize,
    gap_constant: f64,
    hypothesis: HypothesisReport,
    levels: Vec<LevelRecord>,
    oracle: Vec<f64>,
}

pub fn matrix(ctx: &Context, file: Option<PathBuf>, kmax: Option<usize>, tol: Option<f64>) -> Result<(), CliError> {
    let s = &ctx.settings;
    let file: PathBuf = s.get("file", file)?.ok_or_else(|| CliError::Usage("matrix needs --file".into()))?;
    let kmax: Option<usize> = s.get("kmax", kmax)?;
    let tol: f64 = s.or("tol", tol, SolveOptions::default().tol)?;
    s.finish()?;
    let op = read_matrix_file(&file)?;
    let hypothesis = op.lower_probe()?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    let levels = (1..=kmax.unwrap_or(op.dim_plus()))
        .map(|k| op.solve_level(k, &opts).map(|sol| LevelRecord::from(&sol)))
        .collect::<Result<Vec<_>, _>>()?;
    for l in &levels {
        println!("k = {}  lambda = {:.15}", l.k, l.lambda);
    }
    let output = MatrixOutput {
        kind: "matrix",
        dim_plus: op.dim_plus(),
        dim_minus: op.dim_minus(),
        gap_constant: op.gap_constant(),
        hypothesis,
        oracle: op.dense_oracle(op.gap_constant(), f64::INFINITY)?,
        levels,
    };
    let mut art = ctx.artifacts();
    art.json("matrix.json", &output)?;
    ctx.commit(art)
}
