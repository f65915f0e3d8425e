//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bifurcate::{bifurcation_point, bifurcation_time, xi_second_derivative};
use crate::continuation::{
    classify_endpoint, continue_branch, seed, Branch, ContinuationError, Direction, StepConfig,
    StopConfig,
};
use crate::integrate::IntegratorConfig;
use crate::model::{lambda_n, SystemParams};
use crate::orbits::{
    closure_order, find_resonance, reconstruct, OrbitError, ResonanceTarget, THETA_TOL,
};
use crate::shoot::{Constraint, SeedPoint, ShootError, Shooter, SymmetryKind, DEFAULT_TOL};

/// Environment variable overriding the output directory of the config file.
pub const OUT_DIR_ENV: &str = "RING_ORBIT_OUT_DIR";

const AFTER_HELP: &str = "\
Configuration: values come from --config FILE (TOML), then the RING_ORBIT_OUT_DIR
environment variable for the output directory, then command-line flags, each
overriding the previous.

Output files:
  trace      branch_<kind>_<plus|minus>_<hash>.csv / .json
  resonance  <kind>_<n1>pi<n2>_<hash>.csv / .json
  orbit      <kind>_orbit_<hash>.csv / .json
<hash> is a content hash of the inputs, so identical runs give identical names.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 not found.";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Verification(_) | CliError::Output(_) => 3,
            CliError::NotFound(_) => 4,
        }
    }
}

impl From<ShootError> for CliError {
    fn from(e: ShootError) -> Self {
        match e {
            ShootError::InvalidPoint(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ContinuationError> for CliError {
    fn from(e: ContinuationError) -> Self {
        match e {
            ContinuationError::Config(m) | ContinuationError::Format(m) => CliError::Config(m),
            ContinuationError::Io(e) => CliError::Output(e),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::NotFound { .. } => CliError::NotFound(e.to_string()),
            OrbitError::InvalidTarget(_)
            | OrbitError::InvalidRequest(_)
            | OrbitError::Format(_) => CliError::Config(e.to_string()),
            OrbitError::Io(e) => CliError::Output(e),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ring-orbit", version, about = "Periodic ring-plus-axial-body orbits of the (n+1)-body problem", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number of ring bodies.
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Mass of each ring body.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Mass of the axial body.
    #[arg(long = "M", global = true, allow_negative_numbers = true)]
    pub big_m: Option<f64>,
    /// Initial ring radius.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r0: Option<f64>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Directory for output files.
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    #[value(name = "+")]
    Plus,
    #[value(name = "-")]
    Minus,
    Both,
}

impl DirectionArg {
    fn directions(self) -> Vec<Direction> {
        match self {
            DirectionArg::Plus => vec![Direction::Plus],
            DirectionArg::Minus => vec![Direction::Minus],
            DirectionArg::Both => vec![Direction::Plus, Direction::Minus],
        }
    }
}

fn parse_kind(s: &str) -> Result<SymmetryKind, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Symmetry class: odd or odd-even.
    #[arg(long, value_parser = parse_kind, default_value = "odd")]
    pub kind: SymmetryKind,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the ring constant λn.
    Lambda,
    /// Bifurcation point of the circular family and its nondegeneracy.
    Bifurcate {
        #[arg(long, value_parser = parse_kind, default_value = "odd")]
        kind: SymmetryKind,
    },
    /// Correct a guess (default: the bifurcation point) at fixed b.
    Shoot {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        newton_tol: f64,
    },
    /// Trace a branch from a seed or from the bifurcation point offset in b.
    Trace {
        #[command(flatten)]
        point: PointArgs,
        /// b used for the automatic seed when no explicit point is given.
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        b_offset: f64,
        #[arg(long, value_enum, default_value = "+")]
        direction: DirectionArg,
        #[arg(long)]
        max_points: Option<usize>,
        #[arg(long)]
        ds_max: Option<f64>,
        #[arg(long)]
        theta_max: Option<f64>,
        #[arg(long = "T-max")]
        t_max: Option<f64>,
    },
    /// Refine a Θ = n1·π/n2 point on a traced branch and reconstruct its orbit.
    Resonance {
        /// Branch CSV written by `trace`; its JSON summary must sit beside it.
        #[arg(long)]
        branch: PathBuf,
        /// Target angle as n1/n2 (meaning n1·π/n2), e.g. 3/4.
        #[arg(long)]
        target: String,
        /// Periods to reconstruct; defaults to the strict closure order.
        #[arg(long)]
        periods: Option<u64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Reconstruct and export the full orbit of a point.
    Orbit {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 1)]
        periods: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Newton-correct the point at fixed b first.
        #[arg(long)]
        correct: bool,
    },
    /// Check the periodicity conditions and conservation laws at a point.
    Verify {
        #[command(flatten)]
        point: PointArgs,
        /// Tolerance on the raw conditions.
        #[arg(long = "residual-tol", default_value_t = 1e-6)]
        residual_tol: f64,
        /// Tolerance on relative energy and angular momentum drift.
        #[arg(long = "conservation-tol", default_value_t = 1e-9)]
        conservation_tol: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialParams {
    pub n: Option<u32>,
    pub m: Option<f64>,
    #[serde(rename = "M")]
    pub big_m: Option<f64>,
    pub r0: Option<f64>,
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub params: PartialParams,
    pub integrator: IntegratorConfig,
    pub step: StepConfig,
    pub stop: StopConfig,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub integrator: IntegratorConfig,
    pub step: StepConfig,
    pub stop: StopConfig,
    pub output_dir: PathBuf,
    /// Runs use no randomness; kept explicit in the record.
    pub deterministic: bool,
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn load_file(global: &GlobalArgs) -> Result<FileConfig, CliError> {
    match &global.config {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

/// Merges file, environment and flags, and validates the result.
pub fn resolve(global: &GlobalArgs, env_out_dir: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let file = load_file(global)?;
    let missing = |name: &str| {
        CliError::Config(format!(
            "missing parameter {name} (flag --{name} or [params] in the config file)"
        ))
    };
    let n = global.n.or(file.params.n).ok_or_else(|| missing("n"))?;
    let m = global.m.or(file.params.m).ok_or_else(|| missing("m"))?;
    let big_m = global
        .big_m
        .or(file.params.big_m)
        .ok_or_else(|| missing("M"))?;
    let r0 = global.r0.or(file.params.r0).ok_or_else(|| missing("r0"))?;
    let params = SystemParams::new(n, m, big_m, r0).map_err(|e| CliError::Config(e.to_string()))?;

    let mut integrator = file.integrator;
    if let Some(t) = global.tol {
        integrator.rel_tol = t;
        integrator.abs_tol = t;
    }
    integrator
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    file.step.validate()?;
    file.stop.validate()?;

    let output_dir = global
        .out_dir
        .clone()
        .or(env_out_dir)
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(RunConfig {
        params,
        integrator,
        step: file.step,
        stop: file.stop,
        output_dir,
        deterministic: true,
    })
}

fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".ring-orbit-write-check");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| {
            CliError::Config(format!(
                "output directory {} is not writable: {e}",
                dir.display()
            ))
        })
}

/// `x` to six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..=9).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn content_hash(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..6])
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(value).expect("value serializes")
    )?;
    Ok(())
}

/// Resolves the point flags, filling unset values from the bifurcation point.
fn point_from(
    args: &PointArgs,
    params: &SystemParams,
    default_b: Option<f64>,
) -> Result<SeedPoint, CliError> {
    let b = args
        .b
        .or(default_b)
        .ok_or_else(|| CliError::Config("missing --b".into()))?;
    let a = args.a.unwrap_or_else(|| params.a0());
    let t = args
        .t
        .unwrap_or_else(|| bifurcation_time(params, args.kind));
    if !(a > 0.0 && a.is_finite()) {
        return Err(CliError::Config(format!("a must be positive, got {a}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(CliError::Config(format!("T must be positive, got {t}")));
    }
    if !b.is_finite() {
        return Err(CliError::Config(format!("b must be finite, got {b}")));
    }
    Ok(SeedPoint::new(a, b, t, args.kind))
}

/// Parses arguments and runs the selected command, returning an exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let env = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match run(&cli, env, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command. `env_out_dir` stands in for the environment variable.
pub fn run(cli: &Cli, env_out_dir: Option<PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    if let Command::Lambda = cli.command {
        let file = load_file(g)?;
        let n =
            g.n.or(file.params.n)
                .ok_or_else(|| CliError::Config("missing --n".into()))?;
        let lambda = lambda_n(n).map_err(|e| CliError::Config(e.to_string()))?;
        return match g.format {
            Format::Human => Ok(writeln!(out, "lambda_{n} = {}", sig6(lambda))?),
            Format::Json => print_json(out, &serde_json::json!({ "n": n, "lambda": lambda })),
        };
    }

    let cfg = resolve(g, env_out_dir)?;
    let shooter = Shooter::new(cfg.params, cfg.integrator);
    match &cli.command {
        Command::Lambda => unreachable!("handled above"),
        Command::Bifurcate { kind } => cmd_bifurcate(&cfg, *kind, g.format, out),
        Command::Shoot { point, newton_tol } => {
            if !(*newton_tol > 0.0) {
                return Err(CliError::Config(format!(
                    "newton tolerance must be positive, got {newton_tol}"
                )));
            }
            let guess = point_from(point, &cfg.params, None)?;
            let c = shooter.newton_correct(&guess, Constraint::FixedB(guess.b), *newton_tol, 50)?;
            match g.format {
                Format::Human => {
                    writeln!(out, "converged in {} iterations", c.iterations)?;
                    write_point(out, &c.point)?;
                }
                Format::Json => print_json(
                    out,
                    &serde_json::json!({ "point": c.point, "iterations": c.iterations }),
                )?,
            }
            Ok(())
        }
        Command::Trace {
            point,
            b_offset,
            direction,
            max_points,
            ds_max,
            theta_max,
            t_max,
        } => {
            let mut step = cfg.step;
            let mut stop = cfg.stop;
            if let Some(d) = ds_max {
                step.ds_max = Some(*d);
            }
            if let Some(p) = max_points {
                stop.max_points = *p;
            }
            if theta_max.is_some() {
                stop.theta_max = *theta_max;
            }
            if t_max.is_some() {
                stop.t_max = *t_max;
            }
            step.validate()?;
            stop.validate()?;
            let explicit = point.a.is_some() || point.b.is_some() || point.t.is_some();
            let guess = point_from(point, &cfg.params, Some(*b_offset))?;
            if !explicit && guess.b == 0.0 {
                return Err(CliError::Config(
                    "--b-offset must be nonzero for an automatic seed".into(),
                ));
            }
            ensure_writable(&cfg.output_dir)?;
            cmd_trace(
                &shooter, &cfg, guess, *direction, &step, &stop, g.format, out,
            )
        }
        Command::Resonance {
            branch,
            target,
            periods,
            samples,
        } => {
            let target: ResonanceTarget = target.parse()?;
            let json = branch.with_extension("json");
            for p in [branch, &json] {
                if !p.is_file() {
                    return Err(CliError::Config(format!(
                        "branch file {} does not exist",
                        p.display()
                    )));
                }
            }
            if *samples == 0 || periods == &Some(0) {
                return Err(CliError::Config(
                    "periods and samples must be positive".into(),
                ));
            }
            let br = Branch::from_files(branch, &json)?;
            if br.params != cfg.params {
                return Err(CliError::Config(format!(
                    "branch was traced with different parameters ({})",
                    serde_json::to_string(&br.params).expect("params serialize")
                )));
            }
            ensure_writable(&cfg.output_dir)?;
            cmd_resonance(
                &shooter, &cfg, &br, &target, *periods, *samples, g.format, out,
            )
        }
        Command::Orbit {
            point,
            periods,
            samples,
            correct,
        } => {
            let p = point_from(point, &cfg.params, None)?;
            if *periods == 0 || *samples == 0 {
                return Err(CliError::Config(
                    "periods and samples must be positive".into(),
                ));
            }
            ensure_writable(&cfg.output_dir)?;
            let p = if *correct {
                shooter
                    .newton_correct(&p, Constraint::FixedB(p.b), DEFAULT_TOL, 50)?
                    .point
            } else {
                shooter.annotate(&p)?
            };
            let tr = reconstruct(&shooter, &p, *periods, *samples)?;
            let (csv, json) = tr.export(&cfg.output_dir, None)?;
            match g.format {
                Format::Human => {
                    write_point(out, &p)?;
                    write_diagnostics(out, &tr.diagnostics)?;
                    writeln!(out, "wrote {} and {}", csv.display(), json.display())?;
                }
                Format::Json => print_json(
                    out,
                    &serde_json::json!({ "point": p, "diagnostics": tr.diagnostics, "csv": csv, "json": json }),
                )?,
            }
            Ok(())
        }
        Command::Verify {
            point,
            residual_tol,
            conservation_tol,
        } => {
            let p = point_from(point, &cfg.params, None)?;
            if !(*residual_tol > 0.0 && *conservation_tol > 0.0) {
                return Err(CliError::Config("tolerances must be positive".into()));
            }
            cmd_verify(
                &shooter,
                &p,
                *residual_tol,
                *conservation_tol,
                g.format,
                out,
            )
        }
    }
}

fn write_point(out: &mut dyn Write, p: &SeedPoint) -> Result<(), CliError> {
    writeln!(out, "kind      {}", p.kind)?;
    writeln!(out, "a         {}", sig6(p.a))?;
    writeln!(out, "b         {}", sig6(p.b))?;
    writeln!(out, "T         {}", sig6(p.t))?;
    writeln!(out, "theta     {}", sig6(p.theta))?;
    writeln!(out, "residual  {:.3e}", p.residual)?;
    Ok(())
}

fn write_diagnostics(out: &mut dyn Write, d: &crate::orbits::Diagnostics) -> Result<(), CliError> {
    writeln!(out, "closure error          {:.3e}", d.closure_error)?;
    writeln!(
        out,
        "closure (relabelled)   {:.3e}",
        d.closure_error_relabel
    )?;
    writeln!(out, "energy drift           {:.3e}", d.energy_drift)?;
    writeln!(out, "Lz drift               {:.3e}", d.lz_drift)?;
    writeln!(out, "max linear momentum    {:.3e}", d.momentum_max)?;
    writeln!(out, "max centre of mass/r0  {:.3e}", d.com_max)?;
    writeln!(out, "force residual         {:.3e}", d.force_residual)?;
    Ok(())
}

fn cmd_bifurcate(
    cfg: &RunConfig,
    kind: SymmetryKind,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let r = bifurcation_point(&cfg.params, kind);
    if format == Format::Json {
        return print_json(out, &r);
    }
    writeln!(out, "kind           {kind}")?;
    writeln!(out, "a0             {}   = {}", sig6(r.point.a), r.exact.a0)?;
    writeln!(out, "b              0")?;
    writeln!(out, "T*             {}   = {}", sig6(r.point.t), r.exact.t)?;
    writeln!(out, "s              {}", sig6(r.s))?;
    writeln!(out, "margin         {}", sig6(r.margin))?;
    writeln!(
        out,
        "nondegenerate  {}",
        if r.nondegenerate { "yes" } else { "no" }
    )?;
    writeln!(out, "theta0         {}", sig6(r.theta0))?;
    if kind == SymmetryKind::Odd {
        match xi_second_derivative(&cfg.params) {
            Ok(x) => writeln!(
                out,
                "xi''(0)        {}   (A = {}, B = {})",
                sig6(x.xi2),
                sig6(x.coef_a),
                sig6(x.coef_b)
            )?,
            Err(e) => writeln!(out, "xi''(0)        undefined: {e}")?,
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_trace(
    shooter: &Shooter,
    cfg: &RunConfig,
    guess: SeedPoint,
    direction: DirectionArg,
    step: &StepConfig,
    stop: &StopConfig,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let start = seed(shooter, &guess, step.corrector_tol)?;
    let mut branches = Vec::new();
    for d in direction.directions() {
        branches.push(continue_branch(shooter, &start, d, step, stop)?);
    }
    // Everything is computed before anything is written.
    let mut written = Vec::new();
    for br in &branches {
        let json = br.summary_json();
        let dir = match br.direction {
            Direction::Plus => "plus",
            Direction::Minus => "minus",
        };
        let stem = format!(
            "branch_{}_{}_{}",
            br.kind,
            dir,
            content_hash(&(br.to_csv() + &json))
        );
        let (csv, js) = br.write_files(&cfg.output_dir, &stem)?;
        written.push((br, csv, js));
    }
    match format {
        Format::Human => {
            writeln!(out, "seed")?;
            write_point(out, &start)?;
            for (br, csv, js) in &written {
                let end = classify_endpoint(br);
                writeln!(out)?;
                writeln!(
                    out,
                    "direction {}: {} points, ended by {:?}",
                    br.direction,
                    br.points.len(),
                    br.termination
                )?;
                writeln!(
                    out,
                    "endpoint  {:?} at (a, b, T) = ({}, {}, {})",
                    end.label,
                    sig6(end.point.a),
                    sig6(end.point.b),
                    sig6(end.point.t)
                )?;
                if let Some(tl) = end.trivial_limit {
                    writeln!(
                        out,
                        "trivial limit (a, T) = ({}, {}), bifurcation point ({}, {}), distance {:.3e}",
                        sig6(tl.a),
                        sig6(tl.t),
                        sig6(tl.predicted_a),
                        sig6(tl.predicted_t),
                        tl.distance
                    )?;
                }
                let (lo, hi) = br
                    .points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                        (l.min(p.theta), h.max(p.theta))
                    });
                writeln!(out, "theta range [{}, {}]", sig6(lo), sig6(hi))?;
                writeln!(out, "wrote {} and {}", csv.display(), js.display())?;
            }
        }
        Format::Json => {
            let items: Vec<_> = written
                .iter()
                .map(|(br, csv, js)| serde_json::json!({ "summary": br.summary(), "csv": csv, "json": js }))
                .collect();
            print_json(
                out,
                &serde_json::json!({ "seed": start, "branches": items }),
            )?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_resonance(
    shooter: &Shooter,
    cfg: &RunConfig,
    branch: &Branch,
    target: &ResonanceTarget,
    periods: Option<u64>,
    samples: usize,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let point = find_resonance(shooter, branch, target, THETA_TOL)?;
    let order = closure_order(target, cfg.params.n(), point.kind);
    let k = periods.unwrap_or(order.k_strict);
    let tr = reconstruct(shooter, &point, k, samples)?;
    let (csv, json) = tr.export(&cfg.output_dir, Some(target))?;
    match format {
        Format::Human => {
            writeln!(out, "target theta = {target} = {}", sig6(target.angle()))?;
            write_point(out, &point)?;
            writeln!(
                out,
                "closure order: {} (strict), {} (up to relabeling)",
                order.k_strict, order.k_relabel
            )?;
            writeln!(out, "reconstructed {k} period(s)")?;
            write_diagnostics(out, &tr.diagnostics)?;
            writeln!(out, "wrote {} and {}", csv.display(), json.display())?;
        }
        Format::Json => print_json(
            out,
            &serde_json::json!({
                "target": target,
                "point": point,
                "closure_order": order,
                "periods": k,
                "diagnostics": tr.diagnostics,
                "csv": csv,
                "json": json,
            }),
        )?,
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct VerifyReport {
    point: SeedPoint,
    residual: [f64; 2],
    residual_tol: f64,
    periodicity_defect: f64,
    energy_drift: f64,
    lz_drift: f64,
    conservation_tol: f64,
    pass: bool,
}

fn cmd_verify(
    shooter: &Shooter,
    p: &SeedPoint,
    residual_tol: f64,
    conservation_tol: f64,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let raw = shooter.residual(p)?;
    let point = shooter.annotate(p)?;
    let periodicity_defect = shooter.periodicity_defect(p)?;
    let tr = reconstruct(shooter, p, 1, 200)?;
    let res_ok = raw.amax() <= residual_tol;
    let cons_ok = tr.diagnostics.energy_drift <= conservation_tol
        && tr.diagnostics.lz_drift <= conservation_tol;
    let report = VerifyReport {
        point,
        residual: [raw.x, raw.y],
        residual_tol,
        periodicity_defect,
        energy_drift: tr.diagnostics.energy_drift,
        lz_drift: tr.diagnostics.lz_drift,
        conservation_tol,
        pass: res_ok && cons_ok,
    };
    let label = |ok: bool| if ok { "PASS" } else { "FAIL" };
    match format {
        Format::Human => {
            write_point(out, &point)?;
            let names = match p.kind {
                SymmetryKind::Odd => ("F", "R_t"),
                SymmetryKind::OddEven => ("F_t", "R_t"),
            };
            writeln!(
                out,
                "{} = {:.3e}, {} = {:.3e}  [{}] tol {:.1e}",
                names.0,
                raw.x,
                names.1,
                raw.y,
                label(res_ok),
                residual_tol
            )?;
            writeln!(out, "periodicity defect     {:.3e}", periodicity_defect)?;
            writeln!(
                out,
                "energy drift {:.3e}, Lz drift {:.3e}  [{}] tol {:.1e}",
                tr.diagnostics.energy_drift,
                tr.diagnostics.lz_drift,
                label(cons_ok),
                conservation_tol
            )?;
            writeln!(out, "{}", label(report.pass))?;
        }
        Format::Json => print_json(out, &report)?,
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "residual {:.3e} (tol {residual_tol:e}), energy drift {:.3e}, Lz drift {:.3e} (tol {conservation_tol:e})",
            raw.amax(),
            tr.diagnostics.energy_drift,
            tr.diagnostics.lz_drift
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str], env: Option<PathBuf>) -> (Result<(), CliError>, String) {
        let cli =
            Cli::try_parse_from(std::iter::once("ring-orbit").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        let r = run(&cli, env, &mut buf);
        (r, String::from_utf8(buf).unwrap())
    }

    const SMALL: [&str; 8] = ["--n", "3", "--m", "3", "--M", "7", "--r0", "11"];

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(28.653581209259357), "28.6536");
        assert_eq!(sig6(0.8909673398548792), "0.890967");
        assert_eq!(sig6(5.035864320581796), "5.03586");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.5e-12), "1.50000e-12");
        assert_eq!(sig6(-0.05), "-0.0500000");
    }

    #[test]
    fn bifurcate_human() {
        let mut args = vec!["bifurcate", "--kind", "odd"];
        args.extend(SMALL);
        let (r, out) = run_args(&args, None);
        r.unwrap();
        assert!(out.contains("28.6536"), "{out}");
        assert!(out.contains("0.890967"));
    }

    #[test]
    fn bifurcate_odd_even_half() {
        let mut args = vec!["bifurcate", "--kind", "odd-even"];
        args.extend(SMALL);
        let (r, out) = run_args(&args, None);
        r.unwrap();
        assert!(out.contains("14.3268"), "{out}");
    }

    #[test]
    fn missing_param_is_config_error() {
        let (r, _) = run_args(&["bifurcate", "--n", "3"], None);
        assert_eq!(r.unwrap_err().exit_code(), 2);
        let (r, _) = run_args(
            &[
                "bifurcate",
                "--n",
                "3",
                "--m",
                "-1",
                "--M",
                "1",
                "--r0",
                "1",
            ],
            None,
        );
        assert_eq!(r.unwrap_err().exit_code(), 2);
    }

    #[test]
    fn config_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "output_dir = \"from-file\"\n[params]\nn = 3\nm = 92.0\nM = 242.0\nr0 = 11.0\n",
        )
        .unwrap();
        let cfg_arg = path.to_str().unwrap();
        let cli = Cli::try_parse_from(["ring-orbit", "--config", cfg_arg, "bifurcate"]).unwrap();
        let cfg = resolve(&cli.global, None).unwrap();
        assert_eq!(cfg.params, SystemParams::new(3, 92.0, 242.0, 11.0).unwrap());
        assert_eq!(cfg.output_dir, PathBuf::from("from-file"));
        let cfg = resolve(&cli.global, Some("from-env".into())).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("from-env"));

        let cli = Cli::try_parse_from([
            "ring-orbit",
            "--config",
            cfg_arg,
            "--M",
            "7",
            "--out-dir",
            "flag",
            "bifurcate",
        ])
        .unwrap();
        let cfg = resolve(&cli.global, Some("from-env".into())).unwrap();
        assert_eq!(cfg.params.axial_mass(), 7.0);
        assert_eq!(cfg.output_dir, PathBuf::from("flag"));
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[params]\nn = 3\nmass = 2.0\n").unwrap();
        let cli = Cli::try_parse_from([
            "ring-orbit",
            "--config",
            path.to_str().unwrap(),
            "bifurcate",
        ])
        .unwrap();
        assert!(matches!(
            resolve(&cli.global, None),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn run_config_round_trip() {
        let cfg = RunConfig {
            params: SystemParams::new(3, 3.0, 7.0, 11.0).unwrap(),
            integrator: IntegratorConfig::default(),
            step: StepConfig {
                ds_max: Some(0.5),
                ..StepConfig::default()
            },
            stop: StopConfig::default(),
            output_dir: PathBuf::from("out"),
            deterministic: true,
        };
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_trace_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut args = vec![
            "trace",
            "--max-points",
            "0",
            "--out-dir",
            out.to_str().unwrap(),
        ];
        args.extend(SMALL);
        let (r, _) = run_args(&args, None);
        assert_eq!(r.unwrap_err().exit_code(), 2);
        assert!(!out.exists());
    }

    #[test]
    fn lambda_needs_only_n() {
        let (r, out) = run_args(&["lambda", "--n", "3"], None);
        r.unwrap();
        assert_eq!(out.trim(), "lambda_3 = 0.577350");
    }

    #[test]
    fn negative_b_accepted() {
        let mut args = vec!["shoot", "--b", "-0.05"];
        args.extend(SMALL);
        let (r, out) = run_args(&args, None);
        r.unwrap();
        assert!(out.contains("-0.0500000"), "{out}");
    }
}
