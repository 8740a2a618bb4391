//! Command-line interface: one entry point wiring every subsystem, JSON/CSV
//! report emission with embedded run manifests, and the exit-code contract
//! (0 pass, 1 criterion failure, 2 solver infeasibility, 3 input/IO error).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use crate::dict::Spin;
use crate::io::{self, ReportEnvelope, RunManifest, Space, StoredModel};
use crate::model::{self, ModelSpec, PairPolicy, PiSpec};
use crate::prob::ProbSpace;
use crate::quantum::{
    build_surface_space, singlet_expectation, singlet_joint, Direction, SettingDistribution,
};
use crate::scalar::{Mode, Scalar};
use crate::sim::{self, SimConfig};
use crate::{bell, rpcc, Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CRITERION_FAIL: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;

#[derive(Parser)]
#[command(
    name = "cclab",
    version,
    about = "Construct and audit finite-probability common-cause models of two-wing \
             spin-correlation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singlet-state joint outcome table for three measurement directions.
    Quantum(QuantumArgs),
    /// Screening-off criterion tools.
    #[command(subcommand)]
    Rpcc(RpccCommand),
    /// Bell-type inequality evaluators.
    #[command(subcommand)]
    Bell(BellCommand),
    /// Common-cause model synthesis and audit.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Monte-Carlo sampling.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct QuantumArgs {
    /// Three directions in degrees, e.g. 0,120,240
    #[arg(long, default_value = "0,120,240")]
    angles: String,
    /// Setting distribution: "uniform" or six comma-separated probabilities
    #[arg(long, default_value = "uniform")]
    pi: String,
    /// Mass outside the preparation factor, in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    null_mass: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the surface space as a model file
    #[arg(long)]
    surface_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RpccCommand {
    /// Check a candidate common cause against a correlated pair.
    Check(RpccCheckArgs),
    /// Extend a space with a common cause for a correlated pair.
    Extend(RpccExtendArgs),
}

#[derive(Args)]
struct RpccCheckArgs {
    #[arg(long)]
    space: PathBuf,
    /// Event name of the first relatum
    #[arg(long)]
    a: String,
    /// Event name of the second relatum
    #[arg(long)]
    b: String,
    /// Event name of the candidate cause
    #[arg(long)]
    c: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RpccExtendArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    /// Output path of the extended space
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BellCommand {
    /// CHSH score at four angles a,a',b,b' (standard combination).
    Chsh(BellChshArgs),
    /// Three-setting inequality at angles t1,t2,t3.
    Wigner(BellWignerArgs),
}

#[derive(Args)]
struct BellChshArgs {
    /// Four directions in degrees, e.g. 0,90,45,135
    #[arg(long)]
    angles: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BellWignerArgs {
    /// Three directions in degrees, e.g. 0,60,120
    #[arg(long)]
    angles: String,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Synthesize the common-cause model.
    Build(ModelBuildArgs),
    /// Audit a model file.
    Audit(ModelAuditArgs),
}

#[derive(Args)]
struct ModelBuildArgs {
    #[arg(long, default_value = "0,120,240")]
    angles: String,
    #[arg(long, default_value = "uniform")]
    pi: String,
    #[arg(long, default_value_t = 0.02)]
    null_mass: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    /// Which outcome pairs receive causes
    #[arg(long, value_enum, default_value = "positive")]
    pairs: PairsArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairsArg {
    /// Positively correlated pairs only (the feasible default).
    Positive,
    /// Attempt all correlated pairs; provably impossible ones abort.
    All,
}

#[derive(Args)]
struct ModelAuditArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Sample a model file and report empirical statistics.
    Run(SimRunArgs),
}

#[derive(Args)]
struct SimRunArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 65_536)]
    chunk: u64,
    /// Optional three angles for an empirical inequality evaluation
    #[arg(long)]
    wigner: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; route it to stderr and map
            // every parse problem onto the input-error exit code, except the
            // help/version pseudo-errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_PASS
            } else {
                EXIT_INPUT_ERROR
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Infeasible { .. } => EXIT_INFEASIBLE,
                _ => EXIT_INPUT_ERROR,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Quantum(args) => cmd_quantum(args),
        Command::Rpcc(RpccCommand::Check(args)) => cmd_rpcc_check(args),
        Command::Rpcc(RpccCommand::Extend(args)) => cmd_rpcc_extend(args),
        Command::Bell(BellCommand::Chsh(args)) => cmd_bell_chsh(args),
        Command::Bell(BellCommand::Wigner(args)) => cmd_bell_wigner(args),
        Command::Model(ModelCommand::Build(args)) => cmd_model_build(args),
        Command::Model(ModelCommand::Audit(args)) => cmd_model_audit(args),
        Command::Sim(SimCommand::Run(args)) => cmd_sim_run(args),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

fn parse_angle_list(text: &str, expected: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad angle {p:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != expected {
        return Err(Error::InvalidInput(format!(
            "expected {expected} comma-separated angles, got {}",
            parts.len()
        )));
    }
    Ok(parts)
}

fn parse_pi(text: &str) -> Result<PiSpec> {
    if text.trim() == "uniform" {
        return Ok(PiSpec::Uniform);
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad probability {p:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    match parts.len() {
        3 => Ok(PiSpec::Explicit {
            left: [parts[0], parts[1], parts[2]],
            right: [parts[0], parts[1], parts[2]],
        }),
        6 => Ok(PiSpec::Explicit {
            left: [parts[0], parts[1], parts[2]],
            right: [parts[3], parts[4], parts[5]],
        }),
        n => Err(Error::InvalidInput(format!(
            "--pi takes \"uniform\", 3 or 6 probabilities, got {n}"
        ))),
    }
}

fn default_mode() -> Mode {
    match std::env::var("CCLAB_MODE").as_deref() {
        Ok("rational") => Mode::Rational,
        _ => Mode::Float,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => io::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn params(entries: &[(&str, String)]) -> BTreeMap<String, String> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

// ---------------------------------------------------------------------------
// quantum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct QuantumRow {
    i: usize,
    j: usize,
    theta_left: f64,
    theta_right: f64,
    p_pp: f64,
    p_pm: f64,
    p_mp: f64,
    p_mm: f64,
    expectation: f64,
    marginal_left_up: f64,
    marginal_right_up: f64,
}

#[derive(Serialize)]
struct QuantumReport {
    angles_deg: [f64; 3],
    rows: Vec<QuantumRow>,
}

fn cmd_quantum(args: QuantumArgs) -> Result<i32> {
    let angles = parse_angle_list(&args.angles, 3)?;
    let dirs = [
        Direction::new(angles[0]),
        Direction::new(angles[1]),
        Direction::new(angles[2]),
    ];
    let pi = parse_pi(&args.pi)?;
    let mut rows = Vec::with_capacity(9);
    for i in 1..=3 {
        for j in 1..=3 {
            let (l, r) = (dirs[i - 1], dirs[j - 1]);
            let q = |a: Spin, b: Spin| singlet_joint(l, r, a, b);
            rows.push(QuantumRow {
                i,
                j,
                theta_left: l.degrees(),
                theta_right: r.degrees(),
                p_pp: q(Spin::Up, Spin::Up),
                p_pm: q(Spin::Up, Spin::Down),
                p_mp: q(Spin::Down, Spin::Up),
                p_mm: q(Spin::Down, Spin::Down),
                expectation: singlet_expectation(l, r),
                marginal_left_up: q(Spin::Up, Spin::Up) + q(Spin::Up, Spin::Down),
                marginal_right_up: q(Spin::Up, Spin::Up) + q(Spin::Down, Spin::Up),
            });
        }
    }
    let report = QuantumReport {
        angles_deg: [angles[0], angles[1], angles[2]],
        rows,
    };

    if let Some(surface_path) = &args.surface_out {
        let text = match default_mode() {
            Mode::Float => {
                let dist: SettingDistribution<f64> = match pi {
                    PiSpec::Uniform => SettingDistribution::uniform(),
                    PiSpec::Explicit { left, right } => SettingDistribution::new(left, right)?,
                };
                let surf = build_surface_space(dirs, &dist, args.null_mass)?;
                surface_model_json(surf.space, surf.dict, &angles, args.null_mass, pi)?
            }
            Mode::Rational => {
                let dist: SettingDistribution<BigRational> = pi_rational(pi)?;
                let surf =
                    build_surface_space(dirs, &dist, BigRational::lift_f64(args.null_mass)?)?;
                surface_model_json(surf.space, surf.dict, &angles, args.null_mass, pi)?
            }
        };
        io::write_text(surface_path, &text)?;
    }

    let manifest = RunManifest::new(
        "quantum",
        params(&[
            ("angles", args.angles.clone()),
            ("pi", args.pi.clone()),
            ("null_mass", args.null_mass.to_string()),
        ]),
    );
    match args.format {
        OutputFormat::Json => {
            let text = io::to_canonical_json(&ReportEnvelope { manifest, report })?;
            emit(&text, args.out.as_deref())?;
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .flat_map(|row| {
                    [
                        (Spin::Up, Spin::Up, row.p_pp),
                        (Spin::Up, Spin::Down, row.p_pm),
                        (Spin::Down, Spin::Up, row.p_mp),
                        (Spin::Down, Spin::Down, row.p_mm),
                    ]
                    .map(|(a, b, p)| {
                        vec![
                            row.i.to_string(),
                            row.j.to_string(),
                            row.theta_left.to_string(),
                            row.theta_right.to_string(),
                            a.to_string(),
                            b.to_string(),
                            format!("{p:.16e}"),
                        ]
                    })
                })
                .collect();
            let text = io::csv(
                &["i", "j", "theta_left", "theta_right", "a", "b", "probability"],
                &rows,
            );
            emit(&text, args.out.as_deref())?;
        }
    }
    Ok(EXIT_PASS)
}

fn pi_rational(pi: PiSpec) -> Result<SettingDistribution<BigRational>> {
    match pi {
        PiSpec::Uniform => Ok(SettingDistribution::uniform()),
        PiSpec::Explicit { left, right } => {
            let lift = |side: [f64; 3]| -> Result<[BigRational; 3]> {
                Ok([
                    BigRational::lift_f64(side[0])?,
                    BigRational::lift_f64(side[1])?,
                    BigRational::lift_f64(side[2])?,
                ])
            };
            SettingDistribution::new(lift(left)?, lift(right)?)
        }
    }
}

/// Wrap a surface space as a model file so the sampler can consume it.
fn surface_model_json<N: Scalar>(
    space: ProbSpace<N>,
    dict: crate::dict::EventDict,
    angles: &[f64],
    null_mass: f64,
    pi: PiSpec,
) -> Result<String> {
    let (pi_left, pi_right) = match pi {
        PiSpec::Uniform => ([1.0 / 3.0; 3], [1.0 / 3.0; 3]),
        PiSpec::Explicit { left, right } => (left, right),
    };
    let meta = crate::model::ModelMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        angles_deg: [angles[0], angles[1], angles[2]],
        pi_left,
        pi_right,
        null_mass,
        seed: 0,
        tol: 0.0,
        margin: 0.0,
        pair_policy: PairPolicy::PositiveOnly,
        require_nondeterministic: false,
        pairs: Vec::new(),
        solver: Vec::new(),
    };
    io::model_to_json(&crate::model::EprModel { space, dict, meta })
}

// ---------------------------------------------------------------------------
// rpcc
// ---------------------------------------------------------------------------

fn cmd_rpcc_check(args: RpccCheckArgs) -> Result<i32> {
    let text = io::read_text(&args.space)?;
    let (space, events) = io::space_from_json(&text)?;
    let a = events.get(&args.a)?.clone();
    let b = events.get(&args.b)?.clone();
    let c = events.get(&args.c)?.clone();
    let report = match &space {
        Space::Rational(s) => rpcc::check_common_cause(s, &a, &b, &c, args.tol, args.margin)?,
        Space::Float(s) => rpcc::check_common_cause(s, &a, &b, &c, args.tol, args.margin)?,
    };
    let pass = report.pass;
    let manifest = RunManifest::new(
        "rpcc check",
        params(&[
            ("space", args.space.display().to_string()),
            ("a", args.a.clone()),
            ("b", args.b.clone()),
            ("c", args.c.clone()),
            ("tol", args.tol.to_string()),
            ("margin", args.margin.to_string()),
        ]),
    )
    .with_input(&args.space, &text);
    let out = io::to_canonical_json(&ReportEnvelope { manifest, report })?;
    emit(&out, args.out.as_deref())?;
    Ok(if pass { EXIT_PASS } else { EXIT_CRITERION_FAIL })
}

#[derive(Serialize)]
struct ExtendSummary {
    common_cause: Vec<String>,
    fractions: [f64; 4],
    criterion: rpcc::CriterionReport,
    solver: crate::solver::Diagnostics,
    output: String,
}

fn cmd_rpcc_extend(args: RpccExtendArgs) -> Result<i32> {
    let text = io::read_text(&args.space)?;
    let (space, events) = io::space_from_json(&text)?;
    let a = events.get(&args.a)?.clone();
    let b = events.get(&args.b)?.clone();

    // extend in the space's own arithmetic; carry the original events (and
    // the found cause) into the output file
    let (summary, file_text) = match &space {
        Space::Rational(s) => {
            let result =
                rpcc::complete_with_common_cause(s, &a, &b, args.tol, args.margin, args.seed)?;
            let mut out_events = crate::dict::EventDict::new();
            for (key, event) in events.map() {
                out_events.insert(key.clone(), result.embedding.map_event(event)?);
            }
            out_events.insert("C", result.common_cause.clone());
            let file = io::space_to_json(&Space::Rational(result.extended.clone()), &out_events)?;
            (
                ExtendSummary {
                    common_cause: result.common_cause.names(),
                    fractions: result.fractions,
                    criterion: result.report.clone(),
                    solver: result.diagnostics.clone(),
                    output: args.out.display().to_string(),
                },
                file,
            )
        }
        Space::Float(s) => {
            let result =
                rpcc::complete_with_common_cause(s, &a, &b, args.tol, args.margin, args.seed)?;
            let mut out_events = crate::dict::EventDict::new();
            for (key, event) in events.map() {
                out_events.insert(key.clone(), result.embedding.map_event(event)?);
            }
            out_events.insert("C", result.common_cause.clone());
            let file = io::space_to_json(&Space::Float(result.extended.clone()), &out_events)?;
            (
                ExtendSummary {
                    common_cause: result.common_cause.names(),
                    fractions: result.fractions,
                    criterion: result.report.clone(),
                    solver: result.diagnostics.clone(),
                    output: args.out.display().to_string(),
                },
                file,
            )
        }
    };
    io::write_text(&args.out, &file_text)?;
    let manifest = RunManifest::new(
        "rpcc extend",
        params(&[
            ("space", args.space.display().to_string()),
            ("a", args.a.clone()),
            ("b", args.b.clone()),
            ("seed", args.seed.to_string()),
            ("tol", args.tol.to_string()),
            ("margin", args.margin.to_string()),
        ]),
    )
    .with_input(&args.space, &text);
    let out = io::to_canonical_json(&ReportEnvelope {
        manifest,
        report: summary,
    })?;
    print!("{out}");
    Ok(EXIT_PASS)
}

// ---------------------------------------------------------------------------
// bell
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ChshReport {
    lhs: f64,
    rhs: f64,
    value: f64,
    violated: bool,
}

fn cmd_bell_chsh(args: BellChshArgs) -> Result<i32> {
    let angles = parse_angle_list(&args.angles, 4)?;
    let value = bell::singlet_chsh(angles[0], angles[1], angles[2], angles[3]);
    let report = ChshReport {
        lhs: value.abs(),
        rhs: 2.0,
        value,
        violated: value.abs() > 2.0 + 1e-12,
    };
    let manifest = RunManifest::new("bell chsh", params(&[("angles", args.angles.clone())]));
    let out = io::to_canonical_json(&ReportEnvelope { manifest, report })?;
    emit(&out, args.out.as_deref())?;
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct WignerCliReport {
    lhs: f64,
    rhs: f64,
    value: f64,
    violated: bool,
}

fn cmd_bell_wigner(args: BellWignerArgs) -> Result<i32> {
    let angles = parse_angle_list(&args.angles, 3)?;
    let report = bell::wigner(
        |l, r| {
            Ok(singlet_joint(
                Direction::new(l),
                Direction::new(r),
                Spin::Up,
                Spin::Up,
            ))
        },
        angles[0],
        angles[1],
        angles[2],
        args.tol,
    )?;
    let manifest = RunManifest::new("bell wigner", params(&[("angles", args.angles.clone())]));
    let out = io::to_canonical_json(&ReportEnvelope {
        manifest,
        report: WignerCliReport {
            lhs: report.lhs,
            rhs: report.rhs,
            value: report.margin,
            violated: report.violated,
        },
    })?;
    emit(&out, args.out.as_deref())?;
    Ok(EXIT_PASS)
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

fn cmd_model_build(args: ModelBuildArgs) -> Result<i32> {
    let angles = parse_angle_list(&args.angles, 3)?;
    let spec = ModelSpec {
        angles_deg: [angles[0], angles[1], angles[2]],
        pi: parse_pi(&args.pi)?,
        null_mass: args.null_mass,
        seed: args.seed,
        tol: args.tol,
        margin: args.margin,
        pair_policy: match args.pairs {
            PairsArg::Positive => PairPolicy::PositiveOnly,
            PairsArg::All => PairPolicy::AllPairs,
        },
        require_nondeterministic: true,
    };
    let text = match default_mode() {
        Mode::Float => io::model_to_json(&model::build_model(&spec)?)?,
        Mode::Rational => io::model_to_json(&model::build_model_in::<BigRational>(&spec)?)?,
    };
    io::write_text(&args.out, &text)?;
    eprintln!("model written to {}", args.out.display());
    Ok(EXIT_PASS)
}

fn cmd_model_audit(args: ModelAuditArgs) -> Result<i32> {
    let text = io::read_text(&args.model)?;
    let stored = io::model_from_json(&text)?;
    let report = match &stored {
        StoredModel::Rational(m) => model::audit(m, args.tol, args.margin)?,
        StoredModel::Float(m) => model::audit(m, args.tol, args.margin)?,
    };
    let pass = report.summary_pass;
    let failing = report.failing_clause.clone();
    let manifest = RunManifest::new(
        "model audit",
        params(&[
            ("model", args.model.display().to_string()),
            ("tol", args.tol.to_string()),
            ("margin", args.margin.to_string()),
        ]),
    )
    .with_input(&args.model, &text);
    let out = io::to_canonical_json(&ReportEnvelope { manifest, report })?;
    emit(&out, args.out.as_deref())?;
    if pass {
        Ok(EXIT_PASS)
    } else {
        eprintln!(
            "audit failed: {}",
            failing.unwrap_or_else(|| "unknown clause".to_string())
        );
        Ok(EXIT_CRITERION_FAIL)
    }
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimCliReport {
    #[serde(flatten)]
    sim: sim::SimReport,
    wigner: Option<crate::bell::WignerReport>,
}

fn cmd_sim_run(args: SimRunArgs) -> Result<i32> {
    let text = io::read_text(&args.model)?;
    let stored = io::model_from_json(&text)?;
    let cfg = SimConfig {
        trials: args.trials,
        seed: args.seed,
        chunk: args.chunk,
    };
    let report = match &stored {
        StoredModel::Rational(m) => {
            sim::simulate_model(&m.space, &m.dict, m.meta.angles_deg, &cfg)?
        }
        StoredModel::Float(m) => sim::simulate_model(&m.space, &m.dict, m.meta.angles_deg, &cfg)?,
    };
    let wigner = match &args.wigner {
        Some(spec) => {
            let t = parse_angle_list(spec, 3)?;
            Some(sim::empirical_wigner(&report, t[0], t[1], t[2])?)
        }
        None => None,
    };
    let manifest = RunManifest::new(
        "sim run",
        params(&[
            ("model", args.model.display().to_string()),
            ("trials", args.trials.to_string()),
            ("seed", args.seed.to_string()),
            ("chunk", args.chunk.to_string()),
        ]),
    )
    .with_input(&args.model, &text);
    match args.format {
        OutputFormat::Json => {
            let out = io::to_canonical_json(&ReportEnvelope {
                manifest,
                report: SimCliReport {
                    sim: report,
                    wigner,
                },
            })?;
            emit(&out, args.report.as_deref())?;
        }
        OutputFormat::Csv => {
            let cells = report.conditional.as_ref().ok_or_else(|| {
                Error::InvalidInput("the sampled space has no conditional table".into())
            })?;
            let out = io::conditional_table_csv(cells);
            emit(&out, args.report.as_deref())?;
        }
    }
    Ok(EXIT_PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_and_pi_parsing() {
        assert_eq!(parse_angle_list("0,120,240", 3).unwrap(), vec![0.0, 120.0, 240.0]);
        assert!(parse_angle_list("0,120", 3).is_err());
        assert!(parse_angle_list("a,b,c", 3).is_err());
        assert_eq!(parse_pi("uniform").unwrap(), PiSpec::Uniform);
        match parse_pi("0.5,0.25,0.25").unwrap() {
            PiSpec::Explicit { left, right } => {
                assert_eq!(left, right);
                assert_eq!(left, [0.5, 0.25, 0.25]);
            }
            _ => panic!(),
        }
        assert!(parse_pi("0.5,0.5").is_err());
    }

}
