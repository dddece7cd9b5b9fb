//! `edrlab` command line.
//!
//! Exit codes: 0 success, 2 usage or argument error, 3 validation or parse
//! failure, 4 numerical invariant breach. Errors go to stderr prefixed with
//! `error:`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::explorer::{
    run_search, run_sweep, SearchSpec, Spacing, SweepRange, SweepSpec, Variable,
};
use crate::hilbert::StateVector;
use crate::inequalities::InequalityId;
use crate::measurement::{EstimatorChoice, ReadoutFrame};
use crate::models::{
    load_model, validate_model, BuilderSpec, MeasurementModel, ModelSource, StateSpec,
};
use crate::sampler::{empirical_metrics, sample_ensemble};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "edrlab",
    version,
    about = "Error-disturbance relations in indirect measurement models"
)]
struct Cli {
    /// Worker threads (default: EDRLAB_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate metrics and the five relations for one model and state.
    Eval(EvalArgs),
    /// Sweep one builder parameter and tabulate metrics and slacks as CSV.
    Sweep(SweepArgs),
    /// Sample readouts and estimate the resolution empirically.
    Sample(SampleArgs),
    /// Minimize an inequality slack over states and parameters.
    Search(SearchArgs),
    /// Check a model for Hermiticity, unitarity and normalization.
    Validate(ModelArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Built-in family: cnot, identity, von_neumann, random.
    #[arg(long, conflicts_with = "model")]
    builder: Option<String>,
    /// Builder parameter, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", requires = "builder")]
    set: Vec<String>,
    /// Model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct EvalOptions {
    /// zero, one, plus, minus, sy+, sy-, gaussian:C,W or a JSON list of [re,im].
    #[arg(long)]
    state: Option<String>,
    /// optimal, identity, constant:C or file:PATH.
    #[arg(long, default_value = "optimal")]
    estimator: String,
    /// Classification tolerance (default: 1e-9, or 1e-3 on grid models).
    #[arg(long)]
    tol: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    opts: EvalOptions,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    opts: EvalOptions,
    #[arg(long)]
    param: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    steps: usize,
    /// Logarithmic spacing.
    #[arg(long)]
    log: bool,
    /// Relations whose slack is tabulated, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "EQ2,EQ3,EQ4,EQ18,EQ19")]
    record: Vec<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    opts: EvalOptions,
    #[arg(short = 'n', long, default_value_t = 100_000)]
    samples: u64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    opts: EvalOptions,
    /// Relation whose slack is minimized.
    #[arg(long)]
    objective: String,
    /// object, probe or param:NAME:LOWER:UPPER; repeatable.
    #[arg(long, required = true)]
    vary: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 4)]
    starts: usize,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Io { .. } => EXIT_USAGE,
        Error::Parse { .. } | Error::Validation(_) | Error::Precondition(_) => EXIT_VALIDATION,
        Error::InvariantBreach(_) => EXIT_INVARIANT,
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    let msg = e.to_string();
                    let msg = msg.trim_start_matches("error: ");
                    eprintln!("error: {}", msg.trim_end());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                Error::Validation(items) => {
                    for item in items {
                        eprintln!("error: {item}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            exit_code(&e)
        }
    }
}

fn threads(cli: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = cli {
        return Ok(Some(n));
    }
    match std::env::var("EDRLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            Error::invalid(format!(
                "EDRLAB_THREADS must be a positive integer, got '{v}'"
            ))
        }),
        _ => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        return pool.install(|| execute(cli.command));
    }
    execute(cli.command)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Sample(a) => sample(a),
        Command::Search(a) => search(a),
        Command::Validate(a) => validate(a),
    }
}

fn parse_setting(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("--set expects KEY=VALUE, got '{s}'")))?;
    let value =
        serde_json::from_str::<Value>(v.trim()).unwrap_or_else(|_| Value::String(v.trim().into()));
    Ok((k.trim().to_string(), value))
}

fn builder_spec(a: &ModelArgs) -> Result<Option<BuilderSpec>> {
    let Some(name) = &a.builder else {
        return Ok(None);
    };
    let mut spec = BuilderSpec::new(name.as_str());
    for s in &a.set {
        let (k, v) = parse_setting(s)?;
        spec = spec.with(&k, v);
    }
    Ok(Some(spec))
}

fn load(a: &ModelArgs) -> Result<MeasurementModel> {
    if let Some(spec) = builder_spec(a)? {
        return spec.build();
    }
    match &a.model {
        Some(path) => load_model(path),
        None => Err(Error::invalid(
            "a model is required: --builder NAME or --model PATH",
        )),
    }
}

fn state_spec(opts: &EvalOptions, m: &MeasurementModel) -> Result<StateSpec> {
    match &opts.state {
        Some(s) => StateSpec::parse(s),
        None => Ok(StateSpec::default_for(m)),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn eval(a: EvalArgs) -> Result<i32> {
    let m = load(&a.model)?;
    let spec = state_spec(&a.opts, &m)?;
    let phi = spec.resolve(&m)?;
    let choice = EstimatorChoice::parse(&a.opts.estimator)?;
    let frame = ReadoutFrame::new(&m)?;
    let f = choice.resolve(&frame, &phi)?;
    let tol = a.opts.tol.unwrap_or_else(|| m.default_tolerance());
    let report = frame.report(&phi, &spec.to_string(), &f, tol)?;
    emit(a.opts.out.as_deref(), &pretty(&report))?;
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let base = match builder_spec(&a.model)? {
        Some(spec) => spec,
        None => match &a.model.model {
            Some(path) => match load_model(path)?.source {
                ModelSource::Builder(spec) => spec,
                ModelSource::Explicit => {
                    return Err(Error::invalid(
                        "sweeps need a builder model, not explicit matrices",
                    ))
                }
            },
            None => {
                return Err(Error::invalid(
                    "a model is required: --builder NAME or --model PATH",
                ))
            }
        },
    };
    let record = a
        .record
        .iter()
        .map(|s| {
            InequalityId::parse(s).ok_or_else(|| Error::invalid(format!("unknown relation '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let state = a.opts.state.as_deref().map(StateSpec::parse).transpose()?;
    let spec = SweepSpec {
        base,
        param: a.param,
        range: SweepRange {
            from: a.from,
            to: a.to,
            steps: a.steps,
            spacing: if a.log { Spacing::Log } else { Spacing::Linear },
        },
        state,
        estimator: EstimatorChoice::parse(&a.opts.estimator)?,
        record,
        tol: a.opts.tol,
    };
    let table = run_sweep(&spec)?;
    emit(a.opts.out.as_deref(), &table.to_csv())?;
    Ok(EXIT_OK)
}

fn sample(a: SampleArgs) -> Result<i32> {
    let m = load(&a.model)?;
    let spec = state_spec(&a.opts, &m)?;
    let phi = spec.resolve(&m)?;
    let frame = ReadoutFrame::new(&m)?;
    let ens = frame.conditional_states(&phi)?;
    let f = EstimatorChoice::parse(&a.opts.estimator)?.resolve(&frame, &phi)?;
    let run = empirical_metrics(
        sample_ensemble(&ens, a.samples, a.opts.seed)?,
        &ens,
        &f,
        &m.x0,
    )?;
    let exact = frame.resolution(&phi, &f)?;
    let out = json!({
        "model": m.label,
        "state": spec.to_string(),
        "estimator": f.provenance().as_str(),
        "exact_epsilon_xt": exact,
        "run": run,
    });
    emit(a.opts.out.as_deref(), &pretty(&out))?;
    Ok(EXIT_OK)
}

fn parse_variable(s: &str) -> Result<Variable> {
    match s.trim() {
        "object" => Ok(Variable::ObjectState),
        "probe" => Ok(Variable::ProbeState),
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            if parts.len() == 4 && parts[0] == "param" {
                let bound = |p: &str| {
                    p.parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad bound '{p}' in --vary: {e}")))
                };
                Ok(Variable::Parameter {
                    name: parts[1].into(),
                    lower: bound(parts[2])?,
                    upper: bound(parts[3])?,
                })
            } else {
                Err(Error::invalid(format!(
                    "--vary expects object, probe or param:NAME:LOWER:UPPER, got '{s}'"
                )))
            }
        }
    }
}

fn amplitudes(s: &Option<StateVector>) -> Value {
    match s {
        Some(s) => json!(s
            .amplitudes()
            .iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()),
        None => Value::Null,
    }
}

fn search(a: SearchArgs) -> Result<i32> {
    let m = load(&a.model)?;
    let objective = InequalityId::parse(&a.objective)
        .ok_or_else(|| Error::invalid(format!("unknown relation '{}'", a.objective)))?;
    let spec = SearchSpec {
        model: m,
        objective,
        variables: a
            .vary
            .iter()
            .map(|s| parse_variable(s))
            .collect::<Result<_>>()?,
        state: a.opts.state.as_deref().map(StateSpec::parse).transpose()?,
        estimator: EstimatorChoice::parse(&a.opts.estimator)?,
        budget: a.budget,
        starts: a.starts,
        seed: a.opts.seed,
        tol: a.opts.tol,
    };
    let r = run_search(&spec)?;
    let params: serde_json::Map<String, Value> = r
        .best_parameters
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    let out = json!({
        "objective": objective,
        "best_slack": r.best_slack,
        "best_point": r.best_point,
        "best_object_state": amplitudes(&r.best_object_state),
        "best_probe_state": amplitudes(&r.best_probe_state),
        "best_parameters": params,
        "evaluations": r.trace.len(),
        "trace": r.trace.iter().map(|&v| if v.is_finite() { json!(v) } else { Value::Null }).collect::<Vec<_>>(),
    });
    emit(a.opts.out.as_deref(), &pretty(&out))?;
    Ok(EXIT_OK)
}

fn validate(a: ModelArgs) -> Result<i32> {
    let m = load(&a)?;
    let problems = validate_model(&m);
    if problems.is_empty() {
        println!("ok: {} (d_obj={}, d_probe={})", m.label, m.d_obj, m.d_probe);
        Ok(EXIT_OK)
    } else {
        Err(Error::Validation(problems))
    }
}
