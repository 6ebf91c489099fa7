//! `bpiree` command-line tool: generate instances, solve them, compare solvers.
//!
//! Exit codes: 0 success, 2 bad config or arguments, 3 I/O failure,
//! 4 solver hit `max_iter`, 5 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpiree::algo::Algorithm;
use bpiree::config::{Overrides, RunConfig};
use bpiree::experiments::{self, Scale};
use bpiree::instance::{write_atomic, InstanceData};
use bpiree::trace;
use bpiree::{Error, SolverConfig, Status};

#[derive(Parser)]
#[command(name = "bpiree", version, about = "Block proximal iteratively reweighted solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic problem instance.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Instance JSON path (defaults to output.instance).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one solver and print `algo iterations F_final rel_step residual status`.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Instance JSON; generated from the config when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value = "bpiree")]
        algo: String,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final point as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured solver on one instance and report.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Report JSON path (defaults to output.report).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write all traces as one CSV with a leading `algo` column.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Override a config field, e.g. `--set solver.tol=1e-6` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::NumericalFailure { .. } => 5,
            Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Parse(_) => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            scale: self.scale.map(|s| match s {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Paper => Scale::Paper,
            }),
            set: self.set.clone(),
        }
    }

    fn load(&self) -> Result<RunConfig, Failure> {
        let path = self.config.as_ref().ok_or_else(|| usage("--config is required"))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure { code: 2, message: format!("cannot read config {}: {e}", path.display()) })?;
        Ok(RunConfig::from_json(&text, &self.overrides())?)
    }

    /// Solver settings when the config file is optional (`solve --instance`).
    fn solver_only(&self, algo: Algorithm) -> Result<SolverConfig, Failure> {
        if self.config.is_some() {
            return Ok(self.load()?.config_for(algo)?);
        }
        let mut root = serde_json::json!({ "solver": {} });
        for s in &self.set {
            bpiree::config::apply_set(&mut root, s)?;
        }
        let obj = root.as_object().expect("object root");
        if let Some(key) = obj.keys().find(|k| *k != "solver") {
            return Err(usage(format!("--set {key}.* needs --config")));
        }
        solver_from_json(root["solver"].clone())
    }
}

fn solver_from_json(v: serde_json::Value) -> Result<SolverConfig, Failure> {
    serde_json::from_value(v).map_err(|e| usage(format!("solver settings: {e}")))
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: format!("{}: {e}", path.display()) }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| io_failure(path, e))
}

fn cmd_generate(common: &Common, out: Option<&PathBuf>) -> Result<u8, Failure> {
    let config = common.load()?;
    let spec = config.resolved()?;
    let path = out
        .or(config.output.instance.as_ref())
        .ok_or_else(|| usage("no output path: pass --out or set output.instance"))?;
    let data = experiments::build_data(&spec)?;
    data.write(path, config.output.blob).map_err(|e| io_failure(path, e))?;
    log::info!("wrote {} ({}x{}, {} blocks)", path.display(), data.a.nrows(), data.a.ncols(), data.blocks.len());
    Ok(0)
}

fn cmd_solve(
    common: &Common,
    instance: Option<&PathBuf>,
    algo: &str,
    trace_out: Option<&PathBuf>,
    out: Option<&PathBuf>,
) -> Result<u8, Failure> {
    let algo: Algorithm = algo.parse()?;
    let (data, mut config) = match instance {
        Some(path) => {
            let data = InstanceData::read(path).map_err(|e| match e {
                Error::Io(io) => io_failure(path, io),
                other => other.into(),
            })?;
            (data, common.solver_only(algo)?)
        }
        None => {
            let run = common.load()?;
            (experiments::build_data(&run.resolved()?)?, run.config_for(algo)?)
        }
    };
    let problem = data.to_problem()?;
    config.validate(problem.partition().num_blocks())?;
    config.record_trace |= trace_out.is_some();
    let x0 = vec![0.0; problem.dim()];
    let output = algo.run(&problem, &config, &x0)?;
    println!(
        "{} {} {} {} {} {}",
        algo,
        output.iterations,
        trace::fmt_float(output.objective),
        trace::fmt_float(output.rel_step),
        trace::fmt_float(output.residual),
        output.status.as_str()
    );
    if let Some(msg) = &output.failure {
        eprintln!("error: {msg}");
    }
    if let Some(path) = trace_out {
        let mut buf = Vec::new();
        trace::write_csv(&mut buf, &output.trace).map_err(|e| io_failure(path, e))?;
        write_file(path, &buf)?;
    }
    if let Some(path) = out {
        let doc = serde_json::json!({
            "algo": algo.name(),
            "status": output.status.as_str(),
            "objective": output.objective,
            "x": output.x,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json value serialises");
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    Ok(match output.status {
        Status::Converged => 0,
        Status::MaxIter => 4,
        Status::NumericalFailure => 5,
    })
}

fn cmd_compare(common: &Common, out: Option<&PathBuf>, trace_out: Option<&PathBuf>) -> Result<u8, Failure> {
    let config = common.load()?;
    let spec = config.resolved()?;
    let mut runs = config.solver_runs()?;
    let trace_path = trace_out.or(config.output.trace.as_ref());
    for r in &mut runs {
        r.config.record_trace |= trace_path.is_some();
    }
    let report = experiments::run_comparison(&spec, &runs)?;
    print!("{}", report.to_table());
    if let Some(path) = out.or(config.output.report.as_ref()) {
        let mut text = report.to_json(config.output.include_timing)?;
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    if let Some(path) = trace_path {
        let traces: Vec<(&str, &[trace::TraceRecord])> =
            report.rows.iter().map(|r| (r.algo.as_str(), r.trace.as_slice())).collect();
        let mut buf = Vec::new();
        trace::write_merged_csv(&mut buf, &traces).map_err(|e| io_failure(path, e))?;
        write_file(path, &buf)?;
    }
    for r in report.rows.iter().filter(|r| r.status == "Error") {
        eprintln!("warning: {} failed: {}", r.algo, r.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BPIREE_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { common, out } => cmd_generate(common, out.as_ref()),
        Command::Solve { common, instance, algo, trace, out } => {
            cmd_solve(common, instance.as_ref(), algo, trace.as_ref(), out.as_ref())
        }
        Command::Compare { common, out, trace } => cmd_compare(common, out.as_ref(), trace.as_ref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
