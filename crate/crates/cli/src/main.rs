//! `riskeig` — run one scenario file and write its report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 invariant violation. Failures print one `riskeig: error ...` line on stderr.

mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use riskeig::{Error, ErrorKind};

use config::ScenarioConfig;

#[derive(Debug, Parser)]
#[command(name = "riskeig", version, about = "Principal-eigenvalue solver and simulator for risk-sensitive control of jump diffusions")]
struct Args {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `sim.master_seed` and `lyapunov_samples.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Parse and validate the scenario, then exit without solving.
    #[arg(long)]
    validate_only: bool,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Invariant => 4,
    }
}

fn fail(e: &Error) -> ExitCode {
    let kind = e.kind();
    let name = match kind {
        ErrorKind::Config => "config",
        ErrorKind::Numerical => "numerical",
        ErrorKind::Invariant => "invariant",
    };
    let code = exit_code(kind);
    // Debug formatting escapes newlines and quotes, keeping the reason on one line
    eprintln!("riskeig: error kind={name} code={code} reason={:?}", e.to_string());
    ExitCode::from(code)
}

fn load(args: &Args) -> Result<(ScenarioConfig, PathBuf), Error> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        if let Some(sim) = cfg.sim.as_mut() {
            sim.master_seed = seed;
        }
        if let Some(s) = cfg.lyapunov_samples.as_mut() {
            s.seed = seed;
        }
    }
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    Ok((cfg, out))
}

fn write_outputs(dir: &Path, out: &run::Output, args: &Args) -> Result<(), Error> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let report = serde_json::to_string_pretty(&out.report).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(dir.join("report.json"), report + "\n").map_err(io)?;
    for (name, body) in &out.files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "timestamp_unix": timestamp,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "config": args.config.display().to_string(),
    });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta).expect("plain json") + "\n").map_err(io)?;
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cfg, dir) = match load(&args) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if args.validate_only {
        println!("riskeig: ok task={} (validated)", cfg.task.name());
        return ExitCode::SUCCESS;
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Internal(format!("thread pool: {e}")));
        }
    }
    let out = match run::run(&cfg) {
        Ok(out) => out,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_outputs(&dir, &out, &args) {
        return fail(&e);
    }
    if let Some(e) = &out.verdict {
        return fail(e);
    }
    println!("riskeig: ok task={} out={}", cfg.task.name(), dir.display());
    ExitCode::SUCCESS
}
