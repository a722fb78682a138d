//! Command-line front end: `run`, `validate` and `bench`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    bench_fma, bench_stream, emit_roofline, stencil_ai_range, RooflineSample, StreamMode, DEFAULT_STREAM_LANES,
    DEFAULT_STREAM_PASSES, MIN_FMA_ITEMS,
};
use crate::ensemble::run;
use crate::io::{load_config, validate_files, DEFAULT_TOLERANCE};
use crate::parloop::{worker_count_from_env, Executor, ExecutorConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const ROOFLINE_FILE: &str = "roofline.csv";

#[derive(Debug, Parser)]
#[command(name = "fluxport", version, about = "Surface flux transport on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ensemble simulation described by a config file.
    Run(RunArgs),
    /// Compare a history file against a reference.
    Validate(ValidateArgs),
    /// Measure FMA throughput and memory bandwidth and emit a roofline CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Worker threads (overrides the config file and FLUXPORT_WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Bitwise-reproducible reductions; `--deterministic false` turns them off.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub candidate: PathBuf,
    pub reference: PathBuf,
    /// Relative tolerance.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Timed repetitions; the best is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// FMA work items.
    #[arg(long, default_value_t = 4 * MIN_FMA_ITEMS)]
    pub fma_items: usize,
    /// Lanes per pass of the streaming buffer.
    #[arg(long, default_value_t = DEFAULT_STREAM_LANES)]
    pub stream_lanes: usize,
    /// Passes over the lanes.
    #[arg(long, default_value_t = DEFAULT_STREAM_PASSES)]
    pub stream_passes: usize,
    /// Directory for the roofline CSV.
    #[arg(long, default_value = "fluxport_out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub exec: ExecArgs,
}

fn executor(args: &ExecArgs, config_workers: Option<usize>, config_det: bool) -> Result<Executor, String> {
    let workers = worker_count_from_env(args.workers.or(config_workers)).map_err(|e| e.to_string())?;
    Executor::new(ExecutorConfig::new(workers, args.deterministic.unwrap_or(config_det))).map_err(|e| e.to_string())
}

fn create_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, String> {
    let mut config = load_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(dir) = &args.out {
        config.output_dir = dir.clone();
    }
    let exec = executor(&args.exec, config.n_workers, config.deterministic)?;
    let result = run(&config, &exec).map_err(|e| e.to_string())?;
    let _ = writeln!(
        out,
        "{} realizations on {}x{}, {} steps to t = {} h with {} ({} workers)",
        result.state.nr(),
        config.n_theta,
        config.n_phi,
        result.state.step_count,
        result.state.sim_time,
        config.flow_num_method.name(),
        exec.worker_count()
    );
    let _ = writeln!(out, "{}", result.timing.summary());
    let _ = writeln!(out, "history: {}", result.history_path.display());
    let _ = writeln!(out, "timing:  {}", result.timing_path.display());
    let _ = writeln!(out, "maps:    {} written", result.map_paths.len());
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, String> {
    let report = validate_files(&args.candidate, &args.reference, args.tol).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION_FAILED })
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32, String> {
    let exec = executor(&args.exec, None, true)?;
    let fma = bench_fma(&exec, args.fma_items, args.repeats).map_err(|e| e.to_string())?;
    let stream = |mode| {
        bench_stream(&exec, args.stream_lanes, args.stream_passes, mode, args.repeats).map_err(|e| e.to_string())
    };
    let read = stream(StreamMode::Read)?;
    let write = stream(StreamMode::Write)?;
    let sample = RooflineSample::new(fma.gflops, read.gbs, write.gbs, stencil_ai_range()).map_err(|e| e.to_string())?;
    create_dir(&args.out)?;
    let path = args.out.join(ROOFLINE_FILE);
    emit_roofline(&sample, &path).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "workers      {}", exec.worker_count());
    let _ = writeln!(out, "fp64_gflops  {:.6e}  ({} items, 512 flop/item)", sample.fp64_gflops, fma.n_items);
    let _ = writeln!(out, "read_gbs     {:.6e}", sample.read_gbs);
    let _ = writeln!(out, "write_gbs    {:.6e}", sample.write_gbs);
    let _ = writeln!(out, "bw_avg       {:.6e}", sample.bw_avg);
    let _ = writeln!(out, "ridge_ai     {:.6e}", sample.ridge_ai());
    let _ = writeln!(out, "stencil_ai   {:.4} .. {:.4}", sample.ai_range.0, sample.ai_range.1);
    let _ = writeln!(out, "roofline:    {}", path.display());
    Ok(EXIT_OK)
}

/// Execute a parsed command, returning the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    result.unwrap_or_else(|msg| {
        let _ = writeln!(err, "error: {msg}");
        EXIT_USAGE
    })
}

/// Parse `args` (program name first) and execute.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{e}");
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("fluxport").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["run"]).0, EXIT_USAGE);
        assert_eq!(call(&["validate", "a"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_config_names_path() {
        let (code, _, err) = call(&["run", "--config", "/no/such/run.cfg"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("/no/such/run.cfg"));
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn deterministic_flag_forms() {
        let parse = |a: &[&str]| match Cli::try_parse_from(a).unwrap().command {
            Command::Run(r) => r.exec.deterministic,
            _ => unreachable!(),
        };
        assert_eq!(parse(&["f", "run", "--config", "c"]), None);
        assert_eq!(parse(&["f", "run", "--config", "c", "--deterministic"]), Some(true));
        assert_eq!(parse(&["f", "run", "--config", "c", "--deterministic", "false"]), Some(false));
    }
}
