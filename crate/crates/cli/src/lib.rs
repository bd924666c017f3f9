//! Experiment driver: JSON configs in, reports, CSV tables and CGOF fields out.
//!
//! Exit codes: 0 when every check passes, 2 when a threshold check fails,
//! 1 on any error (invalid config, failed precondition, I/O).

pub mod config;
pub mod experiments;
pub mod registry;
pub mod report;

use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::Config;
pub use experiments::RunError;
pub use report::Report;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "cgolab", version, about = "Rate studies and recovery experiments for CGO solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config without running it and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List registered experiments, or describe one.
    ListExperiments { name: Option<String> },
}

/// Runs a validated config and writes its outputs.
pub fn run(cfg: &Config) -> Result<Report, RunError> {
    let mut b = report::Builder::new(cfg)?;
    experiments::dispatch(cfg, &mut b)?;
    Ok(b.finish()?)
}

fn load(path: &Path) -> Result<Config, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
    config::parse(&text)
}

fn print_errors(err: &mut dyn Write, errs: &[String]) {
    for e in errs {
        let _ = writeln!(err, "error: {e}");
    }
    let _ = writeln!(err, "{} problem(s) found; nothing was run", errs.len());
}

fn describe(out: &mut dyn Write, s: &registry::Spec) {
    let _ = writeln!(out, "{}", registry::line(s));
    let _ = writeln!(out, "  grid: {:?}", s.grid);
    if let Some(g) = s.gamma {
        let _ = writeln!(out, "  gamma: {g}");
    }
    if s.max_h > 0 {
        let _ = writeln!(out, "  h_schedule: {:?}", s.h_schedule);
    }
    if let Some(l) = s.lattice {
        let _ = writeln!(out, "  xi_lattice: {l:?}");
    }
    if !s.coefficients.is_empty() {
        let _ = writeln!(out, "  coefficients: {}", s.coefficients.join(", "));
    }
    for (n, v) in s.thresholds {
        let _ = writeln!(out, "  threshold {n} = {v}");
    }
    for (n, _, d) in s.options {
        let _ = writeln!(out, "  option {n} = {d}");
    }
}

fn set_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CGO_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(format!("CGO_THREADS must be a positive integer, got \"{v}\""))?;
    // a pool built earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// The command line entry point, returning the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_PASS;
        }
    };
    match cli.command {
        Command::ListExperiments { name: None } => {
            for s in &registry::REGISTRY {
                let _ = writeln!(out, "{}", registry::line(s));
            }
            EXIT_PASS
        }
        Command::ListExperiments { name: Some(name) } => match registry::lookup(&name) {
            Some(s) => {
                describe(out, s);
                EXIT_PASS
            }
            None => {
                let _ = write!(err, "error: unknown experiment \"{name}\"");
                match registry::suggest(&name, registry::REGISTRY.iter().map(|s| s.name)) {
                    Some(s) => {
                        let _ = writeln!(err, "; did you mean \"{s}\"?");
                    }
                    None => {
                        let _ = writeln!(err);
                    }
                }
                EXIT_ERROR
            }
        },
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
                EXIT_PASS
            }
            Err(errs) => {
                print_errors(err, &errs);
                EXIT_ERROR
            }
        },
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(errs) => {
                    print_errors(err, &errs);
                    return EXIT_ERROR;
                }
            };
            if let Err(e) = set_threads() {
                let _ = writeln!(err, "error: {e}");
                return EXIT_ERROR;
            }
            match run(&cfg) {
                Ok(r) => {
                    for c in &r.checks {
                        let mark = if c.passed { "PASS" } else { "FAIL" };
                        let _ = writeln!(out, "{mark} {:<28} {:>12.5e}  ({})", c.name, c.value, c.rule);
                    }
                    let _ = writeln!(
                        out,
                        "{} [{}] {} -> {}  hash {}",
                        r.experiment,
                        r.tag,
                        if r.passed { "passed" } else { "failed" },
                        cfg.output_dir.join("report.json").display(),
                        r.hash
                    );
                    if r.passed {
                        EXIT_PASS
                    } else {
                        EXIT_FAIL
                    }
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_ERROR
                }
            }
        }
    }
}
