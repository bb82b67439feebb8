use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use interimsim::calibrate::{calibrate_cutoff, CalibrationSpec};
use interimsim::engine::RunOptions;
use interimsim_cli::presets::{load_preset, PRESETS};
use interimsim_cli::properties::{self, Scale, SUITES};
use interimsim_cli::runner::run_file;
use interimsim_cli::scenario_file::ScenarioFile;
use interimsim_cli::table;

#[derive(Parser)]
#[command(name = "interimsim", version, about = "Operating characteristics of Bayesian designs with interim looks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file path or preset name.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every prior variant with and without interims and write the table.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Calibrate the cutoff of the fixed design under the matched prior.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Cutoff grid step (default 0.001, or 0.002 for survival).
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Run an invariant suite and print one JSON line per check.
    Properties {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES.iter().copied().chain(["all"])))]
        suite: String,
        /// Replicates per case (Geweke: recorded states) for every endpoint.
        #[arg(long)]
        replicates: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the checks to <out>/properties-<suite>.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped presets.
    ListPresets,
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load_scenario(arg: &str) -> Result<ScenarioFile> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ScenarioFile::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    } else if let Ok(f) = load_preset(arg) {
        Ok(f)
    } else {
        bail!("'{arg}' is neither a readable file nor a preset name (see list-presets)")
    }
}

fn load_common(c: &Common) -> Result<ScenarioFile> {
    Ok(load_scenario(&c.scenario)?.with_overrides(c.replicates, c.seed)?)
}

/// Writes "label: done/total" to stderr at most once per percent.
fn progress_reporter() -> impl Fn(&str, u64, u64) + Sync {
    let last = AtomicU64::new(u64::MAX);
    move |label: &str, done: u64, total: u64| {
        let pct = done * 100 / total.max(1);
        let key = pct | (total << 8);
        if last.swap(key, Ordering::Relaxed) != key || done == total {
            let mut err = std::io::stderr().lock();
            let _ = write!(err, "\r{label}: {done}/{total}");
            if done == total {
                let _ = writeln!(err);
            }
        }
    }
}

fn cmd_run(common: &Common, out: &Path) -> Result<ExitCode> {
    let file = load_common(common)?;
    let progress = progress_reporter();
    let run = run_file(&file, common.threads, Some(&progress));
    for f in &run.failures {
        eprintln!("variant '{}' failed: {}", f.label, f.error);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv = table::to_csv(&run.rows);
    for (ext, body) in [("csv", csv.clone()), ("txt", table::to_text(&run.rows)), ("full.csv", table::to_full_csv(&run.rows))] {
        let path = out.join(format!("{}.{ext}", file.name));
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&csv);
    Ok(if run.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_calibrate(common: &Common, target: f64, grid_step: Option<f64>) -> Result<ExitCode> {
    let file = load_common(common)?;
    let scenario = file.scenario(file.matched_variant().unwrap_or(0), false);
    let mut spec = CalibrationSpec::new(scenario, target);
    if let Some(step) = grid_step {
        spec.grid_step = step;
    }
    let progress = progress_reporter();
    let cb = |d, t| progress("calibration", d, t);
    let result = calibrate_cutoff(
        &spec,
        RunOptions {
            threads: common.threads,
            progress: Some(&cb),
        },
    )?;
    emit(&(serde_json::to_string(&result)? + "\n"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_properties(suite: &str, replicates: Option<u64>, seed: Option<u64>, threads: Option<usize>, out: Option<&Path>) -> Result<ExitCode> {
    let scale = match replicates {
        Some(0) => bail!("replicates must be at least 1"),
        Some(r) => Scale::uniform(r, seed),
        None => Scale { seed, ..Scale::default() },
    };
    let selected: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut checks = Vec::new();
    if selected.iter().any(|s| *s != "mcmc-geweke") {
        let runs = properties::run_cases(&scale, threads, |case| eprintln!("running {case}")).map_err(anyhow::Error::msg)?;
        for s in selected.iter().filter(|s| **s != "mcmc-geweke") {
            checks.extend(properties::evaluate(s, &runs).expect("suite names are validated by clap"));
        }
    }
    if selected.contains(&"mcmc-geweke") {
        checks.extend(properties::mcmc_geweke(&scale).map_err(anyhow::Error::msg)?);
    }
    let lines: String = checks.iter().map(|c| c.to_json() + "\n").collect();
    emit(&lines);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("properties-{suite}.jsonl")), &lines)?;
    }
    Ok(if checks.iter().all(|c| c.pass) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out),
        Command::Calibrate { common, target, grid_step } => cmd_calibrate(common, *target, *grid_step),
        Command::Properties {
            suite,
            replicates,
            seed,
            threads,
            out,
        } => cmd_properties(suite, *replicates, *seed, *threads, out.as_deref()),
        Command::ListPresets => {
            for (name, _) in PRESETS {
                let title = load_preset(name).map(|f| f.title).unwrap_or_default();
                emit(&format!("{name}\t{title}\n"));
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
