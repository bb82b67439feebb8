//! Executes every (variant, interim flag) cell of a scenario file.

use interimsim::engine::{run_scenario, run_scenario_paired, RunOptions, Scenario, TrialRecord};
use interimsim::metrics::compute_metrics;
use interimsim::Error;

use crate::scenario_file::ScenarioFile;
use crate::table::TableRow;

#[derive(Debug)]
pub struct CellFailure {
    pub label: String,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct FileRun {
    pub rows: Vec<TableRow>,
    pub failures: Vec<CellFailure>,
}

/// Progress callback: (variant label, completed, total).
pub type Progress<'a> = &'a (dyn Fn(&str, u64, u64) + Sync);

fn row(label: &str, interims: bool, records: &[TrialRecord], scenario: &Scenario, failures: usize) -> Result<TableRow, Error> {
    Ok(TableRow {
        label: label.to_string(),
        interims,
        report: compute_metrics(records, scenario)?,
        failures,
    })
}

/// Runs each variant once with paired fixed/adaptive records when both rows
/// are requested. A failing variant is reported and the others still run.
pub fn run_file(file: &ScenarioFile, threads: Option<usize>, progress: Option<Progress>) -> FileRun {
    let mut out = FileRun::default();
    for (i, variant) in file.variants.iter().enumerate() {
        let label = variant.label.as_str();
        let cb = |done: u64, total: u64| {
            if let Some(p) = progress {
                p(label, done, total)
            }
        };
        let options = RunOptions {
            threads,
            progress: Some(&cb),
        };
        let scenario = file.scenario(i, true);
        let cell = || -> Result<Vec<TableRow>, Error> {
            let mut rows = Vec::new();
            if file.with_interims && file.without_interims {
                let run = run_scenario_paired(&scenario, options)?;
                let n_fail = run.failures.len();
                rows.push(row(label, false, &run.fixed, &scenario.without_interims(), n_fail)?);
                rows.push(row(label, true, &run.adaptive, &scenario, n_fail)?);
            } else {
                let s = if file.with_interims { scenario.clone() } else { scenario.without_interims() };
                let records = run_scenario(&s, options)?;
                let n_fail = s.n_replicates as usize - records.len();
                rows.push(row(label, file.with_interims, &records, &s, n_fail)?);
            }
            Ok(rows)
        };
        match cell() {
            Ok(rows) => out.rows.extend(rows),
            Err(error) => out.failures.push(CellFailure {
                label: label.to_string(),
                error,
            }),
        }
    }
    out
}
