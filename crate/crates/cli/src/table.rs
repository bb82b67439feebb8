//! Table output: a 3-decimal CSV and aligned text in the published column
//! order, plus a full-precision CSV sidecar.

use interimsim::metrics::{Estimate, MetricsReport};

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub interims: bool,
    pub report: MetricsReport,
    /// Replicates dropped because a posterior computation failed.
    pub failures: usize,
}

pub const HEADER: [&str; 20] = [
    "prior",
    "interims",
    "pfdr",
    "type1_a",
    "type1_b",
    "power",
    "bias_e3",
    "mse",
    "coverage_one_sided",
    "coverage_symmetric",
    "sample_size",
    "pfdr_se",
    "type1_a_se",
    "type1_b_se",
    "power_se",
    "bias_e3_se",
    "mse_se",
    "coverage_one_sided_se",
    "coverage_symmetric_se",
    "sample_size_se",
];

pub const FULL_EXTRA: [&str; 7] = ["fdr", "n_reject", "n_h0", "n_h1", "n_replicates", "n_mean_undefined", "failures"];

const NA: &str = "NA";

fn estimates(r: &MetricsReport) -> [Option<Estimate>; 9] {
    let scaled = |e: Estimate| Estimate {
        value: e.value * 1e3,
        se: e.se * 1e3,
    };
    [
        r.pfdr,
        r.type1_a,
        r.type1_b,
        r.power,
        Some(scaled(r.bias)),
        Some(r.mse),
        Some(r.coverage_one_sided),
        Some(r.coverage_symmetric),
        Some(r.mean_sample_size),
    ]
}

fn cells(row: &TableRow, fmt: impl Fn(f64) -> String) -> Vec<String> {
    let est = estimates(&row.report);
    let mut out = vec![row.label.clone(), if row.interims { "yes" } else { "no" }.to_string()];
    out.extend(est.iter().map(|e| e.map_or(NA.to_string(), |e| fmt(e.value))));
    out.extend(est.iter().map(|e| e.map_or(NA.to_string(), |e| fmt(e.se))));
    out
}

fn three(x: f64) -> String {
    format!("{x:.3}")
}

fn full(x: f64) -> String {
    format!("{x:?}")
}

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

pub fn to_csv(rows: &[TableRow]) -> String {
    write_csv(&HEADER, rows.iter().map(|r| cells(r, three)))
}

pub fn to_full_csv(rows: &[TableRow]) -> String {
    let header: Vec<&str> = HEADER.iter().chain(FULL_EXTRA.iter()).copied().collect();
    write_csv(
        &header,
        rows.iter().map(|r| {
            let m = &r.report;
            let mut c = cells(r, full);
            c.push(full(m.fdr));
            c.extend(
                [m.n_reject, m.n_h0, m.n_h1, m.n_replicates, m.n_mean_undefined, r.failures]
                    .iter()
                    .map(usize::to_string),
            );
            c
        }),
    )
}

/// Main columns only, right-aligned except the prior label.
pub fn to_text(rows: &[TableRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| cells(r, three)[..11].to_vec()).collect();
    let header: Vec<String> = HEADER[..11].iter().map(|s| s.to_string()).collect();
    let all: Vec<&Vec<String>> = std::iter::once(&header).chain(body.iter()).collect();
    let widths: Vec<usize> = (0..11).map(|j| all.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in all {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, &w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
