//! CSV reports and run directories.
//!
//! A run directory holds, per seed `S`:
//!
//! - `report_seed{S}.csv`: one row per iteration ([`REPORT_COLUMNS`]);
//! - `selections_seed{S}.csv`: annotated and pseudo-labeled frames;
//! - `diagnostics_seed{S}.csv`: unlabeled-pool error and batch cluster counts;
//!
//! plus `aggregate.csv` (per-iteration mean and sample variance across seeds)
//! and `config.toml`, the fully resolved config.
//!
//! Floats are written in shortest round-trip form, so reports re-parse to the
//! exact values that were written.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mvactive_core::campaign::{CampaignConfig, CampaignReport, IterationRow};

use crate::config::to_toml;

pub const REPORT_COLUMNS: [&str; 9] = [
    "iteration",
    "labeled_count",
    "labeled_fraction",
    "mkpe_mm",
    "mean_epsilon",
    "pseudo_count",
    "pseudo_drift_mean_mm",
    "entropy",
    "hours_elapsed",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

pub fn report_csv(rows: &[IterationRow]) -> String {
    let mut w = writer();
    w.write_record(REPORT_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.labeled_count.to_string(),
            num(r.labeled_fraction),
            num(r.mkpe_mm),
            opt(r.mean_epsilon),
            r.pseudo_count.to_string(),
            opt(r.pseudo_drift_mean_mm),
            num(r.entropy),
            num(r.hours_elapsed),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed report: {0}")]
    Malformed(String),
}

fn malformed(e: impl std::fmt::Display) -> ReportError {
    ReportError::Malformed(e.to_string())
}

fn records(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(malformed)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(malformed(format_args!("unexpected header {found:?}")));
    }
    r.records().collect::<Result<_, _>>().map_err(malformed)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, ReportError> {
    rec[i].parse().map_err(|_| malformed(format_args!("bad value {:?} in column {}", &rec[i], i + 1)))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>, ReportError> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        field(rec, i).map(Some)
    }
}

pub fn parse_report_csv(text: &str) -> Result<Vec<IterationRow>, ReportError> {
    records(text, &REPORT_COLUMNS)?
        .iter()
        .map(|r| {
            Ok(IterationRow {
                iteration: field(r, 0)?,
                labeled_count: field(r, 1)?,
                labeled_fraction: field(r, 2)?,
                mkpe_mm: field(r, 3)?,
                mean_epsilon: opt_field(r, 4)?,
                pseudo_count: field(r, 5)?,
                pseudo_drift_mean_mm: opt_field(r, 6)?,
                entropy: field(r, 7)?,
                hours_elapsed: field(r, 8)?,
            })
        })
        .collect()
}

/// Mean and sample variance; the variance needs two or more values.
pub fn mean_and_variance(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = (values.len() > 1).then(|| values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0));
    (Some(mean), var)
}

const AGGREGATED: [&str; 8] = [
    "labeled_count",
    "labeled_fraction",
    "mkpe_mm",
    "mean_epsilon",
    "pseudo_count",
    "pseudo_drift_mean_mm",
    "entropy",
    "hours_elapsed",
];

fn metric(r: &IterationRow, i: usize) -> Option<f64> {
    match i {
        0 => Some(r.labeled_count as f64),
        1 => Some(r.labeled_fraction),
        2 => Some(r.mkpe_mm),
        3 => r.mean_epsilon,
        4 => Some(r.pseudo_count as f64),
        5 => r.pseudo_drift_mean_mm,
        6 => Some(r.entropy),
        _ => Some(r.hours_elapsed),
    }
}

/// Header of `aggregate.csv`: `iteration`, `seeds`, then `<metric>_mean` and
/// `<metric>_var` for each report metric. Optional metrics are averaged over
/// the seeds that report them.
pub fn aggregate_header() -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "seeds".to_string()];
    for m in AGGREGATED {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_var"));
    }
    h
}

pub fn aggregate_csv(per_seed: &[&[IterationRow]]) -> String {
    let mut w = writer();
    w.write_record(aggregate_header()).expect("in-memory write");
    let iterations = per_seed.iter().map(|rows| rows.len()).min().unwrap_or(0);
    for it in 0..iterations {
        let mut rec = vec![it.to_string(), per_seed.len().to_string()];
        for m in 0..AGGREGATED.len() {
            let values: Vec<f64> = per_seed.iter().filter_map(|rows| metric(&rows[it], m)).collect();
            let (mean, var) = mean_and_variance(&values);
            rec.push(opt(mean));
            rec.push(opt(var));
        }
        w.write_record(rec).expect("in-memory write");
    }
    finish(w)
}

pub const SELECTION_COLUMNS: [&str; 7] = ["iteration", "kind", "rank", "frame", "epsilon", "inlier_count", "drift_mm"];

pub fn selections_csv(report: &CampaignReport) -> String {
    let mut w = writer();
    w.write_record(SELECTION_COLUMNS).expect("in-memory write");
    for d in &report.diagnostics {
        for (rank, id) in d.selected.iter().enumerate() {
            w.write_record([d.iteration.to_string(), "annotated".into(), rank.to_string(), id.to_string(), String::new(), String::new(), String::new()])
                .expect("in-memory write");
        }
        for (rank, p) in d.pseudo.iter().enumerate() {
            w.write_record([
                d.iteration.to_string(),
                "pseudo".into(),
                rank.to_string(),
                p.frame.to_string(),
                num(p.epsilon),
                p.inlier_count.to_string(),
                num(p.drift_mm),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

/// One pseudo-label line of a selections file.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLine {
    pub iteration: usize,
    pub frame: u64,
    pub epsilon: f64,
    pub inlier_count: usize,
    pub drift_mm: f64,
}

pub fn parse_pseudo_lines(text: &str) -> Result<Vec<PseudoLine>, ReportError> {
    records(text, &SELECTION_COLUMNS)?
        .iter()
        .filter(|r| &r[1] == "pseudo")
        .map(|r| {
            Ok(PseudoLine {
                iteration: field(r, 0)?,
                frame: field(r, 3)?,
                epsilon: field(r, 4)?,
                inlier_count: field(r, 5)?,
                drift_mm: field(r, 6)?,
            })
        })
        .collect()
}

pub const DIAGNOSTIC_COLUMNS: [&str; 3] = ["iteration", "unlabeled_mkpe_mm", "cluster_counts"];

pub fn diagnostics_csv(report: &CampaignReport) -> String {
    let mut w = writer();
    w.write_record(DIAGNOSTIC_COLUMNS).expect("in-memory write");
    for d in &report.diagnostics {
        let counts: Vec<String> = d.cluster_counts.iter().map(usize::to_string).collect();
        w.write_record([d.iteration.to_string(), opt(d.unlabeled_mkpe_mm), counts.join(";")])
            .expect("in-memory write");
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticLine {
    pub iteration: usize,
    pub unlabeled_mkpe_mm: Option<f64>,
    pub cluster_counts: Vec<usize>,
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticLine>, ReportError> {
    records(text, &DIAGNOSTIC_COLUMNS)?
        .iter()
        .map(|r| {
            let cluster_counts = if r[2].is_empty() {
                Vec::new()
            } else {
                r[2].split(';').map(|c| c.parse().map_err(malformed)).collect::<Result<_, _>>()?
            };
            Ok(DiagnosticLine { iteration: field(r, 0)?, unlabeled_mkpe_mm: opt_field(r, 1)?, cluster_counts })
        })
        .collect()
}

pub fn report_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("report_seed{seed}.csv"))
}

pub fn selections_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("selections_seed{seed}.csv"))
}

pub fn diagnostics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("diagnostics_seed{seed}.csv"))
}

fn write(path: PathBuf, text: &str) -> Result<(), ReportError> {
    fs::write(&path, text).map_err(|source| ReportError::Io { path, source })
}

pub fn read(path: &Path) -> Result<String, ReportError> {
    fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes the resolved config, every per-seed file and the aggregate.
pub fn write_run(dir: &Path, config: &CampaignConfig, reports: &[CampaignReport]) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    write(dir.join("config.toml"), &to_toml(config))?;
    for r in reports {
        write(report_path(dir, r.seed), &report_csv(&r.rows))?;
        write(selections_path(dir, r.seed), &selections_csv(r))?;
        write(diagnostics_path(dir, r.seed), &diagnostics_csv(r))?;
    }
    let rows: Vec<&[IterationRow]> = reports.iter().map(|r| r.rows.as_slice()).collect();
    write(dir.join("aggregate.csv"), &aggregate_csv(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: usize, mkpe: f64, drift: Option<f64>) -> IterationRow {
        IterationRow {
            iteration,
            labeled_count: 20 + 10 * iteration,
            labeled_fraction: (20 + 10 * iteration) as f64 / 500.0,
            mkpe_mm: mkpe,
            mean_epsilon: (iteration > 0).then_some(123.456),
            pseudo_count: 2,
            pseudo_drift_mean_mm: drift,
            entropy: 0.1 * iteration as f64,
            hours_elapsed: iteration as f64 + 1.0 / 3.0,
        }
    }

    #[test]
    fn report_round_trips_exactly() {
        let rows = vec![row(0, 12.345678901234567, None), row(1, 1e-9, Some(0.1 + 0.2))];
        let text = report_csv(&rows);
        assert!(text.starts_with("iteration,labeled_count,labeled_fraction,mkpe_mm,mean_epsilon,pseudo_count,pseudo_drift_mean_mm,entropy,hours_elapsed\n"));
        assert_eq!(parse_report_csv(&text).unwrap(), rows);
    }

    #[test]
    fn sample_variance() {
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((v.unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_and_variance(&[7.0]), (Some(7.0), None));
        assert_eq!(mean_and_variance(&[]), (None, None));
    }

    #[test]
    fn aggregate_skips_missing_optional_values() {
        let a = vec![row(0, 10.0, None), row(1, 8.0, Some(3.0))];
        let b = vec![row(0, 12.0, None), row(1, 6.0, None)];
        let text = aggregate_csv(&[&a, &b]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 18);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&first[..2], ["0", "2"]);
        assert_eq!(&first[6..8], ["11", "2"]);
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&second[12..14], ["3", ""]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(parse_report_csv("iteration,mkpe\n0,1\n").is_err());
    }
}
