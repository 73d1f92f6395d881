//! Result serialization: time-series and summary CSVs, sensitivity tables,
//! visit-matrix files, and the run manifest written alongside every output.
//!
//! All files are UTF-8 with LF line endings; fractional quantities use
//! fixed six-decimal reals, transmission composites use scientific
//! notation to survive round trips.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::engine::{EnsembleSummary, TickRecord, TimeSeries};
use crate::sensitivity::{SensitivityResult, SweepPoint};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_error(line: usize, message: impl Into<String>) -> OutputError {
    OutputError::Parse {
        line,
        message: message.into(),
    }
}

fn timeseries_header(context_names: &[String]) -> String {
    let mut header = String::from("tick,n_ND,n_D,n_FD");
    for name in context_names {
        let _ = write!(header, ",drinkers_{name}");
    }
    header
}

fn record_line(record: &TickRecord) -> String {
    let mut line = format!(
        "{},{},{},{}",
        record.tick, record.n_nd, record.n_d, record.n_fd
    );
    for count in &record.context_drinkers {
        let _ = write!(line, ",{count}");
    }
    line
}

/// One replicate as CSV: `tick,n_ND,n_D,n_FD,drinkers_<context>...`.
pub fn write_timeseries(
    series: &TimeSeries,
    context_names: &[String],
    path: &Path,
) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", timeseries_header(context_names))?;
    for record in &series.records {
        writeln!(out, "{}", record_line(record))?;
    }
    out.flush()?;
    Ok(())
}

/// An ensemble as CSV with a leading replicate column.
pub fn write_ensemble_timeseries(
    series: &[TimeSeries],
    context_names: &[String],
    path: &Path,
) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "replicate,{}", timeseries_header(context_names))?;
    for (replicate, ts) in series.iter().enumerate() {
        for record in &ts.records {
            writeln!(out, "{replicate},{}", record_line(record))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a single-replicate time-series CSV back; the exact inverse of
/// [`write_timeseries`].
pub fn read_timeseries(path: &Path) -> Result<TimeSeries, OutputError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty file, expected a header"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 5 || columns[0] != "tick" {
        return Err(parse_error(1, "unrecognized time-series header"));
    }
    let contexts = columns.len() - 4;

    let mut records = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(parse_error(
                line_no,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let number = |i: usize| -> Result<usize, OutputError> {
            fields[i]
                .parse()
                .map_err(|_| parse_error(line_no, format!("malformed count '{}'", fields[i])))
        };
        let tick: u64 = fields[0]
            .parse()
            .map_err(|_| parse_error(line_no, format!("malformed tick '{}'", fields[0])))?;
        let record = TickRecord {
            tick,
            n_nd: number(1)?,
            n_d: number(2)?,
            n_fd: number(3)?,
            context_drinkers: (0..contexts)
                .map(|c| number(4 + c))
                .collect::<Result<_, _>>()?,
        };
        records.push(record);
    }
    let population = records
        .first()
        .map(|r| r.n_nd + r.n_d + r.n_fd)
        .unwrap_or(0);
    Ok(TimeSeries {
        population,
        records,
    })
}

/// Per-tick ensemble means and dispersions as six-decimal fractions.
pub fn write_ensemble_summary(
    summary: &EnsembleSummary,
    path: &Path,
) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "tick,mean_ND,sd_ND,mean_D,sd_D,mean_FD,sd_FD")?;
    for (t, tick) in summary.ticks.iter().enumerate() {
        writeln!(
            out,
            "{tick},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            summary.mean[t][0],
            summary.sd[t][0],
            summary.mean[t][1],
            summary.sd[t][1],
            summary.mean[t][2],
            summary.sd[t][2],
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Visit matrix: one row per agent, whitespace-separated reals summing to
/// one.
pub fn write_visit_matrix(matrix: &[Vec<f64>], path: &Path) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in matrix {
        let line = row
            .iter()
            .map(|v| format!("{v:.12}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_visit_matrix(path: &Path) -> Result<Vec<Vec<f64>>, OutputError> {
    let text = fs::read_to_string(path)?;
    let mut matrix = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|field| {
                field
                    .parse()
                    .map_err(|_| parse_error(index + 1, format!("malformed entry '{field}'")))
            })
            .collect::<Result<_, _>>()?;
        matrix.push(row);
    }
    Ok(matrix)
}

/// Design-plus-response table: `sample_id,<parameters...>,qoi`.
pub fn write_design_qoi(result: &SensitivityResult, path: &Path) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "sample_id,{},qoi", result.parameter_names.join(","))?;
    for (id, (row, qoi)) in result.design.iter().zip(&result.qoi).enumerate() {
        let values = row
            .iter()
            .map(|v| format!("{v:.9e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{id},{values},{qoi:.6}")?;
    }
    out.flush()?;
    Ok(())
}

/// Index table: `parameter,method,estimate,ci_lo,ci_hi`.
pub fn write_indices(result: &SensitivityResult, path: &Path) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "parameter,method,estimate,ci_lo,ci_hi")?;
    for index in &result.indices {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            index.parameter, index.method, index.estimate, index.ci.0, index.ci.1
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Local-sweep curve: `context,beta_tilde,qoi_mean,ci_lo,ci_hi`.
pub fn write_sweep(
    context: &str,
    sweep: &[SweepPoint],
    path: &Path,
) -> Result<(), OutputError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "context,beta_tilde,qoi_mean,ci_lo,ci_hi")?;
    for point in sweep {
        writeln!(
            out,
            "{context},{:.9e},{:.6},{:.6},{:.6}",
            point.beta_tilde, point.qoi_mean, point.ci.0, point.ci.1
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Provenance record written alongside every output artifact; carries the
/// full resolved configuration so a run can be reproduced byte-for-byte.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub replicates: usize,
    pub threads: Option<usize>,
    pub outputs: Vec<String>,
    pub config_dump: String,
}

impl RunManifest {
    pub fn to_string_pretty(&self) -> String {
        let unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "tool = campus-abm");
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "replicates = {}", self.replicates);
        let _ = writeln!(
            out,
            "threads = {}",
            self.threads
                .map(|t| t.to_string())
                .unwrap_or_else(|| "auto".to_string())
        );
        let _ = writeln!(out, "unix_time = {unix_time}");
        for output in &self.outputs {
            let _ = writeln!(out, "output = {output}");
        }
        for line in self.config_dump.lines() {
            let _ = writeln!(out, "config.{line}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        fs::write(path, self.to_string_pretty())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AppConfig;
    use crate::engine::run_replicate;
    use crate::sensitivity::IndexEstimate;
    use crate::Scenario;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!("campus_abm_test_{}_{}", std::process::id(), name));
        path
    }

    fn small_series() -> (Scenario, TimeSeries) {
        let mut scenario = Scenario::baseline();
        scenario.model.population = 50;
        scenario.population.count = 50;
        scenario.model.horizon_ticks = 12;
        scenario.model.qs_window = (6, 12);
        let series = run_replicate(&scenario, 3).unwrap();
        (scenario, series)
    }

    #[test]
    fn timeseries_round_trip_is_exact() {
        let (scenario, series) = small_series();
        let path = temp_path("roundtrip.csv");
        write_timeseries(&series, &scenario.population.context_names, &path).unwrap();
        let read_back = read_timeseries(&path).unwrap();
        assert_eq!(read_back, series);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn timeseries_header_matches_schema() {
        let (scenario, series) = small_series();
        let path = temp_path("header.csv");
        write_timeseries(&series, &scenario.population.context_names, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "tick,n_ND,n_D,n_FD,drinkers_Library,drinkers_MU,drinkers_SDFC,drinkers_Dorm,drinkers_Others"
        );
        // Conservation on the first data row.
        let first: Vec<usize> = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(first[1] + first[2] + first[3], 50);
        assert!(!text.contains('\r'));
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn empty_series_writes_header_only() {
        let series = TimeSeries {
            population: 0,
            records: vec![],
        };
        let names = Scenario::baseline().population.context_names;
        let path = temp_path("empty.csv");
        write_timeseries(&series, &names, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn ensemble_csv_adds_replicate_column() {
        let (scenario, series) = small_series();
        let path = temp_path("ensemble.csv");
        write_ensemble_timeseries(
            &[series.clone(), series],
            &scenario.population.context_names,
            &path,
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("replicate,tick,"));
        assert_eq!(text.lines().count(), 1 + 2 * 13);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
        assert!(text.lines().last().unwrap().starts_with("1,"));
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn summary_rows_are_six_decimal_fractions() {
        let mut scenario = Scenario::baseline();
        scenario.model.population = 40;
        scenario.population.count = 40;
        scenario.model.horizon_ticks = 8;
        scenario.model.qs_window = (4, 8);
        let summary = crate::engine::run_ensemble(&scenario, 4, 9).unwrap();
        let path = temp_path("summary.csv");
        write_ensemble_summary(&summary, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "tick,mean_ND,sd_ND,mean_D,sd_D,mean_FD,sd_FD"
        );
        let first = text.lines().nth(1).unwrap();
        assert!(first.split(',').skip(1).all(|f| f.contains('.')));
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn visit_matrix_round_trips_within_tolerance() {
        let matrix = vec![vec![0.1, 0.2, 0.3, 0.25, 0.15], vec![0.0, 0.5, 0.25, 0.15, 0.1]];
        let path = temp_path("matrix.txt");
        write_visit_matrix(&matrix, &path).unwrap();
        let read_back = read_visit_matrix(&path).unwrap();
        assert_eq!(read_back.len(), 2);
        for (a, b) in matrix.iter().zip(&read_back) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn malformed_matrix_reports_line() {
        let path = temp_path("badmatrix.txt");
        fs::write(&path, "0.5 0.5\n0.5 oops\n").unwrap();
        match read_visit_matrix(&path).unwrap_err() {
            OutputError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn sensitivity_tables_have_pinned_headers() {
        let result = SensitivityResult {
            parameter_names: vec![
                "beta_tilde_Dorm".into(),
                "beta_tilde_Library".into(),
                "beta_tilde_MU".into(),
                "beta_tilde_SDFC".into(),
            ],
            design: vec![vec![1e-3, 2e-3, 3e-4, 5e-4]],
            qoi: vec![0.25],
            indices: vec![IndexEstimate {
                parameter: "beta_tilde_MU".into(),
                method: "pcc",
                estimate: 0.9,
                ci: (0.88, 0.92),
            }],
            method: "lhs-regression",
            replicates_per_sample: 1,
            seed: 7,
        };
        let design_path = temp_path("design.csv");
        let indices_path = temp_path("indices.csv");
        write_design_qoi(&result, &design_path).unwrap();
        write_indices(&result, &indices_path).unwrap();
        let design_text = fs::read_to_string(&design_path).unwrap();
        assert_eq!(
            design_text.lines().next().unwrap(),
            "sample_id,beta_tilde_Dorm,beta_tilde_Library,beta_tilde_MU,beta_tilde_SDFC,qoi"
        );
        assert!(design_text.lines().nth(1).unwrap().starts_with("0,"));
        let indices_text = fs::read_to_string(&indices_path).unwrap();
        assert_eq!(
            indices_text.lines().next().unwrap(),
            "parameter,method,estimate,ci_lo,ci_hi"
        );
        assert!(indices_text.contains("beta_tilde_MU,pcc,0.900000,0.880000,0.920000"));
        fs::remove_file(&design_path).unwrap();
        fs::remove_file(&indices_path).unwrap();
    }

    #[test]
    fn manifest_embeds_the_resolved_config() {
        let manifest = RunManifest {
            command: "simulate --seed 7".into(),
            seed: 7,
            replicates: 10,
            threads: Some(2),
            outputs: vec!["timeseries.csv".into()],
            config_dump: AppConfig::baseline().to_config_string(),
        };
        let text = manifest.to_string_pretty();
        assert!(text.contains("tool = campus-abm"));
        assert!(text.contains("command = simulate --seed 7"));
        assert!(text.contains("config.population = 538"));
        assert!(text.contains("config.sa.lhs_samples = 1000"));
        assert!(text.contains("output = timeseries.csv"));
        // The embedded config reparses to the same configuration.
        let embedded: String = text
            .lines()
            .filter_map(|l| l.strip_prefix("config."))
            .map(|l| format!("{l}\n"))
            .collect();
        let reparsed = crate::config::parse_config_str(&embedded).unwrap();
        assert_eq!(reparsed, AppConfig::baseline());
    }
}
