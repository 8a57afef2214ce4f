//! CSV formats. Floats are written with 17 significant digits in scientific
//! notation, the separator is `,`, lines end in `\n` and every file starts
//! with a header row.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use tomoforge::estimators::SolveStatus;
use tomoforge::harness::Histogram;
use tomoforge::{AggregateRow, Method, TrialResult};

use crate::{CliError, CliResult};

pub const TRIAL_HEADER: [&str; 10] = [
    "state_id",
    "k",
    "method",
    "fidelity_to_target",
    "trace_dist_to_target",
    "fidelity_to_maxent",
    "vn_entropy",
    "kl_uniform",
    "total_unmeasured_mass",
    "solver_status",
];

pub const TIMING_HEADER: [&str; 4] = ["state_id", "k", "method", "wall_time_ms"];

pub const AGGREGATE_HEADER: [&str; 12] = [
    "k",
    "method",
    "metric",
    "mean",
    "median",
    "q1",
    "q3",
    "min",
    "max",
    "count",
    "failures",
    "quantile_method",
];

pub const CURVE_HEADER: [&str; 6] = ["k", "method", "mean", "median", "q1", "q3"];

pub const HISTOGRAM_HEADER: [&str; 5] = ["method", "k", "bin_left", "bin_right", "count"];

/// Quartile convention recorded in every aggregate row.
pub const QUANTILE_METHOD: &str = "linear";

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Schema {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trials(path: &Path, results: &[TrialResult]) -> CliResult<()> {
    write_rows(
        path,
        &TRIAL_HEADER,
        results.iter().map(|r| {
            vec![
                r.state_id.to_string(),
                r.k.to_string(),
                r.method.to_string(),
                fmt_float(r.fidelity_to_target),
                fmt_float(r.trace_dist_to_target),
                fmt_float(r.fidelity_to_maxent),
                fmt_float(r.vn_entropy),
                fmt_float(r.kl_uniform),
                fmt_float(r.total_unmeasured_mass),
                r.solver_status.as_str().to_string(),
            ]
        }),
    )
}

pub fn write_timings(path: &Path, results: &[TrialResult]) -> CliResult<()> {
    write_rows(
        path,
        &TIMING_HEADER,
        results.iter().map(|r| {
            vec![
                r.state_id.to_string(),
                r.k.to_string(),
                r.method.to_string(),
                fmt_float(r.wall_time_ms),
            ]
        }),
    )
}

pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> CliResult<()> {
    write_rows(
        path,
        &AGGREGATE_HEADER,
        rows.iter().map(|a| {
            vec![
                a.k.to_string(),
                a.method.to_string(),
                a.metric.clone(),
                fmt_float(a.mean),
                fmt_float(a.median),
                fmt_float(a.q1),
                fmt_float(a.q3),
                fmt_float(a.min),
                fmt_float(a.max),
                a.count.to_string(),
                a.failures.to_string(),
                QUANTILE_METHOD.to_string(),
            ]
        }),
    )
}

pub fn write_curve(path: &Path, rows: &[AggregateRow]) -> CliResult<()> {
    write_rows(
        path,
        &CURVE_HEADER,
        rows.iter().map(|a| {
            vec![
                a.k.to_string(),
                a.method.to_string(),
                fmt_float(a.mean),
                fmt_float(a.median),
                fmt_float(a.q1),
                fmt_float(a.q3),
            ]
        }),
    )
}

pub fn write_histograms(path: &Path, hists: &[(Method, usize, Histogram)]) -> CliResult<()> {
    let rows = hists.iter().flat_map(|(m, k, h)| {
        h.counts.iter().enumerate().map(move |(b, c)| {
            vec![
                m.to_string(),
                k.to_string(),
                fmt_float(h.edges[b]),
                fmt_float(h.edges[b + 1]),
                c.to_string(),
            ]
        })
    });
    write_rows(path, &HISTOGRAM_HEADER, rows)
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Reads a `trials.csv` written by [`write_trials`]. Any other layout is a
/// schema error. Wall times are not stored in this file and read back as 0.
pub fn read_trials(path: &Path) -> CliResult<Vec<TrialResult>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let schema = |msg: String| CliError::Schema {
        path: path.to_path_buf(),
        msg,
    };
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRIAL_HEADER.iter().copied()) {
        return Err(schema(format!(
            "not a trials file: expected header {}, found {}",
            TRIAL_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = line + 2;
        let bad = |col: &str| schema(format!("line {row}: bad value in column {col}"));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(TRIAL_HEADER[i]));
        let float = |i: usize| parse_float(&rec[i]).ok_or_else(|| bad(TRIAL_HEADER[i]));
        out.push(TrialResult {
            state_id: int(0)?,
            k: int(1)?,
            method: rec[2].parse::<Method>().map_err(|_| bad("method"))?,
            fidelity_to_target: float(3)?,
            trace_dist_to_target: float(4)?,
            fidelity_to_maxent: float(5)?,
            vn_entropy: float(6)?,
            kl_uniform: float(7)?,
            total_unmeasured_mass: float(8)?,
            solver_status: rec[9].parse::<SolveStatus>().map_err(|_| bad("solver_status"))?,
            wall_time_ms: 0.0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.125e12, f64::MIN_POSITIVE] {
            assert_eq!(parse_float(&fmt_float(x)), Some(x));
        }
    }

    #[test]
    fn trials_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");
        let rows = vec![TrialResult {
            state_id: 3,
            k: 8,
            method: "pvqt(1,0.01)".parse().unwrap(),
            fidelity_to_target: 0.9,
            trace_dist_to_target: 1.0 / 3.0,
            fidelity_to_maxent: f64::NAN,
            vn_entropy: 0.25,
            kl_uniform: 0.0,
            total_unmeasured_mass: 0.5,
            solver_status: SolveStatus::NumericalTrouble,
            wall_time_ms: 0.0,
        }];
        write_trials(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("state_id,k,method,"));
        assert!(text.contains("\"pvqt(1,0.01)\""));
        let back = read_trials(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].method, rows[0].method);
        assert_eq!(back[0].trace_dist_to_target, rows[0].trace_dist_to_target);
        assert!(back[0].fidelity_to_maxent.is_nan());
        assert_eq!(back[0].solver_status, SolveStatus::NumericalTrouble);
    }

    #[test]
    fn foreign_header_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve(&path, &[]).unwrap();
        assert!(matches!(read_trials(&path), Err(CliError::Schema { .. })));
    }
}
