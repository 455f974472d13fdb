//! CSV emitters and readers for timeseries, statistics, sweep summaries, and
//! the sweep journal.
//!
//! All values are plain numbers, so no quoting is ever needed. Floats are
//! written as `{:.16e}` (17 significant digits), which round-trips every f64
//! bit for bit; identical runs therefore produce byte-identical files.
//! Snapshot writers go through a temp file in the target directory followed
//! by a rename, so readers never observe a half-written file. The journal is
//! the one append-only exception: it must survive mid-sweep interruption.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::analytics::{AnalysisOptions, RunStatistics};
use crate::experiments::{
    GridPointSummary, JournalRow, RealizationStats, StreakDiagnostics, SweepResult,
};
use crate::sim::StepRecord;

pub const TIMESERIES_HEADER: &str =
    "t,price,log_price,return,news,u,mean_k,activity,total_cash,total_stocks";
pub const JOURNAL_HEADER: &str = "axis1,axis2,realization,seed,max_mean_k,max_drawdown,max_drawup";
pub const SWEEP_HEADER: &str = "axis1,axis2,n_completed,complete,mean_max_mean_k,std_max_mean_k,\
mean_max_drawdown,std_max_drawdown,mean_max_drawup,std_max_drawup";

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
}

/// Round-trip exact float formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `contents` to `path` atomically, creating parent directories.
pub fn atomic_write(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, ReadError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ReadError::Io { path: path.display().to_string(), source })?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> ReadError {
    ReadError::Malformed { path: path.display().to_string(), line, msg: msg.into() }
}

fn expect_header(lines: &[String], header: &str, path: &Path) -> Result<(), ReadError> {
    match lines.first() {
        Some(first) if first == header => Ok(()),
        Some(first) => Err(malformed(path, 1, format!("expected header {header:?}, got {first:?}"))),
        None => Err(malformed(path, 1, "empty file")),
    }
}

fn parse_f64(s: &str, path: &Path, line: usize, what: &str) -> Result<f64, ReadError> {
    s.parse().map_err(|_| malformed(path, line, format!("bad {what}: {s:?}")))
}

fn parse_int<T: std::str::FromStr>(
    s: &str,
    path: &Path,
    line: usize,
    what: &str,
) -> Result<T, ReadError> {
    s.parse().map_err(|_| malformed(path, line, format!("bad {what}: {s:?}")))
}

/// Write the per-step timeseries of a run.
pub fn emit_timeseries(records: &[StepRecord], path: &Path) -> io::Result<()> {
    let mut out = String::with_capacity(64 + records.len() * 240);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            fmt_f64(r.price),
            fmt_f64(r.log_price),
            fmt_f64(r.ret),
            fmt_f64(r.news),
            fmt_f64(r.u),
            fmt_f64(r.mean_k),
            fmt_f64(r.activity),
            fmt_f64(r.total_cash),
            fmt_f64(r.total_stocks),
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Read a timeseries written by `emit_timeseries`. Errors carry path and
/// line number.
pub fn read_timeseries(path: &Path) -> Result<Vec<StepRecord>, ReadError> {
    let lines = read_lines(path)?;
    expect_header(&lines, TIMESERIES_HEADER, path)?;
    let mut records = Vec::with_capacity(lines.len().saturating_sub(1));
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(malformed(path, lineno, format!("expected 10 fields, got {}", fields.len())));
        }
        records.push(StepRecord {
            t: parse_int(fields[0], path, lineno, "t")?,
            price: parse_f64(fields[1], path, lineno, "price")?,
            log_price: parse_f64(fields[2], path, lineno, "log_price")?,
            ret: parse_f64(fields[3], path, lineno, "return")?,
            news: parse_f64(fields[4], path, lineno, "news")?,
            u: parse_f64(fields[5], path, lineno, "u")?,
            mean_k: parse_f64(fields[6], path, lineno, "mean_k")?,
            activity: parse_f64(fields[7], path, lineno, "activity")?,
            total_cash: parse_f64(fields[8], path, lineno, "total_cash")?,
            total_stocks: parse_f64(fields[9], path, lineno, "total_stocks")?,
        });
    }
    Ok(records)
}

/// Write run statistics as key,value rows. The analysis settings (lags, bin
/// edges) ride along so the file is interpretable on its own.
pub fn emit_stats(
    stats: &RunStatistics,
    cap_events: Option<u64>,
    opts: &AnalysisOptions,
    path: &Path,
) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("key,value\n");
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push(',');
        out.push_str(&v);
        out.push('\n');
    };
    kv("max_mean_k", fmt_f64(stats.max_mean_k));
    kv("max_drawdown", fmt_f64(stats.max_drawdown));
    kv("max_drawup", fmt_f64(stats.max_drawup));
    kv("excess_kurtosis", fmt_f64(stats.excess_kurtosis));
    if let Some(n) = cap_events {
        kv("cap_events", n.to_string());
    }
    kv("max_lag", opts.max_lag.to_string());
    kv("return_bins_lo", fmt_f64(opts.return_bins.lo));
    kv("return_bins_hi", fmt_f64(opts.return_bins.hi));
    kv("return_bins_count", opts.return_bins.count.to_string());
    kv("mean_k_bins_lo", fmt_f64(opts.mean_k_bins.lo));
    kv("mean_k_bins_hi", fmt_f64(opts.mean_k_bins.hi));
    kv("mean_k_bins_count", opts.mean_k_bins.count.to_string());
    for (lag, rho) in stats.return_acf.iter().enumerate() {
        kv(&format!("return_acf_{lag}"), fmt_f64(*rho));
    }
    for (lag, rho) in stats.vol_acf.iter().enumerate() {
        kv(&format!("vol_acf_{lag}"), fmt_f64(*rho));
    }
    for (i, mass) in stats.return_histogram.iter().enumerate() {
        kv(&format!("return_hist_{i}"), fmt_f64(*mass));
    }
    for (i, mass) in stats.mean_k_histogram.iter().enumerate() {
        kv(&format!("mean_k_hist_{i}"), fmt_f64(*mass));
    }
    atomic_write(path, out.as_bytes())
}

/// Write streak diagnostics as key,value rows.
pub fn emit_scenario(diag: &StreakDiagnostics, path: &Path) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("key,value\n");
    out.push_str(&format!("streak_start,{}\n", diag.streak_start));
    out.push_str(&format!("streak_end,{}\n", diag.streak_end));
    out.push_str(&format!("responded,{}\n", diag.responded));
    out.push_str(&format!("baseline_abs_u,{}\n", fmt_f64(diag.baseline_abs_u)));
    out.push_str(&format!("peak_step,{}\n", diag.peak_step));
    out.push_str(&format!("peak_abs_u,{}\n", fmt_f64(diag.peak_abs_u)));
    out.push_str(&format!("efold_steps,{}\n", fmt_f64(diag.efold_steps)));
    out.push_str(&format!("fit_points,{}\n", diag.fit_points));
    atomic_write(path, out.as_bytes())
}

fn fmt_axis2(axis2: Option<f64>) -> String {
    axis2.map(fmt_f64).unwrap_or_default()
}

fn parse_axis2(s: &str, path: &Path, line: usize) -> Result<Option<f64>, ReadError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, path, line, "axis2").map(Some)
    }
}

/// Write a sweep summary, one row per grid point.
pub fn emit_sweep(result: &SweepResult, path: &Path) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for p in &result.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.axis1),
            fmt_axis2(p.axis2),
            p.n_completed,
            p.complete,
            fmt_f64(p.mean_max_mean_k),
            fmt_f64(p.std_max_mean_k),
            fmt_f64(p.mean_max_drawdown),
            fmt_f64(p.std_max_drawdown),
            fmt_f64(p.mean_max_drawup),
            fmt_f64(p.std_max_drawup),
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Read a sweep summary written by `emit_sweep`.
pub fn read_sweep(path: &Path) -> Result<SweepResult, ReadError> {
    let lines = read_lines(path)?;
    expect_header(&lines, SWEEP_HEADER, path)?;
    let mut points = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(malformed(path, lineno, format!("expected 10 fields, got {}", fields.len())));
        }
        let complete = match fields[3] {
            "true" => true,
            "false" => false,
            other => return Err(malformed(path, lineno, format!("bad complete flag: {other:?}"))),
        };
        points.push(GridPointSummary {
            axis1: parse_f64(fields[0], path, lineno, "axis1")?,
            axis2: parse_axis2(fields[1], path, lineno)?,
            n_completed: parse_int(fields[2], path, lineno, "n_completed")?,
            complete,
            mean_max_mean_k: parse_f64(fields[4], path, lineno, "mean_max_mean_k")?,
            std_max_mean_k: parse_f64(fields[5], path, lineno, "std_max_mean_k")?,
            mean_max_drawdown: parse_f64(fields[6], path, lineno, "mean_max_drawdown")?,
            std_max_drawdown: parse_f64(fields[7], path, lineno, "std_max_drawdown")?,
            mean_max_drawup: parse_f64(fields[8], path, lineno, "mean_max_drawup")?,
            std_max_drawup: parse_f64(fields[9], path, lineno, "std_max_drawup")?,
        });
    }
    Ok(SweepResult { points })
}

/// Open (or create) a sweep journal for appending; writes the header when the
/// file is new or empty.
pub fn open_journal_appender(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut writer = BufWriter::new(file);
    if writer.get_ref().metadata()?.len() == 0 {
        writeln!(writer, "{JOURNAL_HEADER}")?;
        writer.flush()?;
    }
    Ok(writer)
}

/// Append one realization row and flush, so a crash loses at most the row
/// being written.
pub fn append_journal_row<W: Write>(writer: &mut W, row: &JournalRow) -> io::Result<()> {
    writeln!(
        writer,
        "{},{},{},{},{},{},{}",
        fmt_f64(row.axis1),
        fmt_axis2(row.axis2),
        row.realization,
        row.seed,
        fmt_f64(row.stats.max_mean_k),
        fmt_f64(row.stats.max_drawdown),
        fmt_f64(row.stats.max_drawup),
    )?;
    writer.flush()
}

/// Read all rows of a sweep journal.
pub fn read_journal(path: &Path) -> Result<Vec<JournalRow>, ReadError> {
    let lines = read_lines(path)?;
    expect_header(&lines, JOURNAL_HEADER, path)?;
    let mut rows = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(malformed(path, lineno, format!("expected 7 fields, got {}", fields.len())));
        }
        rows.push(JournalRow {
            axis1: parse_f64(fields[0], path, lineno, "axis1")?,
            axis2: parse_axis2(fields[1], path, lineno)?,
            realization: parse_int(fields[2], path, lineno, "realization")?,
            seed: parse_int(fields[3], path, lineno, "seed")?,
            stats: RealizationStats {
                max_mean_k: parse_f64(fields[4], path, lineno, "max_mean_k")?,
                max_drawdown: parse_f64(fields[5], path, lineno, "max_drawdown")?,
                max_drawup: parse_f64(fields[6], path, lineno, "max_drawup")?,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_record(t: usize) -> StepRecord {
        StepRecord {
            t,
            price: std::f64::consts::PI,
            log_price: 1.0 / 3.0,
            ret: -1.0e-300,
            news: 6.02214076e23,
            u: -0.0,
            mean_k: f64::MIN_POSITIVE,
            activity: 0.123456789012345678,
            total_cash: 2500.0,
            total_stocks: 1.0e-17,
        }
    }

    #[test]
    fn fmt_f64_round_trips_bit_for_bit() {
        for x in [
            std::f64::consts::PI,
            1.0 / 3.0,
            -1.0e-300,
            6.02214076e23,
            -0.0,
            f64::MIN_POSITIVE,
            f64::MAX,
        ] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} did not round-trip");
        }
    }

    #[test]
    fn timeseries_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("timeseries.csv");
        let records: Vec<StepRecord> = (0..5).map(awkward_record).collect();
        emit_timeseries(&records, &path).unwrap();
        assert_eq!(read_timeseries(&path).unwrap(), records);
    }

    #[test]
    fn timeseries_header_is_pinned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("timeseries.csv");
        emit_timeseries(&[awkward_record(0)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,price,log_price,return,news,u,mean_k,activity,total_cash,total_stocks"
        );
        assert!(!text.contains('\r'), "unix newlines only");
    }

    #[test]
    fn atomic_write_leaves_no_temp_files_and_creates_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep/nested/file.csv");
        atomic_write(&path, b"hello\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "hello\n");
        let residue: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(residue.len(), 1, "only the target may remain, got {residue:?}");
    }

    #[test]
    fn read_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, format!("{TIMESERIES_HEADER}\n0,1,2,3\n")).unwrap();
        let err = read_timeseries(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "line number missing: {err}");

        fs::write(&path, "wrong,header\n").unwrap();
        let err = read_timeseries(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "header error is line 1: {err}");

        fs::write(&path, format!("{TIMESERIES_HEADER}\n0,x,0,0,0,0,0,0,0,0\n")).unwrap();
        let err = read_timeseries(&path).unwrap_err();
        assert!(err.to_string().contains("price"), "field name missing: {err}");
    }

    #[test]
    fn sweep_summary_round_trips() {
        let result = SweepResult {
            points: vec![
                GridPointSummary {
                    axis1: 0.5,
                    axis2: None,
                    n_completed: 3,
                    complete: true,
                    mean_max_mean_k: 0.1,
                    std_max_mean_k: 0.01,
                    mean_max_drawdown: -0.2,
                    std_max_drawdown: 0.02,
                    mean_max_drawup: 0.3,
                    std_max_drawup: 0.03,
                },
                GridPointSummary {
                    axis1: 4.0,
                    axis2: Some(0.95),
                    n_completed: 2,
                    complete: false,
                    mean_max_mean_k: 1.0 / 3.0,
                    std_max_mean_k: f64::NAN,
                    mean_max_drawdown: -2.0,
                    std_max_drawdown: 0.0,
                    mean_max_drawup: 5.0,
                    std_max_drawup: 0.0,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        emit_sweep(&result, &path).unwrap();
        let back = read_sweep(&path).unwrap();
        assert_eq!(back.points.len(), 2);
        assert_eq!(back.points[0], result.points[0]);
        // NaN breaks PartialEq, so compare the second row field by field
        assert_eq!(back.points[1].axis2, Some(0.95));
        assert!(!back.points[1].complete);
        assert!(back.points[1].std_max_mean_k.is_nan());
        assert_eq!(back.points[1].mean_max_mean_k, 1.0 / 3.0);
    }

    #[test]
    fn journal_appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.csv");
        let rows = [
            JournalRow {
                axis1: 1.0,
                axis2: None,
                realization: 0,
                seed: 9000,
                stats: RealizationStats { max_mean_k: 0.2, max_drawdown: -0.1, max_drawup: 0.4 },
            },
            JournalRow {
                axis1: 1.5,
                axis2: Some(2.0),
                realization: 7,
                seed: 9007,
                stats: RealizationStats { max_mean_k: 0.9, max_drawdown: -3.0, max_drawup: 1.0 },
            },
        ];
        {
            let mut writer = open_journal_appender(&path).unwrap();
            append_journal_row(&mut writer, &rows[0]).unwrap();
        }
        {
            // reopening must not duplicate the header
            let mut writer = open_journal_appender(&path).unwrap();
            append_journal_row(&mut writer, &rows[1]).unwrap();
        }
        assert_eq!(read_journal(&path).unwrap(), rows.to_vec());
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("axis1").count(), 1);
    }

    #[test]
    fn stats_file_reports_settings_alongside_results() {
        let stats = RunStatistics {
            max_mean_k: 0.5,
            max_drawdown: -0.25,
            max_drawup: 0.75,
            excess_kurtosis: 2.5,
            return_acf: vec![1.0, -0.04],
            vol_acf: vec![1.0, 0.3],
            return_histogram: vec![0.5, 0.5],
            mean_k_histogram: vec![1.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        emit_stats(&stats, Some(3), &AnalysisOptions::default(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        for key in [
            "max_mean_k,",
            "excess_kurtosis,",
            "cap_events,3",
            "max_lag,50",
            "return_bins_lo,",
            "mean_k_bins_count,150",
            "return_acf_1,",
            "vol_acf_0,",
            "return_hist_1,",
            "mean_k_hist_0,",
        ] {
            assert!(text.contains(key), "missing {key} in:\n{text}");
        }
        emit_stats(&stats, None, &AnalysisOptions::default(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("cap_events"), "cap_events only for fresh runs");
    }
}
