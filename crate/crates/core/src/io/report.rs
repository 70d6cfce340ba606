//! Report artifacts: per-waypoint and per-frame CSVs, a text summary and a
//! matplotlib script that plots them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{timing_stats, ErrorReport, RangeBinning, WaypointRow};

pub const WAYPOINTS_FILE: &str = "waypoints.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PLOT_FILE: &str = "plot.py";

const WAYPOINT_HEADER: &str = "index,truth_deg,raw_deg,filtered_deg,residual_deg,delta_frames,emission_range_m";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn waypoints_csv(rows: &[WaypointRow]) -> String {
    let mut out = String::with_capacity(64 * rows.len());
    out.push_str(WAYPOINT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.index,
            opt(r.truth_deg),
            opt(r.raw_deg),
            opt(r.filtered_deg),
            opt(r.residual_deg),
            opt(r.delta_frames),
            opt(r.emission_range_m)
        );
    }
    out
}

fn parse_opt<T: std::str::FromStr>(file: &FsPath, line: usize, field: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::format(file, Some(line), format!("`{field}` is not a number")))
}

pub fn read_waypoints_csv(file: &FsPath) -> Result<Vec<WaypointRow>> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(WAYPOINT_HEADER) {
        return Err(Error::format(file, Some(1), format!("expected header `{WAYPOINT_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::format(file, Some(n), format!("expected 7 fields, got {}", f.len())));
        }
        rows.push(WaypointRow {
            index: f[0]
                .parse()
                .map_err(|_| Error::format(file, Some(n), format!("bad index `{}`", f[0])))?,
            truth_deg: parse_opt(file, n, f[1])?,
            raw_deg: parse_opt(file, n, f[2])?,
            filtered_deg: parse_opt(file, n, f[3])?,
            residual_deg: parse_opt(file, n, f[4])?,
            delta_frames: parse_opt(file, n, f[5])?,
            emission_range_m: parse_opt(file, n, f[6])?,
        });
    }
    Ok(rows)
}

/// Per-frame processing record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub frame_ms: Vec<f64>,
    pub filter_lens: Vec<usize>,
    pub points: Vec<usize>,
}

pub fn timing_csv(timing: &FrameTiming) -> String {
    let mut out = String::from("frame,time_ms,filter_waypoints,points\n");
    for (k, t) in timing.frame_ms.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{t},{},{}",
            opt(timing.filter_lens.get(k)),
            opt(timing.points.get(k))
        );
    }
    out
}

pub fn read_timing_csv(file: &FsPath) -> Result<FrameTiming> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    let mut timing = FrameTiming::default();
    for (k, line) in text.lines().enumerate().skip(1) {
        let n = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::format(file, Some(n), format!("expected 4 fields, got {}", f.len())));
        }
        let t = parse_opt::<f64>(file, n, f[1])?
            .ok_or_else(|| Error::format(file, Some(n), "missing time"))?;
        timing.frame_ms.push(t);
        if let Some(v) = parse_opt(file, n, f[2])? {
            timing.filter_lens.push(v);
        }
        if let Some(v) = parse_opt(file, n, f[3])? {
            timing.points.push(v);
        }
    }
    Ok(timing)
}

fn bins_table(out: &mut String, title: &str, binning: &RangeBinning) {
    let _ = writeln!(out, "{title} (bin width {} m)", binning.width);
    for b in &binning.bins {
        match b.abs_error_std {
            Some(s) => {
                let _ = writeln!(out, "  [{:>5.1}, {:>5.1})  n = {:>5}  |error| std = {s:.4} deg", b.lower, b.upper, b.count);
            }
            None => {
                let _ = writeln!(out, "  [{:>5.1}, {:>5.1})  n = {:>5}  (too few samples)", b.lower, b.upper, b.count);
            }
        }
    }
    if let Some(r) = binning.spread_ratio() {
        let _ = writeln!(out, "  spread across populated bins: {r:.3}x");
    }
}

/// Human-readable summary. Contains no timings so that reruns compare equal.
pub fn summary_text(name: &str, report: &ErrorReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run: {name}");
    let _ = writeln!(out, "waypoints: {}  emitted: {}", report.waypoints, report.emitted);
    let f = &report.filtered;
    let _ = writeln!(out, "filtered error (truth - estimate): n = {}  mean = {:.4} deg  std = {:.4} deg", f.n, f.mean, f.std);
    if let Some(r) = &report.raw {
        let _ = writeln!(out, "emitted error: n = {}  mean = {:.4} deg  std = {:.4} deg", r.n, r.mean, r.std);
    }
    if let Some(m) = report.ranges.mean_range {
        let _ = writeln!(out, "mean emission range: {m:.2} m");
    }
    bins_table(&mut out, "emitted |error| by emission range", &report.ranges);
    bins_table(&mut out, "filtered |error| by emission range", &report.filtered_ranges);
    if let Some(w) = &report.whiteness {
        let _ = writeln!(
            out,
            "residuals: n = {}  mean = {:.4} deg  mean within 3 sigma/sqrt(n): {}",
            w.n,
            w.mean,
            w.mean_within_bound()
        );
        let _ = writeln!(
            out,
            "autocorrelation lags 1..{} inside +-{:.4}: {:.0} %",
            w.autocorrelation.len(),
            w.autocorrelation_bound(),
            100.0 * w.fraction_within_bound()
        );
        let lags: Vec<String> = w.autocorrelation.iter().map(|a| format!("{a:.3}")).collect();
        let _ = writeln!(out, "  {}", lags.join(" "));
    }
    out
}

/// Timing section, kept separate from the deterministic summary.
pub fn timing_text(timing: &FrameTiming) -> Result<String> {
    let stats = timing_stats(&timing.frame_ms, &timing.filter_lens)?;
    let mut out = format!(
        "frame time over {} frames: min {:.3} ms  mean {:.3} ms  max {:.3} ms\n",
        stats.n, stats.min_ms, stats.mean_ms, stats.max_ms
    );
    if let Some(g) = stats.growth {
        let _ = writeln!(out, "time vs filter waypoints: slope {:.3e} ms/waypoint  r^2 {:.3}", g.slope, g.r_squared);
    }
    Ok(out)
}

pub const PLOT_SCRIPT: &str = r#"# Usage: python3 plot.py [report_dir]
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def column(rows, key):
    return [float(r[key]) if r[key] else float("nan") for r in rows]


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
    with open(root / "waypoints.csv") as f:
        rows = list(csv.DictReader(f))
    idx = column(rows, "index")
    truth = column(rows, "truth_deg")
    raw = column(rows, "raw_deg")
    filt = column(rows, "filtered_deg")

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(idx, truth, label="truth")
    ax.plot(idx, raw, ".", ms=2, label="emitted")
    ax.plot(idx, filt, label="filtered")
    ax.set_xlabel("waypoint")
    ax.set_ylabel("grade (deg)")
    ax.legend()
    fig.savefig(root / "grade.png", dpi=120)

    err = [t - e for t, e in zip(truth, filt) if t == t and e == e]
    if err:
        fig, ax = plt.subplots()
        ax.hist(err, bins=60)
        ax.set_xlabel("truth - filtered (deg)")
        fig.savefig(root / "error_hist.png", dpi=120)

    pairs = [(float(r["emission_range_m"]), abs(float(r["truth_deg"]) - float(r["raw_deg"])))
             for r in rows if r["emission_range_m"] and r["truth_deg"] and r["raw_deg"]]
    if pairs:
        bins = {}
        for rng, e in pairs:
            bins.setdefault(int(rng // 5), []).append(e)
        xs, ys = [], []
        for k in sorted(bins):
            v = bins[k]
            if len(v) >= 5:
                m = sum(v) / len(v)
                xs.append(5 * k + 2.5)
                ys.append((sum((x - m) ** 2 for x in v) / (len(v) - 1)) ** 0.5)
        fig, ax = plt.subplots()
        ax.bar(xs, ys, width=4.5)
        ax.set_xlabel("emission range (m)")
        ax.set_ylabel("|error| std (deg)")
        fig.savefig(root / "range_bins.png", dpi=120)

    res = [float(r["residual_deg"]) for r in rows if r["residual_deg"]]
    if len(res) > 30:
        n = len(res)
        m = sum(res) / n
        d = [x - m for x in res]
        ss = sum(x * x for x in d)
        lags = range(1, 21)
        ac = [sum(d[i] * d[i + k] for i in range(n - k)) / ss for k in lags]
        fig, ax = plt.subplots()
        ax.stem(list(lags), ac)
        for s in (1, -1):
            ax.axhline(s * 3 / n ** 0.5, ls="--", c="k")
        ax.set_xlabel("lag")
        ax.set_ylabel("residual autocorrelation")
        fig.savefig(root / "whiteness.png", dpi=120)

    timing = root / "timing.csv"
    if timing.exists():
        with open(timing) as f:
            t = list(csv.DictReader(f))
        fig, ax = plt.subplots()
        ax.plot(column(t, "frame"), column(t, "time_ms"))
        ax.set_xlabel("frame")
        ax.set_ylabel("time (ms)")
        fig.savefig(root / "timing.png", dpi=120)


if __name__ == "__main__":
    main()
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub waypoints: PathBuf,
    pub timing: Option<PathBuf>,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

/// Writes the report directory. Every file except `timing.csv` depends only
/// on `rows`, so reruns with the same seed are byte-identical.
pub fn write_report(dir: &FsPath, name: &str, rows: &[WaypointRow], timing: Option<&FrameTiming>) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |file: &str, text: &str| -> Result<PathBuf> {
        let p = dir.join(file);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    let waypoints = write(WAYPOINTS_FILE, &waypoints_csv(rows))?;
    let summary = match ErrorReport::build(rows, None) {
        Ok(report) => summary_text(name, &report),
        Err(Error::Alignment(msg)) => format!("run: {name}\nwaypoints: {}\nno error statistics: {msg}\n", rows.len()),
        Err(e) => return Err(e),
    };
    let summary = write(SUMMARY_FILE, &summary)?;
    let timing = timing
        .filter(|t| !t.frame_ms.is_empty())
        .map(|t| write(TIMING_FILE, &timing_csv(t)))
        .transpose()?;
    let plot = write(PLOT_FILE, PLOT_SCRIPT)?;
    Ok(ReportFiles {
        waypoints,
        timing,
        summary,
        plot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<WaypointRow> {
        (0..40)
            .map(|k| WaypointRow {
                index: k,
                truth_deg: Some(0.1 * k as f64),
                raw_deg: (k % 3 != 0).then(|| 0.1 * k as f64 + 0.01 * ((k * 7) % 5) as f64),
                filtered_deg: (k > 2).then(|| 0.1 * k as f64 - 0.003 * (k % 4) as f64),
                residual_deg: (k % 3 != 0 && k > 2).then(|| 0.02 * ((k * 3) % 7) as f64 - 0.06),
                delta_frames: (k % 3 != 0).then(|| (k % 5) as i64 - 2),
                emission_range_m: (k % 3 != 0).then(|| 10.0 + k as f64),
            })
            .collect()
    }

    #[test]
    fn waypoint_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join(WAYPOINTS_FILE);
        fs::write(&file, waypoints_csv(&rows())).unwrap();
        assert_eq!(read_waypoints_csv(&file).unwrap(), rows());
    }

    #[test]
    fn timing_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join(TIMING_FILE);
        let t = FrameTiming {
            frame_ms: vec![1.5, 2.25, 0.125],
            filter_lens: vec![0, 4, 9],
            points: vec![10, 0, 31],
        };
        fs::write(&file, timing_csv(&t)).unwrap();
        assert_eq!(read_timing_csv(&file).unwrap(), t);
        assert!(timing_text(&t).unwrap().contains("max 2.250 ms"));
    }

    #[test]
    fn report_files_repeat_exactly() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_report(a.path(), "x", &rows(), None).unwrap();
        write_report(b.path(), "x", &rows(), None).unwrap();
        for f in [WAYPOINTS_FILE, SUMMARY_FILE, PLOT_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let summary = fs::read_to_string(a.path().join(SUMMARY_FILE)).unwrap();
        assert!(summary.contains("mean emission range"));
    }

    #[test]
    fn report_without_truth_still_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rows();
        r.iter_mut().for_each(|r| r.truth_deg = None);
        write_report(dir.path(), "replay", &r, None).unwrap();
        let s = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert!(s.contains("no error statistics"));
    }

    #[test]
    fn bad_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join(WAYPOINTS_FILE);
        fs::write(&file, format!("{WAYPOINT_HEADER}\n0,1,,,,,\n1,x,,,,,\n")).unwrap();
        let msg = read_waypoints_csv(&file).unwrap_err().to_string();
        assert!(msg.contains("waypoints.csv:3"), "{msg}");
    }
}
