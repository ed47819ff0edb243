//! Running presets and scenario files and writing their artifacts.
//!
//! Layout of `<out>/<name>/`:
//! `trace_<point>.csv` per point, `stats.csv`, `plot_<quantity>.svg`, and
//! `summary` with one PASS/FAIL line per declared bound.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::stats_csv;

use super::config::ConfigDoc;
use super::experiment::{
    check_bounds, run_experiment, stats_rows, BoundOutcome, Experiment, ExperimentKind, PointResult, SweepResult,
};
use super::plot::{render_svg, Figure, Series};
use super::presets;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_BOUND_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER_FAILURE: i32 = 3;

/// Outcome of a preset or scenario-file run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub dir: PathBuf,
    pub results: Vec<PointResult>,
    pub bounds: Vec<BoundOutcome>,
    pub stats_csv: String,
    pub summary: String,
}

impl RunReport {
    pub fn failed_points(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed_points() > 0 {
            EXIT_SOLVER_FAILURE
        } else if self.bounds.iter().any(|b| !b.pass) {
            EXIT_BOUND_FAILURE
        } else {
            EXIT_PASS
        }
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// File-name-safe form of a label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Runs a shipped preset. Unknown names fail before anything is written.
pub fn run_preset(name: &str, out: &Path, workers: usize) -> Result<RunReport> {
    let canonical = presets::canonical(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let file = presets::PRESETS
        .iter()
        .find(|(n, _)| *n == canonical)
        .map(|(_, f)| *f)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let text = presets::catalog_file(file).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let doc = ConfigDoc::from_catalog(file, text)?;
    run_doc(canonical, &doc, out, workers)
}

/// Runs a scenario file; its stem names the output directory.
pub fn run_file(path: &Path, out: &Path, workers: usize) -> Result<RunReport> {
    let doc = ConfigDoc::from_file(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    run_doc(&file_stem(&name), &doc, out, workers)
}

/// Runs the experiment declared in `doc` and writes its artifacts.
pub fn run_doc(name: &str, doc: &ConfigDoc, out: &Path, workers: usize) -> Result<RunReport> {
    let ex = Experiment::from_doc(doc)?;
    let results = run_experiment(doc, &ex, workers)?;
    let bounds = check_bounds(&ex, &results);
    let dir = out.join(name);
    let stats = stats_csv(&stats_rows(&results));
    let summary = summary_text(name, &results, &bounds);

    write_traces(&dir, &results)?;
    write_atomic(&dir.join("stats.csv"), stats.as_bytes())?;
    for (stem, fig) in figures(&ex, &results) {
        if let Ok(svg) = render_svg(&fig) {
            write_atomic(&dir.join(format!("plot_{stem}.svg")), svg.as_bytes())?;
        }
    }
    write_atomic(&dir.join("summary"), summary.as_bytes())?;
    Ok(RunReport {
        name: name.to_string(),
        dir,
        results,
        bounds,
        stats_csv: stats,
        summary,
    })
}

/// Writes a CLI sweep's artifacts to `<out>/<name>/`.
pub fn write_sweep(name: &str, doc: &ConfigDoc, sweep: &SweepResult, out: &Path) -> Result<PathBuf> {
    let dir = out.join(name);
    write_traces(&dir, &sweep.rows)?;
    write_atomic(&dir.join("stats.csv"), stats_csv(&stats_rows(&sweep.rows)).as_bytes())?;
    let ex = Experiment::from_doc(doc)?;
    let nodes: Vec<String> = sweep
        .rows
        .iter()
        .find_map(|r| r.outcome.as_ref().ok())
        .map(|d| d.waveforms.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let wanted = if ex.plot.nodes.is_empty() { nodes } else { ex.plot.nodes.clone() };
    for node in wanted {
        let metric = format!("{node}.v_max");
        let fig = metric_figure(&metric, &sweep.axis.param, &format!("{node} maximum (V)"), &sweep.rows, None);
        if let Ok(svg) = render_svg(&fig) {
            write_atomic(&dir.join(format!("plot_{}.svg", file_stem(&metric))), svg.as_bytes())?;
        }
    }
    let summary = summary_text(name, &sweep.rows, &[]);
    write_atomic(&dir.join("summary"), summary.as_bytes())?;
    Ok(dir)
}

fn write_traces(dir: &Path, results: &[PointResult]) -> Result<()> {
    for r in results {
        if let Ok(d) = &r.outcome {
            let path = dir.join(format!("trace_{}.csv", file_stem(&r.point.label)));
            write_atomic(&path, d.trace.to_csv().as_bytes())?;
        }
    }
    Ok(())
}

pub fn summary_text(name: &str, results: &[PointResult], bounds: &[BoundOutcome]) -> String {
    let mut s = String::new();
    let failed: Vec<&PointResult> = results.iter().filter(|r| r.outcome.is_err()).collect();
    let _ = writeln!(s, "preset: {name}");
    let _ = writeln!(s, "points: {} ({} failed)", results.len(), failed.len());
    for r in &failed {
        if let Err(e) = &r.outcome {
            let _ = writeln!(s, "ERROR {}: {e}", r.point.label);
        }
    }
    for b in bounds {
        let _ = writeln!(
            s,
            "{} {}: {} [{}]",
            if b.pass { "PASS" } else { "FAIL" },
            b.name,
            b.expr,
            b.detail
        );
    }
    let verdict = if !failed.is_empty() {
        "SOLVER FAILURE"
    } else if bounds.iter().any(|b| !b.pass) {
        "FAIL"
    } else {
        "PASS"
    };
    let _ = writeln!(s, "result: {verdict}");
    s
}

fn metric_figure(metric: &str, x_label: &str, y_label: &str, results: &[PointResult], rule: Option<(f64, String)>) -> Figure {
    let mut series: Vec<Series> = Vec::new();
    for r in results.iter().filter(|r| r.point.plotted) {
        let (Some(x), Ok(d)) = (r.point.value, &r.outcome) else {
            continue;
        };
        let Some(&y) = d.metrics.get(metric) else {
            continue;
        };
        let label = r
            .point
            .label
            .split_once('/')
            .map(|(s, _)| s.to_string())
            .unwrap_or_else(|| metric.to_string());
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series {
                label,
                points: vec![(x, y)],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Figure {
        title: metric.to_string(),
        x_label: x_label.to_string(),
        y_label: y_label.to_string(),
        series,
        rule,
    }
}

fn figures(ex: &Experiment, results: &[PointResult]) -> Vec<(String, Figure)> {
    let mut out = Vec::new();
    if ex.kind == ExperimentKind::Sweep {
        if let (Some(metric), Some(axis)) = (&ex.plot.metric, &ex.axis) {
            let y_label = if ex.plot.y_label.is_empty() {
                metric.clone()
            } else {
                ex.plot.y_label.clone()
            };
            let rule = ex.plot.rule_y.map(|y| (y, ex.plot.rule_label.clone()));
            out.push((file_stem(metric), metric_figure(metric, &axis.param, &y_label, results, rule)));
        }
    }
    for node in &ex.plot.nodes {
        let mut series = Vec::new();
        for r in results {
            let Ok(d) = &r.outcome else { continue };
            let Ok(values) = d.trace.node(node) else { continue };
            let t0 = d.trace.times.first().copied().unwrap_or(0.0);
            series.push(Series {
                label: r.point.label.clone(),
                points: d.trace.times.iter().zip(values).map(|(t, v)| ((t - t0) * 1e9, *v)).collect(),
            });
        }
        out.push((
            file_stem(node),
            Figure {
                title: node.clone(),
                x_label: "time (ns)".into(),
                y_label: format!("{node} (V)"),
                series,
                rule: None,
            },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_preset_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(matches!(run_preset("nope", &out, 1), Err(Error::UnknownPreset(_))));
        assert!(!out.exists());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("rails.v_dsil=3/pwm.frequency_hz=1e6"), "rails.v_dsil_3_pwm.frequency_hz_1e6");
    }
}
