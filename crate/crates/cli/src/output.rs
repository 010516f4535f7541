use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::Path;

use hbpsim::metrics::{csv_row, Report, RunRecord, CSV_COLUMNS};

use crate::config::{axis_text, axis_value, Axis};
use crate::plot::{line_plot, Series};

type Res = Result<(), Box<dyn Error>>;

pub fn write_counters(path: &Path, reports: &[Report]) -> Res {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.write_record(csv_row(r))?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Res {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `events.csv`, `steals.csv` and `tasks.csv` of a traced run.
pub fn write_traces(dir: &Path, run: &RunRecord) -> Res {
    write_rows(&dir.join("events.csv"), run.ms.events())?;
    write_rows(&dir.join("steals.csv"), &run.out.steal_log)?;
    write_rows(&dir.join("tasks.csv"), &run.out.task_log)?;
    Ok(())
}

pub fn write_json(path: &Path, json: &str) -> Res {
    fs::write(path, format!("{json}\n"))?;
    Ok(())
}

/// Per-core miss breakdown of a single run.
pub fn run_plots(dir: &Path, r: &Report) -> Res {
    let k = &r.counters;
    let per_core = |label: &str, v: &[u64]| Series {
        label: label.to_string(),
        points: v
            .iter()
            .enumerate()
            .map(|(c, &x)| (c as f64, x as f64))
            .collect(),
    };
    line_plot(
        &dir.join("plot_misses_per_core.svg"),
        &format!(
            "{} {} p={} n={}",
            r.config.alg,
            r.config.sched.as_str(),
            r.config.p,
            r.config.n
        ),
        "core",
        "misses",
        &[
            per_core("cold", &k.cold_misses),
            per_core("capacity", &k.capacity_misses),
            per_core("invalidation", &k.invalidation_misses),
        ],
        None,
    )
}

/// Metrics plotted against the swept axis.
const METRICS: &[(&str, &str)] = &[
    ("misses", "total misses"),
    ("invalidation_misses", "invalidation misses"),
    ("cache_excess", "cache excess"),
    ("makespan", "makespan (ticks)"),
];

fn metric(r: &Report, name: &str) -> Option<f64> {
    let k = &r.counters;
    Some(match name {
        "misses" => k.total_misses() as f64,
        "invalidation_misses" => k.total_invalidation() as f64,
        "cache_excess" => r.excess.as_ref()?.cache_excess as f64,
        "makespan" => r.sched.makespan as f64,
        _ => return None,
    })
}

/// One SVG per metric, plus bound ratios over their frozen constants.
/// The x axis is the first numeric axis (log2 for n, M, B); the other
/// swept axes split the points into series.
pub fn sweep_plots(dir: &Path, axes: &[Axis], reports: &[Report]) -> Res {
    let x_axis = axes.iter().find(|a| {
        reports
            .iter()
            .all(|r| axis_value(&r.config, &a.key).is_some())
    });
    let log_x = x_axis.is_some_and(|a| matches!(a.key.as_str(), "n" | "M" | "B"));
    let x_of = |r: &Report, i: usize| match x_axis {
        Some(a) => {
            let v = axis_value(&r.config, &a.key).unwrap_or(0.0);
            if log_x {
                v.log2()
            } else {
                v
            }
        }
        None => i as f64,
    };
    let x_desc = match x_axis {
        Some(a) if log_x => format!("log2 {}", a.key),
        Some(a) => a.key.clone(),
        None => "point".to_string(),
    };
    let group = |r: &Report| {
        let parts: Vec<String> = axes
            .iter()
            .filter(|a| Some(&a.key) != x_axis.map(|x| &x.key) && a.values.len() > 1)
            .map(|a| format!("{}={}", a.key, axis_text(&r.config, &a.key)))
            .collect();
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(" ")
        }
    };
    for &(name, desc) in METRICS {
        let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for (i, r) in reports.iter().enumerate() {
            if let Some(y) = metric(r, name) {
                by.entry(group(r)).or_default().push((x_of(r, i), y));
            }
        }
        if by.is_empty() {
            continue;
        }
        let series = to_series(by);
        line_plot(
            &dir.join(format!("plot_{name}.svg")),
            desc,
            &x_desc,
            desc,
            &series,
            None,
        )?;
    }
    let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, r) in reports.iter().enumerate() {
        for b in r.bounds.iter().filter(|b| b.skipped.is_none()) {
            let label = format!("{} {}", b.name, group(r));
            by.entry(label)
                .or_default()
                .push((x_of(r, i), b.ratio / b.c_max));
        }
    }
    if !by.is_empty() {
        line_plot(
            &dir.join("plot_bound_ratios.svg"),
            "measured / (c_max x formula)",
            &x_desc,
            "ratio (pass at or below 1)",
            &to_series(by),
            Some(1.0),
        )?;
    }
    Ok(())
}

fn to_series(by: BTreeMap<String, Vec<(f64, f64)>>) -> Vec<Series> {
    by.into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect()
}
