//! Metrics rows, CSV output and aligned-text tables.

use std::io::Write;

use bspop_core::simharness::{RunMetrics, TimeStats};
use serde::Serialize;

/// One closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub label: String,
    pub scenario: String,
    pub planner: String,
    pub rate: f64,
    pub heading: f64,
    pub outcome: String,
    pub duration: f64,
    pub length: f64,
    pub solves: usize,
    pub solve_mean: f64,
    pub solve_std: f64,
    pub solve_max: f64,
    pub control_vars: usize,
    pub total_vars: usize,
    pub eq_constraints: usize,
    pub ineq_constraints: usize,
    pub max_heading_rate: f64,
    pub trajectory: String,
}

impl RunRow {
    pub fn new(label: &str, m: &RunMetrics, trajectory: &str) -> Self {
        Self {
            label: label.to_string(),
            scenario: m.scenario.clone(),
            planner: m.planner.clone(),
            rate: m.rate,
            heading: m.initial_heading,
            outcome: m.outcome.as_str().to_string(),
            duration: m.duration,
            length: m.length,
            solves: m.solve_times.len(),
            solve_mean: m.solve_stats.mean,
            solve_std: m.solve_stats.std,
            solve_max: m.solve_stats.max,
            control_vars: m.control_vars,
            total_vars: m.total_vars,
            eq_constraints: m.eq_constraints,
            ineq_constraints: m.ineq_constraints,
            max_heading_rate: m.max_heading_rate,
            trajectory: trajectory.to_string(),
        }
    }
}

/// One planner variant, aggregated over its runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub scenario: String,
    pub planner: String,
    pub rate: f64,
    pub runs: usize,
    pub reached: usize,
    pub solve_mean: f64,
    pub solve_std: f64,
    /// Mean length over reached runs, 0 when none reached.
    pub length_mean: f64,
    pub control_vars: usize,
    pub total_vars: usize,
}

impl SummaryRow {
    pub fn new(label: &str, runs: &[RunMetrics]) -> Self {
        let first = &runs[0];
        let times: Vec<f64> = runs.iter().flat_map(|m| m.solve_times.iter().copied()).collect();
        let stats = TimeStats::from_samples(&times);
        let reached: Vec<&RunMetrics> = runs.iter().filter(|m| m.reached()).collect();
        let length_mean = if reached.is_empty() {
            0.0
        } else {
            reached.iter().map(|m| m.length).sum::<f64>() / reached.len() as f64
        };
        Self {
            label: label.to_string(),
            scenario: first.scenario.clone(),
            planner: first.planner.clone(),
            rate: first.rate,
            runs: runs.len(),
            reached: reached.len(),
            solve_mean: stats.mean,
            solve_std: stats.std,
            length_mean,
            control_vars: first.control_vars,
            total_vars: first.total_vars,
        }
    }
}

pub fn write_csv<W: Write, R: Serialize>(rows: &[R], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns padded to their widest cell; numbers right-aligned.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| {
                if numeric(c) {
                    format!("{c:>w$}")
                } else {
                    format!("{c:<w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn run_table(rows: &[RunRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                format!("{:.2}", r.heading),
                r.outcome.clone(),
                format!("{:.3}", r.length),
                format!("{:.2}", r.duration),
                format!("{:.4}", r.solve_mean),
                format!("{:.4}", r.solve_std),
                format!("{} ({})", r.control_vars, r.total_vars),
            ]
        })
        .collect();
    text_table(
        &[
            "planner",
            "heading",
            "outcome",
            "length_m",
            "time_s",
            "solve_mean_s",
            "solve_std_s",
            "variables",
        ],
        &body,
    )
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.scenario.clone(),
                format!("{}/{}", r.reached, r.runs),
                format!("{:.4}", r.solve_mean),
                format!("{:.4}", r.solve_std),
                format!("{:.3}", r.length_mean),
                format!("{} ({})", r.control_vars, r.total_vars),
            ]
        })
        .collect();
    text_table(
        &[
            "planner",
            "scenario",
            "reached",
            "solve_mean_s",
            "solve_std_s",
            "length_m",
            "variables",
        ],
        &body,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = text_table(
            &["a", "value"],
            &[vec!["x".into(), "1.5".into()], vec!["long".into(), "10.25".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a     value");
        assert_eq!(lines[1], "----  -----");
        assert_eq!(lines[2], "x       1.5");
        assert_eq!(lines[3], "long  10.25");
    }
}
