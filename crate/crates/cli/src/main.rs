//! `bspop`: run, compare, sweep and plot closed-loop planner experiments.
//!
//! Exit codes: 0 on completion (infeasible or timed-out runs included), 2 for
//! configuration errors, 3 for file-system errors.

mod config;
mod error;
mod plot;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bspop_core::simharness::{
    heading_sweep_with_threads, run_closed_loop, write_trajectory_csv, PlannerKind, RunMetrics, Scenario,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{default_variants, load_scenario, ExperimentConfig, Format, Overrides, SweepSpec, Variant};
use error::CliError;
use plot::Trajectory;
use report::{RunRow, SummaryRow};

#[derive(Parser)]
#[command(
    name = "bspop",
    version,
    about = "Closed-loop experiments with spline and discrete-time planners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or a heading sweep of it with --sweep.
    Run {
        #[command(flatten)]
        common: Common,
        /// Heading sweep as min:max:step (radians).
        #[arg(long)]
        sweep: Option<SweepSpec>,
    },
    /// Heading sweep over [min, max] (default the full circle in 0.1 rad steps).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -std::f64::consts::PI, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Run several planner variants on a shared scenario and tabulate them.
    Compare {
        /// Experiment config (JSON); replaces --scenario and --variant.
        #[arg(long, conflicts_with_all = ["variant"])]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Variant as planner[:rate], repeatable; defaults to baseline 10/20/50 Hz and bspop 10 Hz.
        #[arg(long)]
        variant: Vec<Variant>,
        #[arg(long)]
        sweep: Option<SweepSpec>,
    },
    /// Render trajectory CSVs over a scenario's obstacles as SVG.
    Plot {
        #[arg(long)]
        scenario: PathBuf,
        /// Output SVG file.
        #[arg(long)]
        out: PathBuf,
        trajectories: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Baseline,
    Bspop,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    planner: Option<PlannerArg>,
    /// Planner rate in Hz.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    latency_aware: bool,
    /// Initial heading in radians, replacing the scenario's.
    #[arg(long, allow_hyphen_values = true)]
    heading: Option<f64>,
    /// Simulated time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            planner: self.planner.map(|p| match p {
                PlannerArg::Baseline => PlannerKind::Baseline,
                PlannerArg::Bspop => PlannerKind::Bspop,
            }),
            rate: self.rate,
            degree: self.degree,
            points: self.points,
            weights: None,
        }
    }

    /// Simulation-level settings shared by every variant.
    fn apply_sim(&self, sc: &mut Scenario) {
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if self.latency_aware {
            sc.sim.latency_aware = true;
        }
        if let Some(h) = self.heading {
            *sc = sc.with_heading(h);
        }
        if let Some(t) = self.timeout {
            sc.sim.timeout = t;
        }
    }

    fn scenario_path(&self) -> Result<&Path, CliError> {
        self.scenario
            .as_deref()
            .ok_or_else(|| CliError::Config("--scenario is required".into()))
    }
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var("BSPOP_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "BSPOP_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn validated(sc: Scenario, path: &Path) -> Result<Scenario, CliError> {
    sc.validate().map_err(|e| CliError::scenario(path, e))?;
    Ok(sc)
}

fn execute(sc: &Scenario, sweep: Option<SweepSpec>) -> Result<Vec<RunMetrics>, CliError> {
    match sweep {
        None => Ok(vec![run_closed_loop(sc)]),
        Some(s) => {
            s.validate()?;
            Ok(heading_sweep_with_threads(sc, s.min, s.max, s.step, threads()?))
        }
    }
}

fn file_stem(idx: usize, m: &RunMetrics) -> String {
    let raw = format!("{idx:03}_{}_{}hz_h{:+.2}", m.planner, m.rate, m.initial_heading);
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "+-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn csv_bytes<R: serde::Serialize>(rows: &[R]) -> Vec<u8> {
    let mut buf = Vec::new();
    report::write_csv(rows, &mut buf).expect("in-memory csv");
    buf
}

/// Writes one trajectory CSV per run and returns the per-run rows.
fn write_runs(out: &Path, runs: &[(String, RunMetrics)], formats: &[Format]) -> Result<Vec<RunRow>, CliError> {
    let dir = out.join("trajectories");
    let want_csv = formats.contains(&Format::Csv);
    if want_csv {
        create_dir(&dir)?;
    }
    let mut rows = Vec::with_capacity(runs.len());
    for (idx, (label, m)) in runs.iter().enumerate() {
        let name = format!("{}.csv", file_stem(idx, m));
        if want_csv {
            let path = dir.join(&name);
            let mut buf = Vec::new();
            write_trajectory_csv(m, &mut buf).map_err(|e| CliError::Config(e.to_string()))?;
            write_file(&path, &buf)?;
        }
        rows.push(RunRow::new(label, m, &format!("trajectories/{name}")));
    }
    Ok(rows)
}

fn overlay(sc: &Scenario, runs: &[(String, RunMetrics)]) -> String {
    let traj: Vec<Trajectory> = runs
        .iter()
        .enumerate()
        .map(|(i, (_, m))| Trajectory::from_log(&file_stem(i, m), &m.log, m.reached()))
        .collect();
    plot::render_scenario(sc, &traj)
}

fn cmd_run(common: &Common, sweep: Option<SweepSpec>, svg_name: &str) -> Result<(), CliError> {
    let path = common.scenario_path()?;
    let mut sc = load_scenario(path)?;
    common.overrides().apply(&mut sc);
    common.apply_sim(&mut sc);
    let sc = validated(sc, path)?;
    let runs: Vec<(String, RunMetrics)> = execute(&sc, sweep)?
        .into_iter()
        .map(|m| (m.planner.clone(), m))
        .collect();

    create_dir(&common.out)?;
    let formats = [Format::Csv, Format::Svg];
    let rows = write_runs(&common.out, &runs, &formats)?;
    write_file(&common.out.join("metrics.csv"), &csv_bytes(&rows))?;
    write_file(&common.out.join(svg_name), overlay(&sc, &runs).as_bytes())?;
    print!("{}", report::run_table(&rows));
    if runs.len() > 1 {
        let reached = runs.iter().filter(|(_, m)| m.reached()).count();
        println!("reached {reached}/{}", runs.len());
    }
    Ok(())
}

fn cmd_compare(
    config: Option<&Path>,
    common: &Common,
    variants: &[Variant],
    sweep: Option<SweepSpec>,
) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            scenario: common.scenario_path()?.to_path_buf(),
            variants: variants.to_vec(),
            sweep,
            out: common.out.clone(),
            formats: vec![Format::Csv, Format::Svg],
        },
    };
    let variants = if cfg.variants.is_empty() {
        default_variants()
    } else {
        cfg.variants.clone()
    };
    let shared = load_scenario(&cfg.scenario)?;

    let mut runs: Vec<(String, RunMetrics)> = Vec::new();
    let mut summaries = Vec::new();
    for v in &variants {
        let path = v.scenario.as_deref().unwrap_or(&cfg.scenario);
        let mut sc = if v.scenario.is_some() {
            load_scenario(path)?
        } else {
            shared.clone()
        };
        common.overrides().apply(&mut sc);
        v.overrides.apply(&mut sc);
        common.apply_sim(&mut sc);
        let sc = validated(sc, path)?;
        let label = v
            .label
            .clone()
            .unwrap_or_else(|| format!("{} {} Hz", sc.planner.spec().label(), sc.planner.rate));
        let metrics = execute(&sc, cfg.sweep.or(sweep))?;
        summaries.push(SummaryRow::new(&label, &metrics));
        runs.extend(metrics.into_iter().map(|m| (label.clone(), m)));
    }

    create_dir(&cfg.out)?;
    // the effective experiment, so the comparison can be rerun with --config
    let effective = ExperimentConfig {
        variants,
        sweep: cfg.sweep.or(sweep),
        ..cfg.clone()
    };
    write_file(&cfg.out.join("experiment.json"), effective.to_json().as_bytes())?;
    let rows = write_runs(&cfg.out, &runs, &cfg.formats)?;
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out.join("compare.csv"), &csv_bytes(&summaries))?;
        write_file(&cfg.out.join("metrics.csv"), &csv_bytes(&rows))?;
    }
    if cfg.wants(Format::Svg) {
        write_file(&cfg.out.join("compare.svg"), overlay(&shared, &runs).as_bytes())?;
    }
    print!("{}", report::summary_table(&summaries));
    Ok(())
}

fn cmd_plot(scenario: &Path, out: &Path, files: &[PathBuf]) -> Result<(), CliError> {
    let sc = load_scenario(scenario)?;
    let traj = files
        .iter()
        .map(|f| Trajectory::read_csv(f, sc.goal, sc.sim.goal_radius))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(out, plot::render_scenario(&sc, &traj).as_bytes())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, sweep } => {
            let svg = if sweep.is_some() { "sweep.svg" } else { "run.svg" };
            cmd_run(&common, sweep, svg)
        }
        Command::Sweep { common, min, max, step } => cmd_run(&common, Some(SweepSpec { min, max, step }), "sweep.svg"),
        Command::Compare {
            config,
            common,
            variant,
            sweep,
        } => cmd_compare(config.as_deref(), &common, &variant, sweep),
        Command::Plot {
            scenario,
            out,
            trajectories,
        } => cmd_plot(&scenario, &out, &trajectories),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
