//! Closed-loop simulation of a planner, a rate-limited tracking layer and a
//! kinematic plant.
//!
//! Time is kept in integer nanoseconds. The plant is integrated with RK4 between
//! consecutive events (plant ticks, tracker ticks, planner ticks), so rates need not
//! divide each other.

use std::io::Write;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{CostError, GoalTarget, ObjectiveWeights};
use crate::dynamics::{
    ackermann, diamond_wheel_set, rk4_step, unicycle, Circle, ControlAffineModel, ControlSet, CoordinateBound,
    ModelError, ObstacleField,
};
use crate::linop::Mat;
use crate::nlp::SolverOptions;
use crate::planners::{Integrator, PlanOptions, PlanRequest, PlannedControl, Planner, PlannerSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Unicycle,
    Ackermann { wheelbase: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSetSpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Differential-drive wheel-speed limits.
    Diamond {
        wheel_radius: f64,
        wheel_separation: f64,
        max_wheel_speed: f64,
    },
    /// `a u ≤ b`, one row of `a` per inequality.
    Polytope {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interior: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    #[serde(default)]
    pub circles: Vec<Circle<f64>>,
    /// Linear state bounds (corridor walls, steering limits).
    #[serde(default)]
    pub bounds: Vec<CoordinateBound<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Baseline,
    Bspop,
}

fn default_degree() -> usize {
    3
}
fn default_points() -> usize {
    4
}
fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// Invocation rate in Hz.
    pub rate: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub weights: ObjectiveWeights,
    /// Spline planner transcription grid; the invocation rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_rate: Option<f64>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl PlannerConfig {
    pub fn spec(&self) -> PlannerSpec {
        match self.kind {
            PlannerKind::Baseline => PlannerSpec::Baseline,
            PlannerKind::Bspop => PlannerSpec::Bspop {
                degree: self.degree,
                points: self.points,
            },
        }
    }

    pub fn set_spec(&mut self, spec: PlannerSpec) {
        match spec {
            PlannerSpec::Baseline => self.kind = PlannerKind::Baseline,
            PlannerSpec::Bspop { degree, points } => {
                self.kind = PlannerKind::Bspop;
                self.degree = degree;
                self.points = points;
            }
        }
    }

    pub fn options(&self) -> PlanOptions {
        PlanOptions {
            integrator: self.integrator,
            grid_rate: self.grid_rate,
            solver: self.solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// PD filter on the planned control at the tracker rate.
    #[default]
    Pd,
    /// The plant samples the planned control directly.
    Direct,
}

fn default_tracker_rate() -> f64 {
    400.0
}
fn default_plant_rate() -> f64 {
    1000.0
}
fn default_timeout() -> f64 {
    30.0
}
fn default_goal_radius() -> f64 {
    0.1
}
fn default_kp() -> f64 {
    0.2
}
fn default_kd() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_tracker_rate")]
    pub tracker_rate: f64,
    #[serde(default = "default_plant_rate")]
    pub plant_rate: f64,
    /// Simulated seconds before a run is declared a timeout.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    #[serde(default)]
    pub tracking: TrackingMode,
    #[serde(default = "default_kp")]
    pub kp: f64,
    #[serde(default = "default_kd")]
    pub kd: f64,
    /// Delay plan activation by the measured solve time.
    #[serde(default)]
    pub latency_aware: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tracker_rate: default_tracker_rate(),
            plant_rate: default_plant_rate(),
            timeout: default_timeout(),
            goal_radius: default_goal_radius(),
            tracking: TrackingMode::Pd,
            kp: default_kp(),
            kd: default_kd(),
            latency_aware: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub initial_state: Vec<f64>,
    /// Goal position `(p_x, p_y)`.
    pub goal: [f64; 2],
    #[serde(default)]
    pub obstacles: ObstacleSpec,
    pub control_set: ControlSetSpec,
    pub planner: PlannerConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Self = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(self.schema));
        }
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        let model = self.model()?;
        if self.initial_state.len() != model.dim_x() {
            return bad("initial_state length does not match the model");
        }
        if self.initial_state.iter().chain(&self.goal).any(|v| !v.is_finite()) {
            return bad("initial_state and goal must be finite");
        }
        if self.control_set()?.dim() != model.dim_u() {
            return bad("control set dimension does not match the model");
        }
        self.obstacle_field()?;
        if self
            .obstacles
            .bounds
            .iter()
            .any(|b| b.component >= model.dim_x() || !(b.lower <= b.upper))
        {
            return bad("state bound refers to a missing component or is inverted");
        }
        let p = &self.planner;
        p.weights.validate()?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(p.rate) || !positive(p.horizon) || !p.grid_rate.map_or(true, positive) {
            return bad("planner rate, grid rate and horizon must be positive");
        }
        if (p.horizon * p.rate).round() < 1.0 {
            return bad("planner horizon is shorter than one period");
        }
        if p.kind == PlannerKind::Bspop && p.points < p.degree + 1 {
            return bad("spline planner needs at least degree + 1 control points");
        }
        let s = &self.sim;
        if !positive(s.tracker_rate) || !positive(s.plant_rate) || !positive(s.timeout) || !positive(s.goal_radius) {
            return bad("simulation rates, timeout and goal radius must be positive");
        }
        if s.tracker_rate < p.rate || s.plant_rate < s.tracker_rate {
            return bad("rates must satisfy plant ≥ tracker ≥ planner");
        }
        if !(s.kp >= 0.0 && s.kd >= 0.0) {
            return bad("tracker gains must be non-negative");
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ControlAffineModel<f64>, ModelError> {
        match self.model {
            ModelSpec::Unicycle => Ok(unicycle()),
            ModelSpec::Ackermann { wheelbase } => ackermann(wheelbase),
        }
    }

    pub fn control_set(&self) -> Result<ControlSet<f64>, ModelError> {
        match &self.control_set {
            ControlSetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(ModelError::PolytopeShape {
                        rows: lower.len(),
                        rhs: upper.len(),
                    });
                }
                ControlSet::boxed(lower.clone(), upper.clone())
            }
            ControlSetSpec::Diamond {
                wheel_radius,
                wheel_separation,
                max_wheel_speed,
            } => diamond_wheel_set(*wheel_radius, *wheel_separation, *max_wheel_speed),
            ControlSetSpec::Polytope { a, b, interior } => {
                let cols = a.first().map_or(0, Vec::len);
                if a.iter().any(|r| r.len() != cols) {
                    return Err(ModelError::PolytopeShape {
                        rows: a.len(),
                        rhs: b.len(),
                    });
                }
                ControlSet::polytope(Mat::from_rows(a), b.clone(), interior.clone())
            }
        }
    }

    pub fn obstacle_field(&self) -> Result<ObstacleField<f64>, ModelError> {
        ObstacleField::new(self.obstacles.circles.clone(), self.obstacles.bounds.clone())
    }

    pub fn goal_target(&self) -> GoalTarget<f64> {
        GoalTarget::position(self.goal[0], self.goal[1])
    }

    /// Planning query from `state` with this scenario's environment and planner.
    pub fn plan_request(&self, state: &[f64]) -> Result<PlanRequest, ScenarioError> {
        Ok(PlanRequest {
            state: state.to_vec(),
            goal: self.goal_target(),
            model: self.model()?,
            control_set: self.control_set()?,
            obstacles: self.obstacle_field()?,
            horizon: self.planner.horizon,
            rate: self.planner.rate,
            weights: self.planner.weights,
        })
    }

    /// Copy with the initial heading (state component 2) replaced.
    pub fn with_heading(&self, theta: f64) -> Self {
        let mut sc = self.clone();
        sc.initial_state[2] = theta;
        sc
    }
}

/// Discrete PD filter on a control-space reference.
///
/// `command = r + kp e + kd (e − e_prev) / dt` with `e = r − applied`, then saturated
/// into the control set.
#[derive(Debug, Clone, PartialEq)]
pub struct PdTracker {
    kp: Vec<f64>,
    kd: Vec<f64>,
    dt: f64,
    prev_error: Option<Vec<f64>>,
}

impl PdTracker {
    pub fn new(kp: Vec<f64>, kd: Vec<f64>, rate: f64) -> Self {
        assert_eq!(kp.len(), kd.len(), "gain lengths differ");
        assert!(kp.iter().chain(&kd).all(|g| *g >= 0.0), "gains must be non-negative");
        Self {
            kp,
            kd,
            dt: 1.0 / rate,
            prev_error: None,
        }
    }

    pub fn uniform(dim: usize, kp: f64, kd: f64, rate: f64) -> Self {
        Self::new(vec![kp; dim], vec![kd; dim], rate)
    }

    pub fn step(&mut self, reference: &[f64], applied: &[f64], set: &ControlSet<f64>) -> Vec<f64> {
        let error: Vec<f64> = reference.iter().zip(applied).map(|(r, a)| r - a).collect();
        let prev = self.prev_error.take().unwrap_or_else(|| error.clone());
        let command: Vec<f64> = (0..reference.len())
            .map(|c| reference[c] + self.kp[c] * error[c] + self.kd[c] * (error[c] - prev[c]) / self.dt)
            .collect();
        self.prev_error = Some(error);
        set.saturate(&command)
    }
}

/// Stateless form of one tracker update; `prev_error` is updated in place.
pub fn pd_track(
    reference: &[f64],
    applied: &[f64],
    kp: &[f64],
    kd: &[f64],
    dt: f64,
    prev_error: &mut Option<Vec<f64>>,
    set: &ControlSet<f64>,
) -> Vec<f64> {
    let mut t = PdTracker::new(kp.to_vec(), kd.to_vec(), 1.0 / dt);
    t.prev_error = prev_error.take();
    let out = t.step(reference, applied, set);
    *prev_error = t.prev_error;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Infeasible,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Reached => "reached",
            Self::Infeasible => "infeasible",
            Self::Timeout => "timeout",
        }
    }
}

/// One plant-rate log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    pub cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl TimeStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub planner: String,
    pub rate: f64,
    pub initial_heading: f64,
    pub outcome: Outcome,
    /// Simulated time at the end of the run.
    pub duration: f64,
    pub length: f64,
    /// Per-cycle wall-clock solve times in seconds.
    pub solve_times: Vec<f64>,
    pub solve_stats: TimeStats,
    pub control_vars: usize,
    pub total_vars: usize,
    pub eq_constraints: usize,
    pub ineq_constraints: usize,
    /// Largest `|θ̇|` over the log, from consecutive heading samples.
    pub max_heading_rate: f64,
    /// Largest control-set violation over every applied control.
    pub max_control_violation: f64,
    pub log: Vec<LogRow>,
}

impl RunMetrics {
    pub fn reached(&self) -> bool {
        self.outcome == Outcome::Reached
    }

    /// Equality of everything except wall-clock timing.
    pub fn same_run(&self, other: &Self) -> bool {
        self.outcome == other.outcome
            && self.length == other.length
            && self.log == other.log
            && self.control_vars == other.control_vars
            && self.total_vars == other.total_vars
            && self.solve_times.len() == other.solve_times.len()
    }
}

/// `Σ ‖p_{k+1} − p_k‖` over the position components of `log`.
pub fn path_length(log: &[LogRow]) -> f64 {
    log.windows(2)
        .map(|w| {
            let dx = w[1].state[0] - w[0].state[0];
            let dy = w[1].state[1] - w[0].state[1];
            dx.hypot(dy)
        })
        .sum()
}

fn period_ns(rate: f64) -> u64 {
    (1e9 / rate).round().max(1.0) as u64
}

struct ActivePlan {
    control: PlannedControl,
    start: u64,
}

impl ActivePlan {
    fn eval(&self, t: u64) -> Vec<f64> {
        self.control.eval(t.saturating_sub(self.start) as f64 * 1e-9)
    }
}

/// Runs the scenario's planner in closed loop until the goal is reached, a plan
/// fails, or the timeout elapses.
pub fn run_closed_loop(scenario: &Scenario) -> RunMetrics {
    let model = scenario.model().expect("validated scenario");
    let set = scenario.control_set().expect("validated scenario");
    let goal = scenario.goal_target();
    let sim = &scenario.sim;
    let nu = model.dim_u();

    let plant_ns = period_ns(sim.plant_rate);
    let tracker_ns = period_ns(sim.tracker_rate);
    let planner_ns = period_ns(scenario.planner.rate);
    let end_ns = (sim.timeout * 1e9).round() as u64;

    let mut planner = Planner::new(scenario.planner.spec(), scenario.planner.options());
    let mut tracker = PdTracker::uniform(nu, sim.kp, sim.kd, sim.tracker_rate);
    let mut x = scenario.initial_state.clone();
    let mut t: u64 = 0;
    let (mut next_plant, mut next_tracker, mut next_plan) = (0u64, 0u64, 0u64);
    let mut active: Option<ActivePlan> = None;
    let mut pending: Option<ActivePlan> = None;
    let mut command = vec![0.0; nu];
    let mut cycle = 0usize;
    let mut solve_times = Vec::new();
    let mut counts = (0, 0, 0, 0);
    let mut log = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    let mut outcome = Outcome::Timeout;

    loop {
        if t == next_plant {
            let reached = goal.distance(&x) <= sim.goal_radius;
            let u = match (sim.tracking, &active) {
                (TrackingMode::Direct, Some(p)) => set.saturate(&p.eval(t)),
                _ => command.clone(),
            };
            max_violation = max_violation.max(set.max_violation(&u));
            log.push(LogRow {
                t: t as f64 * 1e-9,
                state: x.clone(),
                control: u,
                cycle: cycle.saturating_sub(1),
            });
            next_plant += plant_ns;
            if reached {
                outcome = Outcome::Reached;
                break;
            }
            if t >= end_ns {
                break;
            }
        }
        if let Some(p) = pending.take() {
            if p.start <= t {
                active = Some(p);
            } else {
                pending = Some(p);
            }
        }
        if t == next_plan {
            let req = scenario.plan_request(&x).expect("validated scenario");
            let plan = match planner.plan(&req) {
                Ok(p) => p,
                Err(_) => {
                    outcome = Outcome::Infeasible;
                    break;
                }
            };
            solve_times.push(plan.solve_time.as_secs_f64());
            if cycle == 0 {
                counts = (plan.num_control_vars, plan.num_vars, plan.num_eq, plan.num_ineq);
            }
            cycle += 1;
            if !plan.usable() {
                outcome = Outcome::Infeasible;
                break;
            }
            let start = if sim.latency_aware && active.is_some() {
                t + plan.solve_time.as_nanos() as u64
            } else {
                t
            };
            let next = ActivePlan {
                control: plan.control,
                start,
            };
            if start == t {
                active = Some(next);
            } else {
                pending = Some(next);
            }
            next_plan += planner_ns;
        }
        if t == next_tracker {
            if let (TrackingMode::Pd, Some(p)) = (sim.tracking, &active) {
                let reference = p.eval(t);
                command = tracker.step(&reference, &command, &set);
            }
            next_tracker += tracker_ns;
        }

        let mut t_next = next_plant.min(next_tracker).min(next_plan);
        if let Some(p) = &pending {
            t_next = t_next.min(p.start.max(t + 1));
        }
        let dt = (t_next - t) as f64 * 1e-9;
        let t0 = t as f64 * 1e-9;
        x = match (sim.tracking, &active) {
            (TrackingMode::Direct, Some(p)) => match &p.control {
                // held values must not switch at a step's right edge
                PlannedControl::Baseline { .. } => {
                    let u = set.saturate(&p.eval(t + (t_next - t) / 2));
                    rk4_step(model.inner(), &x, |_| u.clone(), t0, dt)
                }
                PlannedControl::Bspop { .. } => {
                    let offset = p.start as f64 * 1e-9;
                    rk4_step(model.inner(), &x, |s| set.saturate(&p.control.eval(s - offset)), t0, dt)
                }
            },
            _ => {
                let u = command.clone();
                rk4_step(model.inner(), &x, |_| u.clone(), t0, dt)
            }
        };
        t = t_next;
    }

    let max_heading_rate = log
        .windows(2)
        .map(|w| (w[1].state[2] - w[0].state[2]).abs() / (w[1].t - w[0].t))
        .fold(0.0, f64::max);
    RunMetrics {
        scenario: scenario.name.clone(),
        planner: scenario.planner.spec().label().to_string(),
        rate: scenario.planner.rate,
        initial_heading: scenario.initial_state[2],
        outcome,
        duration: t as f64 * 1e-9,
        length: path_length(&log),
        solve_stats: TimeStats::from_samples(&solve_times),
        solve_times,
        control_vars: counts.0,
        total_vars: counts.1,
        eq_constraints: counts.2,
        ineq_constraints: counts.3,
        max_heading_rate,
        max_control_violation: if log.is_empty() { 0.0 } else { max_violation },
        log,
    }
}

/// Headings `θ_min + i·step` for every `i` with the value not above `θ_max`.
pub fn sweep_headings(theta_min: f64, theta_max: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "sweep step must be positive");
    let count = ((theta_max - theta_min) / step + 1e-9).floor().max(0.0) as usize + 1;
    (0..count).map(|i| theta_min + i as f64 * step).collect()
}

/// Closed-loop runs over initial headings, ordered by heading.
pub fn heading_sweep(base: &Scenario, theta_min: f64, theta_max: f64, step: f64) -> Vec<RunMetrics> {
    heading_sweep_with_threads(base, theta_min, theta_max, step, None)
}

/// As [`heading_sweep`] with at most `threads` workers (the global pool when `None`).
pub fn heading_sweep_with_threads(
    base: &Scenario,
    theta_min: f64,
    theta_max: f64,
    step: f64,
    threads: Option<usize>,
) -> Vec<RunMetrics> {
    let headings = sweep_headings(theta_min, theta_max, step);
    let run = || -> Vec<RunMetrics> {
        headings
            .par_iter()
            .map(|&th| run_closed_loop(&base.with_heading(th)))
            .collect()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}

/// Writes `t, x0.., u0.., cycle` rows for one run.
pub fn write_trajectory_csv<W: Write>(metrics: &RunMetrics, out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    let (nx, nu) = metrics.log.first().map_or((0, 0), |r| (r.state.len(), r.control.len()));
    let mut header = vec!["t".to_string()];
    header.extend((0..nx).map(|i| format!("x{i}")));
    header.extend((0..nu).map(|i| format!("u{i}")));
    header.push("cycle".into());
    w.write_record(&header)?;
    for row in &metrics.log {
        let mut rec = vec![format!("{}", row.t)];
        rec.extend(row.state.iter().map(|v| format!("{v}")));
        rec.extend(row.control.iter().map(|v| format!("{v}")));
        rec.push(row.cycle.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean solve time as a [`Duration`].
pub fn mean_solve_time(metrics: &RunMetrics) -> Duration {
    Duration::from_secs_f64(metrics.solve_stats.mean)
}
