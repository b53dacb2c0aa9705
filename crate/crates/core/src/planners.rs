//! Receding-horizon planners: a discrete-time baseline and the spline planner.
//!
//! Both transcribe the horizon onto a uniform grid of `N + 1` states linked by
//! integration defects. The baseline optimizes `N` zero-order-hold controls; the
//! spline planner optimizes the control points of a clamped B-spline defined over
//! the whole horizon, so its control block does not depend on `N`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{control_cost, control_cost_gradient, precompute_lambda, GoalTarget, LambdaTable, ObjectiveWeights};
use crate::dynamics::{rk4_sensitivity, ControlAffineModel, ControlSet, ObstacleField, RateJacobian};
use crate::linop::Mat;
use crate::nlp::{
    count_variables, solve, BlockKind, Derivatives, Evaluation, NlpProblem, NlpSolution, SolveStatus, SolverOptions,
    VariableLayout,
};
use crate::splinecore::{ControlSpline, SplineBasis, SplineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("horizon {horizon} s at {rate} Hz leaves no grid step")]
    EmptyGrid { horizon: f64, rate: f64 },
    #[error("current state is not finite")]
    NonFiniteState,
    #[error("state has {got} components, model expects {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("control set has dimension {got}, model expects {expected}")]
    ControlDimension { expected: usize, got: usize },
    #[error("need at least degree + 1 = {need} control points, got {got}")]
    TooFewControlPoints { need: usize, got: usize },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// One planning query.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub state: Vec<f64>,
    pub goal: GoalTarget<f64>,
    pub model: ControlAffineModel<f64>,
    pub control_set: ControlSet<f64>,
    pub obstacles: ObstacleField<f64>,
    /// Prediction horizon `T` in seconds.
    pub horizon: f64,
    /// Planner invocation rate in Hz.
    pub rate: f64,
    pub weights: ObjectiveWeights,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(PlanError::BadHorizon(self.horizon));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(PlanError::BadRate(self.rate));
        }
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(PlanError::NonFiniteState);
        }
        if self.state.len() != self.model.dim_x() {
            return Err(PlanError::StateDimension {
                expected: self.model.dim_x(),
                got: self.state.len(),
            });
        }
        if self.control_set.dim() != self.model.dim_u() {
            return Err(PlanError::ControlDimension {
                expected: self.model.dim_u(),
                got: self.control_set.dim(),
            });
        }
        Ok(())
    }
}

/// Defect integrator for the baseline transcription.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    /// Single forward-Euler step per interval.
    Euler,
}

/// Which planner to run and its shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerSpec {
    Baseline,
    Bspop { degree: usize, points: usize },
}

impl PlannerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Bspop { .. } => "bspop",
        }
    }
}

/// Settings shared by every planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub integrator: Integrator,
    /// Transcription grid rate for the spline planner; the invocation rate when `None`.
    pub grid_rate: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4,
            grid_rate: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum ControlParam {
    Hold {
        integrator: Integrator,
    },
    Spline {
        basis: SplineBasis<f64>,
        lambda: LambdaTable<f64>,
    },
}

/// Direct transcription of one planning query as an [`NlpProblem`].
///
/// Decision vector: `[x_0, …, x_N, c_0, …, c_{K−1}]` where the `c_j` are either the
/// held controls (`K = N`) or the spline control points (`K = n + 1`).
#[derive(Debug, Clone)]
pub struct Transcription {
    layout: VariableLayout,
    lower: Vec<f64>,
    upper: Vec<f64>,
    model: ControlAffineModel<f64>,
    x0: Vec<f64>,
    goal: GoalTarget<f64>,
    weights: ObjectiveWeights,
    set_a: Mat<f64>,
    set_b: Vec<f64>,
    obstacles: ObstacleField<f64>,
    param: ControlParam,
    nx: usize,
    nu: usize,
    steps: usize,
    dt: f64,
    n_controls: usize,
}

fn grid_steps(horizon: f64, rate: f64) -> Result<usize, PlanError> {
    let n = (horizon * rate).round();
    if n < 1.0 {
        return Err(PlanError::EmptyGrid { horizon, rate });
    }
    Ok(n as usize)
}

impl Transcription {
    pub fn baseline(req: &PlanRequest, integrator: Integrator) -> Result<Self, PlanError> {
        req.validate()?;
        let steps = grid_steps(req.horizon, req.rate)?;
        Ok(Self::assemble(req, steps, steps, ControlParam::Hold { integrator }))
    }

    pub fn bspop(req: &PlanRequest, degree: usize, points: usize, grid_rate: Option<f64>) -> Result<Self, PlanError> {
        req.validate()?;
        if points < degree + 1 {
            return Err(PlanError::TooFewControlPoints {
                need: degree + 1,
                got: points,
            });
        }
        let grid_rate = grid_rate.unwrap_or(req.rate);
        if !(grid_rate > 0.0 && grid_rate.is_finite()) {
            return Err(PlanError::BadRate(grid_rate));
        }
        let steps = grid_steps(req.horizon, grid_rate)?;
        let basis = SplineBasis::clamped_uniform(degree, points, req.horizon)?;
        let lambda = precompute_lambda(&basis);
        Ok(Self::assemble(
            req,
            steps,
            points,
            ControlParam::Spline { basis, lambda },
        ))
    }

    fn assemble(req: &PlanRequest, steps: usize, n_controls: usize, param: ControlParam) -> Self {
        let nx = req.model.dim_x();
        let nu = req.model.dim_u();
        let mut layout = VariableLayout::new();
        layout.push("states", BlockKind::State, (steps + 1) * nx);
        layout.push("controls", BlockKind::Control, n_controls * nu);
        let total = layout.total();
        let mut lower = vec![f64::NEG_INFINITY; total];
        let mut upper = vec![f64::INFINITY; total];
        // x_0 is pinned by an equality, so bounds start at k = 1
        for k in 1..=steps {
            for b in &req.obstacles.corridor {
                let j = k * nx + b.component;
                lower[j] = lower[j].max(b.lower);
                upper[j] = upper[j].min(b.upper);
            }
        }
        let (set_a, set_b) = req.control_set.halfspaces();
        Self {
            layout,
            lower,
            upper,
            model: req.model.clone(),
            x0: req.state.clone(),
            goal: req.goal.clone(),
            weights: req.weights,
            set_a,
            set_b,
            obstacles: req.obstacles.clone(),
            param,
            nx,
            nu,
            steps,
            dt: req.horizon / steps as f64,
            n_controls,
        }
    }

    /// Number of grid intervals `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn grid_dt(&self) -> f64 {
        self.dt
    }

    /// Number of control vectors in the decision vector.
    pub fn num_control_vectors(&self) -> usize {
        self.n_controls
    }

    fn control_offset(&self) -> usize {
        (self.steps + 1) * self.nx
    }

    fn control_rows(&self) -> usize {
        self.n_controls * self.set_a.rows()
    }

    /// `(x_{k+1}, ∂x_{k+1}/∂x_k, ∂x_{k+1}/∂c)`; the parameter Jacobian covers the
    /// held control `u_k` or every control point.
    fn propagate(&self, k: usize, x: &[f64], controls: &[f64]) -> (Vec<f64>, Mat<f64>, Mat<f64>) {
        let model = self.model.inner();
        let t0 = k as f64 * self.dt;
        match &self.param {
            ControlParam::Hold { integrator } => {
                let u = &controls[k * self.nu..(k + 1) * self.nu];
                let rate = |xs: &[f64], _t: f64| {
                    let g = model.gain(xs);
                    let mut dx = model.drift_jacobian(xs);
                    dx = &dx + &model.gain_action_jacobian(xs, u);
                    let mut xdot = model.drift(xs);
                    for (d, gu) in xdot.iter_mut().zip(g.matvec(u)) {
                        *d += gu;
                    }
                    RateJacobian { xdot, dx, dp: g }
                };
                match integrator {
                    Integrator::Rk4 => {
                        let s = rk4_sensitivity(x, self.nu, t0, self.dt, rate);
                        (s.x_next, s.dx, s.dp)
                    }
                    Integrator::Euler => {
                        let r = rate(x, t0);
                        let next = x.iter().zip(&r.xdot).map(|(a, b)| a + self.dt * b).collect();
                        let dx = &Mat::identity(self.nx) + &r.dx.scale(self.dt);
                        (next, dx, r.dp.scale(self.dt))
                    }
                }
            }
            ControlParam::Spline { basis, .. } => {
                let np = self.n_controls * self.nu;
                let horizon = basis.knots().end();
                let rate = |xs: &[f64], t: f64| {
                    let sw = basis
                        .span_weights(t.min(horizon))
                        .expect("grid times lie inside the horizon");
                    let mut u = vec![0.0; self.nu];
                    for (a, w) in sw.weights.iter().enumerate() {
                        let q = &controls[(sw.first + a) * self.nu..(sw.first + a + 1) * self.nu];
                        for c in 0..self.nu {
                            u[c] += w * q[c];
                        }
                    }
                    let g = model.gain(xs);
                    let dx = &model.drift_jacobian(xs) + &model.gain_action_jacobian(xs, &u);
                    let mut xdot = model.drift(xs);
                    for (d, gu) in xdot.iter_mut().zip(g.matvec(&u)) {
                        *d += gu;
                    }
                    // lifted gain (Γ M) ⊗ g scattered onto the active control points
                    let mut dp = Mat::zeros(self.nx, np);
                    for (a, w) in sw.weights.iter().enumerate() {
                        for r in 0..self.nx {
                            for c in 0..self.nu {
                                dp[(r, (sw.first + a) * self.nu + c)] = w * g[(r, c)];
                            }
                        }
                    }
                    RateJacobian { xdot, dx, dp }
                };
                let s = rk4_sensitivity(x, np, t0, self.dt, rate);
                (s.x_next, s.dx, s.dp)
            }
        }
    }

    /// Decision vector whose states roll out `controls` from the current state, so
    /// every defect is zero.
    pub fn rollout_guess(&self, controls: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.layout.total());
        let mut x = self.x0.clone();
        z.extend_from_slice(&x);
        for k in 0..self.steps {
            x = self.propagate(k, &x, controls).0;
            z.extend_from_slice(&x);
        }
        z.extend_from_slice(controls);
        z
    }

    /// Control vectors from a decision vector, each projected into the control set.
    pub fn extract_controls(&self, z: &[f64], set: &ControlSet<f64>) -> Vec<Vec<f64>> {
        z[self.control_offset()..]
            .chunks(self.nu)
            .map(|c| set.saturate(c))
            .collect()
    }

    pub fn extract_states(&self, z: &[f64]) -> Vec<Vec<f64>> {
        z[..self.control_offset()]
            .chunks(self.nx)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

impl NlpProblem for Transcription {
    fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    fn num_eq(&self) -> usize {
        (self.steps + 1) * self.nx
    }

    fn num_ineq(&self) -> usize {
        self.control_rows() + self.steps * self.obstacles.circles.len()
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    fn evaluate(&self, z: &[f64], with_derivatives: bool) -> Evaluation {
        let (nx, nu) = (self.nx, self.nu);
        let n = z.len();
        let off = self.control_offset();
        let controls = &z[off..];
        let state = |k: usize| &z[k * nx..(k + 1) * nx];
        let (w1, w2) = (self.weights.w1, self.weights.w2);

        let mut gradient = vec![0.0; if with_derivatives { n } else { 0 }];
        let mut objective = 0.0;
        for k in 1..=self.steps {
            let x = state(k);
            objective += w1 * self.dt * self.goal.squared_distance(x);
            if with_derivatives {
                for (&c, &g) in self.goal.components.iter().zip(&self.goal.values) {
                    gradient[k * nx + c] += 2.0 * w1 * self.dt * (x[c] - g);
                }
            }
        }
        match &self.param {
            ControlParam::Hold { .. } => {
                for (j, &u) in controls.iter().enumerate() {
                    objective += w2 * self.dt * u * u;
                    if with_derivatives {
                        gradient[off + j] += 2.0 * w2 * self.dt * u;
                    }
                }
            }
            ControlParam::Spline { lambda, .. } => {
                let q = Mat::from_row_slice(self.n_controls, nu, controls);
                objective += w2 * control_cost(lambda, &q);
                if with_derivatives {
                    let gq = control_cost_gradient(lambda, &q);
                    for (j, v) in gq.as_slice().iter().enumerate() {
                        gradient[off + j] += w2 * v;
                    }
                }
            }
        }

        let m_eq = self.num_eq();
        let mut eq = Vec::with_capacity(m_eq);
        let mut eq_jac = Mat::zeros(if with_derivatives { m_eq } else { 0 }, n);
        for i in 0..nx {
            eq.push(z[i] - self.x0[i]);
            if with_derivatives {
                eq_jac[(i, i)] = 1.0;
            }
        }
        for k in 0..self.steps {
            let (next, dx, dp) = self.propagate(k, state(k), controls);
            let row0 = (k + 1) * nx;
            for i in 0..nx {
                eq.push(z[row0 + i] - next[i]);
            }
            if !with_derivatives {
                continue;
            }
            let pcol = match self.param {
                ControlParam::Hold { .. } => off + k * nu,
                ControlParam::Spline { .. } => off,
            };
            for i in 0..nx {
                let r = row0 + i;
                eq_jac[(r, row0 + i)] = 1.0;
                for j in 0..nx {
                    eq_jac[(r, k * nx + j)] = -dx[(i, j)];
                }
                for j in 0..dp.cols() {
                    eq_jac[(r, pcol + j)] = -dp[(i, j)];
                }
            }
        }

        let m_in = self.num_ineq();
        let mut ineq = Vec::with_capacity(m_in);
        let mut in_jac = Mat::zeros(if with_derivatives { m_in } else { 0 }, n);
        let rows = self.set_a.rows();
        for j in 0..self.n_controls {
            let u = &controls[j * nu..(j + 1) * nu];
            let au = self.set_a.matvec(u);
            for r in 0..rows {
                let row = ineq.len();
                ineq.push(self.set_b[r] - au[r]);
                if with_derivatives {
                    for c in 0..nu {
                        in_jac[(row, off + j * nu + c)] = -self.set_a[(r, c)];
                    }
                }
            }
        }
        for k in 1..=self.steps {
            let x = state(k);
            for (i, h) in self.obstacles.clearances(x).into_iter().enumerate() {
                let row = ineq.len();
                ineq.push(h);
                if with_derivatives {
                    let g = self.obstacles.clearance_gradient(i, x);
                    in_jac[(row, k * nx)] = g[0];
                    in_jac[(row, k * nx + 1)] = g[1];
                }
            }
        }

        Evaluation {
            objective,
            eq,
            ineq,
            derivatives: with_derivatives.then_some(Derivatives {
                gradient,
                eq_jacobian: eq_jac,
                ineq_jacobian: in_jac,
            }),
        }
    }

    fn hessian_hint(&self) -> Option<Mat<f64>> {
        let n = self.layout.total();
        let mut h = Mat::zeros(n, n);
        for k in 1..=self.steps {
            for &c in &self.goal.components {
                let j = k * self.nx + c;
                h[(j, j)] += 2.0 * self.weights.w1 * self.dt;
            }
        }
        let off = self.control_offset();
        match &self.param {
            ControlParam::Hold { .. } => {
                for j in off..n {
                    h[(j, j)] += 2.0 * self.weights.w2 * self.dt;
                }
            }
            ControlParam::Spline { lambda, .. } => {
                let hq = lambda.hessian(self.nu);
                for r in 0..hq.rows() {
                    for c in 0..hq.cols() {
                        h[(off + r, off + c)] += self.weights.w2 * hq[(r, c)];
                    }
                }
            }
        }
        Some(h)
    }

    fn initial_guess(&self) -> Vec<f64> {
        let u0 = vec![0.0; self.nu];
        let controls: Vec<f64> = (0..self.n_controls).flat_map(|_| u0.iter().copied()).collect();
        self.rollout_guess(&controls)
    }
}

/// Control signal produced by one planning cycle, on plan-local time `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlannedControl {
    Baseline { controls: Vec<Vec<f64>>, dt: f64 },
    Bspop { spline: ControlSpline<f64> },
}

impl PlannedControl {
    /// `u(t)`: zero-order hold for the baseline, the spline otherwise. Times past the
    /// horizon hold the last value.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        match self {
            Self::Baseline { controls, dt } => {
                let k = if t <= 0.0 { 0 } else { (t / dt).floor() as usize };
                controls[k.min(controls.len() - 1)].clone()
            }
            Self::Bspop { spline } => spline.eval_clamped(t),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Self::Baseline { controls, dt } => controls.len() as f64 * dt,
            Self::Bspop { spline } => spline.end(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub control: PlannedControl,
    pub status: SolveStatus,
    /// Whether the returned iterate meets the solver's feasibility tolerances.
    pub feasible: bool,
    /// Predicted grid states `x_0 … x_N`.
    pub states: Vec<Vec<f64>>,
    pub solve_time: Duration,
    pub iterations: usize,
    pub objective: f64,
    pub num_control_vars: usize,
    pub num_vars: usize,
    pub num_eq: usize,
    pub num_ineq: usize,
}

impl PlanResult {
    /// Converged, or stopped at the iteration limit on a feasible iterate.
    pub fn usable(&self) -> bool {
        match self.status {
            SolveStatus::Converged => true,
            SolveStatus::MaxIterations => self.feasible,
            SolveStatus::Infeasible => false,
        }
    }
}

/// Stateful planner that warm-starts each cycle from the previous plan.
#[derive(Debug, Clone)]
pub struct Planner {
    spec: PlannerSpec,
    options: PlanOptions,
    warm: Option<Vec<f64>>,
}

impl Planner {
    pub fn new(spec: PlannerSpec, options: PlanOptions) -> Self {
        Self {
            spec,
            options,
            warm: None,
        }
    }

    pub fn spec(&self) -> PlannerSpec {
        self.spec
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn transcribe(&self, req: &PlanRequest) -> Result<Transcription, PlanError> {
        match self.spec {
            PlannerSpec::Baseline => Transcription::baseline(req, self.options.integrator),
            PlannerSpec::Bspop { degree, points } => Transcription::bspop(req, degree, points, self.options.grid_rate),
        }
    }

    pub fn plan(&mut self, req: &PlanRequest) -> Result<PlanResult, PlanError> {
        let problem = self.transcribe(req)?;
        let nu = req.model.dim_u();
        let guess = match &self.warm {
            Some(prev) if prev.len() == problem.num_control_vectors() * nu => {
                let controls = match self.spec {
                    // shift one planner period; the grid interval equals the period
                    PlannerSpec::Baseline => {
                        let shift = ((1.0 / req.rate) / problem.grid_dt()).round() as usize;
                        let k = problem.num_control_vectors();
                        let mut c = Vec::with_capacity(prev.len());
                        for j in 0..k {
                            let src = (j + shift).min(k - 1);
                            c.extend_from_slice(&prev[src * nu..(src + 1) * nu]);
                        }
                        c
                    }
                    PlannerSpec::Bspop { .. } => prev.clone(),
                };
                Some(problem.rollout_guess(&controls))
            }
            _ => None,
        };
        let mut sol = solve(&problem, guess.as_deref(), &self.options.solver);
        if guess.is_some() && !sol_usable(&sol, &self.options.solver) {
            // the zero-control rollout is feasible whenever the current state is
            let cold = solve(&problem, None, &self.options.solver);
            let spent = sol.solve_time + cold.solve_time;
            sol = cold;
            sol.solve_time = spent;
        }
        let controls = problem.extract_controls(&sol.z, &req.control_set);
        let states = problem.extract_states(&sol.z);
        let feasible = sol.is_feasible(&self.options.solver);
        self.warm = sol_usable(&sol, &self.options.solver).then(|| controls.iter().flatten().copied().collect());

        let control = match self.spec {
            PlannerSpec::Baseline => PlannedControl::Baseline {
                controls,
                dt: problem.grid_dt(),
            },
            PlannerSpec::Bspop { degree, points } => {
                let basis = SplineBasis::clamped_uniform(degree, points, req.horizon)?;
                let flat: Vec<f64> = controls.into_iter().flatten().collect();
                let q = Mat::from_row_slice(points, nu, &flat);
                PlannedControl::Bspop {
                    spline: ControlSpline::new(basis, q)?,
                }
            }
        };
        let (num_control_vars, num_vars) = count_variables(&problem);
        Ok(PlanResult {
            control,
            status: sol.status,
            feasible,
            states,
            solve_time: sol.solve_time,
            iterations: sol.iterations,
            objective: sol.objective,
            num_control_vars,
            num_vars,
            num_eq: problem.num_eq(),
            num_ineq: problem.num_ineq(),
        })
    }
}

fn sol_usable(sol: &NlpSolution, opts: &SolverOptions) -> bool {
    match sol.status {
        SolveStatus::Converged => true,
        SolveStatus::MaxIterations => sol.is_feasible(opts),
        SolveStatus::Infeasible => false,
    }
}

/// Single cold-started baseline plan with default options.
pub fn plan_baseline(req: &PlanRequest) -> Result<PlanResult, PlanError> {
    Planner::new(PlannerSpec::Baseline, PlanOptions::default()).plan(req)
}

/// Single cold-started spline plan with default options.
pub fn plan_bspop(req: &PlanRequest, degree: usize, points: usize) -> Result<PlanResult, PlanError> {
    Planner::new(PlannerSpec::Bspop { degree, points }, PlanOptions::default()).plan(req)
}

/// Runs `spec` in closed loop on `scenario`, overriding the scenario's planner kind.
pub fn receding_horizon(spec: PlannerSpec, scenario: &crate::simharness::Scenario) -> crate::simharness::RunMetrics {
    let mut sc = scenario.clone();
    sc.planner.set_spec(spec);
    crate::simharness::run_closed_loop(&sc)
}
