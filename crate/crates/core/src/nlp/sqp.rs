//! Line-search SQP with a damped BFGS Hessian and an ℓ1 merit function.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::problem::{Derivatives, Evaluation, NlpProblem};
use super::qp::{solve_qp, QpError, QpProblem, QpSolution};
use crate::linop::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stationarity tolerance, relative to `max(1, ‖∇f‖∞)`.
    pub tol_kkt: f64,
    /// Equality residual tolerance (∞-norm).
    pub tol_eq: f64,
    /// Inequality and bound violation tolerance.
    pub tol_ineq: f64,
    pub max_iter: usize,
    /// Use the caller's warm start when one is supplied.
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-6,
            tol_eq: 1e-6,
            tol_ineq: 1e-6,
            max_iter: 200,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub solve_time: Duration,
    /// ∞-norm of the equality residual at `z`.
    pub eq_residual: f64,
    /// Largest inequality or bound violation at `z`.
    pub ineq_violation: f64,
}

impl NlpSolution {
    /// Whether `z` satisfies all constraints within the given tolerances.
    pub fn is_feasible(&self, opts: &SolverOptions) -> bool {
        self.eq_residual <= opts.tol_eq && self.ineq_violation <= opts.tol_ineq
    }
}

struct BoundRows {
    /// `(variable, is_lower, bound)`
    rows: Vec<(usize, bool, f64)>,
}

impl BoundRows {
    fn new(lower: &[f64], upper: &[f64]) -> Self {
        let mut rows = Vec::new();
        for (j, (&l, &u)) in lower.iter().zip(upper).enumerate() {
            if l.is_finite() {
                rows.push((j, true, l));
            }
            if u.is_finite() {
                rows.push((j, false, u));
            }
        }
        Self { rows }
    }

    fn violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|&(j, lo, b)| if lo { b - z[j] } else { z[j] - b })
            .fold(0.0, f64::max)
    }
}

fn project(z: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &l), &u) in z.iter_mut().zip(lower).zip(upper) {
        *v = v.max(l).min(u);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn ineq_violation(ineq: &[f64]) -> f64 {
    ineq.iter().fold(0.0, |m, &c| m.max(-c))
}

/// ℓ1 constraint violation used by the merit function.
fn l1_violation(ev: &Evaluation) -> f64 {
    ev.eq.iter().map(|c| c.abs()).sum::<f64>() + ev.ineq.iter().map(|&c| (-c).max(0.0)).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∇f − J_eqᵀ λ_eq − J_inᵀ λ_in`.
fn lagrangian_gradient(der: &Derivatives, lambda_eq: &[f64], lambda_in: &[f64]) -> Vec<f64> {
    let ae = der.eq_jacobian.tr_matvec(lambda_eq);
    let ai = der.ineq_jacobian.tr_matvec(lambda_in);
    der.gradient
        .iter()
        .zip(ae.iter().zip(&ai))
        .map(|(g, (a, b))| g - a - b)
        .collect()
}

struct StepResult {
    d: Vec<f64>,
    lambda_eq: Vec<f64>,
    lambda_in: Vec<f64>,
    /// Linearized ℓ1 violation remaining after the step (zero for a consistent QP).
    residual_violation: f64,
    elastic: bool,
}

fn initial_hessian(problem: &dyn NlpProblem, n: usize) -> Mat<f64> {
    let mut h = problem.hessian_hint().unwrap_or_else(|| Mat::identity(n));
    let scale = (0..n).map(|i| h[(i, i)]).fold(1.0f64, f64::max);
    let delta = 1e-3 * scale;
    for i in 0..n {
        h[(i, i)] += delta;
    }
    h
}

fn qp_step(
    h: &Mat<f64>,
    z: &[f64],
    ev: &Evaluation,
    der: &Derivatives,
    bounds: &BoundRows,
    penalty: f64,
) -> Result<StepResult, QpError> {
    let n = z.len();
    let m_eq = ev.eq.len();
    let m_in = ev.ineq.len();
    let nb = bounds.rows.len();

    let b_eq: Vec<f64> = ev.eq.iter().map(|c| -c).collect();
    let mut a_in = Mat::zeros(m_in + nb, n);
    let mut b_in = Vec::with_capacity(m_in + nb);
    for i in 0..m_in {
        a_in.row_mut(i).copy_from_slice(der.ineq_jacobian.row(i));
        b_in.push(-ev.ineq[i]);
    }
    for (k, &(j, lo, b)) in bounds.rows.iter().enumerate() {
        if lo {
            a_in[(m_in + k, j)] = 1.0;
            b_in.push(b - z[j]);
        } else {
            a_in[(m_in + k, j)] = -1.0;
            b_in.push(z[j] - b);
        }
    }
    let qp = QpProblem {
        h,
        g: &der.gradient,
        a_eq: &der.eq_jacobian,
        b_eq: &b_eq,
        a_in: &a_in,
        b_in: &b_in,
    };
    match solve_qp(&qp) {
        Ok(sol) => {
            return Ok(StepResult {
                lambda_in: sol.lambda_in[..m_in].to_vec(),
                lambda_eq: sol.lambda_eq,
                d: sol.x,
                residual_violation: 0.0,
                elastic: false,
            })
        }
        Err(QpError::Infeasible) | Err(QpError::DependentEqualities) => {}
        Err(e) => return Err(e),
    }

    // elastic mode: [d, s⁺ (m_eq), s⁻ (m_eq), t (m_in)]
    let ns = 2 * m_eq + m_in;
    let ne = n + ns;
    let rho = penalty.max(1.0) * 10.0;
    let eps = 1e-6;
    let mut he = Mat::zeros(ne, ne);
    he.set_block(0, 0, h);
    for i in n..ne {
        he[(i, i)] = eps;
    }
    let mut ge = der.gradient.clone();
    ge.extend(std::iter::repeat(rho).take(ns));
    let mut ae = Mat::zeros(m_eq, ne);
    for i in 0..m_eq {
        ae.row_mut(i)[..n].copy_from_slice(der.eq_jacobian.row(i));
        ae[(i, n + i)] = -1.0;
        ae[(i, n + m_eq + i)] = 1.0;
    }
    let mut ai = Mat::zeros(m_in + nb + ns, ne);
    let mut bi = Vec::with_capacity(m_in + nb + ns);
    for i in 0..m_in {
        ai.row_mut(i)[..n].copy_from_slice(der.ineq_jacobian.row(i));
        ai[(i, n + 2 * m_eq + i)] = 1.0;
        bi.push(-ev.ineq[i]);
    }
    for k in 0..nb {
        ai.row_mut(m_in + k)[..n].copy_from_slice(a_in.row(m_in + k));
        bi.push(b_in[m_in + k]);
    }
    for s in 0..ns {
        ai[(m_in + nb + s, n + s)] = 1.0;
        bi.push(0.0);
    }
    let sol: QpSolution = solve_qp(&QpProblem {
        h: &he,
        g: &ge,
        a_eq: &ae,
        b_eq: &b_eq,
        a_in: &ai,
        b_in: &bi,
    })?;
    let slack: f64 = sol.x[n..].iter().map(|s| s.max(0.0)).sum();
    Ok(StepResult {
        d: sol.x[..n].to_vec(),
        lambda_eq: sol.lambda_eq,
        lambda_in: sol.lambda_in[..m_in].to_vec(),
        residual_violation: slack,
        elastic: true,
    })
}

fn bfgs_update(h: &mut Mat<f64>, s: &[f64], y: &[f64]) {
    let hs = h.matvec(s);
    let shs = dot(s, &hs);
    if !(shs > 1e-14 * dot(s, s).max(1e-300)) {
        return;
    }
    let sy = dot(s, y);
    // Powell damping keeps the update positive definite
    let theta = if sy >= 0.2 * shs { 1.0 } else { 0.8 * shs / (shs - sy) };
    let r: Vec<f64> = y
        .iter()
        .zip(&hs)
        .map(|(yi, hi)| theta * yi + (1.0 - theta) * hi)
        .collect();
    let sr = dot(s, &r);
    if !(sr > 0.0) {
        return;
    }
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += r[i] * r[j] / sr - hs[i] * hs[j] / shs;
        }
    }
}

/// Solves `problem` from `warm_start` (or the problem's initial guess).
pub fn solve(problem: &dyn NlpProblem, warm_start: Option<&[f64]>, opts: &SolverOptions) -> NlpSolution {
    let started = Instant::now();
    let n = problem.num_vars();
    let (lower, upper) = problem.bounds();
    let bounds = BoundRows::new(lower, upper);

    let mut z = match warm_start {
        Some(w) if opts.warm_start && w.len() == n => w.to_vec(),
        _ => problem.initial_guess(),
    };
    project(&mut z, lower, upper);

    let h0 = initial_hessian(problem, n);
    let mut h = h0.clone();
    let mut penalty: f64 = 1.0;
    let mut ev = problem.evaluate(&z, true);
    let mut stall = 0usize;
    let mut ls_failures = 0usize;
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let der = ev.derivatives.clone().expect("derivatives at iterate");
        let step = match qp_step(&h, &z, &ev, &der, &bounds, penalty) {
            Ok(s) => s,
            Err(_) => {
                if h != h0 {
                    h = h0.clone();
                    continue;
                }
                break;
            }
        };

        let eq_res = inf_norm(&ev.eq);
        let in_viol = ineq_violation(&ev.ineq).max(bounds.violation(&z));
        let feasible = eq_res <= opts.tol_eq && in_viol <= opts.tol_ineq;
        let stationarity = inf_norm(&lagrangian_gradient(&der, &step.lambda_eq, &step.lambda_in));
        let grad_scale = inf_norm(&der.gradient).max(1.0);
        let tiny_step = inf_norm(&step.d) <= 1e-10 * (1.0 + inf_norm(&z));
        if feasible && !step.elastic && (stationarity <= opts.tol_kkt * grad_scale || tiny_step) {
            status = SolveStatus::Converged;
            break;
        }

        let lam_max = inf_norm(&step.lambda_eq).max(inf_norm(&step.lambda_in));
        if penalty < 1.1 * lam_max + 1e-3 {
            penalty = 1.5 * lam_max + 1e-3;
        }
        let v0 = l1_violation(&ev);
        let merit0 = ev.objective + penalty * v0;
        let mut slope = dot(&der.gradient, &step.d) - penalty * (v0 - step.residual_violation);
        if slope >= 0.0 {
            slope = -0.5 * dot(&step.d, &h.matvec(&step.d));
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = z.iter().zip(&step.d).map(|(zi, di)| zi + alpha * di).collect();
            project(&mut trial, lower, upper);
            let tv = problem.evaluate(&trial, false);
            let merit = tv.objective + penalty * l1_violation(&tv);
            if merit.is_finite() && merit <= merit0 + 1e-4 * alpha * slope {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(z_new) = accepted else {
            ls_failures += 1;
            if step.elastic && ls_failures >= 3 {
                status = SolveStatus::Infeasible;
                break;
            }
            if ls_failures >= 5 {
                if !feasible {
                    status = SolveStatus::Infeasible;
                }
                break;
            }
            h = h0.clone();
            continue;
        };
        ls_failures = 0;

        let ev_new = problem.evaluate(&z_new, true);
        let small_step = inf_norm(&step.d) <= 1e-6 * (1.0 + inf_norm(&z));
        if step.elastic || (small_step && !feasible) {
            let v1 = l1_violation(&ev_new);
            if v1 > 0.99 * v0 {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= 5 && v1 > opts.tol_eq {
                z = z_new;
                ev = ev_new;
                status = SolveStatus::Infeasible;
                break;
            }
        } else {
            stall = 0;
        }

        let der_new = ev_new.derivatives.as_ref().expect("derivatives at iterate");
        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let g_new = lagrangian_gradient(der_new, &step.lambda_eq, &step.lambda_in);
        let g_old = lagrangian_gradient(&der, &step.lambda_eq, &step.lambda_in);
        let y: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h, &s, &y);

        z = z_new;
        ev = ev_new;
    }

    NlpSolution {
        status,
        objective: ev.objective,
        eq_residual: inf_norm(&ev.eq),
        ineq_violation: ineq_violation(&ev.ineq).max(bounds.violation(&z)),
        z,
        iterations,
        solve_time: started.elapsed(),
    }
}
