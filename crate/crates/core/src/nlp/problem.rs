use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop::Mat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
}

/// What a block of decision variables represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    State,
    Control,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableBlock {
    pub name: String,
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

/// Named, contiguous blocks of the decision vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariableLayout {
    blocks: Vec<VariableBlock>,
}

impl VariableLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block and returns its offset.
    pub fn push(&mut self, name: impl Into<String>, kind: BlockKind, len: usize) -> usize {
        let offset = self.total();
        self.blocks.push(VariableBlock {
            name: name.into(),
            kind,
            offset,
            len,
        });
        offset
    }

    pub fn blocks(&self) -> &[VariableBlock] {
        &self.blocks
    }

    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn count(&self, kind: BlockKind) -> usize {
        self.blocks.iter().filter(|b| b.kind == kind).map(|b| b.len).sum()
    }

    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Values (and optionally first derivatives) of an NLP at one point.
///
/// Inequalities follow the convention `c_in(z) ≥ 0`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub derivatives: Option<Derivatives>,
}

#[derive(Debug, Clone)]
pub struct Derivatives {
    pub gradient: Vec<f64>,
    pub eq_jacobian: Mat<f64>,
    pub ineq_jacobian: Mat<f64>,
}

/// Smooth nonlinear program
///
/// ```text
///     minimize  f(z)   s.t.  c_eq(z) = 0,  c_in(z) ≥ 0,  lower ≤ z ≤ upper
/// ```
pub trait NlpProblem {
    fn layout(&self) -> &VariableLayout;

    fn num_eq(&self) -> usize;

    fn num_ineq(&self) -> usize;

    /// Per-variable bounds; infinite entries are unbounded.
    fn bounds(&self) -> (&[f64], &[f64]);

    fn evaluate(&self, z: &[f64], with_derivatives: bool) -> Evaluation;

    /// Initial positive semi-definite curvature estimate, e.g. the Hessian of a
    /// quadratic objective.
    fn hessian_hint(&self) -> Option<Mat<f64>> {
        None
    }

    /// Starting point when no warm start is supplied.
    fn initial_guess(&self) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        lo.iter().zip(hi).map(|(&l, &h)| 0.0f64.max(l).min(h)).collect()
    }

    fn num_vars(&self) -> usize {
        self.layout().total()
    }
}

/// `(control variables, total variables)` by block layout.
pub fn count_variables(problem: &dyn NlpProblem) -> (usize, usize) {
    let layout = problem.layout();
    (layout.count(BlockKind::Control), layout.total())
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> Mat<f64> + Send + Sync>;

/// NLP assembled from closures, for small problems and tests.
pub struct FnProblem {
    layout: VariableLayout,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: ScalarFn,
    gradient: VectorFn,
    eq: Option<(usize, VectorFn, JacobianFn)>,
    ineq: Option<(usize, VectorFn, JacobianFn)>,
    hessian: Option<Mat<f64>>,
}

impl FnProblem {
    pub fn new(
        n: usize,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let mut layout = VariableLayout::new();
        layout.push("z", BlockKind::Other, n);
        Self {
            layout,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            objective: Box::new(objective),
            gradient: Box::new(gradient),
            eq: None,
            ineq: None,
            hessian: None,
        }
    }

    pub fn with_layout(mut self, layout: VariableLayout) -> Result<Self, ProblemError> {
        if layout.total() != self.lower.len() {
            return Err(ProblemError::Dimension {
                what: "layout",
                expected: self.lower.len(),
                got: layout.total(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        let n = self.lower.len();
        for (what, v) in [("lower bounds", &lower), ("upper bounds", &upper)] {
            if v.len() != n {
                return Err(ProblemError::Dimension {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if let Some(i) = (0..n).find(|&i| lower[i] > upper[i]) {
            return Err(ProblemError::InvertedBounds(i));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_eq(
        mut self,
        count: usize,
        values: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Mat<f64> + Send + Sync + 'static,
    ) -> Self {
        self.eq = Some((count, Box::new(values), Box::new(jacobian)));
        self
    }

    pub fn with_ineq(
        mut self,
        count: usize,
        values: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Mat<f64> + Send + Sync + 'static,
    ) -> Self {
        self.ineq = Some((count, Box::new(values), Box::new(jacobian)));
        self
    }

    pub fn with_hessian_hint(mut self, h: Mat<f64>) -> Self {
        self.hessian = Some(h);
        self
    }
}

impl NlpProblem for FnProblem {
    fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    fn num_eq(&self) -> usize {
        self.eq.as_ref().map_or(0, |e| e.0)
    }

    fn num_ineq(&self) -> usize {
        self.ineq.as_ref().map_or(0, |e| e.0)
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    fn evaluate(&self, z: &[f64], with_derivatives: bool) -> Evaluation {
        let n = z.len();
        let eq = self.eq.as_ref().map_or_else(Vec::new, |e| (e.1)(z));
        let ineq = self.ineq.as_ref().map_or_else(Vec::new, |e| (e.1)(z));
        let derivatives = with_derivatives.then(|| Derivatives {
            gradient: (self.gradient)(z),
            eq_jacobian: self.eq.as_ref().map_or_else(|| Mat::zeros(0, n), |e| (e.2)(z)),
            ineq_jacobian: self.ineq.as_ref().map_or_else(|| Mat::zeros(0, n), |e| (e.2)(z)),
        });
        Evaluation {
            objective: (self.objective)(z),
            eq,
            ineq,
            derivatives,
        }
    }

    fn hessian_hint(&self) -> Option<Mat<f64>> {
        self.hessian.clone()
    }
}

/// Largest relative mismatch between analytic first derivatives (objective gradient
/// and both constraint Jacobians) and central differences at `z`.
///
/// The step for variable `j` is `1e-6 · max(1, |z_j|)`; discrepancies are measured
/// relative to `max(1, |analytic|)`.
pub fn finite_difference_check(problem: &dyn NlpProblem, z: &[f64]) -> f64 {
    let base = problem.evaluate(z, true);
    let der = base.derivatives.expect("derivatives requested");
    let mut zp = z.to_vec();
    let mut worst: f64 = 0.0;
    let rel = |a: f64, fd: f64| (a - fd).abs() / a.abs().max(1.0);
    for j in 0..z.len() {
        let h = 1e-6 * z[j].abs().max(1.0);
        zp[j] = z[j] + h;
        let ep = problem.evaluate(&zp, false);
        zp[j] = z[j] - h;
        let em = problem.evaluate(&zp, false);
        zp[j] = z[j];
        let inv = 1.0 / (2.0 * h);
        worst = worst.max(rel(der.gradient[j], (ep.objective - em.objective) * inv));
        for i in 0..base.eq.len() {
            worst = worst.max(rel(der.eq_jacobian[(i, j)], (ep.eq[i] - em.eq[i]) * inv));
        }
        for i in 0..base.ineq.len() {
            worst = worst.max(rel(der.ineq_jacobian[(i, j)], (ep.ineq[i] - em.ineq[i]) * inv));
        }
    }
    worst
}
