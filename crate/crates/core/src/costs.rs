//! Objective terms: goal tracking on the transcription grid and the control-effort
//! integral `∫ u(t)ᵀ u(t) dt`, which for a spline is a quadratic form in the control
//! points with precomputable coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop::{kron, Mat};
use crate::scalar::Scalar;
use crate::splinecore::SplineBasis;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("weights must be non-negative with a positive sum (w1 = {w1}, w2 = {w2})")]
    BadWeights { w1: f64, w2: f64 },
    #[error("goal has {values} values but {components} component indices")]
    GoalShape { values: usize, components: usize },
}

/// `Λ` coefficients of one segment, indexed `(j₁, j₂)` over the segment's
/// `p + 1` active control points.
///
/// `Λ[j₁][j₂] = ∫ (Γ M)_{j₁} (Γ M)_{j₂} dt` over the span, which is the Kronecker
/// row `∫ (Γ M) ⊗ (Γ M) dt` laid out with stride `p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable<T> {
    degree: usize,
    num_control_points: usize,
    /// First active control point of each segment.
    firsts: Vec<usize>,
    blocks: Vec<Mat<T>>,
}

impl<T: Scalar> LambdaTable<T> {
    pub fn segment_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_control_points(&self) -> usize {
        self.num_control_points
    }

    /// `(p + 1) × (p + 1)` coefficient block of segment `s`.
    pub fn block(&self, s: usize) -> &Mat<T> {
        &self.blocks[s]
    }

    /// First control point touched by segment `s`.
    pub fn first_point(&self, s: usize) -> usize {
        self.firsts[s]
    }

    /// Segment `s` as the flattened `1 × (p + 1)²` row.
    pub fn row(&self, s: usize) -> Vec<T> {
        self.blocks[s].as_slice().to_vec()
    }

    /// Hessian of `J_ctrl` with respect to `vec(Q̄ᵀ)`, i.e. the control points
    /// stacked one after another: `2 Σ_s Λ_s ⊗ I_{dim_u}` scattered into place.
    pub fn hessian(&self, dim_u: usize) -> Mat<T> {
        let n = self.num_control_points * dim_u;
        let mut h = Mat::zeros(n, n);
        let eye = Mat::identity(dim_u);
        let two = T::lit(2.0);
        for (s, block) in self.blocks.iter().enumerate() {
            let local = kron(&block.scale(two), &eye);
            let off = self.firsts[s] * dim_u;
            for r in 0..local.rows() {
                for c in 0..local.cols() {
                    h[(off + r, off + c)] += local[(r, c)];
                }
            }
        }
        h
    }
}

/// Closed-form `Λ` for every segment of `basis`.
///
/// Each entry is `width · M[:, a]ᵀ H M[:, b]` with `H[k₁][k₂] = 1 / (k₁ + k₂ + 1)`, the
/// exact integral of the product of two degree-`p` polynomials over the unit interval.
pub fn precompute_lambda<T: Scalar>(basis: &SplineBasis<T>) -> LambdaTable<T> {
    let p = basis.degree();
    let hilbert = Mat::from_fn(p + 1, p + 1, |a, b| T::one() / T::from_count(a + b + 1));
    let mut blocks = Vec::with_capacity(basis.segment_count());
    let mut firsts = Vec::with_capacity(basis.segment_count());
    for s in 0..basis.segment_count() {
        let m = basis.segment_matrix(s);
        let mut block = m.transpose().matmul(&hilbert).matmul(m).scale(basis.segment_width(s));
        // exact symmetry regardless of rounding order
        for a in 0..=p {
            for b in a + 1..=p {
                let avg = (block[(a, b)] + block[(b, a)]) / T::lit(2.0);
                block[(a, b)] = avg;
                block[(b, a)] = avg;
            }
        }
        blocks.push(block);
        firsts.push(basis.spans()[s] - p);
    }
    LambdaTable {
        degree: p,
        num_control_points: basis.num_control_points(),
        firsts,
        blocks,
    }
}

/// `J_ctrl = Σ_s Σ_{j₁,j₂} Λ_s[j₁][j₂] ⟨q̄_{first+j₁}, q̄_{first+j₂}⟩`.
pub fn control_cost<T: Scalar>(table: &LambdaTable<T>, control_points: &Mat<T>) -> T {
    debug_assert_eq!(control_points.rows(), table.num_control_points);
    let mut total = T::zero();
    for (s, block) in table.blocks.iter().enumerate() {
        let first = table.firsts[s];
        for a in 0..block.rows() {
            let qa = control_points.row(first + a);
            for b in 0..block.cols() {
                let qb = control_points.row(first + b);
                let inner: T = qa.iter().zip(qb).map(|(&x, &y)| x * y).sum();
                total += block[(a, b)] * inner;
            }
        }
    }
    total
}

/// Gradient of [`control_cost`] as an `(n + 1) × dim_u` matrix.
pub fn control_cost_gradient<T: Scalar>(table: &LambdaTable<T>, control_points: &Mat<T>) -> Mat<T> {
    let mut grad = Mat::zeros(control_points.rows(), control_points.cols());
    let two = T::lit(2.0);
    for (s, block) in table.blocks.iter().enumerate() {
        let first = table.firsts[s];
        for a in 0..block.rows() {
            for b in 0..block.cols() {
                let w = two * block[(a, b)];
                for c in 0..control_points.cols() {
                    grad[(first + a, c)] += w * control_points[(first + b, c)];
                }
            }
        }
    }
    grad
}

/// Goal reference: target values for a subset of state components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalTarget<T> {
    pub values: Vec<T>,
    pub components: Vec<usize>,
}

impl<T: Scalar> GoalTarget<T> {
    /// Planar position goal on state components 0 and 1.
    pub fn position(x: T, y: T) -> Self {
        Self {
            values: vec![x, y],
            components: vec![0, 1],
        }
    }

    pub fn new(values: Vec<T>, components: Vec<usize>) -> Result<Self, CostError> {
        if values.len() != components.len() {
            return Err(CostError::GoalShape {
                values: values.len(),
                components: components.len(),
            });
        }
        Ok(Self { values, components })
    }

    /// `‖x − x_g‖²` over the masked components.
    pub fn squared_distance(&self, state: &[T]) -> T {
        self.components
            .iter()
            .zip(&self.values)
            .map(|(&c, &g)| {
                let d = state[c] - g;
                d * d
            })
            .sum()
    }

    pub fn distance(&self, state: &[T]) -> T {
        self.squared_distance(state).sqrt()
    }
}

/// Rectangle-rule `J_goal = dt · Σ_k ‖x_k − x_g‖²` over the given grid states.
pub fn goal_cost<T: Scalar, S: AsRef<[T]>>(trajectory: &[S], goal: &GoalTarget<T>, dt: T) -> T {
    dt * trajectory.iter().map(|x| goal.squared_distance(x.as_ref())).sum::<T>()
}

/// Trade-off weights of `w1 · J_goal + w2 · J_ctrl` (control weight `R = I`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub w1: f64,
    pub w2: f64,
}

impl ObjectiveWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self, CostError> {
        let w = Self { w1, w2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let ok = self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1 + self.w2 > 0.0;
        if ok && self.w1.is_finite() && self.w2.is_finite() {
            Ok(())
        } else {
            Err(CostError::BadWeights {
                w1: self.w1,
                w2: self.w2,
            })
        }
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { w1: 10.0, w2: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splinecore::{ControlSpline, KnotVector};

    #[test]
    fn linear_lambda_exact() {
        let basis = SplineBasis::<f64>::clamped_uniform(1, 2, 1.0).unwrap();
        let table = precompute_lambda(&basis);
        let expected = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        for (a, b) in table.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_lambda_is_span_width() {
        let knots = KnotVector::<f64>::new(vec![0.0, 0.4, 1.5], 0).unwrap();
        let table = precompute_lambda(&SplineBasis::new(knots).unwrap());
        assert_eq!(table.segment_count(), 2);
        assert!((table.row(0)[0] - 0.4).abs() < 1e-15);
        assert!((table.row(1)[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn lambda_rows_sum_to_width_and_are_symmetric() {
        for p in 0..=3 {
            let basis = SplineBasis::clamped_uniform(p, p + 4, 2.5).unwrap();
            let table = precompute_lambda(&basis);
            for s in 0..table.segment_count() {
                let sum: f64 = table.row(s).iter().sum();
                assert!((sum - basis.segment_width(s)).abs() < 1e-12);
                let b = table.block(s);
                assert_eq!(b, &b.transpose());
            }
        }
    }

    #[test]
    fn zero_and_constant_control_cost() {
        let basis = SplineBasis::<f64>::clamped_uniform(3, 6, 2.0).unwrap();
        let table = precompute_lambda(&basis);
        assert_eq!(control_cost(&table, &Mat::zeros(6, 2)), 0.0);
        let c = [0.7, -1.2];
        let q = Mat::from_fn(6, 2, |_, k| c[k]);
        let expected = 2.0 * (0.49 + 1.44);
        assert!((control_cost(&table, &q) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_and_hessian_agree_with_cost() {
        let basis = SplineBasis::clamped_uniform(2, 5, 1.0).unwrap();
        let table = precompute_lambda(&basis);
        let q = Mat::from_fn(5, 2, |r, c| ((r * 3 + c * 7) % 5) as f64 * 0.3 - 0.5);
        let grad = control_cost_gradient(&table, &q);
        let h = table.hessian(2);
        let z: Vec<f64> = q.as_slice().to_vec();
        // J is quadratic: J = ½ zᵀ H z, ∇J = H z
        let hz = h.matvec(&z);
        let half_zhz: f64 = 0.5 * z.iter().zip(&hz).map(|(a, b)| a * b).sum::<f64>();
        assert!((half_zhz - control_cost(&table, &q)).abs() < 1e-12);
        for (g, v) in grad.as_slice().iter().zip(&hz) {
            assert!((g - v).abs() < 1e-12);
        }
        let spline = ControlSpline::new(basis, q).unwrap();
        assert!(spline.eval(0.5).is_ok());
    }

    #[test]
    fn goal_cost_examples() {
        let goal = GoalTarget::<f64>::position(0.5, -0.5);
        let at_goal = vec![vec![0.5, -0.5, 1.0]; 4];
        assert_eq!(goal_cost(&at_goal, &goal, 0.1), 0.0);
        assert_eq!(goal_cost(&[vec![1.5, -0.5, 3.0]], &goal, 1.0), 1.0);
        let delta = 0.3;
        let traj = vec![vec![0.5 + delta, -0.5, 0.0]; 7];
        assert!((goal_cost(&traj, &goal, 0.2) - 7.0 * 0.2 * delta * delta).abs() < 1e-15);
    }

    #[test]
    fn weights_validated() {
        assert!(ObjectiveWeights::new(0.0, 0.0).is_err());
        assert!(ObjectiveWeights::new(-1.0, 2.0).is_err());
        assert_eq!(ObjectiveWeights::default(), ObjectiveWeights::new(10.0, 1.0).unwrap());
        assert!(GoalTarget::new(vec![1.0], vec![0, 1]).is_err());
    }
}
