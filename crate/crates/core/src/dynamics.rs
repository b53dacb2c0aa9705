//! Control-affine vehicle models `ẋ = f(x) + g(x) u`, convex control sets, circular
//! obstacles, RK4 propagation and the spline-lifted input gain.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop::{kron, Mat};
use crate::scalar::Scalar;
use crate::splinecore::{SplineBasis, SplineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("wheelbase must be positive, got {0}")]
    BadWheelbase(f64),
    #[error("box bounds for channel {0} are inverted or not finite")]
    BadBox(usize),
    #[error("polytope has {rows} rows but {rhs} right-hand sides")]
    PolytopeShape { rows: usize, rhs: usize },
    #[error("interior point violates the control set (residual {0})")]
    EmptySet(f64),
    #[error("wheel parameters must be positive")]
    BadWheelParams,
    #[error("obstacle radius must be positive, got {0}")]
    BadRadius(f64),
}

/// `ẋ = f(x) + g(x) u` with state and control dimensions.
///
/// Jacobians default to central differences; the bundled vehicle models override
/// them with closed forms.
pub trait ControlAffine<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;

    /// Drift `f(x)`.
    fn drift(&self, x: &[T]) -> Vec<T>;

    /// Input gain `g(x)`, `dim_x × dim_u`.
    fn gain(&self, x: &[T]) -> Mat<T>;

    fn xdot(&self, x: &[T], u: &[T]) -> Vec<T> {
        let mut dx = self.drift(x);
        for (d, gu) in dx.iter_mut().zip(self.gain(x).matvec(u)) {
            *d += gu;
        }
        dx
    }

    /// `∂f/∂x`.
    fn drift_jacobian(&self, x: &[T]) -> Mat<T> {
        central_jacobian(x, |xs| self.drift(xs))
    }

    /// `∂(g(x) u)/∂x` at fixed `u`.
    fn gain_action_jacobian(&self, x: &[T], u: &[T]) -> Mat<T> {
        central_jacobian(x, |xs| self.gain(xs).matvec(u))
    }
}

fn central_jacobian<T: Scalar>(x: &[T], f: impl Fn(&[T]) -> Vec<T>) -> Mat<T> {
    let f0 = f(x);
    let mut jac = Mat::zeros(f0.len(), x.len());
    let eps = T::epsilon().cbrt();
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = eps * (T::one() + x[j].abs());
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..f0.len() {
            jac[(i, j)] = (fp[i] - fm[i]) / (h + h);
        }
    }
    jac
}

/// Shared handle to a control-affine model.
#[derive(Clone)]
pub struct ControlAffineModel<T>(Arc<dyn ControlAffine<T>>);

impl<T: Scalar> ControlAffineModel<T> {
    pub fn new(model: impl ControlAffine<T> + 'static) -> Self {
        Self(Arc::new(model))
    }

    pub fn inner(&self) -> &dyn ControlAffine<T> {
        &*self.0
    }
}

impl<T: Scalar> std::ops::Deref for ControlAffineModel<T> {
    type Target = dyn ControlAffine<T>;

    fn deref(&self) -> &Self::Target {
        &*self.0
    }
}

impl<T: Scalar> fmt::Debug for ControlAffineModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ControlAffineModel({}, x{}, u{})",
            self.name(),
            self.dim_x(),
            self.dim_u()
        )
    }
}

/// Planar unicycle, state `(p_x, p_y, θ)`, control `(v, ω)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unicycle;

impl<T: Scalar> ControlAffine<T> for Unicycle {
    fn name(&self) -> &str {
        "unicycle"
    }

    fn dim_x(&self) -> usize {
        3
    }

    fn dim_u(&self) -> usize {
        2
    }

    fn drift(&self, _x: &[T]) -> Vec<T> {
        vec![T::zero(); 3]
    }

    fn gain(&self, x: &[T]) -> Mat<T> {
        let (s, c) = x[2].sin_cos();
        let (o, z) = (T::one(), T::zero());
        Mat::from_row_slice(3, 2, &[c, z, s, z, z, o])
    }

    fn xdot(&self, x: &[T], u: &[T]) -> Vec<T> {
        let (s, c) = x[2].sin_cos();
        vec![c * u[0], s * u[0], u[1]]
    }

    fn drift_jacobian(&self, _x: &[T]) -> Mat<T> {
        Mat::zeros(3, 3)
    }

    fn gain_action_jacobian(&self, x: &[T], u: &[T]) -> Mat<T> {
        let (s, c) = x[2].sin_cos();
        let mut j = Mat::zeros(3, 3);
        j[(0, 2)] = -s * u[0];
        j[(1, 2)] = c * u[0];
        j
    }
}

/// Kinematic car, state `(p_x, p_y, θ, φ)`, control `(v, ω)` with `ω` the steering rate.
#[derive(Debug, Clone, Copy)]
pub struct Ackermann<T> {
    pub wheelbase: T,
}

impl<T: Scalar> ControlAffine<T> for Ackermann<T> {
    fn name(&self) -> &str {
        "ackermann"
    }

    fn dim_x(&self) -> usize {
        4
    }

    fn dim_u(&self) -> usize {
        2
    }

    fn drift(&self, _x: &[T]) -> Vec<T> {
        vec![T::zero(); 4]
    }

    fn gain(&self, x: &[T]) -> Mat<T> {
        let (s, c) = x[2].sin_cos();
        let k = x[3].tan() / self.wheelbase;
        let (o, z) = (T::one(), T::zero());
        Mat::from_row_slice(4, 2, &[c, z, s, z, k, z, z, o])
    }

    fn xdot(&self, x: &[T], u: &[T]) -> Vec<T> {
        let (s, c) = x[2].sin_cos();
        vec![c * u[0], s * u[0], x[3].tan() / self.wheelbase * u[0], u[1]]
    }

    fn drift_jacobian(&self, _x: &[T]) -> Mat<T> {
        Mat::zeros(4, 4)
    }

    fn gain_action_jacobian(&self, x: &[T], u: &[T]) -> Mat<T> {
        let (s, c) = x[2].sin_cos();
        let sec = T::one() / x[3].cos();
        let mut j = Mat::zeros(4, 4);
        j[(0, 2)] = -s * u[0];
        j[(1, 2)] = c * u[0];
        j[(2, 3)] = sec * sec / self.wheelbase * u[0];
        j
    }
}

/// Model given by closures, mostly for tests and experiments.
pub struct FnModel<T> {
    pub name: String,
    pub dim_x: usize,
    pub dim_u: usize,
    #[allow(clippy::type_complexity)]
    pub drift: Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub gain: Box<dyn Fn(&[T]) -> Mat<T> + Send + Sync>,
}

impl<T: Scalar> ControlAffine<T> for FnModel<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim_x(&self) -> usize {
        self.dim_x
    }

    fn dim_u(&self) -> usize {
        self.dim_u
    }

    fn drift(&self, x: &[T]) -> Vec<T> {
        (self.drift)(x)
    }

    fn gain(&self, x: &[T]) -> Mat<T> {
        (self.gain)(x)
    }
}

pub fn unicycle<T: Scalar>() -> ControlAffineModel<T> {
    ControlAffineModel::new(Unicycle)
}

pub fn ackermann<T: Scalar>(wheelbase: T) -> Result<ControlAffineModel<T>, ModelError> {
    if !(wheelbase > T::zero()) || !wheelbase.is_finite() {
        return Err(ModelError::BadWheelbase(wheelbase.as_f64()));
    }
    Ok(ControlAffineModel::new(Ackermann { wheelbase }))
}

/// Convex control set.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet<T> {
    /// Per-channel bounds `lower ≤ u ≤ upper`.
    Box { lower: Vec<T>, upper: Vec<T> },
    /// `A u ≤ b` with a known interior point.
    Polytope { a: Mat<T>, b: Vec<T>, interior: Vec<T> },
}

impl<T: Scalar> ControlSet<T> {
    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self, ModelError> {
        assert_eq!(lower.len(), upper.len(), "box bound lengths differ");
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) || !l.is_finite() || !u.is_finite() {
                return Err(ModelError::BadBox(k));
            }
        }
        Ok(Self::Box { lower, upper })
    }

    /// Polytope `A u ≤ b`, checked nonempty at `interior` (the origin when `None`).
    pub fn polytope(a: Mat<T>, b: Vec<T>, interior: Option<Vec<T>>) -> Result<Self, ModelError> {
        if a.rows() != b.len() {
            return Err(ModelError::PolytopeShape {
                rows: a.rows(),
                rhs: b.len(),
            });
        }
        let interior = interior.unwrap_or_else(|| vec![T::zero(); a.cols()]);
        let set = Self::Polytope { a, b, interior };
        let viol = set.max_violation(set.interior_point().as_slice());
        if viol > T::zero() {
            return Err(ModelError::EmptySet(viol.as_f64()));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } => lower.len(),
            Self::Polytope { a, .. } => a.cols(),
        }
    }

    /// Halfspace form `A u ≤ b`; a box yields `[I; −I] u ≤ [upper; −lower]`.
    pub fn halfspaces(&self) -> (Mat<T>, Vec<T>) {
        match self {
            Self::Box { lower, upper } => {
                let m = lower.len();
                let mut a = Mat::zeros(2 * m, m);
                let mut b = Vec::with_capacity(2 * m);
                for k in 0..m {
                    a[(2 * k, k)] = T::one();
                    b.push(upper[k]);
                    a[(2 * k + 1, k)] = -T::one();
                    b.push(-lower[k]);
                }
                (a, b)
            }
            Self::Polytope { a, b, .. } => (a.clone(), b.clone()),
        }
    }

    /// Number of scalar inequalities `G(u) ≤ 0` describing the set.
    pub fn num_rows(&self) -> usize {
        match self {
            Self::Box { lower, .. } => 2 * lower.len(),
            Self::Polytope { a, .. } => a.rows(),
        }
    }

    pub fn interior_point(&self) -> Vec<T> {
        match self {
            Self::Box { lower, upper } => {
                let half = T::lit(0.5);
                lower.iter().zip(upper).map(|(&l, &u)| (l + u) * half).collect()
            }
            Self::Polytope { interior, .. } => interior.clone(),
        }
    }

    /// Largest amount by which any inequality is violated (≤ 0 inside).
    pub fn max_violation(&self, u: &[T]) -> T {
        match self {
            Self::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .zip(u)
                .map(|((&l, &h), &x)| (l - x).max(x - h))
                .fold(T::neg_infinity(), T::max),
            Self::Polytope { a, b, .. } => a
                .matvec(u)
                .iter()
                .zip(b)
                .map(|(&au, &bi)| au - bi)
                .fold(T::neg_infinity(), T::max),
        }
    }

    pub fn contains(&self, u: &[T], tol: T) -> bool {
        self.max_violation(u) <= tol
    }

    /// Scales `u` toward the interior point until it lies in the set; points already
    /// inside are returned unchanged.
    pub fn saturate(&self, u: &[T]) -> Vec<T> {
        if self.contains(u, T::zero()) {
            return u.to_vec();
        }
        let c = self.interior_point();
        let dir: Vec<T> = u.iter().zip(&c).map(|(&a, &b)| a - b).collect();
        let (a, b) = self.halfspaces();
        let ac = a.matvec(&c);
        let ad = a.matvec(&dir);
        let mut alpha = T::one();
        for k in 0..b.len() {
            if ad[k] > T::zero() {
                alpha = alpha.min((b[k] - ac[k]) / ad[k]);
            }
        }
        // shave off rounding so the result tests inside
        alpha = (alpha * (T::one() - T::lit(1e-12))).max(T::zero());
        let mut out: Vec<T> = c.iter().zip(&dir).map(|(&ci, &di)| ci + alpha * di).collect();
        if !self.contains(&out, T::zero()) {
            out = c;
        }
        out
    }
}

/// Differential-drive wheel-speed limits as a diamond in `(v, ω)`:
/// `2 ω_min r ≤ 2 v ± ω d ≤ 2 ω_max r` with `ω_min = −ω_max`.
pub fn diamond_wheel_set<T: Scalar>(
    wheel_radius: T,
    wheel_separation: T,
    wheel_speed_max: T,
) -> Result<ControlSet<T>, ModelError> {
    let z = T::zero();
    if !(wheel_radius > z && wheel_separation > z && wheel_speed_max > z) {
        return Err(ModelError::BadWheelParams);
    }
    let two = T::lit(2.0);
    let d = wheel_separation;
    let hi = two * wheel_speed_max * wheel_radius;
    let lo = -hi;
    let a = Mat::from_row_slice(4, 2, &[two, d, -two, -d, two, -d, -two, d]);
    ControlSet::polytope(a, vec![hi, -lo, hi, -lo], None)
}

/// Circle obstacle on the position sub-state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle<T> {
    pub center: [T; 2],
    pub radius: T,
}

/// Linear bound `lower ≤ x[component] ≤ upper` on one state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateBound<T> {
    pub component: usize,
    pub lower: T,
    pub upper: T,
}

/// Known environment: circle obstacles plus optional coordinate bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleField<T> {
    pub circles: Vec<Circle<T>>,
    pub corridor: Vec<CoordinateBound<T>>,
}

impl<T: Scalar> ObstacleField<T> {
    pub fn new(circles: Vec<Circle<T>>, corridor: Vec<CoordinateBound<T>>) -> Result<Self, ModelError> {
        for c in &circles {
            if !(c.radius > T::zero()) {
                return Err(ModelError::BadRadius(c.radius.as_f64()));
            }
        }
        Ok(Self { circles, corridor })
    }

    /// `h_i(x) = ‖pos(x) − c_i‖² − r_i²` for each circle.
    pub fn clearances(&self, x: &[T]) -> Vec<T> {
        self.circles
            .iter()
            .map(|c| {
                let dx = x[0] - c.center[0];
                let dy = x[1] - c.center[1];
                dx * dx + dy * dy - c.radius * c.radius
            })
            .collect()
    }

    /// `∂h_i/∂(p_x, p_y)`.
    pub fn clearance_gradient(&self, i: usize, x: &[T]) -> [T; 2] {
        let c = &self.circles[i];
        let two = T::lit(2.0);
        [two * (x[0] - c.center[0]), two * (x[1] - c.center[1])]
    }

    pub fn is_safe(&self, x: &[T], tol: T) -> bool {
        self.clearances(x).iter().all(|&h| h >= -tol)
            && self
                .corridor
                .iter()
                .all(|b| x[b.component] >= b.lower - tol && x[b.component] <= b.upper + tol)
    }
}

/// One classical RK4 step of `ẋ = f(x) + g(x) u(t)`, sampling the control at
/// `t`, `t + dt/2` and `t + dt`.
pub fn rk4_step<T: Scalar>(model: &dyn ControlAffine<T>, x: &[T], u_of_t: impl Fn(T) -> Vec<T>, t: T, dt: T) -> Vec<T> {
    let half = dt * T::lit(0.5);
    let axpy = |a: T, v: &[T]| -> Vec<T> { x.iter().zip(v).map(|(&xi, &vi)| xi + a * vi).collect() };
    let u_mid = u_of_t(t + half);
    let k1 = model.xdot(x, &u_of_t(t));
    let k2 = model.xdot(&axpy(half, &k1), &u_mid);
    let k3 = model.xdot(&axpy(half, &k2), &u_mid);
    let k4 = model.xdot(&axpy(dt, &k3), &u_of_t(t + dt));
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

/// Time derivative together with its Jacobians in state and parameters.
pub struct RateJacobian<T> {
    pub xdot: Vec<T>,
    /// `∂ẋ/∂x`
    pub dx: Mat<T>,
    /// `∂ẋ/∂θ`
    pub dp: Mat<T>,
}

/// Result of an RK4 step with first-order sensitivities.
pub struct Rk4Sensitivity<T> {
    pub x_next: Vec<T>,
    pub dx: Mat<T>,
    pub dp: Mat<T>,
}

/// RK4 step of a parameterized rate `ẋ = F(x, t; θ)` returning `x⁺`, `∂x⁺/∂x` and
/// `∂x⁺/∂θ`, the exact derivatives of the discrete map.
pub fn rk4_sensitivity<T: Scalar>(
    x: &[T],
    n_params: usize,
    t: T,
    dt: T,
    rate: impl Fn(&[T], T) -> RateJacobian<T>,
) -> Rk4Sensitivity<T> {
    let nx = x.len();
    let half = dt * T::lit(0.5);
    let eye = Mat::identity(nx);

    let r1 = rate(x, t);
    let s1x = r1.dx.clone();
    let s1p = r1.dp.clone();

    let x2: Vec<T> = (0..nx).map(|i| x[i] + half * r1.xdot[i]).collect();
    let r2 = rate(&x2, t + half);
    let s2x = r2.dx.matmul(&(&eye + &s1x.scale(half)));
    let s2p = &r2.dx.matmul(&s1p.scale(half)) + &r2.dp;

    let x3: Vec<T> = (0..nx).map(|i| x[i] + half * r2.xdot[i]).collect();
    let r3 = rate(&x3, t + half);
    let s3x = r3.dx.matmul(&(&eye + &s2x.scale(half)));
    let s3p = &r3.dx.matmul(&s2p.scale(half)) + &r3.dp;

    let x4: Vec<T> = (0..nx).map(|i| x[i] + dt * r3.xdot[i]).collect();
    let r4 = rate(&x4, t + dt);
    let s4x = r4.dx.matmul(&(&eye + &s3x.scale(dt)));
    let s4p = &r4.dx.matmul(&s3p.scale(dt)) + &r4.dp;

    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let x_next = (0..nx)
        .map(|i| x[i] + sixth * (r1.xdot[i] + two * r2.xdot[i] + two * r3.xdot[i] + r4.xdot[i]))
        .collect();
    let combine = |a: &Mat<T>, b: &Mat<T>, c: &Mat<T>, d: &Mat<T>| -> Mat<T> {
        let sum = &(&(a + &b.scale(two)) + &c.scale(two)) + d;
        sum.scale(sixth)
    };
    let dx = &eye + &combine(&s1x, &s2x, &s3x, &s4x);
    let dp = combine(&s1p, &s2p, &s3p, &s4p);
    debug_assert_eq!(dp.cols(), n_params);
    Rk4Sensitivity { x_next, dx, dp }
}

/// `g′(x) = (Γ_i(t) M_i) ⊗ g(x)` for the span containing `t`; it multiplies the
/// stacked active control points `vec(Q̄ᵀ) = [q̄_first; …; q̄_{first+p}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedGain<T> {
    pub first: usize,
    pub gain: Mat<T>,
}

pub fn lifted_gain<T: Scalar>(
    model: &dyn ControlAffine<T>,
    basis: &SplineBasis<T>,
    x: &[T],
    t: T,
) -> Result<LiftedGain<T>, SplineError> {
    let sw = basis.span_weights(t)?;
    let row = Mat::row_vector(&sw.weights);
    Ok(LiftedGain {
        first: sw.first,
        gain: kron(&row, &model.gain(x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;

    fn decay() -> ControlAffineModel<f64> {
        ControlAffineModel::new(FnModel {
            name: "decay".into(),
            dim_x: 1,
            dim_u: 1,
            drift: Box::new(|x: &[f64]| vec![-x[0]]),
            gain: Box::new(|_x: &[f64]| Mat::zeros(1, 1)),
        })
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn unicycle_rates() {
        let m = unicycle::<f64>();
        assert!(close(&m.xdot(&[0.0, 0.0, 0.0], &[1.0, 0.0]), &[1.0, 0.0, 0.0], 0.0));
        assert!(close(
            &m.xdot(&[0.0, 0.0, FRAC_PI_2], &[1.0, 0.0]),
            &[0.0, 1.0, 0.0],
            1e-15
        ));
        assert!(close(&m.xdot(&[0.0, 0.0, 0.0], &[0.0, 1.0]), &[0.0, 0.0, 1.0], 0.0));
    }

    #[test]
    fn ackermann_rates() {
        let m = ackermann(1.0).unwrap();
        assert!(close(&m.xdot(&[0.0; 4], &[1.0, 0.0]), &[1.0, 0.0, 0.0, 0.0], 0.0));
        assert!(close(
            &m.xdot(&[0.0, 0.0, 0.0, 0.3], &[0.0, 1.0]),
            &[0.0, 0.0, 0.0, 1.0],
            0.0
        ));
        assert!(close(
            &m.xdot(&[0.0, 0.0, 0.0, FRAC_PI_4], &[1.0, 0.0]),
            &[1.0, 0.0, 1.0, 0.0],
            1e-15
        ));
        assert_eq!(ackermann(0.0).unwrap_err(), ModelError::BadWheelbase(0.0));
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let x = [0.3, -1.0, 0.7, 0.2];
        let u = [0.8, -0.4];
        let car = Ackermann { wheelbase: 1.75 };
        let fd = central_jacobian(&x, |xs| car.gain(xs).matvec(&u));
        assert!(car.gain_action_jacobian(&x, &u).max_abs_diff(&fd) < 1e-8);
        let uni = Unicycle;
        let fd = central_jacobian(&x[..3], |xs| ControlAffine::<f64>::gain(&uni, xs).matvec(&u));
        assert!(uni.gain_action_jacobian(&x[..3], &u).max_abs_diff(&fd) < 1e-8);
    }

    #[test]
    fn diamond_membership() {
        let set = diamond_wheel_set::<f64>(0.33, 0.67, 3.0).unwrap();
        assert!(set.contains(&[0.0, 0.0], 0.0));
        assert!(set.max_violation(&[0.99, 0.0]).abs() < 1e-12);
        assert!(!set.contains(&[0.99, 0.1], 1e-9));
        assert_eq!(set.num_rows(), 4);
    }

    #[test]
    fn box_and_polytope_membership_agree() {
        let bx = ControlSet::boxed(vec![-1.0, -2.0], vec![1.0, 0.5]).unwrap();
        let (a, b) = bx.halfspaces();
        let poly = ControlSet::polytope(a, b, Some(vec![0.0, -0.5])).unwrap();
        for &u in &[[0.0, 0.0], [1.0, 0.5], [1.01, 0.0], [-1.0, -2.1], [0.3, 0.6]] {
            assert_eq!(bx.contains(&u, 0.0), poly.contains(&u, 0.0));
            let direct = u[0] >= -1.0 && u[0] <= 1.0 && u[1] >= -2.0 && u[1] <= 0.5;
            assert_eq!(bx.contains(&u, 0.0), direct);
        }
    }

    #[test]
    fn set_construction_errors() {
        assert_eq!(ControlSet::boxed(vec![1.0], vec![0.0]), Err(ModelError::BadBox(0)));
        let a = Mat::from_rows(&[vec![1.0, 0.0]]);
        assert!(matches!(
            ControlSet::polytope(a, vec![-1.0], None),
            Err(ModelError::EmptySet(_))
        ));
        assert!(diamond_wheel_set(0.0, 0.67, 3.0).is_err());
    }

    #[test]
    fn saturation_scales_into_set() {
        let set = diamond_wheel_set::<f64>(0.33, 0.67, 3.0).unwrap();
        let inside = [0.2, 0.3];
        assert_eq!(set.saturate(&inside), inside.to_vec());
        let out = set.saturate(&[2.0, 1.0]);
        assert!(set.contains(&out, 0.0));
        // same direction as the request
        assert!((out[0] / out[1] - 2.0).abs() < 1e-9);
        assert!(set.max_violation(&out) > -1e-9);
    }

    #[test]
    fn obstacle_clearance() {
        let field = ObstacleField::<f64>::new(
            vec![Circle {
                center: [1.0, 0.0],
                radius: 0.5,
            }],
            vec![],
        )
        .unwrap();
        assert!((field.clearances(&[0.0, 0.0, 3.0])[0] - 0.75).abs() < 1e-15);
        assert!(!field.is_safe(&[1.1, 0.0, 0.0], 0.0));
        assert!(ObstacleField::new(
            vec![Circle {
                center: [0.0, 0.0],
                radius: 0.0
            }],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn rk4_decay_and_identity() {
        let m = decay();
        let x = rk4_step(&*m, &[1.0], |_| vec![0.0], 0.0, 0.1);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-6);
        assert!((x[0] - 0.9048375).abs() < 1e-6);
        let still = ControlAffineModel::new(FnModel {
            name: "still".into(),
            dim_x: 2,
            dim_u: 1,
            drift: Box::new(|_x: &[f64]| vec![0.0, 0.0]),
            gain: Box::new(|_x: &[f64]| Mat::from_rows(&[vec![1.0], vec![2.0]])),
        });
        assert_eq!(
            rk4_step(&*still, &[0.4, -3.0], |_| vec![0.0], 0.0, 0.5),
            vec![0.4, -3.0]
        );
    }

    #[test]
    fn rk4_fourth_order() {
        let m = decay();
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut x = vec![1.0];
            for k in 0..n {
                x = rk4_step(&*m, &x, |_| vec![0.0], k as f64 * dt, dt);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
        assert!(ratio.log2() >= 3.8);
    }

    #[test]
    fn sensitivity_matches_differences() {
        let model = Ackermann { wheelbase: 1.2 };
        let rate = |x: &[f64], t: f64, th: &[f64]| {
            let u = [th[0] + t * th[1], th[2]];
            RateJacobian {
                xdot: model.xdot(x, &u),
                dx: model.gain_action_jacobian(x, &u),
                dp: model
                    .gain(x)
                    .matmul(&Mat::from_rows(&[vec![1.0, t, 0.0], vec![0.0, 0.0, 1.0]])),
            }
        };
        let x0 = [0.1, 0.2, 0.5, 0.1];
        let th = [0.9, -0.3, 0.2];
        let sens = rk4_sensitivity(&x0, 3, 0.2, 0.1, |x, t| rate(x, t, &th));
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let fp = rk4_sensitivity(&xp, 3, 0.2, 0.1, |x, t| rate(x, t, &th)).x_next;
            let fm = rk4_sensitivity(&xm, 3, 0.2, 0.1, |x, t| rate(x, t, &th)).x_next;
            for i in 0..4 {
                assert!((sens.dx[(i, j)] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-8);
            }
        }
        for j in 0..3 {
            let mut tp = th;
            let mut tm = th;
            tp[j] += h;
            tm[j] -= h;
            let fp = rk4_sensitivity(&x0, 3, 0.2, 0.1, |x, t| rate(x, t, &tp)).x_next;
            let fm = rk4_sensitivity(&x0, 3, 0.2, 0.1, |x, t| rate(x, t, &tm)).x_next;
            for i in 0..4 {
                assert!((sens.dp[(i, j)] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lifted_gain_degenerate_cases() {
        let basis = SplineBasis::clamped_uniform(0, 3, 1.0).unwrap();
        let m = unicycle::<f64>();
        let x = [0.0, 1.0, 0.4];
        let lg = lifted_gain(&*m, &basis, &x, 0.5).unwrap();
        assert_eq!(lg.gain, m.gain(&x));
        assert_eq!(lg.first, 1);
        let zero = ControlAffineModel::new(FnModel {
            name: "zero".into(),
            dim_x: 2,
            dim_u: 2,
            drift: Box::new(|_x: &[f64]| vec![0.0, 0.0]),
            gain: Box::new(|_x: &[f64]| Mat::zeros(2, 2)),
        });
        let cubic = SplineBasis::clamped_uniform(3, 5, 1.0).unwrap();
        let lg = lifted_gain(&*zero, &cubic, &[1.0, 2.0], 0.3).unwrap();
        assert_eq!(lg.gain.shape(), (2, 8));
        assert_eq!(lg.gain.max_abs(), 0.0);
        assert!(lifted_gain(&*zero, &cubic, &[1.0, 2.0], 1.3).is_err());
    }
}
