//! Clamped B-spline knots, Cox–de Boor basis functions, per-span basis matrices and
//! matrix-form evaluation of control-space splines.
//!
//! Spans are addressed by their knot index `i`, i.e. the span `[τ_i, τ_{i+1})`. A
//! span of a degree-`p` spline is driven by the `p + 1` control points
//! `q̄_{i-p} ..= q̄_i`, and on it the curve is `Γ(𝒯) · M_i · [q̄_{i-p}; …; q̄_i]` with
//! `Γ(𝒯) = [1, 𝒯, …, 𝒯^p]` and `𝒯 = (t − τ_i) / (τ_{i+1} − τ_i)`.

use thiserror::Error;

use crate::linop::Mat;
use crate::scalar::{safe_ratio, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("need at least degree + 1 = {min} control points, got {got}")]
    TooFewControlPoints { min: usize, got: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("knots must be finite and non-decreasing (violated at index {0})")]
    Unsorted(usize),
    #[error("knot vector of length {len} is too short for degree {degree}")]
    TooShort { len: usize, degree: usize },
    #[error("interior knots of a clamped vector must be strictly increasing (index {0})")]
    RepeatedInteriorKnot(usize),
    #[error("t = {t} lies outside the knot range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("span {0} is empty")]
    EmptySpan(usize),
    #[error("span {span} is not a valid degree-{degree} span for {len} knots")]
    InvalidSpan { span: usize, degree: usize, len: usize },
    #[error("basis function index {index} out of range for {len} knots and degree {degree}")]
    InvalidIndex { index: usize, degree: usize, len: usize },
    #[error("control point matrix has {got} rows, basis expects {expected}")]
    ControlPointCount { expected: usize, got: usize },
}

/// Non-decreasing knot sequence `τ_0 ..= τ_m` of a degree-`p` spline.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    knots: Vec<T>,
    degree: usize,
}

impl<T: Scalar> KnotVector<T> {
    /// Validates an arbitrary non-decreasing knot sequence.
    pub fn new(knots: Vec<T>, degree: usize) -> Result<Self, SplineError> {
        if knots.len() < 2 * degree + 2 {
            return Err(SplineError::TooShort {
                len: knots.len(),
                degree,
            });
        }
        for (j, w) in knots.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() || w[1] < w[0] {
                return Err(SplineError::Unsorted(j + 1));
            }
        }
        let kv = Self { knots, degree };
        if kv.knots[kv.last_index()] == kv.knots[0] {
            return Err(SplineError::EmptySpan(degree));
        }
        Ok(kv)
    }

    /// Uniform clamped knots on `[0, horizon]`: `p + 1` zeros, uniformly spaced
    /// interior knots, then `p + 1` copies of `horizon`.
    pub fn clamped_uniform(degree: usize, n_ctrl: usize, horizon: T) -> Result<Self, SplineError> {
        if n_ctrl < degree + 1 {
            return Err(SplineError::TooFewControlPoints {
                min: degree + 1,
                got: n_ctrl,
            });
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(SplineError::BadHorizon(horizon.as_f64()));
        }
        let segments = n_ctrl - degree;
        let mut knots = Vec::with_capacity(n_ctrl + degree + 1);
        knots.extend(std::iter::repeat(T::zero()).take(degree + 1));
        for j in 1..segments {
            knots.push(horizon * T::from_count(j) / T::from_count(segments));
        }
        knots.extend(std::iter::repeat(horizon).take(degree + 1));
        let kv = Self::new(knots, degree)?;
        kv.check_clamped()?;
        Ok(kv)
    }

    fn check_clamped(&self) -> Result<(), SplineError> {
        let p = self.degree;
        let n = self.num_control_points() - 1;
        for j in p..=n {
            if self.knots[j + 1] <= self.knots[j] {
                return Err(SplineError::RepeatedInteriorKnot(j + 1));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.knots
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Index `m` of the last knot.
    #[inline]
    pub fn last_index(&self) -> usize {
        self.knots.len() - 1
    }

    /// `n + 1 = m − p`.
    #[inline]
    pub fn num_control_points(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    #[inline]
    pub fn start(&self) -> T {
        self.knots[0]
    }

    #[inline]
    pub fn end(&self) -> T {
        self.knots[self.last_index()]
    }

    /// Span indices `i ∈ p ..= n` with `τ_i < τ_{i+1}`.
    pub fn nonempty_spans(&self) -> Vec<usize> {
        let n = self.num_control_points() - 1;
        (self.degree..=n)
            .filter(|&i| self.knots[i] < self.knots[i + 1])
            .collect()
    }

    fn check_range(&self, t: T) -> Result<(), SplineError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(SplineError::OutOfRange {
                t: t.as_f64(),
                lo: self.start().as_f64(),
                hi: self.end().as_f64(),
            });
        }
        Ok(())
    }

    /// Span `i ∈ p ..= n` with `τ_i ≤ t < τ_{i+1}`; the right end of the domain
    /// `τ_{n+1}` maps to the last nonempty span.
    pub fn find_span(&self, t: T) -> Result<usize, SplineError> {
        self.check_range(t)?;
        let p = self.degree;
        let n = self.num_control_points() - 1;
        if t >= self.knots[n + 1] {
            return Ok(self.last_nonempty_span());
        }
        if t <= self.knots[p] {
            return Ok(self.first_nonempty_span());
        }
        // largest i in [p, n] with τ_i <= t
        let (mut lo, mut hi) = (p, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn first_nonempty_span(&self) -> usize {
        let n = self.num_control_points() - 1;
        (self.degree..=n)
            .find(|&i| self.knots[i] < self.knots[i + 1])
            .unwrap_or(self.degree)
    }

    fn last_nonempty_span(&self) -> usize {
        let n = self.num_control_points() - 1;
        (self.degree..=n)
            .rev()
            .find(|&i| self.knots[i] < self.knots[i + 1])
            .unwrap_or(n)
    }
}

/// Uniform clamped knot vector for `n_ctrl` control points over `[0, horizon]`.
pub fn make_clamped_uniform<T: Scalar>(degree: usize, n_ctrl: usize, horizon: T) -> Result<KnotVector<T>, SplineError> {
    KnotVector::clamped_uniform(degree, n_ctrl, horizon)
}

/// `N_{i,p}(t)` by the Cox–de Boor recursion with `0/0 = 0`.
///
/// At the right end of the knot range the left limit is returned, so on clamped
/// knots the last basis function evaluates to 1 there.
pub fn basis_function<T: Scalar>(i: usize, p: usize, t: T, knots: &KnotVector<T>) -> Result<T, SplineError> {
    let tau = knots.as_slice();
    if i + p + 1 >= tau.len() {
        return Err(SplineError::InvalidIndex {
            index: i,
            degree: p,
            len: tau.len(),
        });
    }
    knots.check_range(t)?;
    Ok(cox_de_boor(i, p, t, tau))
}

fn cox_de_boor<T: Scalar>(i: usize, p: usize, t: T, tau: &[T]) -> T {
    if p == 0 {
        let end = tau[tau.len() - 1];
        let inside = tau[i] <= t && t < tau[i + 1];
        // closed right end on the last nonempty span
        let at_end = t == end && tau[i] < tau[i + 1] && tau[i + 1] == end;
        return if inside || at_end { T::one() } else { T::zero() };
    }
    let left = safe_ratio(t - tau[i], tau[i + p] - tau[i]);
    let right = safe_ratio(tau[i + p + 1] - t, tau[i + p + 1] - tau[i + 1]);
    let mut acc = T::zero();
    if left != T::zero() {
        acc += left * cox_de_boor(i, p - 1, t, tau);
    }
    if right != T::zero() {
        acc += right * cox_de_boor(i + 1, p - 1, t, tau);
    }
    acc
}

/// Basis matrix `M_i` of span `[τ_i, τ_{i+1})` for degree `p`, built bottom-up from
/// the order-1 matrix `[1]` by `M^{k} = [M^{k-1}; 0] D_0 + [0; M^{k-1}] D_1`.
pub fn basis_matrix<T: Scalar>(i: usize, p: usize, knots: &KnotVector<T>) -> Result<Mat<T>, SplineError> {
    let tau = knots.as_slice();
    if i < p || i + p + 1 >= tau.len() {
        return Err(SplineError::InvalidSpan {
            span: i,
            degree: p,
            len: tau.len(),
        });
    }
    let width = tau[i + 1] - tau[i];
    if !(width > T::zero()) {
        return Err(SplineError::EmptySpan(i));
    }
    let mut m = Mat::identity(1);
    for k in 2..=p + 1 {
        // rows of D_0 / D_1 correspond to j = i-k+2 ..= i
        let mut next = Mat::zeros(k, k);
        for r in 0..k - 1 {
            let j = i + r + 2 - k;
            let den = tau[j + k - 1] - tau[j];
            let d0 = safe_ratio(tau[i] - tau[j], den);
            let d1 = safe_ratio(width, den);
            for row in 0..k - 1 {
                let c = m[(row, r)];
                if c == T::zero() {
                    continue;
                }
                // [M; 0] D_0 contributes to the same row, [0; M] D_1 one row down
                next[(row, r)] += c * (T::one() - d0);
                next[(row, r + 1)] += c * d0;
                next[(row + 1, r)] -= c * d1;
                next[(row + 1, r + 1)] += c * d1;
            }
        }
        m = next;
    }
    Ok(m)
}

/// Monomial row `Γ(𝒯) = [1, 𝒯, …, 𝒯^p]`.
pub fn monomial_row<T: Scalar>(u: T, p: usize) -> Vec<T> {
    let mut row = Vec::with_capacity(p + 1);
    let mut acc = T::one();
    for _ in 0..=p {
        row.push(acc);
        acc *= u;
    }
    row
}

/// Basis matrices of every nonempty span, computed once per knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis<T> {
    knots: KnotVector<T>,
    spans: Vec<usize>,
    matrices: Vec<Mat<T>>,
}

/// Blend weights of the active control points at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanWeights<T> {
    /// Knot index of the span containing `t`.
    pub span: usize,
    /// Index of the first active control point, `span − p`.
    pub first: usize,
    /// `Γ_i(t) M_i`, one weight per active control point.
    pub weights: Vec<T>,
}

impl<T: Scalar> SplineBasis<T> {
    pub fn new(knots: KnotVector<T>) -> Result<Self, SplineError> {
        let p = knots.degree();
        let spans = knots.nonempty_spans();
        let matrices = spans
            .iter()
            .map(|&i| basis_matrix(i, p, &knots))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { knots, spans, matrices })
    }

    pub fn clamped_uniform(degree: usize, n_ctrl: usize, horizon: T) -> Result<Self, SplineError> {
        Self::new(KnotVector::clamped_uniform(degree, n_ctrl, horizon)?)
    }

    #[inline]
    pub fn knots(&self) -> &KnotVector<T> {
        &self.knots
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    #[inline]
    pub fn num_control_points(&self) -> usize {
        self.knots.num_control_points()
    }

    /// Number of nonempty segments; `n + 1 − p` on clamped knots.
    #[inline]
    pub fn segment_count(&self) -> usize {
        self.spans.len()
    }

    /// Knot indices of the segments, in time order.
    #[inline]
    pub fn spans(&self) -> &[usize] {
        &self.spans
    }

    /// `M_i` of the `s`-th segment.
    #[inline]
    pub fn segment_matrix(&self, s: usize) -> &Mat<T> {
        &self.matrices[s]
    }

    /// Segment position of the span containing `t`.
    pub fn segment_at(&self, t: T) -> Result<usize, SplineError> {
        let span = self.knots.find_span(t)?;
        Ok(self
            .spans
            .binary_search(&span)
            .expect("find_span returns a nonempty span"))
    }

    /// Width `τ_{i+1} − τ_i` of the `s`-th segment.
    pub fn segment_width(&self, s: usize) -> T {
        let i = self.spans[s];
        let tau = self.knots.as_slice();
        tau[i + 1] - tau[i]
    }

    /// `Γ_i(t) M_i` for the span containing `t`.
    pub fn span_weights(&self, t: T) -> Result<SpanWeights<T>, SplineError> {
        let s = self.segment_at(t)?;
        let span = self.spans[s];
        let tau = self.knots.as_slice();
        let u = (t - tau[span]) / (tau[span + 1] - tau[span]);
        let p = self.degree();
        let clamped_end = |k: T| tau.iter().filter(|&&v| v == k).count() > p;
        let weights = if t == self.knots.end() && clamped_end(t) {
            // exact interpolation of the last control point
            let mut w = vec![T::zero(); p + 1];
            w[p] = T::one();
            w
        } else if t == self.knots.start() && clamped_end(t) {
            let mut w = vec![T::zero(); p + 1];
            w[0] = T::one();
            w
        } else {
            let gamma = Mat::row_vector(&monomial_row(u, p));
            gamma.matmul(&self.matrices[s]).as_slice().to_vec()
        };
        Ok(SpanWeights {
            span,
            first: span - p,
            weights,
        })
    }

    /// All `n + 1` basis values `N_{j,p}(t)` via the span's basis matrix.
    pub fn blend_weights(&self, t: T) -> Result<Vec<T>, SplineError> {
        let sw = self.span_weights(t)?;
        let mut full = vec![T::zero(); self.num_control_points()];
        full[sw.first..sw.first + sw.weights.len()].copy_from_slice(&sw.weights);
        Ok(full)
    }
}

/// Control-space spline: a basis plus an `(n + 1) × dim_u` matrix of control points.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpline<T> {
    basis: SplineBasis<T>,
    control_points: Mat<T>,
}

impl<T: Scalar> ControlSpline<T> {
    pub fn new(basis: SplineBasis<T>, control_points: Mat<T>) -> Result<Self, SplineError> {
        let expected = basis.num_control_points();
        if control_points.rows() != expected {
            return Err(SplineError::ControlPointCount {
                expected,
                got: control_points.rows(),
            });
        }
        Ok(Self { basis, control_points })
    }

    #[inline]
    pub fn basis(&self) -> &SplineBasis<T> {
        &self.basis
    }

    #[inline]
    pub fn control_points(&self) -> &Mat<T> {
        &self.control_points
    }

    #[inline]
    pub fn dim_u(&self) -> usize {
        self.control_points.cols()
    }

    pub fn start(&self) -> T {
        self.basis.knots().start()
    }

    pub fn end(&self) -> T {
        self.basis.knots().end()
    }

    /// `u(t)` in matrix form.
    pub fn eval(&self, t: T) -> Result<Vec<T>, SplineError> {
        let sw = self.basis.span_weights(t)?;
        let mut u = vec![T::zero(); self.dim_u()];
        for (j, &w) in sw.weights.iter().enumerate() {
            for (uc, &q) in u.iter_mut().zip(self.control_points.row(sw.first + j)) {
                *uc += w * q;
            }
        }
        Ok(u)
    }

    /// `u(t)` with `t` clamped into the knot range.
    pub fn eval_clamped(&self, t: T) -> Vec<T> {
        let t = t.max(self.start()).min(self.end());
        self.eval(t).expect("clamped time lies in range")
    }
}

/// Evaluates the spline control signal at `t`.
pub fn eval_control<T: Scalar>(spline: &ControlSpline<T>, t: T) -> Result<Vec<T>, SplineError> {
    spline.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_bezier_knots() -> KnotVector<f64> {
        make_clamped_uniform(3, 4, 1.0).unwrap()
    }

    #[test]
    fn clamped_knot_examples() {
        assert_eq!(
            cubic_bezier_knots().as_slice(),
            &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(make_clamped_uniform(0, 1, 1.0).unwrap().as_slice(), &[0.0, 1.0]);
        let k = make_clamped_uniform::<f64>(2, 5, 1.0).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0];
        for (a, b) in k.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(k.len(), 5 + 2 + 1);
    }

    #[test]
    fn clamped_knot_errors() {
        assert_eq!(
            make_clamped_uniform(3, 3, 1.0),
            Err(SplineError::TooFewControlPoints { min: 4, got: 3 })
        );
        assert!(matches!(
            make_clamped_uniform(3, 4, 0.0),
            Err(SplineError::BadHorizon(_))
        ));
        assert!(matches!(
            make_clamped_uniform(3, 4, -1.0),
            Err(SplineError::BadHorizon(_))
        ));
        assert!(matches!(
            make_clamped_uniform(1, 4, f64::NAN),
            Err(SplineError::BadHorizon(_))
        ));
    }

    #[test]
    fn knot_vector_rejects_unsorted() {
        assert_eq!(
            KnotVector::new(vec![0.0, 1.0, 0.5, 2.0], 1),
            Err(SplineError::Unsorted(2))
        );
    }

    #[test]
    fn degree_zero_indicator() {
        let k = make_clamped_uniform(0, 1, 1.0).unwrap();
        assert_eq!(basis_function(0, 0, 0.0, &k).unwrap(), 1.0);
        assert_eq!(basis_function(0, 0, 0.7, &k).unwrap(), 1.0);
        // right end uses the closed last span
        assert_eq!(basis_function(0, 0, 1.0, &k).unwrap(), 1.0);
        let k2 = KnotVector::new(vec![0.0, 1.0, 2.0], 0).unwrap();
        assert_eq!(basis_function(0, 0, 1.5, &k2).unwrap(), 0.0);
        assert_eq!(basis_function(1, 0, 1.0, &k2).unwrap(), 1.0);
    }

    #[test]
    fn cubic_bernstein_at_half() {
        let k = cubic_bezier_knots();
        let vals: Vec<f64> = (0..4).map(|i| basis_function(i, 3, 0.5, &k).unwrap()).collect();
        assert_eq!(vals, vec![0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn basis_function_errors() {
        let k = cubic_bezier_knots();
        assert!(matches!(
            basis_function(0, 3, 1.5, &k),
            Err(SplineError::OutOfRange { .. })
        ));
        assert!(matches!(
            basis_function(0, 3, -0.1, &k),
            Err(SplineError::OutOfRange { .. })
        ));
        assert!(matches!(
            basis_function(4, 3, 0.5, &k),
            Err(SplineError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn cubic_basis_matrix_golden() {
        let m = basis_matrix(3, 3, &cubic_bezier_knots()).unwrap();
        let expected = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![-3.0, 3.0, 0.0, 0.0],
            vec![3.0, -6.0, 3.0, 0.0],
            vec![-1.0, 3.0, -3.0, 1.0],
        ]);
        assert_eq!(m, expected);
    }

    #[test]
    fn low_degree_basis_matrices() {
        let k0 = make_clamped_uniform(0, 1, 1.0).unwrap();
        assert_eq!(basis_matrix(0, 0, &k0).unwrap(), Mat::identity(1));
        let k1 = make_clamped_uniform(1, 2, 1.0).unwrap();
        assert_eq!(
            basis_matrix(1, 1, &k1).unwrap(),
            Mat::from_rows(&[vec![1.0, 0.0], vec![-1.0, 1.0]])
        );
    }

    #[test]
    fn basis_matrix_rejects_bad_spans() {
        let k = cubic_bezier_knots();
        assert_eq!(
            basis_matrix(2, 3, &k),
            Err(SplineError::InvalidSpan {
                span: 2,
                degree: 3,
                len: 8
            })
        );
        let k = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0], 1).unwrap();
        assert_eq!(basis_matrix(2, 1, &k), Err(SplineError::EmptySpan(2)));
    }

    #[test]
    fn segment_count_matches_clamped_formula() {
        for p in 0..4 {
            for n_ctrl in p + 1..p + 7 {
                let b = SplineBasis::<f64>::clamped_uniform(p, n_ctrl, 2.0).unwrap();
                assert_eq!(b.segment_count(), n_ctrl - p);
            }
        }
    }

    #[test]
    fn endpoints_interpolate() {
        let basis = SplineBasis::clamped_uniform(3, 6, 2.0).unwrap();
        let q = Mat::from_fn(6, 2, |r, c| (r as f64 + 1.0) * if c == 0 { 0.3 } else { -0.7 });
        let s = ControlSpline::new(basis, q.clone()).unwrap();
        assert_eq!(s.eval(0.0).unwrap(), q.row(0).to_vec());
        assert_eq!(s.eval(2.0).unwrap(), q.row(5).to_vec());
        assert!(s.eval(2.0 + 1e-9).is_err());
    }

    #[test]
    fn control_point_count_checked() {
        let basis = SplineBasis::<f64>::clamped_uniform(3, 4, 1.0).unwrap();
        assert_eq!(
            ControlSpline::new(basis, Mat::zeros(5, 2)),
            Err(SplineError::ControlPointCount { expected: 4, got: 5 })
        );
    }

    #[test]
    fn f32_spline_evaluates() {
        let basis = SplineBasis::<f32>::clamped_uniform(2, 4, 1.0).unwrap();
        let s = ControlSpline::new(basis, Mat::from_fn(4, 1, |_, _| 2.0)).unwrap();
        assert!((s.eval(0.37).unwrap()[0] - 2.0).abs() < 1e-6);
    }
}
