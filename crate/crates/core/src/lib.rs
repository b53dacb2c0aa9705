//! B-spline parameterized optimization-based planning.
//!
//! The planner optimizes control-space B-spline control points instead of a
//! sequence of discrete inputs, so the planned control signal is continuous in
//! time and can be tracked at any rate. A conventional discrete-time planner is
//! provided for comparison, together with a closed-loop simulation harness.
//!
//! The spline, cost and dynamics layers are generic over [`Scalar`] (`f32` or
//! `f64`); the transcription, solver and simulation layers work in `f64`.

pub mod costs;
pub mod dynamics;
pub mod linop;
pub mod nlp;
pub mod planners;
pub mod scalar;
pub mod simharness;
pub mod splinecore;

pub use scalar::Scalar;

pub type Mat64 = linop::Mat<f64>;
pub type Mat32 = linop::Mat<f32>;
pub type KnotVector64 = splinecore::KnotVector<f64>;
pub type KnotVector32 = splinecore::KnotVector<f32>;
pub type SplineBasis64 = splinecore::SplineBasis<f64>;
pub type SplineBasis32 = splinecore::SplineBasis<f32>;
pub type ControlSpline64 = splinecore::ControlSpline<f64>;
pub type ControlSpline32 = splinecore::ControlSpline<f32>;
pub type LambdaTable64 = costs::LambdaTable<f64>;
pub type LambdaTable32 = costs::LambdaTable<f32>;
pub type ControlSet64 = dynamics::ControlSet<f64>;
pub type ControlSet32 = dynamics::ControlSet<f32>;
pub type ObstacleField64 = dynamics::ObstacleField<f64>;
pub type ControlAffineModel64 = dynamics::ControlAffineModel<f64>;
pub type ControlAffineModel32 = dynamics::ControlAffineModel<f32>;
