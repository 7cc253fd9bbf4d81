//! Coupled dynamics of population behavior and environmental impact.
//!
//! A population of `n` agents on a directed influence network switches
//! between responsible and irresponsible behavior under conformity-driven
//! imitation, while a scalar impact variable grows or decays exponentially
//! depending on the irresponsible fraction. The crate provides three layers
//! of the same model plus analysis tooling:
//!
//! - [`model`]: parameters, incentive functions, Poisson-clock transition
//!   rates, and the impact growth rate. Everything else computes through it.
//! - [`abm`]: exact event-driven simulation of the n-agent continuous-time
//!   Markov process coupled to the impact ODE, plus a dense generator-matrix
//!   oracle for small populations.
//! - [`meanfield`]: the n-node mean-field ODE system on arbitrary graphs and
//!   the reduced planar macroscopic system, integrated with an adaptive
//!   Dormand-Prince 5(4) pair with dense output.
//! - [`analysis`]: closed-form equilibria, Jacobian eigenvalues and
//!   classification, limit-cycle detection via Poincare sections, and
//!   boundary-behavior checks.
//! - [`control`]: impact-feedback policies for the campaign and subsidy
//!   parameters, and policy comparison over transient peaks.
//!
//! Core math is generic over the scalar type via [`Scalar`] (`f32` or `f64`);
//! the `*64` aliases at the crate root fix `f64`, which all default
//! tolerances assume.

// Negated comparisons in validators fail closed on NaN; indexed loops
// mirror the component arithmetic they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_div_ceil)]

pub mod abm;
pub mod analysis;
pub mod control;
mod error;
pub mod meanfield;
pub mod model;
mod ode;
mod scalar;

pub use error::CoreError;
pub use scalar::Scalar;

pub use model::{BehaviorVector, Graph};

/// Model parameters over `f64`.
pub type ModelParams64 = model::ModelParams<f64>;
/// Stochastic-layer state over `f64`.
pub type PopulationState64 = abm::PopulationState<f64>;
/// Event-driven sample path over `f64`.
pub type EventTrajectory64 = abm::EventTrajectory<f64>;
/// Dense configuration-space rate matrix over `f64`.
pub type GeneratorMatrix64 = abm::GeneratorMatrix<f64>;
/// Macroscopic mean-field state over `f64`.
pub type PlanarState64 = meanfield::PlanarState<f64>;
/// Per-node marginal probabilities over `f64`.
pub type NodeProbabilities64 = meanfield::NodeProbabilities<f64>;
/// Dense-output ODE trajectory over `f64`.
pub type Trajectory64 = meanfield::Trajectory<f64>;
/// Equilibrium location, eigenvalues, and class over `f64`.
pub type EquilibriumReport64 = analysis::EquilibriumReport<f64>;
/// Poincare-section cycle report over `f64`.
pub type CycleReport64 = analysis::CycleReport<f64>;
/// Impact-feedback policy over `f64`.
pub type ControlPolicy64 = control::ControlPolicy<f64>;
/// Per-policy transient and cycle summary over `f64`.
pub type PolicyComparison64 = control::PolicyComparison<f64>;
