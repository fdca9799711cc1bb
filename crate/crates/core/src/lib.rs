//! Explicit optimal principal-agent contracting under exogenous shutdown risk.
//!
//! A principal hires an agent to run a project whose output is a drifted
//! Brownian motion. Production can be halted for good at an exogenous random
//! time with deterministic intensity, independent of the output noise and of
//! the agent's effort. Both parties have CARA preferences and the agent pays
//! a quadratic effort cost. In this setting the optimal contract is known in
//! closed form, for three problem variants:
//!
//! * **first best** (full risk sharing): effort is observable and dictated;
//! * **moral hazard**: effort is hidden and must be incentivized;
//! * **moral hazard with mitigation**: upon a halt the principal may pay a
//!   sunk cost to restart production at a degraded level.
//!
//! In every variant the optimal wage splits into a Holmstrom-Milgrom style
//! linear incentive component plus a default-compensation schedule `K*(t)`
//! driven by a scalar value multiplier `phi0(t)` that solves a Bernoulli ODE.
//! This crate computes those closed forms, cross-checks them against
//! independent numerical routes (backward Runge-Kutta integration, adaptive
//! quadrature, Monte-Carlo simulation of the wage/output dynamics), and
//! certifies optimality through HJB residuals, Hamiltonian grid argmin
//! checks, and agent-deviation tests.
//!
//! Modules map onto that pipeline:
//!
//! * [`model`] - exogenous parameters, intensity specification, validation;
//! * [`bernoulli`] - the Bernoulli ODE in closed form, by backward RK4, and
//!   in integral form (the numerical routes are the oracles for the closed
//!   forms);
//! * [`contract`] - assembled optimal contracts and the derived analytics
//!   (sign of `K*`, linear risk-share decomposition, expected risk-share
//!   payment, value ratios);
//! * [`mitigation`] - the investment extension (continuation rate, cutoff
//!   time, invest/no-invest rule);
//! * [`solver`] - the strategy registry dispatching a problem variant to its
//!   solver by name;
//! * [`simulate`] - reproducible parallel Monte-Carlo of the jump-diffusion
//!   wage and output paths;
//! * [`verify`] - HJB residual grids, Hamiltonian argmin, deviation and
//!   participation checks.

pub mod bernoulli;
pub mod contract;
pub mod mitigation;
pub mod model;
pub mod simulate;
pub mod solver;
pub mod verify;

pub use bernoulli::{BernoulliCoefficients, PhiFunction, TimeFn};
pub use contract::{ContractSolution, KSign, SolveError};
pub use model::{IntensitySpec, ModelConfig, ModelParams, ProblemVariant, ValidationReport};
pub use simulate::{SimConfig, SimReport, WagePolicy};
pub use solver::{solver_for, SolverRegistry, VariantSolver};
