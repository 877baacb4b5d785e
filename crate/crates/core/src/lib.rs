//! Finite-time stochastic feedback control of ODE systems.
//!
//! The crate is organised around two strategy families that are looked up by
//! name at runtime:
//!
//! * [`models`]: drift fields `f(x)` implementing [`models::Dynamics`], built
//!   through a [`models::ModelRegistry`].
//! * [`controllers`]: control laws implementing [`controllers::ControlLaw`],
//!   built through a [`controllers::ControllerRegistry`].
//!
//! [`engine`] integrates `dx = f(x) dt + u(x) dB` (or the noise-free
//! `dx = f(x) dt - u(x) dt` twin) with Euler-Maruyama and a scalar Brownian
//! driver, [`bounds`] evaluates the closed-form hitting-time and energy
//! bounds, and [`experiments`] runs seeded Monte Carlo ensembles, sweeps and
//! scheme comparisons on top of them.

pub mod bounds;
pub mod controllers;
pub mod ecosystem;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod models;
pub mod noise;
pub mod state;
pub mod stats;

pub use bounds::{BoundReport, InitialLaw};
pub use controllers::{ControlLaw, ControllerRegistry, ControllerSpec, Scheme};
pub use engine::{RunOutcome, SimConfig};
pub use error::{Error, Result};
pub use experiments::{EnsembleResult, Experiment, InitialState, SweepParam, SweepRow};
pub use models::{Dynamics, Lipschitz, Model, ModelRegistry, ModelSpec};
pub use state::StateVector;
