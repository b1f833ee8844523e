//! Decentralized optimization with several gossip rounds per gradient
//! evaluation.
//!
//! `n` agents cooperatively minimise `f(x) = (1/n) Σ f_i(x)`, each agent
//! knowing only its own `f_i` and exchanging values with neighbours through
//! doubly-stochastic gossip matrices that may change every round. Per
//! iteration every agent runs `m` gossip rounds and one local gradient
//! evaluation, with `m` chosen from the contraction factor `ρ` of the local
//! gradient steps and the spectral gap `σ` of the network so that the
//! iterates converge at rate `ρ`, the rate of centralised gradient descent.
//!
//! Modules:
//! - [`gossip`]: gossip matrices, validation, schedules, spectral gaps.
//! - [`objective`]: local objectives, contraction checks, problems.
//! - [`algorithm`]: the method, the choice of `m`, and baselines.
//! - [`analysis`]: Lyapunov certificate and rate fitting.
//! - [`localization`]: range-only target localization instance.
//! - [`netsim`]: message-passing execution used as an independent oracle.
//!
//! All numerical code is generic over [`Scalar`] (`f32`, `f64`); gossip
//! matrices additionally accept exact rationals. The `*64` aliases below fix
//! the scalar to `f64`.

pub mod algorithm;
pub mod analysis;
pub mod error;
pub mod gossip;
pub mod linalg;
pub mod localization;
pub mod netsim;
pub mod objective;
pub mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use gossip::{ExactGossipMatrix, GossipMatrix, GossipSchedule, ScheduleKind, ScheduleOptions};
pub use scalar::Scalar;

pub type GossipMatrix64 = gossip::GossipMatrix<f64>;
pub type GossipSchedule64 = gossip::GossipSchedule<f64>;
pub type Problem64 = objective::Problem<f64>;
pub type AlgorithmParams64 = algorithm::AlgorithmParams<f64>;
pub type AgentState64 = algorithm::AgentState<f64>;
pub type RunTrace64 = trace::RunTrace<f64>;
pub type StackedVector64 = analysis::StackedVector<f64>;
pub type LocalizationConfig64 = localization::LocalizationConfig<f64>;

pub type GossipMatrix32 = gossip::GossipMatrix<f32>;
pub type Problem32 = objective::Problem<f32>;
pub type RunTrace32 = trace::RunTrace<f32>;
