//! Decentralized strongly convex optimization over a network of agents.
//!
//! Agents hold local losses `f_i` and exchange vectors through a mixing
//! matrix. The library provides inexact accelerated augmented Lagrangian
//! methods (IDEAL, and MIDEAL with Chebyshev-accelerated gossip) together
//! with DGD, EXTRA and the dual methods SSDA/MSDA, plus a time simulator
//! charging 1 per gradient round and `tau` per communication round.

pub mod blockspace;
pub mod dualcheck;
pub mod error;
pub mod framework;
pub mod gossip;
pub mod objectives;
pub mod simulator;
pub mod solvers;
pub mod topology;

pub use blockspace::BlockVector;
pub use error::{Error, Result};
pub use framework::{Algorithm, AlgorithmConfig, Problem, RunTrace, ScheduleParams};
pub use gossip::Metric;
pub use objectives::{GlobalObjective, LocalObjective};
pub use simulator::{CostModel, TimeTrace};
pub use topology::{GraphKind, MixingMatrix, NetworkGraph};
