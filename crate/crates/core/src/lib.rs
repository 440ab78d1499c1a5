//! Simulator for decentralized multi-agent linear UCB over gossip networks.
//!
//! `N` agents sit on a connected undirected graph, each with its own linear
//! reward parameter; the network's target parameter is the average across
//! agents. Episodes alternate an exploration round — a randomly chosen
//! coordinator agent proposes the optimistic action from its confidence
//! ellipsoid and everyone plays it — with a communication phase in which
//! agents gossip their observed rewards through Chebyshev-accelerated
//! consensus to approximate the network-average reward before refreshing
//! their regularized least-squares estimates. Rounds spent communicating
//! accrue regret, so the phase length grows only logarithmically with the
//! episode index, scaled by the spectral gap of the gossip matrix.
//!
//! Modules:
//! - [`graph`]: graph families, doubly-stochastic structure matrices,
//!   spectral data.
//! - [`consensus`]: accelerated gossip recurrence and the communication
//!   schedule.
//! - [`bandit`]: RLS estimation, confidence regions, optimistic selection.
//! - [`engine`]: the episodic simulation loop with round-exact regret
//!   accounting.
//! - [`harness`]: Monte-Carlo repetition, sweeps, the theoretical regret
//!   envelope.
//! - [`export`]: CSV and SVG output.

pub mod bandit;
pub mod config;
pub mod consensus;
pub mod engine;
pub mod export;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod stats;

pub use bandit::{ActionSet, ConfidenceRegion, ProblemConstants, RlsState};
pub use config::{ExperimentConfig, TopologySpec, XAxis};
pub use engine::{EpisodeRecord, GroundTruth, RegretConvention, RunResult, Simulation};
pub use graph::{Topology, TopologyKind};
pub use harness::{
    run_experiment, run_experiment_sequential, sweep, AggregateResult, ExperimentSetup,
    HarnessError, SweepAxis,
};
