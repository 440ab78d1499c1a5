//! Monte-Carlo orchestration: repeated seeded runs, aggregation, sweeps over
//! network size or topology, and the high-probability regret envelope.
//!
//! Repetitions are embarrassingly parallel. With the `parallel` feature
//! (default) they run on the rayon pool; without it the same code runs
//! sequentially. Aggregation sorts by repetition index before reducing, so
//! results are bit-identical regardless of execution order or thread count.

use std::path::PathBuf;

use nalgebra::DVector;
use thiserror::Error;

use crate::bandit::{ActionSet, BanditError, ProblemConstants};
use crate::config::{ActionSpec, ConfigError, ExperimentConfig, TopologySpec};
use crate::consensus::{CommSchedule, EXACT_MIXING_THRESHOLD};
use crate::engine::{self, NoiseKind, RegretConvention, RunParams, RunResult};
use crate::graph::{
    build_graph, parse_edge_list, structure_matrix, GraphError, Topology, TopologyKind,
};
use crate::stats;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("action file {path}: {msg}")]
    ActionFile { path: PathBuf, msg: String },
    #[error("sweep axis must be non-empty")]
    EmptySweep,
}

impl HarnessError {
    /// True for IO-flavored failures (exit code 2 at the CLI); everything
    /// else is a configuration problem (exit code 1).
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            HarnessError::Io { .. } | HarnessError::Config(ConfigError::Io { .. })
        )
    }
}

/// A resolved configuration: topology built, action set loaded, constants
/// assembled. Shared read-only by all repetitions.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub topology: Topology,
    pub actions: ActionSet,
    pub constants: ProblemConstants,
    pub horizon: usize,
    pub convention: RegretConvention,
    pub noise: NoiseKind,
    pub normalize: bool,
    pub trace_consensus: bool,
    pub base_seed: u64,
    pub repetitions: usize,
    pub config_id: String,
    pub topology_label: String,
}

impl ExperimentSetup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let kind = resolve_topology(&cfg.topology)?;
        let adjacency = build_graph(&kind, cfg.n_agents, cfg.self_loops)?;
        let topology = structure_matrix(&adjacency)?;
        let actions = match &cfg.actions {
            ActionSpec::Hypercube => ActionSet::hypercube(cfg.dimension),
            ActionSpec::FiniteFile(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                let vectors = parse_action_file(&text).map_err(|msg| HarnessError::ActionFile {
                    path: path.clone(),
                    msg,
                })?;
                ActionSet::finite(vectors)?
            }
        };
        let constants = ProblemConstants {
            noise_scale: cfg.noise_scale,
            param_bound: cfg.param_bound,
            action_bound: actions.bound(),
            dim: actions.dim(),
            n_agents: cfg.n_agents,
            ridge: cfg.ridge,
            delta: cfg.effective_delta(),
        };
        constants.validate()?;
        Ok(ExperimentSetup {
            topology,
            actions,
            constants,
            horizon: cfg.horizon,
            convention: cfg.convention,
            noise: cfg.noise_kind,
            normalize: cfg.normalize,
            trace_consensus: cfg.trace_consensus,
            base_seed: cfg.seed,
            repetitions: cfg.repetitions,
            config_id: cfg.config_id(),
            topology_label: cfg.topology.label(),
        })
    }

    pub fn run_params(&self) -> RunParams<'_> {
        RunParams {
            topology: &self.topology,
            actions: &self.actions,
            constants: self.constants,
            horizon: self.horizon,
            convention: self.convention,
            noise: self.noise,
            normalize: self.normalize,
            trace_consensus: self.trace_consensus,
        }
    }

    /// Seed of repetition `rep`: base seed plus the repetition index.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.base_seed.wrapping_add(rep as u64)
    }

    pub fn run_rep(&self, rep: usize) -> RunResult {
        engine::run(&self.run_params(), self.rep_seed(rep))
    }
}

fn resolve_topology(spec: &TopologySpec) -> Result<TopologyKind, HarnessError> {
    Ok(match spec {
        TopologySpec::Complete => TopologyKind::Complete,
        TopologySpec::Cycle => TopologyKind::Cycle,
        TopologySpec::Path => TopologyKind::Path,
        TopologySpec::KRegular(k) => TopologyKind::KRegular(*k),
        TopologySpec::CustomFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            let (_, edges) = parse_edge_list(&text)?;
            TopologyKind::Custom(edges)
        }
    })
}

/// One whitespace-separated action vector per line; `#` starts a comment.
fn parse_action_file(text: &str) -> Result<Vec<DVector<f64>>, String> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let coords: Result<Vec<f64>, _> =
            content.split_whitespace().map(str::parse::<f64>).collect();
        let coords = coords.map_err(|_| format!("line {}: invalid number", idx + 1))?;
        out.push(DVector::from_vec(coords));
    }
    if out.is_empty() {
        return Err("no actions found".to_string());
    }
    Ok(out)
}

/// Per-repetition data kept for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RepSummary {
    pub rep: usize,
    pub seed: u64,
    /// Raw cumulative-regret trajectory (not forward-filled).
    pub trajectory: Vec<f64>,
    pub coverage_ok: bool,
}

impl RepSummary {
    pub fn from_run(rep: usize, run: &RunResult) -> Self {
        RepSummary {
            rep,
            seed: run.seed,
            trajectory: run.cumulative_regret.clone(),
            coverage_ok: run.coverage_ok,
        }
    }
}

/// Mean and spread of the cumulative-regret trajectories of one
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub config_id: String,
    pub topology_label: String,
    pub n_agents: usize,
    pub horizon: usize,
    pub repetitions: usize,
    pub lambda2: f64,
    pub spectral_gap: f64,
    /// Per-round mean cumulative regret, forward-filled to the horizon.
    pub mean: Vec<f64>,
    /// Per-round standard error (sample std / sqrt(repetitions)).
    pub stderr: Vec<f64>,
    /// Final cumulative regret of each repetition, in repetition order.
    pub final_regrets: Vec<f64>,
    pub coverage_fraction: f64,
    /// Raw per-repetition trajectories, in repetition order.
    pub trajectories: Vec<Vec<f64>>,
}

impl AggregateResult {
    pub fn mean_final_regret(&self) -> f64 {
        stats::mean(&self.final_regrets)
    }
}

/// Reduces repetition summaries; order of the input is irrelevant (sorted by
/// repetition index before any floating-point reduction).
pub fn aggregate(setup: &ExperimentSetup, mut summaries: Vec<RepSummary>) -> AggregateResult {
    summaries.sort_by_key(|s| s.rep);
    let reps = summaries.len();
    let horizon = setup.horizon;
    let covered = summaries.iter().filter(|s| s.coverage_ok).count();
    let final_regrets: Vec<f64> = summaries
        .iter()
        .map(|s| s.trajectory.last().copied().unwrap_or(0.0))
        .collect();

    let mut mean = vec![0.0; horizon];
    let mut stderr = vec![0.0; horizon];
    let filled: Vec<Vec<f64>> = summaries
        .iter()
        .map(|s| forward_fill(&s.trajectory, horizon))
        .collect();
    let mut column = vec![0.0; reps];
    for t in 0..horizon {
        for (k, traj) in filled.iter().enumerate() {
            column[k] = traj[t];
        }
        mean[t] = stats::mean(&column);
        stderr[t] = stats::standard_error(&column);
    }

    AggregateResult {
        config_id: setup.config_id.clone(),
        topology_label: setup.topology_label.clone(),
        n_agents: setup.constants.n_agents,
        horizon,
        repetitions: reps,
        lambda2: setup.topology.lambda2,
        spectral_gap: setup.topology.spectral_gap,
        mean,
        stderr,
        final_regrets,
        coverage_fraction: if reps == 0 {
            0.0
        } else {
            covered as f64 / reps as f64
        },
        trajectories: summaries.into_iter().map(|s| s.trajectory).collect(),
    }
}

fn forward_fill(trajectory: &[f64], horizon: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon);
    out.extend_from_slice(trajectory);
    let last = trajectory.last().copied().unwrap_or(0.0);
    out.resize(horizon, last);
    out
}

#[cfg(feature = "parallel")]
fn map_reps(setup: &ExperimentSetup) -> Vec<RepSummary> {
    use rayon::prelude::*;
    (0..setup.repetitions)
        .into_par_iter()
        .map(|rep| RepSummary::from_run(rep, &setup.run_rep(rep)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_reps(setup: &ExperimentSetup) -> Vec<RepSummary> {
    (0..setup.repetitions)
        .map(|rep| RepSummary::from_run(rep, &setup.run_rep(rep)))
        .collect()
}

/// Runs all repetitions of `cfg` (on the rayon pool when the `parallel`
/// feature is enabled) and aggregates them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult, HarnessError> {
    let setup = ExperimentSetup::from_config(cfg)?;
    let summaries = map_reps(&setup);
    Ok(aggregate(&setup, summaries))
}

/// Sequential variant of [`run_experiment`]; always available and used as
/// the baseline in the benchmark suite.
pub fn run_experiment_sequential(cfg: &ExperimentConfig) -> Result<AggregateResult, HarnessError> {
    let setup = ExperimentSetup::from_config(cfg)?;
    let summaries = (0..setup.repetitions)
        .map(|rep| RepSummary::from_run(rep, &setup.run_rep(rep)))
        .collect();
    Ok(aggregate(&setup, summaries))
}

/// Sequential run that hands every finished repetition to `observer` (with
/// full episode logs) before dropping it; used for episode-log streaming.
pub fn run_experiment_observed(
    cfg: &ExperimentConfig,
    mut observer: impl FnMut(usize, &RunResult),
) -> Result<AggregateResult, HarnessError> {
    let setup = ExperimentSetup::from_config(cfg)?;
    let mut summaries = Vec::with_capacity(setup.repetitions);
    for rep in 0..setup.repetitions {
        let run = setup.run_rep(rep);
        observer(rep, &run);
        summaries.push(RepSummary::from_run(rep, &run));
    }
    Ok(aggregate(&setup, summaries))
}

/// Sweep axes: vary the topology or the network size, everything else
/// fixed (including the base seed).
#[derive(Debug, Clone)]
pub enum SweepAxis {
    Topology(Vec<TopologySpec>),
    NetworkSize(Vec<usize>),
}

#[derive(Debug)]
pub struct SweepReport {
    pub results: Vec<AggregateResult>,
    /// (variant label, error message) for variants that failed; successful
    /// variants still run.
    pub failures: Vec<(String, String)>,
}

pub fn sweep(base: &ExperimentConfig, axis: &SweepAxis) -> Result<SweepReport, HarnessError> {
    let variants: Vec<(String, ExperimentConfig)> = match axis {
        SweepAxis::Topology(specs) => specs
            .iter()
            .map(|spec| {
                let mut cfg = base.clone();
                cfg.topology = spec.clone();
                (spec.label(), cfg)
            })
            .collect(),
        SweepAxis::NetworkSize(sizes) => sizes
            .iter()
            .map(|&n| {
                let mut cfg = base.clone();
                cfg.n_agents = n;
                (format!("n={n}"), cfg)
            })
            .collect(),
    };
    if variants.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let mut report = SweepReport {
        results: Vec::new(),
        failures: Vec::new(),
    };
    for (label, cfg) in variants {
        match run_experiment(&cfg) {
            Ok(agg) => report.results.push(agg),
            Err(err) => report.failures.push((label, err.to_string())),
        }
    }
    Ok(report)
}

/// High-probability upper bound on the cumulative regret after `t` rounds:
///
/// ```text
/// 4 beta_t sqrt(2 T' d ln(1 + T' L^2 / (d lambda))) (1 + ln(2 N t) / sqrt(2 ln(1/lambda2)))
///     + ln(2 N t) / sqrt(2 ln(1/lambda2))
/// ```
///
/// with `T' = t / (1 + q(1))` and `q(1) = ln(2N) / sqrt(2 ln(1/lambda2))`.
/// For (numerically) zero `lambda2` the mixing terms vanish and `q(1) = 1`.
pub fn regret_bound_at(constants: &ProblemConstants, lambda2: f64, t: f64) -> f64 {
    let n = constants.n_agents as f64;
    let d = constants.dim as f64;
    let l2 = constants.action_bound * constants.action_bound;
    let (q1, comm) = if lambda2 < EXACT_MIXING_THRESHOLD {
        (1.0, 0.0)
    } else {
        let denom = (2.0 * (1.0 / lambda2).ln()).sqrt();
        ((2.0 * n).ln() / denom, (2.0 * n * t).ln() / denom)
    };
    let t_prime = t / (1.0 + q1);
    let beta_t = crate::bandit::confidence_radius(constants, t_prime).expect("validated constants");
    4.0 * beta_t
        * (2.0 * t_prime * d * (1.0 + t_prime * l2 / (d * constants.ridge)).ln()).sqrt()
        * (1.0 + comm)
        + comm
}

/// The bound evaluated per round plus how the repetitions compare to it at
/// the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub bound: Vec<f64>,
    pub final_bound: f64,
    pub mean_final_regret: f64,
    pub max_final_regret: f64,
    /// Fraction of repetitions whose final regret exceeds the bound.
    pub violation_fraction: f64,
    pub delta: f64,
}

pub fn regret_envelope(setup: &ExperimentSetup, agg: &AggregateResult) -> EnvelopeReport {
    let lambda2 = setup.topology.lambda2;
    let bound: Vec<f64> = (1..=agg.horizon)
        .map(|t| regret_bound_at(&setup.constants, lambda2, t as f64))
        .collect();
    let final_bound = bound.last().copied().unwrap_or(0.0);
    let violations = agg
        .final_regrets
        .iter()
        .filter(|&&r| r > final_bound)
        .count();
    EnvelopeReport {
        final_bound,
        mean_final_regret: stats::mean(&agg.final_regrets),
        max_final_regret: agg
            .final_regrets
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        violation_fraction: violations as f64 / agg.final_regrets.len().max(1) as f64,
        delta: setup.constants.delta,
        bound,
    }
}

/// Rounds at which episodes start, derived from the deterministic
/// communication schedule; used for the episodes x-axis.
pub fn episode_boundaries(n_agents: usize, lambda2: f64, horizon: usize) -> Vec<usize> {
    let schedule = match CommSchedule::new(n_agents, lambda2) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut t = 1usize;
    let mut s = 1u64;
    while t <= horizon {
        out.push(t);
        t += 1 + schedule.rounds(s);
        s += 1;
    }
    out
}
