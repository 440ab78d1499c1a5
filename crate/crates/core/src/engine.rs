//! End-to-end episodic simulation.
//!
//! Each episode: a coordinator picks an agent uniformly at random, that
//! agent proposes the optimistic action from its own confidence region, the
//! whole network plays it and observes per-agent rewards, then (unless the
//! round budget would be exceeded) the agents run a gossip phase to agree on
//! an approximation of the network-average reward, fold it into their RLS
//! estimates, and rebuild their confidence regions. An episode therefore
//! consumes `1 + q(s)` rounds: the action round plus the communication
//! phase.
//!
//! Regret accounting is per round. The action round always charges
//! `opt_value - <action, mu_star>`. Communication rounds charge `opt_value`
//! under [`RegretConvention::ZeroRewardDuringComm`] (nothing is played, so
//! no reward accrues) or the episode's action regret under
//! [`RegretConvention::HoldLastAction`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bandit::{
    confidence_radius, select_optimistic, ActionSet, ActionSetKind, ConfidenceRegion,
    ProblemConstants, RlsState,
};
use crate::consensus::{CommSchedule, MixState};
use crate::graph::Topology;
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegretConvention {
    /// Communication rounds charge the full optimal value.
    ZeroRewardDuringComm,
    /// Communication rounds charge the regret of the episode's action.
    HoldLastAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoiseKind {
    /// Gaussian with standard deviation `noise_scale`.
    Gaussian,
    /// Uniform on `[-noise_scale, noise_scale]` (still sub-Gaussian at the
    /// same scale by boundedness).
    UniformBounded,
}

/// Hidden parameters of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Per-agent reward parameters, one row per agent.
    pub theta: DMatrix<f64>,
    /// Row average of `theta`: the network parameter every agent chases.
    pub mu_star: DVector<f64>,
    pub x_star: DVector<f64>,
    pub opt_value: f64,
}

/// Exact maximizer of `<x, mu>` over the action set, with deterministic
/// tie-breaking (lowest index for finite sets, `sign(0) = +1` on the cube).
pub fn best_action(actions: &ActionSet, mu: &DVector<f64>) -> (DVector<f64>, f64) {
    match actions.kind() {
        ActionSetKind::Finite(list) => {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (idx, x) in list.iter().enumerate() {
                let v = x.dot(mu);
                if v > best_val {
                    best_val = v;
                    best = idx;
                }
            }
            (list[best].clone(), best_val)
        }
        ActionSetKind::Hypercube { .. } => {
            let x = mu.map(|m| if m < 0.0 { -1.0 } else { 1.0 });
            let v = x.dot(mu);
            (x, v)
        }
    }
}

fn max_abs_reward(actions: &ActionSet, mu: &DVector<f64>) -> f64 {
    match actions.kind() {
        ActionSetKind::Finite(list) => list.iter().map(|x| x.dot(mu).abs()).fold(0.0, f64::max),
        // Over [-1,1]^d the maximum of |<x, mu>| is the l1 norm.
        ActionSetKind::Hypercube { .. } => mu.iter().map(|m| m.abs()).sum(),
    }
}

/// Draws per-agent parameters i.i.d. standard normal. With `normalize` the
/// whole draw is rescaled by `1 / max(1, max_x |<x, mu_star>|)` so expected
/// rewards for the network parameter land in `[-1, 1]`.
pub fn sample_ground_truth(
    rng: &mut impl Rng,
    n_agents: usize,
    actions: &ActionSet,
    normalize: bool,
) -> GroundTruth {
    let d = actions.dim();
    let mut theta = DMatrix::from_fn(n_agents, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut mu_star = row_mean(&theta);
    if normalize {
        let peak = max_abs_reward(actions, &mu_star);
        if peak > 1.0 {
            theta /= peak;
            mu_star = row_mean(&theta);
        }
    }
    let (x_star, opt_value) = best_action(actions, &mu_star);
    GroundTruth {
        theta,
        mu_star,
        x_star,
        opt_value,
    }
}

fn row_mean(theta: &DMatrix<f64>) -> DVector<f64> {
    let n = theta.nrows() as f64;
    DVector::from_fn(theta.ncols(), |j, _| theta.column(j).sum() / n)
}

/// One reward per agent: `<action, theta_i>` plus independent noise.
pub fn sample_rewards(
    rng: &mut impl Rng,
    theta: &DMatrix<f64>,
    action: &DVector<f64>,
    noise_scale: f64,
    kind: NoiseKind,
) -> Vec<f64> {
    (0..theta.nrows())
        .map(|i| {
            let mean = theta.row(i).transpose().dot(action);
            let noise = if noise_scale == 0.0 {
                0.0
            } else {
                match kind {
                    NoiseKind::Gaussian => noise_scale * rng.sample::<f64, _>(StandardNormal),
                    NoiseKind::UniformBounded => rng.gen_range(-noise_scale..=noise_scale),
                }
            };
            mean + noise
        })
        .collect()
}

/// Log entry for one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub s: u64,
    pub t_start: usize,
    pub agent: usize,
    pub action: Vec<f64>,
    pub raw_rewards: Vec<f64>,
    pub consensus_rewards: Vec<f64>,
    /// Communication rounds actually executed; 0 for a truncated final
    /// episode.
    pub q: usize,
    pub inst_regret_action: f64,
    pub inst_regret_comm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus_trace: Option<Vec<Vec<f64>>>,
}

/// Full outcome of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Cumulative regret per round, length `total_rounds_used`.
    pub cumulative_regret: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub total_rounds_used: usize,
    pub seed: u64,
    pub ground_truth: GroundTruth,
    /// Whether `mu_star` stayed inside every agent's confidence region at
    /// every episode boundary.
    pub coverage_ok: bool,
    /// Whether the optimistic value dominated `<x_star, mu_star>` whenever
    /// the proposing agent's region contained `mu_star`.
    pub optimism_ok: bool,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Immutable inputs shared by all repetitions of one configuration.
#[derive(Debug, Clone)]
pub struct RunParams<'a> {
    pub topology: &'a Topology,
    pub actions: &'a ActionSet,
    pub constants: ProblemConstants,
    pub horizon: usize,
    pub convention: RegretConvention,
    pub noise: NoiseKind,
    pub normalize: bool,
    pub trace_consensus: bool,
}

/// Driver for one seeded run; episodes can be stepped individually.
pub struct Simulation<'a> {
    params: RunParams<'a>,
    schedule: CommSchedule,
    truth: GroundTruth,
    rls: Vec<RlsState>,
    regions: Vec<ConfidenceRegion>,
    rng: RunRng,
    t: usize,
    s: u64,
    cumulative: Vec<f64>,
    episodes: Vec<EpisodeRecord>,
    done: bool,
    coverage_ok: bool,
    optimism_ok: bool,
    seed: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(params: &RunParams<'a>, seed: u64) -> Self {
        params
            .constants
            .validate()
            .expect("invalid problem constants");
        let n = params.topology.n();
        assert_eq!(
            n, params.constants.n_agents,
            "topology/constants agent count mismatch"
        );
        let schedule = CommSchedule::new(n, params.topology.lambda2)
            .expect("structure matrix guarantees lambda2 < 1");
        let mut rng = RunRng::new(seed);
        let truth = sample_ground_truth(&mut rng.ground_truth, n, params.actions, params.normalize);
        let beta0 = confidence_radius(&params.constants, 0.0).expect("validated");
        let rls: Vec<RlsState> = (0..n)
            .map(|_| RlsState::new(params.constants.dim, params.constants.ridge))
            .collect();
        let regions: Vec<ConfidenceRegion> = rls
            .iter()
            .map(|r| ConfidenceRegion::from_rls(r, beta0, params.constants.delta))
            .collect();
        let coverage_ok = regions.iter().all(|r| r.contains(&truth.mu_star));
        Simulation {
            params: params.clone(),
            schedule,
            truth,
            rls,
            regions,
            rng,
            t: 1,
            s: 1,
            cumulative: Vec::new(),
            episodes: Vec::new(),
            done: false,
            coverage_ok,
            optimism_ok: true,
            seed,
        }
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn is_done(&self) -> bool {
        self.done || self.t > self.params.horizon
    }

    fn push_round(&mut self, charge: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.cumulative.push(prev + charge);
    }

    /// Runs one episode (possibly truncated by the round budget). Returns
    /// the new record, or `None` once the budget is exhausted.
    pub fn run_episode(&mut self) -> Option<&EpisodeRecord> {
        if self.is_done() {
            return None;
        }
        let n = self.params.topology.n();
        let q_scheduled = self.schedule.rounds(self.s);
        let agent = self.rng.coordinator.gen_range(0..n);
        let (action, ucb_value) =
            select_optimistic(&self.regions[agent], self.params.actions).expect("valid action set");
        if self.regions[agent].contains(&self.truth.mu_star)
            && ucb_value < self.truth.opt_value - 1e-9
        {
            self.optimism_ok = false;
        }
        let raw_rewards = sample_rewards(
            &mut self.rng.noise,
            &self.truth.theta,
            &action,
            self.params.constants.noise_scale,
            self.params.noise,
        );
        let inst_action = self.truth.opt_value - action.dot(&self.truth.mu_star);
        let t_start = self.t;
        self.push_round(inst_action);

        if t_start + q_scheduled > self.params.horizon {
            // No room for the communication phase: play the action and stop.
            self.episodes.push(EpisodeRecord {
                s: self.s,
                t_start,
                agent,
                action: action.iter().copied().collect(),
                raw_rewards: raw_rewards.clone(),
                consensus_rewards: Vec::new(),
                q: 0,
                inst_regret_action: inst_action,
                inst_regret_comm: 0.0,
                consensus_trace: None,
            });
            self.done = true;
            return self.episodes.last();
        }

        let mut state = MixState::new(&raw_rewards, self.params.topology);
        let mut trace = self.params.trace_consensus.then(Vec::new);
        for _ in 0..q_scheduled {
            state.advance(self.params.topology);
            if let Some(tr) = trace.as_mut() {
                tr.push(state.output().iter().copied().collect::<Vec<f64>>());
            }
        }
        let consensus_rewards: Vec<f64> = state.output().iter().copied().collect();

        let comm_charge = match self.params.convention {
            RegretConvention::ZeroRewardDuringComm => self.truth.opt_value,
            RegretConvention::HoldLastAction => inst_action,
        };
        for _ in 0..q_scheduled {
            self.push_round(comm_charge);
        }

        let beta = confidence_radius(&self.params.constants, self.s as f64).expect("validated");
        for (i, &y) in consensus_rewards.iter().enumerate() {
            self.rls[i].update(&action, y);
            self.regions[i] =
                ConfidenceRegion::from_rls(&self.rls[i], beta, self.params.constants.delta);
        }
        if !self.regions.iter().all(|r| r.contains(&self.truth.mu_star)) {
            self.coverage_ok = false;
        }

        self.episodes.push(EpisodeRecord {
            s: self.s,
            t_start,
            agent,
            action: action.iter().copied().collect(),
            raw_rewards,
            consensus_rewards,
            q: q_scheduled,
            inst_regret_action: inst_action,
            inst_regret_comm: q_scheduled as f64 * comm_charge,
            consensus_trace: trace,
        });
        self.t = t_start + 1 + q_scheduled;
        self.s += 1;
        self.episodes.last()
    }

    /// Per-agent RLS estimates; used by diagnostics and tests.
    pub fn estimates(&self) -> Vec<DVector<f64>> {
        self.rls.iter().map(|r| r.estimate()).collect()
    }

    pub fn finish(self) -> RunResult {
        let total_rounds_used = self.cumulative.len();
        RunResult {
            cumulative_regret: self.cumulative,
            episodes: self.episodes,
            total_rounds_used,
            seed: self.seed,
            ground_truth: self.truth,
            coverage_ok: self.coverage_ok,
            optimism_ok: self.optimism_ok,
        }
    }
}

/// Runs episodes until the round budget `horizon` is exhausted.
pub fn run(params: &RunParams, seed: u64) -> RunResult {
    let mut sim = Simulation::new(params, seed);
    while sim.run_episode().is_some() {}
    sim.finish()
}
