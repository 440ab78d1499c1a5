//! Chebyshev-accelerated gossip averaging and the communication-length
//! schedule.
//!
//! One gossip round replaces every agent's scalar with a weighted average of
//! its neighbors' scalars (a multiplication by the structure matrix `W`).
//! Plain gossip contracts the deviation from the exact network average by
//! `lambda2` per round. The accelerated variant runs the three-term Chebyshev
//! recurrence
//!
//! ```text
//! z[h+1] = (2 / lambda2) * W * z[h] - z[h-1],    z[1] = (1 / lambda2) * W * z[0]
//! a[h+1] = (2 / lambda2) * a[h]     - a[h-1],    a[1] =  1 / lambda2
//! ```
//!
//! so that `z[h] = T_h(W / lambda2) z[0]` and `a[h] = T_h(1 / lambda2)`. The
//! agent-visible output after `h` rounds is `z[h] / a[h]`, i.e. the rescaled
//! Chebyshev polynomial `T_h(W/lambda2) / T_h(1/lambda2)` applied to the
//! initial values. The polynomial fixes constant vectors exactly and shrinks
//! everything orthogonal to them at least as fast as `1 / T_h(1/lambda2)`,
//! a square-root speedup over plain powers of `W`. Each round still touches
//! only 1-hop neighbors.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::Topology;
use crate::linalg;

/// Below this `lambda2` the matrix acts as the exact averaging projector and
/// a single plain multiplication by `W` suffices (also avoids 1/lambda2
/// overflowing the normalizers).
pub const EXACT_MIXING_THRESHOLD: f64 = 1e-12;

/// Upper bound on rounds per episode; the schedule never gets near this at
/// simulation scale, the cap only guards the normalizer against overflow.
pub const MAX_COMM_ROUNDS: usize = 500;

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("disconnected or periodic structure matrix")]
    DegenerateLambda2,
    #[error("lambda2 must be nonnegative, got {0}")]
    NegativeLambda2(f64),
    #[error("episode index starts at 1")]
    BadEpisode,
    #[error("at least one communication round is required")]
    ZeroRounds,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

fn check_lambda2(lambda2: f64) -> Result<(), ConsensusError> {
    if lambda2 < 0.0 {
        return Err(ConsensusError::NegativeLambda2(lambda2));
    }
    if lambda2 >= 1.0 {
        return Err(ConsensusError::DegenerateLambda2);
    }
    Ok(())
}

/// Length of the communication phase for episode `s`:
/// `max(1, ceil(ln(2 n s) / sqrt(2 ln(1/lambda2))))`, capped at
/// [`MAX_COMM_ROUNDS`]. Exactly one round when mixing is already exact.
pub fn comm_length(s: u64, n_agents: usize, lambda2: f64) -> Result<usize, ConsensusError> {
    if s == 0 {
        return Err(ConsensusError::BadEpisode);
    }
    check_lambda2(lambda2)?;
    if lambda2 < EXACT_MIXING_THRESHOLD {
        return Ok(1);
    }
    let num = (2.0 * n_agents as f64 * s as f64).ln();
    let den = (2.0 * (1.0 / lambda2).ln()).sqrt();
    let q = (num / den).ceil();
    Ok((q.max(1.0) as usize).min(MAX_COMM_ROUNDS))
}

/// The per-episode schedule `s -> q(s)` for a fixed network.
#[derive(Debug, Clone, Copy)]
pub struct CommSchedule {
    n_agents: usize,
    lambda2: f64,
}

impl CommSchedule {
    pub fn new(n_agents: usize, lambda2: f64) -> Result<Self, ConsensusError> {
        check_lambda2(lambda2)?;
        Ok(CommSchedule { n_agents, lambda2 })
    }

    pub fn rounds(&self, s: u64) -> usize {
        comm_length(s, self.n_agents, self.lambda2).expect("validated at construction")
    }
}

/// State of the accelerated gossip recurrence, one scalar per agent.
#[derive(Debug, Clone)]
pub struct MixState {
    z_curr: DVector<f64>,
    z_prev: DVector<f64>,
    a_curr: f64,
    a_prev: f64,
    step: usize,
    lambda2: f64,
}

impl MixState {
    pub fn new(values: &[f64], topology: &Topology) -> Self {
        let z = DVector::from_column_slice(values);
        MixState {
            z_prev: z.clone(),
            z_curr: z,
            a_curr: 1.0,
            a_prev: 1.0,
            step: 0,
            lambda2: topology.lambda2,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Runs one mix round. Component `i` of the new iterate depends only on
    /// entries `j` with `W[i][j] != 0`.
    pub fn advance(&mut self, topology: &Topology) {
        let wz = &topology.w * &self.z_curr;
        if self.lambda2 < EXACT_MIXING_THRESHOLD {
            // Plain gossip is already exact; keep the normalizers at 1.
            self.z_prev = std::mem::replace(&mut self.z_curr, wz);
        } else if self.step == 0 {
            self.z_prev = std::mem::replace(&mut self.z_curr, wz / self.lambda2);
            self.a_prev = 1.0;
            self.a_curr = 1.0 / self.lambda2;
        } else {
            let z_next = wz * (2.0 / self.lambda2) - &self.z_prev;
            self.z_prev = std::mem::replace(&mut self.z_curr, z_next);
            let a_next = (2.0 / self.lambda2) * self.a_curr - self.a_prev;
            self.a_prev = self.a_curr;
            self.a_curr = a_next;
        }
        self.step += 1;
    }

    /// Agent-visible values at the current step: `z / a`.
    pub fn output(&self) -> DVector<f64> {
        &self.z_curr / self.a_curr
    }
}

/// Runs `rounds` mix rounds and returns each agent's approximation of the
/// network average of `values`. Exact when `lambda2` is (numerically) zero.
pub fn consensus_average(
    values: &[f64],
    topology: &Topology,
    rounds: usize,
) -> Result<Vec<f64>, ConsensusError> {
    if rounds == 0 {
        return Err(ConsensusError::ZeroRounds);
    }
    let mut state = MixState::new(values, topology);
    for _ in 0..rounds {
        state.advance(topology);
    }
    Ok(state.output().iter().copied().collect())
}

/// Rounds needed for accuracy `epsilon` and the spectral-norm distance the
/// mixing polynomial actually achieves to the exact averaging projector
/// `(1/n) 11^T`: forms `T_q(W/lambda2)/T_q(1/lambda2)` explicitly and
/// measures `|| . - J/n ||_2`. Intended for verification at small `n`.
pub fn projector_distance(
    topology: &Topology,
    epsilon: f64,
) -> Result<(usize, f64), ConsensusError> {
    if epsilon <= 0.0 {
        return Err(ConsensusError::BadEpsilon(epsilon));
    }
    let n = topology.n();
    let lambda2 = topology.lambda2;
    check_lambda2(lambda2)?;
    let projector = DMatrix::from_element(n, n, 1.0 / n as f64);
    if lambda2 < EXACT_MIXING_THRESHOLD {
        let dist = linalg::spectral_norm_symmetric(&(&topology.w - &projector));
        return Ok((1, dist));
    }
    let q_raw = ((2.0 * n as f64 / epsilon).ln() / (2.0 * (1.0 / lambda2).ln()).sqrt()).ceil();
    let q = q_raw.max(1.0) as usize;

    // Matrix form of the same recurrence: Z[h] = T_h(W / lambda2).
    let mut z_prev = DMatrix::<f64>::identity(n, n);
    let mut z_curr = &topology.w / lambda2;
    let mut a_prev = 1.0;
    let mut a_curr = 1.0 / lambda2;
    for _ in 1..q {
        let z_next = (&topology.w * &z_curr) * (2.0 / lambda2) - &z_prev;
        z_prev = std::mem::replace(&mut z_curr, z_next);
        let a_next = (2.0 / lambda2) * a_curr - a_prev;
        a_prev = a_curr;
        a_curr = a_next;
    }
    let poly = z_curr / a_curr;
    let dist = linalg::spectral_norm_symmetric(&(poly - projector));
    Ok((q, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, structure_matrix, Topology, TopologyKind};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn topo(kind: TopologyKind, n: usize) -> Topology {
        structure_matrix(&build_graph(&kind, n, true).unwrap()).unwrap()
    }

    #[test]
    fn comm_length_examples() {
        assert_eq!(comm_length(1, 2, 0.5).unwrap(), 2);
        assert_eq!(comm_length(1, 50, 0.9).unwrap(), 11);
        assert_eq!(comm_length(1, 64, 0.0).unwrap(), 1);
        assert_eq!(comm_length(1, 4, 1e-13).unwrap(), 1);
    }

    #[test]
    fn comm_length_rejects_degenerate_inputs() {
        let err = comm_length(1, 4, 1.0).unwrap_err();
        assert_eq!(err.to_string(), "disconnected or periodic structure matrix");
        assert!(comm_length(0, 4, 0.5).is_err());
        assert!(comm_length(1, 4, -0.1).is_err());
    }

    #[test]
    fn comm_length_monotone_and_capped() {
        let sched = CommSchedule::new(8, 0.9).unwrap();
        let mut prev = 0;
        for s in 1..200 {
            let q = sched.rounds(s);
            assert!(q >= prev);
            assert!(q >= 1);
            prev = q;
        }
        // A nearly-periodic matrix would demand astronomically long phases;
        // the cap keeps the normalizers representable.
        let slow = CommSchedule::new(8, 0.999_999).unwrap();
        assert_eq!(slow.rounds(u64::MAX), MAX_COMM_ROUNDS);
    }

    #[test]
    fn two_node_average_is_exact_on_complete_graph() {
        let t = topo(TopologyKind::Complete, 2);
        let out = consensus_average(&[1.0, 3.0], &t, 1).unwrap();
        assert_abs_diff_eq!(out[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn cycle4_first_round_output_is_one_gossip_step() {
        let t = topo(TopologyKind::Cycle, 4);
        let mut state = MixState::new(&[1.0, 0.0, 0.0, 0.0], &t);
        state.advance(&t);
        let out = state.output();
        let third = 1.0 / 3.0;
        for (got, want) in out.iter().zip([third, third, 0.0, third]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_vectors_are_fixed_points() {
        for t in [
            topo(TopologyKind::Cycle, 6),
            topo(TopologyKind::Path, 5),
            topo(TopologyKind::Complete, 4),
        ] {
            let c = -2.5;
            let values = vec![c; t.n()];
            let mut state = MixState::new(&values, &t);
            for _ in 0..12 {
                state.advance(&t);
                for v in state.output().iter() {
                    assert_abs_diff_eq!(*v, c, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn complete_graph_averages_in_one_round() {
        let t = topo(TopologyKind::Complete, 4);
        let out = consensus_average(&[4.0, 0.0, 0.0, 0.0], &t, 1).unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_rounds_rejected() {
        let t = topo(TopologyKind::Complete, 3);
        assert!(matches!(
            consensus_average(&[1.0, 2.0, 3.0], &t, 0),
            Err(ConsensusError::ZeroRounds)
        ));
    }

    #[test]
    fn projector_distance_examples() {
        let complete = topo(TopologyKind::Complete, 8);
        let (q, norm) = projector_distance(&complete, 0.5).unwrap();
        assert_eq!(q, 1);
        assert!(norm <= 1e-12);

        let cycle6 = topo(TopologyKind::Cycle, 6);
        let (_, norm) = projector_distance(&cycle6, 0.2).unwrap();
        assert!(norm <= 0.2 / 6.0);

        let two = Topology::from_matrix(dmatrix![0.9, 0.1; 0.1, 0.9]).unwrap();
        let (_, norm) = projector_distance(&two, 0.1).unwrap();
        assert!(norm <= 0.05);

        assert!(projector_distance(&cycle6, 0.0).is_err());
    }

    #[test]
    fn accuracy_is_monotone_in_rounds() {
        for t in [
            topo(TopologyKind::Cycle, 10),
            topo(TopologyKind::KRegular(4), 12),
            topo(TopologyKind::Path, 7),
        ] {
            let n = t.n();
            let projector = DMatrix::from_element(n, n, 1.0 / n as f64);
            let mut z_prev = DMatrix::<f64>::identity(n, n);
            let mut z_curr = &t.w / t.lambda2;
            let mut a_prev = 1.0;
            let mut a_curr = 1.0 / t.lambda2;
            let mut last = f64::INFINITY;
            for _q in 1..=30 {
                let dist = linalg::spectral_norm_symmetric(&(&z_curr / a_curr - &projector));
                assert!(
                    dist <= last + 1e-12,
                    "distance increased from {last} to {dist}"
                );
                last = dist;
                let z_next = (&t.w * &z_curr) * (2.0 / t.lambda2) - &z_prev;
                z_prev = std::mem::replace(&mut z_curr, z_next);
                let a_next = (2.0 / t.lambda2) * a_curr - a_prev;
                a_prev = a_curr;
                a_curr = a_next;
            }
        }
    }

    #[test]
    fn information_travels_at_most_one_hop_per_round() {
        // Perturbing a node farther than q hops from node 0 cannot change
        // node 0's output after q rounds.
        let t = topo(TopologyKind::Cycle, 11);
        let q = 3;
        let base = vec![0.25; 11];
        let mut bumped = base.clone();
        bumped[5] += 10.0; // distance 5 > q from node 0
        let out_base = consensus_average(&base, &t, q).unwrap();
        let out_bumped = consensus_average(&bumped, &t, q).unwrap();
        assert_eq!(out_base[0].to_bits(), out_bumped[0].to_bits());
        // A node within reach does change.
        assert!((out_base[2] - out_bumped[2]).abs() > 0.0);
    }

    #[test]
    fn mass_preserving_normalizer_property() {
        for t in [topo(TopologyKind::Cycle, 9), topo(TopologyKind::Path, 6)] {
            let ones = vec![1.0; t.n()];
            let mut state = MixState::new(&ones, &t);
            for _ in 0..30 {
                state.advance(&t);
                for v in state.output().iter() {
                    assert!((v - 1.0).abs() <= 1e-10);
                }
            }
        }
    }
}
