//! Per-agent regularized least squares, ellipsoidal confidence regions, and
//! optimistic action selection.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

/// Numerical slack on the confidence-region membership test.
pub const CONTAINS_SLACK: f64 = 1e-12;

/// Rank-one inverse updates are re-anchored to a dense factorization every
/// this many updates to bound drift.
pub const INVERSE_REFRESH_INTERVAL: usize = 256;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("finite action set must be non-empty")]
    EmptyActionSet,
    #[error("action dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Problem-level constants shared by every agent.
///
/// `ridge >= max(1, action_bound^2)` is assumed by the regret bound but not
/// enforced here; the confidence radius is well defined for any positive
/// ridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Sub-Gaussian scale of the per-agent reward noise.
    pub noise_scale: f64,
    /// Bound on the parameter norms.
    pub param_bound: f64,
    /// Bound on action norms over the action set.
    pub action_bound: f64,
    pub dim: usize,
    pub n_agents: usize,
    pub ridge: f64,
    pub delta: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<(), BanditError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BanditError::BadDelta(self.delta));
        }
        for (name, value) in [
            ("ridge", self.ridge),
            ("param_bound", self.param_bound),
            ("action_bound", self.action_bound),
            ("dim", self.dim as f64),
            ("n_agents", self.n_agents as f64),
        ] {
            if value <= 0.0 {
                return Err(BanditError::NonPositive { name, value });
            }
        }
        if self.noise_scale < 0.0 {
            return Err(BanditError::NonPositive {
                name: "noise_scale",
                value: self.noise_scale,
            });
        }
        Ok(())
    }
}

/// Confidence-region radius after `episodes` incorporated observations:
///
/// ```text
/// (R / sqrt(N)) * sqrt(d * ln((1 + s L^2 / lambda) / delta))
///     + sqrt(lambda) * S + L / sqrt(lambda)
/// ```
///
/// The `L / sqrt(lambda)` term absorbs the gossip approximation error in the
/// averaged rewards; the rest is the usual self-normalized bound with noise
/// scale reduced by `sqrt(N)` through averaging.
pub fn confidence_radius(c: &ProblemConstants, episodes: f64) -> Result<f64, BanditError> {
    c.validate()?;
    let l2 = c.action_bound * c.action_bound;
    let log_term = ((1.0 + episodes * l2 / c.ridge) / c.delta).ln();
    Ok(
        c.noise_scale / (c.n_agents as f64).sqrt() * (c.dim as f64 * log_term).sqrt()
            + c.ridge.sqrt() * c.param_bound
            + c.action_bound / c.ridge.sqrt(),
    )
}

/// Ridge-regularized least-squares state for one agent.
///
/// Maintains `V = ridge * I + sum x x^T`, its inverse via rank-one updates,
/// and the response vector `b = sum y x`, so the estimate is `V^{-1} b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b: DVector<f64>,
    episodes: usize,
    ridge: f64,
    updates_since_refresh: usize,
}

impl RlsState {
    pub fn new(dim: usize, ridge: f64) -> Self {
        assert!(ridge > 0.0, "ridge must be positive");
        RlsState {
            v: DMatrix::identity(dim, dim) * ridge,
            v_inv: DMatrix::identity(dim, dim) / ridge,
            b: DVector::zeros(dim),
            episodes: 0,
            ridge,
            updates_since_refresh: 0,
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Current estimate `V^{-1} b`; zero before any update.
    pub fn estimate(&self) -> DVector<f64> {
        &self.v_inv * &self.b
    }

    /// Folds in one observed pair (network action, consensus-averaged
    /// reward). Sherman-Morrison keeps the inverse current in O(d^2).
    pub fn update(&mut self, x: &DVector<f64>, y: f64) {
        assert_eq!(x.len(), self.b.len(), "action dimension mismatch");
        self.v.ger(1.0, x, x, 1.0);
        let u = &self.v_inv * x;
        let denom = 1.0 + x.dot(&u);
        self.v_inv.ger(-1.0 / denom, &u, &u, 1.0);
        self.b.axpy(y, x, 1.0);
        self.episodes += 1;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= INVERSE_REFRESH_INTERVAL {
            self.v_inv = Cholesky::new(self.v.clone())
                .expect("ridge-regularized design matrix is positive definite")
                .inverse();
            self.updates_since_refresh = 0;
        }
    }
}

/// Immutable snapshot of one agent's ellipsoidal confidence region
/// `{ v : || v - center ||_V <= beta }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub center: DVector<f64>,
    pub design: DMatrix<f64>,
    pub beta: f64,
    pub delta: f64,
}

impl ConfidenceRegion {
    pub fn from_rls(rls: &RlsState, beta: f64, delta: f64) -> Self {
        ConfidenceRegion {
            center: rls.estimate(),
            design: rls.design().clone(),
            beta,
            delta,
        }
    }

    /// Membership test with [`CONTAINS_SLACK`] slack on the boundary.
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        assert_eq!(v.len(), self.center.len(), "dimension mismatch");
        let diff = v - &self.center;
        let quad = diff.dot(&(&self.design * &diff));
        quad.max(0.0).sqrt() <= self.beta + CONTAINS_SLACK
    }
}

/// Action sets supported by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSetKind {
    Finite(Vec<DVector<f64>>),
    /// The hypercube `[-1, 1]^dim`.
    Hypercube {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    kind: ActionSetKind,
    bound: f64,
}

impl ActionSet {
    pub fn hypercube(dim: usize) -> Self {
        ActionSet {
            kind: ActionSetKind::Hypercube { dim },
            bound: (dim as f64).sqrt(),
        }
    }

    pub fn finite(actions: Vec<DVector<f64>>) -> Result<Self, BanditError> {
        let first = actions.first().ok_or(BanditError::EmptyActionSet)?;
        let dim = first.len();
        for a in &actions {
            if a.len() != dim {
                return Err(BanditError::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
        }
        let bound = actions.iter().map(|a| a.norm()).fold(0.0, f64::max);
        Ok(ActionSet {
            kind: ActionSetKind::Finite(actions),
            bound,
        })
    }

    pub fn kind(&self) -> &ActionSetKind {
        &self.kind
    }

    /// Norm bound L over the set.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ActionSetKind::Finite(actions) => actions[0].len(),
            ActionSetKind::Hypercube { dim } => *dim,
        }
    }
}

fn sign(x: f64) -> f64 {
    // sign(0) -> +1 keeps tie-breaking deterministic.
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Best feasible action-parameter pair over the confidence region.
///
/// Finite sets use the closed-form inner maximum
/// `<x, center> + beta * ||x||_{V^{-1}}` per action, breaking ties towards
/// the lowest index. The hypercube uses the l1 relaxation of the ellipsoid:
/// the 2d extreme points `center +/- beta * sqrt(d) * col_j(V^{-1/2})` of
/// `{ theta : ||V^{1/2}(theta - center)||_1 <= beta * sqrt(d) }`, a superset
/// of the ellipsoid, so the returned value stays an upper bound on the true
/// optimistic value. The inner maximum over the cube is then `||theta||_1`
/// attained at `x = sign(theta)` componentwise; ties break towards the
/// lexicographically smallest sign vector.
pub fn select_optimistic(
    region: &ConfidenceRegion,
    actions: &ActionSet,
) -> Result<(DVector<f64>, f64), BanditError> {
    match actions.kind() {
        ActionSetKind::Finite(list) => {
            if list.is_empty() {
                return Err(BanditError::EmptyActionSet);
            }
            let v_inv = Cholesky::new(region.design.clone())
                .expect("design matrix is positive definite")
                .inverse();
            let mut best: Option<(usize, f64)> = None;
            for (idx, x) in list.iter().enumerate() {
                if x.len() != region.center.len() {
                    return Err(BanditError::DimensionMismatch {
                        expected: region.center.len(),
                        got: x.len(),
                    });
                }
                let bonus = x.dot(&(&v_inv * x)).max(0.0).sqrt();
                let score = region.center.dot(x) + region.beta * bonus;
                let better = match best {
                    None => true,
                    Some((_, s)) => score > s,
                };
                if better {
                    best = Some((idx, score));
                }
            }
            let (idx, score) = best.expect("non-empty list");
            Ok((list[idx].clone(), score))
        }
        ActionSetKind::Hypercube { dim } => {
            let d = *dim;
            if region.center.len() != d {
                return Err(BanditError::DimensionMismatch {
                    expected: d,
                    got: region.center.len(),
                });
            }
            let v_inv_sqrt = linalg::inverse_sqrt_spd(&region.design);
            let scale = region.beta * (d as f64).sqrt();
            let mut best_value = f64::NEG_INFINITY;
            let mut best_x = DVector::zeros(d);
            for j in 0..d {
                for s in [1.0, -1.0] {
                    let theta = &region.center + v_inv_sqrt.column(j) * (s * scale);
                    let value: f64 = theta.iter().map(|t| t.abs()).sum();
                    let x = theta.map(sign);
                    if value > best_value || (value == best_value && lex_less(&x, &best_x)) {
                        best_value = value;
                        best_x = x;
                    }
                }
            }
            Ok((best_x, best_value))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn constants() -> ProblemConstants {
        ProblemConstants {
            noise_scale: 0.1,
            param_bound: 1.0,
            action_bound: 2.0,
            dim: 4,
            n_agents: 4,
            ridge: 1.0,
            delta: 0.01,
        }
    }

    #[test]
    fn radius_noiseless_case() {
        let c = ProblemConstants {
            noise_scale: 0.0,
            param_bound: 1.0,
            action_bound: 1.0,
            dim: 3,
            n_agents: 2,
            ridge: 1.0,
            delta: 0.1,
        };
        for s in [0.0, 1.0, 50.0, 1e6] {
            assert_abs_diff_eq!(confidence_radius(&c, s).unwrap(), 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn radius_worked_example() {
        let got = confidence_radius(&constants(), 10.0).unwrap();
        assert_abs_diff_eq!(got, 3.2884222989418883, epsilon = 1e-9);
        assert_abs_diff_eq!(got, 3.288, epsilon = 1e-3);
    }

    #[test]
    fn radius_increasing_in_episodes() {
        let c = constants();
        let mut prev = confidence_radius(&c, 0.0).unwrap();
        for s in 1..40 {
            let cur = confidence_radius(&c, s as f64).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn radius_rejects_bad_delta() {
        let mut c = constants();
        c.delta = 0.0;
        assert!(confidence_radius(&c, 1.0).is_err());
        c.delta = 1.0;
        assert!(confidence_radius(&c, 1.0).is_err());
    }

    #[test]
    fn rls_estimate_is_zero_without_data() {
        let rls = RlsState::new(2, 1.0);
        assert_eq!(rls.estimate(), dvector![0.0, 0.0]);
    }

    #[test]
    fn rls_single_update_hand_solved() {
        let mut rls = RlsState::new(2, 1.0);
        rls.update(&dvector![1.0, 0.0], 2.0);
        assert!((rls.design() - dmatrix![2.0, 0.0; 0.0, 1.0]).norm() < 1e-14);
        let mu = rls.estimate();
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rls_incremental_matches_dense_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = 4;
        let mut rls = RlsState::new(d, 1.0);
        for _ in 0..50 {
            let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            let y = rng.gen_range(-2.0..2.0);
            rls.update(&x, y);
        }
        let direct = rls.design().clone().lu().solve(&rls.b).unwrap();
        assert!((rls.estimate() - direct).amax() < 1e-8);
    }

    #[test]
    fn finite_selection_example() {
        let region = ConfidenceRegion {
            center: dvector![1.0, 0.0],
            design: DMatrix::identity(2, 2),
            beta: 0.1,
            delta: 0.05,
        };
        let actions = ActionSet::finite(vec![dvector![1.0, 0.0], dvector![0.0, 1.0]]).unwrap();
        let (x, value) = select_optimistic(&region, &actions).unwrap();
        assert_eq!(x, dvector![1.0, 0.0]);
        assert_abs_diff_eq!(value, 1.1, epsilon = 1e-12);
    }

    #[test]
    fn zero_beta_reduces_to_greedy() {
        let region = ConfidenceRegion {
            center: dvector![0.2, 0.7],
            design: dmatrix![3.0, 0.5; 0.5, 2.0],
            beta: 0.0,
            delta: 0.05,
        };
        let actions = ActionSet::finite(vec![
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![0.5, 0.5],
        ])
        .unwrap();
        let (x, value) = select_optimistic(&region, &actions).unwrap();
        assert_eq!(x, dvector![0.0, 1.0]);
        assert_abs_diff_eq!(value, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let region = ConfidenceRegion {
            center: dvector![0.0, 0.0],
            design: DMatrix::identity(2, 2),
            beta: 1.0,
            delta: 0.05,
        };
        let a = dvector![0.5, 0.5];
        let actions = ActionSet::finite(vec![a.clone(), a.clone(), a]).unwrap();
        let (x, _) = select_optimistic(&region, &actions).unwrap();
        assert_eq!(x, dvector![0.5, 0.5]);
    }

    #[test]
    fn hypercube_selection_known_value() {
        let region = ConfidenceRegion {
            center: dvector![0.5, -0.2],
            design: DMatrix::identity(2, 2),
            beta: 0.3,
            delta: 0.05,
        };
        let actions = ActionSet::hypercube(2);
        let (x, value) = select_optimistic(&region, &actions).unwrap();
        assert_eq!(x, dvector![1.0, -1.0]);
        assert_abs_diff_eq!(value, 0.7 + 0.3 * 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ucb_value_monotone_in_beta() {
        let design = dmatrix![2.0, 0.3; 0.3, 1.5];
        let actions = ActionSet::hypercube(2);
        let finite = ActionSet::finite(vec![dvector![1.0, -1.0], dvector![-0.4, 0.9]]).unwrap();
        let mut prev_cube = f64::NEG_INFINITY;
        let mut prev_finite = f64::NEG_INFINITY;
        for k in 0..20 {
            let region = ConfidenceRegion {
                center: dvector![0.3, -0.1],
                design: design.clone(),
                beta: 0.1 * k as f64,
                delta: 0.05,
            };
            let (_, v_cube) = select_optimistic(&region, &actions).unwrap();
            let (_, v_fin) = select_optimistic(&region, &finite).unwrap();
            assert!(v_cube >= prev_cube - 1e-12);
            assert!(v_fin >= prev_finite - 1e-12);
            prev_cube = v_cube;
            prev_finite = v_fin;
        }
    }

    #[test]
    fn scaling_beta_keeps_pure_exploration_argmax() {
        let design = dmatrix![2.0, 0.4; 0.4, 1.0];
        let actions = ActionSet::finite(vec![
            dvector![0.9, 0.1],
            dvector![0.2, 1.0],
            dvector![-1.0, 0.3],
        ])
        .unwrap();
        let pick = |beta: f64| {
            let region = ConfidenceRegion {
                center: dvector![0.0, 0.0],
                design: design.clone(),
                beta,
                delta: 0.05,
            };
            select_optimistic(&region, &actions).unwrap().0
        };
        let base = pick(0.7);
        for c in [0.1, 2.0, 35.0] {
            assert_eq!(pick(0.7 * c), base);
        }
    }

    #[test]
    fn empty_finite_set_rejected() {
        assert!(matches!(
            ActionSet::finite(vec![]),
            Err(BanditError::EmptyActionSet)
        ));
    }

    #[test]
    fn region_membership() {
        let region = ConfidenceRegion {
            center: dvector![0.0, 0.0],
            design: DMatrix::identity(2, 2),
            beta: 1.0,
            delta: 0.05,
        };
        assert!(region.contains(&dvector![0.0, 0.0]));
        assert!(region.contains(&dvector![1.0, 0.0])); // boundary
        let stretched = ConfidenceRegion {
            center: dvector![0.0, 0.0],
            design: dmatrix![4.0, 0.0; 0.0, 1.0],
            beta: 1.0,
            delta: 0.05,
        };
        // ||(0.6, 0)||_V = 1.2 > 1.
        assert!(!stretched.contains(&dvector![0.6, 0.0]));
    }

    #[test]
    fn action_set_bounds() {
        assert_abs_diff_eq!(ActionSet::hypercube(4).bound(), 2.0, epsilon = 1e-14);
        let set = ActionSet::finite(vec![dvector![3.0, 4.0], dvector![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(set.bound(), 5.0, epsilon = 1e-14);
        assert_eq!(set.dim(), 2);
    }
}
