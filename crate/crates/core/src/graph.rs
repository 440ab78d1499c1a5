//! Network graphs and their doubly-stochastic structure matrices.
//!
//! Agents sit on the nodes of a connected undirected graph and may exchange
//! values only along edges. Gossip averaging multiplies by a symmetric,
//! doubly-stochastic weight matrix `W` whose support matches the graph. The
//! mixing speed is governed by `lambda2`, the second-largest eigenvalue of
//! `W` in absolute value, giving a spectral gap of `1 - lambda2`.
//!
//! Weights use the max-degree rule: `W[i][j] = 1/(k_max + 1)` on edges and
//! `W[i][i] = 1 - deg(i)/(k_max + 1)`, with degrees counted over non-loop
//! edges. On a k-regular graph this reduces to uniform averaging over the
//! closed neighborhood, so a complete graph with self-loops yields exactly
//! `J/n` and a spectral gap of 1.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

/// Tolerance for the doubly-stochastic row/column-sum invariant.
pub const STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph not connected")]
    NotConnected,
    #[error("graph must have at least one node")]
    Empty,
    #[error("k-regular graphs require even k with k < n (got k={k}, n={n})")]
    BadRegularDegree { k: usize, n: usize },
    #[error("edge ({i}, {j}) out of range for n={n}")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge list contains self-loop ({0}, {0}); loops come from the self_loops flag")]
    LoopInEdgeList(usize),
    #[error("invalid edge list (line {line}): {msg}")]
    EdgeListFormat { line: usize, msg: String },
    #[error("structure matrix must be symmetric")]
    NotSymmetric,
    #[error("structure matrix has a negative entry at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize },
    #[error("structure matrix row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("disconnected or periodic structure matrix")]
    DegenerateSpectrum,
}

/// Graph families used by the experiments.
///
/// `KRegular(k)` is the circulant ring lattice linking each node to its k/2
/// nearest neighbors on each side; `Cycle` is the 2-regular special case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyKind {
    Complete,
    Cycle,
    Path,
    KRegular(usize),
    Custom(Vec<(usize, usize)>),
}

impl TopologyKind {
    pub fn label(&self) -> String {
        match self {
            TopologyKind::Complete => "complete".to_string(),
            TopologyKind::Cycle => "cycle".to_string(),
            TopologyKind::Path => "path".to_string(),
            TopologyKind::KRegular(k) => format!("{k}-regular"),
            TopologyKind::Custom(_) => "custom".to_string(),
        }
    }
}

/// Symmetric boolean adjacency over `n` nodes, connected by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    bits: Vec<bool>,
    self_loops: bool,
}

impl Adjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    /// True when `(i, j)` is an edge; the diagonal is an edge iff self-loops
    /// are enabled.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Degree of node `i` counting non-loop edges only.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.n)
            .filter(|&j| j != i && self.is_edge(i, j))
            .count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    fn from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        self_loops: bool,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut bits = vec![false; n * n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(GraphError::EdgeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(GraphError::LoopInEdgeList(i));
            }
            bits[i * n + j] = true;
            bits[j * n + i] = true;
        }
        if self_loops {
            for i in 0..n {
                bits[i * n + i] = true;
            }
        }
        let adj = Adjacency {
            n,
            bits,
            self_loops,
        };
        if !adj.is_connected() {
            return Err(GraphError::NotConnected);
        }
        Ok(adj)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in (0..self.n).filter(|&j| j != i && self.is_edge(i, j)) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Builds the adjacency for one of the supported graph families.
pub fn build_graph(
    kind: &TopologyKind,
    n: usize,
    self_loops: bool,
) -> Result<Adjacency, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let pairs: Vec<(usize, usize)> = match kind {
        TopologyKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        // A 2-cycle degenerates to a single edge.
        TopologyKind::Cycle if n <= 2 => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        TopologyKind::Cycle => ring_lattice_pairs(n, 2)?,
        TopologyKind::Path => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        TopologyKind::KRegular(k) => ring_lattice_pairs(n, *k)?,
        TopologyKind::Custom(edges) => edges.clone(),
    };
    Adjacency::from_pairs(n, pairs, self_loops)
}

fn ring_lattice_pairs(n: usize, k: usize) -> Result<Vec<(usize, usize)>, GraphError> {
    if n == 1 {
        // A single node is trivially a ring.
        return Ok(Vec::new());
    }
    if !k.is_multiple_of(2) || k >= n {
        return Err(GraphError::BadRegularDegree { k, n });
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for m in 1..=k / 2 {
            pairs.push((i, (i + m) % n));
        }
    }
    Ok(pairs)
}

/// Parses the plain-text edge list format: first line `n`, then one `i j`
/// pair per line (0-indexed). Blank lines are ignored.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>), GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, first) = lines.next().ok_or(GraphError::EdgeListFormat {
        line: 1,
        msg: "empty file".to_string(),
    })?;
    let n: usize = first.parse().map_err(|_| GraphError::EdgeListFormat {
        line,
        msg: format!("expected node count, got {first:?}"),
    })?;
    let mut edges = Vec::new();
    for (line, l) in lines {
        let mut it = l.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize, GraphError> {
            tok.and_then(|t| t.parse().ok())
                .ok_or(GraphError::EdgeListFormat {
                    line,
                    msg: format!("expected \"i j\", got {l:?}"),
                })
        };
        let i = parse(it.next())?;
        let j = parse(it.next())?;
        if it.next().is_some() {
            return Err(GraphError::EdgeListFormat {
                line,
                msg: format!("expected \"i j\", got {l:?}"),
            });
        }
        edges.push((i, j));
    }
    Ok((n, edges))
}

/// A graph together with its structure matrix and spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub adjacency: Adjacency,
    pub w: DMatrix<f64>,
    pub lambda2: f64,
    pub spectral_gap: f64,
}

impl Topology {
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Wraps an explicit weight matrix, validating symmetry, nonnegativity,
    /// the doubly-stochastic sums, and `lambda2 < 1`.
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = w.nrows();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if !linalg::is_symmetric(&w, 1e-12) {
            return Err(GraphError::NotSymmetric);
        }
        for i in 0..n {
            for j in 0..n {
                if w[(i, j)] < 0.0 {
                    return Err(GraphError::NegativeEntry { i, j });
                }
            }
            let sum: f64 = w.row(i).iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(GraphError::NotStochastic { row: i, sum });
            }
        }
        let lambda2 = second_eigenvalue(&w)?;
        if lambda2 >= 1.0 {
            return Err(GraphError::DegenerateSpectrum);
        }
        // Support of the positive entries defines the communication pattern.
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| w[(i, j)] > 0.0)
            .collect();
        let self_loops = (0..n).all(|i| w[(i, i)] > 0.0);
        let adjacency = Adjacency::from_pairs(n, pairs, self_loops)?;
        Ok(Topology {
            adjacency,
            w,
            lambda2,
            spectral_gap: 1.0 - lambda2,
        })
    }
}

/// Builds the max-degree structure matrix for a connected adjacency and
/// computes its spectral data.
pub fn structure_matrix(adj: &Adjacency) -> Result<Topology, GraphError> {
    let n = adj.n();
    let k_max = adj.max_degree();
    let weight = 1.0 / (k_max as f64 + 1.0);
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && adj.is_edge(i, j) {
                w[(i, j)] = weight;
            }
        }
        w[(i, i)] = 1.0 - adj.degree(i) as f64 * weight;
    }
    let lambda2 = second_eigenvalue(&w)?;
    if lambda2 >= 1.0 {
        return Err(GraphError::DegenerateSpectrum);
    }
    Ok(Topology {
        adjacency: adj.clone(),
        w,
        lambda2,
        spectral_gap: 1.0 - lambda2,
    })
}

/// Largest absolute eigenvalue after removing one copy of the Perron
/// eigenvalue 1. Returns 0 for a 1x1 matrix.
pub fn second_eigenvalue(w: &DMatrix<f64>) -> Result<f64, GraphError> {
    if !linalg::is_symmetric(w, 1e-12) {
        return Err(GraphError::NotSymmetric);
    }
    let values = linalg::symmetric_eigen(w).values;
    if values.len() <= 1 {
        return Ok(0.0);
    }
    // Drop the eigenvalue closest to 1 (the constant eigenvector).
    let top = values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap())
        .map(|(idx, _)| idx)
        .unwrap();
    Ok(values
        .iter()
        .enumerate()
        .filter(|&(idx, _)| idx != top)
        .fold(0.0, |acc, (_, &v)| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn topo(kind: TopologyKind, n: usize) -> Topology {
        structure_matrix(&build_graph(&kind, n, true).unwrap()).unwrap()
    }

    #[test]
    fn complete_graph_has_all_pairs() {
        let adj = build_graph(&TopologyKind::Complete, 4, true).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(adj.is_edge(i, j));
            }
        }
    }

    #[test]
    fn cycle_adjacency_pattern() {
        let adj = build_graph(&TopologyKind::Cycle, 4, true).unwrap();
        for i in 0..4usize {
            assert!(adj.is_edge(i, i));
            assert!(adj.is_edge(i, (i + 1) % 4));
            assert!(adj.is_edge(i, (i + 3) % 4));
            assert!(!adj.is_edge(i, (i + 2) % 4));
        }
    }

    #[test]
    fn ring_lattice_neighbors_and_degree() {
        let adj = build_graph(&TopologyKind::KRegular(4), 50, true).unwrap();
        for i in 0..50usize {
            for m in 1..=2usize {
                assert!(adj.is_edge(i, (i + m) % 50));
                assert!(adj.is_edge(i, (i + 50 - m) % 50));
            }
            assert!(adj.is_edge(i, i));
            assert_eq!(adj.degree(i), 4);
            // Degree including the self-loop is k + 1 = 5.
            assert_eq!((0..50).filter(|&j| adj.is_edge(i, j)).count(), 5);
        }
    }

    #[test]
    fn regular_weights_are_uniform_over_closed_neighborhoods() {
        for (k, n) in [(2usize, 7usize), (4, 9), (8, 12)] {
            let t = topo(TopologyKind::KRegular(k), n);
            let w = 1.0 / (k as f64 + 1.0);
            for i in 0..n {
                let mut nonzeros = 0;
                for j in 0..n {
                    let entry = t.w[(i, j)];
                    assert!(
                        entry == 0.0 || (entry - w).abs() < 1e-15,
                        "k={k} entry {entry}"
                    );
                    if entry != 0.0 {
                        nonzeros += 1;
                    }
                }
                assert_eq!(nonzeros, k + 1);
            }
        }
    }

    #[test]
    fn bad_regular_degrees_rejected() {
        assert!(matches!(
            build_graph(&TopologyKind::KRegular(3), 10, true),
            Err(GraphError::BadRegularDegree { .. })
        ));
        assert!(matches!(
            build_graph(&TopologyKind::KRegular(10), 10, true),
            Err(GraphError::BadRegularDegree { .. })
        ));
    }

    #[test]
    fn disconnected_custom_graph_rejected() {
        let err = build_graph(&TopologyKind::Custom(vec![(0, 1), (2, 3)]), 4, true).unwrap_err();
        assert_eq!(err.to_string(), "graph not connected");
    }

    #[test]
    fn custom_rejects_loops_and_range() {
        assert!(matches!(
            build_graph(&TopologyKind::Custom(vec![(1, 1)]), 2, false),
            Err(GraphError::LoopInEdgeList(1))
        ));
        assert!(matches!(
            build_graph(&TopologyKind::Custom(vec![(0, 5)]), 3, false),
            Err(GraphError::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn complete_structure_matrix_is_uniform() {
        let t = topo(TopologyKind::Complete, 6);
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(t.w[(i, j)], 1.0 / 6.0, epsilon = 1e-15);
            }
        }
        assert!(t.lambda2 <= 1e-10);
        assert_abs_diff_eq!(t.spectral_gap, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn path3_structure_matrix_matches_max_degree_rule() {
        let adj = build_graph(&TopologyKind::Path, 3, false).unwrap();
        let t = structure_matrix(&adj).unwrap();
        let expected = dmatrix![
            2.0/3.0, 1.0/3.0, 0.0;
            1.0/3.0, 1.0/3.0, 1.0/3.0;
            0.0,     1.0/3.0, 2.0/3.0;
        ];
        assert!((t.w.clone() - expected).norm() < 1e-14);
        for i in 0..3 {
            let row: f64 = t.w.row(i).iter().sum();
            let col: f64 = t.w.column(i).iter().sum();
            assert_abs_diff_eq!(row, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cycle4_spectrum() {
        let t = topo(TopologyKind::Cycle, 4);
        // (1/3)(I + A) has circulant eigenvalues (1 + 2 cos(2 pi k / 4)) / 3.
        let mut vals = linalg::symmetric_eigen(&t.w).values;
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [-1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(t.lambda2, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cycle10_second_eigenvalue() {
        let t = topo(TopologyKind::Cycle, 10);
        let expected = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 10.0).cos()) / 3.0;
        assert_abs_diff_eq!(t.lambda2, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(t.lambda2, 0.872677996249965, epsilon = 1e-9);
    }

    #[test]
    fn weighted_two_node_matrix() {
        let w = dmatrix![0.9, 0.1; 0.1, 0.9];
        assert_abs_diff_eq!(second_eigenvalue(&w).unwrap(), 0.8, epsilon = 1e-12);
        let t = Topology::from_matrix(w).unwrap();
        assert_abs_diff_eq!(t.lambda2, 0.8, epsilon = 1e-12);
        assert!(t.adjacency.self_loops());
    }

    #[test]
    fn averaging_projector_has_zero_lambda2() {
        let w = DMatrix::from_element(4, 4, 0.25);
        assert!(second_eigenvalue(&w).unwrap() < 1e-12);
    }

    #[test]
    fn non_symmetric_input_rejected() {
        let w = dmatrix![0.5, 0.5; 0.2, 0.8];
        assert!(matches!(
            second_eigenvalue(&w),
            Err(GraphError::NotSymmetric)
        ));
    }

    #[test]
    fn from_matrix_validates() {
        let asym = dmatrix![0.5, 0.5; 0.2, 0.8];
        assert!(Topology::from_matrix(asym).is_err());
        let bad_sum = dmatrix![0.5, 0.4; 0.4, 0.5];
        assert!(matches!(
            Topology::from_matrix(bad_sum),
            Err(GraphError::NotStochastic { .. })
        ));
        let negative = dmatrix![1.2, -0.2; -0.2, 1.2];
        assert!(matches!(
            Topology::from_matrix(negative),
            Err(GraphError::NegativeEntry { .. })
        ));
        // Periodic two-node swap has eigenvalues {1, -1}.
        let periodic = dmatrix![0.0, 1.0; 1.0, 0.0];
        assert!(matches!(
            Topology::from_matrix(periodic),
            Err(GraphError::DegenerateSpectrum)
        ));
    }

    #[test]
    fn single_node_topology() {
        let t = topo(TopologyKind::Complete, 1);
        assert_eq!(t.n(), 1);
        assert_abs_diff_eq!(t.w[(0, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(t.lambda2, 0.0);
    }

    #[test]
    fn edge_list_parsing() {
        let (n, edges) = parse_edge_list("3\n0 1\n1 2\n").unwrap();
        assert_eq!(n, 3);
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("3\n0\n").is_err());
        assert!(parse_edge_list("3\n0 1 2\n").is_err());
        assert!(parse_edge_list("x\n").is_err());
    }

    #[test]
    fn built_topologies_are_doubly_stochastic() {
        let cases = [
            topo(TopologyKind::Complete, 5),
            topo(TopologyKind::Cycle, 7),
            topo(TopologyKind::Path, 6),
            topo(TopologyKind::KRegular(4), 9),
        ];
        for t in cases {
            let n = t.n();
            let ones = nalgebra::DVector::from_element(n, 1.0);
            let fixed = &t.w * &ones;
            for i in 0..n {
                assert!((fixed[i] - 1.0).abs() <= STOCHASTIC_TOL);
                let col: f64 = t.w.column(i).iter().sum();
                assert!((col - 1.0).abs() <= STOCHASTIC_TOL);
            }
            assert!(t.lambda2 < 1.0);
        }
    }
}
