//! Communication graphs and the spectral mixing matrix `W = I - rho*L`.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense W is kept alongside the row-compressed form up to this size.
const DENSE_LIMIT: usize = 2048;

const CONNECTIVITY_RETRY_CAP: u64 = 1000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("need at least {min} nodes, got {n}")]
    TooFewNodes { n: usize, min: usize },
    #[error("edge ({0}, {1}) is invalid for {2} nodes")]
    InvalidEdge(usize, usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("{m} edges infeasible for n = {n}: need n-1 <= m <= n(n-1)/2")]
    InfeasibleEdgeCount { n: usize, m: usize },
    #[error("no connected sample found after {0} attempts")]
    GenerationFailed(u64),
    #[error("agent index {0} out of range for {1} nodes")]
    AgentOutOfRange(usize, usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TopologyError>;

/// Connected undirected graph: adjacency lists plus a sorted edge set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, enforcing no self-loops, no duplicates, connectivity.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 1 {
            return Err(TopologyError::TooFewNodes { n, min: 1 });
        }
        let mut normalized: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(TopologyError::InvalidEdge(a, b, n));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(TopologyError::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let g = Self {
            n,
            edges: normalized,
            adj,
        };
        if !g.bfs_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Open neighborhood of node `i` (excludes `i` itself).
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adj
            .get(i)
            .map(|v| v.as_slice())
            .ok_or(TopologyError::AgentOutOfRange(i, self.n))
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        Ok(self.neighbors(i)?.len())
    }

    fn bfs_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// BFS eccentricity maximum; the STop-k round bound uses this.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for start in 0..self.n {
            let mut dist = vec![usize::MAX; self.n];
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            best = best.max(*dist.iter().max().unwrap());
        }
        best
    }

    /// Edge-list text: header line `n <count>`, then one `i j` per line.
    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for &(a, b) in &self.edges {
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let header = header?;
        let n: usize = header
            .trim()
            .strip_prefix("n ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or(TopologyError::Parse {
                line: 1,
                msg: format!("expected header `n <count>`, got `{header}`"),
            })?;
        let mut edges = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut it = t.split_whitespace();
            let mut field = || -> Result<usize> {
                it.next()
                    .ok_or(TopologyError::Parse {
                        line: i + 1,
                        msg: "expected `i j`".into(),
                    })?
                    .parse()
                    .map_err(|e| TopologyError::Parse {
                        line: i + 1,
                        msg: format!("{e}"),
                    })
            };
            let a = field()?;
            let b = field()?;
            edges.push((a, b));
        }
        Self::new(n, edges)
    }
}

/// Ring graph on `n >= 3` nodes.
pub fn gen_ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(TopologyError::TooFewNodes { n, min: 3 });
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Erdős–Rényi G(n, m): uniform sample of `m_edges` distinct pairs,
/// resampled with a derived seed until connected. Deterministic in `seed`.
pub fn gen_erdos_renyi(n: usize, m_edges: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes { n, min: 2 });
    }
    let max_edges = n * (n - 1) / 2;
    if m_edges < n - 1 || m_edges > max_edges {
        return Err(TopologyError::InfeasibleEdgeCount { n, m: m_edges });
    }
    for attempt in 0..CONNECTIVITY_RETRY_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9e3779b97f4a7c15)));
        let picked = sample(&mut rng, max_edges, m_edges);
        let edges = picked.into_iter().map(|idx| pair_from_index(idx, n));
        match Graph::new(n, edges) {
            Ok(g) => return Ok(g),
            Err(TopologyError::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(TopologyError::GenerationFailed(CONNECTIVITY_RETRY_CAP))
}

/// Maps a flat index in [0, n(n-1)/2) to the unordered pair (i, j), i < j.
fn pair_from_index(idx: usize, n: usize) -> (usize, usize) {
    // row i starts at offset i*n - i*(i+1)/2 - i ... walk rows directly;
    // n is desk-scale so the linear walk is irrelevant next to the eigensolve.
    let mut rem = idx;
    for i in 0..n - 1 {
        let row = n - 1 - i;
        if rem < row {
            return (i, i + 1 + rem);
        }
        rem -= row;
    }
    unreachable!("pair index out of range")
}

/// Graph plus its consensus weights `W = I - rho*L` and spectral data.
#[derive(Debug, Clone)]
pub struct MixingTopology {
    graph: Graph,
    rho: f64,
    sigma2: f64,
    /// CSR over each row's nonzeros (neighbors plus the diagonal entry).
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    dense: Option<DMatrix<f64>>,
}

impl MixingTopology {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Second largest singular value of W; strictly below 1 on connected graphs.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Dense W, kept for graphs up to 2048 nodes.
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    /// Entry W[i, j] through the sparse rows.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i] as usize;
        let hi = self.row_ptr[i + 1] as usize;
        for k in lo..hi {
            if self.cols[k] as usize == j {
                return self.weights[k];
            }
        }
        0.0
    }

    /// out = W * x (one synchronous exchange round).
    ///
    /// Every off-diagonal nonzero equals rho, so each row reduces to a plain
    /// neighbor sum scaled once: out[i] = (1 - rho*deg_i) x[i] + rho * sum.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.node_count());
        debug_assert_eq!(out.len(), self.node_count());
        let rho = self.rho;
        for i in 0..self.node_count() {
            let lo = self.row_ptr[i] as usize + 1; // skip the diagonal entry
            let hi = self.row_ptr[i + 1] as usize;
            let mut acc = 0.0;
            for c in &self.cols[lo..hi] {
                acc += x[*c as usize];
            }
            out[i] = self.weights[lo - 1] * x[i] + rho * acc;
        }
    }
}

/// Builds `W = I - rho*L` with `rho = 2 / (lambda_1(L) + lambda_{n-1}(L))`,
/// eigenvalues of the Laplacian indexed in descending order, via dense
/// symmetric eigendecomposition. `sigma2` is the second largest singular
/// value of W (the absolute eigenvalues, since W is symmetric).
pub fn mixing_matrix(g: &Graph) -> Result<MixingTopology> {
    let n = g.node_count();
    if !g.bfs_connected() {
        return Err(TopologyError::Disconnected);
    }
    let (rho, sigma2, dense_w) = if n == 1 {
        // single agent: W = [1]; no mixing, treat the connectivity constant as 0
        (0.0, 0.0, Some(DMatrix::from_element(1, 1, 1.0)))
    } else {
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for &(a, b) in g.edges() {
            lap[(a, b)] = -1.0;
            lap[(b, a)] = -1.0;
            lap[(a, a)] += 1.0;
            lap[(b, b)] += 1.0;
        }
        let mut eig = SymmetricEigen::new(lap.clone()).eigenvalues.as_slice().to_vec();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap()); // descending
        let lambda_1 = eig[0];
        let lambda_second_smallest = eig[n - 2];
        if lambda_second_smallest <= 1e-12 {
            return Err(TopologyError::Disconnected);
        }
        let rho = 2.0 / (lambda_1 + lambda_second_smallest);
        let w = DMatrix::<f64>::identity(n, n) - lap * rho;
        let mut singular: Vec<f64> = SymmetricEigen::new(w.clone())
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .collect();
        singular.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (rho, singular[1], Some(w))
    };

    let dense = dense_w.expect("dense W was just built");
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    row_ptr.push(0u32);
    for i in 0..n {
        let deg = g.neighbors(i)?.len() as f64;
        cols.push(i as u32);
        weights.push(1.0 - rho * deg);
        for &j in g.neighbors(i)? {
            cols.push(j as u32);
            weights.push(rho);
        }
        row_ptr.push(cols.len() as u32);
    }

    Ok(MixingTopology {
        graph: g.clone(),
        rho,
        sigma2,
        row_ptr,
        cols,
        weights,
        dense: (n <= DENSE_LIMIT).then_some(dense),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_basics() {
        let g = gen_ring(3).unwrap();
        assert_eq!(g.edge_count(), 3); // triangle = K3
        let g = gen_ring(5).unwrap();
        assert_eq!(g.edge_count(), 5);
        for i in 0..5 {
            assert_eq!(g.degree(i).unwrap(), 2);
        }
        assert_eq!(gen_ring(4).unwrap().diameter(), 2);
        assert!(gen_ring(2).is_err());
    }

    #[test]
    fn neighbors_cases() {
        let g = gen_ring(5).unwrap();
        assert_eq!(g.neighbors(0).unwrap(), &[1, 4]);
        let k4 = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(k4.neighbors(2).unwrap(), &[0, 1, 3]);
        let e = Graph::new(2, [(0, 1)]).unwrap();
        assert_eq!(e.neighbors(0).unwrap(), &[1]);
        assert!(e.neighbors(2).is_err());
    }

    #[test]
    fn graph_validation() {
        assert!(matches!(
            Graph::new(3, [(0, 0)]),
            Err(TopologyError::InvalidEdge(0, 0, 3))
        ));
        assert!(matches!(
            Graph::new(3, [(0, 1), (1, 0), (1, 2)]),
            Err(TopologyError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::new(4, [(0, 1), (2, 3)]),
            Err(TopologyError::Disconnected)
        ));
    }

    #[test]
    fn erdos_renyi_deterministic_and_connected() {
        let g1 = gen_erdos_renyi(100, 300, 7).unwrap();
        let g2 = gen_erdos_renyi(100, 300, 7).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(g1.edge_count(), 300);
        assert!(g1.bfs_connected());

        let g3 = gen_erdos_renyi(100, 300, 8).unwrap();
        assert_ne!(g1.edges(), g3.edges());

        // forced cases
        let g = gen_erdos_renyi(2, 1, 123).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        let g = gen_erdos_renyi(4, 6, 5).unwrap();
        assert_eq!(g.edge_count(), 6); // K4

        assert!(matches!(
            gen_erdos_renyi(10, 3, 1),
            Err(TopologyError::InfeasibleEdgeCount { .. })
        ));
        assert!(gen_erdos_renyi(10, 100, 1).is_err());
    }

    #[test]
    fn pair_index_covers_all_pairs() {
        let n = 7;
        let mut seen = std::collections::HashSet::new();
        for idx in 0..n * (n - 1) / 2 {
            let (a, b) = pair_from_index(idx, n);
            assert!(a < b && b < n);
            assert!(seen.insert((a, b)));
        }
        assert_eq!(seen.len(), n * (n - 1) / 2);
    }

    #[test]
    fn mixing_triangle_is_averaging() {
        // K3 Laplacian eigenvalues {3, 3, 0}: rho = 1/3, W = J/3
        let t = mixing_matrix(&gen_ring(3).unwrap()).unwrap();
        assert!((t.rho() - 1.0 / 3.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.entry(i, j) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        assert!(t.sigma2() < 1e-12);
    }

    #[test]
    fn mixing_two_node_path() {
        // L eigenvalues {2, 0}: rho = 2/(2+2) = 0.5, W = [[.5,.5],[.5,.5]]
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let t = mixing_matrix(&g).unwrap();
        assert!((t.rho() - 0.5).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.entry(i, j) - 0.5).abs() < 1e-12);
            }
        }
        assert!(t.sigma2() < 1e-12);
    }

    #[test]
    fn mixing_rows_sum_to_one() {
        let t = mixing_matrix(&gen_erdos_renyi(30, 70, 3).unwrap()).unwrap();
        let ones = vec![1.0; 30];
        let mut out = vec![0.0; 30];
        t.apply(&ones, &mut out);
        for v in out {
            assert!((v - 1.0).abs() < 1e-10);
        }
        assert!(t.sigma2() < 1.0);
        assert!(t.sigma2() >= 0.0);
    }

    #[test]
    fn dense_and_sparse_agree() {
        let t = mixing_matrix(&gen_erdos_renyi(25, 60, 11).unwrap()).unwrap();
        let d = t.dense().unwrap();
        for i in 0..25 {
            for j in 0..25 {
                assert!((d[(i, j)] - t.entry(i, j)).abs() < 1e-14);
            }
        }
        // sparsity pattern matches the graph off the diagonal
        for i in 0..25 {
            for j in 0..25 {
                if i != j && !t.graph().neighbors(i).unwrap().contains(&j) {
                    assert_eq!(t.entry(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn single_node_topology() {
        let g = Graph::new(1, []).unwrap();
        let t = mixing_matrix(&g).unwrap();
        assert_eq!(t.entry(0, 0), 1.0);
        assert_eq!(t.sigma2(), 0.0);
    }

    #[test]
    fn graph_io_roundtrip() {
        let g = gen_erdos_renyi(12, 20, 99).unwrap();
        let mut buf = Vec::new();
        g.to_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n 12\n"));
        let back = Graph::from_reader(buf.as_slice()).unwrap();
        assert_eq!(g, back);
    }
}
