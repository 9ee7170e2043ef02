//! Communication substrate: graphs, Metropolis weights, the weight-matrix
//! assumption checks, consensus averaging and the log-ratio inner loop.
//!
//! This is a synchronous simulation. One process holds every agent's values
//! and applies the averaging matrix directly.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, tol, DenseMatrix};
use crate::rng::SimRng;

/// Undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.edges.insert((i, j));
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 1..n {
            g.edges.insert((i - 1, i));
        }
        g
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.edges.insert((0, n - 1));
        }
        g
    }

    /// Random connected graph: a random spanning tree plus each remaining
    /// edge independently with probability `extra_edge_prob`.
    pub fn random_connected(n: usize, extra_edge_prob: f64, rng: &mut SimRng) -> Self {
        let mut g = Self::empty(n);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i + 1);
            order.swap(i, j);
        }
        for k in 1..n {
            let parent = order[rng.below(k)];
            g.add_edge_unchecked(order[k], parent);
        }
        for i in 0..n {
            for j in i + 1..n {
                if !g.has_edge(i, j) && rng.uniform() < extra_edge_prob {
                    g.edges.insert((i, j));
                }
            }
        }
        g
    }

    fn add_edge_unchecked(&mut self, i: usize, j: usize) {
        self.edges.insert((i.min(j), i.max(j)));
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "graph node",
                index: i.max(j),
                limit: self.n,
            });
        }
        if i == j {
            return Err(Error::InvalidInstance(format!("self-loop at node {i}")));
        }
        self.add_edge_unchecked(i, j);
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != i && self.has_edge(i, j))
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }

    /// Edge-list text: a `nodes <n>` header, then one `i j` pair per line.
    /// Blank lines and `#` comments are ignored.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.n);
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hn, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "empty graph file"))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["nodes", n] => n
                .parse::<usize>()
                .map_err(|_| Error::parse(hn, format!("bad node count '{n}'")))?,
            _ => return Err(Error::parse(hn, "expected 'nodes <n>' header")),
        };
        let mut g = Self::empty(n);
        for (ln, line) in lines {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::parse(ln, format!("bad node '{t}'")))
                })
                .collect::<Result<_>>()?;
            if ids.len() != 2 {
                return Err(Error::parse(ln, "expected two node ids"));
            }
            g.add_edge(ids[0], ids[1])
                .map_err(|e| Error::parse(ln, e.to_string()))?;
        }
        Ok(g)
    }
}

/// Nonnegative, row-stochastic consensus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DenseMatrix);

impl WeightMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                actual: m.cols(),
            });
        }
        for i in 0..m.rows() {
            let row = m.row(i);
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::NotStochastic(format!(
                    "weight row {i} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol::WEIGHT_ROW_SUM {
                return Err(Error::NotStochastic(format!(
                    "weight row {i} sums to {sum}"
                )));
            }
        }
        Ok(Self(m))
    }

    /// Also checks that weights vanish off the edge set.
    pub fn with_graph(m: DenseMatrix, graph: &Graph) -> Result<Self> {
        let w = Self::new(m)?;
        if w.0.rows() != graph.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: graph.n_nodes(),
                actual: w.0.rows(),
            });
        }
        for i in 0..graph.n_nodes() {
            for j in 0..graph.n_nodes() {
                if i != j && !graph.has_edge(i, j) && w.0[(i, j)] != 0.0 {
                    return Err(Error::config(
                        "A2.2",
                        format!("weight ({i},{j}) is nonzero but the edge is absent"),
                    ));
                }
            }
        }
        Ok(w)
    }

    pub fn identity(n: usize) -> Self {
        Self(DenseMatrix::identity(n))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// `c(i,j) = 1/(1 + max(dᵢ, dⱼ))` on edges, self-weight takes the remainder.
pub fn metropolis_weights(graph: &Graph) -> WeightMatrix {
    let n = graph.n_nodes();
    let deg: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    let mut m = DenseMatrix::zeros(n, n);
    for (i, j) in graph.edges() {
        let c = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        m[(i, j)] = c;
        m[(j, i)] = c;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    WeightMatrix(m)
}

/// Outcome of checking a sample of weight matrices against the consensus
/// assumptions (row stochastic, mean column stochastic, positive entries
/// bounded below, contraction of the disagreement subspace).
#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub row_stochastic: bool,
    pub mean_column_stochastic: bool,
    /// Smallest positive entry over the sample.
    pub min_positive_entry: f64,
    /// Spectral norm of `mean(Cᵀ(I − 11ᵀ/n)C)`.
    pub rho: f64,
}

impl A2Report {
    pub fn contraction_ok(&self) -> bool {
        self.rho < 1.0
    }

    pub fn passes(&self) -> bool {
        self.row_stochastic
            && self.mean_column_stochastic
            && self.min_positive_entry > 0.0
            && self.contraction_ok()
    }

    /// First violated item, if any.
    pub fn violation(&self) -> Option<&'static str> {
        if !self.row_stochastic || !self.mean_column_stochastic || !(self.min_positive_entry > 0.0)
        {
            Some("A2.1")
        } else if !self.contraction_ok() {
            Some("A2.3")
        } else {
            None
        }
    }
}

pub fn validate_assumption_a2(sample: &[WeightMatrix]) -> Result<A2Report> {
    let first = sample
        .first()
        .ok_or_else(|| Error::config("A2", "empty weight sample"))?;
    let n = first.n();
    if let Some(bad) = sample.iter().find(|w| w.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.n(),
        });
    }
    let row_stochastic = sample.iter().all(|w| {
        (0..n).all(|i| {
            let r = w.0.row(i);
            r.iter().all(|&x| x >= 0.0)
                && (r.iter().sum::<f64>() - 1.0).abs() <= tol::WEIGHT_ROW_SUM
        })
    });
    let k = sample.len() as f64;
    let mut mean = DenseMatrix::zeros(n, n);
    let mut mean_quad = DenseMatrix::zeros(n, n);
    let q = DenseMatrix::from_fn(n, n, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64
    });
    let mut min_pos = f64::INFINITY;
    for w in sample {
        mean = mean.add(&w.0.scale(1.0 / k))?;
        let quad = w.0.transpose().matmul(&q)?.matmul(&w.0)?;
        mean_quad = mean_quad.add(&quad.scale(1.0 / k))?;
        for &x in w.0.as_slice() {
            if x > 0.0 {
                min_pos = min_pos.min(x);
            }
        }
    }
    let mean_column_stochastic = (0..n).all(|j| {
        let s: f64 = (0..n).map(|i| mean[(i, j)]).sum();
        (s - 1.0).abs() <= tol::WEIGHT_ROW_SUM * n as f64
    });
    Ok(A2Report {
        row_stochastic,
        mean_column_stochastic,
        min_positive_entry: if min_pos.is_finite() { min_pos } else { 0.0 },
        rho: spectral_norm(&mean_quad)?,
    })
}

/// `outᵢ = Σⱼ c(i,j) valuesⱼ`
pub fn consensus_average(values: &[Vec<f64>], weights: &WeightMatrix) -> Result<Vec<Vec<f64>>> {
    let n = weights.n();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: values.len(),
        });
    }
    let k = values.first().map_or(0, Vec::len);
    if let Some(bad) = values.iter().find(|v| v.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: bad.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Seeded from the first term so a unit weight reproduces its input bit for bit.
        let c0 = weights.get(i, 0);
        let mut acc: Vec<f64> = values[0].iter().map(|x| c0 * x).collect();
        for (j, v) in values.iter().enumerate().skip(1) {
            let c = weights.get(i, j);
            if c != 0.0 {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += c * x;
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// How each agent reconstructs the global importance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerLoop {
    /// Run to consensus: every agent holds `∏ᵢ ρⁱ`.
    Exact,
    /// `k` averaging rounds on the log-ratios, then `exp(n·pⁱ)`.
    Truncated(usize),
    /// No communication: `exp(n·log ρⁱ) = (ρⁱ)ⁿ`.
    Local,
}

impl std::str::FromStr for InnerLoop {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "local" => Ok(Self::Local),
            other => other
                .strip_prefix("truncated")
                .map(|rest| {
                    rest.trim_start_matches(['(', ':', '='])
                        .trim_end_matches(')')
                })
                .unwrap_or(other)
                .parse::<usize>()
                .map(Self::Truncated)
                .map_err(|_| format!("unknown inner-loop mode '{s}'")),
        }
    }
}

impl std::fmt::Display for InnerLoop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exact => f.write_str("exact"),
            Self::Truncated(k) => write!(f, "truncated{k}"),
            Self::Local => f.write_str("local"),
        }
    }
}

/// Per-agent estimates of the global ratio `ρ = ∏ᵢ ρⁱ`.
pub fn global_ratio(
    local_ratios: &[f64],
    mode: InnerLoop,
    weights: &WeightMatrix,
) -> Result<Vec<f64>> {
    if let Some(&bad) = local_ratios.iter().find(|&&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::NonPositiveRatio(bad));
    }
    let logs: Vec<f64> = local_ratios.iter().map(|r| r.ln()).collect();
    global_ratio_from_logs(&logs, mode, weights)
}

/// Same as [`global_ratio`] but starting from the log-ratios `pⁱ = log ρⁱ`,
/// which stay finite when a policy probability underflows.
pub fn global_ratio_from_logs(
    log_ratios: &[f64],
    mode: InnerLoop,
    weights: &WeightMatrix,
) -> Result<Vec<f64>> {
    if log_ratios.iter().any(|p| p.is_nan() || *p == f64::INFINITY) {
        return Err(Error::NonFinite {
            what: "log importance ratio",
            agent: log_ratios
                .iter()
                .position(|p| p.is_nan() || *p == f64::INFINITY),
        });
    }
    let n = log_ratios.len();
    match mode {
        InnerLoop::Exact => {
            // The consensus limit of the averaged logs is Σ pⁱ / n at every agent.
            let rho = log_ratios.iter().sum::<f64>().exp();
            Ok(vec![rho; n])
        }
        InnerLoop::Truncated(k) => {
            if weights.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: weights.n(),
                });
            }
            let mut p = log_ratios.to_vec();
            let mut next = vec![0.0; n];
            for _ in 0..k {
                for (i, out) in next.iter_mut().enumerate() {
                    *out = (0..n)
                        .filter(|&j| weights.get(i, j) != 0.0)
                        .map(|j| weights.get(i, j) * p[j])
                        .sum();
                }
                std::mem::swap(&mut p, &mut next);
            }
            Ok(p.into_iter().map(|pi| (n as f64 * pi).exp()).collect())
        }
        InnerLoop::Local => Ok(log_ratios.iter().map(|p| (n as f64 * p).exp()).collect()),
    }
}

/// `‖ω − 1⊗⟨ω⟩‖₂` over the stacked per-agent vectors.
pub fn disagreement_norm(values: &[Vec<f64>]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Ok(0.0);
    }
    let k = values[0].len();
    if let Some(bad) = values.iter().find(|v| v.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: bad.len(),
        });
    }
    let mean = mean_vector(values);
    Ok(values
        .iter()
        .flat_map(|v| v.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)))
        .sum::<f64>()
        .sqrt())
}

pub fn mean_vector(values: &[Vec<f64>]) -> Vec<f64> {
    let k = values.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = values.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Source of per-step communication graphs.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum GraphSequence {
    Fixed(Graph, WeightMatrix),
    /// Cycles through the list in order.
    Periodic(Vec<(Graph, WeightMatrix)>),
    /// Draws i.i.d. from a pool of connected graphs with its own stream.
    RandomPool {
        pool: Vec<(Graph, WeightMatrix)>,
        rng: SimRng,
    },
}

impl GraphSequence {
    pub fn fixed(graph: Graph) -> Self {
        let w = metropolis_weights(&graph);
        Self::Fixed(graph, w)
    }

    pub fn periodic(graphs: Vec<Graph>) -> Self {
        Self::Periodic(
            graphs
                .into_iter()
                .map(|g| {
                    let w = metropolis_weights(&g);
                    (g, w)
                })
                .collect(),
        )
    }

    /// Pool of `pool_size` random connected graphs, sampled per step.
    pub fn random_pool(n: usize, pool_size: usize, extra_edge_prob: f64, seed: u64) -> Self {
        let mut build = SimRng::new(seed, "network-pool");
        let pool = (0..pool_size.max(1))
            .map(|_| {
                let g = Graph::random_connected(n, extra_edge_prob, &mut build);
                let w = metropolis_weights(&g);
                (g, w)
            })
            .collect();
        Self::RandomPool {
            pool,
            rng: SimRng::new(seed, "network"),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Self::Fixed(g, _) => g.n_nodes(),
            Self::Periodic(v) | Self::RandomPool { pool: v, .. } => v[0].0.n_nodes(),
        }
    }

    /// Weights used at step `t`.
    pub fn weights_at(&mut self, t: u64) -> &WeightMatrix {
        match self {
            Self::Fixed(_, w) => w,
            Self::Periodic(v) => &v[(t % v.len() as u64) as usize].1,
            Self::RandomPool { pool, rng } => {
                let idx = rng.below(pool.len());
                &pool[idx].1
            }
        }
    }

    /// Every weight matrix the sequence can emit.
    pub fn support(&self) -> Vec<WeightMatrix> {
        match self {
            Self::Fixed(_, w) => vec![w.clone()],
            Self::Periodic(v) | Self::RandomPool { pool: v, .. } => {
                v.iter().map(|(_, w)| w.clone()).collect()
            }
        }
    }

    /// Whether every graph in the support is connected.
    pub fn all_connected(&self) -> bool {
        match self {
            Self::Fixed(g, _) => g.is_connected(),
            Self::Periodic(v) | Self::RandomPool { pool: v, .. } => {
                v.iter().all(|(g, _)| g.is_connected())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metropolis_two_nodes() {
        let w = metropolis_weights(&Graph::complete(2));
        assert_eq!(w.matrix().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn metropolis_path_of_three() {
        let w = metropolis_weights(&Graph::path(3));
        let third = 1.0 / 3.0;
        let expected = [
            2.0 * third,
            third,
            0.0,
            third,
            third,
            third,
            0.0,
            third,
            2.0 * third,
        ];
        for (a, b) in w.matrix().as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn metropolis_edgeless_is_identity() {
        let w = metropolis_weights(&Graph::empty(4));
        assert_eq!(w.matrix(), &DenseMatrix::identity(4));
    }

    #[test]
    fn a2_report_examples() {
        let id = validate_assumption_a2(&[WeightMatrix::identity(3)]).unwrap();
        assert!((id.rho - 1.0).abs() < 1e-9);
        assert!(!id.passes());
        assert_eq!(id.violation(), Some("A2.3"));

        let avg = WeightMatrix::new(DenseMatrix::from_fn(2, 2, |_, _| 0.5)).unwrap();
        let r = validate_assumption_a2(&[avg]).unwrap();
        assert!(r.rho.abs() < 1e-12);
        assert!(r.passes());

        let r = validate_assumption_a2(&[metropolis_weights(&Graph::path(5))]).unwrap();
        assert!(r.passes() && r.rho < 1.0);
        assert!(validate_assumption_a2(&[]).is_err());
    }

    #[test]
    fn weights_must_respect_topology() {
        let g = Graph::path(3);
        let m = DenseMatrix::from_fn(3, 3, |_, _| 1.0 / 3.0);
        assert!(WeightMatrix::with_graph(m, &g).is_err());
        assert!(WeightMatrix::with_graph(metropolis_weights(&g).matrix().clone(), &g).is_ok());
    }

    #[test]
    fn consensus_examples() {
        let vals = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        assert_eq!(
            consensus_average(&vals, &WeightMatrix::identity(2)).unwrap(),
            vals
        );
        let same = vec![vec![0.7, -0.1]; 3];
        let w = metropolis_weights(&Graph::path(3));
        for (out, inp) in consensus_average(&same, &w).unwrap().iter().zip(&same) {
            for (a, b) in out.iter().zip(inp) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let avg = WeightMatrix::new(DenseMatrix::from_fn(2, 2, |_, _| 0.5)).unwrap();
        assert_eq!(
            consensus_average(&[vec![0.0], vec![2.0]], &avg).unwrap(),
            vec![vec![1.0], vec![1.0]]
        );
        assert!(consensus_average(&[vec![0.0], vec![2.0, 1.0]], &avg).is_err());
    }

    #[test]
    fn global_ratio_examples() {
        let w = metropolis_weights(&Graph::complete(2));
        let r = global_ratio(&[0.5, 2.0], InnerLoop::Exact, &w).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-15));
        for mode in [InnerLoop::Exact, InnerLoop::Truncated(3), InnerLoop::Local] {
            let r = global_ratio(&[1.0, 1.0, 1.0], mode, &WeightMatrix::identity(3)).unwrap();
            assert!(r.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        }
        assert!(matches!(
            global_ratio(&[1.0, 0.0], InnerLoop::Exact, &w),
            Err(Error::NonPositiveRatio(_))
        ));
        let local = global_ratio(&[1.5, 0.5], InnerLoop::Local, &w).unwrap();
        assert!((local[0] - 2.25).abs() < 1e-12 && (local[1] - 0.25).abs() < 1e-12);
        assert_eq!(
            global_ratio(&[1.5, 0.5], InnerLoop::Truncated(0), &w).unwrap(),
            local
        );
    }

    #[test]
    fn truncated_error_shrinks_with_rounds() {
        let ratios = [0.3, 1.7, 0.9, 1.2, 0.6];
        let exact: f64 = ratios.iter().product();
        let w = metropolis_weights(&Graph::path(5));
        let max_err = |k| {
            global_ratio(&ratios, InnerLoop::Truncated(k), &w)
                .unwrap()
                .iter()
                .map(|r| ((r - exact) / exact).abs())
                .fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [0, 1, 2, 4, 8, 16, 32, 64, 128]
            .iter()
            .map(|&k| max_err(k))
            .collect();
        for pair in errs.windows(2) {
            assert!(pair[1] <= pair[0], "{errs:?}");
        }
        assert!(errs.last().unwrap() < &1e-6);
    }

    #[test]
    fn disagreement_examples() {
        assert_eq!(
            disagreement_norm(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(),
            0.0
        );
        assert!((disagreement_norm(&[vec![1.0], vec![-1.0]]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let v = vec![vec![0.3, 1.0], vec![-2.0, 0.1], vec![4.0, 4.0]];
        let base = disagreement_norm(&v).unwrap();
        let scaled: Vec<Vec<f64>> = v
            .iter()
            .map(|x| x.iter().map(|y| -3.0 * y).collect())
            .collect();
        assert!((disagreement_norm(&scaled).unwrap() - 3.0 * base).abs() < 1e-12);
        assert!(disagreement_norm(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn edge_list_roundtrip() {
        let mut rng = SimRng::new(4, "graph");
        let g = Graph::random_connected(7, 0.2, &mut rng);
        assert!(g.is_connected());
        let text = g.to_edge_list();
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(Graph::from_edge_list("nodes 2\n0 0\n").is_err());
        assert!(Graph::from_edge_list("nodes 2\n0 5\n").is_err());
        assert!(Graph::from_edge_list("0 1\n").is_err());
        let g = Graph::from_edge_list("# ring\nnodes 3\n0 1 # first\n1 2\n\n2 0\n").unwrap();
        assert_eq!(g, Graph::ring(3));
    }

    #[test]
    fn inner_loop_parsing() {
        assert_eq!("exact".parse::<InnerLoop>().unwrap(), InnerLoop::Exact);
        assert_eq!("local".parse::<InnerLoop>().unwrap(), InnerLoop::Local);
        assert_eq!("3".parse::<InnerLoop>().unwrap(), InnerLoop::Truncated(3));
        assert_eq!(
            "truncated(5)".parse::<InnerLoop>().unwrap(),
            InnerLoop::Truncated(5)
        );
        assert!("sometimes".parse::<InnerLoop>().is_err());
    }
}
