//! Time-varying communication graphs.
//!
//! Weight matrices are built with the Metropolis rule on undirected graphs,
//! which makes them doubly stochastic by construction. A [`GraphSequence`] is
//! cycled round-robin over the horizon; `A(t)` for `t ≥ 1` is entry
//! `(t - 1) mod len`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row and column sums of a doubly stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    size: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self { size, data }
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    context: "square matrix row",
                    expected: size,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let n = self.size;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        DenseMatrix { size: n, data: out }
    }

    /// Largest `|row sum - 1|` and `|column sum - 1|`.
    pub fn stochastic_residuals(&self) -> (f64, f64) {
        let n = self.size;
        let mut row_res: f64 = 0.0;
        let mut col_res: f64 = 0.0;
        for i in 0..n {
            let r: f64 = self.row(i).iter().sum();
            let c: f64 = (0..n).map(|k| self.get(k, i)).sum();
            row_res = row_res.max((r - 1.0).abs());
            col_res = col_res.max((c - 1.0).abs());
        }
        (row_res, col_res)
    }

    /// `max_{i,j} |m_ij - 1/N|`
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.size as f64;
        self.data.iter().map(|v| (v - u).abs()).fold(0.0, f64::max)
    }
}

/// Doubly stochastic weight matrix `A(t)` with positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    matrix: DenseMatrix,
    min_positive: f64,
}

impl WeightMatrix {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        let n = matrix.size();
        if n == 0 {
            return Err(Error::InvalidGraph("empty weight matrix".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = matrix.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidGraph(format!(
                        "weight a[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
            }
            if matrix.get(i, i) <= 0.0 {
                return Err(Error::InvalidGraph(format!("node {i} has no self-weight")));
            }
        }
        let (r, c) = matrix.stochastic_residuals();
        if r > STOCHASTIC_TOL || c > STOCHASTIC_TOL {
            return Err(Error::InvalidGraph(format!(
                "not doubly stochastic (row residual {r:e}, column residual {c:e})"
            )));
        }
        let min_positive = matrix
            .data
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            matrix,
            min_positive,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn size(&self) -> usize {
        self.matrix.size()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Smallest positive entry (the `a` of the mixing bound).
    pub fn min_positive(&self) -> f64 {
        self.min_positive
    }

    /// `Σ_j a_ij v_j` for every `i`, reading only the given vectors.
    pub fn mix(&self, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.size();
        let len = values.first().map_or(0, |v| v.len());
        (0..n)
            .map(|i| {
                let mut acc = vec![0.0; len];
                for (j, v) in values.iter().enumerate() {
                    let w = self.get(i, j);
                    if w != 0.0 {
                        crate::vecops::axpy(w, v, &mut acc);
                    }
                }
                acc
            })
            .collect()
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Directed edges `j → i` (i ≠ j) carried by positive weights `a_ij`.
    fn edge_mask(&self) -> Vec<bool> {
        let n = self.size();
        let mut m = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = i == j || self.get(i, j) > 0.0;
            }
        }
        m
    }
}

/// Symmetric 0/1 adjacency with self-loops, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    size: usize,
    bits: Vec<bool>,
}

impl Adjacency {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let size = rows.len();
        let mut bits = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    context: "adjacency row",
                    expected: size,
                    got: row.len(),
                });
            }
            for &v in row {
                match v {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    other => {
                        return Err(Error::InvalidGraph(format!(
                            "adjacency entries must be 0 or 1, got {other}"
                        )))
                    }
                }
            }
        }
        Ok(Self { size, bits })
    }

    /// Undirected graph on `size` nodes from an edge list; self-loops added.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut bits = vec![false; size * size];
        for i in 0..size {
            bits[i * size + i] = true;
        }
        for &(a, b) in edges {
            if a >= size || b >= size {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{size}"
                )));
            }
            bits[a * size + b] = true;
            bits[b * size + a] = true;
        }
        Ok(Self { size, bits })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn has(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.size + j]
    }

    fn degree(&self, i: usize) -> usize {
        (0..self.size).filter(|&j| j != i && self.has(i, j)).count()
    }
}

/// Metropolis weights `a_ij = 1 / (1 + max(deg_i, deg_j))` on edges,
/// `a_ii = 1 - Σ_{j≠i} a_ij`.
pub fn metropolis_weights(adjacency: &Adjacency) -> Result<WeightMatrix> {
    let n = adjacency.size();
    if n == 0 {
        return Err(Error::InvalidGraph("empty adjacency".into()));
    }
    for i in 0..n {
        if !adjacency.has(i, i) {
            return Err(Error::InvalidGraph(format!("node {i} is missing its self-loop")));
        }
        for j in 0..i {
            if adjacency.has(i, j) != adjacency.has(j, i) {
                return Err(Error::InvalidGraph(format!(
                    "adjacency is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let deg: Vec<usize> = (0..n).map(|i| adjacency.degree(i)).collect();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j && adjacency.has(i, j) {
                let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
                rows[i][j] = w;
                off += w;
            }
        }
        rows[i][i] = 1.0 - off;
    }
    WeightMatrix::from_rows(&rows)
}

/// Named topologies addressable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphPreset {
    Complete,
    Ring,
    Star,
    /// Ring, star, and a perfect-as-possible matching, cycled round-robin.
    /// No single step needs to be connected; every window of three is.
    Switching3,
}

impl GraphPreset {
    pub fn name(&self) -> &'static str {
        match self {
            GraphPreset::Complete => "complete",
            GraphPreset::Ring => "ring",
            GraphPreset::Star => "star",
            GraphPreset::Switching3 => "switching3",
        }
    }

    pub fn default_b(&self) -> usize {
        match self {
            GraphPreset::Switching3 => 3,
            _ => 1,
        }
    }

    /// Undirected edge lists of the preset on `n` nodes, one per step.
    pub fn edge_lists(&self, n: usize) -> Vec<Vec<(usize, usize)>> {
        let complete = || {
            let mut e = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    e.push((i, j));
                }
            }
            e
        };
        let ring = || match n {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        let star = || (1..n).map(|i| (0, i)).collect::<Vec<_>>();
        let matching = || (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect::<Vec<_>>();
        match self {
            GraphPreset::Complete => vec![complete()],
            GraphPreset::Ring => vec![ring()],
            GraphPreset::Star => vec![star()],
            GraphPreset::Switching3 => vec![ring(), star(), matching()],
        }
    }

    pub fn build(&self, n: usize) -> Result<GraphSequence> {
        GraphSequence::from_edge_lists(n, &self.edge_lists(n), self.default_b())
    }
}

impl fmt::Display for GraphPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(GraphPreset::Complete),
            "ring" => Ok(GraphPreset::Ring),
            "star" => Ok(GraphPreset::Star),
            "switching3" => Ok(GraphPreset::Switching3),
            other => Err(Error::Config(format!(
                "unknown graph preset {other:?} (expected complete, ring, star or switching3)"
            ))),
        }
    }
}

/// Weight matrices `A(1), A(2), …`, cyclically extended, with declared `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSequence {
    matrices: Vec<WeightMatrix>,
    b: usize,
}

impl GraphSequence {
    pub fn new(matrices: Vec<WeightMatrix>, b: usize) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidGraph("empty graph sequence".into()))?;
        if b == 0 {
            return Err(Error::InvalidGraph("B must be at least 1".into()));
        }
        let n = first.size();
        if let Some(m) = matrices.iter().find(|m| m.size() != n) {
            return Err(Error::DimensionMismatch {
                context: "graph sequence node count",
                expected: n,
                got: m.size(),
            });
        }
        Ok(Self { matrices, b })
    }

    pub fn from_edge_lists(n: usize, lists: &[Vec<(usize, usize)>], b: usize) -> Result<Self> {
        let matrices = lists
            .iter()
            .map(|edges| metropolis_weights(&Adjacency::from_edges(n, edges)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrices, b)
    }

    pub fn with_b(mut self, b: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidGraph("B must be at least 1".into()));
        }
        self.b = b;
        Ok(self)
    }

    pub fn nodes(&self) -> usize {
        self.matrices[0].size()
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[WeightMatrix] {
        &self.matrices
    }

    /// `A(t)` for `t ≥ 1`.
    pub fn at(&self, t: usize) -> &WeightMatrix {
        debug_assert!(t >= 1);
        &self.matrices[(t.max(1) - 1) % self.matrices.len()]
    }

    /// Smallest positive weight over the whole cycle.
    pub fn min_positive_weight(&self) -> f64 {
        self.matrices
            .iter()
            .map(WeightMatrix::min_positive)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCheck {
    /// First step of the window (1-based, within one cycle).
    pub start: usize,
    pub strongly_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub max_row_residual: f64,
    pub max_col_residual: f64,
    pub stochastic_ok: bool,
    pub windows: Vec<WindowCheck>,
    pub connectivity_ok: bool,
    pub passed: bool,
}

impl SequenceReport {
    pub fn failure_summary(&self) -> Option<String> {
        if self.passed {
            return None;
        }
        let mut parts = Vec::new();
        if !self.stochastic_ok {
            parts.push(format!(
                "not doubly stochastic (row residual {:e}, column residual {:e})",
                self.max_row_residual, self.max_col_residual
            ));
        }
        let bad: Vec<String> = self
            .windows
            .iter()
            .filter(|w| !w.strongly_connected)
            .map(|w| w.start.to_string())
            .collect();
        if !bad.is_empty() {
            parts.push(format!(
                "union graph not strongly connected for windows starting at t = {}",
                bad.join(", ")
            ));
        }
        Some(parts.join("; "))
    }
}

/// Strong connectivity of a directed graph given as a reflexive edge mask,
/// by Warshall transitive closure.
fn strongly_connected(n: usize, mut reach: Vec<bool>) -> bool {
    for k in 0..n {
        for i in 0..n {
            if reach[i * n + k] {
                for j in 0..n {
                    if reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
    }
    reach.iter().all(|&r| r)
}

/// Checks double stochasticity and `B`-strong connectivity of every window
/// of `B` consecutive steps of the cyclic sequence.
pub fn validate_sequence(seq: &GraphSequence) -> SequenceReport {
    let n = seq.nodes();
    let (mut max_row, mut max_col) = (0.0f64, 0.0f64);
    for m in seq.matrices() {
        let (r, c) = m.matrix().stochastic_residuals();
        max_row = max_row.max(r);
        max_col = max_col.max(c);
    }
    let stochastic_ok = max_row <= STOCHASTIC_TOL && max_col <= STOCHASTIC_TOL;

    let masks: Vec<Vec<bool>> = seq.matrices().iter().map(WeightMatrix::edge_mask).collect();
    let windows: Vec<WindowCheck> = (0..seq.len())
        .map(|start| {
            let mut union = vec![false; n * n];
            for k in 0..seq.b() {
                let mask = &masks[(start + k) % seq.len()];
                for (u, m) in union.iter_mut().zip(mask) {
                    *u |= *m;
                }
            }
            WindowCheck {
                start: start + 1,
                strongly_connected: strongly_connected(n, union),
            }
        })
        .collect();
    let connectivity_ok = windows.iter().all(|w| w.strongly_connected);
    SequenceReport {
        max_row_residual: max_row,
        max_col_residual: max_col,
        stochastic_ok,
        windows,
        connectivity_ok,
        passed: stochastic_ok && connectivity_ok,
    }
}

/// `Φ(t, s) = A(t-1) ⋯ A(s)`, with `Φ(t, t) = I`.
pub fn transition_matrix(seq: &GraphSequence, t: usize, s: usize) -> Result<DenseMatrix> {
    if s == 0 || t < s {
        return Err(Error::OutOfRange {
            what: "transition indices",
            value: format!("(t={t}, s={s})"),
            range: "t ≥ s ≥ 1".into(),
        });
    }
    let mut phi = DenseMatrix::identity(seq.nodes());
    for k in s..t {
        phi = seq.at(k).matrix().matmul(&phi);
    }
    Ok(phi)
}

/// Geometric mixing constants `Ĉ`, `τ` with
/// `|[Φ(t,s)]_ij - 1/N| ≤ Ĉ τ^{t-s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConstants {
    pub c_hat: f64,
    pub tau: f64,
    /// Minimum positive weight over the sequence.
    pub a: f64,
    pub b: usize,
    pub n: usize,
}

impl MixingConstants {
    pub fn bound(&self, steps: usize) -> f64 {
        self.c_hat * self.tau.powi(steps as i32)
    }
}

pub fn mixing_bound(seq: &GraphSequence) -> Result<MixingConstants> {
    let report = validate_sequence(seq);
    if let Some(why) = report.failure_summary() {
        return Err(Error::InvalidGraph(why));
    }
    let n = seq.nodes();
    let b = seq.b();
    let a = seq.min_positive_weight();
    if n == 1 {
        // Φ is the 1×1 identity, which already equals 1/N.
        return Ok(MixingConstants {
            c_hat: 2.0,
            tau: 0.0,
            a,
            b,
            n,
        });
    }
    if a >= 1.0 {
        return Err(Error::InvalidGraph(
            "minimum positive weight must be below 1 for a connected multi-node graph".into(),
        ));
    }
    let k = ((n - 1) * b) as f64;
    let ak = a.powf(k);
    let c_hat = 2.0 * (1.0 + a.powf(-k)) / (1.0 + ak);
    // (1 - a^k)^{1/k}, evaluated without cancellation for tiny a^k
    let tau = ((-ak).ln_1p() / k).exp();
    Ok(MixingConstants { c_hat, tau, a, b, n })
}

/// Largest ratio `max_ij |Φ(t,s)_ij − 1/N| / (Ĉ τ^{t−s})` over
/// `1 ≤ s ≤ t ≤ horizon`; the bound holds iff the result is `≤ 1`.
pub fn mixing_bound_ratio(seq: &GraphSequence, constants: &MixingConstants, horizon: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 1..=horizon {
        let mut phi = DenseMatrix::identity(seq.nodes());
        for t in s..=horizon {
            if t > s {
                phi = seq.at(t - 1).matrix().matmul(&phi);
            }
            let dev = phi.max_deviation_from_uniform();
            let bound = constants.bound(t - s);
            let ratio = if bound > 0.0 {
                dev / bound
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_stochastic(m: &WeightMatrix) {
        let (r, c) = m.matrix().stochastic_residuals();
        assert!(r <= STOCHASTIC_TOL && c <= STOCHASTIC_TOL, "residuals {r} {c}");
    }

    #[test]
    fn metropolis_ring_of_three_is_uniform() {
        let w = metropolis_weights(&Adjacency::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(w.get(i, j), 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_two_node_path() {
        let w = metropolis_weights(&Adjacency::from_edges(2, &[(0, 1)]).unwrap()).unwrap();
        assert_eq!(w.matrix().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn metropolis_star_of_five() {
        let adj = Adjacency::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let w = metropolis_weights(&adj).unwrap();
        for leaf in 1..5 {
            assert_relative_eq!(w.get(0, leaf), 0.2, epsilon = 1e-15);
            assert_relative_eq!(w.get(leaf, 0), 0.2, epsilon = 1e-15);
            assert_relative_eq!(w.get(leaf, leaf), 0.8, epsilon = 1e-15);
        }
        assert_relative_eq!(w.get(0, 0), 0.2, epsilon = 1e-15);
        assert_stochastic(&w);
    }

    #[test]
    fn metropolis_rejects_asymmetric() {
        let adj = Adjacency::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        assert!(matches!(metropolis_weights(&adj), Err(Error::InvalidGraph(_))));
        let no_loop = Adjacency::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap();
        assert!(metropolis_weights(&no_loop).is_err());
    }

    #[test]
    fn complete_single_matrix_passes_with_b1() {
        let seq = GraphPreset::Complete.build(4).unwrap();
        assert!(validate_sequence(&seq).passed);
    }

    #[test]
    fn alternating_edges_need_b2() {
        let lists = vec![vec![(0, 1)], vec![(1, 2)]];
        let seq = GraphSequence::from_edge_lists(3, &lists, 1).unwrap();
        let rep = validate_sequence(&seq);
        assert!(!rep.passed);
        assert!(rep.windows.iter().all(|w| !w.strongly_connected));
        let seq = seq.with_b(2).unwrap();
        assert!(validate_sequence(&seq).passed);
    }

    #[test]
    fn switching3_requires_b3() {
        let seq = GraphPreset::Switching3.build(5).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(validate_sequence(&seq).passed);
        let single = seq.clone().with_b(1).unwrap();
        let rep = validate_sequence(&single);
        assert!(!rep.passed);
        // the matching step alone is disconnected
        assert!(!rep.windows[2].strongly_connected);
        for m in seq.matrices() {
            assert_stochastic(m);
        }
    }

    #[test]
    fn transition_identity_and_order() {
        let seq = GraphPreset::Switching3.build(5).unwrap();
        assert_eq!(transition_matrix(&seq, 3, 3).unwrap(), DenseMatrix::identity(5));
        let phi = transition_matrix(&seq, 4, 1).unwrap();
        let direct = seq
            .at(3)
            .matrix()
            .matmul(seq.at(2).matrix())
            .matmul(seq.at(1).matrix());
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(phi.get(i, j), direct.get(i, j), epsilon = 1e-15);
            }
        }
        let (r, c) = phi.stochastic_residuals();
        assert!(r < 1e-12 && c < 1e-12);
        assert!(transition_matrix(&seq, 1, 2).is_err());
    }

    #[test]
    fn transition_of_uniform_is_uniform() {
        let seq = GraphPreset::Complete.build(4).unwrap();
        let phi = transition_matrix(&seq, 7, 2).unwrap();
        assert!(phi.max_deviation_from_uniform() < 1e-15);
    }

    #[test]
    fn mixing_constants_two_nodes() {
        let seq = GraphPreset::Complete.build(2).unwrap();
        let mc = mixing_bound(&seq).unwrap();
        assert_relative_eq!(mc.a, 0.5);
        assert_relative_eq!(mc.tau, 0.5, epsilon = 1e-15);
        assert_relative_eq!(mc.c_hat, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn mixing_constants_ranges_for_small_a() {
        // 5 nodes, B = 3, a = 0.1: a custom sequence whose smallest weight is 0.1
        let mut rows = vec![vec![0.0; 5]; 5];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0.9;
            row[(i + 1) % 5] = 0.1;
        }
        // circulant 0.9 I + 0.1 P is doubly stochastic
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let seq = GraphSequence::new(vec![w], 3).unwrap();
        let mc = mixing_bound(&seq).unwrap();
        assert_relative_eq!(mc.a, 0.1);
        assert!(mc.c_hat.is_finite() && mc.c_hat > 1.0);
        assert!(mc.tau > 0.0 && mc.tau < 1.0);
    }

    #[test]
    fn mixing_bound_rejects_invalid_sequence() {
        let seq = GraphPreset::Switching3.build(5).unwrap().with_b(1).unwrap();
        assert!(matches!(mixing_bound(&seq), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn mixing_bound_holds_on_presets() {
        for preset in [GraphPreset::Complete, GraphPreset::Ring, GraphPreset::Star, GraphPreset::Switching3] {
            let seq = preset.build(5).unwrap();
            let mc = mixing_bound(&seq).unwrap();
            assert!(mixing_bound_ratio(&seq, &mc, 30) <= 1.0, "{preset}");
        }
    }

    #[test]
    fn weight_matrix_rejects_non_stochastic() {
        assert!(WeightMatrix::from_rows(&[vec![0.6, 0.5], vec![0.4, 0.5]]).is_err());
        assert!(WeightMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn preset_parsing() {
        assert_eq!("switching3".parse::<GraphPreset>().unwrap(), GraphPreset::Switching3);
        assert!("torus".parse::<GraphPreset>().is_err());
    }
}
