//! Nonnegative weighted digraphs and their combinatorial structure.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix};

/// Graphs up to this many vertices keep a dense weight table.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    /// 0/1 adjacency.
    Simple,
    /// Nonnegative integer edge multiplicities.
    MultiEdge,
    /// Arbitrary nonnegative reals.
    Weighted,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Simple => "simple",
            GraphKind::MultiEdge => "multi",
            GraphKind::Weighted => "weighted",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "simple" => Some(GraphKind::Simple),
            "multi" => Some(GraphKind::MultiEdge),
            "weighted" => Some(GraphKind::Weighted),
            _ => None,
        }
    }

    fn admits(self, w: f64) -> bool {
        match self {
            GraphKind::Simple => w == 0.0 || w == 1.0,
            GraphKind::MultiEdge => w.fract() == 0.0,
            GraphKind::Weighted => true,
        }
    }

    /// Narrowest kind admitting every weight.
    pub fn infer<'a>(weights: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut kind = GraphKind::Simple;
        for &w in weights {
            if kind == GraphKind::Simple && !GraphKind::Simple.admits(w) {
                kind = GraphKind::MultiEdge;
            }
            if kind == GraphKind::MultiEdge && !GraphKind::MultiEdge.admits(w) {
                return GraphKind::Weighted;
            }
        }
        kind
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

/// A square nonnegative weight matrix `M`, `M_ij` being the weight of `i → j`.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    kind: GraphKind,
    storage: Storage,
    csr: OnceLock<CsrMatrix>,
}

fn check_weight(kind: GraphKind, i: usize, j: usize, w: f64) -> Result<()> {
    if !w.is_finite() {
        return Err(Error::NonFiniteWeight { i, j });
    }
    if w < 0.0 {
        return Err(Error::NegativeWeight { i, j, w });
    }
    if !kind.admits(w) {
        return Err(Error::KindViolation { kind: kind.name(), i, j, w });
    }
    Ok(())
}

impl WeightedGraph {
    /// Builds from `(i, j, w)` triplets; repeated pairs add up.
    pub fn new(n: usize, kind: GraphKind, edges: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, w) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { i, j });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { i, j, w });
            }
        }
        Self::from_csr(kind, CsrMatrix::from_triplets(n, edges))
    }

    /// Like [`WeightedGraph::new`] with the narrowest admissible kind.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = {
            for &(i, j, w) in edges {
                for idx in [i, j] {
                    if idx >= n {
                        return Err(Error::IndexOutOfRange { index: idx, n });
                    }
                }
                check_weight(GraphKind::Weighted, i, j, w)?;
            }
            CsrMatrix::from_triplets(n, edges)
        };
        let kind = GraphKind::infer(&csr.values);
        Self::from_csr(kind, csr)
    }

    /// Undirected edges: each `(i, j, w)` is inserted in both directions,
    /// self-loops once.
    pub fn undirected(n: usize, kind: GraphKind, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut all = Vec::with_capacity(2 * edges.len());
        for &(i, j, w) in edges {
            all.push((i, j, w));
            if i != j {
                all.push((j, i, w));
            }
        }
        Self::new(n, kind, &all)
    }

    pub fn from_dense(kind: GraphKind, m: DenseMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        for i in 0..m.rows {
            for j in 0..m.cols {
                check_weight(kind, i, j, m.get(i, j))?;
            }
        }
        let n = m.rows;
        let storage = if n <= DENSE_LIMIT {
            Storage::Dense(m)
        } else {
            Storage::Sparse(CsrMatrix::from_dense(&m))
        };
        Ok(WeightedGraph { n, kind, storage, csr: OnceLock::new() })
    }

    pub fn from_csr(kind: GraphKind, m: CsrMatrix) -> Result<Self> {
        for i in 0..m.n {
            for (j, w) in m.row(i) {
                check_weight(kind, i, j, w)?;
            }
        }
        let n = m.n;
        let storage = if n <= DENSE_LIMIT {
            let dense = m.to_dense();
            let g = WeightedGraph { n, kind, storage: Storage::Dense(dense), csr: OnceLock::new() };
            let _ = g.csr.set(m);
            return Ok(g);
        } else {
            Storage::Sparse(m)
        };
        Ok(WeightedGraph { n, kind, storage, csr: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.get(i, j),
            Storage::Sparse(m) => m.get(i, j),
        }
    }

    /// Compressed-row view used by every iterative routine.
    pub fn csr(&self) -> &CsrMatrix {
        match &self.storage {
            Storage::Sparse(m) => m,
            Storage::Dense(m) => self.csr.get_or_init(|| CsrMatrix::from_dense(m)),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    /// Nonzero entries `(i, j, w)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let c = self.csr();
        (0..self.n).flat_map(|i| c.row(i).map(move |(j, w)| (i, j, w))).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.csr().nnz()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.csr().mul_vec(x)
    }

    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        self.csr().vec_mul(x)
    }

    pub fn is_symmetric(&self) -> bool {
        self.csr().is_symmetric()
    }

    pub fn transpose(&self) -> WeightedGraph {
        let t = self.csr().transpose();
        WeightedGraph::from_csr(self.kind, t).expect("transpose preserves validity")
    }

    /// Out-degrees `d_i = Σ_j M_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        self.csr().row_sums()
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.n).any(|i| self.weight(i, i) > 0.0)
    }
}

/// Strongly connected components; `labels[v]` is the component of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub labels: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Tarjan's algorithm, iterative so deep chains do not overflow the stack.
pub fn scc(graph: &WeightedGraph) -> Components {
    let n = graph.n();
    let csr = graph.csr();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut labels = vec![UNSEEN; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    // (vertex, next position in its row)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, csr.row_ptr[root]));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, pos)) = call.last() {
            if pos < csr.row_ptr[v + 1] {
                let w = csr.col_idx[pos];
                call.last_mut().unwrap().1 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, csr.row_ptr[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let id = members.len();
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        labels[w] = id;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    members.push(comp);
                }
            }
        }
    }
    Components { labels, members }
}

pub fn is_strongly_connected(graph: &WeightedGraph) -> bool {
    graph.n() > 0 && scc(graph).count() == 1
}

/// Period of an irreducible graph and its cyclic classes.
///
/// Edges only ever go from class `c` to class `(c + 1) % period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub period: usize,
    pub classes: Vec<usize>,
}

impl Period {
    pub fn class_members(&self, c: usize) -> Vec<usize> {
        (0..self.classes.len()).filter(|&v| self.classes[v] == c).collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn period(graph: &WeightedGraph) -> Result<Period> {
    let comps = scc(graph);
    if comps.count() != 1 {
        return Err(Error::NotStronglyConnected { components: comps.count() });
    }
    let n = graph.n();
    let csr = graph.csr();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for (w, _) in csr.row(v) {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let mut g = 0usize;
    for v in 0..n {
        for (w, _) in csr.row(v) {
            let d = (level[v] + 1).abs_diff(level[w]);
            g = gcd(g, d);
        }
    }
    let p = g.max(1);
    Ok(Period { period: p, classes: level.iter().map(|l| l % p).collect() })
}

#[derive(Debug, Clone)]
pub struct MatrixPower {
    pub matrix: DenseMatrix,
    /// Some entry overflowed and was clamped to `f64::MAX`.
    pub saturated: bool,
}

/// `M^l` by repeated squaring.
pub fn matrix_power(graph: &WeightedGraph, l: usize) -> Result<MatrixPower> {
    let n = graph.n();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { size: n, limit: DENSE_LIMIT });
    }
    let (matrix, saturated) = dense_power(&graph.to_dense(), l);
    Ok(MatrixPower { matrix, saturated })
}

pub(crate) fn dense_power(base: &DenseMatrix, l: usize) -> (DenseMatrix, bool) {
    let mut result = DenseMatrix::identity(base.rows);
    let mut sq = base.clone();
    let mut e = l;
    let mut saturated = false;
    let clamp = |m: &mut DenseMatrix, flag: &mut bool| {
        for v in m.data.iter_mut() {
            if !v.is_finite() {
                *v = f64::MAX;
                *flag = true;
            }
        }
    };
    while e > 0 {
        if e & 1 == 1 {
            result = result.mul(&sq);
            clamp(&mut result, &mut saturated);
        }
        e >>= 1;
        if e > 0 {
            sq = sq.mul(&sq);
            clamp(&mut sq, &mut saturated);
        }
    }
    (result, saturated)
}

/// Replaces every edge `i → j` whose traversal takes `τ_ij > 1` steps by a chain
/// through `τ_ij − 1` fresh vertices. The chain's first edge keeps the weight,
/// the rest carry 1. Original vertices keep their indices; auxiliaries follow.
pub fn expand_transition_times(
    graph: &WeightedGraph,
    tau: impl Fn(usize, usize) -> usize,
) -> Result<WeightedGraph> {
    let mut next = graph.n();
    let mut edges = Vec::new();
    for (i, j, w) in graph.edges() {
        let t = tau(i, j);
        if t == 0 {
            return Err(Error::InvalidParameter(format!("transition time of ({i}, {j}) is zero")));
        }
        let mut from = i;
        let mut weight = w;
        for _ in 1..t {
            edges.push((from, next, weight));
            from = next;
            next += 1;
            weight = 1.0;
        }
        edges.push((from, j, weight));
    }
    WeightedGraph::new(next, graph.kind(), &edges)
}
