#![allow(dead_code)]

use merw::{GraphKind, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weight(rng: &mut ChaCha8Rng, kind: GraphKind) -> f64 {
    match kind {
        GraphKind::Simple => 1.0,
        GraphKind::MultiEdge => rng.random_range(1..=3) as f64,
        GraphKind::Weighted => rng.random_range(0.2..3.0),
    }
}

pub fn kind_for(seed: u64) -> GraphKind {
    [GraphKind::Simple, GraphKind::MultiEdge, GraphKind::Weighted][(seed % 3) as usize]
}

/// Strongly connected digraph: a random Hamiltonian cycle plus extra arcs.
pub fn random_digraph(seed: u64, n: usize, extra: usize, kind: GraphKind) -> WeightedGraph {
    let mut r = rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for k in 0..n {
        edges.push((perm[k], perm[(k + 1) % n], weight(&mut r, kind)));
    }
    for _ in 0..extra {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        if !edges.iter().any(|&(a, b, _)| a == i && b == j) {
            edges.push((i, j, weight(&mut r, kind)));
        }
    }
    WeightedGraph::new(n, kind, &edges).unwrap()
}

/// Connected undirected graph: a random spanning tree plus extra edges.
pub fn random_symmetric(seed: u64, n: usize, extra: usize, kind: GraphKind) -> WeightedGraph {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for v in 1..n {
        let u = r.random_range(0..v);
        edges.push((u, v, weight(&mut r, kind)));
    }
    for _ in 0..extra {
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        let (a, b) = (i.min(j), i.max(j));
        if !edges.iter().any(|&(x, y, _)| x == a && y == b) {
            edges.push((a, b, weight(&mut r, kind)));
        }
    }
    WeightedGraph::undirected(n, kind, &edges).unwrap()
}

pub fn path_graph(n: usize) -> WeightedGraph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::undirected(n, GraphKind::Simple, &edges).unwrap()
}

pub fn complete_graph(n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, 1.0));
        }
    }
    WeightedGraph::undirected(n, GraphKind::Simple, &edges).unwrap()
}

/// Path 0-1-2 with a self-loop on 2.
pub fn chain_with_loop() -> WeightedGraph {
    WeightedGraph::undirected(3, GraphKind::Simple, &[(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)]).unwrap()
}

/// Largest real eigenvalue part by an independent dense solver (nalgebra):
/// symmetric QL for symmetric input, bounded Schur iteration otherwise.
pub fn reference_spectral_radius(g: &WeightedGraph) -> Option<f64> {
    let d = g.to_dense();
    let m = nalgebra::DMatrix::from_row_slice(d.rows, d.cols, &d.data);
    if g.is_symmetric() {
        return Some(m.symmetric_eigenvalues().max());
    }
    let schur = m.try_schur(1e-14, 100_000)?;
    Some(schur.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}
