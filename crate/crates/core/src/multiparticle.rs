//! Configuration spaces of several particles on one base graph.
//!
//! Distinguishable particles live on `V^N` with mixed-radix indexing.
//! Indistinguishable ones use sorted tuples or occupation vectors; the
//! latter are ranked colexicographically with a bounded-composition table.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{GraphKind, WeightedGraph};
use crate::matrix::{norm2, CsrMatrix, DenseMatrix};
use crate::spectral::{dominant_eigenpair, EigenOptions};

/// Largest configuration space any builder will enumerate.
pub const CONFIG_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopRule {
    /// Every particle follows a base edge simultaneously.
    Product,
    /// Exactly one particle follows a base edge, the rest stay put.
    SingleHop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Basis {
    /// Ordered position tuples, one per particle.
    Positions { particles: usize },
    /// Sorted position tuples standing for their permutation orbits.
    SortedPositions { particles: usize },
    /// Per-node occupation counts.
    Occupations { n_max: usize, particles: Vec<usize> },
}

/// A graph whose vertices are many-particle configurations.
#[derive(Debug, Clone)]
pub struct ConfigGraph {
    pub graph: WeightedGraph,
    pub base_n: usize,
    pub basis: Basis,
    /// Position tuples or occupation vectors, indexed like `graph`.
    pub configs: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl ConfigGraph {
    fn assemble(graph: WeightedGraph, base_n: usize, basis: Basis, configs: Vec<Vec<usize>>) -> Self {
        let index = configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        ConfigGraph { graph, base_n, basis, configs, index }
    }

    /// Wraps an arbitrary matrix on `V^N` in mixed-radix order.
    pub fn from_tuples(graph: WeightedGraph, base_n: usize, particles: usize) -> Result<Self> {
        let total = checked_power(base_n, particles)?;
        if graph.n() != total {
            return Err(Error::DimensionMismatch { expected: total, got: graph.n() });
        }
        let configs = (0..total).map(|r| tuple_unrank(r, base_n, particles)).collect();
        Ok(Self::assemble(graph, base_n, Basis::Positions { particles }, configs))
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn index_of(&self, config: &[usize]) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Number of ordered tuples a configuration stands for.
    pub fn multiplicity(&self, i: usize) -> usize {
        match self.basis {
            Basis::Positions { .. } => 1,
            Basis::SortedPositions { .. } => orbit_size(&self.configs[i]),
            Basis::Occupations { .. } => {
                let occ = &self.configs[i];
                factorial(occ.iter().sum()) / occ.iter().map(|&k| factorial(k)).product::<usize>()
            }
        }
    }

    /// One-particle density `π(x)` from a configuration density. Tuple bases
    /// report the marginal of `particle`; orbit bases spread each orbit's
    /// mass evenly over its members, so every particle sees the same field.
    pub fn marginal(&self, pi: &[f64], particle: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.base_n];
        match &self.basis {
            Basis::Positions { .. } => {
                for (c, p) in self.configs.iter().zip(pi) {
                    out[c[particle]] += p;
                }
            }
            Basis::SortedPositions { particles } => {
                for (c, p) in self.configs.iter().zip(pi) {
                    for &x in c {
                        out[x] += p / *particles as f64;
                    }
                }
            }
            Basis::Occupations { .. } => {
                for (c, p) in self.configs.iter().zip(pi) {
                    let n: usize = c.iter().sum();
                    if n > 0 {
                        for (x, &k) in c.iter().enumerate() {
                            out[x] += p * k as f64 / n as f64;
                        }
                    }
                }
            }
        }
        out
    }

    /// Expands an orbit density to the distinguishable joint density.
    pub fn unfold_density(&self, pi: &[f64]) -> Result<Vec<f64>> {
        let Basis::SortedPositions { particles } = self.basis else {
            return Err(Error::InvalidParameter("only sorted-position bases unfold".into()));
        };
        let total = checked_power(self.base_n, particles)?;
        let mut out = vec![0.0; total];
        for (i, c) in self.configs.iter().enumerate() {
            let share = pi[i] / self.multiplicity(i) as f64;
            for perm in distinct_permutations(c) {
                out[tuple_rank(&perm, self.base_n)] = share;
            }
        }
        Ok(out)
    }
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

fn orbit_size(sorted: &[usize]) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &x in sorted {
        *counts.entry(x).or_default() += 1;
    }
    factorial(sorted.len()) / counts.values().map(|&k| factorial(k)).product::<usize>()
}

fn checked_power(n: usize, k: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..k {
        total = total.checked_mul(n).filter(|&t| t <= CONFIG_LIMIT).ok_or(Error::TooLarge {
            size: n.saturating_pow(k as u32),
            limit: CONFIG_LIMIT,
        })?;
    }
    Ok(total)
}

fn tuple_rank(c: &[usize], n: usize) -> usize {
    c.iter().rev().fold(0, |acc, &x| acc * n + x)
}

fn tuple_unrank(mut r: usize, n: usize, particles: usize) -> Vec<usize> {
    (0..particles)
        .map(|_| {
            let x = r % n;
            r /= n;
            x
        })
        .collect()
}

fn distinct_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = sorted.to_vec();
    cur.sort_unstable();
    let mut out = vec![cur.clone()];
    // Lexicographic successor until exhausted.
    loop {
        let Some(i) = (0..cur.len().saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..cur.len()).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Node potential `V` and symmetric pair potential `V⁰_I` on the base graph.
#[derive(Debug, Clone, Default)]
pub struct PairPotentials {
    pub node: Option<Vec<f64>>,
    pub pair: Option<DenseMatrix>,
}

impl PairPotentials {
    fn check(&self, n: usize) -> Result<()> {
        if let Some(v) = &self.node {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if let Some(p) = &self.pair {
            if p.rows != n || p.cols != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.rows });
            }
            if p.max_abs_diff(&p.transpose()) > 0.0 {
                return Err(Error::NotSymmetric);
            }
        }
        Ok(())
    }

    fn node_sum(&self, c: &[usize]) -> f64 {
        self.node.as_ref().map_or(0.0, |v| c.iter().map(|&x| v[x]).sum())
    }

    fn pair_sum(&self, c: &[usize]) -> f64 {
        let Some(p) = &self.pair else { return 0.0 };
        let mut s = 0.0;
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                s += p.get(c[a], c[b]);
            }
        }
        s
    }

    /// `(ΣV(x_k) + ΣV(y_k))/2 + (V⁰_I(x) + V⁰_I(y))/2`.
    fn transition(&self, x: &[usize], y: &[usize]) -> f64 {
        0.5 * (self.node_sum(x) + self.node_sum(y)) + 0.5 * (self.pair_sum(x) + self.pair_sum(y))
    }
}

/// `N` distinguishable particles with Boltzmann transition weights
/// `Π M_{x_k y_k} · exp(−β(V̄ + V̄_I))`.
pub fn build_distinguishable(
    base: &WeightedGraph,
    particles: usize,
    potentials: &PairPotentials,
    beta: f64,
    rule: HopRule,
) -> Result<ConfigGraph> {
    if particles == 0 {
        return Err(Error::InvalidParameter("at least one particle".into()));
    }
    let n = base.n();
    potentials.check(n)?;
    let total = checked_power(n, particles)?;
    let csr = base.csr();

    let rows: Vec<Vec<(usize, usize, f64)>> = (0..total)
        .into_par_iter()
        .map(|r| {
            let x = tuple_unrank(r, n, particles);
            let mut out = Vec::new();
            let mut push = |y: &[usize], w: f64| {
                let e = (-beta * potentials.transition(&x, y)).exp();
                out.push((r, tuple_rank(y, n), w * e));
            };
            match rule {
                HopRule::Product => {
                    let mut y = x.clone();
                    // Depth-first over per-particle out-edges.
                    fn walk(
                        k: usize,
                        w: f64,
                        x: &[usize],
                        y: &mut Vec<usize>,
                        csr: &CsrMatrix,
                        push: &mut dyn FnMut(&[usize], f64),
                    ) {
                        if k == x.len() {
                            push(y, w);
                            return;
                        }
                        for (j, a) in csr.row(x[k]) {
                            y[k] = j;
                            walk(k + 1, w * a, x, y, csr, push);
                        }
                    }
                    walk(0, 1.0, &x, &mut y, csr, &mut push);
                }
                HopRule::SingleHop => {
                    let mut stay = 0.0;
                    for k in 0..particles {
                        for (j, a) in csr.row(x[k]) {
                            if j == x[k] {
                                stay += a;
                            } else {
                                let mut y = x.clone();
                                y[k] = j;
                                push(&y, a);
                            }
                        }
                    }
                    if stay > 0.0 {
                        push(&x, stay);
                    }
                }
            }
            out
        })
        .collect();
    let edges: Vec<_> = rows.into_iter().flatten().collect();
    let graph = WeightedGraph::new(total, GraphKind::Weighted, &edges)?;
    let configs = (0..total).map(|r| tuple_unrank(r, n, particles)).collect();
    Ok(ConfigGraph::assemble(graph, n, Basis::Positions { particles }, configs))
}

/// Quotient by particle exchange: sorted tuples, with the weights of all
/// edges into one orbit added onto the edge into its sorted member.
pub fn reduce_indistinguishable(config: &ConfigGraph) -> Result<ConfigGraph> {
    let Basis::Positions { particles } = config.basis else {
        return Err(Error::InvalidParameter("reduction needs an ordered-tuple basis".into()));
    };
    let n = config.base_n;
    let csr = config.graph.csr();
    // Exchange symmetry: M_{σx,σy} = M_{x,y} for the generating swaps.
    for r in 0..config.len() {
        let x = &config.configs[r];
        for (c, w) in csr.row(r) {
            let y = &config.configs[c];
            for k in 0..particles.saturating_sub(1) {
                let mut sx = x.clone();
                let mut sy = y.clone();
                sx.swap(k, k + 1);
                sy.swap(k, k + 1);
                let v = csr.get(tuple_rank(&sx, n), tuple_rank(&sy, n));
                if (v - w).abs() > 1e-12 * w.abs().max(v.abs()) {
                    return Err(Error::NotExchangeSymmetric);
                }
            }
        }
    }
    let sorted: Vec<Vec<usize>> = config.configs.iter().filter(|c| c.windows(2).all(|p| p[0] <= p[1])).cloned().collect();
    let index: HashMap<&[usize], usize> = sorted.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    let mut edges = Vec::new();
    for (i, x) in sorted.iter().enumerate() {
        let r = tuple_rank(x, n);
        for (c, w) in csr.row(r) {
            let mut y = config.configs[c].clone();
            y.sort_unstable();
            edges.push((i, index[y.as_slice()], w));
        }
    }
    let graph = WeightedGraph::new(sorted.len(), GraphKind::Weighted, &edges)?;
    Ok(ConfigGraph::assemble(graph, n, Basis::SortedPositions { particles }, sorted))
}

/// Normalized stationary density `φψ` of a configuration graph.
pub fn stationary_density(config: &ConfigGraph) -> Result<Vec<f64>> {
    let pair = dominant_eigenpair(&config.graph, &EigenOptions::default())?;
    let pi = pair.stationary();
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|p| p / total).collect())
}

/// Truncated single-mode ladder operators on `|0⟩ … |n_max⟩`.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub a: DenseMatrix,
    pub a_dagger: DenseMatrix,
}

impl Ladder {
    pub fn number(&self) -> DenseMatrix {
        self.a_dagger.mul(&self.a)
    }

    /// `a a† − a† a`; equals the identity except at `|n_max⟩`.
    pub fn commutator(&self) -> DenseMatrix {
        let ab = self.a.mul(&self.a_dagger);
        let ba = self.a_dagger.mul(&self.a);
        DenseMatrix::from_fn(ab.rows, ab.cols, |i, j| ab.get(i, j) - ba.get(i, j))
    }
}

/// `a[n−1, n] = √n`, `a†[n, n−1] = √n`.
pub fn ladder_ops(n_max: usize) -> Result<Ladder> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let a = DenseMatrix::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let a_dagger = a.transpose();
    Ok(Ladder { a, a_dagger })
}

/// Occupation vectors with entries in `0..=n_max` over a set of particle
/// numbers, sector by sector, colexicographic inside each sector.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub sites: usize,
    pub n_max: usize,
    pub sectors: Vec<usize>,
    /// `offsets[s]` is the first index of sector `sectors[s]`.
    pub offsets: Vec<usize>,
    /// `count[k][s]`: vectors of length `k` summing to `s`.
    count: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(sites: usize, n_max: usize, sectors: &[usize]) -> Result<Self> {
        if sites == 0 || n_max == 0 || sectors.is_empty() {
            return Err(Error::InvalidParameter("empty Fock basis".into()));
        }
        let mut sectors = sectors.to_vec();
        sectors.sort_unstable();
        sectors.dedup();
        let top = *sectors.last().unwrap();
        if top > sites * n_max {
            return Err(Error::InvalidParameter(format!("{top} particles exceed capacity {}", sites * n_max)));
        }
        let mut count = vec![vec![0usize; top + 1]; sites + 1];
        count[0][0] = 1;
        for k in 1..=sites {
            for s in 0..=top {
                let mut c: usize = 0;
                for v in 0..=n_max.min(s) {
                    c = c.saturating_add(count[k - 1][s - v]);
                }
                count[k][s] = c.min(usize::MAX / 2);
            }
        }
        let mut offsets = Vec::with_capacity(sectors.len() + 1);
        let mut total: usize = 0;
        for &s in &sectors {
            offsets.push(total);
            total = total.saturating_add(count[sites][s]);
            if total > CONFIG_LIMIT {
                return Err(Error::TooLarge { size: total, limit: CONFIG_LIMIT });
            }
        }
        offsets.push(total);
        Ok(FockBasis { sites, n_max, sectors, offsets, count })
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sector_range(&self, particles: usize) -> Option<std::ops::Range<usize>> {
        let s = self.sectors.iter().position(|&p| p == particles)?;
        Some(self.offsets[s]..self.offsets[s + 1])
    }

    pub fn rank(&self, occ: &[usize]) -> Option<usize> {
        if occ.len() != self.sites || occ.iter().any(|&k| k > self.n_max) {
            return None;
        }
        let total: usize = occ.iter().sum();
        let base = self.sector_range(total)?.start;
        let mut s = total;
        let mut r = 0;
        for k in (0..self.sites).rev() {
            for v in 0..occ[k] {
                r += self.count[k][s - v];
            }
            s -= occ[k];
        }
        Some(base + r)
    }

    pub fn unrank(&self, index: usize) -> Vec<usize> {
        let s_idx = self.offsets.partition_point(|&o| o <= index) - 1;
        let mut s = self.sectors[s_idx];
        let mut r = index - self.offsets[s_idx];
        let mut occ = vec![0; self.sites];
        for k in (0..self.sites).rev() {
            let mut v = 0;
            while r >= self.count[k][s - v] {
                r -= self.count[k][s - v];
                v += 1;
            }
            occ[k] = v;
            s -= v;
        }
        occ
    }
}

#[derive(Debug, Clone)]
pub struct BoseHubbardSpec {
    pub t_hop: f64,
    pub u: f64,
    pub potential: Option<Vec<f64>>,
    pub interaction: Option<DenseMatrix>,
    pub n_max: usize,
}

impl BoseHubbardSpec {
    pub fn new(t_hop: f64, u: f64, n_max: usize) -> Result<Self> {
        let s = BoseHubbardSpec { t_hop, u, potential: None, interaction: None, n_max };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_hop > 0.0) || !self.u.is_finite() {
            return Err(Error::InvalidParameter("t_hop must be positive and U finite".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(())
    }

    /// `(U/2)Σn_i(n_i−1) + ΣV(i)n_i + Σ_{i,j}V_I(i,j)n_in_j`.
    pub fn diagonal_energy(&self, occ: &[usize]) -> f64 {
        let mut e = 0.0;
        for (i, &k) in occ.iter().enumerate() {
            let k = k as f64;
            e += 0.5 * self.u * k * (k - 1.0);
            if let Some(v) = &self.potential {
                e += v[i] * k;
            }
        }
        if let Some(vi) = &self.interaction {
            for (i, &a) in occ.iter().enumerate() {
                for (j, &b) in occ.iter().enumerate() {
                    e += vi.get(i, j) * (a * b) as f64;
                }
            }
        }
        e
    }
}

/// Ground state of one particle-number sector.
#[derive(Debug, Clone)]
pub struct SectorGround {
    pub particles: usize,
    pub energy: f64,
    /// Unit 2-norm, nonnegative, over the sector's slice of the basis.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BoseHubbard {
    pub basis: FockBasis,
    /// Allowed hops with weight `|H_{c'c}|`.
    pub config: ConfigGraph,
    pub hamiltonian: CsrMatrix,
}

/// Off-diagonal `a†_i a_j` moves for every base edge `i ← j`, i.e. weight
/// `M_ij` moves a particle from `j` to `i`.
fn hops(base: &CsrMatrix, basis: &FockBasis, c: usize) -> Vec<(usize, f64)> {
    let occ = basis.unrank(c);
    let mut out = Vec::new();
    for i in 0..base.n {
        for (j, w) in base.row(i) {
            if i == j || occ[j] == 0 || occ[i] == basis.n_max {
                continue;
            }
            let mut next = occ.clone();
            next[j] -= 1;
            next[i] += 1;
            let amp = w * (occ[j] as f64).sqrt() * ((occ[i] + 1) as f64).sqrt();
            out.push((basis.rank(&next).unwrap(), amp));
        }
    }
    out
}

fn self_loop_number(base: &CsrMatrix, occ: &[usize]) -> f64 {
    (0..base.n).map(|i| base.get(i, i) * occ[i] as f64).sum()
}

/// `H = −tΣ M_ij a†_i a_j + diagonal terms` on the occupation basis.
pub fn bose_hubbard(base: &WeightedGraph, spec: &BoseHubbardSpec, sectors: &[usize]) -> Result<BoseHubbard> {
    spec.validate()?;
    let n = base.n();
    if let Some(v) = &spec.potential {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    if let Some(vi) = &spec.interaction {
        if vi.rows != n || vi.cols != n {
            return Err(Error::DimensionMismatch { expected: n, got: vi.rows });
        }
    }
    let basis = FockBasis::new(n, spec.n_max, sectors)?;
    let csr = base.csr();
    let rows: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>)> = (0..basis.len())
        .into_par_iter()
        .map(|c| {
            let occ = basis.unrank(c);
            let mut h = Vec::new();
            let mut adj = Vec::new();
            for (d, amp) in hops(csr, &basis, c) {
                h.push((d, c, -spec.t_hop * amp));
                adj.push((c, d, spec.t_hop * amp));
            }
            let diag = spec.diagonal_energy(&occ) - spec.t_hop * self_loop_number(csr, &occ);
            h.push((c, c, diag));
            let stay = spec.t_hop * self_loop_number(csr, &occ);
            if stay > 0.0 {
                adj.push((c, c, stay));
            }
            (h, adj)
        })
        .collect();
    let mut h_trip = Vec::new();
    let mut a_trip = Vec::new();
    for (h, a) in rows {
        h_trip.extend(h);
        a_trip.extend(a);
    }
    let hamiltonian = CsrMatrix::from_triplets(basis.len(), &h_trip);
    let adjacency = WeightedGraph::new(basis.len(), GraphKind::Weighted, &a_trip)?;
    let configs = (0..basis.len()).map(|c| basis.unrank(c)).collect();
    let config = ConfigGraph::assemble(
        adjacency,
        n,
        Basis::Occupations { n_max: spec.n_max, particles: basis.sectors.clone() },
        configs,
    );
    Ok(BoseHubbard { basis, config, hamiltonian })
}

/// Ground state of a real matrix with nonpositive off-diagonal entries via
/// power iteration on `cI − H`, `c` the Gershgorin bound.
fn shifted_ground(h: &CsrMatrix, range: std::ops::Range<usize>) -> Result<(f64, Vec<f64>)> {
    let lo = range.start;
    let d = range.len();
    let mut c: f64 = 0.0;
    for i in range.clone() {
        c = c.max(h.row(i).map(|(_, v)| v.abs()).sum::<f64>());
    }
    // A strictly positive diagonal keeps cI − H aperiodic.
    c = c * (1.0 + 1e-9) + 1e-300;
    let mut edges = Vec::new();
    for i in range.clone() {
        let mut diag = c;
        for (j, v) in h.row(i) {
            if !range.contains(&j) {
                return Err(Error::InvalidParameter("Hamiltonian couples particle sectors".into()));
            }
            if j == i {
                diag -= v;
            } else if v > 0.0 {
                return Err(Error::InvalidParameter("positive off-diagonal hop".into()));
            } else {
                edges.push((i - lo, j - lo, -v));
            }
        }
        edges.push((i - lo, i - lo, diag));
    }
    let g = WeightedGraph::new(d, GraphKind::Weighted, &edges)?;
    let pair = dominant_eigenpair(&g, &EigenOptions::default())?;
    let nrm = norm2(&pair.psi);
    Ok((c - pair.lambda, pair.psi.iter().map(|v| v / nrm).collect()))
}

impl BoseHubbard {
    pub fn sector_ground(&self, particles: usize) -> Result<SectorGround> {
        let range = self
            .basis
            .sector_range(particles)
            .ok_or_else(|| Error::InvalidParameter(format!("sector {particles} not in basis")))?;
        let (energy, vector) = shifted_ground(&self.hamiltonian, range)?;
        Ok(SectorGround { particles, energy, vector })
    }

    /// Each sector independently, in basis order.
    pub fn ground_states(&self) -> Result<Vec<SectorGround>> {
        self.basis.sectors.clone().into_par_iter().map(|p| self.sector_ground(p)).collect()
    }

    /// `N̂H − HN̂`, computed on integer index maps; identically zero.
    pub fn number_commutator(&self) -> CsrMatrix {
        let n_of = |c: usize| -> f64 { self.config.configs[c].iter().sum::<usize>() as f64 };
        let h = &self.hamiltonian;
        let mut trip = Vec::new();
        for i in 0..h.n {
            for (j, v) in h.row(i) {
                trip.push((i, j, (n_of(i) - n_of(j)) * v));
            }
        }
        CsrMatrix::from_triplets(h.n, &trip)
    }
}

/// Comparison of the exponential-weight configuration matrix with its
/// linearized Bose–Hubbard counterpart in one sector.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub particles: usize,
    /// `max_c εβ|E(c)|` actually applied.
    pub epsilon_beta_v: f64,
    pub lambda_merw: f64,
    pub energy_linear: f64,
    /// `‖ψ_MERW − ψ_linear‖₂` with both at unit 2-norm.
    pub gap: f64,
}

/// Builds `A_{c'c} = hop_{c'c} · exp(−(w_c + w_{c'})/2)` and
/// `H = −hop + d·N·diag(w)`, where `w = εβE` is the configuration energy
/// scaled so that `max|w| = epsilon_beta_v` and `d` the base degree.
pub fn merw_vs_bosehubbard_gap(
    base: &WeightedGraph,
    spec: &BoseHubbardSpec,
    particles: usize,
    epsilon_beta_v: f64,
) -> Result<GapReport> {
    let bh = bose_hubbard(base, spec, &[particles])?;
    let d = bh.basis.len();
    let energies: Vec<f64> = bh.config.configs.iter().map(|c| spec.diagonal_energy(c)).collect();
    let emax = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let scale = if emax > 0.0 { epsilon_beta_v / emax } else { 0.0 };
    let w: Vec<f64> = energies.iter().map(|e| e * scale).collect();
    let degree = {
        let csr = base.csr();
        (0..csr.n).map(|i| csr.row(i).filter(|&(j, _)| j != i).count()).max().unwrap_or(0) as f64
    };
    let csr = base.csr();
    let mut merw_edges = Vec::new();
    let mut lin = Vec::new();
    for c in 0..d {
        let occ = &bh.config.configs[c];
        for (to, amp) in hops(csr, &bh.basis, c) {
            let a = spec.t_hop * amp;
            merw_edges.push((to, c, a * (-(w[c] + w[to]) / 2.0).exp()));
            lin.push((to, c, -a));
        }
        let stay = spec.t_hop * self_loop_number(csr, occ);
        if stay > 0.0 {
            merw_edges.push((c, c, stay * (-w[c]).exp()));
        }
        lin.push((c, c, -stay + spec.t_hop * degree * particles as f64 * w[c]));
    }
    let g = WeightedGraph::new(d, GraphKind::Weighted, &merw_edges)?;
    let pair = dominant_eigenpair(&g, &EigenOptions::default())?;
    let nrm = norm2(&pair.psi);
    let psi_m: Vec<f64> = pair.psi.iter().map(|v| v / nrm).collect();
    let (energy_linear, psi_l) = shifted_ground(&CsrMatrix::from_triplets(d, &lin), 0..d)?;
    let gap = norm2(&psi_m.iter().zip(&psi_l).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(GapReport { particles, epsilon_beta_v: scale * emax, lambda_merw: pair.lambda, energy_linear, gap })
}
