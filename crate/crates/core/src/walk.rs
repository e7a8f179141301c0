//! Stochastic matrices on graphs and their information-theoretic diagnostics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{dense_power, WeightedGraph};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::rng::{substream, TrajectoryStream};
use crate::spectral::{dominant_eigenpair, EigenOptions, EigenPair};

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Grw,
    GrwL(usize),
    Merw { lambda: f64, psi: Vec<f64> },
    TimeDependent { t: usize },
    Custom,
}

#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    pub matrix: CsrMatrix,
    pub stationary: Vec<f64>,
    pub provenance: Provenance,
}

impl StochasticMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// `max_i |Σ_j S_ij − 1|`
    pub fn stochasticity_error(&self) -> f64 {
        self.matrix.row_sums().iter().fold(0.0, |m, s| m.max((s - 1.0).abs()))
    }

    /// `‖πS − π‖∞`
    pub fn stationarity_error(&self) -> f64 {
        let step = self.matrix.vec_mul(&self.stationary);
        step.iter().zip(&self.stationary).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// One step of density evolution `ρ ← ρ S`.
    pub fn evolve(&self, rho: &[f64]) -> Vec<f64> {
        self.matrix.vec_mul(rho)
    }
}

/// Stationary density of a row-stochastic matrix as its left PF vector.
fn stationary_of(s: &CsrMatrix) -> Result<Vec<f64>> {
    let g = WeightedGraph::from_csr(crate::GraphKind::Weighted, s.clone())?;
    let pair = dominant_eigenpair(&g, &EigenOptions { krylov_warm_start: false, ..Default::default() })?;
    let pi = pair.stationary();
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / total).collect())
}

fn check_dangling(graph: &WeightedGraph) -> Result<Vec<f64>> {
    let d = graph.degrees();
    if let Some(v) = d.iter().position(|&x| x == 0.0) {
        return Err(Error::DanglingVertex { vertex: v });
    }
    Ok(d)
}

/// Generic random walk `S_ij = M_ij / d_i`.
pub fn grw(graph: &WeightedGraph) -> Result<StochasticMatrix> {
    let d = check_dangling(graph)?;
    let trip: Vec<_> = graph.edges().into_iter().map(|(i, j, w)| (i, j, w / d[i])).collect();
    let matrix = CsrMatrix::from_triplets(graph.n(), &trip);
    let stationary = if graph.is_symmetric() {
        let total: f64 = d.iter().sum();
        d.iter().map(|x| x / total).collect()
    } else {
        stationary_of(&matrix)?
    };
    Ok(StochasticMatrix { matrix, stationary, provenance: Provenance::Grw })
}

/// Walk choosing each edge proportionally to the number of length-`l`
/// continuations it opens: `S_ij ∝ M_ij Σ_k (M^{l−1})_jk`.
pub fn grw_l(graph: &WeightedGraph, l: usize) -> Result<StochasticMatrix> {
    if l == 0 {
        return Err(Error::InvalidParameter("l must be at least 1".into()));
    }
    check_dangling(graph)?;
    let n = graph.n();
    let mut v = vec![1.0; n];
    for _ in 1..l {
        v = graph.mul_vec(&v);
        let s = crate::matrix::norm_inf(&v);
        v.iter_mut().for_each(|x| *x /= s);
    }
    let mv = graph.mul_vec(&v);
    let trip: Vec<_> = graph
        .edges()
        .into_iter()
        .filter(|&(_, j, _)| v[j] > 0.0)
        .map(|(i, j, w)| (i, j, w * v[j] / mv[i]))
        .collect();
    let matrix = CsrMatrix::from_triplets(n, &trip);
    let stationary = stationary_of(&matrix)?;
    Ok(StochasticMatrix { matrix, stationary, provenance: Provenance::GrwL(l) })
}

/// Maximal entropy random walk `S_ij = (M_ij / λ) ψ_j / ψ_i`.
pub fn merw(graph: &WeightedGraph) -> Result<StochasticMatrix> {
    let pair = dominant_eigenpair(graph, &EigenOptions::default())?;
    Ok(merw_from_pair(graph, &pair))
}

/// Rows are divided by `(Mψ)_i` rather than `λψ_i`; the two agree up to the
/// eigen-residual, but only the former keeps rows with tiny `ψ_i` stochastic.
pub fn merw_from_pair(graph: &WeightedGraph, pair: &EigenPair) -> StochasticMatrix {
    let (lambda, psi) = (pair.lambda, &pair.psi);
    let mpsi = graph.mul_vec(psi);
    let trip: Vec<_> = graph
        .edges()
        .into_iter()
        .map(|(i, j, w)| (i, j, w * psi[j] / mpsi[i]))
        .collect();
    let matrix = CsrMatrix::from_triplets(graph.n(), &trip);
    let pi = pair.stationary();
    let total: f64 = pi.iter().sum();
    StochasticMatrix {
        matrix,
        stationary: pi.into_iter().map(|v| v / total).collect(),
        provenance: Provenance::Merw { lambda, psi: psi.clone() },
    }
}

pub const PROPAGATOR_LIMIT: usize = 2048;

/// `l`-step transition probabilities. For MERW this is the closed form
/// `(M^l)_ij / λ^l · ψ_j / ψ_i`; otherwise `S^l`.
pub fn propagator(graph: &WeightedGraph, stoch: &StochasticMatrix, l: usize) -> Result<DenseMatrix> {
    let n = stoch.n();
    if n > PROPAGATOR_LIMIT {
        return Err(Error::TooLarge { size: n, limit: PROPAGATOR_LIMIT });
    }
    if graph.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: graph.n() });
    }
    match &stoch.provenance {
        Provenance::Merw { lambda, psi } => {
            let mut base = graph.to_dense();
            base.scale(1.0 / lambda);
            let (mut p, _) = dense_power(&base, l);
            for i in 0..n {
                for j in 0..n {
                    let v = p.get(i, j) * psi[j] / psi[i];
                    p.set(i, j, v);
                }
            }
            Ok(p)
        }
        _ => Ok(dense_power(&stoch.matrix.to_dense(), l).0),
    }
}

/// Natural log of the probability of following `path` given its first vertex.
pub fn path_log_probability(stoch: &StochasticMatrix, path: &[usize]) -> f64 {
    path.windows(2).map(|e| stoch.get(e[0], e[1]).ln()).sum()
}

pub fn path_probability(stoch: &StochasticMatrix, path: &[usize]) -> f64 {
    path_log_probability(stoch, path).exp()
}

#[derive(Debug, Clone)]
pub struct EquiprobabilityReport {
    pub holds: bool,
    /// Largest spread of `ln(P(γ)/W(γ))` inside one (start, end, length) class.
    pub max_log_spread: f64,
    /// Two paths with the same endpoints and length but different ratios.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
    pub paths_checked: usize,
}

pub const EQUIPROBABILITY_MAX_N: usize = 12;
pub const EQUIPROBABILITY_MAX_LEN: usize = 10;

/// Exhaustively checks that paths with equal endpoints and length have
/// probabilities proportional to their weight products.
pub fn equiprobability_check(
    graph: &WeightedGraph,
    stoch: &StochasticMatrix,
    max_len: usize,
) -> Result<EquiprobabilityReport> {
    let n = graph.n();
    if n > EQUIPROBABILITY_MAX_N {
        return Err(Error::TooLarge { size: n, limit: EQUIPROBABILITY_MAX_N });
    }
    if max_len > EQUIPROBABILITY_MAX_LEN {
        return Err(Error::TooLarge { size: max_len, limit: EQUIPROBABILITY_MAX_LEN });
    }
    const TOL: f64 = 1e-9;
    let csr = graph.csr();
    let slots = n * n * (max_len + 1);
    let mut reference: Vec<Option<(f64, Vec<usize>)>> = vec![None; slots];
    let mut report = EquiprobabilityReport { holds: true, max_log_spread: 0.0, witness: None, paths_checked: 0 };

    for start in 0..n {
        let mut path = vec![start];
        let mut ratio = vec![0.0f64];
        // Explicit DFS stack of row cursors.
        let mut cursor = vec![csr.row_ptr[start]];
        while let Some(&pos) = cursor.last() {
            let v = *path.last().unwrap();
            if path.len() > max_len || pos >= csr.row_ptr[v + 1] {
                cursor.pop();
                path.pop();
                ratio.pop();
                continue;
            }
            *cursor.last_mut().unwrap() += 1;
            let w = csr.col_idx[pos];
            let m = csr.values[pos];
            let s = stoch.get(v, w);
            let r = ratio.last().unwrap() + s.ln() - m.ln();
            path.push(w);
            ratio.push(r);
            cursor.push(csr.row_ptr[w]);
            report.paths_checked += 1;
            let key = (start * n + w) * (max_len + 1) + path.len() - 1;
            match &reference[key] {
                None => reference[key] = Some((r, path.clone())),
                Some((r0, p0)) => {
                    let spread = if r.is_finite() && r0.is_finite() {
                        (r - r0).abs()
                    } else if r == *r0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    if spread > report.max_log_spread {
                        report.max_log_spread = spread;
                        if spread > TOL {
                            report.holds = false;
                            report.witness = Some((p0.clone(), path.clone()));
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    /// `H(S) = −Σ π_i Σ_j S_ij lg(S_ij / M_ij)` in bits per step.
    pub entropy_rate: f64,
    /// `−Σ π_i Σ_j S_ij lg S_ij`, the entropy of the choices alone.
    pub choice_entropy: f64,
    /// `lg λ`, the supremum of `entropy_rate` over walks on the graph.
    pub max_rate: f64,
    /// `U = Σ π_i Σ_j S_ij V_ij` with `V_ij = −ln(M_ij) / β`.
    pub mean_energy: f64,
    /// `F = U − T·S_choice = −(ln 2 / β) H(S)`.
    pub free_energy: f64,
}

pub fn entropy_report(graph: &WeightedGraph, stoch: &StochasticMatrix, beta: f64) -> Result<EntropyReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let pair = dominant_eigenpair(graph, &EigenOptions::default())?;
    let mut h = 0.0;
    let mut choice = 0.0;
    let mut energy = 0.0;
    for i in 0..stoch.n() {
        let pi = stoch.stationary[i];
        for (j, s) in stoch.matrix.row(i) {
            let m = graph.weight(i, j);
            if m == 0.0 {
                return Err(Error::InvalidParameter(format!("S has ({i}, {j}) but M does not")));
            }
            h -= pi * s * (s / m).log2();
            choice -= pi * s * s.log2();
            energy -= pi * s * m.ln() / beta;
        }
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(EntropyReport {
        entropy_rate: h,
        choice_entropy: choice,
        max_rate: pair.lambda.log2(),
        mean_energy: energy,
        free_energy: energy - choice * ln2 / beta,
    })
}

/// `min d ≤ mean d ≤ exp(Σ d ln d / Σ d) ≤ λ ≤ max d`.
///
/// The two middle links come from `H(GRW) ≤ lg λ` with `π ∝ d`, so they are
/// only guaranteed for symmetric `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeChain {
    pub min_degree: f64,
    pub mean_degree: f64,
    pub entropic_degree: f64,
    pub lambda: f64,
    pub max_degree: f64,
}

impl DegreeChain {
    pub fn as_array(&self) -> [f64; 5] {
        [self.min_degree, self.mean_degree, self.entropic_degree, self.lambda, self.max_degree]
    }

    /// Indices `k` where link `k → k+1` is violated by more than `tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        let a = self.as_array();
        (0..4).filter(|&k| a[k] > a[k + 1] + tol).collect()
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.violations(tol).is_empty()
    }
}

pub fn degree_inequality_chain(graph: &WeightedGraph) -> Result<DegreeChain> {
    let d = check_dangling(graph)?;
    let pair = dominant_eigenpair(graph, &EigenOptions::default())?;
    let total: f64 = d.iter().sum();
    let ent: f64 = d.iter().map(|x| x * x.ln()).sum::<f64>() / total;
    Ok(DegreeChain {
        min_degree: d.iter().copied().fold(f64::INFINITY, f64::min),
        mean_degree: total / d.len() as f64,
        entropic_degree: ent.exp(),
        lambda: pair.lambda,
        max_degree: d.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone)]
pub struct CurrentReport {
    pub balanced: bool,
    /// `I_ij = π_i S_ij − π_j S_ji` for every unordered pair joined by an edge, `i < j`.
    pub current: Vec<(usize, usize, f64)>,
    pub max_abs_current: f64,
    /// `max_i |Σ_j I_ij|`
    pub kirchhoff_residual: f64,
}

impl CurrentReport {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        self.current
            .binary_search_by(|&(x, y, _)| (x, y).cmp(&(a, b)))
            .map(|k| sign * self.current[k].2)
            .unwrap_or(0.0)
    }
}

pub fn detailed_balance_and_current(stoch: &StochasticMatrix) -> CurrentReport {
    let n = stoch.n();
    let pi = &stoch.stationary;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for (j, _) in stoch.matrix.row(i) {
            if i != j {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut net = vec![0.0; n];
    let mut max_abs: f64 = 0.0;
    let current: Vec<_> = pairs
        .into_iter()
        .map(|(i, j)| {
            let c = pi[i] * stoch.get(i, j) - pi[j] * stoch.get(j, i);
            net[i] += c;
            net[j] -= c;
            max_abs = max_abs.max(c.abs());
            (i, j, c)
        })
        .collect();
    CurrentReport {
        balanced: max_abs <= 1e-10,
        current,
        max_abs_current: max_abs,
        kirchhoff_residual: net.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

fn check_density(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("not a probability density".into()));
    }
    Ok(())
}

/// `D(q‖p) = Σ q_i lg(q_i / p_i)` in bits.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    check_density(q)?;
    check_density(p)?;
    let mut d = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            if pi == 0.0 {
                return Err(Error::SupportMismatch);
            }
            d += qi * (qi / pi).log2();
        }
    }
    Ok(d.max(0.0))
}

/// Leading-order probability `2^{−n D(q‖p)}` of observing type `q` in `n`
/// independent draws from `p`.
pub fn concentration_probability(n: u64, q: &[f64], p: &[f64]) -> Result<f64> {
    Ok((-(n as f64) * kl_divergence(q, p)?).exp2())
}

/// Concentration probability with the Stirling prefactor
/// `(2πn)^{−(k−1)/2} Π_i q_i^{−1/2}` over the `k` occupied categories.
pub fn concentration_probability_stirling(n: u64, q: &[f64], p: &[f64]) -> Result<f64> {
    let base = concentration_probability(n, q, p)?;
    let support: Vec<f64> = q.iter().copied().filter(|&v| v > 0.0).collect();
    let k = support.len() as f64;
    let prefactor = (2.0 * std::f64::consts::PI * n as f64).powf(-(k - 1.0) / 2.0)
        * support.iter().map(|v| v.powf(-0.5)).product::<f64>();
    Ok(prefactor * base)
}

fn draw_category(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn multinomial_counts(rng: &mut impl rand::RngCore, cdf: &[f64], n: u64) -> Vec<u64> {
    let mut counts = vec![0u64; cdf.len()];
    for _ in 0..n {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        counts[draw_category(cdf, u)] += 1;
    }
    counts
}

fn cdf_of(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter().map(|v| { acc += v; acc }).collect()
}

/// Fraction of `runs` multinomial samples of size `n` from `p` whose counts
/// equal `target` exactly.
pub fn empirical_type_frequency(n: u64, p: &[f64], target: &[u64], runs: usize, seed: u64) -> f64 {
    let cdf = cdf_of(p);
    let mut rng = substream(seed, "type-frequency");
    let hits = (0..runs).filter(|_| multinomial_counts(&mut rng, &cdf, n) == target).count();
    hits as f64 / runs as f64
}

/// Same quantity for events too rare to observe directly: samples are drawn
/// from the target type itself and reweighted by the exact likelihood ratio.
pub fn tilted_type_probability(n: u64, p: &[f64], target: &[u64], runs: usize, seed: u64) -> f64 {
    let q: Vec<f64> = target.iter().map(|&c| c as f64 / n as f64).collect();
    let cdf = cdf_of(&q);
    let mut rng = substream(seed, "type-frequency-tilted");
    let hits = (0..runs).filter(|_| multinomial_counts(&mut rng, &cdf, n) == target).count();
    let log_weight: f64 = target
        .iter()
        .zip(p.iter().zip(&q))
        .filter(|(&c, _)| c > 0)
        .map(|(&c, (&pi, &qi))| c as f64 * (pi / qi).ln())
        .sum();
    hits as f64 / runs as f64 * log_weight.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub path: Vec<usize>,
    pub log_probability: f64,
}

impl TrajectorySample {
    pub fn visit_frequencies(&self, n: usize) -> Vec<f64> {
        let mut f = vec![0.0; n];
        for &v in &self.path {
            f[v] += 1.0;
        }
        let total = self.path.len() as f64;
        f.iter_mut().for_each(|x| *x /= total);
        f
    }
}

/// Inverse-CDF sampling of one trajectory on stream `(seed, trajectory)`.
pub fn sample_trajectory_stream(
    stoch: &StochasticMatrix,
    start: usize,
    steps: usize,
    seed: u64,
    trajectory: u64,
) -> TrajectorySample {
    let m = &stoch.matrix;
    let mut stream = TrajectoryStream::new(seed, trajectory);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start);
    let mut logp = 0.0;
    let mut v = start;
    for _ in 0..steps {
        let u = stream.next_uniform();
        let range = m.row_ptr[v]..m.row_ptr[v + 1];
        let mut acc = 0.0;
        let mut pick = range.end - 1;
        for k in range {
            acc += m.values[k];
            if u < acc {
                pick = k;
                break;
            }
        }
        logp += m.values[pick].ln();
        v = m.col_idx[pick];
        path.push(v);
    }
    TrajectorySample { path, log_probability: logp }
}

pub fn sample_trajectory(stoch: &StochasticMatrix, start: usize, steps: usize, seed: u64) -> TrajectorySample {
    sample_trajectory_stream(stoch, start, steps, seed, 0)
}

/// Independent trajectories, one stream per index, sampled in parallel.
pub fn sample_trajectories(
    stoch: &StochasticMatrix,
    starts: &[usize],
    steps: usize,
    seed: u64,
) -> Vec<TrajectorySample> {
    starts
        .par_iter()
        .enumerate()
        .map(|(id, &s)| sample_trajectory_stream(stoch, s, steps, seed, id as u64))
        .collect()
}
