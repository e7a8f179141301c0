//! Cyclic 1D/2D lattices with self-loop defects or Boltzmann potentials.
//!
//! Site `(x, y)` has index `y * side + x`; in 1D only `x` is used. A defect is
//! a missing self-loop, which acts as a unit potential barrier in the
//! discrete Schrödinger picture.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{period, scc, GraphKind, WeightedGraph};
use crate::matrix::{norm_inf, CsrMatrix};
use crate::rng::substream;
use crate::spectral::{dominant_eigenpair, small_spectrum, EigenOptions, EigenPair};
use crate::walk::{merw_from_pair, StochasticMatrix};

/// First zero of the Bessel function `J0`.
pub const BESSEL_J0_ZERO: f64 = 2.404825;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub side: usize,
    /// Lattice constant `δ`.
    pub delta: f64,
}

impl LatticeSpec {
    pub fn new(dimension: usize, side: usize) -> Result<Self> {
        Self::with_delta(dimension, side, 1.0)
    }

    pub fn with_delta(dimension: usize, side: usize, delta: f64) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if side < 3 {
            return Err(Error::InvalidParameter(format!("side must be at least 3, got {side}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("lattice constant must be positive, got {delta}")));
        }
        Ok(LatticeSpec { dimension, side, delta })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    /// `2D + 1`, the degree of a defect-free site.
    pub fn full_degree(&self) -> f64 {
        (2 * self.dimension + 1) as f64
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.side, i / self.side)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.side + x
    }

    /// Right neighbour, then left, then (2D) up and down.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let m = self.side;
        let (x, y) = self.coords(i);
        let mut out = vec![self.index((x + 1) % m, y), self.index((x + m - 1) % m, y)];
        if self.dimension == 2 {
            out.push(self.index(x, (y + 1) % m));
            out.push(self.index(x, (y + m - 1) % m));
        }
        out
    }

    /// Time step `ε = δ² / ((2D+1) α)`.
    pub fn epsilon(&self, params: &PhysicalParams) -> f64 {
        self.delta * self.delta / (self.full_degree() * params.alpha)
    }

    /// Squared torus distance between two sites.
    pub fn torus_dist2(&self, a: usize, b: usize) -> usize {
        let m = self.side;
        let w = |p: usize, q: usize| {
            let d = p.abs_diff(q);
            d.min(m - d)
        };
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let dx = w(ax, bx);
        let dy = w(ay, by);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub beta: f64,
    /// `α = ħ² β / (2m)`.
    pub alpha: f64,
    pub hbar: f64,
    pub mass: f64,
    pub omega: f64,
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64, omega: f64) -> Result<Self> {
        Self::with_beta(hbar, mass, omega, 1.0 / hbar)
    }

    pub fn with_beta(hbar: f64, mass: f64, omega: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("mass", mass), ("omega", omega), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhysicalParams { beta, alpha: hbar * hbar * beta / (2.0 * mass), hbar, mass, omega })
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams::new(1.0, 1.0, 1.0).unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct DefectedLattice {
    pub spec: LatticeSpec,
    /// `true` where the self-loop was removed.
    pub defects: Vec<bool>,
    pub graph: WeightedGraph,
}

impl DefectedLattice {
    pub fn defect_count(&self) -> usize {
        self.defects.iter().filter(|&&d| d).count()
    }

    pub fn defect_fraction(&self) -> f64 {
        self.defect_count() as f64 / self.defects.len() as f64
    }
}

/// i.i.d. Bernoulli defect mask from the `defects` sub-stream of `seed`.
pub fn random_defects(spec: &LatticeSpec, defect_probability: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&defect_probability) {
        return Err(Error::InvalidParameter(format!(
            "defect probability must lie in [0, 1), got {defect_probability}"
        )));
    }
    let mut rng = substream(seed, "defects");
    Ok((0..spec.sites()).map(|_| rng.random::<f64>() < defect_probability).collect())
}

pub fn build_defected_lattice(spec: &LatticeSpec, defect_probability: f64, seed: u64) -> Result<DefectedLattice> {
    let mask = random_defects(spec, defect_probability, seed)?;
    lattice_with_defects(spec, mask)
}

pub fn lattice_with_defects(spec: &LatticeSpec, defects: Vec<bool>) -> Result<DefectedLattice> {
    if defects.len() != spec.sites() {
        return Err(Error::DimensionMismatch { expected: spec.sites(), got: defects.len() });
    }
    let mut edges = Vec::with_capacity(spec.sites() * (2 * spec.dimension + 1));
    for i in 0..spec.sites() {
        for j in spec.neighbors(i) {
            edges.push((i, j, 1.0));
        }
        if !defects[i] {
            edges.push((i, i, 1.0));
        }
    }
    let graph = WeightedGraph::new(spec.sites(), GraphKind::Simple, &edges)?;
    if period(&graph)?.period != 1 {
        return Err(Error::AllDefected);
    }
    Ok(DefectedLattice { spec: *spec, defects, graph })
}

/// `M_ij = exp(−εβ(V_i+V_j)/2)` on lattice edges and `M_ii = exp(−εβV_i)`.
pub fn boltzmann_lattice(spec: &LatticeSpec, potential: &[f64], params: &PhysicalParams) -> Result<WeightedGraph> {
    let n = spec.sites();
    if potential.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: potential.len() });
    }
    if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteWeight { i, j: i });
    }
    let eb = spec.epsilon(params) * params.beta;
    let mut edges = Vec::with_capacity(n * (2 * spec.dimension + 1));
    for i in 0..n {
        for j in spec.neighbors(i) {
            edges.push((i, j, (-eb * 0.5 * (potential[i] + potential[j])).exp()));
        }
        edges.push((i, i, (-eb * potential[i]).exp()));
    }
    WeightedGraph::new(n, GraphKind::Weighted, &edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchrodingerMode {
    /// Unit edges, `V = 1 − M_ii`, `E = (2D+1) − λ`.
    Combinatorial,
    /// Boltzmann weights, `V = −ln M_ii / (εβ)`, `E = (2D+1−λ)/((2D+1)βε)`.
    Physical,
}

#[derive(Debug, Clone)]
pub struct DiscreteSchrodinger {
    /// Recovered potential, in combinatorial or physical units.
    pub potential: Vec<f64>,
    /// `(2D+1) − d_x`: the potential that makes `E ψ = −Δ_M ψ + V ψ` exact,
    /// `Δ_M` being the weighted graph Laplacian.
    pub effective_potential: Vec<f64>,
    pub lambda: f64,
    /// `(2D+1) − λ`.
    pub combinatorial_energy: f64,
    /// Reported energy for the chosen mode.
    pub energy: f64,
    pub ground_state: Vec<f64>,
    /// Max per-site `|−Δ_M ψ + V ψ − E ψ| / ‖ψ‖∞`.
    pub residual: f64,
    pub pair: EigenPair,
}

/// Reads the lattice Schrödinger problem back out of the weights and checks
/// the dominant eigenvector against it.
pub fn schrodinger_view(
    graph: &WeightedGraph,
    spec: &LatticeSpec,
    mode: SchrodingerMode,
    params: &PhysicalParams,
) -> Result<DiscreteSchrodinger> {
    let n = spec.sites();
    if graph.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: graph.n() });
    }
    let eb = spec.epsilon(params) * params.beta;
    let mut potential = vec![0.0; n];
    for (i, v) in potential.iter_mut().enumerate() {
        let loop_w = graph.weight(i, i);
        *v = match mode {
            SchrodingerMode::Combinatorial => {
                if loop_w != 0.0 && loop_w != 1.0 {
                    return Err(Error::InconsistentGraph(format!("self-loop weight {loop_w} at {i}")));
                }
                1.0 - loop_w
            }
            SchrodingerMode::Physical => {
                if loop_w <= 0.0 {
                    return Err(Error::InconsistentGraph(format!("missing self-loop at {i}")));
                }
                -loop_w.ln() / eb
            }
        };
    }
    // Only lattice edges may be present, with the weights the mode implies.
    let csr = graph.csr();
    for i in 0..n {
        let nb = spec.neighbors(i);
        for (j, w) in csr.row(i) {
            if j == i {
                continue;
            }
            if !nb.contains(&j) {
                return Err(Error::InconsistentGraph(format!("edge ({i}, {j}) is not a lattice bond")));
            }
            let expect = match mode {
                SchrodingerMode::Combinatorial => 1.0,
                SchrodingerMode::Physical => (-eb * 0.5 * (potential[i] + potential[j])).exp(),
            };
            if (w - expect).abs() > 1e-12 * expect {
                return Err(Error::InconsistentGraph(format!("bond ({i}, {j}) has weight {w}, expected {expect}")));
            }
        }
        for &j in &nb {
            if csr.get(i, j) == 0.0 {
                return Err(Error::InconsistentGraph(format!("missing bond ({i}, {j})")));
            }
        }
    }

    let pair = dominant_eigenpair(graph, &EigenOptions::default())?;
    let full = spec.full_degree();
    let degrees = graph.degrees();
    let effective_potential: Vec<f64> = degrees.iter().map(|d| full - d).collect();
    let e_comb = full - pair.lambda;
    let psi = &pair.psi;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut lap = 0.0;
        for (j, w) in csr.row(i) {
            if j != i {
                lap += w * (psi[j] - psi[i]);
            }
        }
        let r = -lap + effective_potential[i] * psi[i] - e_comb * psi[i];
        worst = worst.max(r.abs());
    }
    let residual = worst / norm_inf(psi);
    if residual > 1e-10 {
        return Err(Error::InconsistentGraph(format!("Schrödinger residual {residual:.3e}")));
    }
    let energy = match mode {
        SchrodingerMode::Combinatorial => e_comb,
        SchrodingerMode::Physical => e_comb / (full * eb),
    };
    Ok(DiscreteSchrodinger {
        potential,
        effective_potential,
        lambda: pair.lambda,
        combinatorial_energy: e_comb,
        energy,
        ground_state: psi.clone(),
        residual,
        pair,
    })
}

/// Decay constant inside a barrier of height `V − E > 0`: `arccosh(1 + (V−E)/2)`.
pub fn barrier_wavenumber(v_minus_e: f64) -> f64 {
    (1.0 + 0.5 * v_minus_e).acosh()
}

/// Oscillation wavenumber inside a well, `E − V ∈ (0, 4]`: `arccos(1 − (E−V)/2)`.
pub fn well_wavenumber(e_minus_v: f64) -> f64 {
    (1.0 - 0.5 * e_minus_v).acos()
}

#[derive(Debug, Clone)]
pub struct LifshitzEstimate {
    /// Sites of the largest defect-free interval or disc.
    pub region: Vec<usize>,
    /// `R`: half the interval length `L+1` in 1D, the empty-disc radius in 2D.
    pub halfwidth: f64,
    /// `(π/2R)²` in 1D, `(j/R)²` in 2D.
    pub predicted_energy: f64,
    /// Same formula with `R` from the defect density alone; `None` without defects.
    pub statistical_energy: Option<f64>,
    pub measured_energy: f64,
    pub mass_in_region: f64,
}

/// Maximal cyclic runs of defect-free sites on a ring, as `(start, length)`.
pub fn defect_free_runs(defects: &[bool]) -> Vec<(usize, usize)> {
    let n = defects.len();
    let Some(first) = defects.iter().position(|&d| d) else {
        return vec![(0, n)];
    };
    let mut runs = Vec::new();
    let mut k = 1;
    while k <= n {
        let i = (first + k) % n;
        if defects[i] {
            k += 1;
            continue;
        }
        let start = i;
        let mut len = 0;
        while k <= n && !defects[(first + k) % n] {
            len += 1;
            k += 1;
        }
        runs.push((start, len));
    }
    runs
}

/// Exact Euclidean distance (squared) from every site to its nearest defect
/// on the torus, by brute force. `None` entries mean there are no defects.
pub fn defect_distance2(lattice: &DefectedLattice) -> Option<Vec<usize>> {
    let spec = &lattice.spec;
    let defect_sites: Vec<usize> = (0..spec.sites()).filter(|&i| lattice.defects[i]).collect();
    if defect_sites.is_empty() {
        return None;
    }
    Some(
        (0..spec.sites())
            .map(|i| defect_sites.iter().map(|&d| spec.torus_dist2(i, d)).min().unwrap())
            .collect(),
    )
}

/// Largest defect-free region and the stationary mass `pi` puts inside it.
pub fn lifshitz_analysis(lattice: &DefectedLattice, pair: &EigenPair) -> LifshitzEstimate {
    let spec = &lattice.spec;
    let n = spec.sites();
    let pi = normalized(&pair.stationary());
    let measured_energy = spec.full_degree() - pair.lambda;
    let p_d = lattice.defect_fraction();
    let ln_q = (1.0 - p_d).ln().abs();

    let (region, halfwidth, predicted_energy, statistical_energy) = if spec.dimension == 1 {
        let (start, len) = defect_free_runs(&lattice.defects)
            .into_iter()
            .fold((0, 0), |best, r| if r.1 > best.1 { r } else { best });
        let region: Vec<usize> = (0..len).map(|k| (start + k) % n).collect();
        let r = 0.5 * (len as f64 + 1.0);
        let stat = (p_d > 0.0).then(|| (std::f64::consts::PI * ln_q / (n as f64).ln()).powi(2));
        (region, r, (std::f64::consts::PI / (2.0 * r)).powi(2), stat)
    } else {
        match defect_distance2(lattice) {
            None => {
                let r = 0.5 * spec.side as f64;
                ((0..n).collect(), r, (BESSEL_J0_ZERO / r).powi(2), None)
            }
            Some(d2) => {
                let center = (0..n).fold(0, |b, i| if d2[i] > d2[b] { i } else { b });
                let r2 = d2[center];
                let region: Vec<usize> = (0..n).filter(|&i| spec.torus_dist2(i, center) < r2).collect();
                let r = (r2 as f64).sqrt();
                let r_stat = ((n as f64).ln() / (std::f64::consts::PI * ln_q)).sqrt();
                (region, r, (BESSEL_J0_ZERO / r).powi(2), Some((BESSEL_J0_ZERO / r_stat).powi(2)))
            }
        }
    };
    let mass_in_region = region.iter().map(|&i| pi[i]).sum::<f64>().clamp(0.0, 1.0);
    LifshitzEstimate { region, halfwidth, predicted_energy, statistical_energy, measured_energy, mass_in_region }
}

/// 1D defect-free run carrying the most stationary mass, as `(start, length, mass)`.
pub fn heaviest_run(defects: &[bool], pi: &[f64]) -> (usize, usize, f64) {
    let n = defects.len();
    defect_free_runs(defects)
        .into_iter()
        .map(|(s, l)| (s, l, (0..l).map(|k| pi[(s + k) % n]).sum::<f64>()))
        .fold((0, 0, f64::NEG_INFINITY), |b, r| if r.2 > b.2 { r } else { b })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

#[derive(Debug, Clone)]
pub struct DensityTrace {
    /// `(step, ρ_step)` for each requested checkpoint, ascending.
    pub checkpoints: Vec<(usize, Vec<f64>)>,
}

impl DensityTrace {
    pub fn at(&self, step: usize) -> Option<&[f64]> {
        self.checkpoints.iter().find(|c| c.0 == step).map(|c| c.1.as_slice())
    }
}

/// Iterates `ρ ← ρ S`, recording the density at each checkpoint.
pub fn density_evolution(stoch: &StochasticMatrix, initial: &[f64], checkpoints: &[usize]) -> Result<DensityTrace> {
    if initial.len() != stoch.n() {
        return Err(Error::DimensionMismatch { expected: stoch.n(), got: initial.len() });
    }
    let total: f64 = initial.iter().sum();
    if (total - 1.0).abs() > 1e-9 || initial.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("initial density must be nonnegative and sum to 1".into()));
    }
    let mut steps = checkpoints.to_vec();
    steps.sort_unstable();
    steps.dedup();
    let mut rho = initial.to_vec();
    let mut next = vec![0.0; rho.len()];
    let mut t = 0;
    let mut out = Vec::with_capacity(steps.len());
    for s in steps {
        while t < s {
            stoch.matrix.vec_mul_into(&rho, &mut next);
            std::mem::swap(&mut rho, &mut next);
            t += 1;
        }
        out.push((s, rho.clone()));
    }
    Ok(DensityTrace { checkpoints: out })
}

/// Point mass at `site`.
pub fn delta_density(n: usize, site: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[site] = 1.0;
    v
}

/// MERW density dynamics expanded in the eigenmodes of a symmetric `M`:
/// `ρ_t(j) = ψ_j Σ_k (λ_k/λ)^t v_k(j) c_k`, `c_k = Σ_i ρ_0(i) v_k(i) / ψ_i`.
#[derive(Debug, Clone)]
pub struct ModeExpansion {
    pub lambda: f64,
    pub psi: Vec<f64>,
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

pub fn mode_expansion(graph: &WeightedGraph, initial: &[f64], modes: usize) -> Result<ModeExpansion> {
    let spectrum = small_spectrum(graph, modes)?;
    let lambda = spectrum.values[0];
    // Orthonormal top vector, positive by the sign convention.
    let psi: Vec<f64> = spectrum.vectors[0].iter().map(|v| v.abs()).collect();
    let coefficients = spectrum
        .vectors
        .iter()
        .map(|v| (0..initial.len()).map(|i| initial[i] * v[i] / psi[i]).sum())
        .collect();
    Ok(ModeExpansion { lambda, psi, values: spectrum.values, vectors: spectrum.vectors, coefficients })
}

impl ModeExpansion {
    pub fn density_at(&self, t: usize) -> Vec<f64> {
        let n = self.psi.len();
        let mut out = vec![0.0; n];
        for (k, v) in self.vectors.iter().enumerate() {
            let f = (self.values[k] / self.lambda).powi(t as i32) * self.coefficients[k];
            out.iter_mut().zip(v).for_each(|(o, vj)| *o += f * vj);
        }
        out.iter_mut().zip(&self.psi).for_each(|(o, p)| *o *= p);
        out
    }
}

/// 2D lattice whose horizontal bonds point rightward only. The defect mask
/// comes from the same stream as [`build_defected_lattice`].
pub fn directed_conduction_lattice(spec: &LatticeSpec, defect_probability: f64, seed: u64) -> Result<DefectedLattice> {
    if spec.dimension != 2 {
        return Err(Error::InvalidParameter("conduction lattice needs dimension 2".into()));
    }
    let defects = random_defects(spec, defect_probability, seed)?;
    let m = spec.side;
    let mut edges = Vec::new();
    for i in 0..spec.sites() {
        let (x, y) = spec.coords(i);
        edges.push((i, spec.index((x + 1) % m, y), 1.0));
        edges.push((i, spec.index(x, (y + 1) % m), 1.0));
        edges.push((i, spec.index(x, (y + m - 1) % m), 1.0));
        if !defects[i] {
            edges.push((i, i, 1.0));
        }
    }
    let graph = WeightedGraph::new(spec.sites(), GraphKind::Simple, &edges)?;
    let comps = scc(&graph);
    if comps.count() != 1 {
        return Err(Error::NotStronglyConnected { components: comps.count() });
    }
    if period(&graph)?.period != 1 {
        return Err(Error::AllDefected);
    }
    Ok(DefectedLattice { spec: *spec, defects, graph })
}

/// Net rightward probability flux per row, averaged over the columns.
pub fn row_currents(spec: &LatticeSpec, stoch: &StochasticMatrix) -> Vec<f64> {
    let m = spec.side;
    let pi = &stoch.stationary;
    (0..m)
        .map(|y| {
            let total: f64 = (0..m)
                .map(|x| {
                    let a = spec.index(x, y);
                    let b = spec.index((x + 1) % m, y);
                    pi[a] * stoch.get(a, b) - pi[b] * stoch.get(b, a)
                })
                .sum();
            total / m as f64
        })
        .collect()
}

/// A 1D cyclic grid on `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct Grid1d {
    pub spec: LatticeSpec,
    pub lo: f64,
    pub points: Vec<f64>,
}

impl Grid1d {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidParameter("empty interval".into()));
        }
        let delta = (hi - lo) / n as f64;
        let spec = LatticeSpec::with_delta(1, n, delta)?;
        let points = (0..n).map(|i| lo + i as f64 * delta).collect();
        Ok(Grid1d { spec, lo, points })
    }

    pub fn sample(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|&x| f(x)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RefinementRow {
    pub sites: usize,
    pub delta: f64,
    pub epsilon: f64,
    /// `E_ε = (3 − λ)/(3βε)`.
    pub energy: f64,
    /// L² distance between `ψ` (unit L² norm, `Σψ²δ = 1`) and the finest
    /// grid's `ψ` sampled at the same points.
    pub l2_to_finest: f64,
    /// Max row-sum defect of `S^t` over the checked horizon.
    pub row_sum_error: f64,
    /// Max `|e_i S^t S^s − e_i S^{t+s}|` over a few rows, `S^{t+s}` in closed form.
    pub chapman_kolmogorov_error: f64,
    /// Stationary mass on `x < 0` divided by mass on `x ≥ 0`.
    pub mass_ratio: f64,
    pub psi: Vec<f64>,
    pub stationary: Vec<f64>,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Least-squares slope of `ln|E_ε − E_ref|` against `ln δ`.
    pub order: f64,
}

/// Horizons `(t, s)` used in the composition check.
pub const CK_STEPS: (usize, usize) = (8, 16);

/// Solves the Boltzmann lattice for `potential` on grids of each size. Every
/// size must divide the largest one. With `reference_energy = None` the
/// finest grid serves as the energy reference and is excluded from the fit.
pub fn refine_and_compare(
    potential: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    sizes: &[usize],
    params: &PhysicalParams,
    reference_energy: Option<f64>,
) -> Result<RefinementTable> {
    let finest = *sizes.iter().max().ok_or_else(|| Error::InvalidParameter("no grid sizes".into()))?;
    if let Some(&bad) = sizes.iter().find(|&&s| finest % s != 0) {
        return Err(Error::InvalidParameter(format!("grid size {bad} does not divide {finest}")));
    }
    let mut rows: Vec<RefinementRow> = sizes
        .iter()
        .map(|&n| solve_grid(potential, lo, hi, n, params))
        .collect::<Result<_>>()?;
    let fine = rows.iter().position(|r| r.sites == finest).unwrap();
    let fine_psi = rows[fine].psi.clone();
    for r in rows.iter_mut() {
        let stride = finest / r.sites;
        let d2: f64 = r.psi.iter().enumerate().map(|(i, p)| (p - fine_psi[i * stride]).powi(2)).sum();
        r.l2_to_finest = (d2 * r.delta).sqrt();
    }
    let e_ref = reference_energy.unwrap_or(rows[fine].energy);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| reference_energy.is_some() || r.sites != finest)
        .map(|r| (r.delta.ln(), (r.energy - e_ref).abs().ln()))
        .collect();
    let order = slope(&pts);
    Ok(RefinementTable { rows, order })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn solve_grid(
    potential: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    params: &PhysicalParams,
) -> Result<RefinementRow> {
    let grid = Grid1d::new(lo, hi, n)?;
    let v = grid.sample(potential);
    let graph = boltzmann_lattice(&grid.spec, &v, params)?;
    let view = schrodinger_view(&graph, &grid.spec, SchrodingerMode::Physical, params)?;
    let stoch = merw_from_pair(&graph, &view.pair);
    let delta = grid.spec.delta;

    let (t, s) = CK_STEPS;
    let mut ones = vec![1.0; n];
    let mut row_sum_error: f64 = 0.0;
    for _ in 0..t + s {
        ones = stoch.matrix.mul_vec(&ones);
        row_sum_error = row_sum_error.max(ones.iter().fold(0.0, |m, x| m.max((x - 1.0).abs())));
    }
    let chapman_kolmogorov_error = chapman_kolmogorov(&graph, &stoch, &view.pair, t, s);

    let norm = (view.ground_state.iter().map(|p| p * p).sum::<f64>() * delta).sqrt();
    let psi: Vec<f64> = view.ground_state.iter().map(|p| p / norm).collect();
    let stationary = stoch.stationary.clone();
    let left: f64 = (0..n).filter(|&i| grid.points[i] < 0.0).map(|i| stationary[i]).sum();
    Ok(RefinementRow {
        sites: n,
        delta,
        epsilon: grid.spec.epsilon(params),
        energy: view.energy,
        l2_to_finest: 0.0,
        row_sum_error,
        chapman_kolmogorov_error,
        mass_ratio: left / (1.0 - left),
        psi,
        stationary,
        points: grid.points,
    })
}

/// Compares `e_i S^t S^s` with the closed form `(e_i M^{t+s})_j ψ_j / (λ^{t+s} ψ_i)`
/// on rows where `ψ_i ≥ ‖ψ‖∞ / 10`; far in the tails `ψ_i` carries too few
/// significant digits for the closed form to mean anything.
fn chapman_kolmogorov(graph: &WeightedGraph, stoch: &StochasticMatrix, pair: &EigenPair, t: usize, s: usize) -> f64 {
    let n = graph.n();
    let csr: &CsrMatrix = graph.csr();
    let top = norm_inf(&pair.psi);
    let bulk: Vec<usize> = (0..n).filter(|&i| pair.psi[i] >= 0.1 * top).collect();
    let rows: Vec<usize> = (0..4).map(|k| bulk[k * (bulk.len() - 1) / 3]).collect();
    let mut worst: f64 = 0.0;
    for &i in &rows {
        let mut rho = delta_density(n, i);
        for _ in 0..t + s {
            rho = stoch.matrix.vec_mul(&rho);
        }
        let mut row = delta_density(n, i);
        for _ in 0..t + s {
            row = csr.vec_mul(&row);
            row.iter_mut().for_each(|v| *v /= pair.lambda);
        }
        for j in 0..n {
            let closed = row[j] * pair.psi[j] / pair.psi[i];
            worst = worst.max((closed - rho[j]).abs());
        }
    }
    worst
}
