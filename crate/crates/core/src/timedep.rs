//! Time-dependent MERW on a schedule of matrices `M^t`, `t ∈ [0, T)`.
//!
//! The right amplitude runs backward from the stationary `ψ` of the last
//! matrix, the left one forward from the stationary `φ` of the first:
//!
//! `M^t ψ^{t+1} = λ^t ψ^t`, `(φ^t)ᵀ M^t = λ^t (φ^{t+1})ᵀ`, `t = 0..T−1`,
//!
//! so amplitudes and densities `π^t = φ^t ψ^t` live on `t = 0..=T`.

use crate::error::{Error, Result};
use crate::lattice::{boltzmann_lattice, Grid1d, PhysicalParams};
use crate::matrix::{dot, l1_distance, norm2, norm_inf, CsrMatrix, DenseMatrix};
use crate::spectral::{dominant_eigenpair, EigenOptions, EigenPair};
use crate::walk::{Provenance, StochasticMatrix};
use crate::WeightedGraph;

/// A finite sequence of weight matrices on a shared vertex set.
/// Matrices are produced on demand so long schedules stay cheap.
pub trait Schedule: Sync {
    /// Number of matrices `T`.
    fn steps(&self) -> usize;
    fn sites(&self) -> usize;
    /// `M^t`; indices past the end are clamped to `M^{T−1}`.
    fn matrix(&self, t: usize) -> Result<WeightedGraph>;
}

/// Explicitly stored schedule.
#[derive(Debug, Clone)]
pub struct MatrixSchedule {
    pub matrices: Vec<WeightedGraph>,
}

impl MatrixSchedule {
    pub fn new(matrices: Vec<WeightedGraph>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidParameter("empty schedule".into()));
        };
        let n = first.n();
        if let Some(g) = matrices.iter().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
        Ok(MatrixSchedule { matrices })
    }

    pub fn constant(graph: WeightedGraph, steps: usize) -> Result<Self> {
        Self::new(vec![graph; steps.max(1)])
    }

    /// `M'^s = (M^{T−1−s})ᵀ`.
    pub fn reverse_transpose(&self) -> Self {
        MatrixSchedule { matrices: self.matrices.iter().rev().map(|g| g.transpose()).collect() }
    }
}

impl Schedule for MatrixSchedule {
    fn steps(&self) -> usize {
        self.matrices.len()
    }
    fn sites(&self) -> usize {
        self.matrices[0].n()
    }
    fn matrix(&self, t: usize) -> Result<WeightedGraph> {
        Ok(self.matrices[t.min(self.matrices.len() - 1)].clone())
    }
}

/// Boltzmann lattice on a 1D cyclic grid whose potential is interpolated
/// linearly between keyframes and held constant outside them.
#[derive(Debug, Clone)]
pub struct PotentialSchedule {
    pub grid: Grid1d,
    pub params: PhysicalParams,
    /// `(t, V)` pairs with strictly increasing `t`.
    pub keyframes: Vec<(usize, Vec<f64>)>,
    pub steps: usize,
}

impl PotentialSchedule {
    pub fn new(grid: Grid1d, params: PhysicalParams, keyframes: Vec<(usize, Vec<f64>)>, steps: usize) -> Result<Self> {
        if keyframes.is_empty() || steps == 0 {
            return Err(Error::InvalidParameter("schedule needs keyframes and at least one step".into()));
        }
        if keyframes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("keyframe times must increase".into()));
        }
        let n = grid.spec.sites();
        if let Some(k) = keyframes.iter().find(|k| k.1.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: k.1.len() });
        }
        Ok(PotentialSchedule { grid, params, keyframes, steps })
    }

    pub fn potential(&self, t: usize) -> Vec<f64> {
        let k = &self.keyframes;
        if t <= k[0].0 {
            return k[0].1.clone();
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (&w[0], &w[1]);
            if t <= *t1 {
                let s = (t - t0) as f64 / (t1 - t0) as f64;
                return v0.iter().zip(v1).map(|(a, b)| a + s * (b - a)).collect();
            }
        }
        k[k.len() - 1].1.clone()
    }

    pub fn epsilon(&self) -> f64 {
        self.grid.spec.epsilon(&self.params)
    }
}

impl Schedule for PotentialSchedule {
    fn steps(&self) -> usize {
        self.steps
    }
    fn sites(&self) -> usize {
        self.grid.spec.sites()
    }
    fn matrix(&self, t: usize) -> Result<WeightedGraph> {
        boltzmann_lattice(&self.grid.spec, &self.potential(t.min(self.steps - 1)), &self.params)
    }
}

/// Double well `h((x/a)² − 1)² + τ x` on the ring `[−4, 4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellSwitch {
    pub sites: usize,
    pub steps: usize,
    /// Tilt changes linearly from `tilt_start` to `tilt_end` over `[switch_start, switch_end]`.
    pub switch_start: usize,
    pub switch_end: usize,
    pub height: f64,
    pub half_separation: f64,
    pub tilt_start: f64,
    pub tilt_end: f64,
}

impl WellSwitch {
    pub fn new(sites: usize, steps: usize, switch_start: usize, switch_end: usize) -> Self {
        WellSwitch {
            sites,
            steps,
            switch_start,
            switch_end,
            height: 1.0,
            half_separation: 1.5,
            tilt_start: 0.5,
            tilt_end: -0.5,
        }
    }

    pub fn potential(&self, x: f64, tilt: f64) -> f64 {
        self.height * ((x / self.half_separation).powi(2) - 1.0).powi(2) + tilt * x
    }

    pub fn schedule(&self, params: &PhysicalParams) -> Result<PotentialSchedule> {
        if !(self.switch_start < self.switch_end && self.switch_end < self.steps) {
            return Err(Error::InvalidParameter("switch window must lie inside the schedule".into()));
        }
        let grid = Grid1d::new(-4.0, 4.0, self.sites)?;
        let before = grid.sample(&|x| self.potential(x, self.tilt_start));
        let after = grid.sample(&|x| self.potential(x, self.tilt_end));
        PotentialSchedule::new(grid, *params, vec![(self.switch_start, before), (self.switch_end, after)], self.steps)
    }
}

/// `φ^t, ψ^t` for `t = 0..=T` and `λ^t` for `t = 0..T`.
#[derive(Debug, Clone)]
pub struct AmplitudePair {
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

impl AmplitudePair {
    pub fn steps(&self) -> usize {
        self.lambda.len()
    }

    pub fn density(&self, t: usize) -> Vec<f64> {
        self.phi[t].iter().zip(&self.psi[t]).map(|(a, b)| a * b).collect()
    }

    /// `max_t |Σ_i φ^t_i ψ^t_i − 1|`
    pub fn normalization_error(&self) -> f64 {
        (0..=self.steps()).map(|t| (dot(&self.phi[t], &self.psi[t]) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `λ^t → c λ^t`, `ψ^t → c^t ψ^t`, `φ^t → c^{−t} φ^t`. Densities and
    /// transition matrices are unchanged.
    pub fn regauge(&self, c: f64) -> AmplitudePair {
        let scale = |v: &[f64], f: f64| v.iter().map(|x| x * f).collect::<Vec<_>>();
        AmplitudePair {
            psi: self.psi.iter().enumerate().map(|(t, v)| scale(v, c.powi(t as i32))).collect(),
            phi: self.phi.iter().enumerate().map(|(t, v)| scale(v, c.powi(-(t as i32)))).collect(),
            lambda: self.lambda.iter().map(|l| l * c).collect(),
        }
    }
}

/// Backward sweep `x^t = A^t x^{t+1} / ‖·‖∞` from `start`, returning the
/// unit-∞-norm vectors and the norms.
fn sweep(
    steps: usize,
    start: Vec<f64>,
    op: &(dyn Fn(usize) -> Result<CsrMatrix> + Sync),
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs = vec![Vec::new(); steps + 1];
    let mut norms = vec![0.0; steps];
    let s = norm_inf(&start);
    xs[steps] = start.iter().map(|v| v / s).collect();
    for t in (0..steps).rev() {
        let y = op(t)?.mul_vec(&xs[t + 1]);
        let m = norm_inf(&y);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::NonPositiveAmplitude { t, vertex: 0 });
        }
        norms[t] = m;
        xs[t] = y.into_iter().map(|v| v / m).collect();
    }
    Ok((xs, norms))
}

/// Both amplitude sweeps, then a balanced rescale so that `Σφ^tψ^t = 1` and
/// `‖φ^t‖₂ = ‖ψ^t‖₂` at every `t`. Reversing time and transposing every
/// matrix exchanges the roles of `φ` and `ψ` with identical arithmetic.
pub fn solve_amplitudes(schedule: &dyn Schedule) -> Result<AmplitudePair> {
    let steps = schedule.steps();
    if steps == 0 {
        return Err(Error::InvalidParameter("empty schedule".into()));
    }
    let n = schedule.sites();
    let opts = EigenOptions::default();
    let first = dominant_eigenpair(&schedule.matrix(0)?, &opts)?;
    let last = dominant_eigenpair(&schedule.matrix(steps - 1)?, &opts)?;

    let right = |t: usize| -> Result<CsrMatrix> { Ok(schedule.matrix(t)?.csr().clone()) };
    // The forward sweep is a backward sweep in reversed time on transposes.
    let left = |s: usize| -> Result<CsrMatrix> { Ok(schedule.matrix(steps - 1 - s)?.transpose().csr().clone()) };
    let (r, l) = rayon::join(|| sweep(steps, last.psi.clone(), &right), || sweep(steps, first.phi.clone(), &left));
    let (psi_hat, mu) = r?;
    let (mut phi_rev, nu_rev) = l?;
    phi_rev.reverse();
    let phi_hat = phi_rev;
    let nu: Vec<f64> = nu_rev.into_iter().rev().collect();

    for (t, (p, q)) in psi_hat.iter().zip(&phi_hat).enumerate() {
        if let Some(i) = (0..n).find(|&i| !(p[i] > 0.0 && q[i] > 0.0)) {
            return Err(Error::NonPositiveAmplitude { t, vertex: i });
        }
    }

    let mut a = vec![0.0; steps + 1];
    let mut b = vec![0.0; steps + 1];
    for t in 0..=steps {
        let c = 1.0 / dot(&phi_hat[t], &psi_hat[t]);
        let (np, nf) = (norm2(&psi_hat[t]), norm2(&phi_hat[t]));
        a[t] = (c * (nf / np)).sqrt();
        b[t] = (c * (np / nf)).sqrt();
    }
    let lambda: Vec<f64> = (0..steps)
        .map(|t| {
            let from_psi = mu[t] * (a[t + 1] / a[t]);
            let from_phi = nu[t] * (b[t] / b[t + 1]);
            (from_psi * from_phi).sqrt()
        })
        .collect();
    let psi = psi_hat.iter().zip(&a).map(|(v, s)| v.iter().map(|x| x * s).collect()).collect();
    let phi = phi_hat.iter().zip(&b).map(|(v, s)| v.iter().map(|x| x * s).collect()).collect();
    Ok(AmplitudePair { phi, psi, lambda })
}

/// `S^t_ij = M^t_ij ψ^{t+1}_j / (λ^t ψ^t_i)`, rows normalized through
/// `(M^t ψ^{t+1})_i`. The attached density is `π^t`.
pub fn timedep_stochastic(pair: &AmplitudePair, schedule: &dyn Schedule, t: usize) -> Result<StochasticMatrix> {
    if t >= pair.steps() {
        return Err(Error::IndexOutOfRange { index: t, n: pair.steps() });
    }
    let m = schedule.matrix(t)?;
    let next = &pair.psi[t + 1];
    let mpsi = m.mul_vec(next);
    let trip: Vec<_> = m.edges().into_iter().map(|(i, j, w)| (i, j, w * next[j] / mpsi[i])).collect();
    Ok(StochasticMatrix {
        matrix: CsrMatrix::from_triplets(m.n(), &trip),
        stationary: pair.density(t),
        provenance: Provenance::TimeDependent { t },
    })
}

/// Closed-form segment propagator over `[t, s)`:
/// `(M^t⋯M^{s−1}) / (λ^t⋯λ^{s−1}) · ψ^s_j / ψ^t_i`.
pub fn segment_propagator(pair: &AmplitudePair, schedule: &dyn Schedule, t: usize, s: usize) -> Result<DenseMatrix> {
    if !(t <= s && s <= pair.steps()) {
        return Err(Error::InvalidParameter(format!("bad segment [{t}, {s})")));
    }
    let n = schedule.sites();
    let mut prod = DenseMatrix::identity(n);
    for u in t..s {
        let mut m = schedule.matrix(u)?.to_dense();
        m.scale(1.0 / pair.lambda[u]);
        prod = prod.mul(&m);
    }
    let (pt, ps) = (&pair.psi[t], &pair.psi[s]);
    Ok(DenseMatrix::from_fn(n, n, |i, j| prod.get(i, j) * ps[j] / pt[i]))
}

/// Stationary eigenpair of the frozen matrix `M^t`.
pub fn adiabatic_reference(schedule: &dyn Schedule, t: usize) -> Result<EigenPair> {
    dominant_eigenpair(&schedule.matrix(t)?, &EigenOptions::default())
}

/// `‖π^t − π^t_frozen‖₁` at `t = 0, stride, 2·stride, …` and at `T`.
pub fn adiabatic_gaps(pair: &AmplitudePair, schedule: &dyn Schedule, stride: usize) -> Result<Vec<(usize, f64)>> {
    let steps = pair.steps();
    let mut ts: Vec<usize> = (0..=steps).step_by(stride.max(1)).collect();
    if ts.last() != Some(&steps) {
        ts.push(steps);
    }
    ts.into_iter()
        .map(|t| {
            let frozen = adiabatic_reference(schedule, t)?.stationary();
            Ok((t, l1_distance(&pair.density(t), &frozen)))
        })
        .collect()
}

/// Discrete probability current on the bonds `x → x+1` of a 1D cyclic
/// lattice, `J = α(Φ_x Ψ_{x+1} − Φ_{x+1} Ψ_x)/δ` with `Φ = φ/√δ`, `Ψ = ψ/√δ`.
pub fn discrete_current(pair: &AmplitudePair, schedule: &PotentialSchedule, t: usize) -> Vec<f64> {
    let n = schedule.sites();
    let delta = schedule.grid.spec.delta;
    let alpha = schedule.params.alpha;
    let (phi, psi) = (&pair.phi[t], &pair.psi[t]);
    (0..n)
        .map(|x| {
            let y = (x + 1) % n;
            alpha * (phi[x] * psi[y] - phi[y] * psi[x]) / (delta * delta)
        })
        .collect()
}

/// Per-site `π^{t+1} − π^t + ε (J_{x+1/2} − J_{x−1/2})`.
pub fn continuity_residual(pair: &AmplitudePair, schedule: &PotentialSchedule, t: usize) -> Vec<f64> {
    let n = schedule.sites();
    let eps = schedule.epsilon();
    let j = discrete_current(pair, schedule, t);
    let (now, next) = (pair.density(t), pair.density(t + 1));
    (0..n).map(|x| next[x] - now[x] + eps * (j[x] - j[(x + n - 1) % n])).collect()
}

#[derive(Debug, Clone, Default)]
pub struct ObservableTrace {
    /// Physical time `t ε`.
    pub time: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub mean_grad_v: Vec<f64>,
    pub mean_x2: Vec<f64>,
    pub var_x: Vec<f64>,
    pub p_dag_p: Vec<f64>,
    /// `‖π^t S^t − π^{t+1}‖₁`, and `|Σπ^T − 1|` in the last slot.
    pub density_error: Vec<f64>,
}

impl ObservableTrace {
    /// Forward-difference `d⟨x⟩/dt`, one entry per step.
    pub fn velocity(&self) -> Vec<f64> {
        self.mean_x.windows(2).zip(self.time.windows(2)).map(|(x, t)| (x[1] - x[0]) / (t[1] - t[0])).collect()
    }

    /// Five-point `d²⟨x⟩/dt²` at `t = 2..T−1` (uniform time step assumed).
    pub fn acceleration(&self) -> Vec<(usize, f64)> {
        let f = &self.mean_x;
        if f.len() < 5 {
            return Vec::new();
        }
        let h = self.time[1] - self.time[0];
        (2..f.len() - 2)
            .map(|t| (t, (-f[t + 2] + 16.0 * f[t + 1] - 30.0 * f[t] + 16.0 * f[t - 1] - f[t - 2]) / (12.0 * h * h)))
            .collect()
    }
}

/// Moments of one time slice on a 1D grid; `p = 2mα∇`, central differences
/// for `⟨p⟩`, forward differences for `⟨p†p⟩`.
#[derive(Debug, Clone, Copy)]
pub struct SliceMoments {
    pub mean_x: f64,
    pub mean_x2: f64,
    pub mean_p: f64,
    pub p_dag_p: f64,
}

pub fn slice_moments(phi: &[f64], psi: &[f64], points: &[f64], delta: f64, params: &PhysicalParams) -> SliceMoments {
    let n = phi.len();
    let k = 2.0 * params.mass * params.alpha;
    let (mut mx, mut mx2, mut mp, mut pp) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (l, r) = ((i + n - 1) % n, (i + 1) % n);
        let rho = phi[i] * psi[i];
        mx += points[i] * rho;
        mx2 += points[i] * points[i] * rho;
        mp += phi[i] * (psi[r] - psi[l]) / (2.0 * delta);
        pp += (phi[r] - phi[i]) * (psi[r] - psi[i]) / (delta * delta);
    }
    SliceMoments { mean_x: mx, mean_x2: mx2, mean_p: k * mp, p_dag_p: k * k * pp }
}

pub fn observable_trace(pair: &AmplitudePair, schedule: &PotentialSchedule) -> Result<ObservableTrace> {
    let steps = pair.steps();
    let grid = &schedule.grid;
    let delta = grid.spec.delta;
    let eps = schedule.epsilon();
    let n = grid.spec.sites();
    let mut tr = ObservableTrace::default();
    for t in 0..=steps {
        let m = slice_moments(&pair.phi[t], &pair.psi[t], &grid.points, delta, &schedule.params);
        let v = schedule.potential(t.min(steps - 1));
        let rho = pair.density(t);
        let grad: f64 = (0..n).map(|i| rho[i] * (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * delta)).sum();
        tr.time.push(t as f64 * eps);
        tr.mean_x.push(m.mean_x);
        tr.mean_x2.push(m.mean_x2);
        tr.var_x.push(m.mean_x2 - m.mean_x * m.mean_x);
        tr.mean_p.push(m.mean_p);
        tr.p_dag_p.push(m.p_dag_p);
        tr.mean_grad_v.push(grad);
        if t < steps {
            let s = timedep_stochastic(pair, schedule, t)?;
            tr.density_error.push(l1_distance(&s.evolve(&rho), &pair.density(t + 1)));
        } else {
            tr.density_error.push((rho.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(tr)
}

#[derive(Debug, Clone, Copy)]
pub struct Uncertainty {
    /// `√⟨(x−⟨x⟩)²⟩ · √⟨p†p⟩`.
    pub product: f64,
    /// `|⟨(x−⟨x⟩)ψ | pψ⟩|`: the Cauchy–Schwarz floor for the discrete
    /// operators, `ħ/2` up to `O(δ²)`.
    pub discrete_bound: f64,
}

/// Uncertainty product of an adiabatic slice (`φ = ψ`).
pub fn uncertainty_product(
    phi: &[f64],
    psi: &[f64],
    points: &[f64],
    delta: f64,
    params: &PhysicalParams,
) -> Result<Uncertainty> {
    let scale = norm_inf(psi);
    let gap = phi.iter().zip(psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    if gap > 1e-6 {
        return Err(Error::NotAdiabatic { gap });
    }
    let n = psi.len();
    let m = slice_moments(phi, psi, points, delta, params);
    let sx = (m.mean_x2 - m.mean_x * m.mean_x).max(0.0).sqrt();
    let k = 2.0 * params.mass * params.alpha;
    let cross: f64 = (0..n)
        .map(|i| {
            let r = (i + 1) % n;
            (points[i] - m.mean_x) * psi[i] * k * (psi[r] - psi[i]) / delta
        })
        .sum();
    Ok(Uncertainty { product: sx * m.p_dag_p.max(0.0).sqrt(), discrete_bound: cross.abs() })
}

/// Uncertainty of the stationary state of a 1D Boltzmann lattice.
pub fn stationary_uncertainty(grid: &Grid1d, potential: &[f64], params: &PhysicalParams) -> Result<Uncertainty> {
    let g = boltzmann_lattice(&grid.spec, potential, params)?;
    let pair = dominant_eigenpair(&g, &EigenOptions::default())?;
    let s = norm2(&pair.psi);
    let psi: Vec<f64> = pair.psi.iter().map(|v| v / s).collect();
    let phi: Vec<f64> = pair.phi.iter().map(|v| v / s).collect();
    let d = grid.spec.delta;
    uncertainty_product(&phi, &psi, &grid.points, d, params)
}

/// Pearson correlation of two equally long series.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
