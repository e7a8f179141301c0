//! Dominant (Perron–Frobenius) eigenpairs and small symmetric spectra.
//!
//! Power iteration is the primary path and the only thing that certifies a
//! result. Aperiodic inputs get a restarted Krylov (Rayleigh–Ritz) starting
//! vector first: defected lattices with nearly equal localization regions
//! have spectral gaps far too small for plain power iteration from ones.
//! Left vectors are computed by running the same code on the explicit
//! transpose, so transposing a matrix swaps `ψ` and `φ` bit for bit.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{period, scc, WeightedGraph};
use crate::matrix::{dot, norm2, norm_inf, CsrMatrix};

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Right eigenvector, strictly positive.
    pub psi: Vec<f64>,
    /// Left eigenvector, scaled so that `φᵀψ = 1`.
    pub phi: Vec<f64>,
    /// `‖Mψ − λψ‖∞ / (λ ‖ψ‖∞)`.
    pub residual: f64,
    pub iterations: usize,
    pub period: usize,
}

impl EigenPair {
    /// `π_i = φ_i ψ_i`.
    pub fn stationary(&self) -> Vec<f64> {
        self.phi.iter().zip(&self.psi).map(|(a, b)| a * b).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Sweeps without meaningful residual progress before giving up.
    pub plateau_window: usize,
    /// Iterate `M^p` on one cyclic class of a periodic graph. When off, a
    /// shift `M + cI` is used instead.
    pub periodic_components: bool,
    pub krylov_warm_start: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-12,
            max_iters: 2_000_000,
            plateau_window: 200,
            periodic_components: true,
            krylov_warm_start: true,
        }
    }
}

struct PowerResult {
    vector: Vec<f64>,
    iterations: usize,
}

/// Normalized power iteration `x ← A x / ‖A x‖∞`.
fn power_iterate(
    apply: &dyn Fn(&[f64], &mut [f64]),
    start: Vec<f64>,
    opts: &EigenOptions,
) -> Result<PowerResult> {
    let n = start.len();
    let mut x = start;
    let s = norm_inf(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut y = vec![0.0; n];
    let mut best_prev = f64::INFINITY;
    let mut best_window = f64::INFINITY;
    for it in 1..=opts.max_iters {
        apply(&x, &mut y);
        let lam = norm_inf(&y);
        if lam == 0.0 || !lam.is_finite() {
            return Err(Error::NoConvergence { iterations: it, plateau: f64::NAN });
        }
        let mut res: f64 = 0.0;
        for i in 0..n {
            let yi = y[i] / lam;
            res = res.max((yi - x[i]).abs());
            x[i] = yi;
        }
        if res <= 0.25 * opts.tol {
            return Ok(PowerResult { vector: x, iterations: it });
        }
        best_window = best_window.min(res);
        if it % opts.plateau_window == 0 {
            if best_window > 0.999 * best_prev {
                return Err(Error::NoConvergence { iterations: it, plateau: best_window });
            }
            best_prev = best_prev.min(best_window);
            best_window = f64::INFINITY;
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iters, plateau: best_prev.min(best_window) })
}

/// Restarted Rayleigh–Ritz on a Krylov basis. Returns the best approximation
/// of the eigenvector belonging to the rightmost Ritz value that it reached.
fn krylov_top(csr: &CsrMatrix, start: &[f64], target: f64, symmetric: bool) -> Vec<f64> {
    let n = csr.n;
    let kmax = n.min(48);
    let keep = if symmetric { (kmax / 3).max(1) } else { 1 };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut cand: Vec<f64> = start.to_vec();
    let mut best = start.to_vec();
    for _restart in 0..400 {
        let mut exhausted = false;
        while basis.len() < kmax {
            let scale = norm2(&cand);
            let mut q = cand.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&q, b);
                    q.iter_mut().zip(b).for_each(|(qi, bi)| *qi -= c * bi);
                }
            }
            let nq = norm2(&q);
            if !(nq > 1e-10 * scale) {
                exhausted = true;
                break;
            }
            q.iter_mut().for_each(|v| *v /= nq);
            let w = csr.mul_vec(&q);
            cand = w.clone();
            basis.push(q);
            images.push(w);
        }
        let k = basis.len();
        if k == 0 {
            return best;
        }
        let Some(ritz) = ritz_pairs(&basis, &images, symmetric, keep) else {
            return best;
        };
        let combine = |set: &[Vec<f64>], y: &[f64]| {
            let mut out = vec![0.0; n];
            for (v, c) in set.iter().zip(y) {
                out.iter_mut().zip(v).for_each(|(o, vi)| *o += c * vi);
            }
            out
        };
        let (theta, ref y0) = ritz[0];
        let u = combine(&basis, y0);
        let au = combine(&images, y0);
        let r: Vec<f64> = au.iter().zip(&u).map(|(a, b)| a - theta * b).collect();
        let rel = norm_inf(&r) / (theta.abs() * norm_inf(&u)).max(f64::MIN_POSITIVE);
        best = u;
        if rel <= target || exhausted {
            return best;
        }
        let new_basis: Vec<Vec<f64>> = ritz.iter().map(|(_, y)| combine(&basis, y)).collect();
        let new_images: Vec<Vec<f64>> = ritz.iter().map(|(_, y)| combine(&images, y)).collect();
        basis = new_basis;
        images = new_images;
        cand = r;
    }
    best
}

/// Up to `keep` Ritz pairs, rightmost first, with coefficient vectors of unit
/// length in the (orthonormal) basis.
fn ritz_pairs(
    basis: &[Vec<f64>],
    images: &[Vec<f64>],
    symmetric: bool,
    keep: usize,
) -> Option<Vec<(f64, Vec<f64>)>> {
    let k = basis.len();
    if symmetric {
        let h = DMatrix::from_fn(k, k, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        return Some(
            order[..keep.min(k)]
                .iter()
                .map(|&c| (eig.eigenvalues[c], eig.eigenvectors.column(c).iter().copied().collect()))
                .collect(),
        );
    }
    let h = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &images[j]));
    let schur = h.clone().try_schur(1e-15, 10_000)?;
    let theta = schur
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.norm().max(1e-300))
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !theta.is_finite() {
        return None;
    }
    // Inverse iteration on the small projected matrix.
    let shift = theta + 1e-10 * theta.abs().max(1e-300);
    let lu = (h - DMatrix::identity(k, k) * shift).lu();
    let mut y = nalgebra::DVector::from_element(k, 1.0);
    for _ in 0..3 {
        y = lu.solve(&y)?;
        let nrm = y.norm();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return None;
        }
        y /= nrm;
    }
    Some(vec![(theta, y.iter().copied().collect())])
}

fn finalize(
    graph: &WeightedGraph,
    mut psi: Vec<f64>,
    mut phi: Vec<f64>,
    iterations: usize,
    period: usize,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let np = norm2(&psi);
    psi.iter_mut().for_each(|v| *v /= np);
    let nf = norm2(&phi);
    phi.iter_mut().for_each(|v| *v /= nf);
    let s = dot(&phi, &psi).sqrt();
    psi.iter_mut().for_each(|v| *v /= s);
    phi.iter_mut().for_each(|v| *v /= s);
    let mpsi = graph.mul_vec(&psi);
    let lambda = dot(&phi, &mpsi) / dot(&phi, &psi);
    let mut r: f64 = 0.0;
    for i in 0..psi.len() {
        r = r.max((mpsi[i] - lambda * psi[i]).abs());
    }
    let residual = r / (lambda * norm_inf(&psi));
    if !(residual <= opts.tol) {
        return Err(Error::NoConvergence { iterations, plateau: residual });
    }
    Ok(EigenPair { lambda, psi, phi, residual, iterations, period })
}

/// Perron–Frobenius eigenpair of a strongly connected nonnegative matrix.
pub fn dominant_eigenpair(graph: &WeightedGraph, opts: &EigenOptions) -> Result<EigenPair> {
    let n = graph.n();
    let comps = scc(graph);
    if n == 0 || comps.count() != 1 || graph.edge_count() == 0 {
        return Err(Error::NotStronglyConnected { components: comps.count().max(n) });
    }
    let per = period(graph)?;
    let csr = graph.csr();
    let symmetric = csr.is_symmetric();

    if per.period > 1 && opts.periodic_components {
        let p = per.period;
        let c0: Vec<f64> = per.classes.iter().map(|&c| if c == 0 { 1.0 } else { 0.0 }).collect();
        let right = |x: &[f64], y: &mut [f64]| {
            let mut t = x.to_vec();
            for _ in 0..p {
                csr.mul_vec_into(&t, y);
                t.copy_from_slice(y);
            }
        };
        let tr = csr.transpose();
        let left = |x: &[f64], y: &mut [f64]| {
            let mut t = x.to_vec();
            for _ in 0..p {
                tr.mul_vec_into(&t, y);
                t.copy_from_slice(y);
            }
        };
        let r = power_iterate(&right, c0.clone(), opts)?;
        let psi = spread_over_classes(&r.vector, p, |x| csr.mul_vec(x), &right);
        let (phi, iters) = if symmetric {
            (psi.clone(), r.iterations)
        } else {
            let l = power_iterate(&left, c0, opts)?;
            let phi = spread_over_classes(&l.vector, p, |x| tr.mul_vec(x), &left);
            (phi, r.iterations + l.iterations)
        };
        return finalize(graph, psi, phi, iters, p, opts);
    }

    let shift = if per.period > 1 {
        1e-3 * csr.row_sums().into_iter().fold(0.0, f64::max)
    } else {
        0.0
    };
    let right = |x: &[f64], y: &mut [f64]| {
        csr.mul_vec_into(x, y);
        if shift != 0.0 {
            y.iter_mut().zip(x).for_each(|(a, b)| *a += shift * b);
        }
    };
    let warm = |op: &CsrMatrix| -> Vec<f64> {
        let ones = vec![1.0; n];
        if !opts.krylov_warm_start || n <= 2 || shift != 0.0 {
            return ones;
        }
        let u = krylov_top(op, &ones, opts.tol * 1e-2, symmetric);
        let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let w: Vec<f64> = u.iter().map(|v| (sign * v).max(0.0)).collect();
        if norm_inf(&w) > 0.0 && w.iter().all(|v| v.is_finite()) { w } else { ones }
    };
    let r = power_iterate(&right, warm(csr), opts)?;
    let (phi, iters) = if symmetric {
        (r.vector.clone(), r.iterations)
    } else {
        let t = csr.transpose();
        let left = |x: &[f64], y: &mut [f64]| {
            t.mul_vec_into(x, y);
            if shift != 0.0 {
                y.iter_mut().zip(x).for_each(|(a, b)| *a += shift * b);
            }
        };
        let l = power_iterate(&left, warm(&t), opts)?;
        (l.vector, r.iterations + l.iterations)
    };
    finalize(graph, r.vector, phi, iters, per.period, opts)
}

/// `ψ = Σ_{j<p} M^j ψ⁰ / λ^j` from a class-supported eigenvector of `M^p`.
fn spread_over_classes(
    v0: &[f64],
    p: usize,
    step: impl Fn(&[f64]) -> Vec<f64>,
    full: &dyn Fn(&[f64], &mut [f64]),
) -> Vec<f64> {
    let mut y = vec![0.0; v0.len()];
    full(v0, &mut y);
    let mu = norm_inf(&y) / norm_inf(v0);
    let lambda = mu.powf(1.0 / p as f64);
    let mut acc = v0.to_vec();
    let mut cur = v0.to_vec();
    for _ in 1..p {
        cur = step(&cur);
        cur.iter_mut().for_each(|v| *v /= lambda);
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += c);
    }
    acc
}

/// Leading eigenpairs of a small symmetric matrix in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Orthonormal; left and right vectors coincide.
    pub vectors: Vec<Vec<f64>>,
}

pub const SMALL_SPECTRUM_LIMIT: usize = 2048;

/// Householder tridiagonalization plus implicit QL, via `nalgebra`.
pub fn small_spectrum(graph: &WeightedGraph, k: usize) -> Result<Spectrum> {
    let n = graph.n();
    if n > SMALL_SPECTRUM_LIMIT {
        return Err(Error::TooLarge { size: n, limit: SMALL_SPECTRUM_LIMIT });
    }
    if !graph.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let dense = graph.to_dense();
    let m = DMatrix::from_row_slice(n, n, &dense.data);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = k.min(n);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &c in &order[..k] {
        values.push(eig.eigenvalues[c]);
        let mut v: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, c)]).collect();
        let pivot = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
        let total: f64 = v.iter().sum();
        let flip = if total.abs() > 1e-9 { total < 0.0 } else { pivot < 0.0 };
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    Ok(Spectrum { values, vectors })
}
