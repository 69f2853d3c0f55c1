//! Vector p-norms, duality maps, and lower-bound estimation of `p → p`
//! operator norms by the Boyd/Higham power iteration.
//!
//! The estimator works with unweighted norms. On the cyclic model every grid
//! point carries the same weight `h^{1/p}`, so for a square operator the
//! weight appears on both sides of `‖Ax‖_p / ‖x‖_p` and cancels: the
//! weighted and unweighted `p → p` norms of `S` and `S^{-1}` coincide. Maps
//! into coefficient space (which is unweighted) pick up a factor `h^{-1/p}`,
//! applied by the caller.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{LinearMap, LuFactor, LuInverse, Matrix};
use crate::model::{conjugate_exponent, FrameBounds, GridVector};

/// `(h Σ_j |x_j|^p)^{1/p}`.
pub fn vector_pnorm(x: &GridVector, p: f64) -> Result<f64> {
    conjugate_exponent(p)?;
    Ok(x.h().powf(1.0 / p) * raw_pnorm(x.values(), p))
}

/// Unweighted `(Σ |x_j|^p)^{1/p}`, scaled to avoid overflow.
pub fn raw_pnorm(x: &[Complex64], p: f64) -> f64 {
    let max = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let s: f64 = x.iter().map(|z| (z.norm() / max).powf(p)).sum();
    max * s.powf(1.0 / p)
}

/// `conj(sign(x_j)) |x_j|^{p-1}` normalized so that `Σ y_j x_j = ‖x‖_p` and
/// `‖y‖_q = 1` (unweighted). At `p = 2` this is `conj(x)/‖x‖₂`.
pub fn dual_vector(x: &GridVector, p: f64) -> Result<GridVector> {
    conjugate_exponent(p)?;
    if x.values().iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(LabError::Domain("dual vector of the zero vector".into()));
    }
    Ok(GridVector::new(
        sign_power(x.values(), p).into_iter().map(|z| z.conj()).collect(),
        x.h(),
    ))
}

/// `sign(x_j) |x_j|^{p-1}` scaled to unit `q`-norm. Unlike [`dual_vector`]
/// the phase is not conjugated; this is the form the iteration feeds to `A^H`.
fn sign_power(x: &[Complex64], p: f64) -> Vec<Complex64> {
    let norm = raw_pnorm(x, p);
    if norm == 0.0 {
        return vec![Complex64::new(0.0, 0.0); x.len()];
    }
    x.iter()
        .map(|z| {
            let r = z.norm();
            if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (z / r) * (r / norm).powf(p - 1.0)
            }
        })
        .collect()
}

/// A certified lower bound `‖A w‖_p / ‖w‖_p` on `‖A‖_{p→p}` and its witness.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

impl NormEstimate {
    /// Sentinel for a numerically singular operator whose inverse is unbounded.
    pub fn unbounded() -> Self {
        Self {
            value: f64::INFINITY,
            witness: Vec::new(),
            iterations: 0,
            converged: true,
        }
    }
}

/// Power-iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorOptions {
    /// Number of all-ones and seeded random start vectors. The best unit
    /// vector (small operators) and, at `p = 2`, a Lanczos vector are added.
    pub restarts: usize,
    /// Relative change in the ratio below which a run stops.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
        }
    }
}

fn start_vectors(n: usize, opts: &EstimatorOptions) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![Complex64::new(1.0, 0.0); n]];
    for _ in 1..opts.restarts.max(1) {
        starts.push(
            (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        );
    }
    starts
}

/// Operators up to this input dimension also get the best unit vector as a start.
const COLUMN_PROBE_CAP: usize = 256;
/// Krylov dimension per Lanczos cycle for the `p = 2` start.
const LANCZOS_STEPS: usize = 64;
const LANCZOS_CYCLES: usize = 4;

/// Unit vector `e_j` maximizing `‖A e_j‖_p`. Exact for diagonal and
/// column-dominated operators, where power iteration from smooth starts can
/// stall next to a near-tie.
fn column_probe<A: LinearMap + ?Sized>(a: &A, p: f64) -> Vec<Complex64> {
    let n = a.dim_in();
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    let mut best = (0, -1.0);
    for j in 0..n {
        e[j] = Complex64::new(1.0, 0.0);
        let v = raw_pnorm(&a.apply(&e), p);
        if v > best.1 {
            best = (j, v);
        }
        e[j] = Complex64::new(0.0, 0.0);
    }
    e[best.0] = Complex64::new(1.0, 0.0);
    e
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Ritz vector for the top eigenvalue of `A^* A`, by restarted Lanczos with
/// full reorthogonalization. Power iteration alone converges like
/// `(σ₂/σ₁)²` per step, which is too slow when the top singular values nearly
/// coincide.
fn lanczos_start<A: LinearMap + ?Sized>(a: &A, seed: u64) -> Vec<Complex64> {
    let n = a.dim_in();
    let steps = n.min(LANCZOS_STEPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a2c_2057);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    for _ in 0..LANCZOS_CYCLES {
        let nv = dot(&v, &v).re.sqrt();
        if nv == 0.0 {
            break;
        }
        let mut basis = vec![v.iter().map(|z| z / nv).collect::<Vec<_>>()];
        let (mut alphas, mut betas) = (Vec::new(), Vec::new());
        loop {
            let j = basis.len() - 1;
            let mut w = a.apply_adjoint(&a.apply(&basis[j]));
            let alpha = dot(&basis[j], &w).re;
            alphas.push(alpha);
            for _ in 0..2 {
                for u in &basis {
                    let c = dot(u, &w);
                    w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
                }
            }
            let beta = dot(&w, &w).re.sqrt();
            let scale = alphas.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if basis.len() == steps || beta <= 1e-13 * scale {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|z| z / beta).collect());
        }
        let m = alphas.len();
        let t = DMatrix::<f64>::from_fn(m, m, |i, k| match i.abs_diff(k) {
            0 => alphas[i],
            1 => betas[i.min(k)],
            _ => 0.0,
        });
        let eig = t.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let theta = eig.eigenvalues[top];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (i, u) in basis.iter().enumerate() {
            let c = eig.eigenvectors[(i, top)];
            y.iter_mut().zip(u).for_each(|(yi, ui)| *yi += ui * c);
        }
        let by = a.apply_adjoint(&a.apply(&y));
        let res: f64 = by
            .iter()
            .zip(&y)
            .map(|(b, yi)| (b - yi * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        v = y;
        if res <= 1e-12 * theta.abs() {
            break;
        }
    }
    v
}

fn ratio<A: LinearMap + ?Sized>(a: &A, x: &[Complex64], p: f64) -> f64 {
    let nx = raw_pnorm(x, p);
    if nx == 0.0 {
        return 0.0;
    }
    raw_pnorm(&a.apply(x), p) / nx
}

struct Run {
    value: f64,
    witness: Vec<Complex64>,
    iterations: usize,
    converged: bool,
}

fn power_run<A: LinearMap + ?Sized>(a: &A, start: Vec<Complex64>, p: f64, q: f64, opts: &EstimatorOptions) -> Run {
    let n0 = raw_pnorm(&start, p);
    let mut x: Vec<Complex64> = if n0 == 0.0 {
        vec![Complex64::new(1.0, 0.0); start.len()]
    } else {
        start.iter().map(|z| z / n0).collect()
    };
    let mut best = Run {
        value: 0.0,
        witness: x.clone(),
        iterations: 0,
        converged: false,
    };
    let mut prev = f64::NAN;
    for it in 1..=opts.max_iter {
        best.iterations = it;
        let y = a.apply(&x);
        let gamma = raw_pnorm(&y, p) / raw_pnorm(&x, p);
        if gamma > best.value {
            best.value = gamma;
            best.witness = x.clone();
        }
        if gamma == 0.0 {
            // x lies in the kernel; another start may do better.
            best.converged = true;
            break;
        }
        if (gamma - prev).abs() <= opts.tol * gamma {
            best.converged = true;
            break;
        }
        prev = gamma;
        let z = a.apply_adjoint(&sign_power(&y, p));
        let next = sign_power(&z, q);
        if next.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            best.converged = true;
            break;
        }
        // sign_power(z, q) has unit p-norm since (q-1)(p-1) = 1.
        x = next;
    }
    // Report exactly what the witness attains.
    best.value = ratio(a, &best.witness, p);
    best
}

/// Estimates `‖A‖_{p→p}` from below, keeping the best of several restarts.
pub fn opnorm_estimate<A: LinearMap + ?Sized>(a: &A, p: f64, opts: &EstimatorOptions) -> Result<NormEstimate> {
    let q = conjugate_exponent(p)?;
    let n = a.dim_in();
    if n == 0 {
        return Err(LabError::Dimension("operator on an empty space".into()));
    }
    let mut starts = start_vectors(n, opts);
    if n <= COLUMN_PROBE_CAP {
        starts.insert(1, column_probe(a, p));
    }
    if p == 2.0 {
        starts.insert(1, lanczos_start(a, opts.seed));
    }
    let mut best: Option<Run> = None;
    let mut iterations = 0;
    for start in starts {
        let run = power_run(a, start, p, q, opts);
        iterations += run.iterations;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start vector");
    Ok(NormEstimate {
        value: best.value,
        witness: best.witness,
        iterations,
        converged: best.converged && a.reliable(),
    })
}

/// Estimates `‖A^{-1}‖_{p→p}` through LU solves.
///
/// Returns the `+∞` sentinel when a pivot falls below `pivot_rel · max|a_ij|`.
pub fn inverse_opnorm_estimate(
    matrix: &Matrix,
    p: f64,
    pivot_rel: f64,
    opts: &EstimatorOptions,
) -> Result<NormEstimate> {
    conjugate_exponent(p)?;
    let lu = LuFactor::new(matrix)?;
    if lu.is_singular(pivot_rel) {
        return Ok(NormEstimate::unbounded());
    }
    opnorm_estimate(&LuInverse(&lu), p, opts)
}

/// Smallest and largest singular values, i.e. the exact `p = 2` extremes.
pub fn exact_p2_extremes(matrix: &Matrix, cap: usize) -> Result<FrameBounds> {
    let len = matrix.nrows().max(matrix.ncols());
    if len > cap {
        return Err(LabError::CapExceeded { len, cap });
    }
    let sv = singular_values(matrix);
    let upper = sv.iter().cloned().fold(0.0, f64::max);
    let lower = if matrix.nrows() == matrix.ncols() {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    FrameBounds::new(lower.min(upper), upper)
}

/// Singular values via nalgebra's SVD.
pub fn singular_values(matrix: &Matrix) -> Vec<f64> {
    let m: DMatrix<Complex64> = matrix.clone();
    m.svd(false, false).singular_values.iter().cloned().collect()
}
