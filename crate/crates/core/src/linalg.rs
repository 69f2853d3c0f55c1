//! Linear maps on complex vectors: dense matrices, LU-based inverses and a
//! restarted GMRES inverse for operators that are only available matrix-free.
//!
//! Adjoints are taken with respect to the unweighted dot product
//! `⟨u, v⟩ = Σ conj(u_j) v_j`.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LabError, Result};

pub type Matrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A linear operator together with its adjoint.
pub trait LinearMap: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;

    /// False once an inner solve has failed to reach its tolerance.
    fn reliable(&self) -> bool {
        true
    }
}

impl LinearMap for Matrix {
    fn dim_in(&self) -> usize {
        self.ncols()
    }

    fn dim_out(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.nrows()];
        for (j, xj) in x.iter().enumerate() {
            if *xj == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column(j).iter()) {
                *o += a * xj;
            }
        }
        out
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.ncols())
            .map(|j| self.column(j).iter().zip(y).map(|(a, yi)| a.conj() * yi).sum())
            .collect()
    }
}

/// Largest entry magnitude.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `PA = LU` with partial pivoting, stored compactly.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
    min_pivot: f64,
    scale: f64,
}

impl LuFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(LabError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let scale = max_abs(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].norm());
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    piv = i;
                    best = v;
                }
            }
            min_pivot = min_pivot.min(best);
            if piv != k {
                lu.swap_rows(k, piv);
                perm.swap(k, piv);
            }
            if best == 0.0 {
                continue;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        if n == 0 {
            min_pivot = 0.0;
        }
        Ok(Self {
            lu,
            perm,
            min_pivot,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Numerically singular when some pivot falls below `rel · max|a_ij|`.
    pub fn is_singular(&self, rel: f64) -> bool {
        self.scale == 0.0 || self.min_pivot < rel * self.scale
    }

    /// Solves `A x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A^H x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        // A^H = U^H L^H P
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(j, i)].conj() * z[j];
            }
            z[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)].conj() * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![ZERO; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// `A^{-1}` realized through an LU factorization.
pub struct LuInverse<'a>(pub &'a LuFactor);

impl LinearMap for LuInverse<'_> {
    fn dim_in(&self) -> usize {
        self.0.dim()
    }

    fn dim_out(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.solve(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.0.solve_adjoint(y)
    }
}

/// Settings for [`gmres`].
#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_restarts: usize,
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 60,
            max_restarts: 50,
            rel_tol: 1e-12,
        }
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Restarted GMRES for `op(x) = b` with a zero initial guess.
///
/// Returns the iterate and whether the relative residual reached `rel_tol`.
pub fn gmres<F>(op: F, b: &[Complex64], opts: GmresOptions) -> (Vec<Complex64>, bool)
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let mut x = vec![ZERO; n];
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return (x, true);
    }
    let target = opts.rel_tol * b_norm;
    let m = opts.restart.min(n).max(1);
    for _ in 0..opts.max_restarts {
        let ax = op(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= target {
            return (x, true);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        // Hessenberg columns, rotated in place.
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut steps = 0;
        for k in 0..m {
            let mut w = op(&basis[k]);
            let mut col = vec![ZERO; k + 2];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hik = dot(v, &w);
                    col[i] += hik;
                    for (wj, vj) in w.iter_mut().zip(v) {
                        *wj -= hik * vj;
                    }
                }
            }
            let h_next = norm2(&w);
            col[k + 1] = Complex64::new(h_next, 0.0);
            for i in 0..k {
                let a = col[i];
                let bb = col[i + 1];
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i].conj() * a + cs[i] * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, ZERO)
            } else if a.norm() == 0.0 {
                (0.0, bb.conj() / bb.norm())
            } else {
                let c = a.norm() / denom;
                let s = (a / a.norm()) * bb.conj() / denom;
                (c, s)
            };
            col[k] = c * a + s * bb;
            col[k + 1] = ZERO;
            let gk = g[k];
            g[k] = c * gk;
            g[k + 1] = -s.conj() * gk;
            cs.push(c);
            sn.push(s);
            hess.push(col);
            steps = k + 1;
            if g[k + 1].norm() <= target || h_next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|z| z / h_next).collect());
        }
        let mut y = vec![ZERO; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for j in i + 1..steps {
                s -= hess[j][i] * y[j];
            }
            if hess[i][i] == ZERO {
                return (x, false);
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    let ax = op(&x);
    let res: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let ok = norm2(&res) <= target;
    (x, ok)
}

/// `A^{-1}` realized by GMRES solves against a matrix-free operator.
///
/// A failed solve marks the map unreliable; its outputs are then best-effort.
pub struct IterativeInverse<'a, A: LinearMap> {
    op: &'a A,
    opts: GmresOptions,
    failed: AtomicBool,
}

impl<'a, A: LinearMap> IterativeInverse<'a, A> {
    pub fn new(op: &'a A, opts: GmresOptions) -> Result<Self> {
        if op.dim_in() != op.dim_out() {
            return Err(LabError::Dimension("inverse of a non-square operator".into()));
        }
        Ok(Self {
            op,
            opts,
            failed: AtomicBool::new(false),
        })
    }
}

impl<A: LinearMap> LinearMap for IterativeInverse<'_, A> {
    fn dim_in(&self) -> usize {
        self.op.dim_out()
    }

    fn dim_out(&self) -> usize {
        self.op.dim_in()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (sol, ok) = gmres(|v| self.op.apply(v), x, self.opts);
        if !ok {
            self.failed.store(true, Ordering::Relaxed);
        }
        sol
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let (sol, ok) = gmres(|v| self.op.apply_adjoint(v), y, self.opts);
        if !ok {
            self.failed.store(true, Ordering::Relaxed);
        }
        sol
    }

    fn reliable(&self) -> bool {
        !self.failed.load(Ordering::Relaxed) && self.op.reliable()
    }
}
