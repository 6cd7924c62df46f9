//! Ridge-regularized weighted least squares for leaf models.
//!
//! A leaf with design rows `u_i`, gradients `g_i` and hessians `h_i` minimizes
//! `0.5 * a^T (M + lambda I) a + b^T a` with `M = sum h_i u_i u_i^T` and `b = sum g_i u_i`.
//! The minimizer is `a = -(M + lambda I)^-1 b` and the minimum is `0.5 * b^T a`.
//! Systems are tiny (a handful of regressors), so a dense LDL^T factorization is used.

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

pub(crate) type MatBuf = SmallVec<[f64; 64]>;
pub(crate) type VecBuf = SmallVec<[f64; 8]>;

/// Symmetric `dim x dim` matrix `M` (row-major, both triangles filled) and right-hand side `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSystem {
    pub dim: usize,
    pub m: MatBuf,
    pub b: VecBuf,
}

impl NormalSystem {
    pub fn zeros(dim: usize) -> Self {
        NormalSystem { dim, m: smallvec![0.0; dim * dim], b: smallvec![0.0; dim] }
    }

    pub fn from_rows(m: &[Vec<f64>], b: &[f64]) -> Self {
        let dim = b.len();
        let mut sys = NormalSystem::zeros(dim);
        for r in 0..dim {
            sys.b[r] = b[r];
            for c in 0..dim {
                sys.m[r * dim + c] = m[r][c];
            }
        }
        sys
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.m[r * self.dim + c]
    }

    /// Sets `M[r][c]` and `M[c][r]`.
    #[inline]
    pub fn set_sym(&mut self, r: usize, c: usize, v: f64) {
        self.m[r * self.dim + c] = v;
        self.m[c * self.dim + r] = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafSolution {
    /// Fitted parameters; the first component is the intercept.
    pub alpha: Vec<f64>,
    /// `0.5 * b^T alpha`, never positive.
    pub min_loss: f64,
    /// The factorization failed even with jitter and only the intercept was fitted.
    pub fallback: bool,
}

const JITTER_STEPS: usize = 4;
const PIVOT_TOL: f64 = 1e-10;

/// LDL^T factorization in place: unit lower `L` below the diagonal, `D` on it. Fails when a
/// pivot has lost more than ten digits relative to the original diagonal entry, which treats
/// numerically rank-deficient systems as singular.
fn ldl_in_place(a: &mut [f64], d: usize) -> bool {
    for k in 0..d {
        let orig = a[k * d + k];
        let mut pivot = orig;
        for p in 0..k {
            pivot -= a[k * d + p] * a[k * d + p] * a[p * d + p];
        }
        if !(pivot.is_finite() && pivot > PIVOT_TOL * orig.abs() && pivot > 0.0) {
            return false;
        }
        a[k * d + k] = pivot;
        for r in k + 1..d {
            let mut v = a[r * d + k];
            for p in 0..k {
                v -= a[r * d + p] * a[k * d + p] * a[p * d + p];
            }
            a[r * d + k] = v / pivot;
        }
    }
    true
}

/// Solves `L D L^T x = -b` into `x`.
fn ldl_solve_neg(f: &[f64], d: usize, b: &[f64], x: &mut [f64]) {
    for r in 0..d {
        let mut v = -b[r];
        for c in 0..r {
            v -= f[r * d + c] * x[c];
        }
        x[r] = v;
    }
    for r in 0..d {
        x[r] /= f[r * d + r];
    }
    for r in (0..d).rev() {
        let mut v = x[r];
        for c in r + 1..d {
            v -= f[c * d + r] * x[c];
        }
        x[r] = v;
    }
}

/// Shared path for [`solve_ridge`] and [`min_loss_only`]; writes the solution into `alpha`.
fn solve_into(sys: &NormalSystem, lambda: f64, alpha: &mut [f64]) -> Result<(f64, bool)> {
    let d = sys.dim;
    if !lambda.is_finite() || sys.m.iter().chain(sys.b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSystem);
    }
    let trace: f64 = (0..d).map(|k| sys.at(k, k)).sum();
    let base_jitter = 1e-10 * trace / d as f64;
    let attempts = if trace > 0.0 { JITTER_STEPS } else { 0 };

    let mut work: MatBuf = smallvec![0.0; d * d];
    for attempt in 0..=attempts {
        let jitter = if attempt == 0 { 0.0 } else { base_jitter * 10f64.powi(attempt as i32 - 1) };
        work.copy_from_slice(&sys.m);
        for k in 0..d {
            work[k * d + k] += lambda + jitter;
        }
        if ldl_in_place(&mut work, d) {
            ldl_solve_neg(&work, d, &sys.b, alpha);
            let min_loss = 0.5 * sys.b.iter().zip(alpha.iter()).map(|(b, a)| b * a).sum::<f64>();
            return Ok((min_loss.min(0.0), false));
        }
    }

    // intercept-only fallback
    alpha.iter_mut().for_each(|a| *a = 0.0);
    let denom = sys.at(0, 0) + lambda;
    if denom > 0.0 {
        alpha[0] = -sys.b[0] / denom;
    }
    Ok(((0.5 * sys.b[0] * alpha[0]).min(0.0), true))
}

/// `alpha = -(M + lambda I)^-1 b` with jitter escalation and an intercept-only fallback.
pub fn solve_ridge(sys: &NormalSystem, lambda: f64) -> Result<LeafSolution> {
    let mut alpha = vec![0.0; sys.dim];
    let (min_loss, fallback) = solve_into(sys, lambda, &mut alpha)?;
    Ok(LeafSolution { alpha, min_loss, fallback })
}

/// The minimum of the leaf objective without returning the parameters.
pub fn min_loss_only(sys: &NormalSystem, lambda: f64) -> Result<f64> {
    let mut alpha: VecBuf = smallvec![0.0; sys.dim];
    solve_into(sys, lambda, &mut alpha).map(|(loss, _)| loss)
}
