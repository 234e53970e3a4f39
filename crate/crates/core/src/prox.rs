//! Regularizers `J` and solvers for the penalized least-squares problem
//! `min_u 1/2 ||K u - z||^2 + lambda J(u)`.

use crate::error::{invalid, Result, SmreError};
use crate::grid::{diff_axis, diff_axis_adjoint_add, neg_laplacian, Grid};
use crate::linalg::{conjugate_gradient, dist, norm, solve_symmetric_tridiagonal};
use crate::operators::LinearOperator;

/// Smoothing constant used for `TV_1^beta` unless configured otherwise.
pub const DEFAULT_BETA: f64 = 1e-8;

/// Relative tolerance of the linear solves inside the lagged-diffusivity
/// iteration.
const LINEAR_RTOL: f64 = 1e-10;

/// Each lagged-diffusivity step reduces the linear residual, which starts at
/// the Euler-Lagrange residual, by this factor.
const FORCING: f64 = 0.1;

/// Cap on CG iterations per lagged-diffusivity step. CG started at the
/// current iterate decreases the quadratic majorizer at every step, so a
/// capped solve still decreases the objective.
const LINEAR_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `1/2 sum_v |D u_v|^2`
    Tv2,
    /// `sum_v sqrt(|D u_v|^2 + beta^2)`
    Tv1Beta { beta: f64 },
    /// `sum_i |u_i|`
    L1,
}

impl Regularizer {
    pub fn tv1beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(Regularizer::Tv1Beta { beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Tv2 => "tv2",
            Regularizer::Tv1Beta { .. } => "tv1beta",
            Regularizer::L1 => "l1",
        }
    }

    /// `J(u)` for `u` living on `grid`.
    pub fn value(&self, grid: Grid, u: &[f64]) -> f64 {
        match *self {
            Regularizer::Tv2 => 0.5 * gradient_sq(grid, u).iter().sum::<f64>(),
            Regularizer::Tv1Beta { beta } => gradient_sq(grid, u)
                .iter()
                .map(|g| (g + beta * beta).sqrt())
                .sum(),
            Regularizer::L1 => u.iter().map(|x| x.abs()).sum(),
        }
    }

    /// `1/2 ||K u - z||^2 + lambda J(u)`.
    pub fn objective(&self, k: &LinearOperator, z: &[f64], lambda: f64, u: &[f64]) -> Result<f64> {
        let ku = k.apply(u)?;
        k.codomain().check_len(z.len())?;
        Ok(0.5 * dist(&ku, z).powi(2) + lambda * self.value(k.domain(), u))
    }
}

/// Per-cell `|D u_v|^2`.
pub(crate) fn gradient_sq(grid: Grid, u: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        diff_axis(grid, u, axis, &mut g);
        acc.iter_mut().zip(&g).for_each(|(a, x)| *a += x * x);
    }
    acc
}

/// Gradient of `TV_1^beta`: `D^* (D u / sqrt(|D u|^2 + beta^2))`.
pub fn tv1beta_gradient(grid: Grid, u: &[f64], beta: f64) -> Vec<f64> {
    let w = diffusivity(grid, u, beta);
    weighted_laplacian(grid, &w, u)
}

fn diffusivity(grid: Grid, u: &[f64], beta: f64) -> Vec<f64> {
    gradient_sq(grid, u)
        .into_iter()
        .map(|g| 1.0 / (g + beta * beta).sqrt())
        .collect()
}

/// `D^* diag(w) D u`.
fn weighted_laplacian(grid: Grid, w: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        diff_axis(grid, u, axis, &mut g);
        g.iter_mut().zip(w).for_each(|(a, b)| *a *= b);
        diff_axis_adjoint_add(grid, &g, axis, &mut out);
    }
    out
}

/// Diagonal of `D^* diag(w) D`.
fn weighted_laplacian_diag(grid: Grid, w: &[f64]) -> Vec<f64> {
    let strides = grid.strides();
    let m = grid.side();
    (0..grid.len())
        .map(|i| {
            (0..grid.dim())
                .map(|axis| {
                    let c = (i / strides[axis]) % m;
                    let mut d = 0.0;
                    if c + 1 < m {
                        d += w[i];
                    }
                    if c > 0 {
                        d += w[i - strides[axis]];
                    }
                    d
                })
                .sum::<f64>()
        })
        .collect()
}

/// Diagonal of `K^* K`; exact for identity and dense operators, the
/// interior value for convolutions.
fn normal_diagonal(k: &LinearOperator) -> Vec<f64> {
    let n = k.domain().len();
    match k {
        LinearOperator::Identity(_) => vec![1.0; n],
        LinearOperator::Convolution(c) => {
            let s: f64 = c.kernel().taps().iter().map(|t| t * t).sum();
            vec![s; n]
        }
        LinearOperator::Dense { matrix, rows, cols } => (0..*cols)
            .map(|j| (0..*rows).map(|i| matrix[i * cols + j].powi(2)).sum())
            .collect(),
    }
}

/// Output of a prox solver.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub minimizer: Vec<f64>,
    pub iterations: usize,
    /// Norm of the optimality residual at `minimizer`.
    pub residual: f64,
    pub converged: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Starting point: `warm` if given, else `z` for the identity and zero
/// otherwise.
fn initial_point(k: &LinearOperator, z: &[f64], warm: Option<&[f64]>) -> Result<Vec<f64>> {
    match warm {
        Some(w) => {
            k.domain().check_len(w.len())?;
            Ok(w.to_vec())
        }
        None if k.is_identity() => Ok(z.to_vec()),
        None => Ok(vec![0.0; k.domain().len()]),
    }
}

/// Minimizes `1/2 ||K u - z||^2 + lambda TV2(u)` by solving the normal
/// equations `(K^* K + lambda D^* D) u = K^* z` with preconditioned CG.
/// The returned residual is the norm of `K^*(K u - z) + lambda D^* D u`.
pub fn prox_tv2(k: &LinearOperator, z: &[f64], lambda: f64, inner_tol: f64) -> Result<ProxResult> {
    prox_tv2_from(k, z, lambda, inner_tol, None)
}

pub fn prox_tv2_from(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    inner_tol: f64,
    warm: Option<&[f64]>,
) -> Result<ProxResult> {
    check_lambda(lambda)?;
    let grid = k.domain();
    let b = k.adjoint(z)?;
    let mut u = initial_point(k, z, warm)?;
    let ones = vec![1.0; grid.len()];
    let diag: Vec<f64> = normal_diagonal(k)
        .iter()
        .zip(weighted_laplacian_diag(grid, &ones))
        .map(|(a, l)| a + lambda * l)
        .collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        neg_laplacian(grid, x, out);
        let kk = k.normal(x).expect("domain-sized input");
        out.iter_mut()
            .zip(&kk)
            .for_each(|(o, a)| *o = a + lambda * *o);
    };
    let max_iter = 10 * grid.len() + 1000;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..4 {
        let out = conjugate_gradient(apply, &diag, &b, &mut u, inner_tol, max_iter);
        iterations += out.iterations;
        residual = tv2_residual(k, z, lambda, &u)?;
        if residual <= inner_tol {
            return Ok(ProxResult {
                minimizer: u,
                iterations,
                residual,
                converged: true,
            });
        }
    }
    Err(SmreError::NotConverged {
        solver: "prox_tv2",
        iterations,
        residual,
    })
}

fn tv2_residual(k: &LinearOperator, z: &[f64], lambda: f64, u: &[f64]) -> Result<f64> {
    let grid = k.domain();
    let ku = k.apply(u)?;
    let r: Vec<f64> = ku.iter().zip(z).map(|(a, b)| a - b).collect();
    let mut g = vec![0.0; grid.len()];
    neg_laplacian(grid, u, &mut g);
    let kr = k.adjoint(&r)?;
    Ok(norm(
        &kr.iter()
            .zip(&g)
            .map(|(a, b)| a + lambda * b)
            .collect::<Vec<_>>(),
    ))
}

/// Euler-Lagrange residual `K^*(K u - z) + lambda grad TV_1^beta(u)`.
fn tv1beta_residual(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    w: &[f64],
    u: &[f64],
) -> Result<f64> {
    let ku = k.apply(u)?;
    let r: Vec<f64> = ku.iter().zip(z).map(|(a, b)| a - b).collect();
    let kr = k.adjoint(&r)?;
    let g = weighted_laplacian(k.domain(), w, u);
    Ok(norm(
        &kr.iter()
            .zip(&g)
            .map(|(a, b)| a + lambda * b)
            .collect::<Vec<_>>(),
    ))
}

/// Minimizes `1/2 ||K u - z||^2 + lambda TV_1^beta(u)` by the lagged
/// diffusivity fixed point: with `w = 1/sqrt(|D u_k|^2 + beta^2)` frozen,
/// `u_{k+1}` solves `(K^* K + lambda D^* diag(w) D) u = K^* z`.
///
/// Stops when the Euler-Lagrange residual is at most `inner_tol`; after
/// `max_iter` fixed-point steps the last iterate is returned with
/// `converged == false`.
pub fn prox_tv1beta(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    beta: f64,
    inner_tol: f64,
    max_iter: usize,
) -> Result<ProxResult> {
    prox_tv1beta_from(k, z, lambda, beta, inner_tol, max_iter, None)
}

pub fn prox_tv1beta_from(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    beta: f64,
    inner_tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> Result<ProxResult> {
    check_lambda(lambda)?;
    Regularizer::tv1beta(beta)?;
    let grid = k.domain();
    let b = k.adjoint(z)?;
    let mut u = initial_point(k, z, warm)?;
    let kdiag = normal_diagonal(k);
    let tridiagonal = k.is_identity() && grid.dim() == 1;
    let mut w = diffusivity(grid, &u, beta);
    let mut residual = tv1beta_residual(k, z, lambda, &w, &u)?;
    for it in 1..=max_iter {
        if residual <= inner_tol {
            return Ok(ProxResult {
                minimizer: u,
                iterations: it - 1,
                residual,
                converged: true,
            });
        }
        if tridiagonal {
            let m = grid.len();
            let diag: Vec<f64> = (0..m)
                .map(|i| {
                    let mut d = 1.0;
                    if i + 1 < m {
                        d += lambda * w[i];
                    }
                    if i > 0 {
                        d += lambda * w[i - 1];
                    }
                    d
                })
                .collect();
            let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -lambda * w[i]).collect();
            u = solve_symmetric_tridiagonal(&diag, &off, &b);
        } else {
            let diag: Vec<f64> = kdiag
                .iter()
                .zip(weighted_laplacian_diag(grid, &w))
                .map(|(a, l)| a + lambda * l)
                .collect();
            let wref = &w;
            let apply = |x: &[f64], out: &mut [f64]| {
                let l = weighted_laplacian(grid, wref, x);
                let kk = k.normal(x).expect("domain-sized input");
                out.iter_mut()
                    .zip(kk.iter().zip(&l))
                    .for_each(|(o, (a, c))| *o = a + lambda * c);
            };
            let floor = LINEAR_RTOL * norm(&b).max(f64::MIN_POSITIVE);
            let tol = (FORCING * residual).max(floor);
            conjugate_gradient(apply, &diag, &b, &mut u, tol, LINEAR_MAX_ITER);
        }
        w = diffusivity(grid, &u, beta);
        residual = tv1beta_residual(k, z, lambda, &w, &u)?;
    }
    Ok(ProxResult {
        converged: residual <= inner_tol,
        minimizer: u,
        iterations: max_iter,
        residual,
    })
}

/// Exact minimizer of `1/2 ||u - z||^2 + lambda sum_i |u_{i+1} - u_i|` in
/// one dimension: the derivative of the taut string through the tube of
/// radius `lambda` around the cumulative sums of `z`, pinned at both ends.
pub fn prox_tautstring(z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(invalid("input contains non-finite values"));
    }
    let n = z.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + z[i];
    }
    let upper = |j: usize| if j == n { cum[n] } else { cum[j] + lambda };
    let lower = |j: usize| if j == n { cum[n] } else { cum[j] - lambda };

    let mut u = vec![0.0; n];
    let (mut i0, mut y0) = (0usize, 0.0f64);
    while i0 < n {
        let (mut hi, mut lo) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ihi, mut ilo) = (i0, i0);
        let mut knot = None;
        for j in i0 + 1..=n {
            let len = (j - i0) as f64;
            let s_up = (upper(j) - y0) / len;
            let s_lo = (lower(j) - y0) / len;
            if s_lo > hi {
                knot = Some((ihi, hi, upper(ihi)));
                break;
            }
            if s_up < lo {
                knot = Some((ilo, lo, lower(ilo)));
                break;
            }
            if s_up <= hi {
                hi = s_up;
                ihi = j;
            }
            if s_lo >= lo {
                lo = s_lo;
                ilo = j;
            }
        }
        let (end, slope, y_end) = knot.unwrap_or((n, (cum[n] - y0) / (n - i0) as f64, cum[n]));
        u[i0..end].iter_mut().for_each(|v| *v = slope);
        i0 = end;
        y0 = y_end;
    }
    Ok(u)
}

/// Soft thresholding at level `t`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Minimizes `1/2 ||K u - z||^2 + lambda ||u||_1`: soft thresholding for
/// the identity, accelerated proximal gradient with step `1/||K||^2`
/// otherwise. The residual is the norm of the gradient mapping
/// `(u - S(u - t grad))/t`.
pub fn prox_l1(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    inner_tol: f64,
    max_iter: usize,
) -> Result<ProxResult> {
    prox_l1_from(k, z, lambda, inner_tol, max_iter, None)
}

pub fn prox_l1_from(
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    inner_tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> Result<ProxResult> {
    check_lambda(lambda)?;
    k.codomain().check_len(z.len())?;
    if k.is_identity() {
        return Ok(ProxResult {
            minimizer: z.iter().map(|&x| soft_threshold(x, lambda)).collect(),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let step = 1.0 / k.norm_squared_estimate();
    let kz = k.adjoint(z)?;
    let forward = |y: &[f64]| -> Result<Vec<f64>> {
        let g: Vec<f64> = k.normal(y)?.iter().zip(&kz).map(|(a, b)| a - b).collect();
        Ok(y.iter()
            .zip(&g)
            .map(|(yi, gi)| soft_threshold(yi - step * gi, step * lambda))
            .collect())
    };
    let mut x = initial_point(k, z, warm)?;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let x_next = forward(&y)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // gradient-mapping restart test: (y - x_next) . (x_next - x) > 0
        let turn: f64 = y
            .iter()
            .zip(&x_next)
            .zip(&x)
            .map(|((yi, a), b)| (yi - a) * (a - b))
            .sum();
        if turn > 0.0 {
            y.clone_from(&x_next);
            t = 1.0;
        } else {
            let mom = (t - 1.0) / t_next;
            y = x_next
                .iter()
                .zip(&x)
                .map(|(a, b)| a + mom * (a - b))
                .collect();
            t = t_next;
        }
        x = x_next;
        if it % 10 == 0 || it == max_iter {
            let fx = forward(&x)?;
            residual = dist(&x, &fx) / step;
            if residual <= inner_tol {
                return Ok(ProxResult {
                    minimizer: x,
                    iterations: it,
                    residual,
                    converged: true,
                });
            }
        }
    }
    Ok(ProxResult {
        minimizer: x,
        iterations: max_iter,
        residual,
        converged: false,
    })
}

/// Dispatches to the solver matching `reg`. For `TV_1^beta` in one
/// dimension with the identity operator this is still the lagged
/// diffusivity iteration; [`prox_tautstring`] is the separate exact
/// `TV_1` solver.
pub fn prox(
    reg: Regularizer,
    k: &LinearOperator,
    z: &[f64],
    lambda: f64,
    inner_tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> Result<ProxResult> {
    match reg {
        Regularizer::Tv2 => prox_tv2_from(k, z, lambda, inner_tol, warm),
        Regularizer::Tv1Beta { beta } => {
            prox_tv1beta_from(k, z, lambda, beta, inner_tol, max_iter, warm)
        }
        Regularizer::L1 => prox_l1_from(k, z, lambda, inner_tol, max_iter, warm),
    }
}
