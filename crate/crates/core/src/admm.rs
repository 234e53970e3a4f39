//! The alternating direction method of multipliers for
//! `min J(u) s.t. T(Y - K u) <= q`, split as `K u + v = Y` with `v` in the
//! feasible set.

use web_time::Instant;

use crate::constraints::ConstraintSystem;
use crate::error::{invalid, Result, SmreError};
use crate::linalg::dist;
use crate::operators::LinearOperator;
use crate::projections::{dykstra_warm, DykstraState};
use crate::prox::{prox, Regularizer};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Step size `lambda > 0`.
    pub lambda: f64,
    /// Outer tolerance on the residual `r`.
    pub tau: f64,
    pub max_outer: usize,
    /// Prox tolerance at iteration `k` is `max(inner_tol_base / k^2, tol_floor)`.
    pub inner_tol_base: f64,
    /// Dykstra tolerance at iteration `k` is `max(dykstra_tol_base / k^2, tol_floor)`.
    pub dykstra_tol_base: f64,
    pub tol_floor: f64,
    /// Iteration cap of iterative prox solvers (lagged diffusivity, FISTA).
    pub inner_max_iter: usize,
    pub dykstra_max_sweeps: usize,
    /// Standardization floor of the Poisson variant; `None` means
    /// `1e-3 * max(Y)`.
    pub epsilon_safe: Option<f64>,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: 1.0,
            tau: 1e-4,
            max_outer: 500,
            inner_tol_base: 1e-3,
            dykstra_tol_base: 1e-3,
            tol_floor: 1e-9,
            inner_max_iter: 200,
            dykstra_max_sweeps: 5000,
            epsilon_safe: None,
        }
    }
}

impl AdmmConfig {
    /// One-dimensional regression: `lambda = 1`, `tau = 1e-4`.
    pub fn regress1d() -> Self {
        AdmmConfig::default()
    }

    /// Two-dimensional denoising: `lambda = 0.25`, at most 20
    /// lagged-diffusivity steps per prox.
    pub fn denoise2d() -> Self {
        AdmmConfig {
            lambda: 0.25,
            inner_max_iter: 20,
            ..AdmmConfig::default()
        }
    }

    /// Poisson deconvolution: `lambda = 0.05`, 100 outer steps, at most 20
    /// lagged-diffusivity steps per prox.
    pub fn deconvolve() -> Self {
        AdmmConfig {
            lambda: 0.05,
            max_outer: 100,
            inner_max_iter: 20,
            ..AdmmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.tau >= 0.0) {
            return Err(invalid(format!(
                "tau must be nonnegative, got {}",
                self.tau
            )));
        }
        if self.max_outer == 0 {
            return Err(invalid("max_outer must be positive"));
        }
        for (name, v) in [
            ("inner_tol_base", self.inner_tol_base),
            ("dykstra_tol_base", self.dykstra_tol_base),
            ("tol_floor", self.tol_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(e) = self.epsilon_safe {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("epsilon_safe must be positive, got {e}")));
            }
        }
        Ok(())
    }

    fn inner_tol(&self, k: usize) -> f64 {
        (self.inner_tol_base / (k * k) as f64).max(self.tol_floor)
    }

    fn dykstra_tol(&self, k: usize) -> f64 {
        (self.dykstra_tol_base / (k * k) as f64).max(self.tol_floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Standard,
    /// Poisson variant with lagged standardization; no convergence theory.
    LaggedPoisson,
}

/// Wall time spent in each stage, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub projection: f64,
    pub prox: f64,
    pub other: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmReport {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    /// `k[tau]`, the number of completed iterations.
    pub iterations: usize,
    /// `r_k` for `k = 1..=iterations`.
    pub residuals: Vec<f64>,
    /// `J(u_k)` for `k = 1..=iterations`.
    pub objective: Vec<f64>,
    /// `T(Y - K u)` at exit, for the constraint system of the last step.
    pub final_statistic: f64,
    /// `T(v)` at exit.
    pub feasibility: f64,
    /// `T(v_k)` for `k = 1..=iterations`.
    pub feasibility_trace: Vec<f64>,
    pub status: ExitStatus,
    pub variant: Variant,
    pub dykstra_sweeps: Vec<usize>,
    pub inner_iterations: Vec<usize>,
    /// Iterations whose projection or prox hit its iteration cap.
    pub unconverged_subproblems: usize,
    pub times: StageTimes,
}

/// `max(||K u_k + v_k - Y||, ||K (u_k - u_{k-1})||)` given `K u_k` and
/// `K u_{k-1}`.
fn residual_from_images(ku: &[f64], ku_prev: &[f64], v: &[f64], y: &[f64]) -> f64 {
    let primal = ku
        .iter()
        .zip(v)
        .zip(y)
        .map(|((a, b), c)| (a + b - c).powi(2))
        .sum::<f64>()
        .sqrt();
    primal.max(dist(ku, ku_prev))
}

/// `max(||K u_k + v_k - Y||, ||K (u_k - u_{k-1})||)`.
pub fn residual(
    u: &[f64],
    v: &[f64],
    u_prev: &[f64],
    k: &LinearOperator,
    y: &[f64],
) -> Result<f64> {
    k.codomain().check_len(v.len())?;
    k.codomain().check_len(y.len())?;
    Ok(residual_from_images(&k.apply(u)?, &k.apply(u_prev)?, v, y))
}

/// Runs the ADMM iteration from `u = 0, v = p = 0`.
pub fn admm_solve(
    k: &LinearOperator,
    y: &[f64],
    reg: Regularizer,
    system: &ConstraintSystem,
    cfg: &AdmmConfig,
) -> Result<AdmmReport> {
    if system.grid() != k.codomain() {
        return Err(SmreError::GridMismatch(
            "constraint system and operator codomain differ".into(),
        ));
    }
    iterate(k, y, reg, cfg, Variant::Standard, |_| Ok(system.clone()))
}

/// The Poisson variant: step `k` projects onto the constraints of
/// `base_system` with per-cell weights divided by
/// `sqrt(max((K u_{k-1})_v, epsilon_safe))`.
pub fn admm_solve_poisson(
    k: &LinearOperator,
    y: &[f64],
    reg: Regularizer,
    base_system: &ConstraintSystem,
    cfg: &AdmmConfig,
) -> Result<AdmmReport> {
    if base_system.grid() != k.codomain() {
        return Err(SmreError::GridMismatch(
            "constraint system and operator codomain differ".into(),
        ));
    }
    if y.iter().any(|&v| v < 0.0) {
        return Err(invalid("Poisson data must be nonnegative"));
    }
    let eps = match cfg.epsilon_safe {
        Some(e) => e,
        None => {
            let m = y.iter().cloned().fold(0.0, f64::max);
            if m <= 0.0 {
                return Err(invalid("Poisson data are identically zero"));
            }
            1e-3 * m
        }
    };
    let base = base_system.without_cell_scale();
    iterate(k, y, reg, cfg, Variant::LaggedPoisson, |ku_prev| {
        base.clone().with_cell_scale(standardization(ku_prev, eps))
    })
}

/// `1 / sqrt(max(x_v, eps))`.
pub fn standardization(ku: &[f64], eps: f64) -> Vec<f64> {
    ku.iter().map(|&x| 1.0 / x.max(eps).sqrt()).collect()
}

fn iterate(
    k: &LinearOperator,
    y: &[f64],
    reg: Regularizer,
    cfg: &AdmmConfig,
    variant: Variant,
    mut system_at: impl FnMut(&[f64]) -> Result<ConstraintSystem>,
) -> Result<AdmmReport> {
    cfg.validate()?;
    let data_grid = k.codomain();
    data_grid.check_len(y.len())?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(SmreError::NonFinite(i));
    }
    let model_grid = k.domain();
    let n = data_grid.len();
    let lambda = cfg.lambda;

    let mut u = vec![0.0; model_grid.len()];
    let mut ku = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut objective = Vec::new();
    let mut dykstra_sweeps = Vec::new();
    let mut feasibility_trace = Vec::new();
    let mut inner_iterations = Vec::new();
    let mut unconverged = 0;
    let mut times = StageTimes::default();
    let mut state = DykstraState::default();
    let mut status = ExitStatus::MaxIter;
    let mut system = system_at(&ku)?;

    for it in 1..=cfg.max_outer {
        let wrap = |e: SmreError| SmreError::InnerSolver {
            iteration: it,
            source: Box::new(e),
        };
        let t0 = Instant::now();
        if it > 1 && variant == Variant::LaggedPoisson {
            system = system_at(&ku).map_err(wrap)?;
            state = DykstraState::new(&system);
        }
        let h: Vec<f64> = (0..n).map(|i| y[i] + lambda * p[i] - ku[i]).collect();
        let t1 = Instant::now();
        let proj = dykstra_warm(
            &h,
            &system,
            &mut state,
            cfg.dykstra_tol(it),
            cfg.dykstra_max_sweeps,
        )
        .map_err(wrap)?;
        let t2 = Instant::now();
        v = proj.solution;
        let z: Vec<f64> = (0..n).map(|i| y[i] + lambda * p[i] - v[i]).collect();
        let step = prox(
            reg,
            k,
            &z,
            lambda,
            cfg.inner_tol(it),
            cfg.inner_max_iter,
            Some(&u),
        )
        .map_err(wrap)?;
        let t3 = Instant::now();
        if !proj.converged || !step.converged {
            unconverged += 1;
        }
        dykstra_sweeps.push(proj.sweeps);
        feasibility_trace.push(proj.statistic);
        inner_iterations.push(step.iterations);
        u = step.minimizer;
        let ku_next = k.apply(&u).map_err(wrap)?;
        for i in 0..n {
            p[i] -= (ku_next[i] + v[i] - y[i]) / lambda;
        }
        let r = residual_from_images(&ku_next, &ku, &v, y);
        ku = ku_next;
        residuals.push(r);
        objective.push(reg.value(model_grid, &u));
        let t4 = Instant::now();
        times.projection += (t2 - t1).as_secs_f64();
        times.prox += (t3 - t2).as_secs_f64();
        times.other += (t1 - t0).as_secs_f64() + (t4 - t3).as_secs_f64();
        log::debug!(
            "admm k={it} r={r:.3e} J={:.6e} sweeps={} inner={}",
            objective[it - 1],
            proj.sweeps,
            step.iterations
        );
        if r <= cfg.tau {
            status = ExitStatus::Converged;
            break;
        }
    }
    let resid: Vec<f64> = y.iter().zip(&ku).map(|(a, b)| a - b).collect();
    let final_statistic = system.statistic(&resid);
    let feasibility = system.statistic(&v);
    Ok(AdmmReport {
        u,
        v,
        p,
        iterations: residuals.len(),
        residuals,
        objective,
        final_statistic,
        feasibility,
        feasibility_trace,
        status,
        variant,
        dykstra_sweeps,
        inner_iterations,
        unconverged_subproblems: unconverged,
        times,
    })
}
