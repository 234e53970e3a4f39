//! Browser demo bindings.
//!
//! Three operations are exposed to JavaScript:
//!
//! * [`regress`]: SMRE regression of a 1D signal with a simulated threshold.
//! * [`quantile_samples`]: Monte-Carlo samples of the multiresolution
//!   statistic of pure noise, for a histogram of the null distribution.
//! * [`two_slab_path`]: the iterates of Dykstra's algorithm projecting a
//!   point of the plane onto the intersection of two slabs.
//!
//! Each binding wraps a plain Rust function of the same name with an
//! `_impl` suffix, which the native tests call directly.

use smre::projections::project_band;
use smre::quantiles::{empirical_quantile, simulate_statistics};
use smre::{
    admm_solve, synthetic, AdmmConfig, ConstraintSystem, ExitStatus, Grid, LinearOperator,
    NoiseModel, Regularizer, Transform, Weighting, WindowSystem,
};
use wasm_bindgen::prelude::*;

/// Result of [`regress`].
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Regression {
    estimate: Vec<f64>,
    residuals: Vec<f64>,
    q: f64,
    final_statistic: f64,
    iterations: usize,
    converged: bool,
}

#[wasm_bindgen]
impl Regression {
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    /// Outer residuals `r_k`.
    #[wasm_bindgen(getter)]
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `T(Y - u)` of the estimate.
    #[wasm_bindgen(getter)]
    pub fn final_statistic(&self) -> f64 {
        self.final_statistic
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Parameters of [`regress_impl`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressParams {
    pub s_max: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub n_trials: usize,
    pub seed: u64,
}

fn windowed_system(m: usize, s_max: usize, q: f64) -> smre::Result<ConstraintSystem> {
    let grid = Grid::line(m)?;
    ConstraintSystem::windowed(
        WindowSystem::new(grid, 1, s_max)?,
        Weighting::Normalized,
        Transform::Identity,
        q,
    )
}

/// `T(eps_i)` for `n_trials` Gaussian noise vectors of length `m`, using
/// normalized windows of sides `1..=s_max`.
pub fn quantile_samples_impl(
    m: usize,
    s_max: usize,
    sigma: f64,
    n_trials: usize,
    seed: u64,
) -> smre::Result<Vec<f64>> {
    let system = windowed_system(m, s_max, 1.0)?;
    Ok(simulate_statistics(
        &system,
        NoiseModel::new(sigma)?,
        n_trials,
        seed,
    ))
}

/// Simulates `q` as the `alpha`-quantile of the noise statistic, then runs
/// the ADMM solver with the TV2 regularizer and the `regress1d` preset.
pub fn regress_impl(y: &[f64], params: RegressParams) -> smre::Result<Regression> {
    let samples = quantile_samples_impl(
        y.len(),
        params.s_max,
        params.sigma,
        params.n_trials,
        params.seed,
    )?;
    let q = empirical_quantile(&samples, params.alpha)?;
    let system = windowed_system(y.len(), params.s_max, q)?;
    let k = LinearOperator::identity(system.grid());
    let cfg = AdmmConfig {
        lambda: params.lambda,
        ..AdmmConfig::regress1d()
    };
    let report = admm_solve(&k, y, Regularizer::Tv2, &system, &cfg)?;
    let residual: Vec<f64> = y.iter().zip(&report.u).map(|(a, b)| a - b).collect();
    Ok(Regression {
        final_statistic: system.statistic(&residual),
        estimate: report.u,
        residuals: report.residuals,
        q,
        iterations: report.iterations,
        converged: report.status == ExitStatus::Converged,
    })
}

/// Iterates `x_0 = h, x_1, x_2, ...` of Dykstra's algorithm alternating
/// between the slabs `|<a, x>| <= qa` and `|<b, x>| <= qb` in the plane.
/// The path is flattened as `[x0, y0, x1, y1, ...]` and stops after
/// `max_steps` projections or when a full cycle moves by at most `tol`.
pub fn two_slab_path_impl(
    h: [f64; 2],
    a: [f64; 2],
    qa: f64,
    b: [f64; 2],
    qb: f64,
    max_steps: usize,
    tol: f64,
) -> smre::Result<Vec<f64>> {
    let slabs = [(a, qa), (b, qb)];
    let mut x = h.to_vec();
    let mut corrections = [vec![0.0; 2], vec![0.0; 2]];
    let mut path = x.clone();
    let mut cycle_start = x.clone();
    for step in 0..max_steps {
        let j = step % 2;
        let (w, q) = slabs[j];
        let shifted: Vec<f64> = x
            .iter()
            .zip(&corrections[j])
            .map(|(xi, ci)| xi + ci)
            .collect();
        let projected = project_band(&shifted, &w, q)?;
        corrections[j] = shifted.iter().zip(&projected).map(|(s, p)| s - p).collect();
        x = projected;
        path.extend_from_slice(&x);
        if j == 1 {
            let moved = ((x[0] - cycle_start[0]).powi(2) + (x[1] - cycle_start[1]).powi(2)).sqrt();
            if moved <= tol {
                break;
            }
            cycle_start = x.clone();
        }
    }
    Ok(path)
}

/// Noisy samples of the peak test signal: `[truth..., data...]`.
pub fn peak_example_impl(m: usize, sigma: f64, seed: u64) -> smre::Result<Vec<f64>> {
    let truth = synthetic::peak_signal(m)?;
    let data = synthetic::add_gaussian_noise(&truth, NoiseModel::new(sigma)?, seed, 0);
    let mut out = truth.into_values();
    out.extend(data.into_values());
    Ok(out)
}

fn js(e: smre::SmreError) -> JsError {
    JsError::new(&e.to_string())
}

/// SMRE regression of `y` (see [`regress_impl`]).
#[wasm_bindgen]
pub fn regress(
    y: Vec<f64>,
    s_max: usize,
    sigma: f64,
    alpha: f64,
    lambda: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Regression, JsError> {
    let params = RegressParams {
        s_max,
        sigma,
        alpha,
        lambda,
        n_trials,
        seed,
    };
    regress_impl(&y, params).map_err(js)
}

/// Noise statistic samples (see [`quantile_samples_impl`]).
#[wasm_bindgen]
pub fn quantile_samples(
    m: usize,
    s_max: usize,
    sigma: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    quantile_samples_impl(m, s_max, sigma, n_trials, seed).map_err(js)
}

/// Empirical `alpha`-quantile of `samples`.
#[wasm_bindgen]
pub fn quantile(samples: Vec<f64>, alpha: f64) -> Result<f64, JsError> {
    empirical_quantile(&samples, alpha).map_err(js)
}

/// Dykstra iterates for two slabs (see [`two_slab_path_impl`]).
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn two_slab_path(
    hx: f64,
    hy: f64,
    ax: f64,
    ay: f64,
    qa: f64,
    bx: f64,
    by: f64,
    qb: f64,
    max_steps: usize,
) -> Result<Vec<f64>, JsError> {
    two_slab_path_impl([hx, hy], [ax, ay], qa, [bx, by], qb, max_steps, 1e-12).map_err(js)
}

/// Peak test signal and a noisy copy (see [`peak_example_impl`]).
#[wasm_bindgen]
pub fn peak_example(m: usize, sigma: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    peak_example_impl(m, sigma, seed).map_err(js)
}
