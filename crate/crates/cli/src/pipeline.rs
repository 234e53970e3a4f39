//! The `run` and `simulate-quantiles` commands: data loading, threshold
//! calibration, constraint assembly and the solver call.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use smre::operators::{default_radius, ConvolutionPath};
use smre::windows::enumerate;
use smre::{
    admm_solve, admm_solve_poisson, gaussian_kernel, AdmmReport, ConstraintSystem, ExitStatus,
    Grid, LinearOperator, QuantileTable, Signal, TableKind, TableSpec, Transform, Weighting,
};

use crate::config::{NamedNoise, NoiseSpec, Pipeline, RunConfig};
use crate::error::{CliError, CliResult, Context, Stage};
use crate::io::{ensure_dir, read_signal, write_json, write_signal};

/// `Phi^{-1}(3/4)`, the MAD of a standard normal variable.
const MAD_NORMAL: f64 = 0.674_489_750_196_081_7;

/// Noise level used for calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub sigma: f64,
    pub poisson: bool,
    pub estimated: bool,
}

impl NoiseLevel {
    fn to_json(self) -> Value {
        json!({
            "model": if self.poisson { "poisson" } else { "gaussian" },
            "sigma": self.sigma,
            "estimated": self.estimated,
        })
    }
}

/// Median absolute first difference along rows, scaled to a standard
/// deviation: `median |y_{i+1} - y_i| / (sqrt(2) Phi^{-1}(3/4))`.
pub fn estimate_sigma(signal: &Signal) -> Option<f64> {
    let grid = signal.grid();
    let row = if grid.dim() == 1 {
        grid.len()
    } else {
        grid.side()
    };
    let mut diffs: Vec<f64> = signal
        .values()
        .chunks(row)
        .flat_map(|r| r.windows(2).map(|w| (w[1] - w[0]).abs()))
        .collect();
    if diffs.is_empty() {
        return None;
    }
    let mid = diffs.len() / 2;
    let (_, median, _) = diffs.select_nth_unstable_by(mid, f64::total_cmp);
    let sigma = *median / (MAD_NORMAL * std::f64::consts::SQRT_2);
    (sigma > 0.0 && sigma.is_finite()).then_some(sigma)
}

fn noise_level(
    cfg: &RunConfig,
    pipeline: Pipeline,
    data: Option<&Signal>,
) -> CliResult<NoiseLevel> {
    let poisson = NoiseSpec::Named(NamedNoise::Poisson);
    match (pipeline, cfg.sigma) {
        (Pipeline::Deconvolve, None) => Ok(NoiseLevel {
            sigma: 1.0,
            poisson: true,
            estimated: false,
        }),
        (Pipeline::Deconvolve, Some(s)) if s == poisson => Ok(NoiseLevel {
            sigma: 1.0,
            poisson: true,
            estimated: false,
        }),
        (Pipeline::Deconvolve, Some(_)) => Err(CliError::new(
            Stage::Config,
            "the deconvolve pipeline models Poisson noise; sigma must be \"poisson\" or unset",
        )),
        (_, Some(NoiseSpec::Gaussian(sigma))) => Ok(NoiseLevel {
            sigma,
            poisson: false,
            estimated: false,
        }),
        (_, Some(_)) => Err(CliError::new(
            Stage::Config,
            format!("{pipeline:?} assumes Gaussian noise; give sigma as a number"),
        )),
        (_, None) => {
            let signal = data.ok_or_else(|| {
                CliError::new(Stage::Config, "sigma is required without input data")
            })?;
            let sigma = estimate_sigma(signal).ok_or_else(|| {
                CliError::new(
                    Stage::Config,
                    "cannot estimate the noise level from the data; set sigma",
                )
            })?;
            log::info!("estimated noise level sigma = {sigma}");
            Ok(NoiseLevel {
                sigma,
                poisson: false,
                estimated: true,
            })
        }
    }
}

/// Calibration spec of the threshold for `pipeline` on `grid`.
pub fn table_spec(cfg: &RunConfig, grid: Grid, noise: NoiseLevel) -> CliResult<TableSpec> {
    let pipeline = cfg.pipeline()?;
    let (s_min, s_max) = cfg.scales(grid.side())?;
    let (kind, weighting) = match pipeline {
        Pipeline::Regress1d => (TableKind::Global, "normalized"),
        Pipeline::Denoise2d => (TableKind::PerScale, "indicator"),
        Pipeline::Deconvolve => (TableKind::Global, "indicator"),
    };
    Ok(TableSpec {
        kind,
        dim: grid.dim(),
        side: grid.side(),
        s_min,
        s_max,
        transform: cfg.transform()?,
        weighting: weighting.into(),
        alpha: cfg.alpha,
        sigma: noise.sigma,
        n_trials: cfg.n_trials,
        seed: cfg.seed,
    })
}

/// A threshold table with its provenance.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub table: QuantileTable,
    pub source: PathBuf,
    pub cache_hit: bool,
    pub seconds: f64,
}

impl Calibration {
    fn to_json(&self) -> Value {
        json!({
            "key": self.table.spec.key(),
            "source": self.source.display().to_string(),
            "cache_hit": self.cache_hit,
            "alpha": self.table.spec.alpha,
            "sigma": self.table.spec.sigma,
            "n_trials": self.table.spec.n_trials,
            "seed": self.table.spec.seed,
            "global_q": self.table.global_q,
            "per_scale": self.table.per_scale.iter().map(|(s, q)| (s.to_string(), json!(q))).collect::<serde_json::Map<_, _>>(),
            "seconds": self.seconds,
        })
    }
}

fn same_calibration(a: &TableSpec, b: &TableSpec) -> bool {
    (
        a.kind,
        a.dim,
        a.side,
        a.s_min,
        a.s_max,
        a.transform,
        &a.weighting,
    ) == (
        b.kind,
        b.dim,
        b.side,
        b.s_min,
        b.s_max,
        b.transform,
        &b.weighting,
    ) && a.alpha == b.alpha
        && a.sigma == b.sigma
}

/// Loads the explicit table if configured, otherwise loads or simulates it
/// through the cache.
pub fn calibrate(cfg: &RunConfig, spec: &TableSpec) -> CliResult<Calibration> {
    let start = Instant::now();
    if let Some(path) = &cfg.quantile_table {
        let table = QuantileTable::load(path).at(Stage::Quantiles, path)?;
        if !same_calibration(&table.spec, spec) {
            return Err(CliError::at(
                Stage::Quantiles,
                path,
                "table was calibrated for a different grid, window range, transform, alpha or sigma",
            ));
        }
        return Ok(Calibration {
            table,
            source: path.clone(),
            cache_hit: true,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let dir = cfg.cache_dir();
    let (table, cache_hit) = spec.load_or_compute(dir).at(Stage::Quantiles, dir)?;
    if cache_hit {
        log::info!(
            "quantile table {} served from cache, no simulation",
            spec.key()
        );
    }
    Ok(Calibration {
        table,
        source: dir.join(format!("{}.qtable", spec.key())),
        cache_hit,
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct Job {
    input: PathBuf,
    stem: String,
    data: Signal,
    noise: NoiseLevel,
    spec: TableSpec,
    load_seconds: f64,
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

/// `run`: one estimate per input, written to `<output_dir>/<input stem>/`.
/// Returns one summary record per input.
pub fn run(cfg: &RunConfig) -> CliResult<Vec<Value>> {
    cfg.validate()?;
    let pipeline = cfg.pipeline()?;
    if cfg.input.is_empty() {
        return Err(CliError::new(Stage::Config, "no input files given"));
    }
    let mut jobs = Vec::with_capacity(cfg.input.len());
    for input in &cfg.input {
        let start = Instant::now();
        let data = read_signal(input)?;
        if data.grid().dim() != pipeline.dim() {
            return Err(CliError::at(
                Stage::Input,
                input,
                format!(
                    "{pipeline:?} expects {}D data, got {}D",
                    pipeline.dim(),
                    data.grid().dim()
                ),
            ));
        }
        let noise = noise_level(cfg, pipeline, Some(&data))?;
        let spec = table_spec(cfg, data.grid(), noise)?;
        let stem = stem_of(input);
        if jobs.iter().any(|j: &Job| j.stem == stem) {
            return Err(CliError::at(
                Stage::Config,
                input,
                format!("two inputs share the output name {stem}"),
            ));
        }
        jobs.push(Job {
            input: input.clone(),
            stem,
            data,
            noise,
            spec,
            load_seconds: start.elapsed().as_secs_f64(),
        });
    }

    // Tables are obtained one at a time so that batch members sharing a
    // spec never race on the same cache file.
    let mut tables: HashMap<String, Calibration> = HashMap::new();
    for job in &jobs {
        let key = job.spec.key();
        if let std::collections::hash_map::Entry::Vacant(e) = tables.entry(key) {
            let cal = calibrate(cfg, &job.spec)?;
            e.insert(cal);
        }
    }

    jobs.par_iter()
        .map(|job| solve_job(cfg, pipeline, job, &tables[&job.spec.key()]))
        .collect()
}

fn operator(
    cfg: &RunConfig,
    pipeline: Pipeline,
    grid: Grid,
) -> CliResult<(LinearOperator, Option<(f64, usize)>)> {
    if pipeline != Pipeline::Deconvolve {
        return Ok((LinearOperator::identity(grid), None));
    }
    let radius = cfg
        .kernel_radius
        .unwrap_or(default_radius(cfg.kernel_sigma));
    let kernel = gaussian_kernel(cfg.kernel_sigma, radius, grid.dim()).stage(Stage::Config)?;
    let k =
        LinearOperator::convolution(grid, kernel, ConvolutionPath::Auto).stage(Stage::Config)?;
    Ok((k, Some((cfg.kernel_sigma, radius))))
}

fn system(
    pipeline: Pipeline,
    grid: Grid,
    transform: Transform,
    table: &QuantileTable,
) -> smre::Result<ConstraintSystem> {
    let spec = &table.spec;
    let windows = enumerate(grid, spec.s_min, spec.s_max)?;
    match pipeline {
        Pipeline::Regress1d => {
            ConstraintSystem::windowed(windows, Weighting::Normalized, transform, table.global_q)
        }
        Pipeline::Denoise2d => ConstraintSystem::windowed(
            windows,
            Weighting::PerSide(table.side_coefficients()),
            transform,
            1.0,
        ),
        Pipeline::Deconvolve => {
            ConstraintSystem::windowed(windows, Weighting::Indicator, transform, table.global_q)
        }
    }
}

fn status_name(status: ExitStatus) -> &'static str {
    match status {
        ExitStatus::Converged => "converged",
        ExitStatus::MaxIter => "max_iter",
    }
}

fn solve_job(
    cfg: &RunConfig,
    pipeline: Pipeline,
    job: &Job,
    cal: &Calibration,
) -> CliResult<Value> {
    let total = Instant::now();
    let grid = job.data.grid();
    let transform = cfg.transform()?;
    let sys = system(pipeline, grid, transform, &cal.table).at(Stage::Solve, &job.input)?;
    let (k, kernel) = operator(cfg, pipeline, grid)?;
    let reg = cfg
        .regularizer()?
        .expect("pipelines always have a regularizer");
    let admm = cfg.admm()?;
    log::info!(
        "{}: {} constraints in {} groups, q = {}",
        job.input.display(),
        sys.num_constraints(),
        sys.num_groups(),
        sys.q()
    );
    let y = job.data.values();
    let report = match pipeline {
        Pipeline::Deconvolve => admm_solve_poisson(&k, y, reg, &sys, &admm),
        _ => admm_solve(&k, y, reg, &sys, &admm),
    }
    .at(Stage::Solve, &job.input)?;

    let out_start = Instant::now();
    let dir = cfg.output_dir.join(&job.stem);
    ensure_dir(&dir)?;
    let estimate = Signal::new(grid, report.u.clone()).at(Stage::Output, &dir)?;
    let scale = write_signal(&estimate, &dir, "estimate")?;
    let output_seconds = out_start.elapsed().as_secs_f64();

    let diagnostics = diagnostics(
        cfg,
        pipeline,
        job,
        cal,
        &sys,
        &report,
        kernel,
        scale,
        &dir,
        output_seconds,
        total,
    );
    write_json(&diagnostics, &dir.join("diagnostics.json"))?;
    Ok(json!({
        "input": job.input.display().to_string(),
        "output_dir": dir.display().to_string(),
        "k_tau": report.iterations,
        "status": status_name(report.status),
        "final_statistic": report.final_statistic,
        "q": sys.q(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    cfg: &RunConfig,
    pipeline: Pipeline,
    job: &Job,
    cal: &Calibration,
    sys: &ConstraintSystem,
    report: &AdmmReport,
    kernel: Option<(f64, usize)>,
    scale: Option<crate::io::PgmScale>,
    dir: &Path,
    output_seconds: f64,
    total: Instant,
) -> Value {
    let grid = job.data.grid();
    let admm = cfg.admm().expect("validated");
    let reg = cfg.regularizer().ok().flatten().expect("validated");
    json!({
        "schema": "smre-diagnostics/1",
        "input": job.input.display().to_string(),
        "pipeline": pipeline,
        "grid": {"dim": grid.dim(), "side": grid.side()},
        "regularizer": {"kind": reg.name(), "beta": cfg.beta},
        "transform": sys.transform().name(),
        "windows": {"s_min": cal.table.spec.s_min, "s_max": cal.table.spec.s_max, "constraints": sys.num_constraints(), "groups": sys.num_groups()},
        "noise": job.noise.to_json(),
        "kernel": kernel.map(|(sigma, radius)| json!({"sigma": sigma, "radius": radius})),
        "admm": {"lambda": admm.lambda, "tau": admm.tau, "max_outer": admm.max_outer, "variant": format!("{:?}", report.variant)},
        "quantiles": cal.to_json(),
        "q": sys.q(),
        "k_tau": report.iterations,
        "status": status_name(report.status),
        "residuals": report.residuals,
        "objective": report.objective,
        "feasibility_trace": report.feasibility_trace,
        "final_statistic": report.final_statistic,
        "feasibility": report.feasibility,
        "dykstra_sweeps": report.dykstra_sweeps,
        "inner_iterations": report.inner_iterations,
        "unconverged_subproblems": report.unconverged_subproblems,
        "times": {
            "load": job.load_seconds,
            "quantiles": cal.seconds,
            "projection": report.times.projection,
            "prox": report.times.prox,
            "other": report.times.other,
            "output": output_seconds,
            "total": total.elapsed().as_secs_f64() + job.load_seconds + cal.seconds,
        },
        "outputs": {
            "csv": dir.join("estimate.csv").display().to_string(),
            "pgm": scale.map(|_| dir.join("estimate.pgm").display().to_string()),
            "pgm_scale": scale,
        },
    })
}

/// `simulate-quantiles`: builds (or finds in the cache) the table a run
/// with the same configuration would use.
pub fn simulate_quantiles(cfg: &RunConfig) -> CliResult<Value> {
    cfg.validate()?;
    let pipeline = cfg.pipeline()?;
    let data = cfg.input.first().map(|p| read_signal(p)).transpose()?;
    let grid = match (&data, cfg.grid_side) {
        (Some(d), _) => d.grid(),
        (None, Some(side)) => Grid::new(pipeline.dim(), side).stage(Stage::Config)?,
        (None, None) => {
            return Err(CliError::new(
                Stage::Config,
                "give an input file or grid_side",
            ))
        }
    };
    let noise = noise_level(cfg, pipeline, data.as_ref())?;
    let spec = table_spec(cfg, grid, noise)?;
    let cal = calibrate(cfg, &spec)?;
    Ok(cal.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use smre::NoiseModel;

    #[test]
    fn sigma_estimate_recovers_the_noise_level() {
        let truth = smre::synthetic::peak_signal(4096).unwrap();
        let y = smre::synthetic::add_gaussian_noise(&truth, NoiseModel::new(0.3).unwrap(), 1, 0);
        let s = estimate_sigma(&y).unwrap();
        assert!((s - 0.3).abs() < 0.02, "{s}");
        let flat = Signal::constant(Grid::line(10).unwrap(), 1.0);
        assert_eq!(estimate_sigma(&flat), None);
    }
}
