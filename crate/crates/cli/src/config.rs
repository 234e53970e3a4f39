//! Run configuration: a JSON document whose fields can be overridden by
//! command-line flags of the same name.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use smre::quantiles::{CACHE_ENV, DEFAULT_TRIALS, MIN_TRIALS};
use smre::{AdmmConfig, Regularizer, Transform};

use crate::error::{CliError, CliResult, Context, Stage};

/// Kernel width (in pixels) of the deconvolution pipeline.
pub const DEFAULT_KERNEL_SIGMA: f64 = 4.3422;
pub const DEFAULT_CACHE_DIR: &str = ".smre-cache";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// 1D regression: normalized interval windows, TV2 penalty.
    Regress1d,
    /// 2D denoising: per-scale squared-residual windows, TV1 penalty.
    Denoise2d,
    /// 2D Poisson deconvolution with a Gaussian kernel.
    Deconvolve,
}

impl Pipeline {
    pub fn dim(self) -> usize {
        match self {
            Pipeline::Regress1d => 1,
            Pipeline::Denoise2d | Pipeline::Deconvolve => 2,
        }
    }

    pub fn default_s_max(self) -> usize {
        match self {
            Pipeline::Regress1d => 100,
            Pipeline::Denoise2d | Pipeline::Deconvolve => 25,
        }
    }

    pub fn default_regularizer(self) -> RegularizerKind {
        match self {
            Pipeline::Regress1d => RegularizerKind::Tv2,
            Pipeline::Denoise2d | Pipeline::Deconvolve => RegularizerKind::Tv1beta,
        }
    }

    pub fn default_transform(self) -> TransformKind {
        match self {
            Pipeline::Denoise2d => TransformKind::Square,
            Pipeline::Regress1d | Pipeline::Deconvolve => TransformKind::Identity,
        }
    }

    fn preset(self) -> AdmmConfig {
        match self {
            Pipeline::Regress1d => AdmmConfig::regress1d(),
            Pipeline::Denoise2d => AdmmConfig::denoise2d(),
            Pipeline::Deconvolve => AdmmConfig::deconvolve(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    Tv2,
    Tv1beta,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Identity,
    Square,
}

impl From<TransformKind> for Transform {
    fn from(t: TransformKind) -> Self {
        match t {
            TransformKind::Identity => Transform::Identity,
            TransformKind::Square => Transform::Square,
        }
    }
}

/// Noise level: a Gaussian standard deviation or the word `"poisson"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Gaussian(f64),
    Named(NamedNoise),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedNoise {
    Poisson,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("smre-out")
}
fn default_beta() -> f64 {
    smre::prox::DEFAULT_BETA
}
fn default_s_min() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.9
}
fn default_kernel_sigma() -> f64 {
    DEFAULT_KERNEL_SIGMA
}
fn default_n_trials() -> usize {
    DEFAULT_TRIALS
}

/// The declarative description of a run. Unset optional fields take the
/// pipeline's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Option<Pipeline>,
    /// Data files (runs) or estimate files (evaluate).
    #[serde(default)]
    pub input: Vec<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub regularizer: Option<RegularizerKind>,
    /// Smoothing parameter of the TV1 penalty.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_s_min")]
    pub s_min: usize,
    /// Largest window side; capped at the grid side.
    pub s_max: Option<usize>,
    pub transform: Option<TransformKind>,
    /// Coverage level of the threshold.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Noise level; estimated from the data when unset in Gaussian pipelines.
    pub sigma: Option<NoiseSpec>,
    #[serde(default = "default_kernel_sigma")]
    pub kernel_sigma: f64,
    pub kernel_radius: Option<usize>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub max_outer: Option<usize>,
    pub epsilon_safe: Option<f64>,
    /// Prox tolerance at outer step `k` is `inner_tol_base / k^2`.
    pub inner_tol_base: Option<f64>,
    /// Dykstra tolerance at outer step `k` is `dykstra_tol_base / k^2`.
    pub dykstra_tol_base: Option<f64>,
    #[serde(default = "default_n_trials")]
    pub n_trials: usize,
    /// Seed of the quantile simulation.
    #[serde(default)]
    pub seed: u64,
    /// Explicit quantile table file; bypasses the cache.
    pub quantile_table: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Grid side for `simulate-quantiles` without input data.
    pub grid_side: Option<usize>,
    /// Ground truth for `evaluate`.
    pub truth: Option<PathBuf>,
}

/// Flags mirroring [`RunConfig`]; set flags override the config file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Pipeline preset (required).
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<Pipeline>,
    /// Input file; repeat for a batch.
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub input: Vec<PathBuf>,
    /// Output directory; defaults to `smre-out`.
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Penalty; defaults to `tv2` in 1D and `tv1beta` in 2D.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<RegularizerKind>,
    /// Smoothing parameter of `tv1beta`; defaults to 1e-8.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Smallest window side; defaults to 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<usize>,
    /// Largest window side; defaults to 100 in 1D and 25 in 2D.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<usize>,
    /// Residual transform; `square` for `denoise2d`, `identity` otherwise.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformKind>,
    /// Coverage probability of the threshold; defaults to 0.9.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Noise standard deviation or `poisson`; a Gaussian level is estimated
    /// from the data when omitted.
    #[arg(long, value_parser = parse_noise)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<NoiseSpec>,
    /// Standard deviation of the Gaussian blur in pixels (`deconvolve`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_sigma: Option<f64>,
    /// Truncation radius of the blur kernel in pixels.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_radius: Option<usize>,
    /// ADMM penalty parameter; defaults to the pipeline preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Stopping tolerance on the outer residual; defaults to 1e-4.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Maximum number of ADMM iterations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    /// Floor of the Poisson standardization; defaults to 1e-3 times the largest count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_safe: Option<f64>,
    /// Prox tolerance at step k is max(base / k^2, 1e-9).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_tol_base: Option<f64>,
    /// Projection tolerance at step k is max(base / k^2, 1e-9).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dykstra_tol_base: Option<f64>,
    /// Monte-Carlo trials for the threshold; defaults to 5000.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    /// Seed of the threshold simulation; defaults to 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Use this quantile table instead of simulating or reading the cache.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile_table: Option<PathBuf>,
    /// Quantile cache directory; falls back to `SMRE_QUANTILE_CACHE`, then
    /// `.smre-cache`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Grid side for `simulate-quantiles` without an input file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_side: Option<usize>,
    /// Ground truth for `evaluate`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
}

fn parse_noise(s: &str) -> Result<NoiseSpec, String> {
    if s.eq_ignore_ascii_case("poisson") {
        return Ok(NoiseSpec::Named(NamedNoise::Poisson));
    }
    s.parse::<f64>()
        .map(NoiseSpec::Gaussian)
        .map_err(|_| format!("expected a number or 'poisson', got '{s}'"))
}

impl ConfigArgs {
    /// Reads the config file (if any), applies the flags on top and
    /// deserializes the result.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut doc = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).at(Stage::Config, path)?;
                match serde_json::from_str::<Value>(&text).at(Stage::Config, path)? {
                    Value::Object(map) => map,
                    _ => {
                        return Err(CliError::at(
                            Stage::Config,
                            path,
                            "config must be a JSON object",
                        ))
                    }
                }
            }
            None => Map::new(),
        };
        if let Value::Object(flags) = serde_json::to_value(self).stage(Stage::Config)? {
            doc.extend(flags);
        }
        let mut cfg: RunConfig =
            serde_json::from_value(Value::Object(doc)).map_err(|e| match &self.config {
                Some(p) => CliError::at(Stage::Config, p, e),
                None => CliError::new(Stage::Config, e),
            })?;
        if cfg.cache_dir.is_none() {
            cfg.cache_dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> CliResult<Pipeline> {
        self.pipeline.ok_or_else(|| {
            CliError::new(
                Stage::Config,
                "no pipeline given (regress1d, denoise2d or deconvolve)",
            )
        })
    }

    pub fn cache_dir(&self) -> &Path {
        self.cache_dir
            .as_deref()
            .unwrap_or(Path::new(DEFAULT_CACHE_DIR))
    }

    pub fn regularizer_kind(&self) -> Option<RegularizerKind> {
        self.regularizer
            .or(self.pipeline.map(Pipeline::default_regularizer))
    }

    pub fn regularizer(&self) -> CliResult<Option<Regularizer>> {
        Ok(match self.regularizer_kind() {
            None => None,
            Some(RegularizerKind::Tv2) => Some(Regularizer::Tv2),
            Some(RegularizerKind::L1) => Some(Regularizer::L1),
            Some(RegularizerKind::Tv1beta) => {
                Some(Regularizer::tv1beta(self.beta).stage(Stage::Config)?)
            }
        })
    }

    pub fn transform(&self) -> CliResult<Transform> {
        let pipeline = self.pipeline()?;
        let t = self.transform.unwrap_or(pipeline.default_transform());
        let allowed = match pipeline {
            Pipeline::Regress1d => true,
            Pipeline::Denoise2d => t == TransformKind::Square,
            Pipeline::Deconvolve => t == TransformKind::Identity,
        };
        if !allowed {
            return Err(CliError::new(
                Stage::Config,
                format!("transform {t:?} is not supported by the {pipeline:?} pipeline"),
            ));
        }
        Ok(t.into())
    }

    /// `(s_min, s_max)` for a grid of side `m`.
    pub fn scales(&self, m: usize) -> CliResult<(usize, usize)> {
        let s_max = self
            .s_max
            .unwrap_or(self.pipeline()?.default_s_max())
            .min(m);
        if self.s_min == 0 || self.s_min > s_max {
            return Err(CliError::new(
                Stage::Config,
                format!(
                    "invalid window sides {}..={s_max} for grid side {m}",
                    self.s_min
                ),
            ));
        }
        Ok((self.s_min, s_max))
    }

    pub fn admm(&self) -> CliResult<AdmmConfig> {
        let mut cfg = self.pipeline()?.preset();
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(k) = self.max_outer {
            cfg.max_outer = k;
        }
        if let Some(b) = self.inner_tol_base {
            cfg.inner_tol_base = b;
        }
        if let Some(b) = self.dykstra_tol_base {
            cfg.dykstra_tol_base = b;
        }
        cfg.epsilon_safe = self.epsilon_safe;
        cfg.validate().stage(Stage::Config)?;
        Ok(cfg)
    }

    /// Range checks and existence of referenced files.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::new(Stage::Config, msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return bad(format!(
                "kernel_sigma must be positive, got {}",
                self.kernel_sigma
            ));
        }
        if self.n_trials < MIN_TRIALS {
            return bad(format!(
                "n_trials must be at least {MIN_TRIALS}, got {}",
                self.n_trials
            ));
        }
        if let Some(NoiseSpec::Gaussian(s)) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        if self.pipeline.is_some() {
            self.admm()?;
            self.transform()?;
        }
        let files = self
            .input
            .iter()
            .chain(&self.quantile_table)
            .chain(&self.truth);
        for path in files {
            if !path.is_file() {
                return Err(CliError::at(Stage::Input, path, "file not found"));
            }
        }
        Ok(())
    }
}
