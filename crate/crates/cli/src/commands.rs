//! The `evaluate` and `generate` commands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use smre::metrics::evaluate as evaluate_one;
use smre::operators::ConvolutionPath;
use smre::{synthetic, GaussianKernel, LinearOperator, NoiseModel, Signal};

use crate::config::{RunConfig, DEFAULT_KERNEL_SIGMA};
use crate::error::{CliError, CliResult, Context, Stage};
use crate::io::{ensure_dir, read_signal, write_json, write_signal};

pub const METRICS_SCHEMA: &str = "smre-metrics/1";

/// One estimate scored against the truth.
#[derive(Debug, Clone, Serialize)]
pub struct TrialMetrics {
    pub estimate: String,
    pub ise: f64,
    pub iae: f64,
    pub bregman: Option<f64>,
    pub local_maxima: Option<usize>,
}

/// Means over trials: MISE, MIAE, MSB (mean symmetric Bregman divergence)
/// and MLM (mean local-maxima count).
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub mise: f64,
    pub miae: f64,
    pub msb: Option<f64>,
    pub mlm: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

pub fn aggregate(trials: &[TrialMetrics]) -> Aggregate {
    let all = |f: fn(&TrialMetrics) -> Option<f64>| -> Option<f64> {
        trials
            .iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| mean(v.into_iter()))
    };
    Aggregate {
        n: trials.len(),
        mise: mean(trials.iter().map(|t| t.ise)),
        miae: mean(trials.iter().map(|t| t.iae)),
        msb: all(|t| t.bregman),
        mlm: all(|t| t.local_maxima.map(|m| m as f64)),
    }
}

/// `evaluate`: scores every input estimate against `truth` and writes
/// `<output_dir>/metrics.json`.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Value> {
    cfg.validate()?;
    let truth_path = cfg
        .truth
        .as_ref()
        .ok_or_else(|| CliError::new(Stage::Config, "evaluate needs a truth file"))?;
    if cfg.input.is_empty() {
        return Err(CliError::new(Stage::Config, "no estimate files given"));
    }
    let truth = read_signal(truth_path)?;
    let reg = cfg.regularizer()?;
    let trials = cfg
        .input
        .par_iter()
        .map(|path| {
            let est = read_signal(path)?;
            let m = evaluate_one(&est, &truth, reg).at(Stage::Evaluate, path)?;
            Ok(TrialMetrics {
                estimate: path.display().to_string(),
                ise: m.ise,
                iae: m.iae,
                bregman: m.bregman,
                local_maxima: m.local_maxima,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let record = json!({
        "schema": METRICS_SCHEMA,
        "truth": truth_path.display().to_string(),
        "regularizer": reg.map(|r| r.name()),
        "trials": trials,
        "aggregate": aggregate(&trials),
    });
    ensure_dir(&cfg.output_dir)?;
    write_json(&record, &cfg.output_dir.join("metrics.json"))?;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthetic {
    /// 1D train of eleven Gaussian peaks plus Gaussian noise.
    Peak,
    /// 2D piecewise-smooth image plus Gaussian noise.
    Image,
    /// 2D two-filament phantom, blurred, with Poisson counts.
    Phantom,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Synthetic,
    /// Grid side; defaults to 256 for `peak` and 64 otherwise.
    #[arg(long)]
    pub side: Option<usize>,
    /// Gaussian noise level; defaults to 0.3 for `peak` and 0.1 for `image`.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short, default_value = "smre-data")]
    pub output_dir: PathBuf,
    /// Blur width of the phantom.
    #[arg(long, default_value_t = DEFAULT_KERNEL_SIGMA)]
    pub kernel_sigma: f64,
    /// Phantom background intensity (expected counts).
    #[arg(long, default_value_t = 2.0)]
    pub background: f64,
    /// Phantom filament intensity above the background.
    #[arg(long, default_value_t = 20.0)]
    pub peak: f64,
}

/// Seed of the Poisson draw for one trial.
fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ (trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `generate`: writes `truth.csv` and `data_NNN.csv` (plus PGM previews in
/// 2D) and a `generate.json` manifest.
pub fn generate(args: &GenerateArgs) -> CliResult<Value> {
    let side = args.side.unwrap_or(match args.kind {
        Synthetic::Peak => 256,
        Synthetic::Image | Synthetic::Phantom => 64,
    });
    let truth = match args.kind {
        Synthetic::Peak => synthetic::peak_signal(side),
        Synthetic::Image => synthetic::denoise_test_image(side),
        Synthetic::Phantom => synthetic::two_filament_phantom(side, args.background, args.peak),
    }
    .stage(Stage::Generate)?;
    let sigma = match args.kind {
        Synthetic::Peak => Some(args.sigma.unwrap_or(0.3)),
        Synthetic::Image => Some(args.sigma.unwrap_or(0.1)),
        Synthetic::Phantom => None,
    };
    let blur = match args.kind {
        Synthetic::Phantom => {
            let kernel =
                GaussianKernel::with_default_radius(args.kernel_sigma, 2).stage(Stage::Generate)?;
            Some(
                LinearOperator::convolution(truth.grid(), kernel, ConvolutionPath::Auto)
                    .stage(Stage::Generate)?,
            )
        }
        _ => None,
    };
    let noise = sigma
        .map(NoiseModel::new)
        .transpose()
        .stage(Stage::Generate)?;

    ensure_dir(&args.output_dir)?;
    write_signal(&truth, &args.output_dir, "truth")?;
    let files = (0..args.trials)
        .into_par_iter()
        .map(|trial| {
            let data: Signal = match (&blur, noise) {
                (Some(k), _) => {
                    synthetic::blur_and_poisson(&truth, k, trial_seed(args.seed, trial))
                        .stage(Stage::Generate)?
                }
                (None, Some(n)) => synthetic::add_gaussian_noise(&truth, n, args.seed, trial),
                (None, None) => unreachable!("every kind has a noise model"),
            };
            let stem = format!("data_{trial:03}");
            write_signal(&data, &args.output_dir, &stem)?;
            Ok(args
                .output_dir
                .join(format!("{stem}.csv"))
                .display()
                .to_string())
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = json!({
        "kind": args.kind,
        "side": side,
        "dim": truth.grid().dim(),
        "noise": match sigma { Some(s) => json!({"model": "gaussian", "sigma": s}), None => json!({"model": "poisson", "kernel_sigma": args.kernel_sigma}) },
        "seed": args.seed,
        "truth": args.output_dir.join("truth.csv").display().to_string(),
        "data": files,
    });
    write_json(&manifest, &args.output_dir.join("generate.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_is_the_mean_of_trials() {
        let t = |ise, iae, b: Option<f64>, m: Option<usize>| TrialMetrics {
            estimate: String::new(),
            ise,
            iae,
            bregman: b,
            local_maxima: m,
        };
        let trials = [
            t(1.0, 2.0, Some(0.5), Some(3)),
            t(3.0, 4.0, Some(1.5), Some(6)),
        ];
        let a = aggregate(&trials);
        assert_eq!(
            (a.n, a.mise, a.miae, a.msb, a.mlm),
            (2, 2.0, 3.0, Some(1.0), Some(4.5))
        );
        let a = aggregate(&[t(1.0, 1.0, None, None)]);
        assert_eq!((a.msb, a.mlm), (None, None));
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|t| trial_seed(7, t)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
