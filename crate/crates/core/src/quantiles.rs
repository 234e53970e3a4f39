//! Monte-Carlo calibration of the threshold `q`: global quantiles of the
//! multiresolution statistic of pure noise, and per-scale constants for the
//! squared-residual statistic.
//!
//! Trial `i` of a simulation with seed `s` draws its noise from the ChaCha8
//! stream `(s, i)`, so results do not depend on how trials are scheduled.
//!
//! Level convention: `alpha` is always the coverage probability. The global
//! threshold is the empirical `alpha`-quantile of `T(eps)`, and the scale-`s`
//! constant is the empirical `alpha`-quantile of the scale-`s` maximum, so
//! noise satisfies the corresponding constraints with probability about
//! `alpha` in both pipelines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::constraints::{ConstraintSystem, Weighting, WindowSums};
use crate::error::{invalid, Result, SmreError};
use crate::grid::{Grid, NoiseModel, Transform};
use crate::windows::{enumerate, Window};

/// Default number of Monte-Carlo trials.
pub const DEFAULT_TRIALS: usize = 5000;
/// Minimum accepted number of trials.
pub const MIN_TRIALS: usize = 100;
/// Environment variable naming the quantile cache directory.
pub const CACHE_ENV: &str = "SMRE_QUANTILE_CACHE";

const HEADER: &str = "# smre quantile table v1";

/// Gaussian noise field of trial `trial` under `seed`.
pub fn noise_field(grid: Grid, noise: NoiseModel, seed: u64, trial: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..grid.len())
        .map(|_| noise.sigma() * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[cfg(feature = "parallel")]
fn map_trials<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_trials<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).map(f).collect()
}

/// `T(eps_i)` for trials `i = 0..n_trials`.
pub fn simulate_statistics(
    system: &ConstraintSystem,
    noise: NoiseModel,
    n_trials: usize,
    seed: u64,
) -> Vec<f64> {
    let grid = system.grid();
    map_trials(n_trials, |t| {
        system.statistic(&noise_field(grid, noise, seed, t))
    })
}

/// Order statistic at position `ceil(alpha n)` (1-based) of `samples`.
pub fn empirical_quantile(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((alpha * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_trials(n: usize) -> Result<()> {
    if n < MIN_TRIALS {
        return Err(invalid(format!(
            "at least {MIN_TRIALS} trials required, got {n}"
        )));
    }
    Ok(())
}

/// Which statistic a table calibrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// `q` = quantile of `T(eps)` for a windowed system.
    Global,
    /// Per-side quantiles of `max_{#S = s^d} sum_S eps^2`; `q = 1`.
    PerScale,
}

impl TableKind {
    fn name(self) -> &'static str {
        match self {
            TableKind::Global => "global",
            TableKind::PerScale => "per_scale",
        }
    }
}

/// Everything that determines a table's values.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub kind: TableKind,
    pub dim: usize,
    pub side: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub transform: Transform,
    /// `"normalized"` or `"indicator"` for global tables, `"indicator"` for
    /// per-scale tables.
    pub weighting: String,
    pub alpha: f64,
    pub sigma: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl TableSpec {
    fn descriptor(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "side = {}", self.side);
        let _ = writeln!(s, "s_min = {}", self.s_min);
        let _ = writeln!(s, "s_max = {}", self.s_max);
        let _ = writeln!(s, "transform = {}", self.transform.name());
        let _ = writeln!(s, "weighting = {}", self.weighting);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "n_trials = {}", self.n_trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Cache key: SHA-256 of the canonical descriptor.
    pub fn key(&self) -> String {
        hex(&Sha256::digest(self.descriptor().as_bytes()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.side)
    }

    /// The windowed system a global table calibrates, with threshold `q`.
    pub fn system(&self, q: f64) -> Result<ConstraintSystem> {
        let weighting = match self.weighting.as_str() {
            "normalized" => Weighting::Normalized,
            "indicator" => Weighting::Indicator,
            other => return Err(invalid(format!("unknown weighting {other}"))),
        };
        ConstraintSystem::windowed(
            enumerate(self.grid()?, self.s_min, self.s_max)?,
            weighting,
            self.transform,
            q,
        )
    }

    /// Runs the simulation described by this spec.
    pub fn compute(&self) -> Result<QuantileTable> {
        let noise = NoiseModel::new(self.sigma)?;
        match self.kind {
            TableKind::Global => {
                let system = self.system(1.0)?;
                simulate_global_quantile(&system, noise, self.alpha, self.n_trials, self.seed)
            }
            TableKind::PerScale => per_scale_constants(
                self.grid()?,
                self.s_min,
                self.s_max,
                noise,
                self.alpha,
                self.n_trials,
                self.seed,
            ),
        }
    }

    /// Loads the table from `dir` when a valid cached copy exists, otherwise
    /// computes and stores it. The flag reports a cache hit.
    pub fn load_or_compute(&self, dir: &Path) -> Result<(QuantileTable, bool)> {
        let path = dir.join(format!("{}.qtable", self.key()));
        if path.exists() {
            let table = QuantileTable::load(&path)?;
            if table.spec == *self {
                log::info!("quantile cache hit: {}", path.display());
                return Ok((table, true));
            }
            log::warn!(
                "cached table {} does not match its key, recomputing",
                path.display()
            );
        }
        log::info!("simulating quantile table ({} trials)", self.n_trials);
        let table = self.compute()?;
        table.save(&path)?;
        Ok((table, false))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A calibrated threshold table.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    pub spec: TableSpec,
    /// Threshold `q` to use with the calibrated system.
    pub global_q: f64,
    /// Side length to `q_{alpha,s}` (per-scale tables only).
    pub per_scale: BTreeMap<usize, f64>,
}

impl QuantileTable {
    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// `c_S = 1 / q_{alpha,s}` indexed by `s - s_min`, ready for
    /// [`Weighting::PerSide`].
    pub fn side_coefficients(&self) -> Vec<f64> {
        self.per_scale.values().map(|q| 1.0 / q).collect()
    }

    /// Self-describing key-value text; floats use shortest round-trip
    /// formatting, so [`QuantileTable::from_text`] restores them bit-exactly.
    pub fn to_text(&self) -> String {
        let mut body = String::new();
        let _ = writeln!(body, "{HEADER}");
        let _ = writeln!(body, "key = {}", self.spec.key());
        body.push_str(&self.spec.descriptor());
        let _ = writeln!(body, "global_q = {}", self.global_q);
        for (s, q) in &self.per_scale {
            let _ = writeln!(body, "scale.{s} = {q}");
        }
        let digest = hex(&Sha256::digest(body.as_bytes()));
        let _ = writeln!(body, "hash = {digest}");
        body
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |m: String| SmreError::Parse(m);
        let hash_pos = text
            .rfind("hash = ")
            .ok_or_else(|| perr("missing hash line".into()))?;
        let (body, hash_line) = text.split_at(hash_pos);
        let stored = hash_line.trim_start_matches("hash = ").trim();
        if hex(&Sha256::digest(body.as_bytes())) != stored {
            return Err(perr("content hash mismatch".into()));
        }
        let mut lines = body.lines();
        if lines.next() != Some(HEADER) {
            return Err(perr("unknown header".into()));
        }
        let mut map = BTreeMap::new();
        let mut per_scale = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| perr(format!("bad line {line:?}")))?;
            if let Some(s) = k.strip_prefix("scale.") {
                let s: usize = s.parse().map_err(|_| perr(format!("bad scale {s:?}")))?;
                per_scale.insert(s, parse_f64(v)?);
            } else {
                map.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| perr(format!("missing field {k}")))
        };
        let kind = match get("kind")?.as_str() {
            "global" => TableKind::Global,
            "per_scale" => TableKind::PerScale,
            other => return Err(perr(format!("unknown kind {other}"))),
        };
        let transform = match get("transform")?.as_str() {
            "identity" => Transform::Identity,
            "square" => Transform::Square,
            other => return Err(perr(format!("unknown transform {other}"))),
        };
        let spec = TableSpec {
            kind,
            dim: parse_usize(&get("dim")?)?,
            side: parse_usize(&get("side")?)?,
            s_min: parse_usize(&get("s_min")?)?,
            s_max: parse_usize(&get("s_max")?)?,
            transform,
            weighting: get("weighting")?,
            alpha: parse_f64(&get("alpha")?)?,
            sigma: parse_f64(&get("sigma")?)?,
            n_trials: parse_usize(&get("n_trials")?)?,
            seed: get("seed")?.parse().map_err(|_| perr("bad seed".into()))?,
        };
        if get("key")? != spec.key() {
            return Err(perr("key does not match the table fields".into()));
        }
        Ok(QuantileTable {
            spec,
            global_q: parse_f64(&get("global_q")?)?,
            per_scale,
        })
    }

    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        let io = |e: std::io::Error| SmreError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(path, self.to_text()).map_err(io)?;
        Ok(path.to_path_buf())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SmreError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        QuantileTable::from_text(&text)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| SmreError::Parse(format!("bad number {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| SmreError::Parse(format!("bad integer {s:?}")))
}

/// Empirical `alpha`-quantile of `T(eps)` over `n_trials` Gaussian fields.
/// The system's own threshold is ignored.
pub fn simulate_global_quantile(
    system: &ConstraintSystem,
    noise: NoiseModel,
    alpha: f64,
    n_trials: usize,
    seed: u64,
) -> Result<QuantileTable> {
    check_alpha(alpha)?;
    check_trials(n_trials)?;
    let ws = system
        .window_system()
        .ok_or_else(|| SmreError::Unsupported("global quantiles need a windowed system".into()))?;
    let (s_min, s_max) = ws.scale_range();
    let d = system.grid().dim() as i32;
    let coeffs: Vec<(usize, f64)> = ws
        .sides()
        .map(|s| (s, system.side_coefficient(s).unwrap_or(f64::NAN)))
        .collect();
    let weighting = if coeffs.iter().all(|&(_, c)| c == 1.0) {
        "indicator"
    } else if coeffs
        .iter()
        .all(|&(s, c)| (c - (s as f64).powi(d).sqrt().recip()).abs() <= 1e-15)
    {
        "normalized"
    } else {
        return Err(SmreError::Unsupported(
            "global tables support normalized or indicator weights".into(),
        ));
    };
    let samples = simulate_statistics(system, noise, n_trials, seed);
    let grid = system.grid();
    Ok(QuantileTable {
        spec: TableSpec {
            kind: TableKind::Global,
            dim: grid.dim(),
            side: grid.side(),
            s_min,
            s_max,
            transform: system.transform(),
            weighting: weighting.into(),
            alpha,
            sigma: noise.sigma(),
            n_trials,
            seed,
        },
        global_q: empirical_quantile(&samples, alpha)?,
        per_scale: BTreeMap::new(),
    })
}

/// For each side `s`, the maximum over all windows of side `s` of
/// `sum_S eps^2`, one row per trial.
pub fn simulate_scale_maxima(
    grid: Grid,
    s_min: usize,
    s_max: usize,
    noise: NoiseModel,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let ws = enumerate(grid, s_min, s_max)?;
    Ok(map_trials(n_trials, |t| {
        let sq: Vec<f64> = noise_field(grid, noise, seed, t)
            .iter()
            .map(|e| e * e)
            .collect();
        let sums = WindowSums::new(grid, &sq);
        ws.sides()
            .map(|s| {
                let mut best = f64::NEG_INFINITY;
                for_each_window_of_side(grid, s, |w| best = best.max(sums.sum(&w)));
                best
            })
            .collect()
    }))
}

fn for_each_window_of_side(grid: Grid, s: usize, mut f: impl FnMut(Window)) {
    let d = grid.dim();
    let n = grid.side() - s + 1;
    let total = n.pow(d as u32);
    let mut anchor = [0usize; 3];
    for mut i in 0..total {
        for a in (0..d).rev() {
            anchor[a] = i % n;
            i /= n;
        }
        f(Window::new(grid, &anchor[..d], s).expect("anchor within range"));
    }
}

/// Per-scale constants of the squared-residual pipeline: `q_{alpha,s}` is
/// the empirical `alpha`-quantile of the scale-`s` maximum of
/// `sum_S eps^2`, and `c_S = 1 / q_{alpha,s}` with threshold `q = 1`.
pub fn per_scale_constants(
    grid: Grid,
    s_min: usize,
    s_max: usize,
    noise: NoiseModel,
    alpha: f64,
    n_trials: usize,
    seed: u64,
) -> Result<QuantileTable> {
    check_alpha(alpha)?;
    check_trials(n_trials)?;
    let rows = simulate_scale_maxima(grid, s_min, s_max, noise, n_trials, seed)?;
    let mut per_scale = BTreeMap::new();
    for (i, s) in (s_min..=s_max).enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        per_scale.insert(s, empirical_quantile(&column, alpha)?);
    }
    Ok(QuantileTable {
        spec: TableSpec {
            kind: TableKind::PerScale,
            dim: grid.dim(),
            side: grid.side(),
            s_min,
            s_max,
            transform: Transform::Square,
            weighting: "indicator".into(),
            alpha,
            sigma: noise.sigma(),
            n_trials,
            seed,
        },
        global_q: 1.0,
        per_scale,
    })
}
