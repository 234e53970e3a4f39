//! Evaluation measures comparing an estimate with the truth.

use crate::error::{Result, SmreError};
use crate::grid::{diff_axis, Signal};
use crate::prox::Regularizer;

fn check_same_grid(a: &Signal, b: &Signal) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(SmreError::GridMismatch(format!(
            "{:?} vs {:?}",
            a.grid(),
            b.grid()
        )));
    }
    Ok(())
}

/// `(m^-d sum (est - truth)^2, m^-d sum |est - truth|)`.
pub fn ise_iae(est: &Signal, truth: &Signal) -> Result<(f64, f64)> {
    check_same_grid(est, truth)?;
    let n = est.len() as f64;
    let (sq, abs) = est
        .values()
        .iter()
        .zip(truth.values())
        .fold((0.0, 0.0), |(s, a), (x, y)| {
            let d = x - y;
            (s + d * d, a + d.abs())
        });
    Ok((sq / n, abs / n))
}

/// Symmetric Bregman divergence `m^-d <grad J(a) - grad J(b), a - b>` in
/// gradient form: for TV2 `m^-d sum |D a - D b|^2`, for `TV_1^beta`
/// `m^-d sum (g(D a) - g(D b)) . (D a - D b)` with
/// `g(x) = x / sqrt(|x|^2 + beta^2)`.
pub fn bregman_sym(a: &Signal, b: &Signal, reg: Regularizer) -> Result<f64> {
    check_same_grid(a, b)?;
    let grid = a.grid();
    let n = grid.len();
    let grads = |s: &Signal| -> Vec<Vec<f64>> {
        (0..grid.dim())
            .map(|axis| {
                let mut out = vec![0.0; n];
                diff_axis(grid, s.values(), axis, &mut out);
                out
            })
            .collect()
    };
    let (da, db) = (grads(a), grads(b));
    let total = match reg {
        Regularizer::Tv2 => da
            .iter()
            .zip(&db)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
            .sum::<f64>(),
        Regularizer::Tv1Beta { beta } => {
            let norms = |g: &[Vec<f64>]| -> Vec<f64> {
                (0..n)
                    .map(|i| (g.iter().map(|c| c[i] * c[i]).sum::<f64>() + beta * beta).sqrt())
                    .collect()
            };
            let (na, nb) = (norms(&da), norms(&db));
            (0..n)
                .map(|i| {
                    da.iter()
                        .zip(&db)
                        .map(|(x, y)| (x[i] / na[i] - y[i] / nb[i]) * (x[i] - y[i]))
                        .sum::<f64>()
                })
                .sum()
        }
        Regularizer::L1 => {
            return Err(SmreError::Unsupported(
                "Bregman divergence is defined for TV2 and TV1beta".into(),
            ))
        }
    };
    Ok(total / n as f64)
}

/// Number of maximal constant runs whose existing neighbours are strictly
/// lower. A constant signal has one such run.
pub fn count_local_maxima(u: &[f64]) -> usize {
    let mut runs: Vec<f64> = Vec::new();
    for &x in u {
        if runs.last() != Some(&x) {
            runs.push(x);
        }
    }
    (0..runs.len())
        .filter(|&i| {
            let left = i == 0 || runs[i - 1] < runs[i];
            let right = i + 1 == runs.len() || runs[i + 1] < runs[i];
            left && right
        })
        .count()
}

/// Per-trial evaluation record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub ise: f64,
    pub iae: f64,
    /// Present when a TV-type regularizer was given.
    pub bregman: Option<f64>,
    /// Present for one-dimensional signals.
    pub local_maxima: Option<usize>,
}

pub fn evaluate(est: &Signal, truth: &Signal, reg: Option<Regularizer>) -> Result<MetricReport> {
    let (ise, iae) = ise_iae(est, truth)?;
    let bregman = match reg {
        Some(r @ (Regularizer::Tv2 | Regularizer::Tv1Beta { .. })) => {
            Some(bregman_sym(est, truth, r)?)
        }
        _ => None,
    };
    let local_maxima = (est.grid().dim() == 1).then(|| count_local_maxima(est.values()));
    Ok(MetricReport {
        ise,
        iae,
        bregman,
        local_maxima,
    })
}
