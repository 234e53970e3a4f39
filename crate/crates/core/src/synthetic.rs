//! Deterministic synthetic test data: a 1D peak train, a 2D two-filament
//! phantom, a 2D piecewise-smooth test image, and seeded noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::grid::{Grid, NoiseModel, Signal};
use crate::operators::LinearOperator;
use crate::quantiles::noise_field;

/// Peaks of the 1D test signal as (centre, height, width) in units of the
/// signal length.
const PEAKS: [(f64, f64, f64); 11] = [
    (0.06, 1.6, 0.010),
    (0.14, 3.0, 0.014),
    (0.22, 1.2, 0.012),
    (0.31, 2.4, 0.010),
    (0.40, 4.0, 0.016),
    (0.49, 1.5, 0.011),
    (0.58, 2.8, 0.013),
    (0.67, 1.8, 0.010),
    (0.76, 3.5, 0.015),
    (0.85, 2.0, 0.012),
    (0.93, 1.3, 0.010),
];

/// Sum of eleven Gaussian bumps of varying height and width on a zero
/// baseline. At `m = 256` the narrowest bump has a standard deviation of
/// about 2.6 samples.
pub fn peak_signal(m: usize) -> Result<Signal> {
    let grid = Grid::line(m)?;
    let values = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / m as f64;
            PEAKS
                .iter()
                .map(|&(c, h, w)| h * (-0.5 * ((x - c) / w).powi(2)).exp())
                .sum()
        })
        .collect();
    Signal::new(grid, values)
}

/// Intensity image of two crossing curved filaments on a dim background,
/// the kind of structure seen in fluorescence microscopy. Values are
/// expected photon counts.
pub fn two_filament_phantom(m: usize, background: f64, peak: f64) -> Result<Signal> {
    if !(background >= 0.0 && peak > 0.0) {
        return Err(invalid(
            "phantom intensities must be nonnegative and peak positive",
        ));
    }
    let grid = Grid::square(m)?;
    let width = (m as f64 / 64.0).max(0.5) * 1.2;
    let f = m as f64;
    let filament = |x: f64, y: f64| -> f64 {
        // first filament: gentle arc y = 0.3 f + 0.15 f sin(pi x / f)
        let d1 = y - (0.3 * f + 0.15 * f * (std::f64::consts::PI * x / f).sin());
        // second filament: steeper line crossing the first
        let d2 = (y - (0.9 * f - 0.8 * x)) / (1.0 + 0.64f64).sqrt();
        (-0.5 * (d1 / width).powi(2)).exp() + (-0.5 * (d2 / width).powi(2)).exp()
    };
    let values = (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            let (y, x) = (c[0] as f64 + 0.5, c[1] as f64 + 0.5);
            background + peak * filament(x, y).min(1.0)
        })
        .collect();
    Signal::new(grid, values)
}

/// Piecewise-smooth test image in `[0, 1]`: a ramp background with a bright
/// square, a dark disc and a thin bar.
pub fn denoise_test_image(m: usize) -> Result<Signal> {
    let grid = Grid::square(m)?;
    let f = m as f64;
    let values = (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            let (y, x) = ((c[0] as f64 + 0.5) / f, (c[1] as f64 + 0.5) / f);
            let mut v = 0.2 + 0.3 * x;
            if (0.15..0.45).contains(&x) && (0.15..0.45).contains(&y) {
                v = 0.9;
            }
            if (x - 0.68).powi(2) + (y - 0.62).powi(2) < 0.18f64.powi(2) {
                v = 0.05;
            }
            if (0.2..0.8).contains(&x) && (0.82..0.86).contains(&y) {
                v = 0.75;
            }
            v
        })
        .collect();
    Signal::new(grid, values)
}

/// `signal + eps` with `eps` the Gaussian field of stream `(seed, trial)`.
pub fn add_gaussian_noise(signal: &Signal, noise: NoiseModel, seed: u64, trial: u64) -> Signal {
    let eps = noise_field(signal.grid(), noise, seed, trial);
    let values = signal
        .values()
        .iter()
        .zip(&eps)
        .map(|(a, b)| a + b)
        .collect();
    Signal::new(signal.grid(), values).expect("finite sum of finite values")
}

/// Independent Poisson counts with the given nonnegative intensities.
pub fn poisson_counts(intensity: &[f64], seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    intensity
        .iter()
        .map(|&mu| {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(invalid(format!("invalid Poisson intensity {mu}")));
            }
            if mu == 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(mu).map_err(|e| invalid(e.to_string()))?;
            Ok(dist.sample(&mut rng))
        })
        .collect()
}

/// `Poisson(K u)` for a nonnegative truth `u`.
pub fn blur_and_poisson(truth: &Signal, k: &LinearOperator, seed: u64) -> Result<Signal> {
    let blurred: Vec<f64> = k
        .apply(truth.values())?
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    Signal::new(k.codomain(), poisson_counts(&blurred, seed)?)
}
