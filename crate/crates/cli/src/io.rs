//! Signal files: CSV (one value per line for 1D, a square matrix for 2D)
//! and binary PGM images.
//!
//! CSV values are written with shortest round-trip formatting, so reading a
//! written file restores every value bit-exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use smre::{Grid, Signal};

use crate::error::{CliError, CliResult, Context, Stage};

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"))
}

/// Reads a signal. The grid dimension follows from the file: a PGM image
/// or a CSV with several columns is 2D, a single-column CSV is 1D.
pub fn read_signal(path: &Path) -> CliResult<Signal> {
    if is_pgm(path) {
        read_pgm(path)
    } else {
        read_csv(path)
    }
}

fn read_csv(path: &Path) -> CliResult<Signal> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .at(Stage::Input, path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.at(Stage::Input, path)?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::at(
                        Stage::Input,
                        path,
                        format!("line {}: not a number: {field:?}", line + 1),
                    )
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::at(Stage::Input, path, "empty file"));
    }
    let n = rows.len();
    let values: Vec<f64> = rows.concat();
    let grid = if rows.iter().all(|r| r.len() == 1) {
        Grid::line(n)
    } else if rows.iter().all(|r| r.len() == n) {
        Grid::square(n)
    } else {
        return Err(CliError::at(
            Stage::Input,
            path,
            "expected one value per line or a square matrix",
        ));
    }
    .at(Stage::Input, path)?;
    Signal::new(grid, values).at(Stage::Input, path)
}

fn read_pgm(path: &Path) -> CliResult<Signal> {
    let image = ImageReader::open(path)
        .at(Stage::Input, path)?
        .with_guessed_format()
        .at(Stage::Input, path)?
        .decode()
        .at(Stage::Input, path)?;
    let (w, h, values): (u32, u32, Vec<f64>) = match image {
        DynamicImage::ImageLuma8(img) => (
            img.width(),
            img.height(),
            img.into_raw().into_iter().map(f64::from).collect(),
        ),
        DynamicImage::ImageLuma16(img) => (
            img.width(),
            img.height(),
            img.into_raw().into_iter().map(f64::from).collect(),
        ),
        _ => {
            return Err(CliError::at(
                Stage::Input,
                path,
                "expected a grayscale (P5) image",
            ))
        }
    };
    if w != h {
        return Err(CliError::at(
            Stage::Input,
            path,
            format!("image must be square, got {w}x{h}"),
        ));
    }
    let grid = Grid::square(w as usize).at(Stage::Input, path)?;
    Signal::new(grid, values).at(Stage::Input, path)
}

/// Writes a 1D signal one value per line and a 2D signal as rows.
pub fn write_csv(signal: &Signal, path: &Path) -> CliResult<()> {
    let mut writer = csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .at(Stage::Output, path)?;
    let cols = if signal.grid().dim() == 1 {
        1
    } else {
        signal.grid().side()
    };
    for row in signal.values().chunks(cols) {
        writer
            .write_record(row.iter().map(|x| x.to_string()))
            .at(Stage::Output, path)?;
    }
    writer.flush().at(Stage::Output, path)
}

/// Linear map of `[min, max]` onto the 8-bit range used by [`write_pgm`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PgmScale {
    pub min: f64,
    pub max: f64,
}

impl PgmScale {
    pub fn of(values: &[f64]) -> Self {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        PgmScale { min, max }
    }

    pub fn to_byte(&self, x: f64) -> u8 {
        if self.max <= self.min {
            return 0;
        }
        ((x - self.min) / (self.max - self.min) * 255.0)
            .round()
            .clamp(0.0, 255.0) as u8
    }
}

/// Writes a 2D signal as an 8-bit binary PGM scaled from its own range.
pub fn write_pgm(signal: &Signal, path: &Path) -> CliResult<PgmScale> {
    let grid = signal.grid();
    if grid.dim() != 2 {
        return Err(CliError::at(
            Stage::Output,
            path,
            "PGM output needs a 2D signal",
        ));
    }
    let scale = PgmScale::of(signal.values());
    let bytes: Vec<u8> = signal.values().iter().map(|&x| scale.to_byte(x)).collect();
    let side = grid.side() as u32;
    let file = BufWriter::new(File::create(path).at(Stage::Output, path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, side, side, ExtendedColorType::L8)
        .at(Stage::Output, path)?;
    Ok(scale)
}

/// Writes `signal` as CSV and, for 2D signals, as a viewable PGM next to it.
pub fn write_signal(signal: &Signal, dir: &Path, stem: &str) -> CliResult<Option<PgmScale>> {
    write_csv(signal, &dir.join(format!("{stem}.csv")))?;
    if signal.grid().dim() == 2 {
        return write_pgm(signal, &dir.join(format!("{stem}.pgm"))).map(Some);
    }
    Ok(None)
}

pub fn write_json(value: &serde_json::Value, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).at(Stage::Output, path)?;
    std::fs::write(path, text + "\n").at(Stage::Output, path)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).at(Stage::Output, dir)
}
