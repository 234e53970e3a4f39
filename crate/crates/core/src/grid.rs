//! Lattices `{1..m}^d`, real-valued signals on them, pointwise residual
//! transforms and the forward difference operator.
//!
//! Arrays are row-major with axis order `(x_1, ..., x_d)`: `x_d` varies
//! fastest. Every module shares this layout.

use crate::error::{invalid, Result, SmreError};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 3;

/// The equidistant lattice `{1..m}^d` (stored 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    side: usize,
}

impl Grid {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!(
                "grid dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if side == 0 {
            return Err(invalid("grid side length must be positive"));
        }
        side.checked_pow(dim as u32)
            .ok_or_else(|| invalid("grid size overflows usize"))?;
        Ok(Self { dim, side })
    }

    /// One-dimensional grid with `m` points.
    pub fn line(m: usize) -> Result<Self> {
        Self::new(1, m)
    }

    /// Square `m x m` grid.
    pub fn square(m: usize) -> Result<Self> {
        Self::new(2, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of grid points `m^d`.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear stride of each axis; unused trailing axes have stride 0.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for axis in (0..self.dim).rev() {
            strides[axis] = s;
            s *= self.side;
        }
        strides
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            c[axis] = index % self.side;
            index /= self.side;
        }
        c
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(SmreError::ShapeMismatch {
                expected: self.len(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// A real-valued function on a [`Grid`] with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: Grid,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SmreError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pointwise residual transform `Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Transform {
    #[default]
    Identity,
    Square,
}

impl Transform {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Square => x * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Square => "square",
        }
    }
}

/// Additive white Gaussian noise with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "noise sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Forward differences `(D u)_{v,i} = u_{v+e_i} - u_v`, zero on the trailing
/// boundary of axis `i`. One array per axis.
pub fn forward_difference(u: &Signal) -> Vec<Vec<f64>> {
    let grid = u.grid();
    (0..grid.dim())
        .map(|axis| {
            let mut out = vec![0.0; grid.len()];
            diff_axis(grid, u.values(), axis, &mut out);
            out
        })
        .collect()
}

/// Writes the forward difference of `u` along `axis` into `out`.
pub fn diff_axis(grid: Grid, u: &[f64], axis: usize, out: &mut [f64]) {
    let stride = grid.strides()[axis];
    let m = grid.side();
    for (i, o) in out.iter_mut().enumerate() {
        let c = (i / stride) % m;
        *o = if c + 1 < m { u[i + stride] - u[i] } else { 0.0 };
    }
}

/// Adds `D_axis^* g` to `out`, the adjoint of [`diff_axis`].
pub fn diff_axis_adjoint_add(grid: Grid, g: &[f64], axis: usize, out: &mut [f64]) {
    let stride = grid.strides()[axis];
    let m = grid.side();
    for (i, o) in out.iter_mut().enumerate() {
        let c = (i / stride) % m;
        let mut acc = 0.0;
        if c + 1 < m {
            acc -= g[i];
        }
        if c > 0 {
            acc += g[i - stride];
        }
        *o += acc;
    }
}

/// `D^* D u` summed over all axes (the discrete negative Laplacian with
/// the boundary convention of [`diff_axis`]).
pub fn neg_laplacian(grid: Grid, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut g = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        diff_axis(grid, u, axis, &mut g);
        diff_axis_adjoint_add(grid, &g, axis, out);
    }
}

/// The average function `|sum_v w_v Lambda(v)_v|` for a dense weight array.
pub fn average(weight: &[f64], transform: Transform, v: &Signal) -> Result<f64> {
    v.grid().check_len(weight.len())?;
    let s: f64 = weight
        .iter()
        .zip(v.values())
        .map(|(&w, &x)| w * transform.apply(x))
        .sum();
    Ok(s.abs())
}
