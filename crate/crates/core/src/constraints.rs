//! Weighted multiscale constraint systems and the multiresolution statistic
//! `T(v) = max_S |<w^S, Lambda(v)>|`.

use crate::error::{invalid, Result, SmreError};
use crate::grid::{Grid, Signal, Transform, MAX_DIM};
use crate::windows::{partition_disjoint, Group, Partition, Window, WindowSystem};

/// How window weights `w^S` are formed from indicators `chi_S`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `chi_S / sqrt(#S)`.
    Normalized,
    /// `chi_S`.
    Indicator,
    /// `c_s chi_S`, one coefficient per side length starting at `s_min`.
    PerSide(Vec<f64>),
}

#[derive(Debug, Clone)]
enum Body {
    Windows {
        system: WindowSystem,
        partition: Partition,
        coeffs: Vec<f64>,
    },
    Dense {
        weights: Vec<Vec<f64>>,
    },
}

/// The feasible set `C = { v : T(v) <= q }` together with the grouping used
/// by Dykstra's algorithm.
///
/// Window systems are grouped by [`partition_disjoint`]. Dense systems (the
/// generalized Dantzig case `w^S = K chi_S`) put every constraint in its own
/// group since their supports overlap.
///
/// An optional per-cell scale `a_v > 0` multiplies every weight entrywise,
/// `w^S_v a_v`; it carries the lagged standardization of the Poisson variant.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    grid: Grid,
    body: Body,
    transform: Transform,
    q: f64,
    cell_scale: Option<Vec<f64>>,
}

impl ConstraintSystem {
    /// Constraints over a cube window system.
    ///
    /// `Transform::Square` requires nonnegative coefficients; otherwise
    /// `v -> <w, v^2>` is not convex.
    pub fn windowed(
        system: WindowSystem,
        weighting: Weighting,
        transform: Transform,
        q: f64,
    ) -> Result<Self> {
        check_q(q)?;
        let d = system.grid().dim() as i32;
        let coeffs: Vec<f64> = match weighting {
            Weighting::Normalized => system
                .sides()
                .map(|s| (s as f64).powi(d).sqrt().recip())
                .collect(),
            Weighting::Indicator => vec![1.0; system.sides().count()],
            Weighting::PerSide(c) => {
                if c.len() != system.sides().count() {
                    return Err(SmreError::ShapeMismatch {
                        expected: system.sides().count(),
                        actual: c.len(),
                    });
                }
                c
            }
        };
        if coeffs.iter().any(|c| !c.is_finite() || *c == 0.0) {
            return Err(invalid("window coefficients must be finite and nonzero"));
        }
        if transform == Transform::Square && coeffs.iter().any(|&c| c < 0.0) {
            return Err(invalid("squared residuals require nonnegative weights"));
        }
        let partition = partition_disjoint(&system);
        Ok(Self {
            grid: system.grid(),
            body: Body::Windows {
                system,
                partition,
                coeffs,
            },
            transform,
            q,
            cell_scale: None,
        })
    }

    /// Constraints `|<w_j, v>| <= q` for arbitrary dense weight vectors.
    pub fn dense(grid: Grid, weights: Vec<Vec<f64>>, q: f64) -> Result<Self> {
        check_q(q)?;
        if weights.is_empty() {
            return Err(SmreError::EmptySystem);
        }
        for w in &weights {
            grid.check_len(w.len())?;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(invalid("weights must be finite"));
            }
            if w.iter().all(|&x| x == 0.0) {
                return Err(invalid("zero weight vector"));
            }
        }
        Ok(Self {
            grid,
            body: Body::Dense { weights },
            transform: Transform::Identity,
            q,
            cell_scale: None,
        })
    }

    /// Multiplies all weights entrywise by `scale`. Identity transform only.
    pub fn with_cell_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if self.transform != Transform::Identity {
            return Err(SmreError::Unsupported(
                "per-cell weight scaling with squared residuals".into(),
            ));
        }
        self.grid.check_len(scale.len())?;
        if scale.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(invalid("cell scale must be positive and finite"));
        }
        self.cell_scale = Some(scale);
        Ok(self)
    }

    /// Same system without per-cell scaling.
    pub fn without_cell_scale(&self) -> Self {
        let mut s = self.clone();
        s.cell_scale = None;
        s
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn cell_scale(&self) -> Option<&[f64]> {
        self.cell_scale.as_deref()
    }

    pub fn window_system(&self) -> Option<&WindowSystem> {
        match &self.body {
            Body::Windows { system, .. } => Some(system),
            Body::Dense { .. } => None,
        }
    }

    pub fn partition(&self) -> Option<&Partition> {
        match &self.body {
            Body::Windows { partition, .. } => Some(partition),
            Body::Dense { .. } => None,
        }
    }

    pub fn num_constraints(&self) -> usize {
        match &self.body {
            Body::Windows { system, .. } => system.len(),
            Body::Dense { weights } => weights.len(),
        }
    }

    /// Number of groups `M` handed to Dykstra's algorithm.
    pub fn num_groups(&self) -> usize {
        match &self.body {
            Body::Windows { partition, .. } => partition.len(),
            Body::Dense { weights } => weights.len(),
        }
    }

    /// Coefficient `c_s` of windows with side `s`.
    pub fn side_coefficient(&self, s: usize) -> Option<f64> {
        match &self.body {
            Body::Windows { system, coeffs, .. } => {
                let (lo, hi) = system.scale_range();
                (lo..=hi).contains(&s).then(|| coeffs[s - lo])
            }
            Body::Dense { .. } => None,
        }
    }

    /// Dense weight vector of constraint `i` (enumeration order), including
    /// any per-cell scale.
    pub fn weight_vector(&self, i: usize) -> Option<Vec<f64>> {
        let mut w = match &self.body {
            Body::Windows { system, coeffs, .. } => {
                let win = system.window(i)?;
                let c = coeffs[win.side() - system.scale_range().0];
                let mut w = vec![0.0; self.grid.len()];
                for cell in win.cells(self.grid) {
                    w[cell] = c;
                }
                w
            }
            Body::Dense { weights } => weights.get(i)?.clone(),
        };
        if let Some(a) = &self.cell_scale {
            w.iter_mut().zip(a).for_each(|(x, s)| *x *= s);
        }
        Some(w)
    }

    pub(crate) fn groups(&self) -> GroupsView<'_> {
        match &self.body {
            Body::Windows {
                system,
                partition,
                coeffs,
            } => GroupsView::Windows {
                grid: self.grid,
                groups: partition.groups(),
                coeffs,
                s_min: system.scale_range().0,
            },
            Body::Dense { weights } => GroupsView::Dense { weights },
        }
    }

    /// `T(v)` for raw values on the system's grid.
    pub fn statistic(&self, v: &[f64]) -> f64 {
        let lv: Vec<f64> = match &self.cell_scale {
            Some(a) => v
                .iter()
                .zip(a)
                .map(|(&x, &s)| s * self.transform.apply(x))
                .collect(),
            None => v.iter().map(|&x| self.transform.apply(x)).collect(),
        };
        match &self.body {
            Body::Windows { system, coeffs, .. } => {
                let sums = WindowSums::new(self.grid, &lv);
                let (lo, _) = system.scale_range();
                system
                    .iter()
                    .map(|w| (coeffs[w.side() - lo] * sums.sum(&w)).abs())
                    .fold(0.0, f64::max)
            }
            Body::Dense { weights } => weights
                .iter()
                .map(|w| w.iter().zip(&lv).map(|(a, b)| a * b).sum::<f64>().abs())
                .fold(0.0, f64::max),
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(invalid(format!("threshold q must be positive, got {q}")));
    }
    Ok(())
}

pub(crate) enum GroupsView<'a> {
    Windows {
        grid: Grid,
        groups: &'a [Group],
        coeffs: &'a [f64],
        s_min: usize,
    },
    Dense {
        weights: &'a [Vec<f64>],
    },
}

/// The multiresolution statistic `T(v)`.
pub fn mr_statistic(system: &ConstraintSystem, v: &Signal) -> Result<f64> {
    if v.grid() != system.grid() {
        return Err(SmreError::GridMismatch(format!(
            "signal on {:?}, system on {:?}",
            v.grid(),
            system.grid()
        )));
    }
    Ok(system.statistic(v.values()))
}

/// Summed-area table over a grid: O(2^d) sums over any cube.
pub struct WindowSums {
    grid: Grid,
    stride: [usize; MAX_DIM],
    data: Vec<f64>,
}

impl WindowSums {
    pub fn new(grid: Grid, values: &[f64]) -> Self {
        let d = grid.dim();
        let n = grid.side() + 1;
        let mut stride = [0; MAX_DIM];
        let mut s = 1;
        for axis in (0..d).rev() {
            stride[axis] = s;
            s *= n;
        }
        let mut data = vec![0.0; s];
        let gstr = grid.strides();
        for (i, &x) in values.iter().enumerate() {
            let mut idx = 0;
            for axis in 0..d {
                idx += ((i / gstr[axis]) % grid.side() + 1) * stride[axis];
            }
            data[idx] = x;
        }
        for axis in 0..d {
            let st = stride[axis];
            for idx in 0..data.len() {
                if (idx / st) % n > 0 {
                    data[idx] += data[idx - st];
                }
            }
        }
        Self { grid, stride, data }
    }

    #[inline]
    pub fn sum(&self, w: &Window) -> f64 {
        let a = w.anchor();
        let s = w.side();
        match self.grid.dim() {
            1 => self.data[a[0] + s] - self.data[a[0]],
            2 => {
                let r = self.stride[0];
                let (i0, j0) = (a[0] * r, a[1]);
                let (i1, j1) = ((a[0] + s) * r, a[1] + s);
                self.data[i1 + j1] - self.data[i0 + j1] - self.data[i1 + j0] + self.data[i0 + j0]
            }
            d => {
                let mut total = 0.0;
                for mask in 0..(1usize << d) {
                    let mut idx = 0;
                    for axis in 0..d {
                        let hi = mask >> axis & 1 == 1;
                        idx += (a[axis] + if hi { s } else { 0 }) * self.stride[axis];
                    }
                    let sign = if (d - mask.count_ones() as usize).is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    };
                    total += sign * self.data[idx];
                }
                total
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::average;
    use crate::windows::enumerate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn brute_statistic(sys: &ConstraintSystem, v: &Signal) -> f64 {
        (0..sys.num_constraints())
            .map(|i| average(&sys.weight_vector(i).unwrap(), sys.transform(), v).unwrap())
            .fold(0.0, f64::max)
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        (0..n)
            .map(|i| ((i as f64 + 1.0) * 12.9898 + seed as f64 * 78.233).sin() * 2.0)
            .collect()
    }

    #[test]
    fn statistic_matches_brute_force() {
        for (dim, m) in [(1, 9), (2, 6), (3, 4)] {
            let g = Grid::new(dim, m).unwrap();
            let v = Signal::new(g, pseudo(g.len(), 3)).unwrap();
            for (tf, wt) in [
                (Transform::Identity, Weighting::Normalized),
                (Transform::Square, Weighting::Indicator),
                (
                    Transform::Square,
                    Weighting::PerSide((1..=m - 1).map(|s| 1.0 / s as f64).collect()),
                ),
            ] {
                let sys =
                    ConstraintSystem::windowed(enumerate(g, 2, m).unwrap(), wt.clone(), tf, 1.0);
                let sys = match sys {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                assert_relative_eq!(
                    mr_statistic(&sys, &v).unwrap(),
                    brute_statistic(&sys, &v),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn statistic_with_cell_scale() {
        let g = Grid::square(5).unwrap();
        let v = Signal::new(g, pseudo(25, 1)).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 3).unwrap(),
            Weighting::Indicator,
            Transform::Identity,
            1.0,
        )
        .unwrap()
        .with_cell_scale(pseudo(25, 9).iter().map(|x| 1.0 + x.abs()).collect())
        .unwrap();
        assert_relative_eq!(
            sys.statistic(v.values()),
            brute_statistic(&sys, &v),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_input_and_single_window() {
        let g = Grid::line(16).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 16).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        assert_eq!(mr_statistic(&sys, &Signal::zeros(g)).unwrap(), 0.0);

        let whole = ConstraintSystem::windowed(
            enumerate(g, 16, 16).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        let c = -0.7;
        assert_relative_eq!(
            mr_statistic(&whole, &Signal::constant(g, c)).unwrap(),
            c.abs() * 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn construction_errors() {
        let g = Grid::line(4).unwrap();
        let sys = enumerate(g, 1, 2).unwrap();
        assert!(
            ConstraintSystem::windowed(sys, Weighting::Normalized, Transform::Identity, 0.0)
                .is_err()
        );
        assert!(ConstraintSystem::windowed(
            sys,
            Weighting::PerSide(vec![1.0, -1.0]),
            Transform::Square,
            1.0
        )
        .is_err());
        assert!(ConstraintSystem::windowed(
            sys,
            Weighting::PerSide(vec![1.0]),
            Transform::Identity,
            1.0
        )
        .is_err());
        assert!(matches!(
            ConstraintSystem::dense(g, vec![], 1.0),
            Err(SmreError::EmptySystem)
        ));
        let sq =
            ConstraintSystem::windowed(sys, Weighting::Indicator, Transform::Square, 1.0).unwrap();
        assert!(sq.with_cell_scale(vec![1.0; 4]).is_err());
        let other = Signal::zeros(Grid::line(5).unwrap());
        let id = ConstraintSystem::windowed(sys, Weighting::Indicator, Transform::Identity, 1.0)
            .unwrap();
        assert!(mr_statistic(&id, &other).is_err());
    }

    fn line_system(tf: Transform) -> ConstraintSystem {
        let g = Grid::line(8).unwrap();
        ConstraintSystem::windowed(enumerate(g, 1, 4).unwrap(), Weighting::Normalized, tf, 1.0)
            .unwrap()
    }

    proptest! {
        #[test]
        fn averages_are_convex(
            a in prop::collection::vec(-3.0f64..3.0, 8),
            b in prop::collection::vec(-3.0f64..3.0, 8),
            t in 0.0f64..=1.0,
        ) {
            for tf in [Transform::Identity, Transform::Square] {
                let sys = line_system(tf);
                let g = sys.grid();
                let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
                for i in 0..sys.num_constraints() {
                    let w = sys.weight_vector(i).unwrap();
                    let f = |v: &Vec<f64>| average(&w, tf, &Signal::new(g, v.clone()).unwrap()).unwrap();
                    prop_assert!(f(&mix) <= t * f(&a) + (1.0 - t) * f(&b) + 1e-12);
                }
                let tm = sys.statistic(&mix);
                prop_assert!(tm <= sys.statistic(&a).max(sys.statistic(&b)) + 1e-12);
            }
        }

        #[test]
        fn identity_statistic_is_homogeneous(
            a in prop::collection::vec(-3.0f64..3.0, 8),
            c in -5.0f64..5.0,
        ) {
            let sys = line_system(Transform::Identity);
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            let lhs = sys.statistic(&scaled);
            let rhs = c.abs() * sys.statistic(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn square_average_is_monotone(
            a in prop::collection::vec(-3.0f64..3.0, 8),
            grow in prop::collection::vec(1.0f64..2.0, 8),
        ) {
            let sys = line_system(Transform::Square);
            let g = sys.grid();
            let b: Vec<f64> = a.iter().zip(&grow).map(|(x, k)| x * k).collect();
            for i in 0..sys.num_constraints() {
                let w = sys.weight_vector(i).unwrap();
                let fa = average(&w, Transform::Square, &Signal::new(g, a.clone()).unwrap()).unwrap();
                let fb = average(&w, Transform::Square, &Signal::new(g, b.clone()).unwrap()).unwrap();
                prop_assert!(fa <= fb + 1e-12);
            }
        }
    }
}
