//! Euclidean projections onto single constraints, onto groups of
//! constraints with disjoint supports, and (via Dykstra's algorithm) onto
//! the whole feasible set of a [`ConstraintSystem`].

use crate::constraints::{ConstraintSystem, GroupsView};
use crate::error::{invalid, Result, SmreError};
use crate::grid::Transform;
use crate::linalg::{dist, dot};

/// Relative slack accepted on `T(h) <= q` when certifying Dykstra's output.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

/// Projection onto the slab `{ v : |<w, v>| <= q }`.
pub fn project_band(v: &[f64], weight: &[f64], q: f64) -> Result<Vec<f64>> {
    if v.len() != weight.len() {
        return Err(SmreError::ShapeMismatch {
            expected: v.len(),
            actual: weight.len(),
        });
    }
    let nw = dot(weight, weight);
    if nw == 0.0 {
        return Err(invalid("zero weight"));
    }
    let s = dot(weight, v);
    let mut out = v.to_vec();
    if s.abs() > q {
        let t = s.signum() * (s.abs() - q) / nw;
        out.iter_mut().zip(weight).for_each(|(o, w)| *o -= t * w);
    }
    Ok(out)
}

/// Projection onto `{ v : sum_{i in support} v_i^2 <= radius_sq }`: radial
/// scaling of the restriction to `support`, the complement is untouched.
pub fn project_ball(v: &[f64], support: &[usize], radius_sq: f64) -> Result<Vec<f64>> {
    if !(radius_sq > 0.0) {
        return Err(invalid(format!(
            "ball radius must be positive, got {radius_sq}"
        )));
    }
    if support.iter().any(|&i| i >= v.len()) {
        return Err(invalid("support index outside the signal"));
    }
    let ss: f64 = support.iter().map(|&i| v[i] * v[i]).sum();
    let mut out = v.to_vec();
    if ss > radius_sq {
        let gamma = (radius_sq / ss).sqrt();
        for &i in support {
            out[i] *= gamma;
        }
    }
    Ok(out)
}

/// Exact projection onto the intersection of the constraints in group `j`.
///
/// The supports within a group are disjoint, so the intersection is a
/// product set and its projection acts on each support independently.
pub fn project_group(v: &[f64], system: &ConstraintSystem, j: usize) -> Result<Vec<f64>> {
    system.grid().check_len(v.len())?;
    if j >= system.num_groups() {
        return Err(invalid(format!("group {j} out of range")));
    }
    let mut out = v.to_vec();
    project_group_in_place(system, j, &mut out, None);
    Ok(out)
}

fn x_at(h: &[f64], corr: &Option<Vec<f64>>, k: usize, cell: usize) -> f64 {
    match corr {
        Some(qv) => h[cell] - qv[k],
        None => h[cell],
    }
}

/// Projects `h - Q` onto group `j` in place, where `Q` is the stored
/// correction (zero when `None`), and replaces `Q` by `P(h - Q) - (h - Q)`.
/// Returns `||Q_new - Q_old||^2`.
fn project_group_in_place(
    system: &ConstraintSystem,
    j: usize,
    h: &mut [f64],
    corr: Option<&mut Option<Vec<f64>>>,
) -> f64 {
    let q = system.q();
    let scale = system.cell_scale();
    let tracking = corr.is_some();
    let mut scratch = None;
    let corr = corr.unwrap_or(&mut scratch);
    let mut change = 0.0;

    match system.groups() {
        GroupsView::Windows {
            grid,
            groups,
            coeffs,
            s_min,
        } => {
            let group = groups[j];
            let c = coeffs[group.side - s_min];
            match system.transform() {
                Transform::Identity => {
                    // The correction of a band is a multiple of its weight
                    // vector, so one scalar per window is stored.
                    let count = group.len(grid);
                    let mut idx = 0;
                    group.for_each_window(grid, |w| {
                        let i = idx;
                        idx += 1;
                        let (mut s, mut nw) = (0.0, 0.0);
                        match scale {
                            Some(sc) => w.for_each_run(grid, |start, len| {
                                for cell in start..start + len {
                                    let a = c * sc[cell];
                                    s += a * h[cell];
                                    nw += a * a;
                                }
                            }),
                            None => {
                                w.for_each_run(grid, |start, len| {
                                    s += h[start..start + len].iter().sum::<f64>();
                                });
                                s *= c;
                                nw = c * c * w.cell_count(grid.dim()) as f64;
                            }
                        }
                        let mu_old = corr.as_ref().map_or(0.0, |qv| qv[i]);
                        let sx = s - mu_old * nw;
                        let mu_new = if sx.abs() > q {
                            -sx.signum() * (sx.abs() - q) / nw
                        } else {
                            0.0
                        };
                        let delta = if tracking { mu_new - mu_old } else { mu_new };
                        if delta == 0.0 {
                            return;
                        }
                        w.for_each_run(grid, |start, len| {
                            for cell in start..start + len {
                                h[cell] += delta * c * scale.map_or(1.0, |sc| sc[cell]);
                            }
                        });
                        if tracking {
                            change += delta * delta * nw;
                            corr.get_or_insert_with(|| vec![0.0; count])[i] = mu_new;
                        }
                    });
                }
                Transform::Square => {
                    let cells_per_window = group.side.pow(grid.dim() as u32);
                    let radius_sq = q / c;
                    let mut offset = 0;
                    group.for_each_window(grid, |w| {
                        let base = offset;
                        offset += cells_per_window;
                        let mut ss = 0.0;
                        let mut k = base;
                        w.for_each_run(grid, |start, len| {
                            for cell in start..start + len {
                                let x = x_at(h, corr, k, cell);
                                ss += x * x;
                                k += 1;
                            }
                        });
                        let gamma = (ss > radius_sq).then(|| (radius_sq / ss).sqrt());
                        if gamma.is_none() && (corr.is_none() || !tracking) {
                            return;
                        }
                        if tracking && corr.is_none() {
                            *corr = Some(vec![0.0; group.len(grid) * cells_per_window]);
                        }
                        // y = P(x); h <- y; Q <- y - x
                        let mut k = base;
                        w.for_each_run(grid, |start, len| {
                            for cell in start..start + len {
                                let x = x_at(h, corr, k, cell);
                                let y = gamma.map_or(x, |g| g * x);
                                h[cell] = y;
                                if let Some(qv) = corr.as_mut() {
                                    let dq = (y - x) - qv[k];
                                    change += dq * dq;
                                    qv[k] = y - x;
                                }
                                k += 1;
                            }
                        });
                    });
                }
            }
        }
        GroupsView::Dense { weights } => {
            let w = &weights[j];
            let x: Vec<f64> = match corr.as_ref() {
                Some(qv) => h.iter().zip(qv).map(|(a, b)| a - b).collect(),
                None => h.to_vec(),
            };
            let a: Vec<f64> = match scale {
                Some(sc) => w.iter().zip(sc).map(|(x, y)| x * y).collect(),
                None => w.clone(),
            };
            let s = dot(&a, &x);
            let t = if s.abs() > q {
                s.signum() * (s.abs() - q) / dot(&a, &a)
            } else {
                0.0
            };
            if t == 0.0 && corr.is_none() {
                return 0.0;
            }
            for i in 0..h.len() {
                h[i] = x[i] - t * a[i];
            }
            if tracking {
                let qv = corr.get_or_insert_with(|| vec![0.0; h.len()]);
                for i in 0..h.len() {
                    let dq = -t * a[i] - qv[i];
                    change += dq * dq;
                    qv[i] = -t * a[i];
                }
            }
        }
    }
    change
}

/// Outcome of [`dykstra`].
#[derive(Debug, Clone)]
pub struct DykstraReport {
    pub solution: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Change measure of the last sweep (see [`dykstra`]).
    pub change: f64,
    /// `T(solution)`.
    pub statistic: f64,
}

/// Per-group correction terms of Dykstra's algorithm, kept sparse: a group
/// whose constraints never became active stores nothing.
///
/// The corrections are the dual variables of the projection problem, so a
/// state left over from projecting a nearby point onto the *same* system is
/// a valid warm start (see [`dykstra_warm`]).
#[derive(Debug, Clone, Default)]
pub struct DykstraState {
    corrections: Vec<Option<Vec<f64>>>,
}

impl DykstraState {
    pub fn new(system: &ConstraintSystem) -> Self {
        DykstraState {
            corrections: vec![None; system.num_groups()],
        }
    }

    pub fn reset(&mut self) {
        self.corrections.iter_mut().for_each(|c| *c = None);
    }

    /// Number of groups holding a nonzero correction buffer.
    pub fn active_groups(&self) -> usize {
        self.corrections.iter().filter(|c| c.is_some()).count()
    }

    /// `h += sum_j Q_j`.
    fn add_to(&self, system: &ConstraintSystem, h: &mut [f64]) {
        match system.groups() {
            GroupsView::Windows {
                grid,
                groups,
                coeffs,
                s_min,
            } => {
                let scale = system.cell_scale();
                for (group, corr) in groups.iter().zip(&self.corrections) {
                    let Some(qv) = corr else { continue };
                    let c = coeffs[group.side - s_min];
                    let mut k = 0;
                    let mut i = 0;
                    group.for_each_window(grid, |w| {
                        w.for_each_run(grid, |start, len| {
                            for cell in start..start + len {
                                h[cell] += match system.transform() {
                                    Transform::Identity => {
                                        qv[i] * c * scale.map_or(1.0, |sc| sc[cell])
                                    }
                                    Transform::Square => qv[k],
                                };
                                k += 1;
                            }
                        });
                        i += 1;
                    });
                }
            }
            GroupsView::Dense { .. } => {
                for qv in self.corrections.iter().flatten() {
                    h.iter_mut().zip(qv).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
}

/// Dykstra's cyclic projection of `h` onto the feasible set of `system`,
/// cycling through the groups of its partition.
///
/// A sweep is one pass over all groups. Iteration stops when both the
/// change of the iterate over the sweep and the largest change of any group
/// correction are at most `tol`, and `T(h) <= q (1 + 1e-6)`. Exceeding
/// `max_sweeps` returns the last iterate with `converged == false`.
pub fn dykstra(
    h: &[f64],
    system: &ConstraintSystem,
    tol: f64,
    max_sweeps: usize,
) -> Result<DykstraReport> {
    let order: Vec<usize> = (0..system.num_groups()).collect();
    dykstra_ordered(h, system, &order, tol, max_sweeps)
}

/// [`dykstra`] with an explicit group order.
pub fn dykstra_ordered(
    h: &[f64],
    system: &ConstraintSystem,
    order: &[usize],
    tol: f64,
    max_sweeps: usize,
) -> Result<DykstraReport> {
    let m = system.num_groups();
    let mut seen = vec![false; m];
    for &j in order {
        if j >= m || std::mem::replace(&mut seen[j], true) {
            return Err(invalid("group order must be a permutation"));
        }
    }
    if order.len() != m {
        return Err(invalid("group order must be a permutation"));
    }
    let mut state = DykstraState::new(system);
    run(h, system, order, &mut state, tol, max_sweeps)
}

/// [`dykstra`] starting from the corrections in `state`, which are updated
/// in place. A fresh or reset state reproduces [`dykstra`] exactly.
pub fn dykstra_warm(
    h: &[f64],
    system: &ConstraintSystem,
    state: &mut DykstraState,
    tol: f64,
    max_sweeps: usize,
) -> Result<DykstraReport> {
    if state.corrections.len() != system.num_groups() {
        *state = DykstraState::new(system);
    }
    let order: Vec<usize> = (0..system.num_groups()).collect();
    run(h, system, &order, state, tol, max_sweeps)
}

fn run(
    h: &[f64],
    system: &ConstraintSystem,
    order: &[usize],
    state: &mut DykstraState,
    tol: f64,
    max_sweeps: usize,
) -> Result<DykstraReport> {
    system.grid().check_len(h.len())?;
    if !(tol >= 0.0) {
        return Err(invalid("tolerance must be nonnegative"));
    }
    let bound = system.q() * (1.0 + FEASIBILITY_SLACK);
    let mut x = h.to_vec();
    state.add_to(system, &mut x);
    let mut start = x.clone();
    let mut change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        start.copy_from_slice(&x);
        let mut max_dq = 0.0f64;
        for &j in order {
            let dq = project_group_in_place(system, j, &mut x, Some(&mut state.corrections[j]));
            max_dq = max_dq.max(dq);
        }
        change = dist(&start, &x).max(max_dq.sqrt());
        if change <= tol {
            let statistic = system.statistic(&x);
            if statistic <= bound {
                return Ok(DykstraReport {
                    solution: x,
                    sweeps: sweep,
                    converged: true,
                    change,
                    statistic,
                });
            }
        }
    }
    let statistic = system.statistic(&x);
    Ok(DykstraReport {
        solution: x,
        sweeps: max_sweeps,
        converged: false,
        change,
        statistic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Weighting;
    use crate::grid::Grid;
    use crate::linalg::norm;
    use crate::windows::enumerate;
    use approx::assert_relative_eq;

    #[test]
    fn band_examples() {
        assert_eq!(
            project_band(&[2.0, 5.0], &[1.0, 0.0], 1.0).unwrap(),
            vec![1.0, 5.0]
        );
        assert_eq!(
            project_band(&[0.5, 5.0], &[1.0, 0.0], 1.0).unwrap(),
            vec![0.5, 5.0]
        );
        let p = project_band(&[3.0, 1.0, 2.0], &[1.0, 2.0, -0.5], 0.25).unwrap();
        assert_relative_eq!(dot(&p, &[1.0, 2.0, -0.5]).abs(), 0.25, epsilon = 1e-14);
        assert!(project_band(&[1.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn ball_examples() {
        assert_eq!(
            project_ball(&[3.0, 4.0], &[0, 1], 25.0).unwrap(),
            vec![3.0, 4.0]
        );
        let p = project_ball(&[3.0, 4.0, 9.0], &[0, 1], 4.0).unwrap();
        assert_relative_eq!(p[0], 1.2, epsilon = 1e-15);
        assert_relative_eq!(p[1], 1.6, epsilon = 1e-15);
        assert_eq!(p[2], 9.0);
        assert!(project_ball(&[1.0], &[0], 0.0).is_err());
    }

    #[test]
    fn group_projection_blocks() {
        let g = Grid::line(6).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 3, 3).unwrap(),
            Weighting::Indicator,
            Transform::Square,
            4.0,
        )
        .unwrap();
        // group 0: windows {0,1,2} and {3,4,5}
        let v = [3.0, 4.0, 0.0, 0.0, 6.0, 8.0];
        let p = project_group(&v, &sys, 0).unwrap();
        let a = project_ball(&v, &[0, 1, 2], 4.0).unwrap();
        let b = project_ball(&a, &[3, 4, 5], 4.0).unwrap();
        assert!(dist(&p, &b) < 1e-14);
        assert!(dist(&project_group(&p, &sys, 0).unwrap(), &p) < 1e-14);

        let lin = ConstraintSystem::windowed(
            enumerate(g, 2, 2).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        let v = [3.0, 1.0, -5.0, 0.0, 0.2, 0.1];
        let p = project_group(&v, &lin, 0).unwrap();
        let w = 1.0 / 2f64.sqrt();
        let mut e = project_band(&v, &[w, w, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        e = project_band(&e, &[0.0, 0.0, w, w, 0.0, 0.0], 1.0).unwrap();
        e = project_band(&e, &[0.0, 0.0, 0.0, 0.0, w, w], 1.0).unwrap();
        for (x, y) in p.iter().zip(&e) {
            assert_relative_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn feasible_input_is_returned_after_one_sweep() {
        let g = Grid::line(10).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 4).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        let h: Vec<f64> = (0..10).map(|i| 0.2 * (i as f64).sin()).collect();
        let rep = dykstra(&h, &sys, 1e-12, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.sweeps, 1);
        assert_eq!(rep.solution, h);
    }

    #[test]
    fn separable_box() {
        let g = Grid::line(2).unwrap();
        let sys = ConstraintSystem::dense(g, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        let rep = dykstra(&[2.0, 2.0], &sys, 1e-12, 100).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(rep.solution[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(rep.solution[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_box_corner() {
        // {|x + y| <= q} and {|x - y| <= q}; (1, 0) lands on the corner (q, 0).
        let g = Grid::line(2).unwrap();
        let q = 1e-3;
        let sys = ConstraintSystem::dense(g, vec![vec![1.0, 1.0], vec![1.0, -1.0]], q).unwrap();
        let rep = dykstra(&[1.0, 0.0], &sys, 1e-14, 10_000).unwrap();
        assert!(rep.converged);
        assert_relative_eq!(rep.solution[0], q, epsilon = 1e-12);
        assert!(rep.solution[1].abs() < 1e-12);
    }

    #[test]
    fn exit_is_feasible_and_flagged_when_capped() {
        let g = Grid::line(32).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 8).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        let h: Vec<f64> = (0..32)
            .map(|i| 3.0 * ((i as f64) * 0.3).sin() + 1.0)
            .collect();
        let rep = dykstra(&h, &sys, 1e-10, 100_000).unwrap();
        assert!(rep.converged);
        assert!(sys.statistic(&rep.solution) <= 1.0 + 1e-6);
        let capped = dykstra(&h, &sys, 1e-10, 2).unwrap();
        assert!(!capped.converged);
        assert_eq!(capped.sweeps, 2);
    }

    #[test]
    fn order_robustness() {
        let g = Grid::square(6).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 3).unwrap(),
            Weighting::Indicator,
            Transform::Square,
            1.5,
        )
        .unwrap();
        let h: Vec<f64> = (0..36)
            .map(|i| ((i * 17 % 11) as f64 - 5.0) * 0.4)
            .collect();
        let tol = 1e-9;
        let a = dykstra(&h, &sys, tol, 100_000).unwrap();
        let rev: Vec<usize> = (0..sys.num_groups()).rev().collect();
        let b = dykstra_ordered(&h, &sys, &rev, tol, 100_000).unwrap();
        assert!(a.converged && b.converged);
        assert!(dist(&a.solution, &b.solution) <= 1e-6 * norm(&h));
        assert!(dykstra_ordered(&h, &sys, &[0, 0], tol, 10).is_err());
    }

    #[test]
    fn warm_start_reaches_the_same_projection() {
        let g = Grid::line(40).unwrap();
        let sys = ConstraintSystem::windowed(
            enumerate(g, 1, 10).unwrap(),
            Weighting::Normalized,
            Transform::Identity,
            1.0,
        )
        .unwrap();
        let h1: Vec<f64> = (0..40).map(|i| 2.0 * ((i as f64) * 0.2).sin()).collect();
        let h2: Vec<f64> = h1
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.05 * (i as f64).cos())
            .collect();
        let mut state = DykstraState::new(&sys);
        let first = dykstra_warm(&h1, &sys, &mut state, 1e-11, 100_000).unwrap();
        assert!(state.active_groups() > 0);
        let warm = dykstra_warm(&h2, &sys, &mut state, 1e-11, 100_000).unwrap();
        let cold = dykstra(&h2, &sys, 1e-11, 100_000).unwrap();
        assert!(first.converged && warm.converged && cold.converged);
        assert!(dist(&warm.solution, &cold.solution) < 1e-8);
    }
}
