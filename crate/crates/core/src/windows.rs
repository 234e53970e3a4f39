//! Systems of axis-aligned cube windows and their partition into groups of
//! pairwise disjoint windows.
//!
//! Window systems are implicit: a [`WindowSystem`] stores only the grid and
//! the range of side lengths, so the 6 251 300 squares of a `512 x 512`
//! image cost nothing until they are visited.

use crate::error::{invalid, Result};
use crate::grid::{Grid, MAX_DIM};

/// A cube `anchor + [0, side)^d`, anchor 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    anchor: [usize; MAX_DIM],
    side: usize,
}

impl Window {
    pub fn new(grid: Grid, anchor: &[usize], side: usize) -> Result<Self> {
        if anchor.len() != grid.dim() {
            return Err(invalid("window anchor dimension differs from grid"));
        }
        if side == 0 || anchor.iter().any(|&a| a + side > grid.side()) {
            return Err(invalid(format!(
                "window {anchor:?} with side {side} does not fit in the grid"
            )));
        }
        let mut a = [0; MAX_DIM];
        a[..anchor.len()].copy_from_slice(anchor);
        Ok(Self { anchor: a, side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Anchor coordinates; only the first `grid.dim()` entries are meaningful.
    pub fn anchor(&self) -> [usize; MAX_DIM] {
        self.anchor
    }

    /// Number of grid points `side^d`.
    pub fn cell_count(&self, dim: usize) -> usize {
        self.side.pow(dim as u32)
    }

    /// Visits the window as contiguous runs `(start, len)` along the last axis.
    #[inline]
    pub fn for_each_run(&self, grid: Grid, mut f: impl FnMut(usize, usize)) {
        let d = grid.dim();
        let strides = grid.strides();
        let base: usize = (0..d).map(|i| self.anchor[i] * strides[i]).sum();
        if d == 1 {
            f(base, self.side);
            return;
        }
        // odometer over the leading d-1 axes
        let mut offs = [0usize; MAX_DIM];
        loop {
            let start = base + (0..d - 1).map(|i| offs[i] * strides[i]).sum::<usize>();
            f(start, self.side);
            let mut axis = d - 1;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                offs[axis] += 1;
                if offs[axis] < self.side {
                    break;
                }
                offs[axis] = 0;
            }
        }
    }

    /// Linear indices of all cells, in row-major order.
    pub fn cells(&self, grid: Grid) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count(grid.dim()));
        self.for_each_run(grid, |start, len| out.extend(start..start + len));
        out
    }

    pub fn is_disjoint(&self, other: &Window, dim: usize) -> bool {
        (0..dim).any(|i| {
            self.anchor[i] + self.side <= other.anchor[i]
                || other.anchor[i] + other.side <= self.anchor[i]
        })
    }
}

/// All cubes of a grid with side lengths in `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSystem {
    grid: Grid,
    s_min: usize,
    s_max: usize,
}

/// Builds the system of all cubes with side lengths in `[s_min, s_max]`,
/// ordered by side length and then lexicographically by anchor.
pub fn enumerate(grid: Grid, s_min: usize, s_max: usize) -> Result<WindowSystem> {
    WindowSystem::new(grid, s_min, s_max)
}

impl WindowSystem {
    pub fn new(grid: Grid, s_min: usize, s_max: usize) -> Result<Self> {
        if s_min == 0 || s_min > s_max || s_max > grid.side() {
            return Err(invalid(format!(
                "scale range [{s_min}, {s_max}] invalid for side length {}",
                grid.side()
            )));
        }
        Ok(Self { grid, s_min, s_max })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn scale_range(&self) -> (usize, usize) {
        (self.s_min, self.s_max)
    }

    pub fn sides(&self) -> std::ops::RangeInclusive<usize> {
        self.s_min..=self.s_max
    }

    /// Number of windows of side `s`: `(m - s + 1)^d`.
    pub fn count_for_side(&self, s: usize) -> usize {
        (self.grid.side() + 1 - s).pow(self.grid.dim() as u32)
    }

    /// `sum_{s} (m - s + 1)^d`.
    pub fn len(&self) -> usize {
        self.sides().map(|s| self.count_for_side(s)).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn side_offset(&self, s: usize) -> usize {
        (self.s_min..s).map(|i| self.count_for_side(i)).sum()
    }

    fn anchor_from_rank(&self, s: usize, mut rank: usize) -> [usize; MAX_DIM] {
        let n = self.grid.side() + 1 - s;
        let mut a = [0; MAX_DIM];
        for axis in (0..self.grid.dim()).rev() {
            a[axis] = rank % n;
            rank /= n;
        }
        a
    }

    /// Position of `w` in enumeration order.
    pub fn index_of(&self, w: &Window) -> Option<usize> {
        let s = w.side;
        if !self.sides().contains(&s) {
            return None;
        }
        let n = self.grid.side() + 1 - s;
        let d = self.grid.dim();
        if w.anchor[..d].iter().any(|&a| a >= n) {
            return None;
        }
        let rank = w.anchor[..d].iter().fold(0, |acc, &a| acc * n + a);
        Some(self.side_offset(s) + rank)
    }

    /// The `i`-th window in enumeration order.
    pub fn window(&self, mut i: usize) -> Option<Window> {
        for s in self.sides() {
            let c = self.count_for_side(s);
            if i < c {
                return Some(Window {
                    anchor: self.anchor_from_rank(s, i),
                    side: s,
                });
            }
            i -= c;
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = Window> + '_ {
        self.sides().flat_map(move |s| {
            (0..self.count_for_side(s)).map(move |r| Window {
                anchor: self.anchor_from_rank(s, r),
                side: s,
            })
        })
    }
}

/// One group of the partition: all windows of side `side` whose anchor is
/// congruent to `residue` modulo `side` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Group {
    pub side: usize,
    pub residue: [usize; MAX_DIM],
}

impl Group {
    fn per_axis(&self, grid: Grid, axis: usize) -> usize {
        let last = grid.side() - self.side;
        let r = self.residue[axis];
        if r > last {
            0
        } else {
            (last - r) / self.side + 1
        }
    }

    /// Number of windows in the group.
    pub fn len(&self, grid: Grid) -> usize {
        (0..grid.dim()).map(|a| self.per_axis(grid, a)).product()
    }

    pub fn is_empty(&self, grid: Grid) -> bool {
        self.len(grid) == 0
    }

    /// Visits the windows of the group in lexicographic anchor order.
    pub fn for_each_window(&self, grid: Grid, mut f: impl FnMut(Window)) {
        let d = grid.dim();
        let mut counts = [1usize; MAX_DIM];
        for (axis, c) in counts.iter_mut().enumerate().take(d) {
            *c = self.per_axis(grid, axis);
            if *c == 0 {
                return;
            }
        }
        let mut t = [0usize; MAX_DIM];
        loop {
            let mut anchor = [0; MAX_DIM];
            for i in 0..d {
                anchor[i] = self.residue[i] + t[i] * self.side;
            }
            f(Window {
                anchor,
                side: self.side,
            });
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                t[axis] += 1;
                if t[axis] < counts[axis] {
                    break;
                }
                t[axis] = 0;
            }
        }
    }

    pub fn windows(&self, grid: Grid) -> Vec<Window> {
        let mut out = Vec::with_capacity(self.len(grid));
        self.for_each_window(grid, |w| out.push(w));
        out
    }
}

/// A partition of a window system into groups of pairwise disjoint windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    grid: Grid,
    groups: Vec<Group>,
}

/// Partitions `system` by side length and anchor residue modulo the side.
///
/// Two distinct windows of side `s` whose anchors agree modulo `s` on every
/// axis differ by at least `s` on some axis and are therefore disjoint. Each
/// side contributes `s^d` groups (fewer when `m - s + 1 < s` leaves residue
/// classes empty; empty groups are dropped).
pub fn partition_disjoint(system: &WindowSystem) -> Partition {
    let grid = system.grid();
    let d = grid.dim();
    let mut groups = Vec::new();
    for s in system.sides() {
        let classes = s.pow(d as u32);
        for rank in 0..classes {
            let mut residue = [0; MAX_DIM];
            let mut r = rank;
            for axis in (0..d).rev() {
                residue[axis] = r % s;
                r /= s;
            }
            let g = Group { side: s, residue };
            if !g.is_empty(grid) {
                groups.push(g);
            }
        }
    }
    Partition { grid, groups }
}

impl Partition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Enumeration indices (see [`WindowSystem::index_of`]) of group `j`.
    pub fn group_indices(&self, system: &WindowSystem, j: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.groups[j].for_each_window(self.grid, |w| {
            out.push(
                system
                    .index_of(&w)
                    .expect("group window belongs to the system"),
            )
        });
        out
    }
}
