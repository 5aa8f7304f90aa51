//! Visitation counting with field-of-view marking and least-visited goal selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fov {
    pub radius: f64,
    /// Half-angle of the view sector, degrees.
    pub half_angle: f64,
}

impl Default for Fov {
    fn default() -> Self {
        Fov { radius: 8.0, half_angle: 30.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSelection {
    pub goal: (f64, f64),
    pub super_cell: (usize, usize),
    pub min_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitationMap {
    counts: Vec<u32>,
    min_x: i32,
    min_y: i32,
    width: i32,
    height: i32,
    super_cell: i32,
    /// Min corners of super-cells the navigator found unreachable.
    blocked: BTreeSet<(i32, i32)>,
}

impl VisitationMap {
    /// `side` x `side` grid centred on `origin`.
    pub fn new(side: usize, super_cell: usize, origin: (i32, i32)) -> Self {
        let side = side as i32;
        Self::with_bounds(origin.0 - side / 2, origin.1 - side / 2, side, side, super_cell)
    }

    pub fn with_bounds(min_x: i32, min_y: i32, width: i32, height: i32, super_cell: usize) -> Self {
        assert!(width > 0 && height > 0 && super_cell > 0, "degenerate visitation map");
        VisitationMap {
            counts: vec![0; (width * height) as usize],
            min_x,
            min_y,
            width,
            height,
            super_cell: super_cell as i32,
            blocked: BTreeSet::new(),
        }
    }

    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        (self.min_x, self.min_y, self.width, self.height)
    }

    pub fn contains(&self, (x, y): (i32, i32)) -> bool {
        x >= self.min_x && y >= self.min_y && x < self.min_x + self.width && y < self.min_y + self.height
    }

    pub fn count(&self, c: (i32, i32)) -> u32 {
        if self.contains(c) {
            self.counts[self.idx(c)]
        } else {
            0
        }
    }

    fn idx(&self, (x, y): (i32, i32)) -> usize {
        ((y - self.min_y) * self.width + (x - self.min_x)) as usize
    }

    fn bump(&mut self, c: (i32, i32)) {
        if self.contains(c) {
            let i = self.idx(c);
            self.counts[i] = self.counts[i].saturating_add(1);
        }
    }

    /// Marks the agent's cell and every cell of its view sector once.
    /// Grows the map first if the agent is outside it; sector cells outside
    /// the map are ignored.
    pub fn mark(&mut self, pos: (f64, f64), yaw: f64, fov: &Fov) {
        let cell = (pos.0.round() as i32, pos.1.round() as i32);
        if !self.contains(cell) {
            self.expand(cell);
        }
        self.bump(cell);
        for c in fov_cells(cell, yaw, fov) {
            self.bump(c);
        }
    }

    /// Grows by whole super-cells until `cell` is inside.
    pub fn expand(&mut self, cell: (i32, i32)) {
        let g = self.super_cell;
        let (mut min_x, mut min_y, mut w, mut h) = (self.min_x, self.min_y, self.width, self.height);
        while cell.0 < min_x {
            min_x -= g;
            w += g;
        }
        while cell.0 >= min_x + w {
            w += g;
        }
        while cell.1 < min_y {
            min_y -= g;
            h += g;
        }
        while cell.1 >= min_y + h {
            h += g;
        }
        if (min_x, min_y, w, h) == self.bounds() {
            return;
        }
        let mut grown = VisitationMap::with_bounds(min_x, min_y, w, h, g as usize);
        for y in self.min_y..self.min_y + self.height {
            for x in self.min_x..self.min_x + self.width {
                let i = grown.idx((x, y));
                grown.counts[i] = self.counts[self.idx((x, y))];
            }
        }
        grown.blocked = std::mem::take(&mut self.blocked);
        *self = grown;
    }

    fn corner(&self, row: usize, col: usize) -> (i32, i32) {
        (self.min_x + col as i32 * self.super_cell, self.min_y + row as i32 * self.super_cell)
    }

    /// Excludes a super-cell from goal selection (its center cannot be reached).
    pub fn block(&mut self, row: usize, col: usize) {
        let c = self.corner(row, col);
        self.blocked.insert(c);
    }

    pub fn is_blocked(&self, row: usize, col: usize) -> bool {
        self.blocked.contains(&self.corner(row, col))
    }

    fn super_dims(&self) -> (usize, usize) {
        let g = self.super_cell;
        (((self.height + g - 1) / g) as usize, ((self.width + g - 1) / g) as usize)
    }

    /// Summed counts per super-cell, row-major.
    pub fn super_cell_scores(&self) -> Vec<u64> {
        let (rows, cols) = self.super_dims();
        let g = self.super_cell as usize;
        let mut s = vec![0u64; rows * cols];
        for r in 0..self.height as usize {
            for c in 0..self.width as usize {
                s[(r / g) * cols + c / g] += self.counts[r * self.width as usize + c] as u64;
            }
        }
        s
    }

    pub fn super_cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let g = self.super_cell as f64;
        (
            self.min_x as f64 + col as f64 * g + (g - 1.0) / 2.0,
            self.min_y as f64 + row as f64 * g + (g - 1.0) / 2.0,
        )
    }

    /// Least-visited super-cell; ties by distance to `current`, then row-major order.
    /// Blocked super-cells are skipped unless every one is blocked.
    pub fn select_goal(&self, current: (f64, f64)) -> GoalSelection {
        let (_, cols) = self.super_dims();
        let scores = self.super_cell_scores();
        let all_blocked = (0..scores.len()).all(|i| self.is_blocked(i / cols, i % cols));
        let mut best: Option<(u64, f64, usize)> = None;
        for (i, &s) in scores.iter().enumerate() {
            if !all_blocked && self.is_blocked(i / cols, i % cols) {
                continue;
            }
            let (cx, cy) = self.super_cell_center(i / cols, i % cols);
            let d2 = (cx - current.0).powi(2) + (cy - current.1).powi(2);
            let better = match best {
                None => true,
                Some((bs, bd, _)) => s < bs || (s == bs && d2 < bd),
            };
            if better {
                best = Some((s, d2, i));
            }
        }
        let (min_count, _, i) = best.expect("map has at least one super-cell");
        let (row, col) = (i / cols, i % cols);
        GoalSelection { goal: self.super_cell_center(row, col), super_cell: (row, col), min_count }
    }
}

/// Cells inside the view sector (excluding the agent's own cell).
pub fn fov_cells(cell: (i32, i32), yaw: f64, fov: &Fov) -> Vec<(i32, i32)> {
    let r = fov.radius.floor() as i32;
    let (sy, cy) = yaw.to_radians().sin_cos();
    let cos_limit = fov.half_angle.to_radians().cos();
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx == 0 && dy == 0 {
                continue;
            }
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if d > fov.radius {
                continue;
            }
            let cos = (dx as f64 * cy + dy as f64 * sy) / d;
            if cos >= cos_limit - 1e-9 {
                out.push((cell.0 + dx, cell.1 + dy));
            }
        }
    }
    out
}

/// Coverage percentage and mean revisits over an `eval` x `eval` partition of
/// `bounds = (min_x, min_y, width, height)`. Revisits count maximal contiguous
/// occupancy segments minus one, averaged over cells occupied more than
/// `min_occupancy` steps.
pub fn coverage_and_revisits(
    trajectory: &[(i32, i32)],
    bounds: (i32, i32, i32, i32),
    eval: usize,
    min_occupancy: u64,
) -> (f64, f64) {
    let (min_x, min_y, w, h) = bounds;
    let cell_of = |(x, y): (i32, i32)| -> usize {
        let cx = (((x - min_x).clamp(0, w - 1) as usize) * eval) / w as usize;
        let cy = (((y - min_y).clamp(0, h - 1) as usize) * eval) / h as usize;
        cy * eval + cx
    };
    let mut occupancy = vec![0u64; eval * eval];
    let mut segments = vec![0u64; eval * eval];
    let mut prev: Option<usize> = None;
    for &p in trajectory {
        let c = cell_of(p);
        occupancy[c] += 1;
        if prev != Some(c) {
            segments[c] += 1;
        }
        prev = Some(c);
    }
    let visited = occupancy.iter().filter(|&&o| o > 0).count();
    let coverage = 100.0 * visited as f64 / (eval * eval) as f64;
    let qualifying: Vec<u64> = occupancy
        .iter()
        .zip(&segments)
        .filter(|(&o, _)| o > min_occupancy)
        .map(|(_, &s)| s - 1)
        .collect();
    let revisit = if qualifying.is_empty() {
        0.0
    } else {
        qualifying.iter().sum::<u64>() as f64 / qualifying.len() as f64
    };
    (coverage, revisit)
}
