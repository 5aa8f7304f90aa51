//! Terrain grid, minimum-cost planning and the goal-reaching reward contract.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUCCESS_RADIUS: f64 = 3.0;
pub const SUCCESS_BONUS: f64 = 100.0;

pub type Cell = (i32, i32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terrain {
    Flat,
    Grass,
    Sand,
    Water,
    Mountain,
    Wall,
}

impl Terrain {
    pub const COUNT: usize = 6;
    pub const ALL: [Terrain; 6] =
        [Terrain::Flat, Terrain::Grass, Terrain::Sand, Terrain::Water, Terrain::Mountain, Terrain::Wall];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn cost(self) -> f64 {
        match self {
            Terrain::Flat | Terrain::Grass | Terrain::Sand => 1.0,
            Terrain::Water => 4.0,
            Terrain::Mountain => 3.0,
            Terrain::Wall => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerrainGrid {
    width: i32,
    height: i32,
    cells: Vec<Terrain>,
}

impl TerrainGrid {
    pub fn new(width: i32, height: i32, fill: Terrain) -> Self {
        assert!(width > 0 && height > 0, "grid must be non-empty");
        TerrainGrid { width, height, cells: vec![fill; (width * height) as usize] }
    }

    /// Flat interior surrounded by a one-cell wall.
    pub fn walled(width: i32, height: i32) -> Self {
        let mut g = TerrainGrid::new(width, height, Terrain::Flat);
        for x in 0..width {
            g.set((x, 0), Terrain::Wall);
            g.set((x, height - 1), Terrain::Wall);
        }
        for y in 0..height {
            g.set((0, y), Terrain::Wall);
            g.set((width - 1, y), Terrain::Wall);
        }
        g
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, (x, y): Cell) -> bool {
        x >= 0 && y >= 0 && x < self.width && y < self.height
    }

    fn idx(&self, (x, y): Cell) -> usize {
        (y * self.width + x) as usize
    }

    /// Out-of-bounds cells read as walls.
    pub fn get(&self, c: Cell) -> Terrain {
        if self.in_bounds(c) {
            self.cells[self.idx(c)]
        } else {
            Terrain::Wall
        }
    }

    pub fn set(&mut self, c: Cell, t: Terrain) {
        if self.in_bounds(c) {
            let i = self.idx(c);
            self.cells[i] = t;
        }
    }

    pub fn cost(&self, c: Cell) -> f64 {
        self.get(c).cost()
    }

    pub fn traversable(&self, c: Cell) -> bool {
        self.get(c) != Terrain::Wall
    }

    /// Cost of a single move between 8-neighbours, or `None` if blocked.
    /// Diagonal moves may not cut a wall corner.
    pub fn move_cost(&self, from: Cell, to: Cell) -> Option<f64> {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        if dx.abs() > 1 || dy.abs() > 1 || (dx == 0 && dy == 0) || !self.traversable(to) {
            return None;
        }
        if dx != 0 && dy != 0 {
            if !self.traversable((from.0 + dx, from.1)) || !self.traversable((from.0, from.1 + dy)) {
                return None;
            }
            Some(self.cost(to) * std::f64::consts::SQRT_2)
        } else {
            Some(self.cost(to))
        }
    }

    pub fn neighbours(&self, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const D: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        D.iter().filter_map(move |&(dx, dy)| {
            let n = (c.0 + dx, c.1 + dy);
            self.move_cost(c, n).map(|w| (n, w))
        })
    }

    pub fn count(&self, t: Terrain) -> usize {
        self.cells.iter().filter(|&&c| c == t).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Path { cells: Vec<Cell>, cost: f64 },
    Unreachable,
}

impl Plan {
    pub fn cost(&self) -> Option<f64> {
        match self {
            Plan::Path { cost, .. } => Some(*cost),
            Plan::Unreachable => None,
        }
    }

    pub fn cells(&self) -> Option<&[Cell]> {
        match self {
            Plan::Path { cells, .. } => Some(cells),
            Plan::Unreachable => None,
        }
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = (a.0 - b.0).abs() as f64;
    let dy = (a.1 - b.1).abs() as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn cell_center(c: Cell) -> (f64, f64) {
    (c.0 as f64, c.1 as f64)
}

pub fn within_success_radius(pos: (f64, f64), goal: (f64, f64)) -> bool {
    dist(pos, goal) <= SUCCESS_RADIUS
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    cell: Cell,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed so BinaryHeap pops the lowest f, then lowest h, then lowest cell.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Search {
    g: Vec<f64>,
    parent: Vec<u32>,
    closed: Vec<bool>,
}

fn astar(grid: &TerrainGrid, start: Cell, goal: Cell) -> (Search, bool) {
    let n = (grid.width * grid.height) as usize;
    let mut s = Search { g: vec![f64::INFINITY; n], parent: vec![u32::MAX; n], closed: vec![false; n] };
    let mut open = BinaryHeap::new();
    let si = grid.idx(start);
    s.g[si] = 0.0;
    let h0 = octile(start, goal);
    open.push(Open { f: h0, h: h0, cell: start });
    let goal_ok = grid.traversable(goal);
    while let Some(Open { cell, .. }) = open.pop() {
        let ci = grid.idx(cell);
        if s.closed[ci] {
            continue;
        }
        s.closed[ci] = true;
        if goal_ok && cell == goal {
            return (s, true);
        }
        let gc = s.g[ci];
        for (nb, w) in grid.neighbours(cell) {
            let ni = grid.idx(nb);
            if s.closed[ni] {
                continue;
            }
            let ng = gc + w;
            if ng < s.g[ni] {
                s.g[ni] = ng;
                s.parent[ni] = ci as u32;
                let h = if goal_ok { octile(nb, goal) } else { 0.0 };
                open.push(Open { f: ng + h, h, cell: nb });
            }
        }
    }
    (s, false)
}

fn trace(grid: &TerrainGrid, s: &Search, end: Cell) -> Vec<Cell> {
    let mut cells = vec![end];
    let mut i = grid.idx(end);
    while s.parent[i] != u32::MAX {
        i = s.parent[i] as usize;
        cells.push(((i as i32) % grid.width, (i as i32) / grid.width));
    }
    cells.reverse();
    cells
}

/// Minimum-cost 8-connected path from `start` to `goal`.
pub fn plan(grid: &TerrainGrid, start: Cell, goal: Cell) -> Result<Plan> {
    if !grid.traversable(start) {
        return Err(Error::StartBlocked { x: start.0, y: start.1 });
    }
    if !grid.in_bounds(goal) || !grid.traversable(goal) {
        return Ok(Plan::Unreachable);
    }
    let (s, found) = astar(grid, start, goal);
    if !found {
        return Ok(Plan::Unreachable);
    }
    Ok(Plan::Path { cells: trace(grid, &s, goal), cost: s.g[grid.idx(goal)] })
}

/// Like [`plan`], but when the goal is unreachable returns a path to the
/// reachable cell nearest to it (Euclidean, ties by lowest cell).
pub fn plan_toward(grid: &TerrainGrid, start: Cell, goal: (f64, f64)) -> Result<Plan> {
    if !grid.traversable(start) {
        return Err(Error::StartBlocked { x: start.0, y: start.1 });
    }
    let goal_cell = (goal.0.round() as i32, goal.1.round() as i32);
    if grid.in_bounds(goal_cell) && grid.traversable(goal_cell) {
        let (s, found) = astar(grid, start, goal_cell);
        if found {
            return Ok(Plan::Path { cells: trace(grid, &s, goal_cell), cost: s.g[grid.idx(goal_cell)] });
        }
        return Ok(nearest_in(grid, &s, goal));
    }
    let (s, _) = astar(grid, start, (-1, -1));
    Ok(nearest_in(grid, &s, goal))
}

fn nearest_in(grid: &TerrainGrid, s: &Search, goal: (f64, f64)) -> Plan {
    let mut best: Option<(f64, Cell)> = None;
    for (i, &c) in s.closed.iter().enumerate() {
        if !c {
            continue;
        }
        let cell = ((i as i32) % grid.width, (i as i32) / grid.width);
        let d = dist(cell_center(cell), goal);
        let better = match best {
            None => true,
            Some((bd, bc)) => d < bd || (d == bd && cell < bc),
        };
        if better {
            best = Some((d, cell));
        }
    }
    match best {
        Some((_, cell)) => Plan::Path { cells: trace(grid, s, cell), cost: s.g[grid.idx(cell)] },
        None => Plan::Unreachable,
    }
}

/// Distance-delta reward plus the one-off bonus on entering the success radius.
pub fn step_reward(prev: (f64, f64), next: (f64, f64), goal: (f64, f64)) -> f64 {
    let mut r = dist(prev, goal) - dist(next, goal);
    if dist(prev, goal) > SUCCESS_RADIUS && dist(next, goal) <= SUCCESS_RADIUS {
        r += SUCCESS_BONUS;
    }
    r
}

/// Accumulates rewards along a trajectory, paying the bonus only on the
/// first entry into the success radius.
#[derive(Clone, Debug)]
pub struct RewardTracker {
    goal: (f64, f64),
    entered: bool,
    pub distance_reward: f64,
    pub total: f64,
}

impl RewardTracker {
    pub fn new(start: (f64, f64), goal: (f64, f64)) -> Self {
        RewardTracker { goal, entered: within_success_radius(start, goal), distance_reward: 0.0, total: 0.0 }
    }

    pub fn step(&mut self, prev: (f64, f64), next: (f64, f64)) -> f64 {
        let delta = dist(prev, self.goal) - dist(next, self.goal);
        let mut r = delta;
        if !self.entered && within_success_radius(next, self.goal) {
            self.entered = true;
            r += SUCCESS_BONUS;
        }
        self.distance_reward += delta;
        self.total += r;
        r
    }

    pub fn entered(&self) -> bool {
        self.entered
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NavOutcome {
    pub path: Vec<Cell>,
    pub reached: bool,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub realized_cost: f64,
}

pub fn navigate(grid: &TerrainGrid, start: Cell, goal: Cell, max_steps: usize) -> Result<NavOutcome> {
    let mut g = grid.clone();
    navigate_with(&mut g, start, goal, max_steps, |_, _| false)
}

/// Follows the plan one move at a time. Before each move `mutate(step, grid)`
/// may edit the terrain; returning true forces a replan.
pub fn navigate_with<F>(
    grid: &mut TerrainGrid,
    start: Cell,
    goal: Cell,
    max_steps: usize,
    mut mutate: F,
) -> Result<NavOutcome>
where
    F: FnMut(usize, &mut TerrainGrid) -> bool,
{
    if max_steps == 0 {
        return Err(Error::InvalidParameter { name: "max_steps", reason: "must be >= 1".into() });
    }
    let goal_f = cell_center(goal);
    let mut pos = start;
    let mut path = vec![start];
    let mut tracker = RewardTracker::new(cell_center(start), goal_f);
    let mut realized = 0.0;
    let mut route: Vec<Cell> = Vec::new();
    let mut cursor = 0;
    let mut need_plan = true;
    let mut steps = 0;
    while steps < max_steps && pos != goal {
        if mutate(steps, grid) {
            need_plan = true;
        }
        if need_plan {
            match plan(grid, pos, goal)? {
                Plan::Path { cells, .. } => {
                    route = cells;
                    cursor = 1;
                    need_plan = false;
                }
                Plan::Unreachable => break,
            }
        }
        let next = route[cursor];
        let Some(w) = grid.move_cost(pos, next) else {
            need_plan = true;
            continue;
        };
        realized += w;
        tracker.step(cell_center(pos), cell_center(next));
        pos = next;
        path.push(pos);
        cursor += 1;
        steps += 1;
    }
    Ok(NavOutcome {
        reached: within_success_radius(cell_center(pos), goal_f),
        path,
        steps,
        cumulative_reward: tracker.total,
        realized_cost: realized,
    })
}

/// Success weighted by path length: mean of success x optimal / max(optimal, realized).
pub fn spl(runs: &[(bool, f64, f64)]) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    let s: f64 = runs
        .iter()
        .map(|&(ok, opt, real)| if ok { if opt <= 0.0 { 1.0 } else { opt / opt.max(real) } } else { 0.0 })
        .sum();
    s / runs.len() as f64
}
