//! Map generators for each scenario family.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{MemoryTaskKind, Scenario, ScenarioSpec};
use super::{yaw_towards, Entity, EventScript, Look, WorldConfig, WorldState};
use crate::embedding::FeatureKind;
use crate::error::Result;
use crate::navigation::{Cell, Terrain, TerrainGrid};
use crate::task::TaskKind;

/// A spot the scripted exploration phase stops at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub center: Cell,
    pub view_cell: Cell,
    pub view_yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "leg", rename_all = "snake_case")]
pub enum TourLeg {
    /// Walk to a cell.
    Go { cell: Cell },
    /// Face `yaw` and stand still until the clock reaches `until`.
    Stay { until: u64, yaw: f64, landmark: Option<usize> },
    /// Visit random waypoints until `until`, keeping `avoid_radius` away from `avoid`.
    Wander { until: u64, avoid: Vec<Cell>, avoid_radius: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutInfo {
    pub map_name: String,
    pub landmarks: Vec<Landmark>,
    pub tour: Vec<TourLeg>,
    /// Water tiles' bounding center, when the map has a single pond.
    pub pond: Option<Cell>,
}

struct Builder {
    grid: TerrainGrid,
    entities: Vec<Entity>,
    used: HashSet<Cell>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn new(side: i32, seed: u64) -> Self {
        Builder {
            grid: TerrainGrid::walled(side, side),
            entities: Vec::new(),
            used: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn side(&self) -> i32 {
        self.grid.width()
    }

    fn disc(&mut self, c: Cell, r: f64, t: Terrain) {
        let ri = r.ceil() as i32;
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let p = (c.0 + dx, c.1 + dy);
                if ((dx * dx + dy * dy) as f64) <= r * r && self.interior(p) {
                    self.grid.set(p, t);
                }
            }
        }
    }

    fn rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, t: Terrain) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.interior((x, y)) {
                    self.grid.set((x, y), t);
                }
            }
        }
    }

    fn interior(&self, (x, y): Cell) -> bool {
        x > 0 && y > 0 && x < self.side() - 1 && y < self.side() - 1
    }

    fn free(&self, c: Cell) -> bool {
        self.interior(c) && matches!(self.grid.get(c), Terrain::Flat | Terrain::Grass) && !self.used.contains(&c)
    }

    fn entity(&mut self, kind: FeatureKind, cell: Cell, script: Option<EventScript>) {
        let id = self.entities.len() as u32;
        self.used.insert(cell);
        self.entities.push(Entity { id, kind, cell, alive: true, script });
    }

    /// Up to `n` entities on free cells of a rectangle, away from `keep_out`.
    fn scatter(&mut self, kind: FeatureKind, (x0, y0, x1, y1): (i32, i32, i32, i32), n: usize, keep_out: &[(Cell, f64)]) {
        let mut placed = 0;
        let mut tries = 0;
        while placed < n && tries < n * 50 {
            tries += 1;
            let c = (self.rng.gen_range(x0..=x1), self.rng.gen_range(y0..=y1));
            if self.free(c) && !near_any(c, keep_out) {
                self.entity(kind, c, None);
                placed += 1;
            }
        }
    }

    fn herd(&mut self, kind: FeatureKind, center: Cell, n: usize, spread: i32) {
        self.scatter(kind, (center.0 - spread, center.1 - spread, center.0 + spread, center.1 + spread), n, &[]);
    }

    fn patches(&mut self, t: Terrain, n: usize, keep_out: &[(Cell, f64)]) {
        let s = self.side();
        let mut placed = 0;
        let mut tries = 0;
        while placed < n && tries < n * 50 {
            tries += 1;
            let c = (self.rng.gen_range(4..s - 4), self.rng.gen_range(4..s - 4));
            if self.grid.get(c) == Terrain::Flat && !near_any(c, keep_out) {
                let r: f64 = self.rng.gen_range(1.5..3.0);
                let ri = r.ceil() as i32;
                for dy in -ri..=ri {
                    for dx in -ri..=ri {
                        let p = (c.0 + dx, c.1 + dy);
                        if ((dx * dx + dy * dy) as f64) <= r * r && self.grid.get(p) == Terrain::Flat {
                            self.grid.set(p, t);
                        }
                    }
                }
                placed += 1;
            }
        }
    }

    fn jitter(&mut self, c: Cell, j: i32) -> Cell {
        (c.0 + self.rng.gen_range(-j..=j), c.1 + self.rng.gen_range(-j..=j))
    }

    fn finish(self, spawn: Cell, yaw: f64, config: WorldConfig, info: LayoutInfo, seed: u64) -> WorldState {
        let mut grid = self.grid;
        if !grid.traversable(spawn) {
            grid.set(spawn, Terrain::Flat);
        }
        WorldState::new(grid, self.entities, spawn, yaw, config, info, seed)
    }
}

fn near_any(c: Cell, zones: &[(Cell, f64)]) -> bool {
    zones.iter().any(|&(z, r)| (((c.0 - z.0).pow(2) + (c.1 - z.1).pow(2)) as f64) < r * r)
}

/// Which A-B-A map a task pair is played on.
pub fn aba_map(a: TaskKind, b: TaskKind) -> u8 {
    if b == TaskKind::Sand {
        3
    } else if a == TaskKind::Water {
        1
    } else {
        2
    }
}

pub fn build_world(spec: &ScenarioSpec, seed: u64) -> Result<WorldState> {
    spec.validate()?;
    let side = spec.map_side();
    let cfg = spec.world_config();
    let w = match &spec.scenario {
        Scenario::AbaSparse { a, b } => {
            let (a, b) = spec.aba_pair(*a, *b)?;
            match aba_map(a, b) {
                1 => barrier_map(side, seed, cfg),
                3 => ridge_map(side, seed, cfg, true),
                _ => ridge_map(side, seed, cfg, false),
            }
        }
        Scenario::ExplorationOnly => barrier_map(side, seed, cfg),
        Scenario::RandomPlains => random_plains(side, seed, cfg),
        Scenario::MemoryTask { task } => memory_task(*task, side, seed, cfg),
        Scenario::LongInstruction => long_instruction(side, seed, cfg),
        Scenario::LongNavigation => long_navigation(side, seed, cfg),
    };
    Ok(w)
}

fn scale(side: i32, v: i32) -> i32 {
    v * side / 100
}

/// Trees on the left, one pond in the upper-right corner, mountain ridges in between.
fn barrier_map(side: i32, seed: u64, cfg: WorldConfig) -> WorldState {
    let s = |v| scale(side, v);
    let mut b = Builder::new(side, seed);
    b.rect(s(54), s(15), s(56), s(30), Terrain::Mountain);
    b.rect(s(54), s(35), s(56), s(62), Terrain::Mountain);
    b.rect(s(54), s(67), s(56), s(85), Terrain::Mountain);
    b.rect(s(20), s(40), s(45), s(42), Terrain::Mountain);
    b.rect(s(65), s(60), s(90), s(62), Terrain::Mountain);
    let pond = b.jitter((s(86), s(86)), 3);
    b.disc(pond, 4.0, Terrain::Water);
    let keep = [(pond, 12.0)];
    b.patches(Terrain::Grass, 14, &keep);
    b.scatter(FeatureKind::Tree, (3, 3, s(34), side - 4), 160, &[]);
    b.scatter(FeatureKind::Dirt, (2, 2, side - 3, side - 3), 50, &keep);
    let info = LayoutInfo { map_name: "barrier".into(), pond: Some(pond), ..Default::default() };
    b.finish((side / 2, side / 2), 0.0, cfg, info, seed)
}

/// Trees on the left, cows and sheep on the right, a sand-flanked ridge in between,
/// dirt on the far sides; optionally a pond at the top.
fn ridge_map(side: i32, seed: u64, cfg: WorldConfig, with_pond: bool) -> WorldState {
    let s = |v| scale(side, v);
    let mut b = Builder::new(side, seed);
    b.rect(s(46), 1, s(54), side - 2, Terrain::Sand);
    b.rect(s(49), 1, s(51), s(19), Terrain::Mountain);
    b.rect(s(49), s(24), s(51), s(74), Terrain::Mountain);
    b.rect(s(49), s(79), s(51), side - 2, Terrain::Mountain);
    let mut pond = None;
    let mut keep = Vec::new();
    if with_pond {
        let p = b.jitter((s(72), s(91)), 3);
        b.disc(p, 3.5, Terrain::Water);
        pond = Some(p);
        keep.push((p, 10.0));
    }
    b.patches(Terrain::Grass, 12, &keep);
    b.scatter(FeatureKind::Tree, (3, 3, s(30), side - 4), 140, &[]);
    let cows = b.jitter((s(82), s(25)), 4);
    let sheep = b.jitter((s(82), s(72)), 4);
    b.herd(FeatureKind::Cow, cows, 3, 2);
    b.herd(FeatureKind::Sheep, sheep, 3, 2);
    b.scatter(FeatureKind::Dirt, (2, 2, s(7), side - 3), 25, &[]);
    b.scatter(FeatureKind::Dirt, (s(92), 2, side - 3, side - 3), 25, &[]);
    let name = if with_pond { "ridge_pond" } else { "ridge" };
    let info = LayoutInfo { map_name: name.into(), pond, ..Default::default() };
    b.finish((s(40), s(50)), 0.0, cfg, info, seed)
}

fn random_plains(side: i32, seed: u64, cfg: WorldConfig) -> WorldState {
    let mut b = Builder::new(side, seed);
    let m = 12;
    let pick = |b: &mut Builder| (b.rng.gen_range(m..side - m), b.rng.gen_range(m..side - m));
    let pond = pick(&mut b);
    b.disc(pond, 3.5, Terrain::Water);
    let keep = [(pond, 8.0)];
    b.patches(Terrain::Grass, 10, &keep);
    for _ in 0..3 {
        let g = pick(&mut b);
        b.scatter(FeatureKind::Tree, (g.0 - 6, g.1 - 6, g.0 + 6, g.1 + 6), 25, &keep);
    }
    let cows = pick(&mut b);
    b.herd(FeatureKind::Cow, cows, 3, 2);
    let sheep = pick(&mut b);
    b.herd(FeatureKind::Sheep, sheep, 3, 2);
    b.scatter(FeatureKind::Dirt, (2, 2, side - 3, side - 3), 40, &keep);
    let info = LayoutInfo { map_name: "random_plains".into(), pond: Some(pond), ..Default::default() };
    b.finish((side / 2, side / 2), 0.0, cfg, info, seed)
}

fn landmark(name: &str, center: Cell, view_cell: Cell) -> Landmark {
    let yaw = yaw_towards((view_cell.0 as f64, view_cell.1 as f64), (center.0 as f64, center.1 as f64));
    Landmark { name: name.into(), center, view_cell, view_yaw: yaw }
}

/// Plain map with one key spot; the scripted phase lingers there, then wanders.
fn memory_task(kind: MemoryTaskKind, side: i32, seed: u64, cfg: WorldConfig) -> WorldState {
    let s = |v| scale(side, v);
    let mut b = Builder::new(side, seed);
    let (landmarks, tour) = match kind {
        MemoryTaskKind::Water => {
            let pond = b.jitter((s(50), s(50)), s(20));
            b.disc(pond, 3.0, Terrain::Water);
            let lm = landmark("pond", pond, (pond.0 - 7, pond.1));
            let tour = vec![
                TourLeg::Stay { until: 500, yaw: lm.view_yaw, landmark: Some(0) },
                TourLeg::Wander { until: 3000, avoid: vec![pond], avoid_radius: 16.0 },
            ];
            (vec![lm], tour)
        }
        MemoryTaskKind::DeathSpot => {
            let spot = b.jitter((s(50), s(50)), s(20));
            let burn = EventScript::new(vec![(0, Look::Shown(FeatureKind::ZombieBurning)), (500, Look::Hidden)]);
            for off in [(4, -1), (4, 1), (5, 0)] {
                b.entity(FeatureKind::ZombieBurning, (spot.0 + off.0, spot.1 + off.1), Some(burn.clone()));
            }
            let lm = landmark("death_spot", (spot.0 + 4, spot.1), spot);
            let tour = vec![
                TourLeg::Stay { until: 1000, yaw: lm.view_yaw, landmark: Some(0) },
                TourLeg::Wander { until: 3000, avoid: vec![spot], avoid_radius: 16.0 },
            ];
            (vec![lm], tour)
        }
        MemoryTaskKind::TwinHouses => {
            let h1 = b.jitter((s(25), s(50)), s(8));
            let h2 = b.jitter((s(75), s(50)), s(8));
            b.entity(FeatureKind::House, h1, None);
            b.entity(FeatureKind::Flower, (h1.0, h1.1 + 2), None);
            b.entity(FeatureKind::House, h2, None);
            b.entity(FeatureKind::Well, (h2.0, h2.1 + 2), None);
            let l1 = landmark("house_1", h1, (h1.0 - 4, h1.1));
            let l2 = landmark("house_2", h2, (h2.0 - 4, h2.1));
            let tour = vec![
                TourLeg::Stay { until: 100, yaw: l1.view_yaw, landmark: Some(0) },
                TourLeg::Go { cell: l2.view_cell },
                TourLeg::Stay { until: 2000, yaw: l2.view_yaw, landmark: Some(1) },
                TourLeg::Wander { until: 3000, avoid: vec![h1, h2], avoid_radius: 16.0 },
            ];
            (vec![l1, l2], tour)
        }
    };
    let keep: Vec<(Cell, f64)> = landmarks.iter().map(|l| (l.center, 16.0)).collect();
    b.patches(Terrain::Grass, 10, &keep);
    b.scatter(FeatureKind::Tree, (2, 2, side - 3, side - 3), 60, &keep);
    b.scatter(FeatureKind::Dirt, (2, 2, side - 3, side - 3), 30, &keep);
    let spawn = landmarks[0].view_cell;
    let yaw = landmarks[0].view_yaw;
    let info = LayoutInfo { map_name: kind.name().into(), pond: None, landmarks, tour };
    b.finish(spawn, yaw, cfg, info, seed)
}

fn long_instruction(side: i32, seed: u64, cfg: WorldConfig) -> WorldState {
    let s = |v| scale(side, v);
    let mut b = Builder::new(side, seed);
    b.rect(s(49), s(10), s(50), s(29), Terrain::Mountain);
    b.rect(s(49), s(33), s(50), s(64), Terrain::Mountain);
    b.rect(s(49), s(68), s(50), s(90), Terrain::Mountain);
    b.rect(s(10), s(49), s(24), s(50), Terrain::Mountain);
    b.rect(s(28), s(49), s(45), s(50), Terrain::Mountain);
    let pond = b.jitter((s(85), s(85)), 4);
    b.disc(pond, 6.0, Terrain::Water);
    let keep = [(pond, 12.0)];
    b.patches(Terrain::Grass, 40, &keep);
    b.scatter(FeatureKind::Tree, (5, 5, s(40), s(40)), 300, &[]);
    b.scatter(FeatureKind::Tree, (s(55), 5, s(95), s(35)), 200, &[]);
    b.scatter(FeatureKind::Tree, (5, s(60), s(35), s(95)), 150, &[]);
    b.scatter(FeatureKind::Sheep, (s(8), s(62), s(33), s(92)), 50, &[]);
    b.scatter(FeatureKind::Cow, (s(60), s(8), s(92), s(32)), 50, &[]);
    b.scatter(FeatureKind::Dirt, (2, 2, side - 3, side - 3), 150, &keep);
    let info = LayoutInfo { map_name: "long_instruction".into(), pond: Some(pond), ..Default::default() };
    b.finish((s(55), s(55)), 0.0, cfg, info, seed)
}

/// Six landmarks on a ring; the first 12K steps visit each for 2K steps.
pub const LANDMARK_WINDOW: u64 = 2000;
pub const EVENT_OFFSET: u64 = 1200;
pub const LONG_NAV_EXPLORATION: u64 = 16_000;

fn long_navigation(side: i32, seed: u64, cfg: WorldConfig) -> WorldState {
    let mut b = Builder::new(side, seed);
    let c = (side / 2, side / 2);
    let names = ["burning_zombies", "water", "sugar_cane", "spider_spawn", "well", "house"];
    let mut landmarks = Vec::new();
    let mut tour = Vec::new();
    let ring = side as f64 * 0.3;
    let phase = b.rng.gen_range(0.0..60.0f64);
    for (i, name) in names.iter().enumerate() {
        let ang = (phase + 60.0 * i as f64).to_radians();
        let center = (c.0 + (ring * ang.cos()).round() as i32, c.1 + (ring * ang.sin()).round() as i32);
        let view = (c.0 + ((ring - 6.0) * ang.cos()).round() as i32, c.1 + ((ring - 6.0) * ang.sin()).round() as i32);
        let start = LANDMARK_WINDOW * i as u64;
        let change = start + EVENT_OFFSET;
        let (fx, fy) = (center.0 - view.0, center.1 - view.1);
        let side_off = (-fy.signum(), fx.signum());
        match i {
            0 => {
                let burn = EventScript::new(vec![(0, Look::Shown(FeatureKind::ZombieBurning)), (change, Look::Hidden)]);
                for k in -1..=1 {
                    b.entity(FeatureKind::ZombieBurning, (center.0 + k * side_off.0, center.1 + k * side_off.1), Some(burn.clone()));
                }
            }
            1 => b.disc(center, 3.5, Terrain::Water),
            2 => {
                let blow = EventScript::new(vec![(0, Look::Shown(FeatureKind::SugarCane)), (change, Look::Hidden)]);
                for k in -1..=1 {
                    b.entity(FeatureKind::SugarCane, (center.0 + k * side_off.0, center.1 + k * side_off.1), Some(blow.clone()));
                }
            }
            3 => {
                b.entity(FeatureKind::Spawner, center, None);
                let spawn = EventScript::new(vec![(0, Look::Hidden), (change, Look::Shown(FeatureKind::Spider))]);
                b.entity(FeatureKind::Spider, (center.0 - side_off.0, center.1 - side_off.1), Some(spawn.clone()));
                b.entity(FeatureKind::Spider, (center.0 + side_off.0, center.1 + side_off.1), Some(spawn));
            }
            4 => {
                b.entity(FeatureKind::Well, center, None);
                b.disc((center.0 + 2 * side_off.0, center.1 + 2 * side_off.1), 1.5, Terrain::Sand);
            }
            _ => {
                b.entity(FeatureKind::House, center, None);
                b.entity(FeatureKind::Flower, (center.0 + 2 * side_off.0, center.1 + 2 * side_off.1), None);
            }
        }
        let lm = landmark(name, center, view);
        tour.push(TourLeg::Go { cell: lm.view_cell });
        tour.push(TourLeg::Stay { until: start + LANDMARK_WINDOW, yaw: lm.view_yaw, landmark: Some(i) });
        landmarks.push(lm);
    }
    let avoid: Vec<Cell> = landmarks.iter().map(|l| l.center).collect();
    tour.push(TourLeg::Wander { until: LONG_NAV_EXPLORATION, avoid: avoid.clone(), avoid_radius: 14.0 });
    let keep: Vec<(Cell, f64)> = avoid.iter().map(|&a| (a, 14.0)).collect();
    b.patches(Terrain::Grass, 20, &keep);
    b.scatter(FeatureKind::Tree, (2, 2, side - 3, side - 3), 150, &keep);
    b.scatter(FeatureKind::Dirt, (2, 2, side - 3, side - 3), 60, &keep);
    let info = LayoutInfo { map_name: "long_navigation".into(), pond: None, landmarks, tour };
    b.finish(c, 0.0, cfg, info, seed)
}
