//! Deterministic gridworld: terrain, entities with scripted looks, timed
//! movement, interaction-based harvesting and scene descriptors.

pub mod layout;
pub mod scenario;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{FeatureKind, SceneDescriptor, VisibleFeature};
use crate::exploration::{fov_cells, Fov};
use crate::memory::{normalize_yaw, Pose};
use crate::navigation::{dist, Cell, Terrain, TerrainGrid, SUCCESS_RADIUS};
use crate::task::TaskKind;

pub use layout::{build_world, Landmark, LayoutInfo};
pub use scenario::{
    task_stream, MemoryTaskKind, Scenario, ScenarioSpec, ScheduledTask, TaskStream, TaskTarget,
};

/// Yaw of each of the eight move directions, counter-clockwise from +x.
pub const DIRS: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

pub fn dir_yaw(d: usize) -> f64 {
    normalize_yaw(45.0 * d as f64)
}

pub fn dir_towards(from: Cell, to: Cell) -> Option<usize> {
    let d = ((to.0 - from.0).signum(), (to.1 - from.1).signum());
    DIRS.iter().position(|&x| x == d)
}

pub fn yaw_towards(from: (f64, f64), to: (f64, f64)) -> f64 {
    normalize_yaw((to.1 - from.1).atan2(to.0 - from.0).to_degrees())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Move { dir: u8 },
    Turn { yaw: f64, pitch: f64 },
    Interact { task: TaskKind },
    Noop,
}

impl Action {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::Move { .. } => "move",
            Action::Turn { .. } => "turn",
            Action::Interact { .. } => "interact",
            Action::Noop => "noop",
        }
    }
}

/// What an entity looks like from some clock onward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Look {
    Shown(FeatureKind),
    Hidden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub timeline: Vec<(u64, Look)>,
}

impl EventScript {
    pub fn new(timeline: Vec<(u64, Look)>) -> Self {
        assert!(timeline.windows(2).all(|w| w[0].0 < w[1].0), "script timeline must be strictly increasing");
        EventScript { timeline }
    }

    pub fn look_at(&self, t: u64, default: Look) -> Look {
        self.timeline.iter().take_while(|(s, _)| *s <= t).last().map_or(default, |(_, l)| *l)
    }

    fn fires_at(&self, t: u64) -> bool {
        self.timeline.iter().any(|(s, _)| *s == t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub kind: FeatureKind,
    pub cell: Cell,
    pub alive: bool,
    pub script: Option<EventScript>,
}

impl Entity {
    pub fn look(&self, t: u64) -> Look {
        if !self.alive {
            return Look::Hidden;
        }
        let base = Look::Shown(self.kind);
        match &self.script {
            Some(s) => s.look_at(t, base),
            None => base,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Clock ticks per block of unit-cost movement.
    pub ticks_per_block: f64,
    pub fov_radius: f64,
    pub fov_half_angle: f64,
    pub interact_radius: f64,
    pub interact_steps: u32,
    pub window: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            ticks_per_block: 4.0,
            fov_radius: 8.0,
            fov_half_angle: 30.0,
            interact_radius: 3.0,
            interact_steps: 20,
            window: 16,
        }
    }
}

impl WorldConfig {
    pub fn fov(&self) -> Fov {
        Fov { radius: self.fov_radius, half_angle: self.fov_half_angle }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    counts: [u32; TaskKind::ALL.len()],
}

impl Default for Inventory {
    fn default() -> Self {
        Inventory { counts: [0; TaskKind::ALL.len()] }
    }
}

impl Inventory {
    fn slot(item: TaskKind) -> usize {
        TaskKind::ALL.iter().position(|&k| k == item).expect("item kind")
    }

    pub fn count(&self, item: TaskKind) -> u32 {
        self.counts[Self::slot(item)]
    }

    fn add(&mut self, item: TaskKind) {
        self.counts[Self::slot(item)] += 1;
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Harvest target: an entity or a terrain tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Entity(u32),
    Tile(Cell),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Pose relative to the episode's start cell.
    pub pose: Pose,
    pub time: u64,
    pub scene: Arc<SceneDescriptor>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub harvested: Option<TaskKind>,
    pub blocked: bool,
    pub script_fired: bool,
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub terrain: TerrainGrid,
    pub entities: Vec<Entity>,
    pub config: WorldConfig,
    pub info: LayoutInfo,
    pub seed: u64,
    clock: u64,
    pos: Cell,
    yaw: f64,
    pitch: f64,
    start: Cell,
    inventory: Inventory,
    busy: u32,
    progress: Option<(Target, u32)>,
    by_cell: Vec<Vec<u32>>,
    epoch: u64,
    scene_key: Option<(Cell, i64, u64)>,
    window: VecDeque<Arc<SceneDescriptor>>,
}

impl WorldState {
    pub fn new(
        terrain: TerrainGrid,
        entities: Vec<Entity>,
        start: Cell,
        yaw: f64,
        config: WorldConfig,
        info: LayoutInfo,
        seed: u64,
    ) -> Self {
        let mut by_cell = vec![Vec::new(); (terrain.width() * terrain.height()) as usize];
        for e in &entities {
            if terrain.in_bounds(e.cell) {
                by_cell[(e.cell.1 * terrain.width() + e.cell.0) as usize].push(e.id);
            }
        }
        let mut w = WorldState {
            terrain,
            entities,
            config,
            info,
            seed,
            clock: 0,
            pos: start,
            yaw: normalize_yaw(yaw),
            pitch: 0.0,
            start,
            inventory: Inventory::default(),
            busy: 0,
            progress: None,
            by_cell,
            epoch: 0,
            scene_key: None,
            window: VecDeque::new(),
        };
        w.refresh_scene();
        w
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn position(&self) -> Cell {
        self.pos
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    /// A multi-tick move is still in progress; actions are ignored until it ends.
    pub fn is_busy(&self) -> bool {
        self.busy > 0
    }

    pub fn to_relative(&self, c: (f64, f64)) -> (f64, f64) {
        (c.0 - self.start.0 as f64, c.1 - self.start.1 as f64)
    }

    pub fn to_absolute(&self, c: (f64, f64)) -> (f64, f64) {
        (c.0 + self.start.0 as f64, c.1 + self.start.1 as f64)
    }

    pub fn pose(&self) -> Pose {
        let (x, y) = self.to_relative((self.pos.0 as f64, self.pos.1 as f64));
        Pose::new(x, y, self.yaw).with_pitch(self.pitch)
    }

    pub fn observe(&self) -> Observation {
        Observation {
            pose: self.pose(),
            time: self.clock,
            scene: Arc::clone(self.window.back().expect("scene window is never empty")),
        }
    }

    /// Last descriptors, oldest first.
    pub fn scene_window(&self) -> Vec<SceneDescriptor> {
        self.window.iter().map(|d| (**d).clone()).collect()
    }

    pub fn entities_at(&self, c: Cell) -> impl Iterator<Item = &Entity> {
        let ids: &[u32] = if self.terrain.in_bounds(c) {
            &self.by_cell[(c.1 * self.terrain.width() + c.0) as usize]
        } else {
            &[]
        };
        ids.iter().map(move |&id| &self.entities[id as usize])
    }

    pub fn alive_count(&self, kind: FeatureKind) -> usize {
        self.entities.iter().filter(|e| e.kind == kind && e.alive).count()
    }

    /// Advances one clock tick.
    pub fn step(&mut self, action: Action) -> StepEvents {
        let mut ev = StepEvents::default();
        if self.busy > 0 {
            self.busy -= 1;
        } else {
            match action {
                Action::Move { dir } => {
                    self.progress = None;
                    let (dx, dy) = DIRS[dir as usize % 8];
                    let to = (self.pos.0 + dx, self.pos.1 + dy);
                    match self.terrain.move_cost(self.pos, to) {
                        Some(w) => {
                            self.pos = to;
                            self.yaw = dir_yaw(dir as usize);
                            let ticks = (w * self.config.ticks_per_block).ceil().max(1.0) as u32;
                            self.busy = ticks - 1;
                        }
                        None => ev.blocked = true,
                    }
                }
                Action::Turn { yaw, pitch } => {
                    self.progress = None;
                    self.yaw = normalize_yaw(yaw);
                    self.pitch = pitch;
                }
                Action::Interact { task } => ev.harvested = self.interact(task),
                Action::Noop => self.progress = None,
            }
        }
        if let Some(item) = ev.harvested {
            self.inventory.add(item);
        }
        self.clock += 1;
        ev.script_fired = self.entities.iter().any(|e| e.script.as_ref().is_some_and(|s| s.fires_at(self.clock)));
        if ev.script_fired {
            self.epoch += 1;
        }
        self.refresh_scene();
        ev
    }

    fn interact(&mut self, task: TaskKind) -> Option<TaskKind> {
        let Some(target) = self.reachable_target(task) else {
            self.progress = None;
            return None;
        };
        let n = match self.progress {
            Some((t, n)) if t == target => n + 1,
            _ => 1,
        };
        if n < self.config.interact_steps {
            self.progress = Some((target, n));
            return None;
        }
        self.progress = None;
        if let Target::Entity(id) = target {
            if task.consumes_source() {
                self.entities[id as usize].alive = false;
                self.epoch += 1;
            }
        }
        Some(task)
    }

    fn matches(&self, task: TaskKind, c: Cell) -> Option<Target> {
        match task {
            TaskKind::Water => (self.terrain.get(c) == Terrain::Water).then_some(Target::Tile(c)),
            TaskKind::Sand => (self.terrain.get(c) == Terrain::Sand).then_some(Target::Tile(c)),
            TaskKind::Seeds => (self.terrain.get(c) == Terrain::Grass).then_some(Target::Tile(c)),
            _ => {
                let want = task.query_feature();
                let t = self.clock;
                self.entities_at(c)
                    .find(|e| e.kind == want && e.look(t) == Look::Shown(want))
                    .map(|e| Target::Entity(e.id))
            }
        }
    }

    /// Nearest matching target within `radius` satisfying `keep`, ties by cell order.
    pub fn nearest_target<F>(&self, task: TaskKind, radius: f64, keep: F) -> Option<(Target, Cell)>
    where
        F: Fn(Cell) -> bool,
    {
        let r = radius.floor() as i32;
        let mut best: Option<(f64, Cell, Target)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let c = (self.pos.0 + dx, self.pos.1 + dy);
                let d = ((dx * dx + dy * dy) as f64).sqrt();
                if d > radius || !keep(c) {
                    continue;
                }
                if let Some(t) = self.matches(task, c) {
                    if best.is_none_or(|(bd, bc, _)| d < bd || (d == bd && c < bc)) {
                        best = Some((d, c, t));
                    }
                }
            }
        }
        best.map(|(_, c, t)| (t, c))
    }

    /// Target the agent could harvest right now: within interaction radius and
    /// in the facing half-plane.
    pub fn reachable_target(&self, task: TaskKind) -> Option<Target> {
        let (s, c) = self.yaw.to_radians().sin_cos();
        let p = self.pos;
        self.nearest_target(task, self.config.interact_radius, |q| {
            let (dx, dy) = ((q.0 - p.0) as f64, (q.1 - p.1) as f64);
            dx * c + dy * s >= 0.0
        })
        .map(|(t, _)| t)
    }

    /// Nearest target inside the view sector or the surrounding 3x3 block.
    pub fn visible_target(&self, task: TaskKind) -> Option<Cell> {
        let fov = self.config.fov();
        let p = self.pos;
        let cells = fov_cells(p, self.yaw, &fov);
        let mut best: Option<(f64, Cell)> = None;
        let near = (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (p.0 + dx, p.1 + dy)));
        for c in cells.into_iter().chain(near) {
            if self.matches(task, c).is_some() {
                let d = dist((c.0 as f64, c.1 as f64), (p.0 as f64, p.1 as f64));
                if best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
                    best = Some((d, c));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Symbolic view from the current pose.
    pub fn describe(&self) -> SceneDescriptor {
        let fov = self.config.fov();
        let p = self.pos;
        let mut cells = fov_cells(p, self.yaw, &fov);
        for dy in -1..=1 {
            for dx in -1..=1 {
                cells.push((p.0 + dx, p.1 + dy));
            }
        }
        cells.sort_unstable();
        cells.dedup();
        let mut terrain = [0u16; Terrain::COUNT];
        let mut visible = Vec::new();
        let mut nearest_tile: [Option<(i32, VisibleFeature)>; 3] = [None; 3];
        let t = self.clock;
        for c in cells {
            if !self.terrain.in_bounds(c) {
                continue;
            }
            let ter = self.terrain.get(c);
            terrain[ter.index()] += 1;
            let (dx, dy) = (c.0 - p.0, c.1 - p.1);
            let slot = match ter {
                Terrain::Water => Some((0, FeatureKind::Water)),
                Terrain::Sand => Some((1, FeatureKind::Sand)),
                Terrain::Grass => Some((2, FeatureKind::Grass)),
                _ => None,
            };
            if let Some((i, kind)) = slot {
                let d2 = dx * dx + dy * dy;
                let f = VisibleFeature { kind, dx, dy };
                if nearest_tile[i].is_none_or(|(bd, bf)| d2 < bd || (d2 == bd && f < bf)) {
                    nearest_tile[i] = Some((d2, f));
                }
            }
            for e in self.entities_at(c) {
                if let Look::Shown(kind) = e.look(t) {
                    visible.push(VisibleFeature { kind, dx, dy });
                }
            }
        }
        visible.extend(nearest_tile.iter().flatten().map(|(_, f)| *f));
        visible.sort_unstable();
        visible.dedup();
        SceneDescriptor { visible, terrain, yaw_bucket: (self.yaw / 45.0).round() as i16 }
    }

    fn refresh_scene(&mut self) {
        let key = (self.pos, (self.yaw * 1000.0).round() as i64, self.epoch);
        let desc = if self.scene_key == Some(key) {
            Arc::clone(self.window.back().expect("window"))
        } else {
            self.scene_key = Some(key);
            Arc::new(self.describe())
        };
        self.window.push_back(desc);
        while self.window.len() > self.config.window.max(1) {
            self.window.pop_front();
        }
    }

    /// Image goals succeed within the navigation radius of the goal position.
    pub fn within_goal(&self, goal_abs: (f64, f64)) -> bool {
        dist((self.pos.0 as f64, self.pos.1 as f64), goal_abs) <= SUCCESS_RADIUS
    }
}

/// Did the task succeed this step?
pub fn check_success(world: &WorldState, target: &TaskTarget, inventory_before: &Inventory) -> bool {
    match target {
        TaskTarget::Resource(kind) => world.inventory().count(*kind) > inventory_before.count(*kind),
        TaskTarget::ImageGoal { position, .. } => world.within_goal(*position),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> WorldState {
        let mut g = TerrainGrid::walled(20, 20);
        g.set((10, 14), Terrain::Water);
        let cow = Entity { id: 0, kind: FeatureKind::Cow, cell: (12, 10), alive: true, script: None };
        let zombie = Entity {
            id: 1,
            kind: FeatureKind::ZombieBurning,
            cell: (5, 5),
            alive: true,
            script: Some(EventScript::new(vec![(0, Look::Shown(FeatureKind::ZombieBurning)), (5, Look::Hidden)])),
        };
        WorldState::new(g, vec![cow, zombie], (10, 10), 0.0, WorldConfig::default(), LayoutInfo::default(), 1)
    }

    #[test]
    fn wall_blocks_and_costs_one_tick() {
        let mut w = tiny();
        for _ in 0..9 {
            w.step(Action::Move { dir: 4 });
            while w.is_busy() {
                w.step(Action::Noop);
            }
        }
        assert_eq!(w.position(), (1, 10));
        let t = w.clock();
        let ev = w.step(Action::Move { dir: 4 });
        assert!(ev.blocked);
        assert_eq!(w.position(), (1, 10));
        assert_eq!(w.clock(), t + 1);
    }

    #[test]
    fn terrain_cost_sets_move_duration() {
        let mut w = tiny();
        w.step(Action::Move { dir: 0 });
        let mut ticks = 1;
        while w.is_busy() {
            w.step(Action::Noop);
            ticks += 1;
        }
        assert_eq!(ticks, 4);
    }

    #[test]
    fn harvest_cow_consumes_it() {
        let mut w = tiny();
        assert!(w.describe().contains(FeatureKind::Cow));
        let before = w.inventory().clone();
        for i in 0..20 {
            let ev = w.step(Action::Interact { task: TaskKind::Beef });
            assert_eq!(ev.harvested.is_some(), i == 19);
        }
        assert!(check_success(&w, &TaskTarget::Resource(TaskKind::Beef), &before));
        assert!(!check_success(&w, &TaskTarget::Resource(TaskKind::Water), &before));
        assert_eq!(w.alive_count(FeatureKind::Cow), 0);
        assert!(!w.describe().contains(FeatureKind::Cow));
        for _ in 0..20 {
            assert!(w.step(Action::Interact { task: TaskKind::Beef }).harvested.is_none());
        }
    }

    #[test]
    fn facing_half_plane_required() {
        let mut w = tiny();
        w.step(Action::Turn { yaw: 180.0, pitch: 0.0 });
        assert!(w.reachable_target(TaskKind::Beef).is_none());
    }

    #[test]
    fn script_changes_descriptor() {
        let mut w = tiny();
        w.step(Action::Turn { yaw: -135.0, pitch: 0.0 });
        assert!(w.describe().contains(FeatureKind::ZombieBurning));
        while w.clock() < 5 {
            w.step(Action::Noop);
        }
        assert!(!w.describe().contains(FeatureKind::ZombieBurning));
    }
}
