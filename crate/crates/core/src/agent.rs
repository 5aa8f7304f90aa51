//! Memory-augmented control loop: mode selection, exploration, recall and skill execution.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{splitmix, Embedding, EncoderOracle, PromptRole, SceneStream};
use crate::error::Result;
use crate::exploration::{Fov, VisitationMap};
use crate::memory::{EpisodicMemory, ExperienceFrame, MemoryVariant, QueryCost};
use crate::navigation::{dist, plan_toward, within_success_radius, Cell, Plan, SUCCESS_RADIUS};
use crate::task::TaskKind;
use crate::world::scenario::{ExplorePolicy, ScenarioSpec};
use crate::world::{yaw_towards, Action, WorldState, DIRS};

/// Turns of one in-place look-around during skill search.
pub const SCAN_TURNS: u8 = 6;
/// Search-walk moves between look-arounds.
pub const RESCAN_EVERY: u32 = 40;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    None,
    Explore,
    Execute,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Explore => "explore",
            Mode::Execute => "execute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub mode: Mode,
    /// Steps spent in the current mode.
    pub mode_elapsed: u64,
    /// Navigation goal, relative to the start cell.
    pub goal: Option<(f64, f64)>,
    pub reached: bool,
    pub mode_timeout: u64,
}

impl AgentState {
    pub fn new(mode_timeout: u64) -> Self {
        AgentState { mode: Mode::None, mode_elapsed: 0, goal: None, reached: false, mode_timeout }
    }

    fn reset(&mut self) {
        self.mode = Mode::None;
        self.mode_elapsed = 0;
        self.goal = None;
        self.reached = false;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGoal {
    Resource(TaskKind),
    /// Reach the place a given frame was seen from.
    ImageGoal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub task_id: usize,
    /// Embedding used to query memory.
    pub query: Embedding,
    /// Embedding handed to the skill (the goal frame for image goals).
    pub execute: Embedding,
    pub goal: TaskGoal,
    pub time_limit: u64,
}

impl TaskSpec {
    pub fn resource(oracle: &EncoderOracle, task_id: usize, kind: TaskKind, time_limit: u64) -> Result<Self> {
        Ok(TaskSpec {
            task_id,
            query: oracle.encode_task(kind, PromptRole::Query)?,
            execute: oracle.encode_task(kind, PromptRole::Execute)?,
            goal: TaskGoal::Resource(kind),
            time_limit,
        })
    }

    pub fn image_goal(task_id: usize, frame: Embedding, time_limit: u64) -> Self {
        TaskSpec { task_id, query: frame.clone(), execute: frame, goal: TaskGoal::ImageGoal, time_limit }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub mode_timeout: u64,
    pub policy: ExplorePolicy,
    pub fov: Fov,
    pub map_side: usize,
    pub super_cell: usize,
    pub walk_turn_prob: f64,
}

impl AgentConfig {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        AgentConfig {
            mode_timeout: spec.agent.mode_timeout,
            policy: spec.explore.policy,
            fov: Fov { radius: spec.explore.fov_radius, half_angle: spec.explore.fov_half_angle },
            map_side: spec.explore_map_side(),
            super_cell: spec.super_cell(),
            walk_turn_prob: spec.agent.walk_turn_prob,
        }
    }
}

/// Query cost summed over every memory read of an episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadTally {
    pub reads: u64,
    pub clusters_scored: u64,
    pub frames_scored: u64,
}

impl ReadTally {
    fn add(&mut self, c: QueryCost) {
        self.reads += 1;
        self.clusters_scored += c.clusters_scored as u64;
        self.frames_scored += c.frames_scored as u64;
    }
}

#[derive(Clone, Debug, Default)]
struct Route {
    goal: Option<Cell>,
    cells: Vec<Cell>,
    next: usize,
}

#[derive(Clone, Copy, Debug)]
struct ExploreGoal {
    abs: (f64, f64),
    super_cell: Option<(usize, usize)>,
}

pub struct Agent {
    config: AgentConfig,
    memory: Option<EpisodicMemory>,
    stream: SceneStream,
    map: VisitationMap,
    state: AgentState,
    task: Option<TaskSpec>,
    target: Option<ExperienceFrame>,
    failed: Vec<(f64, f64)>,
    route: Route,
    explore_goal: Option<ExploreGoal>,
    heading: usize,
    lock: Option<Cell>,
    oriented: bool,
    /// Look-around turns left before the search walk resumes.
    scan: u8,
    walked: u32,
    rng: ChaCha8Rng,
    seed: u64,
    writes: u64,
    skill_calls: u64,
    tally: ReadTally,
}

impl Agent {
    /// `memory = None` gives the memoryless baseline.
    pub fn new(config: AgentConfig, memory: Option<EpisodicMemory>, oracle: Arc<EncoderOracle>, seed: u64) -> Self {
        let map = VisitationMap::new(config.map_side, config.super_cell, (0, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0xa9e7));
        let heading = rng.gen_range(0..8);
        Agent {
            state: AgentState::new(config.mode_timeout),
            config,
            memory,
            stream: SceneStream::new(oracle),
            map,
            task: None,
            target: None,
            failed: Vec::new(),
            route: Route::default(),
            explore_goal: None,
            heading,
            lock: None,
            oriented: false,
            scan: SCAN_TURNS,
            walked: 0,
            rng,
            seed,
            writes: 0,
            skill_calls: 0,
            tally: ReadTally::default(),
        }
    }

    pub fn from_spec(spec: &ScenarioSpec, oracle: Arc<EncoderOracle>, seed: u64) -> Result<Self> {
        let memory = match spec.memory.variant.variant() {
            Some(v) => {
                let mut cfg = spec.memory_config();
                cfg.cluster_seed = seed;
                Some(EpisodicMemory::new(v, cfg)?)
            }
            None => None,
        };
        Ok(Agent::new(AgentConfig::from_spec(spec), memory, oracle, seed))
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn memory(&self) -> Option<&EpisodicMemory> {
        self.memory.as_ref()
    }

    pub fn into_memory(self) -> Option<EpisodicMemory> {
        self.memory
    }

    pub fn variant(&self) -> Option<MemoryVariant> {
        self.memory.as_ref().map(|m| m.variant())
    }

    pub fn map(&self) -> &VisitationMap {
        &self.map
    }

    pub fn task(&self) -> Option<&TaskSpec> {
        self.task.as_ref()
    }

    /// Frame chosen by the last mode selection, while executing.
    pub fn target(&self) -> Option<&ExperienceFrame> {
        self.target.as_ref()
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn skill_calls(&self) -> u64 {
        self.skill_calls
    }

    pub fn read_tally(&self) -> ReadTally {
        self.tally
    }

    /// Starts a new task with fresh mode state.
    pub fn begin_task(&mut self, task: TaskSpec) {
        self.task = Some(task);
        self.failed.clear();
        self.reset_mode();
    }

    pub fn end_task(&mut self) {
        self.task = None;
        self.reset_mode();
    }

    fn reset_mode(&mut self) {
        self.state.reset();
        self.target = None;
        self.explore_goal = None;
        self.lock = None;
        self.oriented = false;
        self.scan = SCAN_TURNS;
        self.walked = 0;
    }

    /// Encodes the current view, writes it to memory and marks the visitation map.
    pub fn observe(&mut self, world: &WorldState) -> Result<ExperienceFrame> {
        let obs = world.observe();
        self.stream.push(&obs.scene)?;
        let nonce = splitmix(self.seed ^ obs.time.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let frame = ExperienceFrame::new(self.stream.encode(nonce)?, obs.pose, obs.time);
        if let Some(m) = self.memory.as_mut() {
            m.write(frame.clone())?;
        }
        self.writes += 1;
        self.map.mark(obs.pose.xy(), obs.pose.yaw, &self.config.fov);
        Ok(frame)
    }

    /// Chooses this step's action.
    pub fn act(&mut self, world: &WorldState) -> Result<Action> {
        if self.state.mode_elapsed >= self.state.mode_timeout {
            if self.state.mode == Mode::Execute {
                if let Some(t) = &self.target {
                    self.failed.push(t.pose.xy());
                }
            }
            self.reset_mode();
        }
        let action = self.decide(world)?;
        self.state.mode_elapsed += 1;
        Ok(action)
    }

    fn decide(&mut self, world: &WorldState) -> Result<Action> {
        let Some(task) = self.task.clone() else {
            self.state.mode = Mode::Explore;
            return Ok(if world.is_busy() { Action::Noop } else { self.explore_action(world) });
        };
        if self.memory.is_none() {
            self.state.mode = Mode::Explore;
            if world.is_busy() {
                return Ok(Action::Noop);
            }
            return Ok(match task.goal {
                TaskGoal::Resource(kind) => self.execute_skill(world, kind),
                TaskGoal::ImageGoal => self.walk(world),
            });
        }
        if self.state.mode == Mode::None {
            self.select_mode(&task)?;
        }
        if world.is_busy() {
            return Ok(Action::Noop);
        }
        match self.state.mode {
            Mode::Execute => self.execute_action(world, &task),
            _ => Ok(self.explore_action(world)),
        }
    }

    /// Reads memory; executes toward the best candidate not near an earlier failure, else explores.
    pub fn select_mode(&mut self, task: &TaskSpec) -> Result<Mode> {
        self.state.mode_elapsed = 0;
        let Some(memory) = self.memory.as_ref() else {
            self.state.mode = Mode::Explore;
            return Ok(Mode::Explore);
        };
        let candidates = memory.read_default(&task.query)?;
        self.tally.add(memory.query_cost());
        let failed = &self.failed;
        let pick = candidates
            .into_iter()
            .find(|c| !failed.iter().any(|&f| dist(f, c.frame.pose.xy()) <= SUCCESS_RADIUS));
        match pick {
            Some(c) => {
                self.state.mode = Mode::Execute;
                self.state.goal = Some(c.frame.pose.xy());
                self.target = Some(c.frame);
            }
            None => self.state.mode = Mode::Explore,
        }
        Ok(self.state.mode)
    }

    fn execute_action(&mut self, world: &WorldState, task: &TaskSpec) -> Result<Action> {
        let target = self.target.clone().expect("execute mode has a target");
        let goal = world.to_absolute(target.pose.xy());
        let pos = world.position();
        let here = (pos.0 as f64, pos.1 as f64);
        if !self.state.reached {
            let arrived = match task.goal {
                TaskGoal::ImageGoal => dist(here, goal) < 0.5,
                TaskGoal::Resource(_) => within_success_radius(here, goal),
            };
            if !arrived {
                if let Some(a) = self.move_toward(world, goal) {
                    return Ok(a);
                }
            }
            self.state.reached = true;
        }
        match task.goal {
            TaskGoal::ImageGoal => {
                // Wrong place: give up on this frame and choose again.
                self.failed.push(target.pose.xy());
                self.reset_mode();
                self.select_mode(task)?;
                if self.state.mode == Mode::Execute {
                    self.execute_action(world, task)
                } else {
                    Ok(self.explore_action(world))
                }
            }
            TaskGoal::Resource(kind) => {
                if !self.oriented {
                    self.oriented = true;
                    return Ok(Action::Turn { yaw: target.pose.yaw, pitch: target.pose.pitch });
                }
                Ok(self.execute_skill(world, kind))
            }
        }
    }

    /// Scripted skill: harvest if possible, else face, approach, or search nearby.
    pub fn execute_skill(&mut self, world: &WorldState, kind: TaskKind) -> Action {
        assert!(
            self.state.reached || self.memory.is_none(),
            "skill invoked before reaching the recalled location"
        );
        self.skill_calls += 1;
        if world.reachable_target(kind).is_some() {
            self.lock = None;
            return Action::Interact { task: kind };
        }
        let pos = world.position();
        let here = (pos.0 as f64, pos.1 as f64);
        if let Some((_, c)) = world.nearest_target(kind, world.config.interact_radius, |_| true) {
            return Action::Turn { yaw: yaw_towards(here, (c.0 as f64, c.1 as f64)), pitch: 0.0 };
        }
        if let Some(c) = world.visible_target(kind).or(self.lock) {
            self.lock = Some(c);
            if let Some(a) = self.move_toward(world, (c.0 as f64, c.1 as f64)) {
                return a;
            }
            self.lock = None;
        }
        if self.scan > 0 {
            self.scan -= 1;
            return Action::Turn { yaw: world.yaw() + 360.0 / f64::from(SCAN_TURNS), pitch: 0.0 };
        }
        self.walked += 1;
        if self.walked.is_multiple_of(RESCAN_EVERY) {
            self.scan = SCAN_TURNS;
        }
        self.walk(world)
    }

    fn explore_action(&mut self, world: &WorldState) -> Action {
        if self.config.policy == ExplorePolicy::MemorylessWalk {
            return self.walk(world);
        }
        let pos = world.position();
        let here = (pos.0 as f64, pos.1 as f64);
        for _ in 0..8 {
            let goal = match self.explore_goal {
                Some(g) => g,
                None => {
                    let g = self.next_explore_goal(world);
                    self.explore_goal = Some(g);
                    self.route = Route::default();
                    g
                }
            };
            self.state.goal = Some(world.to_relative(goal.abs));
            if within_success_radius(here, goal.abs) {
                self.explore_goal = None;
                continue;
            }
            // Unreachable goals are approached as far as possible, then excluded.
            match self.move_toward(world, goal.abs) {
                Some(a) => return a,
                None => {
                    if let Some((r, c)) = goal.super_cell {
                        self.map.block(r, c);
                    }
                    self.explore_goal = None;
                }
            }
        }
        self.walk(world)
    }

    fn next_explore_goal(&mut self, world: &WorldState) -> ExploreGoal {
        match self.config.policy {
            ExplorePolicy::RandomGoal => {
                let (x0, y0, w, h) = self.map.bounds();
                let rel = (self.rng.gen_range(x0..x0 + w) as f64, self.rng.gen_range(y0..y0 + h) as f64);
                ExploreGoal { abs: world.to_absolute(rel), super_cell: None }
            }
            _ => {
                let p = world.pose();
                let sel = self.map.select_goal(p.xy());
                ExploreGoal { abs: world.to_absolute(sel.goal), super_cell: Some(sel.super_cell) }
            }
        }
    }

    /// Next move along a shortest path toward `goal`; `None` once no move brings the agent closer.
    fn move_toward(&mut self, world: &WorldState, goal: (f64, f64)) -> Option<Action> {
        let pos = world.position();
        let gcell = (goal.0.round() as i32, goal.1.round() as i32);
        let fresh = self.route.goal == Some(gcell)
            && self.route.next > 0
            && self.route.cells.get(self.route.next - 1) == Some(&pos);
        if !fresh {
            let cells = match plan_toward(&world.terrain, pos, goal) {
                Ok(Plan::Path { cells, .. }) => cells,
                _ => vec![pos],
            };
            self.route = Route { goal: Some(gcell), cells, next: 1 };
        }
        let next = *self.route.cells.get(self.route.next)?;
        self.route.next += 1;
        let d = DIRS.iter().position(|&(dx, dy)| (pos.0 + dx, pos.1 + dy) == next)?;
        Some(Action::Move { dir: d as u8 })
    }

    /// Heading-persistent walk: drift by 45 degrees now and then; when blocked,
    /// take the free direction closest to the heading, which slides along walls.
    pub fn walk(&mut self, world: &WorldState) -> Action {
        if self.rng.gen_bool(self.config.walk_turn_prob.clamp(0.0, 1.0)) {
            self.heading = if self.rng.gen_bool(0.5) { (self.heading + 1) % 8 } else { (self.heading + 7) % 8 };
        }
        let pos = world.position();
        let sign = if self.rng.gen_bool(0.5) { 1 } else { 7 };
        for k in [0usize, 1, 2, 3, 4] {
            for s in [sign, 8 - sign] {
                let d = (self.heading + s * k) % 8;
                let (dx, dy) = DIRS[d];
                if world.terrain.move_cost(pos, (pos.0 + dx, pos.1 + dy)).is_some() {
                    self.heading = d;
                    return Action::Move { dir: d as u8 };
                }
            }
        }
        Action::Noop
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{OracleConfig, SceneDescriptor};
    use crate::memory::{MemoryConfig, Pose};
    use crate::navigation::{Terrain, TerrainGrid};
    use crate::world::{Entity, LayoutInfo, WorldConfig};
    use crate::embedding::FeatureKind;

    fn oracle() -> Arc<EncoderOracle> {
        Arc::new(EncoderOracle::new(OracleConfig { dim: 64, ..Default::default() }).unwrap())
    }

    fn config() -> AgentConfig {
        AgentConfig {
            mode_timeout: 600,
            policy: ExplorePolicy::CountBased,
            fov: Fov::default(),
            map_side: 60,
            super_cell: 15,
            walk_turn_prob: 0.05,
        }
    }

    fn memory() -> EpisodicMemory {
        EpisodicMemory::new(MemoryVariant::PlaceEvent, MemoryConfig { search_buffer: true, ..Default::default() })
            .unwrap()
    }

    fn field() -> WorldState {
        let mut g = TerrainGrid::walled(40, 40);
        g.set((30, 30), Terrain::Water);
        let cow = Entity { id: 0, kind: FeatureKind::Cow, cell: (8, 30), alive: true, script: None };
        WorldState::new(g, vec![cow], (20, 20), 0.0, WorldConfig::default(), LayoutInfo::default(), 3)
    }

    #[test]
    fn empty_memory_explores() {
        let o = oracle();
        let mut a = Agent::new(config(), Some(memory()), o.clone(), 1);
        let t = TaskSpec::resource(&o, 0, TaskKind::Water, 100).unwrap();
        assert_eq!(a.select_mode(&t).unwrap(), Mode::Explore);
    }

    #[test]
    fn recalled_water_frame_triggers_execute() {
        let o = oracle();
        let mut m = memory();
        let scene = SceneDescriptor {
            visible: vec![crate::embedding::VisibleFeature { kind: FeatureKind::Water, dx: 2, dy: 0 }],
            terrain: [10, 0, 0, 1, 0, 0],
            yaw_bucket: 0,
        };
        let e = o.encode_scene(&[scene], 7).unwrap();
        let task = TaskSpec::resource(&o, 0, TaskKind::Water, 100).unwrap();
        assert!(crate::embedding::alignment_score(&e, &task.query).unwrap() > 22.74);
        m.write(ExperienceFrame::new(e, Pose::new(9.0, 4.0, 0.0), 0)).unwrap();
        let mut a = Agent::new(config(), Some(m), o, 1);
        assert_eq!(a.select_mode(&task).unwrap(), Mode::Execute);
        assert_eq!(a.state().goal, Some((9.0, 4.0)));
    }

    #[test]
    fn one_write_per_step_and_mode_timeout() {
        let o = oracle();
        let mut w = field();
        let mut cfg = config();
        cfg.mode_timeout = 50;
        let mut a = Agent::new(cfg, Some(memory()), o.clone(), 2);
        a.begin_task(TaskSpec::resource(&o, 0, TaskKind::Milk, 10_000).unwrap());
        for _ in 0..400 {
            a.observe(&w).unwrap();
            let act = a.act(&w).unwrap();
            assert!(a.state().mode_elapsed <= 50);
            w.step(act);
        }
        assert_eq!(a.writes(), 400);
        assert_eq!(a.memory().unwrap().stats().writes, 400);
    }

    #[test]
    fn baseline_harvests_visible_cow() {
        let o = oracle();
        let mut w = field();
        let mut a = Agent::new(config(), None, o.clone(), 5);
        a.begin_task(TaskSpec::resource(&o, 0, TaskKind::Beef, 10_000).unwrap());
        let mut got = false;
        for _ in 0..20_000 {
            a.observe(&w).unwrap();
            let act = a.act(&w).unwrap();
            if w.step(act).harvested == Some(TaskKind::Beef) {
                got = true;
                break;
            }
        }
        assert!(got);
        assert_eq!(w.alive_count(FeatureKind::Cow), 0);
    }
}
