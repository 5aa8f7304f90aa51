//! Scenario configuration and task schedules.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{LANDMARK_WINDOW, LONG_NAV_EXPLORATION};
use super::WorldConfig;
use crate::embedding::OracleConfig;
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, MemoryVariant};
use crate::task::TaskKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryTaskKind {
    Water,
    DeathSpot,
    TwinHouses,
}

impl MemoryTaskKind {
    pub const ALL: [MemoryTaskKind; 3] = [MemoryTaskKind::Water, MemoryTaskKind::DeathSpot, MemoryTaskKind::TwinHouses];

    pub fn name(self) -> &'static str {
        match self {
            MemoryTaskKind::Water => "water",
            MemoryTaskKind::DeathSpot => "death_spot",
            MemoryTaskKind::TwinHouses => "twin_houses",
        }
    }

    /// Offset after arrival at the first landmark of the frame used as the goal image.
    pub fn goal_offset(self) -> u64 {
        match self {
            MemoryTaskKind::Water => 250,
            MemoryTaskKind::DeathSpot => 100,
            MemoryTaskKind::TwinHouses => 50,
        }
    }

    /// The variant expected to lose the goal.
    pub fn failing_variant(self) -> MemoryVariant {
        match self {
            MemoryTaskKind::Water => MemoryVariant::Fifo,
            MemoryTaskKind::DeathSpot => MemoryVariant::Place,
            MemoryTaskKind::TwinHouses => MemoryVariant::Event,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    AbaSparse {
        #[serde(default)]
        a: Option<TaskKind>,
        #[serde(default)]
        b: Option<TaskKind>,
    },
    MemoryTask {
        task: MemoryTaskKind,
    },
    LongInstruction,
    LongNavigation,
    ExplorationOnly,
    RandomPlains,
}

impl Scenario {
    pub fn id(&self) -> String {
        match self {
            Scenario::AbaSparse { a: Some(a), b: Some(b) } => format!("aba_sparse_{a}_{b}"),
            Scenario::AbaSparse { .. } => "aba_sparse".into(),
            Scenario::MemoryTask { task } => format!("memory_task_{}", task.name()),
            Scenario::LongInstruction => "long_instruction".into(),
            Scenario::LongNavigation => "long_navigation".into(),
            Scenario::ExplorationOnly => "exploration_only".into(),
            Scenario::RandomPlains => "random_plains".into(),
        }
    }

    pub fn is_long(&self) -> bool {
        matches!(self, Scenario::LongInstruction | Scenario::LongNavigation)
    }
}

/// Memory choice for the agent; `none` is the memoryless baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryChoice {
    None,
    Fifo,
    Place,
    Event,
    #[default]
    PlaceEvent,
}

impl MemoryChoice {
    pub const ALL: [MemoryChoice; 5] =
        [MemoryChoice::None, MemoryChoice::Fifo, MemoryChoice::Place, MemoryChoice::Event, MemoryChoice::PlaceEvent];

    pub fn variant(self) -> Option<MemoryVariant> {
        match self {
            MemoryChoice::None => None,
            MemoryChoice::Fifo => Some(MemoryVariant::Fifo),
            MemoryChoice::Place => Some(MemoryVariant::Place),
            MemoryChoice::Event => Some(MemoryVariant::Event),
            MemoryChoice::PlaceEvent => Some(MemoryVariant::PlaceEvent),
        }
    }

    pub fn from_variant(v: Option<MemoryVariant>) -> Self {
        match v {
            None => MemoryChoice::None,
            Some(MemoryVariant::Fifo) => MemoryChoice::Fifo,
            Some(MemoryVariant::Place) => MemoryChoice::Place,
            Some(MemoryVariant::Event) => MemoryChoice::Event,
            Some(MemoryVariant::PlaceEvent) => MemoryChoice::PlaceEvent,
        }
    }

    pub fn name(self) -> &'static str {
        match self.variant() {
            None => "none",
            Some(v) => v.name(),
        }
    }

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            return Ok(MemoryChoice::None);
        }
        s.parse::<MemoryVariant>().map(|v| Self::from_variant(Some(v)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    pub variant: MemoryChoice,
    /// Defaults per scenario: 2K for memory tasks, 20K for long runs, unbounded otherwise.
    pub capacity: Option<usize>,
    #[serde(rename = "C")]
    pub place_size: f64,
    #[serde(rename = "W")]
    pub yaw_window: f64,
    #[serde(rename = "R")]
    pub update_frequency: usize,
    #[serde(rename = "K")]
    pub top_k: usize,
    #[serde(rename = "c")]
    pub merge_score: f64,
    #[serde(rename = "h")]
    pub task_threshold: f64,
    /// Defaults to on for agent scenarios and off for memory tasks.
    pub search_buffer: Option<bool>,
    pub init_clusters: usize,
}

impl Default for MemorySection {
    fn default() -> Self {
        let d = MemoryConfig::default();
        MemorySection {
            variant: MemoryChoice::PlaceEvent,
            capacity: None,
            place_size: d.place_size,
            yaw_window: d.yaw_window,
            update_frequency: d.update_frequency,
            top_k: d.top_k,
            merge_score: d.merge_score,
            task_threshold: d.task_threshold,
            search_buffer: None,
            init_clusters: d.init_clusters,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorePolicy {
    #[default]
    CountBased,
    RandomGoal,
    MemorylessWalk,
}

impl ExplorePolicy {
    pub const ALL: [ExplorePolicy; 3] =
        [ExplorePolicy::CountBased, ExplorePolicy::RandomGoal, ExplorePolicy::MemorylessWalk];

    pub fn name(self) -> &'static str {
        match self {
            ExplorePolicy::CountBased => "count_based",
            ExplorePolicy::RandomGoal => "random_goal",
            ExplorePolicy::MemorylessWalk => "memoryless_walk",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSection {
    /// Visitation map side; 120 for 100-block worlds and 240 for 200-block worlds by default.
    pub map_side: Option<usize>,
    pub super_cell: Option<usize>,
    pub fov_radius: f64,
    pub fov_half_angle: f64,
    pub policy: ExplorePolicy,
    /// Eval grid side for coverage and the occupancy cutoff for revisits.
    pub eval_grid: usize,
    pub revisit_min_occupancy: u64,
}

impl Default for ExploreSection {
    fn default() -> Self {
        ExploreSection {
            map_side: None,
            super_cell: None,
            fov_radius: 8.0,
            fov_half_angle: 30.0,
            policy: ExplorePolicy::CountBased,
            eval_grid: 11,
            revisit_min_occupancy: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub mode_timeout: u64,
    pub interact_radius: f64,
    pub interact_steps: u32,
    /// Chance per move that the search walk picks a new heading.
    pub walk_turn_prob: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection { mode_timeout: 600, interact_radius: 3.0, interact_steps: 20, walk_turn_prob: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub ticks_per_block: f64,
    /// Clock limit of each image-goal task in memory-task scenarios.
    pub recall_time_limit: u64,
    /// Per-task cap in long-horizon streams.
    pub long_task_cap: u64,
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection { ticks_per_block: 4.0, recall_time_limit: 3000, long_task_cap: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    #[serde(default)]
    pub map_side: Option<i32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub memory: MemorySection,
    #[serde(default)]
    pub explore: ExploreSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub world: WorldSection,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioSpec {
            scenario,
            map_side: None,
            seed: 0,
            budget: None,
            memory: MemorySection::default(),
            explore: ExploreSection::default(),
            agent: AgentSection::default(),
            oracle: OracleConfig::default(),
            world: WorldSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let de = toml::Deserializer::new(s);
        let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().message().trim().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |path: &str, message: &str| Err(Error::Config { path: path.into(), message: message.into() });
        let side = self.map_side();
        if !(20..=1000).contains(&side) {
            return cfg("map_side", "must lie in [20, 1000]");
        }
        if self.budget() == 0 {
            return cfg("budget", "must be >= 1");
        }
        if let Scenario::AbaSparse { a, b } = &self.scenario {
            if a.is_some_and(|a| !TaskKind::SPARSE.contains(&a)) {
                return cfg("scenario.a", "must be one of water, beef, wool, milk");
            }
            if b.is_some_and(|b| !TaskKind::DENSE.contains(&b)) {
                return cfg("scenario.b", "must be one of log, dirt, leaves, seeds, sand");
            }
        }
        if self.super_cell() == 0 || self.explore_map_side() == 0 {
            return cfg("explore.super_cell", "must be >= 1");
        }
        if self.agent.mode_timeout == 0 || self.agent.interact_steps == 0 {
            return cfg("agent", "mode_timeout and interact_steps must be >= 1");
        }
        if !(self.world.ticks_per_block >= 1.0) {
            return cfg("world.ticks_per_block", "must be >= 1");
        }
        self.memory_config().validate().map_err(|e| Error::Config { path: "memory".into(), message: e.to_string() })
    }

    pub fn map_side(&self) -> i32 {
        self.map_side.unwrap_or(if self.scenario.is_long() { 200 } else { 100 })
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(match self.scenario {
            Scenario::AbaSparse { .. } => 12_000,
            Scenario::RandomPlains => 16_000,
            Scenario::MemoryTask { .. } => 3_000,
            Scenario::LongInstruction | Scenario::LongNavigation => 500_000,
            Scenario::ExplorationOnly => 6_000,
        })
    }

    pub fn explore_map_side(&self) -> usize {
        self.explore.map_side.unwrap_or(if self.map_side() > 150 { 240 } else { 120 })
    }

    pub fn super_cell(&self) -> usize {
        self.explore.super_cell.unwrap_or(if self.map_side() > 150 { 30 } else { 15 })
    }

    pub fn memory_config(&self) -> MemoryConfig {
        let m = &self.memory;
        let capacity = m.capacity.unwrap_or(match self.scenario {
            Scenario::MemoryTask { .. } => 2_000,
            Scenario::LongInstruction | Scenario::LongNavigation => 20_000,
            _ => 1_000_000,
        });
        let search_buffer = m.search_buffer.unwrap_or(!matches!(self.scenario, Scenario::MemoryTask { .. }));
        MemoryConfig {
            capacity,
            place_size: m.place_size,
            yaw_window: m.yaw_window,
            update_frequency: m.update_frequency,
            top_k: m.top_k,
            merge_score: m.merge_score,
            task_threshold: m.task_threshold,
            search_buffer,
            init_clusters: m.init_clusters,
            cluster_seed: self.seed,
        }
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            ticks_per_block: self.world.ticks_per_block,
            fov_radius: self.explore.fov_radius,
            fov_half_angle: self.explore.fov_half_angle,
            interact_radius: self.agent.interact_radius,
            interact_steps: self.agent.interact_steps,
            window: self.oracle.window,
        }
    }

    /// Resolves the A-B pair, which must be fully specified to build a world.
    pub fn aba_pair(&self, a: Option<TaskKind>, b: Option<TaskKind>) -> Result<(TaskKind, TaskKind)> {
        match (a, b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Config {
                path: "scenario".into(),
                message: "a and b must both be set to build a single A-B-A episode".into(),
            }),
        }
    }

    /// Expands an A-B-A spec without a fixed pair into all 20 pairs.
    pub fn expand_pairs(&self) -> Vec<ScenarioSpec> {
        match &self.scenario {
            Scenario::AbaSparse { a, b } => {
                let mut out = Vec::new();
                for ak in TaskKind::SPARSE {
                    for bk in TaskKind::DENSE {
                        if a.is_none_or(|x| x == ak) && b.is_none_or(|x| x == bk) {
                            let mut s = self.clone();
                            s.scenario = Scenario::AbaSparse { a: Some(ak), b: Some(bk) };
                            out.push(s);
                        }
                    }
                }
                out
            }
            _ => vec![self.clone()],
        }
    }
}

/// Goal of a scheduled task before runtime resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlannedTarget {
    Resource { kind: TaskKind },
    /// The frame seen `offset` steps after arriving at a landmark.
    Recall { landmark: usize, offset: u64 },
}

/// Resolved success condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskTarget {
    Resource(TaskKind),
    ImageGoal { position: (f64, f64), frame_time: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub index: usize,
    pub target: PlannedTarget,
    /// Steps allowed for this task (further capped by the remaining budget).
    pub time_limit: u64,
}

/// Deterministic, possibly unbounded sequence of tasks.
#[derive(Clone, Debug)]
pub struct TaskStream {
    fixed: Vec<PlannedTarget>,
    draw: Draw,
    rng: ChaCha8Rng,
    limit: u64,
    next: usize,
}

#[derive(Clone, Debug)]
enum Draw {
    None,
    Kinds(Vec<TaskKind>),
    Landmarks(usize),
}

impl Iterator for TaskStream {
    type Item = ScheduledTask;

    fn next(&mut self) -> Option<ScheduledTask> {
        let index = self.next;
        let target = if index < self.fixed.len() {
            self.fixed[index]
        } else {
            match &self.draw {
                Draw::None => return None,
                Draw::Kinds(k) => PlannedTarget::Resource { kind: k[self.rng.gen_range(0..k.len())] },
                Draw::Landmarks(n) => PlannedTarget::Recall {
                    landmark: self.rng.gen_range(0..*n),
                    offset: self.rng.gen_range(20..=300),
                },
            }
        };
        self.next += 1;
        Some(ScheduledTask { index, target, time_limit: self.limit })
    }
}

/// Number of steps of scripted exploration before tasks begin.
pub fn exploration_phase(spec: &ScenarioSpec) -> u64 {
    match spec.scenario {
        Scenario::MemoryTask { .. } => spec.budget(),
        Scenario::LongNavigation => LONG_NAV_EXPLORATION,
        _ => 0,
    }
}

pub fn task_stream(spec: &ScenarioSpec, seed: u64) -> Result<TaskStream> {
    spec.validate()?;
    let res = |kind| PlannedTarget::Resource { kind };
    let mut s = TaskStream {
        fixed: Vec::new(),
        draw: Draw::None,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x7a5c_0000),
        limit: spec.budget(),
        next: 0,
    };
    match &spec.scenario {
        Scenario::AbaSparse { a, b } => {
            let (a, b) = spec.aba_pair(*a, *b)?;
            s.fixed = vec![res(a), res(b), res(a)];
        }
        Scenario::RandomPlains => {
            s.fixed = [TaskKind::Log, TaskKind::Water, TaskKind::Wool, TaskKind::Beef].map(res).to_vec();
        }
        Scenario::MemoryTask { task } => {
            s.fixed = vec![PlannedTarget::Recall { landmark: 0, offset: task.goal_offset() }];
            s.limit = spec.world.recall_time_limit;
        }
        Scenario::LongInstruction => {
            s.draw = Draw::Kinds(TaskKind::LONG.to_vec());
            s.limit = spec.world.long_task_cap;
        }
        Scenario::LongNavigation => {
            s.draw = Draw::Landmarks(6);
            s.limit = spec.world.long_task_cap;
        }
        Scenario::ExplorationOnly => {}
    }
    Ok(s)
}

/// Landmark visiting window used by the long-navigation tour.
pub fn landmark_window() -> u64 {
    LANDMARK_WINDOW
}
