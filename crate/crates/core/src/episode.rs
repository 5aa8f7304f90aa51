//! Episode runner: scripted exploration tour, task loop, per-step log and results.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, ReadTally, TaskSpec};
use crate::embedding::{splitmix, Embedding, EncoderOracle};
use crate::error::{Error, Result};
use crate::exploration::coverage_and_revisits;
use crate::memory::{EpisodicMemory, ExperienceFrame, MemoryStats};
use crate::navigation::{dist, plan, Cell, Plan, Terrain, TerrainGrid};
use crate::task::TaskKind;
use crate::world::layout::TourLeg;
use crate::world::scenario::{exploration_phase, task_stream, PlannedTarget, Scenario, ScenarioSpec, TaskStream};
use crate::world::{build_world, check_success, Action, TaskTarget, WorldState, DIRS};

pub const LOG_SCHEMA: u32 = 1;
/// Latest offset after a landmark arrival whose frame can become an image goal.
pub const MAX_GOAL_OFFSET: u64 = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskResult {
    pub index: usize,
    pub target: TaskTarget,
    pub attempted: bool,
    pub success: bool,
    pub start: u64,
    pub duration: u64,
    /// Image goals: was the goal frame itself still stored when the task began.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_retained: Option<bool>,
}

impl TaskResult {
    pub fn label(&self) -> String {
        match self.target {
            TaskTarget::Resource(k) => k.name().to_string(),
            TaskTarget::ImageGoal { frame_time, .. } => format!("image@{frame_time}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeResult {
    pub scenario: String,
    pub seed: u64,
    pub variant: String,
    pub policy: String,
    pub clock: u64,
    pub tasks: Vec<TaskResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revisit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryStats>,
    pub reads: ReadTally,
}

impl EpisodeResult {
    pub fn solved(&self) -> usize {
        self.tasks.iter().filter(|t| t.success).count()
    }

    pub fn all_solved(&self) -> bool {
        !self.tasks.is_empty() && self.tasks.iter().all(|t| t.success)
    }
}

/// One line of the step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogRecord {
    Header { schema: u32, seed: u64, spec: ScenarioSpec },
    Step {
        t: u64,
        x: i32,
        y: i32,
        yaw: f64,
        mode: String,
        action: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<usize>,
        /// Navigation goal relative to the start cell.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        item: Option<TaskKind>,
        frames: usize,
        evictions: u64,
    },
    End { result: EpisodeResult, inventory: BTreeMap<String, u32> },
}

#[derive(Clone, Debug)]
pub struct GoalFrame {
    pub embedding: Embedding,
    /// Absolute position the frame was seen from.
    pub position: (f64, f64),
    pub time: u64,
}

/// Follows a fixed path; replans only when a new waypoint is set.
#[derive(Default)]
struct Walker {
    cells: Vec<Cell>,
    next: usize,
}

impl Walker {
    fn set(&mut self, grid: &TerrainGrid, from: Cell, to: Cell) -> bool {
        match plan(grid, from, to) {
            Ok(Plan::Path { cells, .. }) => {
                self.cells = cells;
                self.next = 1;
                true
            }
            _ => {
                self.cells.clear();
                false
            }
        }
    }

    fn done(&self) -> bool {
        self.next >= self.cells.len()
    }

    fn step(&mut self, pos: Cell) -> Action {
        let Some(&n) = self.cells.get(self.next) else { return Action::Noop };
        self.next += 1;
        match DIRS.iter().position(|&(dx, dy)| (pos.0 + dx, pos.1 + dy) == n) {
            Some(d) => Action::Move { dir: d as u8 },
            None => Action::Noop,
        }
    }
}

pub struct Episode {
    spec: ScenarioSpec,
    seed: u64,
    world: WorldState,
    agent: Agent,
    oracle: Arc<EncoderOracle>,
    tasks: TaskStream,
    rng: ChaCha8Rng,
    log: Option<Box<dyn Write + Send>>,
    arrivals: Vec<Option<u64>>,
    goal_frames: BTreeMap<(usize, u64), GoalFrame>,
    trajectory: Vec<Cell>,
    results: Vec<TaskResult>,
    clock_limit: u64,
    current_task: Option<usize>,
    explored: bool,
}

impl Episode {
    pub fn new(spec: &ScenarioSpec, seed: u64) -> Result<Self> {
        let oracle = Arc::new(EncoderOracle::new(spec.oracle.clone())?);
        Self::with_oracle(spec, seed, oracle)
    }

    pub fn with_oracle(spec: &ScenarioSpec, seed: u64, oracle: Arc<EncoderOracle>) -> Result<Self> {
        let world = build_world(spec, seed)?;
        let agent = Agent::from_spec(spec, Arc::clone(&oracle), seed)?;
        let clock_limit = match spec.scenario {
            Scenario::MemoryTask { .. } => spec.budget() + spec.world.recall_time_limit,
            _ => spec.budget(),
        };
        let landmarks = world.info.landmarks.len();
        Ok(Episode {
            spec: spec.clone(),
            seed,
            world,
            agent,
            oracle,
            tasks: task_stream(spec, seed)?,
            rng: ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x70_u64)),
            log: None,
            arrivals: vec![None; landmarks],
            goal_frames: BTreeMap::new(),
            trajectory: Vec::new(),
            results: Vec::new(),
            clock_limit,
            current_task: None,
            explored: false,
        })
    }

    /// Streams the step log to `out`, starting with a header line.
    pub fn with_log(mut self, out: Box<dyn Write + Send>) -> Result<Self> {
        self.log = Some(out);
        self.emit(&LogRecord::Header { schema: LOG_SCHEMA, seed: self.seed, spec: self.spec.clone() })?;
        Ok(self)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn memory(&self) -> Option<&EpisodicMemory> {
        self.agent.memory()
    }

    pub fn into_memory(self) -> Option<EpisodicMemory> {
        self.agent.into_memory()
    }

    /// Clock at which the landmark's stay began, once the tour got there.
    pub fn arrival(&self, landmark: usize) -> Option<u64> {
        self.arrivals.get(landmark).copied().flatten()
    }

    /// Frame seen `offset` steps after arriving at a landmark.
    pub fn goal_frame(&self, landmark: usize, offset: u64) -> Option<&GoalFrame> {
        self.goal_frames.get(&(landmark, offset))
    }

    pub fn results(&self) -> &[TaskResult] {
        &self.results
    }

    fn emit(&mut self, rec: &LogRecord) -> Result<()> {
        if let Some(out) = self.log.as_mut() {
            serde_json::to_writer(&mut *out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// One environment step: write, act, advance. Returns the frame written.
    fn tick(&mut self, action: Option<Action>) -> Result<ExperienceFrame> {
        let frame = self.agent.observe(&self.world)?;
        let action = match action {
            Some(a) => a,
            None => self.agent.act(&self.world)?,
        };
        let ev = self.world.step(action);
        let pos = self.world.position();
        self.trajectory.push(pos);
        if self.log.is_some() {
            let (frames, evictions) = self.memory().map_or((0, 0), |m| (m.len(), m.evictions()));
            let rec = LogRecord::Step {
                t: self.world.clock(),
                x: pos.0,
                y: pos.1,
                yaw: self.world.yaw(),
                mode: self.agent.state().mode.name().to_string(),
                action: action.kind_name().to_string(),
                task: self.current_task,
                goal: self.agent.state().goal,
                item: ev.harvested,
                frames,
                evictions,
            };
            self.emit(&rec)?;
        }
        Ok(frame)
    }

    /// Runs the scripted tour (memory tasks, long navigation) or free exploration
    /// (exploration-only scenarios). Idempotent.
    pub fn run_exploration(&mut self) -> Result<()> {
        if self.explored {
            return Ok(());
        }
        self.explored = true;
        let phase = exploration_phase(&self.spec);
        match self.spec.scenario {
            Scenario::ExplorationOnly => {
                while self.world.clock() < self.clock_limit {
                    self.tick(None)?;
                }
            }
            _ if phase > 0 => self.run_tour(phase)?,
            _ => {}
        }
        Ok(())
    }

    fn run_tour(&mut self, phase: u64) -> Result<()> {
        let tour = self.world.info.tour.clone();
        let mut walker = Walker::default();
        for leg in tour {
            match leg {
                TourLeg::Go { cell } => {
                    if !walker.set(&self.world.terrain, self.world.position(), cell) {
                        continue;
                    }
                    while !walker.done() && self.world.clock() < phase {
                        self.tour_move(&mut walker)?;
                    }
                }
                TourLeg::Stay { until, yaw, landmark } => {
                    if let Some(l) = landmark {
                        self.arrivals[l] = Some(self.world.clock());
                    }
                    let mut turned = false;
                    while self.world.clock() < until.min(phase) {
                        let a = if turned || self.world.is_busy() {
                            Action::Noop
                        } else {
                            turned = true;
                            Action::Turn { yaw, pitch: 0.0 }
                        };
                        let frame = self.tick(Some(a))?;
                        self.capture(landmark, frame);
                    }
                }
                TourLeg::Wander { until, avoid, avoid_radius } => self.wander(until.min(phase), &avoid, avoid_radius)?,
            }
        }
        while self.world.clock() < phase {
            self.tick(Some(Action::Noop))?;
        }
        Ok(())
    }

    fn tour_move(&mut self, walker: &mut Walker) -> Result<()> {
        let a = if self.world.is_busy() { Action::Noop } else { walker.step(self.world.position()) };
        self.tick(Some(a))?;
        Ok(())
    }

    /// Keeps the frames a recall task may later ask for.
    fn capture(&mut self, landmark: Option<usize>, frame: ExperienceFrame) {
        let Some(l) = landmark else { return };
        let Some(arrived) = self.arrivals[l] else { return };
        let offset = frame.time - arrived;
        if offset <= MAX_GOAL_OFFSET {
            let position = self.world.to_absolute(frame.pose.xy());
            self.goal_frames.insert((l, offset), GoalFrame { embedding: frame.embedding, position, time: frame.time });
        }
    }

    fn wander(&mut self, until: u64, avoid: &[Cell], radius: f64) -> Result<()> {
        let inside = |c: Cell| avoid.iter().any(|&a| dist((c.0 as f64, c.1 as f64), (a.0 as f64, a.1 as f64)) < radius);
        let mut masked = self.world.terrain.clone();
        for y in 0..masked.height() {
            for x in 0..masked.width() {
                if inside((x, y)) {
                    masked.set((x, y), Terrain::Wall);
                }
            }
        }
        let mut walker = Walker::default();
        let pos = self.world.position();
        if inside(pos) {
            let exit = self.exit_point(pos, avoid, radius, &masked);
            if walker.set(&self.world.terrain, pos, exit) {
                while !walker.done() && self.world.clock() < until {
                    self.tour_move(&mut walker)?;
                }
            }
        }
        let side = masked.width();
        while self.world.clock() < until {
            if walker.done() {
                let here = self.world.position();
                let mut placed = false;
                for _ in 0..64 {
                    let c = (self.rng.gen_range(1..side - 1), self.rng.gen_range(1..masked.height() - 1));
                    if masked.traversable(c) && masked.traversable(here) && walker.set(&masked, here, c) {
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    self.tick(Some(Action::Noop))?;
                    continue;
                }
            }
            self.tour_move(&mut walker)?;
        }
        Ok(())
    }

    /// Nearest free cell outside every avoided disc, away from the one we are in.
    fn exit_point(&self, pos: Cell, avoid: &[Cell], radius: f64, masked: &TerrainGrid) -> Cell {
        let mut best: Option<(f64, Cell)> = None;
        let r = (radius.ceil() as i32) * 2 + 2;
        for dy in -r..=r {
            for dx in -r..=r {
                let c = (pos.0 + dx, pos.1 + dy);
                if !masked.traversable(c) {
                    continue;
                }
                let d = ((dx * dx + dy * dy) as f64).sqrt();
                let away = avoid.iter().all(|&a| {
                    let (ax, ay) = ((pos.0 - a.0) as f64, (pos.1 - a.1) as f64);
                    dx as f64 * ax + dy as f64 * ay >= 0.0
                });
                if away && best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
                    best = Some((d, c));
                }
            }
        }
        best.map_or(pos, |(_, c)| c)
    }

    fn resolve(&self, planned: PlannedTarget, index: usize, limit: u64) -> Result<(TaskSpec, TaskTarget)> {
        match planned {
            PlannedTarget::Resource { kind } => {
                Ok((TaskSpec::resource(&self.oracle, index, kind, limit)?, TaskTarget::Resource(kind)))
            }
            PlannedTarget::Recall { landmark, offset } => {
                let g = self.goal_frame(landmark, offset).ok_or_else(|| Error::InvalidParameter {
                    name: "recall",
                    reason: format!("no frame recorded {offset} steps after landmark {landmark}"),
                })?;
                Ok((
                    TaskSpec::image_goal(index, g.embedding.clone(), limit),
                    TaskTarget::ImageGoal { position: g.position, frame_time: g.time },
                ))
            }
        }
    }

    /// Runs tasks until the stream or the clock runs out.
    pub fn run_tasks(&mut self) -> Result<()> {
        self.run_exploration()?;
        while let Some(task) = self.tasks.next() {
            if self.world.clock() >= self.clock_limit {
                if self.spec.scenario.is_long() {
                    break;
                }
                let (_, target) = self.resolve(task.target, task.index, task.time_limit)?;
                self.results.push(TaskResult {
                    index: task.index,
                    target,
                    attempted: false,
                    success: false,
                    start: self.world.clock(),
                    duration: 0,
                    goal_retained: None,
                });
                continue;
            }
            let (spec, target) = self.resolve(task.target, task.index, task.time_limit)?;
            let goal_retained = match target {
                TaskTarget::ImageGoal { frame_time, .. } => Some(self.memory().is_some_and(|m| m.contains_time(frame_time))),
                _ => None,
            };
            let before = self.world.inventory().clone();
            let start = self.world.clock();
            self.current_task = Some(task.index);
            self.agent.begin_task(spec);
            let mut success = false;
            loop {
                if check_success(&self.world, &target, &before) {
                    success = true;
                    break;
                }
                let elapsed = self.world.clock() - start;
                if elapsed >= task.time_limit || self.world.clock() >= self.clock_limit {
                    break;
                }
                self.tick(None)?;
            }
            self.agent.end_task();
            self.current_task = None;
            self.results.push(TaskResult {
                index: task.index,
                target,
                attempted: true,
                success,
                start,
                duration: self.world.clock() - start,
                goal_retained,
            });
        }
        Ok(())
    }

    /// Runs everything and closes the log with an end record.
    pub fn finish(mut self) -> Result<(EpisodeResult, Option<EpisodicMemory>)> {
        self.run_tasks()?;
        let (coverage, revisit) = if self.spec.scenario == Scenario::ExplorationOnly {
            let side = self.world.terrain.width();
            let (c, r) = coverage_and_revisits(
                &self.trajectory,
                (0, 0, side, self.world.terrain.height()),
                self.spec.explore.eval_grid,
                self.spec.explore.revisit_min_occupancy,
            );
            (Some(c), Some(r))
        } else {
            (None, None)
        };
        let result = EpisodeResult {
            scenario: self.spec.scenario.id(),
            seed: self.seed,
            variant: self.spec.memory.variant.name().to_string(),
            policy: self.spec.explore.policy.name().to_string(),
            clock: self.world.clock(),
            tasks: self.results.clone(),
            coverage,
            revisit,
            memory: self.memory().map(|m| m.stats()),
            reads: self.agent.read_tally(),
        };
        if self.log.is_some() {
            let inventory =
                TaskKind::ALL.iter().map(|&k| (k.name().to_string(), self.world.inventory().count(k))).collect();
            self.emit(&LogRecord::End { result: result.clone(), inventory })?;
            if let Some(out) = self.log.as_mut() {
                out.flush()?;
            }
        }
        Ok((result, self.agent.into_memory()))
    }

    pub fn trajectory(&self) -> &[Cell] {
        &self.trajectory
    }
}

pub fn run_episode(spec: &ScenarioSpec, seed: u64) -> Result<EpisodeResult> {
    Ok(Episode::new(spec, seed)?.finish()?.0)
}

/// Re-runs the episode described by a log's header and compares every line.
/// Returns the number of lines checked.
pub fn replay<R: BufRead>(log: R) -> Result<usize> {
    let mut lines = log.lines();
    let first = lines.next().ok_or(Error::Malformed { line: 1, message: "empty log".into() })??;
    let header: LogRecord =
        serde_json::from_str(&first).map_err(|e| Error::Malformed { line: 1, message: e.to_string() })?;
    let LogRecord::Header { schema, seed, spec } = header else {
        return Err(Error::Malformed { line: 1, message: "first line is not a header".into() });
    };
    if schema != LOG_SCHEMA {
        return Err(Error::Malformed { line: 1, message: format!("unsupported schema {schema}") });
    }
    let buf = SharedBuf::default();
    let ep = Episode::new(&spec, seed)?.with_log(Box::new(buf.clone()))?;
    ep.finish()?;
    let fresh = buf.take();
    let mut expected = fresh.split(|&b| b == b'\n').filter(|l| !l.is_empty());
    let mut n = 1;
    expected.next();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let no = i + 2;
        match expected.next() {
            Some(e) if e == line.as_bytes() => n = no,
            Some(e) => {
                return Err(Error::Divergence {
                    line: no,
                    detail: format!("expected {}, found {}", String::from_utf8_lossy(e), line),
                })
            }
            None => return Err(Error::Divergence { line: no, detail: "log continues past the end of the episode".into() }),
        }
    }
    if expected.next().is_some() {
        return Err(Error::Divergence { line: n + 1, detail: "log ends before the episode does".into() });
    }
    Ok(n)
}

/// In-memory writer that can be shared with an episode.
#[derive(Clone, Default)]
pub struct SharedBuf(Arc<std::sync::Mutex<Vec<u8>>>);

impl SharedBuf {
    pub fn take(&self) -> Vec<u8> {
        std::mem::take(&mut *self.0.lock().expect("buffer lock"))
    }
}

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("buffer lock").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}
