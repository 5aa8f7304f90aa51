//! Episodic memory variants with shared write / read / evict semantics.
//!
//! Storage is organised into *units*, the level at which eviction removes the
//! oldest frame of the largest unit: the single global queue (FIFO), place
//! clusters (Place), or event clusters (Event, PlaceEvent). Recency buffers
//! that have not been clustered yet are units too.

mod snapshot;

pub use snapshot::{MemorySnapshot, SNAPSHOT_VERSION};

use std::cell::Cell;
use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{dp_means_with, merge_clusters, penalty_for_merge_score, DpMeansParams};
use crate::embedding::{score, splitmix, Embedding};
use crate::error::{Error, Result};

pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = (yaw + 180.0).rem_euclid(360.0) - 180.0;
    if y >= 180.0 {
        y - 360.0
    } else {
        y
    }
}

/// Signed circular difference `a - b` in [-180, 180).
pub fn yaw_diff(a: f64, b: f64) -> f64 {
    normalize_yaw(a - b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose { x, y, z: 0.0, yaw: normalize_yaw(yaw), pitch: 0.0 }
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceFrame {
    pub embedding: Embedding,
    pub pose: Pose,
    pub time: u64,
}

impl ExperienceFrame {
    pub fn new(embedding: Embedding, pose: Pose, time: u64) -> Self {
        ExperienceFrame { embedding, pose: Pose { yaw: normalize_yaw(pose.yaw), ..pose }, time }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryVariant {
    Fifo,
    Place,
    Event,
    PlaceEvent,
}

impl MemoryVariant {
    pub const ALL: [MemoryVariant; 4] =
        [MemoryVariant::Fifo, MemoryVariant::Place, MemoryVariant::Event, MemoryVariant::PlaceEvent];

    pub fn name(self) -> &'static str {
        match self {
            MemoryVariant::Fifo => "fifo",
            MemoryVariant::Place => "place",
            MemoryVariant::Event => "event",
            MemoryVariant::PlaceEvent => "place_event",
        }
    }
}

impl fmt::Display for MemoryVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MemoryVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        MemoryVariant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown memory variant `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    #[serde(rename = "capacity")]
    pub capacity: usize,
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
    /// Also scan frames that are still waiting in recency buffers.
    pub search_buffer: bool,
    pub init_clusters: usize,
    pub cluster_seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            capacity: 2000,
            place_size: 6.0,
            yaw_window: 60.0,
            update_frequency: 100,
            top_k: 30,
            merge_score: 73.5,
            task_threshold: 22.74,
            search_buffer: false,
            init_clusters: 5,
            cluster_seed: 0,
        }
    }
}

impl MemoryConfig {
    pub fn with_capacity(capacity: usize) -> Self {
        MemoryConfig { capacity, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if self.capacity == 0 {
            return bad("capacity", "must be >= 1");
        }
        if !(self.place_size > 0.0) {
            return bad("C", "must be > 0");
        }
        if !(self.yaw_window > 0.0 && self.yaw_window < 180.0) {
            return bad("W", "must lie in (0, 180)");
        }
        if self.update_frequency == 0 {
            return bad("R", "must be >= 1");
        }
        if self.top_k == 0 {
            return bad("K", "must be >= 1");
        }
        if !(self.merge_score > -100.0 && self.merge_score < 100.0) {
            return bad("c", "must lie in (-100, 100)");
        }
        if self.init_clusters == 0 {
            return bad("init_clusters", "must be >= 1");
        }
        Ok(())
    }
}

/// Lattice cell plus yaw bin, anchored at the episode's initial pose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlaceKey {
    pub ix: i64,
    pub iy: i64,
    /// Bin-center yaw in micro-degrees, within [-180, 180).
    pub yaw_udeg: i64,
}

impl PlaceKey {
    pub fn center(&self, place_size: f64) -> (f64, f64, f64) {
        (self.ix as f64 * place_size, self.iy as f64 * place_size, self.yaw_udeg as f64 / 1e6)
    }
}

/// Snaps a pose onto half-open place ranges `[c - C/2, c + C/2)` and yaw bins
/// `[w - W/2, w + W/2)`.
pub fn place_key(x: f64, y: f64, yaw: f64, config: &MemoryConfig) -> PlaceKey {
    let c = config.place_size;
    let w = config.yaw_window;
    let ix = (x / c + 0.5).floor() as i64;
    let iy = (y / c + 0.5).floor() as i64;
    let iw = ((normalize_yaw(yaw) + w / 2.0) / w).floor();
    let center = normalize_yaw(iw * w);
    PlaceKey { ix, iy, yaw_udeg: (center * 1e6).round() as i64 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Global,
    Place,
    Event,
    Buffer,
}

/// Read-only description of one eviction unit, computed from storage.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitView {
    pub id: u64,
    pub kind: UnitKind,
    pub place: Option<PlaceKey>,
    pub len: usize,
    pub oldest_time: u64,
}

#[derive(Clone, Debug)]
struct Unit {
    kind: UnitKind,
    place: Option<PlaceKey>,
    frames: VecDeque<ExperienceFrame>,
    /// Running sum of member embeddings, kept for event clusters.
    sum: Vec<f64>,
    center: Option<Embedding>,
}

impl Unit {
    fn new(kind: UnitKind, place: Option<PlaceKey>) -> Self {
        Unit { kind, place, frames: VecDeque::new(), sum: Vec::new(), center: None }
    }

    fn tracks_center(&self) -> bool {
        self.kind == UnitKind::Event
    }

    fn add_to_sum(&mut self, e: &Embedding, sign: f64) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; e.dim()];
        }
        for (s, v) in self.sum.iter_mut().zip(e.as_slice()) {
            *s += sign * *v as f64;
        }
    }

    fn refresh_center(&mut self) -> Result<()> {
        self.center = if self.frames.is_empty() { None } else { Some(Embedding::from_f64(&self.sum)?) };
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct PlaceState {
    seq: u64,
    /// Place unit (Place variant) or recency buffer (PlaceEvent).
    unit: u64,
    events: Vec<u64>,
    timer: usize,
    nearest: Option<ExperienceFrame>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteReport {
    pub created_places: usize,
    pub created_events: usize,
    pub merged_events: usize,
    pub clustered: bool,
    pub evicted: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCost {
    pub clusters_scored: usize,
    pub frames_scored: usize,
}

impl QueryCost {
    pub fn total(&self) -> usize {
        self.clusters_scored + self.frames_scored
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub frame: ExperienceFrame,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub frames: usize,
    pub buffered: usize,
    pub clusters: usize,
    pub places: usize,
    pub evictions: u64,
    pub writes: u64,
}

#[derive(Clone, Debug)]
pub struct EpisodicMemory {
    variant: MemoryVariant,
    config: MemoryConfig,
    dim: Option<usize>,
    last_time: Option<u64>,
    next_seq: u64,
    total: usize,
    writes: u64,
    evictions: u64,
    flushes: u64,
    units: HashMap<u64, Unit>,
    /// (Reverse(len), creation seq) of every non-empty unit.
    index: BTreeSet<(Reverse<usize>, u64)>,
    places: HashMap<PlaceKey, PlaceState>,
    /// Global event clusters in creation order (Event variant).
    events: Vec<u64>,
    /// Global unit: the FIFO queue or the Event variant's buffer.
    global: Option<u64>,
    global_timer: usize,
    last_cost: Cell<QueryCost>,
}

impl EpisodicMemory {
    pub fn new(variant: MemoryVariant, config: MemoryConfig) -> Result<Self> {
        config.validate()?;
        let mut m = EpisodicMemory {
            variant,
            config,
            dim: None,
            last_time: None,
            next_seq: 0,
            total: 0,
            writes: 0,
            evictions: 0,
            flushes: 0,
            units: HashMap::new(),
            index: BTreeSet::new(),
            places: HashMap::new(),
            events: Vec::new(),
            global: None,
            global_timer: 0,
            last_cost: Cell::new(QueryCost::default()),
        };
        match variant {
            MemoryVariant::Fifo => m.global = Some(m.new_unit(UnitKind::Global, None)),
            MemoryVariant::Event => m.global = Some(m.new_unit(UnitKind::Buffer, None)),
            _ => {}
        }
        Ok(m)
    }

    pub fn variant(&self) -> MemoryVariant {
        self.variant
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn stats(&self) -> MemoryStats {
        let buffered = self.units.values().filter(|u| u.kind == UnitKind::Buffer).map(|u| u.frames.len()).sum();
        let clusters = self
            .units
            .values()
            .filter(|u| matches!(u.kind, UnitKind::Event | UnitKind::Place) && !u.frames.is_empty())
            .count();
        MemoryStats {
            frames: self.total,
            buffered,
            clusters,
            places: self.places.len(),
            evictions: self.evictions,
            writes: self.writes,
        }
    }

    fn new_unit(&mut self, kind: UnitKind, place: Option<PlaceKey>) -> u64 {
        let id = self.next_seq;
        self.next_seq += 1;
        self.units.insert(id, Unit::new(kind, place));
        id
    }

    fn reindex(&mut self, id: u64, old_len: usize) {
        let new_len = self.units.get(&id).map_or(0, |u| u.frames.len());
        if old_len > 0 {
            self.index.remove(&(Reverse(old_len), id));
        }
        if new_len > 0 {
            self.index.insert((Reverse(new_len), id));
        }
    }

    fn push_frame(&mut self, id: u64, frame: ExperienceFrame) {
        let u = self.units.get_mut(&id).expect("unit exists");
        let old = u.frames.len();
        u.frames.push_back(frame);
        self.total += 1;
        self.reindex(id, old);
    }

    /// Writes a frame and evicts if over capacity.
    pub fn write(&mut self, frame: ExperienceFrame) -> Result<WriteReport> {
        let mut report = self.insert(frame)?;
        report.evicted = self.enforce_capacity()?;
        Ok(report)
    }

    /// Adds a frame (running any clustering it triggers) without evicting.
    pub fn insert(&mut self, frame: ExperienceFrame) -> Result<WriteReport> {
        if let Some(last) = self.last_time {
            if frame.time <= last {
                return Err(Error::OutOfOrder { last, got: frame.time });
            }
        }
        match self.dim {
            Some(d) if d != frame.embedding.dim() => {
                return Err(Error::DimensionMismatch { expected: d, actual: frame.embedding.dim() })
            }
            _ => self.dim = Some(frame.embedding.dim()),
        }
        self.last_time = Some(frame.time);
        self.writes += 1;
        let mut report = WriteReport::default();
        match self.variant {
            MemoryVariant::Fifo => {
                let g = self.global.expect("fifo queue");
                self.push_frame(g, frame);
            }
            MemoryVariant::Event => {
                let g = self.global.expect("event buffer");
                self.push_frame(g, frame);
                self.global_timer += 1;
                if self.global_timer >= self.config.update_frequency {
                    self.global_timer = 0;
                    self.flush(g, None, &mut report)?;
                }
            }
            MemoryVariant::Place | MemoryVariant::PlaceEvent => {
                let key = place_key(frame.pose.x, frame.pose.y, frame.pose.yaw, &self.config);
                if !self.places.contains_key(&key) {
                    let kind = if self.variant == MemoryVariant::Place { UnitKind::Place } else { UnitKind::Buffer };
                    let unit = self.new_unit(kind, Some(key));
                    let seq = unit;
                    self.places.insert(key, PlaceState { seq, unit, events: Vec::new(), timer: 0, nearest: None });
                    report.created_places += 1;
                }
                let cfg = self.config.clone();
                let place = self.places.get_mut(&key).expect("place exists");
                if closer(&frame, place.nearest.as_ref(), &key, &cfg) {
                    place.nearest = Some(frame.clone());
                }
                let unit = place.unit;
                self.push_frame(unit, frame);
                if self.variant == MemoryVariant::PlaceEvent {
                    let place = self.places.get_mut(&key).expect("place exists");
                    place.timer += 1;
                    if place.timer >= self.config.update_frequency {
                        place.timer = 0;
                        self.flush(unit, Some(key), &mut report)?;
                    }
                }
            }
        }
        Ok(report)
    }

    /// Clusters a recency buffer and folds the groups into event clusters.
    fn flush(&mut self, buffer: u64, place: Option<PlaceKey>, report: &mut WriteReport) -> Result<()> {
        let old_len = self.units[&buffer].frames.len();
        if old_len == 0 {
            return Ok(());
        }
        let frames: Vec<ExperienceFrame> =
            self.units.get_mut(&buffer).expect("buffer").frames.drain(..).collect();
        self.reindex(buffer, old_len);
        self.flushes += 1;
        report.clustered = true;

        let points: Vec<Embedding> = frames.iter().map(|f| f.embedding.clone()).collect();
        let params = DpMeansParams {
            penalty: penalty_for_merge_score(self.config.merge_score),
            init_clusters: self.config.init_clusters,
            max_iters: crate::clustering::DEFAULT_MAX_ITERS,
            seed: splitmix(self.config.cluster_seed ^ self.flushes.wrapping_mul(0x9e37_79b9)),
        };
        let clusters = merge_clusters(dp_means_with(&points, params)?, self.config.merge_score)?;
        let mut groups: Vec<Vec<ExperienceFrame>> = vec![Vec::new(); clusters.len()];
        for (f, &a) in frames.into_iter().zip(&clusters.assignments) {
            groups[a].push(f);
        }
        for (group, center) in groups.into_iter().zip(clusters.centers.iter()) {
            let existing = match place {
                Some(k) => self.places[&k].events.clone(),
                None => self.events.clone(),
            };
            let target = existing.into_iter().find(|id| {
                self.units[id].center.as_ref().is_some_and(|c| score(c, center) > self.config.merge_score)
            });
            let id = match target {
                Some(id) => {
                    report.merged_events += 1;
                    id
                }
                None => {
                    let id = self.new_unit(UnitKind::Event, place);
                    match place {
                        Some(k) => self.places.get_mut(&k).expect("place").events.push(id),
                        None => self.events.push(id),
                    }
                    report.created_events += 1;
                    id
                }
            };
            let u = self.units.get_mut(&id).expect("event");
            let old = u.frames.len();
            let sorted = u.frames.back().is_none_or(|b| b.time < group[0].time);
            for f in group {
                u.add_to_sum(&f.embedding, 1.0);
                u.frames.push_back(f);
            }
            if !sorted {
                u.frames.make_contiguous().sort_by_key(|f| f.time);
            }
            u.refresh_center()?;
            self.reindex(id, old);
        }
        Ok(())
    }

    /// Evicts while over capacity; returns the time of the evicted frame.
    pub fn enforce_capacity(&mut self) -> Result<Option<u64>> {
        let mut evicted = None;
        while self.total > self.config.capacity {
            let &(Reverse(len), id) = self.index.iter().next().expect("non-empty memory has a unit");
            let frame = {
                let u = self.units.get_mut(&id).expect("indexed unit");
                let f = u.frames.pop_front().expect("indexed unit is non-empty");
                if u.tracks_center() {
                    u.add_to_sum(&f.embedding, -1.0);
                    if u.frames.is_empty() {
                        u.sum.clear();
                    }
                    u.refresh_center()?;
                }
                f
            };
            self.total -= 1;
            self.evictions += 1;
            self.reindex(id, len);
            self.after_removal(id, &frame);
            evicted = Some(frame.time);
        }
        Ok(evicted)
    }

    /// Drops empty clusters and places, and refreshes the place's nearest frame.
    fn after_removal(&mut self, id: u64, frame: &ExperienceFrame) {
        let (kind, place, empty) = {
            let u = &self.units[&id];
            (u.kind, u.place, u.frames.is_empty())
        };
        if empty && kind == UnitKind::Event {
            self.units.remove(&id);
            match place {
                Some(k) => self.places.get_mut(&k).expect("place").events.retain(|&e| e != id),
                None => self.events.retain(|&e| e != id),
            }
        }
        let Some(key) = place else { return };
        let Some(state) = self.places.get(&key) else { return };
        let place_empty = state.events.is_empty() && self.units[&state.unit].frames.is_empty();
        if place_empty {
            let unit = state.unit;
            self.units.remove(&unit);
            self.places.remove(&key);
            return;
        }
        if state.nearest.as_ref().map(|n| n.time) == Some(frame.time) {
            let mut best: Option<ExperienceFrame> = None;
            for uid in state.events.iter().chain(std::iter::once(&state.unit)) {
                for f in &self.units[uid].frames {
                    if closer(f, best.as_ref(), &key, &self.config) {
                        best = Some(f.clone());
                    }
                }
            }
            self.places.get_mut(&key).expect("place").nearest = best;
        }
    }

    /// Two-stage retrieval with the configured K and h.
    pub fn read_default(&self, query: &Embedding) -> Result<Vec<Candidate>> {
        self.read(query, self.config.top_k, self.config.task_threshold)
    }

    /// Scores cluster centers, keeps the top `k` clusters and returns their
    /// frames scoring above `h`, best first (ties: most recent first).
    pub fn read(&self, query: &Embedding, k: usize, h: f64) -> Result<Vec<Candidate>> {
        if let Some(d) = self.dim {
            if d != query.dim() {
                return Err(Error::DimensionMismatch { expected: d, actual: query.dim() });
            }
        }
        let mut cost = QueryCost::default();
        let mut out = Vec::new();
        let scan = |u: &Unit, cost: &mut QueryCost, out: &mut Vec<Candidate>| {
            for f in &u.frames {
                let s = score(query, &f.embedding);
                if s > h {
                    out.push(Candidate { frame: f.clone(), score: s });
                }
            }
            cost.frames_scored += u.frames.len();
        };
        match self.variant {
            MemoryVariant::Fifo => {
                if let Some(g) = self.global {
                    scan(&self.units[&g], &mut cost, &mut out);
                }
            }
            MemoryVariant::Place => {
                let mut scored: Vec<(f64, u64, u64)> = Vec::with_capacity(self.places.len());
                for p in self.places.values() {
                    if let Some(n) = &p.nearest {
                        scored.push((score(query, &n.embedding), p.seq, p.unit));
                    }
                }
                cost.clusters_scored = scored.len();
                for id in top_k(scored, k) {
                    scan(&self.units[&id], &mut cost, &mut out);
                }
            }
            MemoryVariant::Event | MemoryVariant::PlaceEvent => {
                let mut scored: Vec<(f64, u64, u64)> = Vec::new();
                for (&id, u) in &self.units {
                    if u.kind == UnitKind::Event {
                        if let Some(c) = &u.center {
                            scored.push((score(query, c), id, id));
                        }
                    }
                }
                cost.clusters_scored = scored.len();
                for id in top_k(scored, k) {
                    scan(&self.units[&id], &mut cost, &mut out);
                }
                if self.config.search_buffer {
                    let mut buffers: Vec<u64> =
                        self.units.iter().filter(|(_, u)| u.kind == UnitKind::Buffer).map(|(&id, _)| id).collect();
                    buffers.sort_unstable();
                    for id in buffers {
                        scan(&self.units[&id], &mut cost, &mut out);
                    }
                }
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then(b.frame.time.cmp(&a.frame.time)));
        self.last_cost.set(cost);
        Ok(out)
    }

    /// Scoring counts of the most recent read.
    pub fn query_cost(&self) -> QueryCost {
        self.last_cost.get()
    }

    /// Every stored frame, including buffered ones, in no particular order.
    pub fn frames(&self) -> impl Iterator<Item = &ExperienceFrame> {
        self.units.values().flat_map(|u| u.frames.iter())
    }

    /// Frames visible to read without buffer search.
    pub fn clustered_frames(&self) -> impl Iterator<Item = &ExperienceFrame> {
        self.units.values().filter(|u| u.kind != UnitKind::Buffer).flat_map(|u| u.frames.iter())
    }

    pub fn contains_time(&self, t: u64) -> bool {
        self.frames().any(|f| f.time == t)
    }

    /// Eviction units as they are in storage, sorted by id.
    pub fn eviction_units(&self) -> Vec<UnitView> {
        let mut v: Vec<UnitView> = self
            .units
            .iter()
            .filter(|(_, u)| !u.frames.is_empty())
            .map(|(&id, u)| UnitView {
                id,
                kind: u.kind,
                place: u.place,
                len: u.frames.len(),
                oldest_time: u.frames.iter().map(|f| f.time).min().unwrap_or(0),
            })
            .collect();
        v.sort_by_key(|u| u.id);
        v
    }

    /// Event clusters as (id, place, member frames, center), sorted by id.
    pub fn event_clusters(&self) -> Vec<EventView<'_>> {
        let mut v: Vec<EventView<'_>> = self
            .units
            .iter()
            .filter(|(_, u)| u.kind == UnitKind::Event)
            .map(|(&id, u)| EventView {
                id,
                place: u.place,
                frames: u.frames.iter().collect(),
                center: u.center.as_ref().expect("non-empty event has a center"),
            })
            .collect();
        v.sort_by_key(|e| e.id);
        v
    }

    /// Place clusters sorted by creation order.
    pub fn place_clusters(&self) -> Vec<PlaceView<'_>> {
        let mut v: Vec<PlaceView<'_>> = self
            .places
            .iter()
            .map(|(key, p)| {
                let mut frames: Vec<&ExperienceFrame> = p
                    .events
                    .iter()
                    .chain(std::iter::once(&p.unit))
                    .flat_map(|id| self.units[id].frames.iter())
                    .collect();
                frames.sort_by_key(|f| f.time);
                PlaceView {
                    key: *key,
                    seq: p.seq,
                    center_pose: key.center(self.config.place_size),
                    center_frame: p.nearest.as_ref(),
                    events: p.events.clone(),
                    buffered: if self.variant == MemoryVariant::PlaceEvent {
                        self.units[&p.unit].frames.len()
                    } else {
                        0
                    },
                    timer: p.timer,
                    frames,
                }
            })
            .collect();
        v.sort_by_key(|p| p.seq);
        v
    }
}

pub struct EventView<'a> {
    pub id: u64,
    pub place: Option<PlaceKey>,
    pub frames: Vec<&'a ExperienceFrame>,
    pub center: &'a Embedding,
}

pub struct PlaceView<'a> {
    pub key: PlaceKey,
    pub seq: u64,
    pub center_pose: (f64, f64, f64),
    pub center_frame: Option<&'a ExperienceFrame>,
    pub events: Vec<u64>,
    pub buffered: usize,
    pub timer: usize,
    pub frames: Vec<&'a ExperienceFrame>,
}

/// Is `f` nearer the place center than `best`? Planar distance, then yaw, then time.
fn closer(f: &ExperienceFrame, best: Option<&ExperienceFrame>, key: &PlaceKey, cfg: &MemoryConfig) -> bool {
    let (cx, cy, cw) = key.center(cfg.place_size);
    let rank = |g: &ExperienceFrame| {
        let d2 = (g.pose.x - cx).powi(2) + (g.pose.y - cy).powi(2);
        (d2, yaw_diff(g.pose.yaw, cw).abs(), g.time)
    };
    match best {
        None => true,
        Some(b) => {
            let (a, b) = (rank(f), rank(b));
            a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).is_lt()
        }
    }
}

/// Ids of the `k` best (score desc, seq asc) entries.
fn top_k(mut scored: Vec<(f64, u64, u64)>, k: usize) -> Vec<u64> {
    let cmp = |a: &(f64, u64, u64), b: &(f64, u64, u64)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.into_iter().map(|(_, _, id)| id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(axis: usize) -> Embedding {
        let mut v = vec![0.0f64; 8];
        v[axis] = 1.0;
        Embedding::from_f64(&v).unwrap()
    }

    fn frame(axis: usize, x: f64, y: f64, t: u64) -> ExperienceFrame {
        ExperienceFrame::new(emb(axis), Pose::new(x, y, 0.0), t)
    }

    #[test]
    fn fifo_keeps_newest() {
        let mut m = EpisodicMemory::new(MemoryVariant::Fifo, MemoryConfig::with_capacity(3)).unwrap();
        for t in 1..=4 {
            m.write(frame(0, 0.0, 0.0, t)).unwrap();
        }
        let mut times: Vec<u64> = m.frames().map(|f| f.time).collect();
        times.sort();
        assert_eq!(times, vec![2, 3, 4]);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut m = EpisodicMemory::new(MemoryVariant::Fifo, MemoryConfig::default()).unwrap();
        m.write(frame(0, 0.0, 0.0, 5)).unwrap();
        assert!(matches!(m.write(frame(0, 0.0, 0.0, 5)), Err(Error::OutOfOrder { .. })));
    }

    #[test]
    fn place_key_examples() {
        let c = MemoryConfig::default();
        assert_eq!(place_key(2.9, -1.5, 10.0, &c).center(6.0), (0.0, 0.0, 0.0));
        assert_eq!(place_key(3.0, 0.0, 0.0, &c).center(6.0), (6.0, 0.0, 0.0));
        assert_eq!(place_key(0.0, 0.0, 179.0, &c).center(6.0).2, -180.0);
        assert_eq!(place_key(0.0, 0.0, -179.0, &c), place_key(0.0, 0.0, 179.0, &c));
        assert_eq!(place_key(0.0, 0.0, 30.0, &c).center(6.0).2, 60.0);
    }

    #[test]
    fn place_tie_evicts_first_created() {
        let mut m = EpisodicMemory::new(MemoryVariant::Place, MemoryConfig::with_capacity(10)).unwrap();
        for t in 0..5 {
            m.write(frame(0, 0.0, 0.0, 2 * t + 1)).unwrap();
            m.write(frame(1, 12.0, 0.0, 2 * t + 2)).unwrap();
        }
        let r = m.write(frame(2, 24.0, 0.0, 11)).unwrap();
        assert_eq!(r.evicted, Some(1));
    }

    #[test]
    fn event_timer_clusters_buffer() {
        let cfg = MemoryConfig { update_frequency: 10, ..MemoryConfig::with_capacity(100) };
        let mut m = EpisodicMemory::new(MemoryVariant::PlaceEvent, cfg).unwrap();
        for t in 0..10 {
            let r = m.write(frame(if t < 5 { 0 } else { 1 }, 0.0, 0.0, t)).unwrap();
            assert_eq!(r.clustered, t == 9);
        }
        let events = m.event_clusters();
        assert_eq!(events.len(), 2);
        assert!(score(events[0].center, events[1].center) < 73.5);
        assert_eq!(m.stats().buffered, 0);
    }

    #[test]
    fn read_filters_and_orders() {
        let cfg = MemoryConfig { update_frequency: 4, ..MemoryConfig::with_capacity(100) };
        let mut m = EpisodicMemory::new(MemoryVariant::Event, cfg).unwrap();
        assert!(m.read_default(&emb(0)).unwrap().is_empty());
        for t in 0..8 {
            m.write(frame(t as usize % 2, 0.0, 0.0, t)).unwrap();
        }
        let c = m.read_default(&emb(0)).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.windows(2).all(|w| w[0].frame.time > w[1].frame.time));
        assert_eq!(m.query_cost(), QueryCost { clusters_scored: 2, frames_scored: 8 });
    }

    #[test]
    fn single_frame_cost() {
        let cfg = MemoryConfig { update_frequency: 1, ..MemoryConfig::default() };
        let mut m = EpisodicMemory::new(MemoryVariant::PlaceEvent, cfg).unwrap();
        m.write(frame(0, 0.0, 0.0, 0)).unwrap();
        m.read_default(&emb(0)).unwrap();
        assert_eq!(m.query_cost(), QueryCost { clusters_scored: 1, frames_scored: 1 });
    }
}
