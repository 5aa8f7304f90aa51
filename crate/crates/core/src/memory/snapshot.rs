//! Lossless text snapshots of a memory's full state.

use std::cell::Cell;
use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    EpisodicMemory, ExperienceFrame, MemoryConfig, MemoryVariant, PlaceKey, PlaceState, QueryCost, Unit, UnitKind,
};
use crate::embedding::Embedding;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySnapshot {
    pub version: u32,
    pub variant: MemoryVariant,
    pub config: MemoryConfig,
    pub dim: Option<usize>,
    pub last_time: Option<u64>,
    pub next_seq: u64,
    pub writes: u64,
    pub evictions: u64,
    pub flushes: u64,
    pub global: Option<u64>,
    pub global_timer: usize,
    pub events: Vec<u64>,
    pub places: Vec<PlaceRecord>,
    pub units: Vec<UnitRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceRecord {
    pub key: PlaceKey,
    pub seq: u64,
    pub center_pose: [f64; 3],
    pub center_frame_time: Option<u64>,
    pub unit: u64,
    pub events: Vec<u64>,
    pub timer: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitRecord {
    pub id: u64,
    pub kind: UnitKind,
    pub place: Option<PlaceKey>,
    pub center_digest: Option<String>,
    pub center: Option<Embedding>,
    /// Running member sum as little-endian f64, base64.
    pub sum: Option<String>,
    pub frames: Vec<ExperienceFrame>,
}

fn encode_sum(v: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(v.len() * 8);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn decode_sum(s: &str) -> Result<Vec<f64>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(|e| Error::Malformed { line: 0, message: format!("cluster sum: {e}") })?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Malformed { line: 0, message: "cluster sum length".into() });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl EpisodicMemory {
    pub fn snapshot(&self) -> MemorySnapshot {
        let mut ids: Vec<&u64> = self.units.keys().collect();
        ids.sort();
        let units = ids
            .into_iter()
            .map(|id| {
                let u = &self.units[id];
                UnitRecord {
                    id: *id,
                    kind: u.kind,
                    place: u.place,
                    center_digest: u.center.as_ref().map(|c| c.digest()),
                    center: u.center.clone(),
                    sum: if u.sum.is_empty() { None } else { Some(encode_sum(&u.sum)) },
                    frames: u.frames.iter().cloned().collect(),
                }
            })
            .collect();
        let mut places: Vec<PlaceRecord> = self
            .places
            .iter()
            .map(|(k, p)| {
                let (x, y, w) = k.center(self.config.place_size);
                PlaceRecord {
                    key: *k,
                    seq: p.seq,
                    center_pose: [x, y, w],
                    center_frame_time: p.nearest.as_ref().map(|f| f.time),
                    unit: p.unit,
                    events: p.events.clone(),
                    timer: p.timer,
                }
            })
            .collect();
        places.sort_by_key(|p| p.seq);
        MemorySnapshot {
            version: SNAPSHOT_VERSION,
            variant: self.variant,
            config: self.config.clone(),
            dim: self.dim,
            last_time: self.last_time,
            next_seq: self.next_seq,
            writes: self.writes,
            evictions: self.evictions,
            flushes: self.flushes,
            global: self.global,
            global_timer: self.global_timer,
            events: self.events.clone(),
            places,
            units,
        }
    }

    pub fn to_snapshot_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes");
        s.push('\n');
        s
    }

    pub fn from_snapshot_str(s: &str) -> Result<Self> {
        let snap: MemorySnapshot = serde_json::from_str(s)?;
        Self::from_snapshot(snap)
    }

    pub fn from_snapshot(snap: MemorySnapshot) -> Result<Self> {
        let bad = |m: String| Error::Malformed { line: 0, message: m };
        if snap.version != SNAPSHOT_VERSION {
            return Err(bad(format!("unsupported snapshot version {}", snap.version)));
        }
        snap.config.validate()?;
        let mut units = HashMap::new();
        let mut index = BTreeSet::new();
        let mut total = 0;
        for r in snap.units {
            let sum = match &r.sum {
                Some(s) => decode_sum(s)?,
                None => Vec::new(),
            };
            if r.frames.windows(2).any(|w| w[0].time >= w[1].time) {
                return Err(bad(format!("unit {} frames are not time-ordered", r.id)));
            }
            total += r.frames.len();
            if !r.frames.is_empty() {
                index.insert((Reverse(r.frames.len()), r.id));
            }
            units.insert(
                r.id,
                Unit { kind: r.kind, place: r.place, frames: r.frames.into_iter().collect(), sum, center: r.center },
            );
        }
        let mut places = HashMap::new();
        for p in snap.places {
            let mut nearest = None;
            if let Some(t) = p.center_frame_time {
                for id in p.events.iter().chain(std::iter::once(&p.unit)) {
                    let u = units.get(id).ok_or_else(|| bad(format!("place references missing unit {id}")))?;
                    if let Some(f) = u.frames.iter().find(|f| f.time == t) {
                        nearest = Some(f.clone());
                    }
                }
            }
            places.insert(p.key, PlaceState { seq: p.seq, unit: p.unit, events: p.events, timer: p.timer, nearest });
        }
        Ok(EpisodicMemory {
            variant: snap.variant,
            config: snap.config,
            dim: snap.dim,
            last_time: snap.last_time,
            next_seq: snap.next_seq,
            total,
            writes: snap.writes,
            evictions: snap.evictions,
            flushes: snap.flushes,
            units,
            index,
            places,
            events: snap.events,
            global: snap.global,
            global_timer: snap.global_timer,
            last_cost: Cell::new(QueryCost::default()),
        })
    }
}

