use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::report::median;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::memory::{EpisodicMemory, ExperienceFrame, MemoryConfig, MemoryVariant, Pose, UnitKind};

/// Frames the synthetic agent spends at each place.
const DWELL: usize = 100;
/// Distinct scenes per dwell.
const EVENTS_PER_DWELL: usize = 3;
/// Per-coordinate noise added to an event's scene vector.
const FRAME_NOISE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryBenchConfig {
    pub variants: Vec<MemoryVariant>,
    pub sizes: Vec<usize>,
    pub queries: usize,
    pub warmup: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for QueryBenchConfig {
    fn default() -> Self {
        QueryBenchConfig {
            variants: MemoryVariant::ALL.to_vec(),
            sizes: vec![100_000],
            queries: 1000,
            warmup: 50,
            dim: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySizeResult {
    pub frames: usize,
    pub clusters: usize,
    pub max_cluster_size: usize,
    pub median_ms: f64,
    pub median_clusters_scored: f64,
    pub median_frames_scored: f64,
    pub min_total_scored: usize,
    pub max_total_scored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryBenchResult {
    pub variant: String,
    pub sizes: Vec<QuerySizeResult>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// A trajectory that dwells `DWELL` frames at each of `n / DWELL` distinct
/// place cells and headings, seeing a few unrelated scenes per dwell.
pub fn synthetic_trajectory(n: usize, dim: usize, seed: u64) -> Result<Vec<ExperienceFrame>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MemoryConfig::default();
    let side = 60;
    let mut cells: Vec<(i32, i32, i32)> = Vec::new();
    for x in -side / 2..side / 2 {
        for y in -side / 2..side / 2 {
            for b in 0..6 {
                cells.push((x, y, b));
            }
        }
    }
    cells.shuffle(&mut rng);
    let dwells = n.div_ceil(DWELL);
    if dwells > cells.len() {
        return Err(Error::InvalidParameter { name: "frames", reason: format!("at most {} supported", cells.len() * DWELL) });
    }
    let mut frames = Vec::with_capacity(n);
    for &(cx, cy, b) in cells.iter().take(dwells) {
        let scenes: Vec<Vec<f64>> = (0..EVENTS_PER_DWELL).map(|_| random_unit(&mut rng, dim)).collect();
        let (x0, y0, yaw0) = (cx as f64 * cfg.place_size, cy as f64 * cfg.place_size, b as f64 * cfg.yaw_window - 180.0 + 60.0);
        for i in 0..DWELL {
            if frames.len() == n {
                break;
            }
            let scene = &scenes[i * EVENTS_PER_DWELL / DWELL];
            let v: Vec<f64> = scene.iter().map(|&s| s + FRAME_NOISE * rng.sample::<f64, _>(StandardNormal)).collect();
            let pose = Pose::new(x0 + rng.gen_range(-2.0..2.0), y0 + rng.gen_range(-2.0..2.0), yaw0 + rng.gen_range(-20.0..20.0));
            frames.push(ExperienceFrame::new(Embedding::from_f64(&v)?, pose, frames.len() as u64 + 1));
        }
    }
    Ok(frames)
}

fn bench_one(memory: &EpisodicMemory, queries: &[Embedding], warmup: usize) -> Result<QuerySizeResult> {
    for q in queries.iter().cycle().take(warmup) {
        std::hint::black_box(memory.read_default(q)?);
    }
    let mut times = Vec::with_capacity(queries.len());
    let mut clusters = Vec::with_capacity(queries.len());
    let mut frames = Vec::with_capacity(queries.len());
    let (mut lo, mut hi) = (usize::MAX, 0);
    for q in queries {
        let t = Instant::now();
        std::hint::black_box(memory.read_default(q)?);
        times.push(t.elapsed().as_secs_f64() * 1e3);
        let c = memory.query_cost();
        clusters.push(c.clusters_scored as f64);
        frames.push(c.frames_scored as f64);
        lo = lo.min(c.total());
        hi = hi.max(c.total());
    }
    let units = memory.eviction_units();
    let events: Vec<usize> =
        units.iter().filter(|u| matches!(u.kind, UnitKind::Event | UnitKind::Place)).map(|u| u.len).collect();
    Ok(QuerySizeResult {
        frames: memory.len(),
        clusters: events.len(),
        max_cluster_size: events.iter().copied().max().unwrap_or(0),
        median_ms: median(&times).unwrap_or(0.0),
        median_clusters_scored: median(&clusters).unwrap_or(0.0),
        median_frames_scored: median(&frames).unwrap_or(0.0),
        min_total_scored: if queries.is_empty() { 0 } else { lo },
        max_total_scored: hi,
    })
}

/// Builds every variant from one identical trajectory per size and times
/// `queries` reads with frames drawn from that trajectory.
pub fn bench_query(cfg: &QueryBenchConfig) -> Result<Vec<QueryBenchResult>> {
    let mut out: Vec<QueryBenchResult> =
        cfg.variants.iter().map(|v| QueryBenchResult { variant: v.name().into(), sizes: Vec::new() }).collect();
    for &n in &cfg.sizes {
        let traj = synthetic_trajectory(n, cfg.dim, cfg.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37);
        let queries: Vec<Embedding> =
            (0..cfg.queries).map(|_| traj[rng.gen_range(0..traj.len())].embedding.clone()).collect();
        for (v, res) in cfg.variants.iter().zip(out.iter_mut()) {
            let mut memory = EpisodicMemory::new(
                *v,
                MemoryConfig { capacity: n, cluster_seed: cfg.seed, ..MemoryConfig::default() },
            )?;
            for f in &traj {
                memory.write(f.clone())?;
            }
            res.sizes.push(bench_one(&memory, &queries, cfg.warmup)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_is_deterministic() {
        let a = synthetic_trajectory(250, 32, 7).unwrap();
        let b = synthetic_trajectory(250, 32, 7).unwrap();
        assert_eq!(a.len(), 250);
        assert!(a.iter().zip(&b).all(|(x, y)| x.embedding == y.embedding && x.time == y.time));
    }

    #[test]
    fn small_bench_counts() {
        let cfg = QueryBenchConfig { sizes: vec![2000], queries: 20, warmup: 2, dim: 64, ..Default::default() };
        let res = bench_query(&cfg).unwrap();
        let fifo = &res.iter().find(|r| r.variant == "fifo").unwrap().sizes[0];
        assert_eq!(fifo.median_frames_scored, 2000.0);
        assert_eq!(fifo.min_total_scored, 2000);
        let pe = &res.iter().find(|r| r.variant == "place_event").unwrap().sizes[0];
        assert_eq!(pe.clusters, 60);
        assert!(pe.min_total_scored >= pe.clusters + 30);
        assert!(pe.max_total_scored <= pe.clusters + 30 * pe.max_cluster_size);
    }
}
