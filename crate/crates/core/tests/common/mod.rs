#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use pemsim::embedding::Embedding;
use pemsim::memory::{ExperienceFrame, Pose};
use pemsim::navigation::{Terrain, TerrainGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 32;

pub fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn near(rng: &mut ChaCha8Rng, base: &[f64], noise: f64) -> Embedding {
    let v: Vec<f64> = base.iter().map(|&b| b + noise * rng.gen_range(-1.0..1.0)).collect();
    Embedding::from_f64(&v).unwrap()
}

/// Frames drawn from `scenes` random scene directions at `places` random
/// place cells, in runs of random length, times 1..=n.
pub fn random_stream(seed: u64, n: usize, scenes: usize, places: usize, noise: f64) -> Vec<ExperienceFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..scenes).map(|_| unit(&mut rng, DIM)).collect();
    let cells: Vec<(f64, f64, f64)> = (0..places)
        .map(|_| (rng.gen_range(-5..5) as f64 * 6.0, rng.gen_range(-5..5) as f64 * 6.0, rng.gen_range(-2..3) as f64 * 60.0))
        .collect();
    let mut out = Vec::with_capacity(n);
    let (mut scene, mut place) = (0, 0);
    while out.len() < n {
        if rng.gen_bool(0.05) {
            scene = rng.gen_range(0..scenes);
        }
        if rng.gen_bool(0.02) {
            place = rng.gen_range(0..places);
        }
        let (x, y, yaw) = cells[place];
        let pose = Pose::new(x + rng.gen_range(-2.5..2.5), y + rng.gen_range(-2.5..2.5), yaw + rng.gen_range(-25.0..25.0));
        let t = out.len() as u64 + 1;
        out.push(ExperienceFrame::new(near(&mut rng, &dirs[scene], noise), pose, t));
    }
    out
}

fn unit_cost(t: Terrain) -> Option<f64> {
    match t {
        Terrain::Flat | Terrain::Grass | Terrain::Sand => Some(1.0),
        Terrain::Water => Some(4.0),
        Terrain::Mountain => Some(3.0),
        Terrain::Wall => None,
    }
}

#[derive(PartialEq)]
struct Item(f64, (i32, i32));
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0)
    }
}

/// Plain Dijkstra over 8-neighbours; diagonals cost sqrt(2) times the
/// destination cost and need both orthogonal cells open.
pub fn dijkstra(g: &TerrainGrid, s: (i32, i32), t: (i32, i32)) -> Option<f64> {
    let (w, h) = (g.width(), g.height());
    let open = |c: (i32, i32)| c.0 >= 0 && c.1 >= 0 && c.0 < w && c.1 < h && unit_cost(g.get(c)).is_some();
    if !open(s) || !open(t) {
        return None;
    }
    let mut best = vec![f64::INFINITY; (w * h) as usize];
    let id = |c: (i32, i32)| (c.1 * w + c.0) as usize;
    best[id(s)] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, s)]);
    while let Some(Item(d, c)) = heap.pop() {
        if c == t {
            return Some(d);
        }
        if d > best[id(c)] {
            continue;
        }
        for dx in -1..=1 {
            for dy in -1..=1 {
                let n = (c.0 + dx, c.1 + dy);
                if (dx, dy) == (0, 0) || !open(n) {
                    continue;
                }
                let mut step = unit_cost(g.get(n)).unwrap();
                if dx != 0 && dy != 0 {
                    if !open((c.0 + dx, c.1)) || !open((c.0, c.1 + dy)) {
                        continue;
                    }
                    step *= 2f64.sqrt();
                }
                if d + step < best[id(n)] {
                    best[id(n)] = d + step;
                    heap.push(Item(d + step, n));
                }
            }
        }
    }
    None
}

pub fn random_grid(rng: &mut ChaCha8Rng, w: i32, h: i32, wall_p: f64) -> TerrainGrid {
    let mut g = TerrainGrid::new(w, h, Terrain::Flat);
    for y in 0..h {
        for x in 0..w {
            let t = if rng.gen_bool(wall_p) {
                Terrain::Wall
            } else {
                [Terrain::Flat, Terrain::Grass, Terrain::Sand, Terrain::Water, Terrain::Mountain][rng.gen_range(0..5)]
            };
            g.set((x, y), t);
        }
    }
    g
}
