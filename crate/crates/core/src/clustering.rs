//! DP-Means in cosine-distance space and transitive merging of near-duplicate clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{dot, score, Embedding};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 50;

/// Penalty matching a merge threshold on the 100x cosine scale.
pub fn penalty_for_merge_score(c: f64) -> f64 {
    1.0 - c / 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centers: Vec<Embedding>,
    pub sizes: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Point indices used as the initial seeds.
    pub initial_seeds: Vec<usize>,
    sums: Vec<Vec<f64>>,
}

impl ClusterResult {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Member indices of each cluster, in input order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DpMeansParams {
    pub penalty: f64,
    pub init_clusters: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl DpMeansParams {
    pub fn new(penalty: f64, init_clusters: usize) -> Self {
        DpMeansParams { penalty, init_clusters, max_iters: DEFAULT_MAX_ITERS, seed: 0 }
    }
}

pub fn dp_means(points: &[Embedding], penalty: f64, init_clusters: usize) -> Result<ClusterResult> {
    dp_means_with(points, DpMeansParams::new(penalty, init_clusters))
}

pub fn dp_means_with(points: &[Embedding], p: DpMeansParams) -> Result<ClusterResult> {
    if points.is_empty() {
        return Err(Error::EmptyInput("clustering input"));
    }
    if !(p.penalty > 0.0 && p.penalty < 2.0) {
        return Err(Error::InvalidParameter { name: "penalty", reason: "must lie in (0, 2)".into() });
    }
    if p.init_clusters == 0 || p.max_iters == 0 {
        return Err(Error::InvalidParameter {
            name: "init_clusters",
            reason: "init_clusters and max_iters must be >= 1".into(),
        });
    }
    let dim = points[0].dim();
    if let Some(bad) = points.iter().find(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
    }

    let seeds = kmeans_pp(points, p.init_clusters.min(points.len()), p.seed);
    let mut centers: Vec<Embedding> = seeds.iter().map(|&i| points[i].clone()).collect();
    let mut prev: Option<Vec<usize>> = None;
    let mut assign = vec![0usize; points.len()];
    let mut sums = Vec::new();
    let mut sizes = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < p.max_iters {
        iterations += 1;
        let mut created = false;
        for (i, x) in points.iter().enumerate() {
            let (best, dist) = nearest(x, &centers);
            if dist > p.penalty {
                centers.push(x.clone());
                assign[i] = centers.len() - 1;
                created = true;
            } else {
                assign[i] = best;
            }
        }
        let (c, s, n) = recompute(points, &mut assign, centers.len(), dim)?;
        centers = c;
        sums = s;
        sizes = n;
        if !created && prev.as_deref() == Some(&assign[..]) {
            converged = true;
            break;
        }
        prev = Some(assign.clone());
    }

    Ok(ClusterResult { assignments: assign, centers, sizes, converged, iterations, initial_seeds: seeds, sums })
}

/// Nearest center by cosine distance; ties go to the lowest index.
fn nearest(x: &Embedding, centers: &[Embedding]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = 1.0 - dot(x.as_slice(), c.as_slice());
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Rebuilds centers from assignments, dropping empty clusters and remapping indices.
fn recompute(
    points: &[Embedding],
    assign: &mut [usize],
    k: usize,
    dim: usize,
) -> Result<(Vec<Embedding>, Vec<Vec<f64>>, Vec<usize>)> {
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut sizes = vec![0usize; k];
    for (x, &a) in points.iter().zip(assign.iter()) {
        sizes[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(x.as_slice()) {
            *s += *v as f64;
        }
    }
    let mut remap = vec![usize::MAX; k];
    let mut out_sums = Vec::new();
    let mut out_sizes = Vec::new();
    for (j, (s, n)) in sums.into_iter().zip(sizes).enumerate() {
        if n > 0 {
            remap[j] = out_sums.len();
            out_sums.push(s);
            out_sizes.push(n);
        }
    }
    for a in assign.iter_mut() {
        *a = remap[*a];
    }
    let centers = out_sums.iter().map(|s| Embedding::from_f64(s)).collect::<Result<Vec<_>>>()?;
    Ok((centers, out_sums, out_sizes))
}

/// k-means++ seeding with squared cosine distance weights.
fn kmeans_pp(points: &[Embedding], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = vec![rng.gen_range(0..points.len())];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|x| sq(1.0 - dot(x.as_slice(), points[seeds[0]].as_slice())))
        .collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 1e-18 {
            rng.gen_range(0..points.len())
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        };
        seeds.push(next);
        for (i, x) in points.iter().enumerate() {
            let d = sq(1.0 - dot(x.as_slice(), points[next].as_slice()));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    seeds
}

fn sq(x: f64) -> f64 {
    let x = x.max(0.0);
    x * x
}

/// Unions every pair of clusters whose centers score above `merge_score`,
/// transitively, until no pair qualifies. Output clusters are ordered by
/// their lowest original index.
pub fn merge_clusters(result: ClusterResult, merge_score: f64) -> Result<ClusterResult> {
    if !(merge_score > -100.0 && merge_score <= 100.0) {
        return Err(Error::InvalidParameter { name: "merge_score", reason: "must lie in (-100, 100]".into() });
    }
    let mut r = result;
    loop {
        let k = r.centers.len();
        let mut parent: Vec<usize> = (0..k).collect();
        let mut any = false;
        for a in 0..k {
            for b in a + 1..k {
                if score(&r.centers[a], &r.centers[b]) > merge_score {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                        any = true;
                    }
                }
            }
        }
        if !any {
            return Ok(r);
        }
        let roots: Vec<usize> = (0..k).map(|i| find(&mut parent, i)).collect();
        let mut remap = vec![usize::MAX; k];
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let mut sizes = Vec::new();
        for i in 0..k {
            let root = roots[i];
            if remap[root] == usize::MAX {
                remap[root] = sums.len();
                sums.push(vec![0.0; r.sums[i].len()]);
                sizes.push(0);
            }
            let j = remap[root];
            for (s, v) in sums[j].iter_mut().zip(&r.sums[i]) {
                *s += v;
            }
            sizes[j] += r.sizes[i];
        }
        for a in r.assignments.iter_mut() {
            *a = remap[roots[*a]];
        }
        r.centers = sums.iter().map(|s| Embedding::from_f64(s)).collect::<Result<Vec<_>>>()?;
        r.sums = sums;
        r.sizes = sizes;
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}
