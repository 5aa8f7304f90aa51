//! Cluster a stream of noisy scene vectors with DP-Means, then merge near duplicates.

use pemsim::clustering::{dp_means, merge_clusters, penalty_for_merge_score};
use pemsim::embedding::Embedding;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pemsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 64;
    // Three scenes; the third is a slight variation of the first.
    let mut base = vec![vec![0.0; dim]; 3];
    base[0][0] = 1.0;
    base[1][1] = 1.0;
    base[2][0] = 0.9;
    base[2][2] = 0.45;
    let mut points = Vec::new();
    for i in 0..300 {
        let b = &base[i / 100];
        let v: Vec<f64> = b.iter().map(|x| x + rng.gen_range(-0.08..0.08)).collect();
        points.push(Embedding::from_f64(&v)?);
    }

    let merge_score = 73.5;
    let raw = dp_means(&points, penalty_for_merge_score(merge_score), 5)?;
    println!("dp-means: {} clusters, sizes {:?}, {} iterations", raw.len(), raw.sizes, raw.iterations);
    let merged = merge_clusters(raw, merge_score)?;
    println!("merged:   {} clusters, sizes {:?}", merged.len(), merged.sizes);
    for (c, members) in merged.members().iter().enumerate() {
        let mut from = [0usize; 3];
        for &i in members {
            from[i / 100] += 1;
        }
        println!("cluster {c}: {} from scene 0, {} from scene 1, {} from scene 2", from[0], from[1], from[2]);
    }
    Ok(())
}
