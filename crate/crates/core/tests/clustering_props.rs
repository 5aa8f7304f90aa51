mod common;

use pemsim::clustering::{dp_means, merge_clusters, penalty_for_merge_score};
use pemsim::embedding::{alignment_score, Embedding};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cosine_distance(a: &Embedding, b: &Embedding) -> f64 {
    let (a, b) = (a.to_f64(), b.to_f64());
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

fn groups(seed: u64, sizes: &[usize], noise: f64) -> (Vec<Embedding>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Orthogonal group directions along distinct axes.
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (g, &n) in sizes.iter().enumerate() {
        let mut base = vec![0.0; common::DIM];
        base[g] = 1.0;
        for _ in 0..n {
            pts.push(common::near(&mut rng, &base, noise));
            labels.push(g);
        }
    }
    // Interleave so groups are not contiguous.
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    (idx.iter().map(|&i| pts[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
}

#[test]
fn identical_points_form_one_cluster() {
    let e = Embedding::from_f64(&[0.3, -0.2, 0.9, 0.1]).unwrap();
    let r = dp_means(&vec![e; 40], penalty_for_merge_score(73.5), 5).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r.sizes, vec![40]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separated_groups_recover_labels(seed in any::<u64>(), k in 1usize..5, n in 5usize..40) {
        let sizes = vec![n; k];
        let (pts, labels) = groups(seed, &sizes, 0.03);
        let r = merge_clusters(dp_means(&pts, penalty_for_merge_score(73.5), 5).unwrap(), 73.5).unwrap();
        prop_assert_eq!(r.len(), k);
        // Same-label pairs share a cluster, different-label pairs do not.
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                prop_assert_eq!(labels[i] == labels[j], r.assignments[i] == r.assignments[j]);
            }
        }
    }

    #[test]
    fn partition_is_consistent(seed in any::<u64>(), n in 1usize..120, noise in 0.05f64..0.8) {
        let (pts, _) = groups(seed, &[n / 2 + 1, n / 3 + 1, n / 4 + 1], noise);
        let r = dp_means(&pts, penalty_for_merge_score(73.5), 5).unwrap();
        prop_assert_eq!(r.assignments.len(), pts.len());
        prop_assert_eq!(r.sizes.iter().sum::<usize>(), pts.len());
        let members = r.members();
        for (c, m) in members.iter().enumerate() {
            prop_assert!(!m.is_empty());
            prop_assert_eq!(m.len(), r.sizes[c]);
        }
        if r.converged {
            let lambda = penalty_for_merge_score(73.5);
            for (i, p) in pts.iter().enumerate() {
                let own = cosine_distance(p, &r.centers[r.assignments[i]]);
                prop_assert!(own <= lambda + 1e-6, "point {} at {} from its center", i, own);
                for c in &r.centers {
                    prop_assert!(own <= cosine_distance(p, c) + 1e-6);
                }
            }
        }
    }

    #[test]
    fn merge_reaches_fixpoint(seed in any::<u64>(), n in 2usize..150, c in 40.0f64..95.0) {
        let (pts, _) = groups(seed, &[n, n / 2 + 1, 3], 0.6);
        let r = dp_means(&pts, penalty_for_merge_score(c), 5).unwrap();
        let before = r.len();
        let m = merge_clusters(r, c).unwrap();
        prop_assert!(m.len() <= before);
        prop_assert_eq!(m.sizes.iter().sum::<usize>(), pts.len());
        for a in 0..m.len() {
            for b in a + 1..m.len() {
                prop_assert!(alignment_score(&m.centers[a], &m.centers[b]).unwrap() <= c);
            }
        }
    }
}
