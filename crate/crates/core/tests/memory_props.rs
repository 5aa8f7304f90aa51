mod common;

use std::collections::BTreeSet;

use pemsim::embedding::alignment_score;
use pemsim::memory::{EpisodicMemory, MemoryConfig, MemoryVariant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(capacity: usize, seed: u64) -> MemoryConfig {
    MemoryConfig { capacity, update_frequency: 20, cluster_seed: seed, ..MemoryConfig::default() }
}

fn variant() -> impl Strategy<Value = MemoryVariant> {
    prop::sample::select(MemoryVariant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eviction_takes_oldest_of_first_largest_unit(v in variant(), seed in any::<u64>(), cap in 20usize..120) {
        let frames = common::random_stream(seed, 600, 4, 5, 0.2);
        let mut m = EpisodicMemory::new(v, config(cap, seed)).unwrap();
        for f in frames {
            m.insert(f).unwrap();
            let units = m.eviction_units();
            let over = m.len() > cap;
            let evicted = m.enforce_capacity().unwrap();
            prop_assert!(m.len() <= cap);
            prop_assert_eq!(evicted.is_some(), over);
            if let Some(t) = evicted {
                let largest = units.iter().map(|u| u.len).max().unwrap();
                let first = units.iter().filter(|u| u.len == largest).min_by_key(|u| u.id).unwrap();
                prop_assert_eq!(t, first.oldest_time);
            }
        }
    }

    #[test]
    fn read_matches_brute_force_when_all_clusters_fit(v in variant(), seed in any::<u64>(), n in 1usize..300) {
        let frames = common::random_stream(seed, n, 3, 3, 0.3);
        let mut m = EpisodicMemory::new(v, config(10_000, seed)).unwrap();
        for f in &frames {
            m.write(f.clone()).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let q = frames[rng.gen_range(0..frames.len())].embedding.clone();
        let k = m.eviction_units().len().max(1);
        let h = m.config().task_threshold;
        let got: BTreeSet<u64> = m.read(&q, k, h).unwrap().iter().map(|c| c.frame.time).collect();
        let pool: Vec<_> = if m.config().search_buffer { m.frames().collect() } else { m.clustered_frames().collect() };
        let want: BTreeSet<u64> = pool
            .into_iter()
            .filter(|f| alignment_score(&q, &f.embedding).unwrap() > h)
            .map(|f| f.time)
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn read_is_sorted_and_above_threshold(v in variant(), seed in any::<u64>()) {
        let frames = common::random_stream(seed, 400, 5, 4, 0.3);
        let mut m = EpisodicMemory::new(v, config(250, seed)).unwrap();
        for f in &frames {
            m.write(f.clone()).unwrap();
        }
        let out = m.read_default(&frames[17].embedding).unwrap();
        for w in out.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].frame.time >= w[1].frame.time));
        }
        prop_assert!(out.iter().all(|c| c.score > m.config().task_threshold));
    }

    #[test]
    fn snapshot_round_trip_is_byte_stable(v in variant(), seed in any::<u64>(), n in 1usize..400) {
        let frames = common::random_stream(seed, n, 4, 4, 0.25);
        let mut m = EpisodicMemory::new(v, config(150, seed)).unwrap();
        for f in &frames {
            m.write(f.clone()).unwrap();
        }
        let text = m.to_snapshot_string();
        let back = EpisodicMemory::from_snapshot_str(&text).unwrap();
        prop_assert_eq!(back.to_snapshot_string(), text);
        let q = &frames[0].embedding;
        let a: Vec<u64> = m.read_default(q).unwrap().iter().map(|c| c.frame.time).collect();
        let b: Vec<u64> = back.read_default(q).unwrap().iter().map(|c| c.frame.time).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn fifo_keeps_last_three() {
    let frames = common::random_stream(3, 4, 1, 1, 0.1);
    let mut m = EpisodicMemory::new(MemoryVariant::Fifo, MemoryConfig::with_capacity(3)).unwrap();
    for f in frames {
        m.write(f).unwrap();
    }
    let times: BTreeSet<u64> = m.frames().map(|f| f.time).collect();
    assert_eq!(times, BTreeSet::from([2, 3, 4]));
}

#[test]
fn place_event_separates_burn_and_vanish_at_one_place() {
    // Standing still: one scene for 500 frames, a different one for 500 more.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = common::unit(&mut rng, common::DIM);
    let b = common::unit(&mut rng, common::DIM);
    let mut m = EpisodicMemory::new(MemoryVariant::PlaceEvent, MemoryConfig::with_capacity(5000)).unwrap();
    for t in 1..=1000u64 {
        let e = common::near(&mut rng, if t <= 500 { &a } else { &b }, 0.05);
        m.write(pemsim::memory::ExperienceFrame::new(e, pemsim::memory::Pose::new(0.0, 0.0, 0.0), t)).unwrap();
    }
    let events = m.event_clusters();
    assert!(events.len() >= 2, "got {} clusters", events.len());
}
