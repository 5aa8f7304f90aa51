//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --release --test acceptance -- 1 3`.

mod common;

use std::collections::BTreeSet;
use std::io::Cursor;
use std::time::Instant;

use pemsim::bench::{
    aba_speedup, aggregate, bench_query, builtin_scenario, plan_jobs, run_fleet, verify_snapshot, QueryBenchConfig,
    RunOptions,
};
use pemsim::clustering::{dp_means, merge_clusters, penalty_for_merge_score};
use pemsim::embedding::{alignment_score, Embedding};
use pemsim::episode::{replay, Episode, EpisodeResult, SharedBuf};
use pemsim::error::Error;
use pemsim::memory::{EpisodicMemory, MemoryConfig, MemoryVariant};
use pemsim::navigation::{dist, plan, within_success_radius, RewardTracker};
use pemsim::world::layout::TourLeg;
use pemsim::world::scenario::{MemoryChoice, MemoryTaskKind, ScenarioSpec, TaskTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 30;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn builtin(name: &str) -> ScenarioSpec {
    builtin_scenario(name).expect("builtin").expect("parses")
}

fn fleet(spec: &ScenarioSpec, episodes: u64, variants: &[MemoryChoice]) -> Vec<EpisodeResult> {
    let opts = RunOptions { episodes, seed_base: 0, variants: variants.to_vec(), jobs: jobs(), log_dir: None };
    run_fleet(&plan_jobs(spec, &opts), &opts).expect("fleet runs")
}

fn cluster_count(m: &EpisodicMemory) -> usize {
    match m.variant() {
        MemoryVariant::Fifo => 1,
        MemoryVariant::Place => m.place_clusters().len(),
        MemoryVariant::Event | MemoryVariant::PlaceEvent => m.event_clusters().len(),
    }
}

fn retrieval_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut skipped, mut mismatches) = (0, 0, 0);
    while checked < 500 {
        let v = MemoryVariant::ALL[rng.gen_range(0..4)];
        let n = rng.gen_range(1..=500);
        let frames = common::random_stream(rng.gen(), n, rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(0.05..0.6));
        let cfg = MemoryConfig {
            capacity: rng.gen_range(n / 2 + 1..=n + 50),
            search_buffer: false,
            cluster_seed: rng.gen(),
            ..MemoryConfig::default()
        };
        let h = cfg.task_threshold;
        let mut m = EpisodicMemory::new(v, cfg).unwrap();
        for f in &frames {
            m.write(f.clone()).unwrap();
        }
        if cluster_count(&m) > K {
            skipped += 1;
            continue;
        }
        checked += 1;
        let stored = &frames[rng.gen_range(0..frames.len())].embedding;
        let random = Embedding::from_f64(&common::unit(&mut rng, common::DIM)).unwrap();
        for q in [stored.clone(), stored.negated(), random] {
            let got: BTreeSet<u64> = m.read_default(&q).unwrap().iter().map(|c| c.frame.time).collect();
            let want: BTreeSet<u64> =
                m.clustered_frames().filter(|f| alignment_score(&q, &f.embedding).unwrap() > h).map(|f| f.time).collect();
            if got != want {
                mismatches += 1;
            }
        }
    }
    Outcome::new(mismatches == 0, format!("{checked} memories x 3 queries, {mismatches} mismatches, {skipped} skipped (> K clusters)"))
}

fn query_complexity() -> Outcome {
    let cfg = QueryBenchConfig {
        variants: vec![MemoryVariant::Fifo, MemoryVariant::PlaceEvent],
        sizes: vec![100_000],
        queries: 300,
        warmup: 20,
        ..Default::default()
    };
    let res = bench_query(&cfg).unwrap();
    let fifo = &res[0].sizes[0];
    let pe = &res[1].sizes[0];
    let fifo_ok = fifo.frames == 100_000 && fifo.min_total_scored == 100_000 && fifo.max_total_scored == 100_000;
    let lo = pe.clusters + K;
    let hi = pe.clusters + K * pe.max_cluster_size;
    let pe_ok = pe.min_total_scored >= lo && pe.max_total_scored <= hi;
    let ratio = fifo.median_ms / pe.median_ms;
    Outcome::new(
        fifo_ok && pe_ok && ratio >= 10.0,
        format!(
            "fifo scored {}..{}, place_event scored {}..{} within [{lo}, {hi}], median {:.3} ms vs {:.3} ms, ratio {ratio:.1}",
            fifo.min_total_scored, fifo.max_total_scored, pe.min_total_scored, pe.max_total_scored, fifo.median_ms, pe.median_ms
        ),
    )
}

fn eviction_invariants() -> Outcome {
    let cap = 1000;
    let mut violations = 0;
    let mut evictions = 0;
    for (i, v) in MemoryVariant::ALL.into_iter().enumerate() {
        let frames = common::random_stream(40 + i as u64, 10_000, 8, 12, 0.3);
        let mut m = EpisodicMemory::new(v, MemoryConfig { capacity: cap, cluster_seed: 7, ..MemoryConfig::default() }).unwrap();
        for f in frames {
            m.insert(f).unwrap();
            let units = m.eviction_units();
            let evicted = m.enforce_capacity().unwrap();
            if m.len() > cap {
                violations += 1;
            }
            if let Some(t) = evicted {
                evictions += 1;
                let largest = units.iter().map(|u| u.len).max().unwrap();
                let first = units.iter().filter(|u| u.len == largest).min_by_key(|u| u.id).unwrap();
                if t != first.oldest_time {
                    violations += 1;
                }
            }
        }
    }
    Outcome::new(violations == 0, format!("4 variants x 10000 writes, {evictions} evictions, {violations} violations"))
}

fn memory_spec(kind: MemoryTaskKind, v: MemoryVariant) -> ScenarioSpec {
    let mut s = builtin(&format!("memory_task_{}", kind.name()));
    s.memory.variant = MemoryChoice::from_variant(Some(v));
    s
}

/// Stored frames from a landmark's stay that score above h against its goal
/// frame and lie within the success radius of where it was seen. Frames from
/// walking past the landmark afterwards do not count.
fn retained(ep: &Episode, landmark: usize, offset: u64) -> usize {
    let goal = ep.goal_frame(landmark, offset).expect("tour captured the goal frame").clone();
    let arrived = ep.arrival(landmark).expect("tour reached the landmark");
    let until = ep
        .world()
        .info
        .tour
        .iter()
        .find_map(|leg| match leg {
            TourLeg::Stay { until, landmark: Some(l), .. } if *l == landmark => Some(*until),
            _ => None,
        })
        .expect("landmark has a stay");
    let m = ep.memory().expect("memory agent");
    let h = m.config().task_threshold;
    m.frames()
        .filter(|f| f.time >= arrived && f.time < until)
        .filter(|f| alignment_score(&goal.embedding, &f.embedding).unwrap() > h)
        .filter(|f| dist(ep.world().to_absolute(f.pose.xy()), goal.position) <= 3.0)
        .count()
}

fn memory_tasks() -> Outcome {
    use MemoryVariant::*;
    let mut ok = true;
    let mut notes = Vec::new();
    for seed in 0..30 {
        for v in MemoryVariant::ALL {
            let mut counts = Vec::new();
            for kind in MemoryTaskKind::ALL {
                let mut ep = Episode::new(&memory_spec(kind, v), seed).unwrap();
                ep.run_exploration().unwrap();
                let off = kind.goal_offset();
                let c = match kind {
                    MemoryTaskKind::TwinHouses => (retained(&ep, 0, off), retained(&ep, 1, off)),
                    _ => (retained(&ep, 0, off), 0),
                };
                counts.push(c);
            }
            let (water, death, twin) = (counts[0].0, counts[1].0, counts[2]);
            let want_water = v != Fifo;
            let want_death = matches!(v, Event | PlaceEvent);
            let want_both = matches!(v, Place | PlaceEvent);
            let good = (water > 0) == want_water
                && (death > 0) == want_death
                && if want_both { twin.0 > 0 && twin.1 > 0 } else if v == Event { (twin.0 > 0) != (twin.1 > 0) } else { true };
            if !good {
                ok = false;
                notes.push(format!("seed {seed} {}: water {water} death {death} twin {twin:?}", v.name()));
            }
        }
    }
    let mut rates = Vec::new();
    for kind in MemoryTaskKind::ALL {
        let spec = memory_spec(kind, PlaceEvent);
        let fail = MemoryChoice::from_variant(Some(kind.failing_variant()));
        let res = fleet(&spec, 100, &[MemoryChoice::PlaceEvent, fail]);
        let rate = |c: MemoryChoice| {
            let r: Vec<_> = res.iter().filter(|e| e.variant == c.name()).collect();
            r.iter().filter(|e| e.all_solved()).count() as f64 / r.len() as f64
        };
        let (pe, other) = (rate(MemoryChoice::PlaceEvent), rate(fail));
        ok &= pe >= 0.9 && pe > other;
        rates.push(format!("{} place_event {pe:.2} vs {} {other:.2}", kind.name(), fail.name()));
    }
    let storage = if notes.is_empty() { "stay-window storage ok for 30 seeds x 4 variants".to_string() } else { notes.join("; ") };
    Outcome::new(ok, format!("{storage}; {}", rates.join(", ")))
}

fn exploration() -> Outcome {
    let res = fleet(&builtin("exploration_only"), 100, &[]);
    let agg = aggregate(&res);
    let get = |p: &str| agg.groups.iter().find(|g| g.policy == p).expect("policy group");
    let (cb, rg, walk) = (get("count_based"), get("random_goal"), get("memoryless_walk"));
    let cov = |g: &pemsim::bench::GroupAggregate| g.coverage.unwrap_or(0.0);
    let rev = |g: &pemsim::bench::GroupAggregate| g.revisit.unwrap_or(f64::INFINITY);
    let ok = cov(cb) - cov(rg) >= 10.0 && cov(rg) - cov(walk) >= 10.0 && rev(cb) < rev(walk);
    Outcome::new(
        ok,
        format!(
            "coverage {:.1} / {:.1} / {:.1}, revisit {:.2} / {:.2} / {:.2} (count_based / random_goal / walk, {} seeds)",
            cov(cb), cov(rg), cov(walk), rev(cb), rev(rg), rev(walk), cb.episodes
        ),
    )
}

fn aba() -> Outcome {
    let res = fleet(&builtin("aba_sparse"), 50, &[MemoryChoice::PlaceEvent, MemoryChoice::None]);
    let pe = aba_speedup(&res, MemoryChoice::PlaceEvent).expect("place_event runs");
    let none = aba_speedup(&res, MemoryChoice::None).expect("memoryless runs");
    let margin = pe.success_rate - none.success_rate;
    Outcome::new(
        pe.ratio < 0.5 && none.ratio >= 0.8 && margin >= 0.2,
        format!(
            "A'/A median ratio place_event {:.2} (< 0.5), memoryless {:.2} (>= 0.8); success {:.3} vs {:.3} over {} episodes each",
            pe.ratio, none.ratio, pe.success_rate, none.success_rate, pe.episodes
        ),
    )
}

fn long_horizon() -> Outcome {
    let mean_solved = |res: &[EpisodeResult], v: MemoryChoice| {
        let r: Vec<_> = res.iter().filter(|e| e.variant == v.name()).collect();
        r.iter().map(|e| e.solved() as f64).sum::<f64>() / r.len() as f64
    };
    let li = fleet(&builtin("long_instruction"), 5, &[MemoryChoice::PlaceEvent, MemoryChoice::Event]);
    let (li_pe, li_ev) = (mean_solved(&li, MemoryChoice::PlaceEvent), mean_solved(&li, MemoryChoice::Event));
    let ln = fleet(&builtin("long_navigation"), 5, &[MemoryChoice::PlaceEvent, MemoryChoice::Place]);
    let (ln_pe, ln_pl) = (mean_solved(&ln, MemoryChoice::PlaceEvent), mean_solved(&ln, MemoryChoice::Place));
    let tour = pemsim::world::scenario::exploration_phase(&builtin("long_navigation"));
    let lost: Vec<u64> = ln
        .iter()
        .filter(|e| e.variant == "place")
        .flat_map(|e| &e.tasks)
        .filter(|t| t.goal_retained == Some(false))
        .filter_map(|t| match t.target {
            TaskTarget::ImageGoal { frame_time, .. } => Some(frame_time),
            _ => None,
        })
        .collect();
    let evicted_early = !lost.is_empty() && lost.iter().all(|&t| t <= tour);
    Outcome::new(
        li_pe >= li_ev && ln_pe >= ln_pl && evicted_early,
        format!(
            "long_instruction solved {li_pe:.1} vs event {li_ev:.1}; long_navigation solved {ln_pe:.1} vs place {ln_pl:.1}; place lost {} tour-phase goal frames",
            lost.len()
        ),
    )
}

fn logged(spec: &ScenarioSpec, seed: u64) -> (String, Option<EpisodicMemory>) {
    let buf = SharedBuf::default();
    let (_, m) = Episode::new(spec, seed).unwrap().with_log(Box::new(buf.clone())).unwrap().finish().unwrap();
    (String::from_utf8(buf.take()).unwrap(), m)
}

fn determinism() -> Outcome {
    let mut problems = Vec::new();
    let mut lines = 0;
    let names = ["aba_sparse", "exploration_only", "memory_task_water", "memory_task_death_spot", "memory_task_twin_houses", "random_plains", "long_instruction_smoke", "long_navigation_smoke"];
    for (i, name) in names.iter().enumerate() {
        let mut spec = builtin(name).expand_pairs().swap_remove(0);
        spec.memory.variant = [MemoryChoice::PlaceEvent, MemoryChoice::Place, MemoryChoice::Event, MemoryChoice::Fifo][i % 4];
        let (log, memory) = logged(&spec, 3);
        match replay(Cursor::new(log.as_bytes())) {
            Ok(n) => lines += n,
            Err(e) => problems.push(format!("{name}: {e}")),
        }
        let mut corrupt: Vec<&str> = log.lines().collect();
        let k = corrupt.len() / 3;
        let bad = corrupt[k].replacen("\"t\":", "\"t\":1", 1);
        corrupt[k] = &bad;
        match replay(Cursor::new(corrupt.join("\n").into_bytes())) {
            Err(Error::Divergence { line, .. }) if line == k + 1 => {}
            other => problems.push(format!("{name}: corrupted line {} gave {other:?}", k + 1)),
        }
        if let Some(m) = memory {
            let text = m.to_snapshot_string();
            match verify_snapshot(&text) {
                Ok(back) if back.to_snapshot_string() == text => {}
                Ok(_) => problems.push(format!("{name}: snapshot not byte-stable")),
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
    }
    let detail = if problems.is_empty() { format!("{} logs, {lines} lines replayed, snapshots byte-stable", names.len()) } else { problems.join("; ") };
    Outcome::new(problems.is_empty(), detail)
}

fn clustering() -> Outcome {
    let mut bad = Vec::new();
    let e = Embedding::from_f64(&[0.2, 0.7, -0.1, 0.4]).unwrap();
    let one = dp_means(&vec![e; 50], penalty_for_merge_score(73.5), 5).unwrap();
    if one.len() != 1 {
        bad.push(format!("identical points gave {} clusters", one.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let n = rng.gen_range(3..60);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for g in 0..2 {
            let mut base = vec![0.0; common::DIM];
            base[g] = 1.0;
            for _ in 0..n {
                pts.push(common::near(&mut rng, &base, 0.05));
                labels.push(g);
            }
        }
        let r = merge_clusters(dp_means(&pts, penalty_for_merge_score(73.5), 5).unwrap(), 73.5).unwrap();
        let same = (0..pts.len()).all(|i| (0..pts.len()).all(|j| (labels[i] == labels[j]) == (r.assignments[i] == r.assignments[j])));
        if r.len() != 2 || !same {
            bad.push(format!("trial {trial}: {} clusters", r.len()));
        }
        let noisy: Vec<Embedding> = (0..rng.gen_range(10..200)).map(|_| Embedding::from_f64(&common::unit(&mut rng, 6)).unwrap()).collect();
        let c = rng.gen_range(20.0..90.0);
        let m = merge_clusters(dp_means(&noisy, penalty_for_merge_score(c), 5).unwrap(), c).unwrap();
        for a in 0..m.len() {
            for b in a + 1..m.len() {
                if alignment_score(&m.centers[a], &m.centers[b]).unwrap() > c {
                    bad.push(format!("trial {trial}: centers {a},{b} above {c:.1} after merge"));
                }
            }
        }
    }
    let detail = if bad.is_empty() { "one cluster for identical points; 100 two-group trials exact; 100 merge fixpoints".to_string() } else { bad.join("; ") };
    Outcome::new(bad.is_empty(), detail)
}

fn navigation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = Vec::new();
    let mut reachable = 0;
    for m in 0..200 {
        let (w, h) = (rng.gen_range(4..40), rng.gen_range(4..40));
        let p = rng.gen_range(0.0..0.35);
        let mut g = common::random_grid(&mut rng, w, h, p);
        let s = (rng.gen_range(0..w), rng.gen_range(0..h));
        let t = (rng.gen_range(0..w), rng.gen_range(0..h));
        g.set(s, pemsim::navigation::Terrain::Flat);
        let want = common::dijkstra(&g, s, t);
        let got = plan(&g, s, t).unwrap().cost();
        match (want, got) {
            (Some(a), Some(b)) if (a - b).abs() < 1e-9 => reachable += 1,
            (None, None) => {}
            (a, b) => bad.push(format!("map {m}: oracle {a:?} plan {b:?}")),
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let goal = (rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        let start = (rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        let mut tr = RewardTracker::new(start, goal);
        let mut p = start;
        for _ in 0..rng.gen_range(1..500) {
            let q = (p.0 + rng.gen_range(-1.5..1.5), p.1 + rng.gen_range(-1.5..1.5));
            tr.step(p, q);
            p = q;
        }
        let want = (start.0 - goal.0).hypot(start.1 - goal.1) - (p.0 - goal.0).hypot(p.1 - goal.1);
        worst = worst.max((tr.distance_reward - want).abs());
    }
    if worst >= 1e-9 {
        bad.push(format!("telescoping error {worst:e}"));
    }
    if !within_success_radius((3.0, 0.0), (0.0, 0.0)) || within_success_radius((3.0 + 1e-9, 0.0), (0.0, 0.0)) {
        bad.push("success boundary not inclusive at 3.0".into());
    }
    let detail = if bad.is_empty() {
        format!("200 maps match the oracle ({reachable} reachable); telescoping error {worst:.1e}; boundary inclusive at 3.0")
    } else {
        bad.join("; ")
    };
    Outcome::new(bad.is_empty(), detail)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "retrieval oracle equivalence", retrieval_equivalence),
        (2, "query complexity", query_complexity),
        (3, "eviction invariants", eviction_invariants),
        (4, "memory-task retention orderings", memory_tasks),
        (5, "exploration orderings", exploration),
        (6, "A-B-A speedup", aba),
        (7, "long-horizon orderings", long_horizon),
        (8, "determinism", determinism),
        (9, "clustering sanity", clustering),
        (10, "navigation contract", navigation),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        println!("criterion {n:>2} {:<4} {name} [{:.1}s]: {}", if o.passed { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
