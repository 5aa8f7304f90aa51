use std::io::Cursor;

use pemsim::bench::{builtin_scenario, plan_jobs, read_reports, run_fleet, write_outputs, RunOptions};
use pemsim::episode::{replay, Episode, SharedBuf};
use pemsim::error::Error;
use pemsim::world::scenario::{MemoryChoice, ScenarioSpec};

fn spec(name: &str) -> ScenarioSpec {
    builtin_scenario(name).unwrap().unwrap().expand_pairs().swap_remove(0)
}

fn logged(spec: &ScenarioSpec, seed: u64) -> String {
    let buf = SharedBuf::default();
    Episode::new(spec, seed).unwrap().with_log(Box::new(buf.clone())).unwrap().finish().unwrap();
    String::from_utf8(buf.take()).unwrap()
}

#[test]
fn same_seed_same_log_bytes() {
    for name in ["aba_sparse", "memory_task_water", "exploration_only"] {
        let s = spec(name);
        assert_eq!(logged(&s, 5), logged(&s, 5), "{name}");
        assert_ne!(logged(&s, 5), logged(&s, 6), "{name}");
    }
}

#[test]
fn replay_accepts_its_own_log() {
    let log = logged(&spec("memory_task_twin_houses"), 2);
    let n = replay(Cursor::new(log.as_bytes())).unwrap();
    assert_eq!(n, log.lines().count());
}

#[test]
fn replay_reports_first_divergent_line() {
    let log = logged(&spec("aba_sparse"), 1);
    let mut lines: Vec<String> = log.lines().map(String::from).collect();
    let k = lines.len() / 2;
    lines[k] = lines[k].replacen("\"t\":", "\"t\":9", 1);
    let bad = lines.join("\n") + "\n";
    match replay(Cursor::new(bad.as_bytes())) {
        Err(Error::Divergence { line, .. }) => assert_eq!(line, k + 1),
        other => panic!("expected divergence, got {other:?}"),
    }
    let truncated = log.lines().take(k).collect::<Vec<_>>().join("\n");
    assert!(matches!(replay(Cursor::new(truncated.as_bytes())), Err(Error::Divergence { .. })));
}

#[test]
fn fleet_is_independent_of_thread_count() {
    let s = builtin_scenario("aba_sparse").unwrap().unwrap();
    let opts = RunOptions { episodes: 2, variants: vec![MemoryChoice::PlaceEvent, MemoryChoice::None], ..Default::default() };
    let jobs: Vec<_> = plan_jobs(&s, &opts).into_iter().take(12).collect();
    let one = run_fleet(&jobs, &opts).unwrap();
    let three = run_fleet(&jobs, &RunOptions { jobs: 3, ..opts.clone() }).unwrap();
    assert_eq!(one, three);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(a.path(), &one).unwrap();
    write_outputs(b.path(), &three).unwrap();
    for f in ["episodes.jsonl", "aggregate.json", "table.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_reports(&a.path().join("episodes.jsonl")).unwrap(), one);
}
