//! One A-B-A episode with and without memory: the second A should be much faster with it.

use pemsim::bench::builtin_scenario;
use pemsim::episode::run_episode;
use pemsim::task::TaskKind;
use pemsim::world::scenario::{MemoryChoice, Scenario};

fn main() -> pemsim::Result<()> {
    let mut spec = builtin_scenario("aba_sparse").expect("builtin")?;
    spec.scenario = Scenario::AbaSparse { a: Some(TaskKind::Water), b: Some(TaskKind::Log) };
    for variant in [MemoryChoice::PlaceEvent, MemoryChoice::None] {
        spec.memory.variant = variant;
        for seed in 0..3 {
            let r = run_episode(&spec, seed)?;
            let tasks: Vec<String> = r
                .tasks
                .iter()
                .map(|t| format!("{}:{}{}", t.label(), t.duration, if t.success { "" } else { "(failed)" }))
                .collect();
            println!("{:<12} seed {seed}: {}", variant.name(), tasks.join("  "));
        }
    }
    Ok(())
}
