//! The three recall tasks under every memory variant.

use pemsim::bench::builtin_scenario;
use pemsim::episode::run_episode;
use pemsim::world::scenario::{MemoryChoice, MemoryTaskKind};

fn main() -> pemsim::Result<()> {
    let seeds = 20;
    print!("{:<14}", "task");
    for v in MemoryChoice::ALL {
        print!("{:>13}", v.name());
    }
    println!();
    for kind in MemoryTaskKind::ALL {
        let mut spec = builtin_scenario(&format!("memory_task_{}", kind.name())).expect("builtin")?;
        print!("{:<14}", kind.name());
        for v in MemoryChoice::ALL {
            spec.memory.variant = v;
            let mut ok = 0;
            for seed in 0..seeds {
                ok += run_episode(&spec, seed)?.all_solved() as u32;
            }
            print!("{:>13.2}", ok as f64 / seeds as f64);
        }
        println!();
    }
    Ok(())
}
