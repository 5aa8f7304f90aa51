//! Run the three exploration policies on the barrier map and compare coverage.

use pemsim::bench::builtin_scenario;
use pemsim::episode::run_episode;
use pemsim::world::scenario::ExplorePolicy;

fn main() -> pemsim::Result<()> {
    let mut spec = builtin_scenario("exploration_only").expect("builtin")?;
    let seeds = 10;
    for policy in ExplorePolicy::ALL {
        spec.explore.policy = policy;
        let (mut cov, mut rev) = (0.0, 0.0);
        for seed in 0..seeds {
            let r = run_episode(&spec, seed)?;
            cov += r.coverage.unwrap_or(0.0);
            rev += r.revisit.unwrap_or(0.0);
        }
        println!("{:<16} coverage {:5.1}%  revisits {:.2}", policy.name(), cov / seeds as f64, rev / seeds as f64);
    }
    Ok(())
}
