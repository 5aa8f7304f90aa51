use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pemsim::bench::{
    aggregate, bench_query, checks, load_scenario, plan_jobs, read_reports, run_fleet, verify_snapshot,
    write_outputs, Aggregate, QueryBenchConfig, RunOptions,
};
use pemsim::episode::{replay, Episode};
use pemsim::memory::MemoryVariant;
use pemsim::world::scenario::MemoryChoice;

#[derive(Parser)]
#[command(name = "pemsim", version, about = "Run memory-agent scenarios and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Out {
    /// Output directory.
    #[arg(long, env = "PEMSIM_OUT_DIR", default_value = "pemsim-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario over many seeds and write episode lines plus aggregates.
    Run {
        /// Scenario file or built-in name.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        episodes: u64,
        /// First seed; defaults to the scenario's `seed`.
        #[arg(long)]
        seed_base: Option<u64>,
        /// Comma-separated memory variants (none, fifo, place, event, place_event).
        #[arg(long, value_delimiter = ',', value_parser = MemoryChoice::parse)]
        variant: Vec<MemoryChoice>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write one step log per episode under `<out>/logs`.
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Time memory reads on a synthetic trajectory.
    BenchQuery {
        /// Comma-separated trajectory lengths.
        #[arg(long, value_delimiter = ',', default_value = "100000")]
        frames: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variant: Vec<MemoryVariant>,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Write the memory left by one episode, or verify an existing snapshot file.
    Snapshot {
        #[arg(long, required_unless_present = "file")]
        scenario: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, value_parser = MemoryChoice::parse)]
        variant: Option<MemoryChoice>,
        /// Verify this snapshot instead of producing one.
        #[arg(long)]
        file: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Re-run logged episodes and compare every line.
    Replay {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Recompute aggregates from `episodes.jsonl` and optionally check orderings.
    Report {
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        out: Out,
    },
}

fn parse_variant(s: &str) -> Result<MemoryVariant, String> {
    MemoryChoice::parse(s)?.variant().ok_or_else(|| "bench-query needs a memory variant".to_string())
}

fn print_table(agg: &Aggregate) {
    println!("{:<32} {:<12} {:<16} {:>5} {:>8} {:>8} {:>8}", "scenario", "variant", "policy", "eps", "success", "solved", "cover");
    for g in &agg.groups {
        println!(
            "{:<32} {:<12} {:<16} {:>5} {:>8.3} {:>8.1} {:>8}",
            g.scenario,
            g.variant,
            g.policy,
            g.episodes,
            g.success_rate,
            g.mean_tasks_solved,
            g.coverage.map(|c| format!("{c:.1}")).unwrap_or_default()
        );
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> pemsim::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { scenario, episodes, seed_base, variant, jobs, log, out } => {
            let spec = load_scenario(&scenario)?;
            let opts = RunOptions {
                episodes,
                seed_base: seed_base.unwrap_or(spec.seed),
                variants: variant,
                jobs,
                log_dir: log.then(|| out.out.join("logs")),
            };
            let plan = plan_jobs(&spec, &opts);
            eprintln!("running {} episodes on {} threads", plan.len(), jobs.max(1));
            let results = run_fleet(&plan, &opts)?;
            write_outputs(&out.out, &results)?;
            print_table(&aggregate(&results));
            eprintln!("wrote {}", out.out.display());
        }
        Cmd::BenchQuery { frames, queries, warmup, variant, seed_base, out } => {
            let mut cfg = QueryBenchConfig { sizes: frames, queries, warmup, seed: seed_base, ..Default::default() };
            if !variant.is_empty() {
                cfg.variants = variant;
            }
            let res = bench_query(&cfg)?;
            println!("{:<12} {:>8} {:>8} {:>10} {:>10} {:>10}", "variant", "frames", "clusters", "median_ms", "centers", "scored");
            for r in &res {
                for s in &r.sizes {
                    println!(
                        "{:<12} {:>8} {:>8} {:>10.3} {:>10.0} {:>10.0}",
                        r.variant, s.frames, s.clusters, s.median_ms, s.median_clusters_scored, s.median_frames_scored
                    );
                }
            }
            fs::create_dir_all(&out.out)?;
            fs::write(out.out.join("query_bench.json"), serde_json::to_string_pretty(&res)? + "\n")?;
        }
        Cmd::Snapshot { scenario, seed_base, variant, file, out } => {
            if let Some(path) = file {
                let m = verify_snapshot(&fs::read_to_string(&path)?)?;
                println!("OK {} ({} frames)", path.display(), m.len());
                return Ok(ExitCode::SUCCESS);
            }
            let mut spec = load_scenario(scenario.as_deref().unwrap_or_default())?;
            if let Some(v) = variant {
                spec.memory.variant = v;
            }
            let spec = spec.expand_pairs().swap_remove(0);
            let (_, memory) = Episode::new(&spec, seed_base)?.finish()?;
            let Some(memory) = memory else {
                eprintln!("the memoryless agent has nothing to snapshot");
                return Ok(ExitCode::from(2));
            };
            let text = memory.to_snapshot_string();
            verify_snapshot(&text)?;
            fs::create_dir_all(&out.out)?;
            let path = out.out.join(format!("{}_{}_{}.snapshot.json", spec.scenario.id(), spec.memory.variant.name(), seed_base));
            fs::write(&path, &text)?;
            println!("OK {} ({} frames)", path.display(), memory.len());
        }
        Cmd::Replay { logs } => {
            for path in logs {
                let n = replay(BufReader::new(fs::File::open(&path)?))?;
                println!("OK {} ({n} lines)", path.display());
            }
        }
        Cmd::Report { check, out } => {
            let results = read_reports(&out.out.join("episodes.jsonl"))?;
            let agg = aggregate(&results);
            print_table(&agg);
            if check {
                let mut ok = true;
                let stored_path = out.out.join("aggregate.json");
                if stored_path.exists() {
                    let stored: Aggregate = serde_json::from_str(&fs::read_to_string(&stored_path)?)?;
                    let same = stored == agg;
                    ok &= same;
                    println!("{} aggregate recomputes from episode lines", if same { "PASS" } else { "FAIL" });
                }
                for c in checks(&results) {
                    ok &= c.passed;
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if !ok {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
