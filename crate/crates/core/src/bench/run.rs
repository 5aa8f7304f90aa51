use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::report::{aggregate, EpisodeReport, REPORT_SCHEMA};
use crate::episode::{Episode, EpisodeResult};
use crate::error::{Error, Result};
use crate::memory::EpisodicMemory;
use crate::world::scenario::{ExplorePolicy, MemoryChoice, Scenario, ScenarioSpec};

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "PEMSIM_OUT_DIR";

/// Scenario files shipped with the crate, by name.
pub const BUILTIN_SCENARIOS: [(&str, &str); 10] = [
    ("aba_sparse", include_str!("../../scenarios/aba_sparse.toml")),
    ("exploration_only", include_str!("../../scenarios/exploration_only.toml")),
    ("memory_task_water", include_str!("../../scenarios/memory_task_water.toml")),
    ("memory_task_death_spot", include_str!("../../scenarios/memory_task_death_spot.toml")),
    ("memory_task_twin_houses", include_str!("../../scenarios/memory_task_twin_houses.toml")),
    ("random_plains", include_str!("../../scenarios/random_plains.toml")),
    ("long_instruction", include_str!("../../scenarios/long_instruction.toml")),
    ("long_navigation", include_str!("../../scenarios/long_navigation.toml")),
    ("long_instruction_smoke", include_str!("../../scenarios/long_instruction_smoke.toml")),
    ("long_navigation_smoke", include_str!("../../scenarios/long_navigation_smoke.toml")),
];

pub fn builtin_scenario(name: &str) -> Option<Result<ScenarioSpec>> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| ScenarioSpec::from_toml_str(s))
}

/// Loads a scenario from a file, falling back to a built-in name.
pub fn load_scenario(arg: &str) -> Result<ScenarioSpec> {
    let path = Path::new(arg);
    let spec = if path.exists() {
        ScenarioSpec::from_file(path)?
    } else {
        match builtin_scenario(arg) {
            Some(s) => s?,
            None => {
                return Err(Error::Config {
                    path: "scenario".into(),
                    message: format!("`{arg}` is neither a file nor a built-in scenario"),
                })
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub episodes: u64,
    pub seed_base: u64,
    /// Empty keeps the variant from the scenario file.
    pub variants: Vec<MemoryChoice>,
    pub jobs: usize,
    /// Directory for per-episode step logs; `None` disables logging.
    pub log_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { episodes: 1, seed_base: 0, variants: Vec::new(), jobs: 1, log_dir: None }
    }
}

/// One episode to run.
#[derive(Clone, Debug)]
pub struct Job {
    pub spec: ScenarioSpec,
    pub seed: u64,
}

impl Job {
    pub fn log_name(&self) -> String {
        format!(
            "{}_{}_{}_{}.jsonl",
            self.spec.scenario.id(),
            self.spec.memory.variant.name(),
            self.spec.explore.policy.name(),
            self.seed
        )
    }
}

/// Expands a spec into concrete episodes: all A-B-A pairs when no pair is
/// fixed, all policies for exploration-only runs, every requested variant.
pub fn plan_jobs(spec: &ScenarioSpec, opts: &RunOptions) -> Vec<Job> {
    let variants = if opts.variants.is_empty() { vec![spec.memory.variant] } else { opts.variants.clone() };
    let mut specs = Vec::new();
    for base in spec.expand_pairs() {
        for &v in &variants {
            if base.scenario == Scenario::ExplorationOnly {
                for p in ExplorePolicy::ALL {
                    let mut s = base.clone();
                    s.memory.variant = v;
                    s.explore.policy = p;
                    specs.push(s);
                }
            } else {
                let mut s = base.clone();
                s.memory.variant = v;
                specs.push(s);
            }
        }
    }
    let mut jobs = Vec::new();
    for s in specs {
        for k in 0..opts.episodes {
            jobs.push(Job { spec: s.clone(), seed: opts.seed_base + k });
        }
    }
    jobs
}

fn run_job(job: &Job, log_dir: Option<&Path>) -> Result<EpisodeResult> {
    let mut ep = Episode::new(&job.spec, job.seed)?;
    if let Some(dir) = log_dir {
        let f = File::create(dir.join(job.log_name()))?;
        ep = ep.with_log(Box::new(BufWriter::new(f)))?;
    }
    Ok(ep.finish()?.0)
}

/// Runs jobs on `opts.jobs` threads; results keep job order.
pub fn run_fleet(jobs: &[Job], opts: &RunOptions) -> Result<Vec<EpisodeResult>> {
    if let Some(dir) = &opts.log_dir {
        fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter { name: "jobs", reason: e.to_string() })?;
    let log_dir = opts.log_dir.as_deref();
    pool.install(|| jobs.par_iter().map(|j| run_job(j, log_dir)).collect())
}

/// Writes `episodes.jsonl`, `aggregate.json` and `table.csv` into `dir`.
pub fn write_outputs(dir: &Path, results: &[EpisodeResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("episodes.jsonl"))?);
    for r in results {
        let line = serde_json::to_string(&EpisodeReport { schema: REPORT_SCHEMA, episode: r.clone() })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    let agg = aggregate(results);
    fs::write(dir.join("aggregate.json"), serde_json::to_string_pretty(&agg)? + "\n")?;
    fs::write(dir.join("table.csv"), agg.to_csv())?;
    Ok(())
}

/// Reads an `episodes.jsonl` file, rejecting unknown schemas and keys.
pub fn read_reports(path: &Path) -> Result<Vec<EpisodeResult>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rep: EpisodeReport =
            serde_json::from_str(&line).map_err(|e| Error::Malformed { line: i + 1, message: e.to_string() })?;
        if rep.schema != REPORT_SCHEMA {
            return Err(Error::Malformed { line: i + 1, message: format!("unsupported schema {}", rep.schema) });
        }
        out.push(rep.episode);
    }
    Ok(out)
}

/// Reloads a snapshot and checks that it serializes back to the same bytes.
pub fn verify_snapshot(text: &str) -> Result<EpisodicMemory> {
    let memory = EpisodicMemory::from_snapshot_str(text)?;
    let again = memory.to_snapshot_string();
    if let Some((i, (a, b))) = text.lines().zip(again.lines()).enumerate().find(|(_, (a, b))| a != b) {
        return Err(Error::Divergence { line: i + 1, detail: format!("expected {b}, found {a}") });
    }
    if text.lines().count() != again.lines().count() || text.ends_with('\n') != again.ends_with('\n') {
        return Err(Error::Divergence { line: text.lines().count().min(again.lines().count()) + 1, detail: "length differs".into() });
    }
    Ok(memory)
}
