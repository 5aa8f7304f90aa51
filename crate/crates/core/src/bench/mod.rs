//! Fleet runner, aggregate reports, ordering checks and the memory query microbenchmark.

mod query;
mod report;
mod run;

pub use query::{bench_query, synthetic_trajectory, QueryBenchConfig, QueryBenchResult, QuerySizeResult};
pub use report::{
    aba_speedup, aggregate, checks, median, Aggregate, AbaSpeedup, Check, EpisodeReport, GroupAggregate,
    REPORT_SCHEMA,
};
pub use run::{
    builtin_scenario, load_scenario, plan_jobs, read_reports, run_fleet, verify_snapshot, write_outputs, Job, RunOptions,
    BUILTIN_SCENARIOS, OUT_DIR_ENV,
};
