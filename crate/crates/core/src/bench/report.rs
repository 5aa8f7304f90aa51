use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::episode::EpisodeResult;
use crate::world::scenario::{ExplorePolicy, MemoryChoice, MemoryTaskKind};

pub const REPORT_SCHEMA: u32 = 1;

/// One line of `episodes.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeReport {
    pub schema: u32,
    pub episode: EpisodeResult,
}

/// Summary of all episodes sharing scenario, variant and policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupAggregate {
    pub scenario: String,
    pub variant: String,
    pub policy: String,
    pub episodes: usize,
    /// Fraction of episodes that solved every task.
    pub success_rate: f64,
    /// Fraction of scheduled tasks solved.
    pub task_success_rate: f64,
    pub mean_tasks_solved: f64,
    /// Mean duration of solved tasks at each position in the schedule.
    pub mean_duration: Vec<Option<f64>>,
    pub coverage: Option<f64>,
    pub revisit: Option<f64>,
    pub mean_frames: Option<f64>,
    pub mean_clusters: Option<f64>,
    pub mean_evictions: Option<f64>,
    pub clusters_scored_per_read: f64,
    pub frames_scored_per_read: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregate {
    pub schema: u32,
    pub groups: Vec<GroupAggregate>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn group(results: &[EpisodeResult]) -> GroupAggregate {
    let first = &results[0];
    let n = results.len() as f64;
    let positions = results.iter().map(|r| r.tasks.len()).max().unwrap_or(0);
    let mean_duration = (0..positions)
        .map(|i| mean(results.iter().filter_map(|r| r.tasks.get(i)).filter(|t| t.success).map(|t| t.duration as f64)))
        .collect();
    let scheduled: usize = results.iter().map(|r| r.tasks.len()).sum();
    let solved: usize = results.iter().map(|r| r.solved()).sum();
    let reads: u64 = results.iter().map(|r| r.reads.reads).sum();
    let per_read = |f: fn(&EpisodeResult) -> u64| {
        if reads == 0 {
            0.0
        } else {
            results.iter().map(f).sum::<u64>() as f64 / reads as f64
        }
    };
    GroupAggregate {
        scenario: first.scenario.clone(),
        variant: first.variant.clone(),
        policy: first.policy.clone(),
        episodes: results.len(),
        success_rate: results.iter().filter(|r| r.all_solved()).count() as f64 / n,
        task_success_rate: if scheduled == 0 { 0.0 } else { solved as f64 / scheduled as f64 },
        mean_tasks_solved: solved as f64 / n,
        mean_duration,
        coverage: mean(results.iter().filter_map(|r| r.coverage)),
        revisit: mean(results.iter().filter_map(|r| r.revisit)),
        mean_frames: mean(results.iter().filter_map(|r| r.memory.map(|m| m.frames as f64))),
        mean_clusters: mean(results.iter().filter_map(|r| r.memory.map(|m| m.clusters as f64))),
        mean_evictions: mean(results.iter().filter_map(|r| r.memory.map(|m| m.evictions as f64))),
        clusters_scored_per_read: per_read(|r| r.reads.clusters_scored),
        frames_scored_per_read: per_read(|r| r.reads.frames_scored),
    }
}

/// Groups by (scenario, variant, policy); a pure function of the episode lines.
pub fn aggregate(results: &[EpisodeResult]) -> Aggregate {
    let mut groups: BTreeMap<(String, String, String), Vec<EpisodeResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.scenario.clone(), r.variant.clone(), r.policy.clone())).or_default().push(r.clone());
    }
    Aggregate { schema: REPORT_SCHEMA, groups: groups.values().map(|g| group(g)).collect() }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_default()
}

impl Aggregate {
    /// Flat table, one row per group. Durations are `;`-separated by position.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "scenario,variant,policy,episodes,success_rate,task_success_rate,mean_tasks_solved,coverage,revisit,\
             mean_frames,mean_clusters,mean_evictions,clusters_scored_per_read,frames_scored_per_read,mean_duration\n",
        );
        for g in &self.groups {
            let durations: Vec<String> = g.mean_duration.iter().map(|d| opt(*d)).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{:.4},{:.4},{:.3},{},{},{},{},{},{:.1},{:.1},{}",
                g.scenario,
                g.variant,
                g.policy,
                g.episodes,
                g.success_rate,
                g.task_success_rate,
                g.mean_tasks_solved,
                opt(g.coverage),
                opt(g.revisit),
                opt(g.mean_frames),
                opt(g.mean_clusters),
                opt(g.mean_evictions),
                g.clusters_scored_per_read,
                g.frames_scored_per_read,
                durations.join(";")
            );
        }
        s
    }
}

/// First-A versus second-A durations over every A-B-A episode of a variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbaSpeedup {
    pub variant: String,
    pub episodes: usize,
    pub first_median: f64,
    pub second_median: f64,
    pub ratio: f64,
    /// Fraction of episodes that solved all three tasks.
    pub success_rate: f64,
}

/// Medians use every attempted task; unsolved ones count with the time
/// they consumed, so budget cut-offs are not silently dropped.
pub fn aba_speedup(results: &[EpisodeResult], variant: MemoryChoice) -> Option<AbaSpeedup> {
    let eps: Vec<&EpisodeResult> = results
        .iter()
        .filter(|r| r.scenario.starts_with("aba_sparse_") && r.variant == variant.name() && r.tasks.len() == 3)
        .collect();
    if eps.is_empty() {
        return None;
    }
    let durations = |i: usize| -> Vec<f64> {
        eps.iter().filter(|r| r.tasks[i].attempted).map(|r| r.tasks[i].duration as f64).collect()
    };
    let first_median = median(&durations(0))?;
    let second_median = median(&durations(2))?;
    Some(AbaSpeedup {
        variant: variant.name().into(),
        episodes: eps.len(),
        first_median,
        second_median,
        ratio: second_median / first_median,
        success_rate: eps.iter().filter(|r| r.all_solved()).count() as f64 / eps.len() as f64,
    })
}

/// Outcome of one ordering or invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.into(), passed, detail }
    }
}

fn success_rate(results: &[EpisodeResult], scenario: &str, variant: &str) -> Option<(f64, usize)> {
    let eps: Vec<&EpisodeResult> = results.iter().filter(|r| r.scenario == scenario && r.variant == variant).collect();
    (!eps.is_empty()).then(|| (eps.iter().filter(|r| r.all_solved()).count() as f64 / eps.len() as f64, eps.len()))
}

fn mean_solved(results: &[EpisodeResult], scenario: &str, variant: &str) -> Option<f64> {
    mean(results.iter().filter(|r| r.scenario == scenario && r.variant == variant).map(|r| r.solved() as f64))
}

/// Every check the given episodes have enough data for.
pub fn checks(results: &[EpisodeResult]) -> Vec<Check> {
    let mut out = Vec::new();

    let bad: Vec<String> = results
        .iter()
        .filter(|r| r.tasks.iter().any(|t| t.start + t.duration > r.clock || (t.success && !t.attempted)))
        .map(|r| format!("{}/{}/{}", r.scenario, r.variant, r.seed))
        .collect();
    out.push(Check::new("durations within clock", bad.is_empty(), format!("{} offending episodes {:?}", bad.len(), bad)));

    let cov = |p: ExplorePolicy| {
        let rs: Vec<&EpisodeResult> =
            results.iter().filter(|r| r.scenario == "exploration_only" && r.policy == p.name()).collect();
        Some((mean(rs.iter().filter_map(|r| r.coverage))?, mean(rs.iter().filter_map(|r| r.revisit))?))
    };
    if let (Some(cb), Some(rg), Some(mw)) =
        (cov(ExplorePolicy::CountBased), cov(ExplorePolicy::RandomGoal), cov(ExplorePolicy::MemorylessWalk))
    {
        out.push(Check::new(
            "exploration coverage ordering",
            cb.0 >= rg.0 + 10.0 && rg.0 >= mw.0 + 10.0,
            format!("count_based {:.1} random_goal {:.1} memoryless_walk {:.1}", cb.0, rg.0, mw.0),
        ));
        out.push(Check::new(
            "exploration revisit ordering",
            cb.1 < mw.1,
            format!("count_based {:.2} memoryless_walk {:.2}", cb.1, mw.1),
        ));
    }

    let pe = aba_speedup(results, MemoryChoice::PlaceEvent);
    let base = aba_speedup(results, MemoryChoice::None);
    if let Some(p) = &pe {
        out.push(Check::new(
            "aba speedup with memory",
            p.second_median < 0.5 * p.first_median,
            format!("median A {:.0} A' {:.0} ratio {:.3}", p.first_median, p.second_median, p.ratio),
        ));
    }
    if let Some(b) = &base {
        out.push(Check::new(
            "aba no speedup without memory",
            b.ratio >= 0.8,
            format!("median A {:.0} A' {:.0} ratio {:.3}", b.first_median, b.second_median, b.ratio),
        ));
    }
    if let (Some(p), Some(b)) = (&pe, &base) {
        out.push(Check::new(
            "aba success margin",
            p.success_rate >= b.success_rate + 0.2,
            format!("place_event {:.3} memoryless {:.3}", p.success_rate, b.success_rate),
        ));
    }

    for kind in MemoryTaskKind::ALL {
        let id = format!("memory_task_{}", kind.name());
        let failing = MemoryChoice::from_variant(Some(kind.failing_variant()));
        if let (Some((p, _)), Some((f, _))) =
            (success_rate(results, &id, MemoryChoice::PlaceEvent.name()), success_rate(results, &id, failing.name()))
        {
            out.push(Check::new(
                &format!("{id} ordering"),
                p >= 0.9 && p > f,
                format!("place_event {:.3} {} {:.3}", p, failing.name(), f),
            ));
        }
    }

    if let (Some(p), Some(e)) =
        (mean_solved(results, "long_instruction", "place_event"), mean_solved(results, "long_instruction", "event"))
    {
        out.push(Check::new("long_instruction ordering", p >= e, format!("place_event {p:.1} event {e:.1}")));
    }
    if let (Some(p), Some(pl)) =
        (mean_solved(results, "long_navigation", "place_event"), mean_solved(results, "long_navigation", "place"))
    {
        out.push(Check::new("long_navigation ordering", p >= pl, format!("place_event {p:.1} place {pl:.1}")));
        let lost = results
            .iter()
            .filter(|r| r.scenario == "long_navigation" && r.variant == "place")
            .flat_map(|r| &r.tasks)
            .filter(|t| t.goal_retained == Some(false))
            .count();
        out.push(Check::new("long_navigation place evicts goals", lost > 0, format!("{lost} goals already evicted")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ReadTally;
    use crate::episode::TaskResult;
    use crate::task::TaskKind;
    use crate::world::TaskTarget;

    fn ep(scenario: &str, variant: &str, durations: &[(u64, bool)]) -> EpisodeResult {
        let mut start = 0;
        let tasks = durations
            .iter()
            .enumerate()
            .map(|(i, &(d, ok))| {
                let t = TaskResult {
                    index: i,
                    target: TaskTarget::Resource(TaskKind::Water),
                    attempted: true,
                    success: ok,
                    start,
                    duration: d,
                    goal_retained: None,
                };
                start += d;
                t
            })
            .collect();
        EpisodeResult {
            scenario: scenario.into(),
            seed: 0,
            variant: variant.into(),
            policy: "count_based".into(),
            clock: start,
            tasks,
            coverage: None,
            revisit: None,
            memory: None,
            reads: ReadTally::default(),
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn aggregate_means() {
        let rs = vec![
            ep("aba_sparse_water_log", "place_event", &[(100, true), (10, true), (20, true)]),
            ep("aba_sparse_water_log", "place_event", &[(300, true), (30, false), (0, false)]),
        ];
        let a = aggregate(&rs);
        assert_eq!(a.groups.len(), 1);
        let g = &a.groups[0];
        assert_eq!(g.success_rate, 0.5);
        assert_eq!(g.mean_duration, vec![Some(200.0), Some(10.0), Some(20.0)]);
        assert!((g.task_success_rate - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_counts_failures_at_elapsed_time() {
        let rs = vec![
            ep("aba_sparse_water_log", "none", &[(100, true), (10, true), (500, false)]),
            ep("aba_sparse_water_log", "none", &[(300, true), (10, true), (40, true)]),
        ];
        let s = aba_speedup(&rs, MemoryChoice::None).unwrap();
        assert_eq!(s.first_median, 200.0);
        assert_eq!(s.second_median, 270.0);
        assert_eq!(s.success_rate, 0.5);
    }

    #[test]
    fn csv_has_one_row_per_group() {
        let rs = vec![ep("a", "fifo", &[(1, true)]), ep("b", "fifo", &[(1, true)])];
        assert_eq!(aggregate(&rs).to_csv().lines().count(), 3);
    }

    #[test]
    fn report_lines_reject_unknown_keys() {
        let line = serde_json::to_value(EpisodeReport { schema: 1, episode: ep("a", "fifo", &[(1, true)]) }).unwrap();
        let mut v = line.clone();
        v["extra"] = 1.into();
        assert!(serde_json::from_value::<EpisodeReport>(v).is_err());
        assert!(serde_json::from_value::<EpisodeReport>(line).is_ok());
    }
}
