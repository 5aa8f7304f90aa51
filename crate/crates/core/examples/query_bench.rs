//! Small version of the read-latency benchmark; pass a frame count to scale it up.

use pemsim::bench::{bench_query, QueryBenchConfig};

fn main() -> pemsim::Result<()> {
    let frames = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let cfg = QueryBenchConfig { sizes: vec![frames], queries: 200, warmup: 10, ..Default::default() };
    for r in bench_query(&cfg)? {
        for s in &r.sizes {
            println!(
                "{:<12} {:>7} frames {:>5} clusters  median {:>8.3} ms  scored {:>6.0} centers + {:>7.0} frames",
                r.variant, s.frames, s.clusters, s.median_ms, s.median_clusters_scored, s.median_frames_scored
            );
        }
    }
    Ok(())
}
