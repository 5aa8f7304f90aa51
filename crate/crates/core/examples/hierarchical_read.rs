//! Two-stage retrieval: score cluster centers, open the top K, keep frames above h.

use pemsim::bench::synthetic_trajectory;
use pemsim::memory::{EpisodicMemory, MemoryConfig, MemoryVariant};

fn main() -> pemsim::Result<()> {
    let n = 20_000;
    let frames = synthetic_trajectory(n, 128, 4)?;
    let query = frames[12_345].embedding.clone();
    for v in [MemoryVariant::Fifo, MemoryVariant::Place, MemoryVariant::PlaceEvent] {
        let mut m = EpisodicMemory::new(v, MemoryConfig::with_capacity(n))?;
        for f in &frames {
            m.write(f.clone())?;
        }
        let hits = m.read_default(&query)?;
        let cost = m.query_cost();
        let best = hits.first().map(|c| format!("t={} score {:.1}", c.frame.time, c.score)).unwrap_or_default();
        println!(
            "{:<12} {:>5} hits, scored {:>5} centers + {:>6} frames, best {best}",
            v.name(),
            hits.len(),
            cost.clusters_scored,
            cost.frames_scored
        );
    }
    Ok(())
}
