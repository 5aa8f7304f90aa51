//! Feed the same stream to all four memory variants and compare what each keeps.

use pemsim::embedding::Embedding;
use pemsim::memory::{EpisodicMemory, ExperienceFrame, MemoryConfig, MemoryVariant, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pemsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 32;
    let scenes: Vec<Vec<f64>> = (0..4).map(|k| (0..dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect()).collect();
    // A rare scene early on at one spot, then a long dwell elsewhere.
    let mut frames = Vec::new();
    for t in 1..=3000u64 {
        let (scene, x) = if t <= 200 { (0, 0.0) } else if t <= 400 { (1, 30.0) } else { (2 + (t as usize / 700) % 2, 60.0) };
        let v: Vec<f64> = scenes[scene].iter().map(|s| s + rng.gen_range(-0.05..0.05)).collect();
        frames.push(ExperienceFrame::new(Embedding::from_f64(&v)?, Pose::new(x + rng.gen_range(-1.0..1.0), 0.0, 0.0), t));
    }
    let rare = Embedding::from_f64(&scenes[0])?;

    println!("{:<12} {:>7} {:>9} {:>9} {:>10} {:>12}", "variant", "frames", "clusters", "places", "evictions", "rare recall");
    for v in MemoryVariant::ALL {
        let mut m = EpisodicMemory::new(v, MemoryConfig::with_capacity(1000))?;
        for f in &frames {
            m.write(f.clone())?;
        }
        let s = m.stats();
        let hits = m.read_default(&rare)?.len();
        println!("{:<12} {:>7} {:>9} {:>9} {:>10} {:>12}", v.name(), s.frames, s.clusters, s.places, s.evictions, hits);
    }
    Ok(())
}
