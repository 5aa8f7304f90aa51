//! Encode a few symbolic scenes and task prompts, then score them against each other.

use pemsim::embedding::{alignment_score, EncoderOracle, FeatureKind, OracleConfig, PromptRole, SceneDescriptor, VisibleFeature};
use pemsim::navigation::Terrain;
use pemsim::task::TaskKind;

fn scene(features: &[(FeatureKind, i32, i32)]) -> SceneDescriptor {
    let mut terrain = [0u16; Terrain::COUNT];
    terrain[Terrain::Grass.index()] = 40;
    let mut visible: Vec<VisibleFeature> = features.iter().map(|&(kind, dx, dy)| VisibleFeature { kind, dx, dy }).collect();
    visible.sort();
    SceneDescriptor { visible, terrain, yaw_bucket: 0 }
}

fn main() -> pemsim::Result<()> {
    let oracle = EncoderOracle::new(OracleConfig::default())?;
    let scenes = [
        ("pond up close", scene(&[(FeatureKind::Water, 2, 0)])),
        ("pond far away", scene(&[(FeatureKind::Water, 7, 1)])),
        ("house", scene(&[(FeatureKind::House, 3, 0)])),
        ("house with well", scene(&[(FeatureKind::House, 3, 0), (FeatureKind::Well, 3, 2)])),
        ("empty grass", scene(&[])),
    ];
    let water = oracle.encode_task(TaskKind::Water, PromptRole::Query)?;
    let embedded: Vec<_> = scenes
        .iter()
        .enumerate()
        .map(|(i, (_, s))| oracle.encode_scene(std::slice::from_ref(s), i as u64))
        .collect::<pemsim::Result<_>>()?;

    println!("{:<18} {:>8}", "scene", "water");
    for ((name, _), e) in scenes.iter().zip(&embedded) {
        println!("{name:<18} {:>8.1}", alignment_score(&water, e)?);
    }
    println!("\npairwise scene scores");
    for (i, (a, _)) in scenes.iter().enumerate() {
        let row: Vec<String> = embedded.iter().map(|e| format!("{:6.1}", alignment_score(&embedded[i], e).unwrap())).collect();
        println!("{a:<18} {}", row.join(" "));
    }
    Ok(())
}
