//! Plan across mixed terrain and walk the plan while collecting rewards.

use pemsim::navigation::{cell_center, navigate, plan, Terrain, TerrainGrid};

fn main() -> pemsim::Result<()> {
    let mut g = TerrainGrid::walled(24, 12);
    for y in 1..9 {
        g.set((8, y), Terrain::Wall);
    }
    for y in 3..11 {
        g.set((15, y), Terrain::Water);
    }
    for x in 16..20 {
        g.set((x, 2), Terrain::Mountain);
    }
    let (start, goal) = ((2, 2), (21, 9));
    let p = plan(&g, start, goal)?;
    let cells = p.cells().expect("goal is reachable");
    println!("plan: {} cells, cost {:.2}", cells.len(), p.cost().unwrap_or(f64::NAN));
    for y in (0..g.height()).rev() {
        let row: String = (0..g.width())
            .map(|x| {
                if cells.contains(&(x, y)) {
                    '*'
                } else {
                    match g.get((x, y)) {
                        Terrain::Wall => '#',
                        Terrain::Water => '~',
                        Terrain::Mountain => '^',
                        _ => '.',
                    }
                }
            })
            .collect();
        println!("{row}");
    }
    let out = navigate(&g, start, goal, 200)?;
    println!(
        "walked {} steps, reached {}, reward {:.2} (straight-line distance {:.2} + bonus)",
        out.steps,
        out.reached,
        out.cumulative_reward,
        pemsim::navigation::dist(cell_center(start), cell_center(goal))
    );
    Ok(())
}
