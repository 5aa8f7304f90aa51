use pemsim::exploration::{Fov, VisitationMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn marked_map(seed: u64, side: usize, g: usize, marks: usize) -> VisitationMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = VisitationMap::new(side, g, (0, 0));
    let half = side as f64 / 2.0;
    for _ in 0..marks {
        let p = (rng.gen_range(-half..half - 1.0), rng.gen_range(-half..half - 1.0));
        m.mark(p, rng.gen_range(-180.0..180.0), &Fov::default());
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn goal_is_least_visited_then_nearest_then_first(
        seed in any::<u64>(), marks in 0usize..60, g in 2usize..9, cx in -30.0f64..30.0, cy in -30.0f64..30.0,
    ) {
        let side = 40;
        let m = marked_map(seed, side, g, marks);
        let (min_x, min_y, w, h) = m.bounds();
        let g = g as i32;
        let (rows, cols) = ((h + g - 1) / g, (w + g - 1) / g);
        let mut best: Option<(u64, f64, (usize, usize))> = None;
        for r in 0..rows {
            for c in 0..cols {
                let mut s = 0u64;
                for y in min_y + r * g..(min_y + (r + 1) * g).min(min_y + h) {
                    for x in min_x + c * g..(min_x + (c + 1) * g).min(min_x + w) {
                        s += m.count((x, y)) as u64;
                    }
                }
                let center = (min_x as f64 + (c * g) as f64 + (g - 1) as f64 / 2.0, min_y as f64 + (r * g) as f64 + (g - 1) as f64 / 2.0);
                let d = (center.0 - cx).hypot(center.1 - cy);
                let better = match best {
                    None => true,
                    Some((bs, bd, _)) => s < bs || (s == bs && d < bd - 1e-12),
                };
                if better {
                    best = Some((s, d, (r as usize, c as usize)));
                }
            }
        }
        let (score, _, cell) = best.unwrap();
        let sel = m.select_goal((cx, cy));
        prop_assert_eq!(sel.min_count, score);
        prop_assert_eq!(sel.super_cell, cell);
    }

    #[test]
    fn expansion_keeps_counts_and_grows_by_super_cells(
        seed in any::<u64>(), g in 1usize..10, tx in -120i32..120, ty in -120i32..120,
    ) {
        let mut m = marked_map(seed, 30, g, 25);
        let before = m.clone();
        let (x0, y0, w0, h0) = before.bounds();
        m.expand((tx, ty));
        let (x1, y1, w1, h1) = m.bounds();
        prop_assert!(m.contains((tx, ty)));
        let g = g as i32;
        prop_assert_eq!((x0 - x1) % g, 0);
        prop_assert_eq!((y0 - y1) % g, 0);
        prop_assert_eq!((w1 - w0) % g, 0);
        prop_assert_eq!((h1 - h0) % g, 0);
        for y in y1..y1 + h1 {
            for x in x1..x1 + w1 {
                prop_assert_eq!(m.count((x, y)), before.count((x, y)));
            }
        }
        // Shrinking never happens and growth is minimal on each side.
        prop_assert!(x1 <= x0 && y1 <= y0 && x1 + w1 >= x0 + w0 && y1 + h1 >= y0 + h0);
        prop_assert!(x0 - x1 < g || tx < x1 + g);
        prop_assert!((x1 + w1) - (x0 + w0) < g || tx >= x1 + w1 - g);
    }

    #[test]
    fn marking_adds_view_sector_once(seed in any::<u64>(), yaw in -180.0f64..180.0) {
        let mut m = marked_map(seed, 40, 5, 10);
        let before = m.clone();
        let fov = Fov::default();
        m.mark((0.0, 0.0), yaw, &fov);
        let sector = pemsim::exploration::fov_cells((0, 0), yaw, &fov);
        let (x0, y0, w, h) = m.bounds();
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                let want = before.count((x, y)) + u32::from((x, y) == (0, 0) || sector.contains(&(x, y)));
                prop_assert_eq!(m.count((x, y)), want);
            }
        }
    }
}
