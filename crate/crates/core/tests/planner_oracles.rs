//! Shortest-path planner against a Bellman-Ford oracle.

mod common;

use common::*;
use masslam::planner::{NavCell, NavMap, PathCost};
use masslam::world::CellCoord;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT2: f64 = std::f64::consts::SQRT_2;





fn cells(map: &NavMap) -> impl Iterator<Item = CellCoord> + '_ {
    (0..map.height()).flat_map(move |r| (0..map.width()).map(move |c| CellCoord::new(r, c)))
}

#[test]
fn distance_field_equals_bellman_ford() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let map = random_map(&mut rng, 30, 30, 0.25, 0.0);
        let src = CellCoord::new(rng.random_range(0..30), rng.random_range(0..30));
        if map.get(src) == NavCell::Occupied {
            continue;
        }
        let field = map.distance_field(src).unwrap();
        let oracle = bellman_ford(&map, src);
        for c in cells(&map) {
            let got = field.cost(c).map(|p| (p.straight, p.diagonal));
            assert_eq!(got, oracle[c.row * 30 + c.col], "cell {c}");
        }
    }
}

#[test]
fn distances_to_agrees_with_full_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let map = random_map(&mut rng, 25, 20, 0.2, 0.2);
        let src = CellCoord::new(rng.random_range(0..20), rng.random_range(0..25));
        let targets: Vec<CellCoord> = (0..5).map(|_| CellCoord::new(rng.random_range(0..20), rng.random_range(0..25))).collect();
        let field = map.distance_field(src).unwrap();
        let got = map.distances_to(src, &targets).unwrap();
        for (t, d) in targets.iter().zip(got) {
            assert_eq!(d, field.meters(*t));
        }
    }
}

#[test]
fn next_step_is_the_smallest_optimal_neighbour() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..300 {
        let map = random_map(&mut rng, 20, 20, 0.2, 0.3);
        let from = CellCoord::new(rng.random_range(0..20), rng.random_range(0..20));
        let to = CellCoord::new(rng.random_range(0..20), rng.random_range(0..20));
        if map.get(from) == NavCell::Occupied {
            continue;
        }
        let to_goal = bellman_ford(&map, to);
        let expected = match to_goal[from.row * 20 + from.col] {
            None | Some((0, 0)) => None,
            Some(here) => {
                let mut best = None;
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        let (r, c) = (from.row as isize + dr, from.col as isize + dc);
                        if (dr, dc) == (0, 0) || !open(&map, r, c) {
                            continue;
                        }
                        let diag = dr != 0 && dc != 0;
                        if diag && !(open(&map, r, from.col as isize) && open(&map, from.row as isize, c)) {
                            continue;
                        }
                        let Some(rest) = to_goal[r as usize * 20 + c as usize] else { continue };
                        let total = if diag { (rest.0, rest.1 + 1) } else { (rest.0 + 1, rest.1) };
                        let n = CellCoord::new(r as usize, c as usize);
                        if total == here && best.is_none_or(|b| n < b) {
                            best = Some(n);
                        }
                    }
                }
                best
            }
        };
        assert_eq!(map.next_step(from, to).unwrap(), expected, "{from} -> {to}");
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn path_cost_order_matches_real_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let a = PathCost {
            straight: rng.random_range(0..200),
            diagonal: rng.random_range(0..200),
        };
        let b = PathCost {
            straight: rng.random_range(0..200),
            diagonal: rng.random_range(0..200),
        };
        let exact = (a.straight as i64 - b.straight as i64) as f64 + (a.diagonal as i64 - b.diagonal as i64) as f64 * SQRT2;
        let expected = if a == b { std::cmp::Ordering::Equal } else { exact.total_cmp(&0.0) };
        assert_eq!(a.cmp(&b), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn revealing_a_cell_never_shortens_a_path(
        seed in any::<u64>(),
        from in (0usize..12, 0usize..12),
        to in (0usize..12, 0usize..12),
        reveal in (0usize..12, 0usize..12),
        blocked in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = random_map(&mut rng, 12, 12, 0.15, 0.4);
        let (from, to, reveal) = (CellCoord::new(from.0, from.1), CellCoord::new(to.0, to.1), CellCoord::new(reveal.0, reveal.1));
        map.set(reveal, NavCell::Unknown);
        let before = map.shortest_distance(from, to).unwrap();
        map.set(reveal, if blocked { NavCell::Occupied } else { NavCell::Free });
        let after = map.shortest_distance(from, to).unwrap();
        match (before, after) {
            (Some(b), Some(a)) => prop_assert!(a >= b),
            (None, Some(_)) => prop_assert!(false, "a reveal opened a path"),
            _ => {}
        }
    }
}
