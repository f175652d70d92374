use std::collections::VecDeque;

use crate::geom::Cell;
use crate::world::WorldMap;

fn free(map: &WorldMap, cell: Cell) -> bool {
    map.in_bounds(cell) && !map.is_blocked(cell)
}

/// Whether an agent at `at` has reached `target`. Blocked targets (building
/// cells) are reached from any adjacent cell.
pub fn arrived(map: &WorldMap, at: Cell, target: Cell) -> bool {
    if map.is_blocked(target) {
        at.is_adjacent(target)
    } else {
        at == target
    }
}

const NEIGHBORS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Walking distance (4-connected, around buildings) from every free cell to
/// the nearest cell that counts as arrival at `target`.
fn distance_field(map: &WorldMap, target: Cell) -> Vec<Option<u32>> {
    let (w, h) = (map.width() as i32, map.height() as i32);
    let index = |c: Cell| (c.y * w + c.x) as usize;
    let mut dist = vec![None; (w * h) as usize];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            if free(map, c) && arrived(map, c, target) {
                dist[index(c)] = Some(0);
                queue.push_back(c);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        let d = dist[index(c)].expect("queued cells have a distance");
        for (dx, dy) in NEIGHBORS {
            let n = c.offset(dx, dy);
            if free(map, n) && dist[index(n)].is_none() {
                dist[index(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// One 4-directional step toward `target`, greedy on walking distance so
/// agents go around buildings. Among equally good steps the x-axis move is
/// preferred, then the y-axis move, then sidesteps toward the lower
/// coordinate. Stays put when boxed in or already there.
pub fn step_toward(map: &WorldMap, from: Cell, target: Cell) -> Cell {
    if arrived(map, from, target) {
        return from;
    }
    let dx = (target.x - from.x).signum();
    let dy = (target.y - from.y).signum();
    let mut options = Vec::with_capacity(4);
    if dx != 0 {
        options.push(from.offset(dx, 0));
    }
    if dy != 0 {
        options.push(from.offset(0, dy));
    }
    for side in [from.offset(0, -1), from.offset(0, 1), from.offset(-1, 0), from.offset(1, 0)] {
        if !options.contains(&side) {
            options.push(side);
        }
    }
    options.retain(|c| free(map, *c));

    let w = map.width() as i32;
    let field = distance_field(map, target);
    let dist_of = |c: Cell| field[(c.y * w + c.x) as usize];
    let here = if free(map, from) { dist_of(from) } else { None };
    let best = options
        .iter()
        .filter_map(|c| dist_of(*c).map(|d| (d, *c)))
        .min_by_key(|(d, _)| *d);
    match (best, here) {
        (Some((d, c)), Some(h)) if d < h => c,
        (Some((_, c)), None) => c,
        // Unreachable: plain greedy on straight-line distance.
        _ if here.is_none() || best.is_none() => options
            .into_iter()
            .find(|c| c.manhattan(target) < from.manhattan(target))
            .unwrap_or(from),
        _ => from,
    }
}
