//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the definitions with plain loops and no
//! calls into the crate's own geometry helpers beyond `is_blocked`.

#![allow(dead_code)]

pub mod gradcheck;

use pipelayout::geom::{Cell, Dir};
use pipelayout::scene::{ObstacleBox, ObstacleKind};
use pipelayout::{Scene, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

pub const DELTAS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

pub fn add(c: Cell, d: [i32; 3], k: i32) -> Cell {
    Cell::new(c.x + d[0] * k, c.y + d[1] * k, c.z + d[2] * k)
}

/// Blocked test written from scratch: outside the room or inside a box.
pub fn blocked_oracle(scene: &Scene, c: Cell) -> bool {
    let [lx, ly, lz] = scene.dims();
    if c.x < 0 || c.y < 0 || c.z < 0 || c.x >= lx || c.y >= ly || c.z >= lz {
        return true;
    }
    scene.obstacles().iter().any(|o| {
        o.min.x <= c.x && c.x < o.max.x && o.min.y <= c.y && c.y < o.max.y && o.min.z <= c.z && c.z < o.max.z
    })
}

/// Cell-by-cell walk until the first blocked cell.
pub fn free_run(scene: &Scene, c: Cell, d: [i32; 3]) -> i32 {
    let mut k = 0;
    while !blocked_oracle(scene, add(c, d, k + 1)) {
        k += 1;
    }
    k
}

pub fn min_free(scene: &Scene, c: Cell) -> i32 {
    DELTAS.iter().map(|d| free_run(scene, c, *d)).min().unwrap()
}

/// Flood fill over free cells.
pub fn reachable(scene: &Scene, from: Cell, to: Cell) -> bool {
    let [lx, ly, lz] = scene.dims();
    let idx = |c: Cell| (c.x + lx * (c.y + ly * c.z)) as usize;
    let mut seen = vec![false; (lx * ly * lz) as usize];
    let mut q = VecDeque::from([from]);
    seen[idx(from)] = true;
    while let Some(c) = q.pop_front() {
        if c == to {
            return true;
        }
        for d in DELTAS {
            let n = add(c, d, 1);
            if !blocked_oracle(scene, n) && !seen[idx(n)] {
                seen[idx(n)] = true;
                q.push_back(n);
            }
        }
    }
    false
}

/// Exact optimum in cost units (1/20) over the (cell, incoming direction)
/// graph, by relaxing every edge until nothing changes. `elbow` and
/// `install` select the priced terms: 10 per step, 100 per turn, 3 per cell
/// of smallest-axis clearance at the entered cell.
pub fn exhaustive_optimum(scene: &Scene, elbow: bool, install: bool) -> Option<u64> {
    let [lx, ly, lz] = scene.dims();
    let n = (lx * ly * lz) as usize;
    let idx = |c: Cell| (c.x + lx * (c.y + ly * c.z)) as usize;
    // slot 0: no incoming direction; slot 1 + d: arrived moving along d
    let mut dist = vec![u64::MAX; n * 7];
    dist[idx(scene.start()) * 7] = 0;
    let cells: Vec<Cell> = (0..lz)
        .flat_map(|z| (0..ly).flat_map(move |y| (0..lx).map(move |x| Cell::new(x, y, z))))
        .filter(|c| !blocked_oracle(scene, *c))
        .collect();
    let clearance: Vec<u64> = {
        let mut v = vec![0; n];
        for c in &cells {
            v[idx(*c)] = min_free(scene, *c) as u64;
        }
        v
    };
    loop {
        let mut changed = false;
        for &c in &cells {
            for slot in 0..7 {
                let g = dist[idx(c) * 7 + slot];
                if g == u64::MAX {
                    continue;
                }
                for (d, delta) in DELTAS.iter().enumerate() {
                    let m = add(c, *delta, 1);
                    if blocked_oracle(scene, m) {
                        continue;
                    }
                    let mut w = 10;
                    if elbow && slot != 0 && slot - 1 != d {
                        w += 100;
                    }
                    if install {
                        w += 3 * clearance[idx(m)];
                    }
                    let t = idx(m) * 7 + 1 + d;
                    if g + w < dist[t] {
                        dist[t] = g + w;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let e = idx(scene.end()) * 7;
    dist[e..e + 7].iter().copied().min().filter(|v| *v != u64::MAX)
}

/// A random scene no larger than `max` with a few random boxes and
/// wall-adjacent endpoints; `None` if the draw is unusable.
pub fn random_small_scene(rng: &mut ChaCha8Rng, max: [i32; 3], boxes: usize) -> Option<Scene> {
    let dims: [i32; 3] = std::array::from_fn(|a| rng.random_range(3..=max[a]));
    let mut obstacles = Vec::new();
    for _ in 0..rng.random_range(0..=boxes) {
        let min: [i32; 3] = std::array::from_fn(|a| rng.random_range(0..dims[a]));
        let max: [i32; 3] = std::array::from_fn(|a| rng.random_range(min[a] + 1..=dims[a].min(min[a] + 3)));
        obstacles.push(ObstacleBox::new(
            ObstacleKind::Column,
            Cell::new(min[0], min[1], min[2]),
            Cell::new(max[0], max[1], max[2]),
        ));
    }
    let wall_cells: Vec<Cell> = (0..dims[2])
        .flat_map(|z| (0..dims[1]).flat_map(move |y| (0..dims[0]).map(move |x| Cell::new(x, y, z))))
        .filter(|c| c.x == 0 || c.y == 0 || c.x == dims[0] - 1 || c.y == dims[1] - 1)
        .filter(|c| !obstacles.iter().any(|o| o.contains(*c)))
        .collect();
    if wall_cells.len() < 2 {
        return None;
    }
    let a = wall_cells[rng.random_range(0..wall_cells.len())];
    let b = wall_cells[rng.random_range(0..wall_cells.len())];
    if a == b {
        return None;
    }
    Scene::new(dims, obstacles, a, b, 0).ok()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator settings for tiny rooms checked exhaustively.
pub fn tiny_config() -> SceneConfig {
    SceneConfig::with_dims([6, 6, 4], [8, 8, 6])
}

pub fn desk_config() -> SceneConfig {
    SceneConfig::fixed([20, 20, 15])
}

pub fn dir_of(d: usize) -> Dir {
    Dir::from_index(d).unwrap()
}
