//! Rasterized building volumes.
//!
//! A [`Scene`] is an axis-aligned box of cells holding column and beam
//! obstacles plus the pipe's start and end cells. Walls are never stored:
//! every cell outside the bounds counts as blocked. Obstacle boxes are
//! half-open, `min` inclusive and `max` exclusive.

mod generate;
mod io;

pub use generate::{generate_scene, ObstacleRecipe, SceneConfig, MAX_GENERATION_ATTEMPTS};
pub use io::{parse_scene, serialize_scene, ParseError};

use crate::geom::{Cell, Dir};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Scene extent in cells along x, y and z.
pub type Dims = [i32; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Column,
    MainBeam,
    SecondaryBeam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub kind: ObstacleKind,
    pub min: Cell,
    pub max: Cell,
}

impl ObstacleBox {
    pub fn new(kind: ObstacleKind, min: Cell, max: Cell) -> Self {
        Self { kind, min, max }
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.min.x <= c.x
            && c.x < self.max.x
            && self.min.y <= c.y
            && c.y < self.max.y
            && self.min.z <= c.z
            && c.z < self.max.z
    }

    pub fn extent(&self) -> [i32; 3] {
        let d = self.max - self.min;
        [d.x, d.y, d.z]
    }

    /// Depth times width for beams (vertical extent times the horizontal
    /// extent across the span). Columns report their footprint.
    pub fn cross_section(&self) -> i64 {
        let [ex, ey, ez] = self.extent();
        match self.kind {
            ObstacleKind::Column => i64::from(ex) * i64::from(ey),
            _ => i64::from(ez) * i64::from(ex.min(ey)),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SceneError {
    #[error("dims must be positive, got {0:?}")]
    BadDims(Dims),
    #[error("obstacle {index} is empty or leaves the scene bounds")]
    BadObstacle { index: usize },
    #[error("{which} cell {cell} is outside the scene")]
    OutOfBounds { which: &'static str, cell: Cell },
    #[error("{which} cell {cell} lies inside an obstacle")]
    EndpointBlocked { which: &'static str, cell: Cell },
    #[error("start and end coincide at {0}")]
    DegenerateEndpoints(Cell),
    #[error("no solvable scene after {attempts} attempts")]
    GenerationExhausted { attempts: u32 },
    #[error("invalid scene config: {0}")]
    BadConfig(String),
}

/// An immutable rasterized room.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    dims: Dims,
    obstacles: Vec<ObstacleBox>,
    start: Cell,
    end: Cell,
    seed: u64,
    occupied: Vec<bool>,
}

impl Scene {
    /// Builds a scene, checking the structural invariants (positive dims,
    /// boxes non-empty and inside the bounds, distinct free endpoints).
    /// Solvability is not checked here; see [`Scene::is_solvable`].
    pub fn new(
        dims: Dims,
        obstacles: Vec<ObstacleBox>,
        start: Cell,
        end: Cell,
        seed: u64,
    ) -> Result<Self, SceneError> {
        let occupied = rasterize(dims, &obstacles)?;
        let scene = Self { dims, obstacles, start, end, seed, occupied };
        for (which, cell) in [("start", start), ("end", end)] {
            if !scene.in_bounds(cell) {
                return Err(SceneError::OutOfBounds { which, cell });
            }
            if scene.is_blocked(cell) {
                return Err(SceneError::EndpointBlocked { which, cell });
            }
        }
        if start == end {
            return Err(SceneError::DegenerateEndpoints(start));
        }
        Ok(scene)
    }

    /// Occupancy only, endpoints unset. For the generator's endpoint draw.
    pub(crate) fn obstacles_only(dims: Dims, obstacles: Vec<ObstacleBox>, seed: u64) -> Result<Self, SceneError> {
        let occupied = rasterize(dims, &obstacles)?;
        let origin = Cell::new(0, 0, 0);
        Ok(Self { dims, obstacles, start: origin, end: origin, seed, occupied })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn obstacles(&self) -> &[ObstacleBox] {
        &self.obstacles
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn end(&self) -> Cell {
        self.end
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn volume(&self) -> usize {
        self.occupied.len()
    }

    pub fn max_dim(&self) -> i32 {
        self.dims[0].max(self.dims[1]).max(self.dims[2])
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && c.x < self.dims[0]
            && c.y < self.dims[1]
            && c.z < self.dims[2]
    }

    /// Linear index `x + Lx*(y + Ly*z)`; caller guarantees the cell is in bounds.
    pub fn index(&self, c: Cell) -> usize {
        (c.x + self.dims[0] * (c.y + self.dims[1] * c.z)) as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let i = index as i32;
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        Cell::new(x, y, z)
    }

    /// True for wall (out of bounds) and obstacle cells.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.occupied[self.index(c)]
    }

    /// Whether any of the six axis neighbours lies outside the scene.
    pub fn is_wall_adjacent(&self, c: Cell) -> bool {
        Dir::ALL.iter().any(|d| !self.in_bounds(c.step(*d)))
    }

    /// Number of free cells strictly beyond `c` along `dir` before the first
    /// blocked one.
    pub fn free_distance(&self, c: Cell, dir: Dir) -> i32 {
        let mut k = 0;
        let mut probe = c.step(dir);
        while !self.is_blocked(probe) {
            k += 1;
            probe = probe.step(dir);
        }
        k
    }

    /// Smallest of the six axis free distances: the installation distance of
    /// a pipe cell.
    pub fn min_free_distance(&self, c: Cell) -> i32 {
        Dir::ALL.iter().map(|d| self.free_distance(c, *d)).min().unwrap_or(0)
    }

    /// [`Scene::min_free_distance`] for every cell at once, indexed like
    /// [`Scene::index`]. Blocked cells hold -1.
    pub fn clearance_field(&self) -> Vec<i32> {
        let [lx, ly, lz] = self.dims;
        let mut best = vec![i32::MAX; self.volume()];
        for dir in Dir::ALL {
            let axis = dir.axis();
            let positive = dir.delta()[axis] > 0;
            let len = self.dims[axis];
            let (o1, o2) = match axis {
                0 => (ly, lz),
                1 => (lx, lz),
                _ => (lx, ly),
            };
            for a in 0..o1 {
                for b in 0..o2 {
                    let at = |t: i32| match axis {
                        0 => Cell::new(t, a, b),
                        1 => Cell::new(a, t, b),
                        _ => Cell::new(a, b, t),
                    };
                    // run = free distance of the cell just processed, walking
                    // backwards from the wall that `dir` points at
                    let mut run = -1;
                    for s in 0..len {
                        let t = if positive { len - 1 - s } else { s };
                        let c = at(t);
                        let i = self.index(c);
                        if self.occupied[i] {
                            run = -1;
                            continue;
                        }
                        run += 1;
                        best[i] = best[i].min(run);
                    }
                }
            }
        }
        for (i, v) in best.iter_mut().enumerate() {
            if self.occupied[i] {
                *v = -1;
            }
        }
        best
    }

    /// Breadth-first reachability of `end` from `start` over 6-connected
    /// free cells.
    pub fn is_solvable(&self) -> bool {
        let mut seen = vec![false; self.volume()];
        let mut queue = VecDeque::new();
        seen[self.index(self.start)] = true;
        queue.push_back(self.start);
        while let Some(c) = queue.pop_front() {
            if c == self.end {
                return true;
            }
            for d in Dir::ALL {
                let n = c.step(d);
                if !self.is_blocked(n) && !seen[self.index(n)] {
                    seen[self.index(n)] = true;
                    queue.push_back(n);
                }
            }
        }
        false
    }

    /// Replaces the endpoints, keeping the obstacles.
    pub fn with_endpoints(&self, start: Cell, end: Cell) -> Result<Self, SceneError> {
        Self::new(self.dims, self.obstacles.clone(), start, end, self.seed)
    }
}

fn rasterize(dims: Dims, obstacles: &[ObstacleBox]) -> Result<Vec<bool>, SceneError> {
    if dims.iter().any(|&d| d <= 0) {
        return Err(SceneError::BadDims(dims));
    }
    let volume = dims.iter().map(|&d| d as usize).product();
    let mut occupied = vec![false; volume];
    for (index, b) in obstacles.iter().enumerate() {
        let inside = (0..3)
            .all(|a| b.min.axis(a) >= 0 && b.min.axis(a) < b.max.axis(a) && b.max.axis(a) <= dims[a]);
        if !inside {
            return Err(SceneError::BadObstacle { index });
        }
        for z in b.min.z..b.max.z {
            for y in b.min.y..b.max.y {
                for x in b.min.x..b.max.x {
                    occupied[(x + dims[0] * (y + dims[1] * z)) as usize] = true;
                }
            }
        }
    }
    Ok(occupied)
}
