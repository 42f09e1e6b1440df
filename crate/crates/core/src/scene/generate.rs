//! Seeded random room generator.
//!
//! Recipe: four full-height corner columns plus a few wall-attached ones,
//! a ring of main beams around the ceiling perimeter with main spans
//! between opposing walls, and thinner secondary spans running the other
//! way. Start and end sit on two different vertical walls.

use super::{Dims, ObstacleBox, ObstacleKind, Scene, SceneError};
use crate::geom::Cell;
use crate::rng::{stream, tags};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const MAX_GENERATION_ATTEMPTS: u32 = 100;

/// Obstacle size and count ranges, all inclusive, in cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleRecipe {
    pub column_side: (i32, i32),
    pub extra_columns: (u32, u32),
    pub main_depth: (i32, i32),
    pub main_width: (i32, i32),
    pub main_spans: (u32, u32),
    pub perimeter_ring: bool,
    pub secondary_spans: (u32, u32),
}

impl Default for ObstacleRecipe {
    fn default() -> Self {
        Self {
            column_side: (4, 8),
            extra_columns: (0, 4),
            main_depth: (5, 8),
            main_width: (3, 5),
            main_spans: (1, 3),
            perimeter_ring: true,
            secondary_spans: (2, 6),
        }
    }
}

/// Ranges the generator draws from.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub min_dims: Dims,
    pub max_dims: Dims,
    pub recipe: ObstacleRecipe,
}

/// Room bounds of the full-size distribution: 5-10 m plan, 2.8-4 m height.
pub const ROOM_MIN_DIMS: Dims = [50, 50, 28];
pub const ROOM_MAX_DIMS: Dims = [100, 100, 40];

impl Default for SceneConfig {
    fn default() -> Self {
        Self { min_dims: ROOM_MIN_DIMS, max_dims: ROOM_MAX_DIMS, recipe: ObstacleRecipe::default() }
    }
}

impl SceneConfig {
    /// Room sizes outside the full-size range, with the obstacle recipe
    /// scaled down proportionally (used for desk-scale training and for
    /// instances small enough to check exhaustively).
    pub fn with_dims(min_dims: Dims, max_dims: Dims) -> Self {
        let plan = f64::from(min_dims[0].min(min_dims[1])) / f64::from(ROOM_MIN_DIMS[0]);
        let vert = f64::from(min_dims[2]) / f64::from(ROOM_MIN_DIMS[2]);
        let scale = |v: i32, f: f64, floor: i32| ((f64::from(v) * f).round() as i32).max(floor);
        let base = ObstacleRecipe::default();
        let recipe = if plan >= 1.0 && vert >= 1.0 {
            base
        } else {
            ObstacleRecipe {
                column_side: (scale(base.column_side.0, plan, 1), scale(base.column_side.1, plan, 1)),
                main_depth: (scale(base.main_depth.0, vert, 2), scale(base.main_depth.1, vert, 2)),
                main_width: (scale(base.main_width.0, plan, 2), scale(base.main_width.1, plan, 2)),
                ..base
            }
        };
        Self { min_dims, max_dims, recipe }
    }

    pub fn fixed(dims: Dims) -> Self {
        Self::with_dims(dims, dims)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::BadConfig(m));
        for a in 0..3 {
            if self.min_dims[a] < 3 || self.min_dims[a] > self.max_dims[a] {
                return bad(format!("dims range {:?}..{:?}", self.min_dims, self.max_dims));
            }
        }
        let r = &self.recipe;
        let ranges = [
            ("column_side", r.column_side),
            ("main_depth", r.main_depth),
            ("main_width", r.main_width),
        ];
        for (name, (lo, hi)) in ranges {
            if lo < 1 || lo > hi {
                return bad(format!("{name} range ({lo},{hi})"));
            }
        }
        let plan_min = self.min_dims[0].min(self.min_dims[1]);
        if 2 * r.column_side.1 >= plan_min {
            return bad("columns do not fit the smallest room".into());
        }
        if r.main_depth.1 >= self.min_dims[2] || 2 * r.main_width.1 >= plan_min {
            return bad("beams do not fit the smallest room".into());
        }
        if r.extra_columns.0 > r.extra_columns.1
            || r.main_spans.0 > r.main_spans.1
            || r.secondary_spans.0 > r.secondary_spans.1
        {
            return bad("count range reversed".into());
        }
        Ok(())
    }
}

/// Draws a solvable scene. Attempt `k` uses its own substream derived from
/// `(seed, k)`, so the result depends only on `seed` and `config`.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<Scene, SceneError> {
    config.validate()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = stream(seed, tags::SCENE_ATTEMPT, u64::from(attempt));
        if let Some(scene) = draw(&mut rng, seed, config) {
            if scene.is_solvable() {
                return Ok(scene);
            }
        }
    }
    Err(SceneError::GenerationExhausted { attempts: MAX_GENERATION_ATTEMPTS })
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (i32, i32)) -> i32 {
    rng.random_range(lo..=hi)
}

fn count(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    rng.random_range(lo..=hi)
}

fn draw(rng: &mut ChaCha8Rng, seed: u64, config: &SceneConfig) -> Option<Scene> {
    let dims: Dims = std::array::from_fn(|a| rng.random_range(config.min_dims[a]..=config.max_dims[a]));
    let [lx, ly, lz] = dims;
    let r = &config.recipe;
    let mut boxes = Vec::new();

    let column = |x0: i32, y0: i32, side: i32| {
        ObstacleBox::new(ObstacleKind::Column, Cell::new(x0, y0, 0), Cell::new(x0 + side, y0 + side, lz))
    };
    for (cx, cy) in [(false, false), (true, false), (false, true), (true, true)] {
        let s = range(rng, r.column_side);
        boxes.push(column(if cx { lx - s } else { 0 }, if cy { ly - s } else { 0 }, s));
    }
    for _ in 0..count(rng, r.extra_columns) {
        let s = range(rng, r.column_side);
        let wall = rng.random_range(0..4);
        let along = if wall < 2 { ly } else { lx };
        let p = rng.random_range(0..=along - s);
        boxes.push(match wall {
            0 => column(0, p, s),
            1 => column(lx - s, p, s),
            2 => column(p, 0, s),
            _ => column(p, ly - s, s),
        });
    }

    // beam running along `axis` (0 = x, 1 = y) at offset `p` across it
    let beam = |kind, axis: usize, p: i32, width: i32, depth: i32| {
        if axis == 0 {
            ObstacleBox::new(kind, Cell::new(0, p, lz - depth), Cell::new(lx, p + width, lz))
        } else {
            ObstacleBox::new(kind, Cell::new(p, 0, lz - depth), Cell::new(p + width, ly, lz))
        }
    };
    let mut main_depth_min = i32::MAX;
    let mut main_width_min = i32::MAX;
    let mut main_beam = |rng: &mut ChaCha8Rng, axis: usize, p: Option<i32>| {
        let d = range(rng, r.main_depth);
        let w = range(rng, r.main_width);
        main_depth_min = main_depth_min.min(d);
        main_width_min = main_width_min.min(w);
        let across = if axis == 0 { ly } else { lx };
        let p = p.map_or_else(|| rng.random_range(0..=across - w), |side| if side == 0 { 0 } else { across - w });
        beam(ObstacleKind::MainBeam, axis, p, w, d)
    };
    if r.perimeter_ring {
        for axis in 0..2 {
            for side in 0..2 {
                boxes.push(main_beam(rng, axis, Some(side)));
            }
        }
    }
    let span_axis = rng.random_range(0..2usize);
    for _ in 0..count(rng, r.main_spans) {
        boxes.push(main_beam(rng, span_axis, None));
    }

    if main_depth_min > 1 && main_width_min > 1 && main_depth_min != i32::MAX {
        let cross_axis = 1 - span_axis;
        let across = if cross_axis == 0 { ly } else { lx };
        for _ in 0..count(rng, r.secondary_spans) {
            let d = rng.random_range(1..main_depth_min);
            let w = rng.random_range(1..main_width_min);
            let p = rng.random_range(0..=across - w);
            boxes.push(beam(ObstacleKind::SecondaryBeam, cross_axis, p, w, d));
        }
    }

    let probe = Scene::obstacles_only(dims, boxes, seed).ok()?;
    let first = rng.random_range(0..4usize);
    let second = (first + rng.random_range(1..4usize)) % 4;
    let start = pick_on_wall(rng, &probe, first)?;
    let end = pick_on_wall(rng, &probe, second)?;
    probe.with_endpoints(start, end).ok()
}

fn pick_on_wall(rng: &mut ChaCha8Rng, scene: &Scene, wall: usize) -> Option<Cell> {
    let [lx, ly, lz] = scene.dims();
    let mut free = Vec::new();
    for z in 0..lz {
        if wall < 2 {
            let x = if wall == 0 { 0 } else { lx - 1 };
            free.extend((0..ly).map(|y| Cell::new(x, y, z)).filter(|c| !scene.is_blocked(*c)));
        } else {
            let y = if wall == 2 { 0 } else { ly - 1 };
            free.extend((0..lx).map(|x| Cell::new(x, y, z)).filter(|c| !scene.is_blocked(*c)));
        }
    }
    if free.is_empty() {
        None
    } else {
        Some(free[rng.random_range(0..free.len())])
    }
}
