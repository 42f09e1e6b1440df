//! Fixed-width observation encoding.
//!
//! The vector has 66 entries regardless of scene size, laid out as six
//! blocks in this frozen order:
//!
//! | block               | len | range   | offset |
//! |---------------------|-----|---------|--------|
//! | relative coordinate | 3   | [-1, 1] | 0      |
//! | direction one-hot   | 7   | [0, 1]  | 3      |
//! | cube edge occupancy | 12  | [0, 1]  | 10     |
//! | angle rays          | 20  | [0, 1]  | 22     |
//! | cross occupancy     | 18  | [0, 1]  | 42     |
//! | axis distances      | 6   | [0, 1]  | 60     |
//!
//! A trained model is only meaningful with the layout it was trained on, so
//! the layout (including any zero-filled blocks) is hashed into checkpoints.

use crate::geom::{Cell, Dir, DIAGONALS};
use crate::scene::Scene;
use std::fmt;
use std::str::FromStr;

pub const OBS_DIM: usize = 66;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureBlock {
    RelativeCoordinate,
    Direction,
    CubeEdge,
    Angle,
    Cross,
    Distance,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 6] = [
        FeatureBlock::RelativeCoordinate,
        FeatureBlock::Direction,
        FeatureBlock::CubeEdge,
        FeatureBlock::Angle,
        FeatureBlock::Cross,
        FeatureBlock::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::RelativeCoordinate => "relative",
            FeatureBlock::Direction => "direction",
            FeatureBlock::CubeEdge => "cube_edge",
            FeatureBlock::Angle => "angle",
            FeatureBlock::Cross => "cross",
            FeatureBlock::Distance => "distance",
        }
    }

    pub fn len(self) -> usize {
        [3, 7, 12, 20, 18, 6][self as usize]
    }

    pub fn offset(self) -> usize {
        [0, 3, 10, 22, 42, 60][self as usize]
    }

    pub fn range(self) -> std::ops::Range<usize> {
        self.offset()..self.offset() + self.len()
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for FeatureBlock {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s.trim())
            .ok_or_else(|| format!("unknown feature block `{s}`"))
    }
}

/// Set of blocks to zero-fill.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const NONE: FeatureMask = FeatureMask(0);

    pub fn of(blocks: &[FeatureBlock]) -> Self {
        Self(blocks.iter().fold(0, |m, b| m | b.bit()))
    }

    pub fn contains(self, b: FeatureBlock) -> bool {
        self.0 & b.bit() != 0
    }

    pub fn blocks(self) -> impl Iterator<Item = FeatureBlock> {
        FeatureBlock::ALL.into_iter().filter(move |b| self.contains(*b))
    }

    /// FNV-1a over a textual description of the layout. Stable across builds.
    pub fn layout_hash(self) -> u64 {
        let mut desc = String::from("pipelayout-obs-v1;");
        for b in FeatureBlock::ALL {
            desc.push_str(&format!("{}:{}:{};", b.name(), b.len(), if self.contains(b) { "zero" } else { "on" }));
        }
        desc.push_str("dirs:none,+x,-x,+y,-y,+z,-z");
        desc.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, byte| (h ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01b3))
    }
}

impl FromStr for FeatureMask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let blocks = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<FeatureBlock>, _>>()?;
        Ok(Self::of(&blocks))
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.blocks().map(FeatureBlock::name).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub values: [f64; OBS_DIM],
}

impl Observation {
    pub fn block(&self, b: FeatureBlock) -> &[f64] {
        &self.values[b.range()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn capped(steps: i32, scale: i32) -> f64 {
    (f64::from(steps) / f64::from(scale)).min(1.0)
}

/// `(end - cur)` scaled per axis by the scene extent.
pub fn relative_coordinate(scene: &Scene, cur: Cell) -> [f64; 3] {
    let d = scene.end() - cur;
    let [lx, ly, lz] = scene.dims();
    [f64::from(d.x) / f64::from(lx), f64::from(d.y) / f64::from(ly), f64::from(d.z) / f64::from(lz)]
}

/// Index 0 is "no direction yet", then +x, -x, +y, -y, +z, -z.
pub fn direction_onehot(prev: Option<Dir>) -> [f64; 7] {
    let mut v = [0.0; 7];
    v[prev.map_or(0, |d| d.index() + 1)] = 1.0;
    v
}

/// The 12 edges of the box spanned by `cur` and `end`: x-parallel edges
/// first, then y-parallel, then z-parallel. Within a group the edge sits at
/// the low or high side of each other axis; slots run (low, low), (low, high),
/// (high, low), (high, high) over those axes in x<y<z order, also when the box
/// is flat. Each entry is the blocked fraction of the edge's cells, endpoints
/// included.
pub fn cube_edge_occupancy(scene: &Scene, cur: Cell, end: Cell) -> [f64; 12] {
    let lo = cur.min(end);
    let hi = cur.max(end);
    let mut out = [0.0; 12];
    let mut k = 0;
    for axis in 0..3 {
        // the two axes the edge does not run along, in x<y<z order
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for ua in [lo.axis(a), hi.axis(a)] {
            for ub in [lo.axis(b), hi.axis(b)] {
                let (from, to) = (lo.axis(axis), hi.axis(axis));
                let mut blocked = 0;
                for t in from..=to {
                    let mut p = [0; 3];
                    p[axis] = t;
                    p[a] = ua;
                    p[b] = ub;
                    if scene.is_blocked(Cell::from(p)) {
                        blocked += 1;
                    }
                }
                out[k] = f64::from(blocked) / f64::from(to - from + 1);
                k += 1;
            }
        }
    }
    out
}

/// Free steps along each diagonal ray before the first blocked cell,
/// scaled by the largest scene extent and capped at 1.
pub fn angle_rays(scene: &Scene, cur: Cell) -> [f64; 20] {
    let scale = scene.max_dim();
    let mut out = [0.0; 20];
    for (v, delta) in out.iter_mut().zip(DIAGONALS) {
        let mut steps = 0;
        while steps < scale && !scene.is_blocked(cur.offset(delta, steps + 1)) {
            steps += 1;
        }
        *v = capped(steps, scale);
    }
    out
}

/// Occupancy of the cells 1, 2 and 3 steps away along each axis direction,
/// direction-major.
pub fn cross_occupancy(scene: &Scene, cur: Cell) -> [f64; 18] {
    let mut out = [0.0; 18];
    for (i, d) in Dir::ALL.into_iter().enumerate() {
        for k in 1..=3 {
            if scene.is_blocked(cur.offset(d.delta(), k)) {
                out[i * 3 + (k as usize - 1)] = 1.0;
            }
        }
    }
    out
}

pub fn distance_six(scene: &Scene, cur: Cell) -> [f64; 6] {
    let scale = scene.max_dim();
    Dir::ALL.map(|d| capped(scene.free_distance(cur, d), scale))
}

/// Builds the full vector for an agent at `cur` that arrived along `prev`.
pub fn observe(scene: &Scene, cur: Cell, prev: Option<Dir>, mask: FeatureMask) -> Observation {
    let mut values = [0.0; OBS_DIM];
    for block in FeatureBlock::ALL {
        if mask.contains(block) {
            continue;
        }
        let dst = &mut values[block.range()];
        match block {
            FeatureBlock::RelativeCoordinate => dst.copy_from_slice(&relative_coordinate(scene, cur)),
            FeatureBlock::Direction => dst.copy_from_slice(&direction_onehot(prev)),
            FeatureBlock::CubeEdge => dst.copy_from_slice(&cube_edge_occupancy(scene, cur, scene.end())),
            FeatureBlock::Angle => dst.copy_from_slice(&angle_rays(scene, cur)),
            FeatureBlock::Cross => dst.copy_from_slice(&cross_occupancy(scene, cur)),
            FeatureBlock::Distance => dst.copy_from_slice(&distance_six(scene, cur)),
        }
    }
    Observation { values }
}
