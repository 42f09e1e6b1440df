//! Constraint-aware Dijkstra and A* over the direction-expanded grid.
//!
//! A search node is a free cell plus the direction the pipe arrived from,
//! which is what lets a move be priced as an elbow. Edge costs mirror the
//! reward magnitudes (0.5 per step, 5 per elbow, 0.15 per cell of
//! clearance), so a minimum-cost path is a maximum-return episode.
//!
//! Costs are accumulated as integers in units of 1/20 so that Dijkstra, A*
//! and any independent check agree exactly rather than to a tolerance.

use crate::geom::{is_elbow, manhattan, Cell, Dir};
use crate::scene::Scene;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Cost units per 1.0 of cost.
pub const COST_SCALE: u64 = 20;
pub const STEP_UNITS: u64 = 10;
pub const ELBOW_UNITS: u64 = 100;
pub const INSTALL_UNITS_PER_CELL: u64 = 3;

/// Which design constraints are priced. Pipe length always is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintSet {
    pub elbow: bool,
    pub install: bool,
}

impl ConstraintSet {
    pub const LENGTH: ConstraintSet = ConstraintSet { elbow: false, install: false };
    pub const LENGTH_ELBOW: ConstraintSet = ConstraintSet { elbow: true, install: false };
    pub const ALL: ConstraintSet = ConstraintSet { elbow: true, install: true };
    /// The three sets compared in the benchmark, in order.
    pub const STANDARD: [ConstraintSet; 3] = [Self::LENGTH, Self::LENGTH_ELBOW, Self::ALL];

    /// Constraint numbers: 1 length, 2 elbow, 3 installation distance.
    pub fn numbers(self) -> Vec<u8> {
        let mut v = vec![1];
        if self.elbow {
            v.push(2);
        }
        if self.install {
            v.push(3);
        }
        v
    }

    pub fn from_numbers(nums: &[u8]) -> Result<Self, String> {
        if !nums.contains(&1) {
            return Err("constraint 1 (length) is always required".into());
        }
        if let Some(bad) = nums.iter().find(|n| !(1..=3).contains(*n)) {
            return Err(format!("unknown constraint {bad}"));
        }
        Ok(Self { elbow: nums.contains(&2), install: nums.contains(&3) })
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.numbers().iter().map(u8::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for ConstraintSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let nums = s
            .split(',')
            .map(|p| p.trim().parse::<u8>().map_err(|_| format!("bad constraint `{p}`")))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_numbers(&nums)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dijkstra,
    Astar,
    Drl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dijkstra => "dijkstra",
            Algorithm::Astar => "astar",
            Algorithm::Drl => "drl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "dijkstra" => Ok(Algorithm::Dijkstra),
            "astar" => Ok(Algorithm::Astar),
            "drl" => Ok(Algorithm::Drl),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SearchNode {
    pub cell: Cell,
    pub in_dir: Option<Dir>,
}

/// Edge cost in integer units; `clearance` is the target cell's smallest
/// axis free distance (only read when installation distance is priced).
pub fn edge_units(cs: ConstraintSet, in_dir: Option<Dir>, move_dir: Dir, clearance: i32) -> u64 {
    let mut c = STEP_UNITS;
    if cs.elbow && is_elbow(in_dir, move_dir) {
        c += ELBOW_UNITS;
    }
    if cs.install {
        c += INSTALL_UNITS_PER_CELL * clearance as u64;
    }
    c
}

pub fn units_to_cost(units: u64) -> f64 {
    units as f64 / COST_SCALE as f64
}

/// Cost of moving from `from` into the adjacent free cell `to`.
pub fn edge_cost(scene: &Scene, cs: ConstraintSet, from: SearchNode, to: Cell, move_dir: Dir) -> f64 {
    let clearance = if cs.install { scene.min_free_distance(to) } else { 0 };
    units_to_cost(edge_units(cs, from.in_dir, move_dir, clearance))
}

/// A* heuristic: every remaining step costs at least 0.5.
pub fn heuristic(cell: Cell, goal: Cell) -> f64 {
    units_to_cost(heuristic_units(cell, goal))
}

fn heuristic_units(cell: Cell, goal: Cell) -> u64 {
    STEP_UNITS * manhattan(cell, goal) as u64
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path is empty")]
    Empty,
    #[error("path does not start at the scene start")]
    WrongStart,
    #[error("path does not finish at the scene end")]
    WrongEnd,
    #[error("cells {0} and {1} are not adjacent")]
    NotAdjacent(Cell, Cell),
    #[error("cell {0} is blocked")]
    Blocked(Cell),
}

/// Integer-unit cost of a pipe under `cs`, validating adjacency and collisions.
pub fn path_units(scene: &Scene, cells: &[Cell], cs: ConstraintSet) -> Result<u64, PathError> {
    validate_path(scene, cells)?;
    let mut total = 0;
    let mut prev = None;
    for pair in cells.windows(2) {
        let d = pair[0].dir_to(pair[1]).ok_or(PathError::NotAdjacent(pair[0], pair[1]))?;
        let clearance = if cs.install { scene.min_free_distance(pair[1]) } else { 0 };
        total += edge_units(cs, prev, d, clearance);
        prev = Some(d);
    }
    Ok(total)
}

pub fn path_cost(scene: &Scene, cells: &[Cell], cs: ConstraintSet) -> Result<f64, PathError> {
    path_units(scene, cells, cs).map(units_to_cost)
}

pub fn validate_path(scene: &Scene, cells: &[Cell]) -> Result<(), PathError> {
    let (first, last) = match (cells.first(), cells.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(PathError::Empty),
    };
    if first != scene.start() {
        return Err(PathError::WrongStart);
    }
    if last != scene.end() {
        return Err(PathError::WrongEnd);
    }
    if let Some(c) = cells.iter().find(|c| scene.is_blocked(**c)) {
        return Err(PathError::Blocked(*c));
    }
    if let Some(pair) = cells.windows(2).find(|p| p[0].dir_to(p[1]).is_none()) {
        return Err(PathError::NotAdjacent(pair[0], pair[1]));
    }
    Ok(())
}

/// A routed pipe.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub algorithm: Algorithm,
    pub constraints: ConstraintSet,
    pub cost: f64,
    pub expanded_nodes: u64,
    /// The pipe passes through some cell twice. Possible on the expanded
    /// graph when turning costs make a loop cheaper; reported, not hidden.
    pub self_intersecting: bool,
}

impl Path {
    pub fn has_repeated_cells(cells: &[Cell]) -> bool {
        let mut seen = HashSet::with_capacity(cells.len());
        !cells.iter().all(|c| seen.insert(*c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Found(Path),
    NoPath { expanded_nodes: u64 },
}

impl Plan {
    pub fn path(&self) -> Option<&Path> {
        match self {
            Plan::Found(p) => Some(p),
            Plan::NoPath { .. } => None,
        }
    }

    pub fn into_path(self) -> Option<Path> {
        match self {
            Plan::Found(p) => Some(p),
            Plan::NoPath { .. } => None,
        }
    }

    pub fn expanded_nodes(&self) -> u64 {
        match self {
            Plan::Found(p) => p.expanded_nodes,
            Plan::NoPath { expanded_nodes } => *expanded_nodes,
        }
    }
}

pub fn plan_dijkstra(scene: &Scene, cs: ConstraintSet) -> Plan {
    search(scene, cs, Algorithm::Dijkstra)
}

pub fn plan_astar(scene: &Scene, cs: ConstraintSet) -> Plan {
    search(scene, cs, Algorithm::Astar)
}

pub fn plan(scene: &Scene, cs: ConstraintSet, algorithm: Algorithm) -> Option<Plan> {
    match algorithm {
        Algorithm::Dijkstra | Algorithm::Astar => Some(search(scene, cs, algorithm)),
        Algorithm::Drl => None,
    }
}

const NO_PARENT: u32 = u32::MAX;

fn search(scene: &Scene, cs: ConstraintSet, algorithm: Algorithm) -> Plan {
    let informed = algorithm == Algorithm::Astar;
    // Without elbow costs the incoming direction never affects the future,
    // so every cell collapses to its single direction-free node.
    let slots: usize = if cs.elbow { 7 } else { 1 };
    let clearance = if cs.install { scene.clearance_field() } else { Vec::new() };
    let goal = scene.end();
    let state_of = |cell_idx: usize, dir_slot: usize| cell_idx * slots + dir_slot;
    let slot_of = |d: Option<Dir>| if slots == 1 { 0 } else { d.map_or(0, |d| d.index() + 1) };

    let n = scene.volume() * slots;
    let mut best = vec![u64::MAX; n];
    let mut parent = vec![NO_PARENT; n];
    let mut closed = vec![false; n];
    // (f, h, cell index, direction slot); ties go to the node nearer the goal
    // and then to the lower cell/direction index
    let mut open = BinaryHeap::new();

    let start = scene.start();
    let s0 = state_of(scene.index(start), 0);
    best[s0] = 0;
    let h0 = if informed { heuristic_units(start, goal) } else { 0 };
    open.push(Reverse((h0, h0, scene.index(start) as u32, 0u8)));
    let mut expanded = 0u64;

    while let Some(Reverse((_, h, cell_idx, slot))) = open.pop() {
        let sid = state_of(cell_idx as usize, slot as usize);
        if closed[sid] {
            continue;
        }
        closed[sid] = true;
        expanded += 1;
        let cell = scene.cell_at(cell_idx as usize);
        let g = best[sid];
        if cell == goal {
            let cells = reconstruct(scene, &parent, sid, slots);
            let self_intersecting = Path::has_repeated_cells(&cells);
            return Plan::Found(Path {
                cells,
                algorithm,
                constraints: cs,
                cost: units_to_cost(g),
                expanded_nodes: expanded,
                self_intersecting,
            });
        }
        debug_assert!(!informed || h == heuristic_units(cell, goal));
        let in_dir = if slot == 0 { None } else { Dir::from_index(slot as usize - 1) };
        for d in Dir::ALL {
            let next = cell.step(d);
            if scene.is_blocked(next) {
                continue;
            }
            let ni = scene.index(next);
            let nid = state_of(ni, slot_of(Some(d)));
            if closed[nid] {
                continue;
            }
            let c = if cs.install { clearance[ni] } else { 0 };
            let ng = g + edge_units(cs, in_dir, d, c);
            if ng < best[nid] {
                best[nid] = ng;
                parent[nid] = sid as u32;
                let nh = if informed { heuristic_units(next, goal) } else { 0 };
                open.push(Reverse((ng + nh, nh, ni as u32, slot_of(Some(d)) as u8)));
            }
        }
    }
    Plan::NoPath { expanded_nodes: expanded }
}

fn reconstruct(scene: &Scene, parent: &[u32], goal_state: usize, slots: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut s = goal_state;
    loop {
        cells.push(scene.cell_at(s / slots));
        if parent[s] == NO_PARENT {
            break;
        }
        s = parent[s] as usize;
    }
    cells.reverse();
    cells
}

/// On-disk path record.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathFile {
    version: u32,
    algorithm: Algorithm,
    constraints: Vec<u8>,
    cells: Vec<Cell>,
    cost: f64,
    expanded_nodes: u64,
}

#[derive(Debug, Error)]
pub enum PathFileError {
    #[error("malformed path file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("path file field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

pub fn serialize_path(path: &Path) -> Vec<u8> {
    let file = PathFile {
        version: 1,
        algorithm: path.algorithm,
        constraints: path.constraints.numbers(),
        cells: path.cells.clone(),
        cost: path.cost,
        expanded_nodes: path.expanded_nodes,
    };
    let mut out = serde_json::to_vec(&file).expect("path serialization is infallible");
    out.push(b'\n');
    out
}

pub fn parse_path(bytes: &[u8]) -> Result<Path, PathFileError> {
    let f: PathFile = serde_json::from_slice(bytes)?;
    if f.version != 1 {
        return Err(PathFileError::Field { field: "version", message: format!("unsupported version {}", f.version) });
    }
    let constraints = ConstraintSet::from_numbers(&f.constraints)
        .map_err(|message| PathFileError::Field { field: "constraints", message })?;
    let self_intersecting = Path::has_repeated_cells(&f.cells);
    Ok(Path {
        cells: f.cells,
        algorithm: f.algorithm,
        constraints,
        cost: f.cost,
        expanded_nodes: f.expanded_nodes,
        self_intersecting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObstacleBox, ObstacleKind};

    #[test]
    fn edge_cost_examples() {
        let s = Scene::new([7, 7, 7], vec![], Cell::new(0, 0, 0), Cell::new(6, 6, 6), 0).unwrap();
        let from = SearchNode { cell: Cell::new(2, 3, 3), in_dir: Some(Dir::PosX) };
        let straight = Cell::new(3, 3, 3);
        let turn = Cell::new(2, 4, 3);
        assert_eq!(edge_cost(&s, ConstraintSet::LENGTH, from, straight, Dir::PosX), 0.5);
        assert_eq!(edge_cost(&s, ConstraintSet::LENGTH, from, turn, Dir::PosY), 0.5);
        assert_eq!(edge_cost(&s, ConstraintSet::LENGTH_ELBOW, from, turn, Dir::PosY), 5.5);
        assert_eq!(s.min_free_distance(straight), 3);
        assert_eq!(edge_cost(&s, ConstraintSet::ALL, from, straight, Dir::PosX), 0.95);
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(heuristic(Cell::new(1, 2, 3), Cell::new(1, 2, 3)), 0.0);
        assert_eq!(heuristic(Cell::new(0, 0, 0), Cell::new(3, 4, 5)), 6.0);
    }

    #[test]
    fn straight_corridor() {
        let s = Scene::new([6, 6, 6], vec![], Cell::new(0, 0, 0), Cell::new(5, 0, 0), 0).unwrap();
        for plan in [plan_dijkstra(&s, ConstraintSet::LENGTH), plan_astar(&s, ConstraintSet::LENGTH)] {
            let p = plan.into_path().unwrap();
            assert_eq!(p.cost, 2.5);
            assert_eq!(p.cells.len(), 6);
            assert!(!p.self_intersecting);
        }
    }

    #[test]
    fn astar_on_open_line_expands_only_the_line() {
        let s = Scene::new([20, 9, 9], vec![], Cell::new(0, 4, 4), Cell::new(19, 4, 4), 0).unwrap();
        for cs in ConstraintSet::STANDARD.into_iter().take(2) {
            let p = plan_astar(&s, cs).into_path().unwrap();
            assert_eq!(p.expanded_nodes, 20, "{cs}");
        }
    }

    #[test]
    fn blocked_end_is_no_path() {
        let slab = ObstacleBox::new(ObstacleKind::Column, Cell::new(2, 0, 0), Cell::new(3, 5, 5));
        let s = Scene::new([5, 5, 5], vec![slab], Cell::new(0, 0, 0), Cell::new(4, 4, 4), 0).unwrap();
        for cs in ConstraintSet::STANDARD {
            assert!(matches!(plan_dijkstra(&s, cs), Plan::NoPath { .. }));
            assert!(matches!(plan_astar(&s, cs), Plan::NoPath { .. }));
        }
    }

    #[test]
    fn elbow_pricing_straightens() {
        let s = Scene::new([8, 8, 3], vec![], Cell::new(0, 0, 0), Cell::new(7, 7, 0), 0).unwrap();
        let p = plan_dijkstra(&s, ConstraintSet::LENGTH_ELBOW).into_path().unwrap();
        assert_eq!(p.cost, 7.0 + 5.0 + 0.0 + 0.5 * 7.0 - 3.5);
        assert_eq!(path_cost(&s, &p.cells, ConstraintSet::LENGTH_ELBOW).unwrap(), p.cost);
    }

    #[test]
    fn constraint_parsing() {
        assert_eq!("1,2".parse::<ConstraintSet>().unwrap(), ConstraintSet::LENGTH_ELBOW);
        assert_eq!(ConstraintSet::ALL.to_string(), "1,2,3");
        assert!("2,3".parse::<ConstraintSet>().is_err());
        assert!("1,4".parse::<ConstraintSet>().is_err());
    }

    #[test]
    fn path_file_round_trip() {
        let s = Scene::new([6, 6, 6], vec![], Cell::new(0, 0, 0), Cell::new(3, 2, 0), 0).unwrap();
        let p = plan_astar(&s, ConstraintSet::ALL).into_path().unwrap();
        let back = parse_path(&serialize_path(&p)).unwrap();
        assert_eq!(back, p);
        let text = String::from_utf8(serialize_path(&p)).unwrap();
        assert!(text.starts_with("{\"version\":1,\"algorithm\":\"astar\",\"constraints\":[1,2,3],\"cells\":[[0,0,0],"));
    }
}
