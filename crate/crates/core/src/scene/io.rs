//! Canonical JSON scene files.
//!
//! Key order is fixed by the struct field order below; output is a single
//! line terminated by `\n`.

use super::{Dims, ObstacleBox, Scene, SceneError};
use crate::geom::{Cell, CELL_SIZE_M};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SCENE_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
    #[error("invalid scene: {0}")]
    Invalid(#[from] SceneError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    version: u32,
    seed: u64,
    dims: Dims,
    cell_size_m: f64,
    start: Cell,
    end: Cell,
    obstacles: Vec<ObstacleBox>,
}

pub fn serialize_scene(scene: &Scene) -> Vec<u8> {
    let file = SceneFile {
        version: SCENE_FILE_VERSION,
        seed: scene.seed(),
        dims: scene.dims(),
        cell_size_m: CELL_SIZE_M,
        start: scene.start(),
        end: scene.end(),
        obstacles: scene.obstacles().to_vec(),
    };
    let mut out = serde_json::to_vec(&file).expect("scene serialization is infallible");
    out.push(b'\n');
    out
}

pub fn parse_scene(bytes: &[u8]) -> Result<Scene, ParseError> {
    let file: SceneFile = serde_json::from_slice(bytes).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.version != SCENE_FILE_VERSION {
        return Err(ParseError::Field { field: "version", message: format!("unsupported version {}", file.version) });
    }
    if file.cell_size_m != CELL_SIZE_M {
        return Err(ParseError::Field { field: "cell_size_m", message: format!("expected {CELL_SIZE_M}") });
    }
    Ok(Scene::new(file.dims, file.obstacles, file.start, file.end, file.seed)?)
}
