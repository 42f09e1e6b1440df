//! Building pipeline routing on a 10 cm voxel grid.
//!
//! The crate covers the whole loop: seeded room generation ([`scene`]), the
//! fixed-width feature encoder ([`observe`]), the masked routing environment
//! ([`mdp`]), direction-expanded Dijkstra/A* baselines ([`planner`]), a
//! shared-trunk actor-critic ([`policy`]) trained with PPO ([`trainer`]), and
//! the metric/benchmark harness ([`bench`]).
//!
//! Network and training code is generic over the [`Scalar`] type; the
//! aliases below pin the common choices.

pub mod bench;
pub mod fsutil;
pub mod geom;
pub mod mdp;
pub mod observe;
pub mod planner;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod trainer;

pub use geom::{manhattan, Cell, Dir};
pub use scalar::Scalar;
pub use scene::{generate_scene, Scene, SceneConfig};

pub type PolicyNet64 = policy::PolicyNet<f64>;
pub type PolicyNet32 = policy::PolicyNet<f32>;
pub type Checkpoint64 = policy::Checkpoint<f64>;
pub type TrainSummary64 = trainer::TrainSummary<f64>;
