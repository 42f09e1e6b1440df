mod common;

use common::{blocked_oracle, free_run, reachable, rng, DELTAS};
use pipelayout::geom::{Cell, Dir};
use pipelayout::scene::{parse_scene, serialize_scene, ObstacleBox, ObstacleKind, ParseError};
use pipelayout::{generate_scene, Scene, SceneConfig};
use proptest::prelude::*;
use rand::Rng;

fn on_vertical_wall(scene: &Scene, c: Cell) -> bool {
    let [lx, ly, _] = scene.dims();
    c.x == 0 || c.y == 0 || c.x == lx - 1 || c.y == ly - 1
}

fn check_invariants(scene: &Scene, config: &SceneConfig) {
    let dims = scene.dims();
    for a in 0..3 {
        assert!(config.min_dims[a] <= dims[a] && dims[a] <= config.max_dims[a]);
    }
    for o in scene.obstacles() {
        for a in 0..3 {
            let (lo, hi) = ([o.min.x, o.min.y, o.min.z][a], [o.max.x, o.max.y, o.max.z][a]);
            assert!(0 <= lo && lo < hi && hi <= dims[a], "box {o:?} in {dims:?}");
        }
    }
    let mains = scene.obstacles().iter().filter(|o| o.kind == ObstacleKind::MainBeam);
    let seconds = scene.obstacles().iter().filter(|o| o.kind == ObstacleKind::SecondaryBeam);
    if let (Some(main), Some(second)) =
        (mains.map(ObstacleBox::cross_section).min(), seconds.map(ObstacleBox::cross_section).max())
    {
        assert!(main > second);
    }
    let (s, e) = (scene.start(), scene.end());
    assert_ne!(s, e);
    assert!(!blocked_oracle(scene, s) && !blocked_oracle(scene, e));
    assert!(on_vertical_wall(scene, s) && on_vertical_wall(scene, e));
    assert!(reachable(scene, s, e));
    assert!(scene.is_solvable());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn desk_scenes_hold_invariants(seed in any::<u64>()) {
        let config = SceneConfig::with_dims([12, 12, 8], [24, 24, 16]);
        let scene = generate_scene(seed, &config).unwrap();
        check_invariants(&scene, &config);
        prop_assert_eq!(serialize_scene(&scene), serialize_scene(&generate_scene(seed, &config).unwrap()));
        prop_assert_eq!(parse_scene(&serialize_scene(&scene)).unwrap(), scene);
    }

    #[test]
    fn blocked_matches_box_enumeration(seed in 0u64..500, probe in any::<u64>()) {
        let scene = generate_scene(seed, &SceneConfig::with_dims([8, 8, 6], [16, 16, 10])).unwrap();
        let [lx, ly, lz] = scene.dims();
        let mut r = rng(probe);
        for _ in 0..200 {
            let c = Cell::new(r.random_range(-2..lx + 2), r.random_range(-2..ly + 2), r.random_range(-2..lz + 2));
            prop_assert_eq!(scene.is_blocked(c), blocked_oracle(&scene, c));
        }
    }

    #[test]
    fn free_distance_matches_walk(seed in 0u64..500, probe in any::<u64>()) {
        let scene = generate_scene(seed, &SceneConfig::with_dims([8, 8, 6], [16, 16, 10])).unwrap();
        let [lx, ly, lz] = scene.dims();
        let mut r = rng(probe);
        for _ in 0..50 {
            let c = Cell::new(r.random_range(0..lx), r.random_range(0..ly), r.random_range(0..lz));
            if blocked_oracle(&scene, c) {
                continue;
            }
            for (i, d) in DELTAS.iter().enumerate() {
                let k = scene.free_distance(c, Dir::from_index(i).unwrap());
                prop_assert_eq!(k, free_run(&scene, c, *d));
            }
        }
    }

    #[test]
    fn solvability_matches_flood_fill(seed in any::<u64>()) {
        let mut r = rng(seed);
        if let Some(scene) = common::random_small_scene(&mut r, [8, 8, 6], 6) {
            prop_assert_eq!(scene.is_solvable(), reachable(&scene, scene.start(), scene.end()));
        }
    }
}

#[test]
fn full_size_scene_holds_invariants() {
    let config = SceneConfig::default();
    let scene = generate_scene(7, &config).unwrap();
    check_invariants(&scene, &config);
    assert_eq!(serialize_scene(&scene), serialize_scene(&generate_scene(7, &config).unwrap()));
}

#[test]
fn partitioned_room_is_unsolvable() {
    let slab = ObstacleBox::new(ObstacleKind::Column, Cell::new(0, 0, 2), Cell::new(5, 5, 3));
    let scene = Scene::new([5, 5, 5], vec![slab], Cell::new(0, 0, 0), Cell::new(4, 4, 4), 0).unwrap();
    assert!(!scene.is_solvable());
    assert!(!reachable(&scene, scene.start(), scene.end()));
}

#[test]
fn hand_written_file_parses() {
    let text = br#"{"version":1,"seed":0,"dims":[5,5,5],"cell_size_m":0.1,"start":[0,0,0],"end":[4,4,4],"obstacles":[]}"#;
    let scene = parse_scene(text).unwrap();
    assert!(scene.is_solvable() && reachable(&scene, scene.start(), scene.end()));
    // canonical form is the same text plus a newline
    let mut canon = text.to_vec();
    canon.push(b'\n');
    assert_eq!(serialize_scene(&scene), canon);
}

#[test]
fn missing_dims_names_the_field() {
    let text = br#"{"version":1,"seed":0,"cell_size_m":0.1,"start":[0,0,0],"end":[4,4,4],"obstacles":[]}"#;
    let err = parse_scene(text).unwrap_err();
    assert!(matches!(err, ParseError::Syntax { .. }));
    assert!(err.to_string().contains("dims"), "{err}");
}
