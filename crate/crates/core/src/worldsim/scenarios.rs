//! Built-in scenes.

use super::{Bounds, Obstacle, Pose2, Scene, Shape, TerrainPatch};
use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::semantics::TerrainClass;

pub const BUILTIN_SCENES: &[&str] = &["open_field", "corridor_bushes", "grass_field", "long_range", "deep_grass"];

fn tree(x: f64, y: f64, radius: f64) -> Obstacle {
    Obstacle {
        shape: Shape::Cylinder { center: Vec2::new(x, y), radius, height: 3.0 },
        class: TerrainClass::RigidObstacle,
        pliable: false,
    }
}

fn wall(x0: f64, y0: f64, x1: f64, y1: f64) -> Obstacle {
    Obstacle {
        shape: Shape::Box {
            center: Vec3::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, 0.75),
            half_extents: Vec3::new((x1 - x0) / 2.0, (y1 - y0) / 2.0, 0.75),
            yaw: 0.0,
        },
        class: TerrainClass::RigidObstacle,
        pliable: false,
    }
}

fn grass(x0: f64, y0: f64, x1: f64, y1: f64, height: f64) -> Obstacle {
    Obstacle {
        shape: Shape::Box {
            center: Vec3::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, height / 2.0),
            half_extents: Vec3::new((x1 - x0) / 2.0, (y1 - y0) / 2.0, height / 2.0),
            yaw: 0.0,
        },
        class: TerrainClass::VegetationHighResistance,
        pliable: true,
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64, class: TerrainClass) -> TerrainPatch {
    TerrainPatch {
        polygon: vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)],
        class,
    }
}

fn open_field() -> Scene {
    Scene {
        name: "open_field".into(),
        obstacles: vec![],
        patches: vec![],
        bounds: Bounds { min: [-5.0, -8.0], max: [20.0, 8.0] },
        default_ground: TerrainClass::Stable,
        start: Pose2::new(0.0, 0.0, 0.0),
        goal: Vec2::new(10.0, 0.0),
    }
}

/// A rigid wall across the course whose only opening is filled with bushes.
fn corridor_bushes() -> Scene {
    let gap = 0.9;
    Scene {
        name: "corridor_bushes".into(),
        obstacles: vec![
            wall(5.7, gap, 6.3, 7.9),
            wall(5.7, -7.9, 6.3, -gap),
            grass(5.7, -gap, 6.3, gap, 0.6),
            tree(9.0, 2.5, 0.3),
        ],
        patches: vec![rect(7.0, -3.0, 11.0, 3.0, TerrainClass::Granular)],
        bounds: Bounds { min: [-3.0, -8.0], max: [16.0, 8.0] },
        default_ground: TerrainClass::Stable,
        start: Pose2::new(0.0, 0.0, 0.0),
        goal: Vec2::new(12.0, 0.0),
    }
}

/// Tall grass spanning the whole course between two rigid walls, with trees
/// standing in it.
fn grass_field() -> Scene {
    Scene {
        name: "grass_field".into(),
        obstacles: vec![
            grass(3.0, -5.5, 11.0, 5.5, 0.6),
            wall(-2.0, 5.5, 16.0, 6.0),
            wall(-2.0, -6.0, 16.0, -5.5),
            tree(5.5, 2.0, 0.3),
            tree(8.5, -2.2, 0.3),
            tree(7.0, 4.0, 0.3),
        ],
        patches: vec![],
        bounds: Bounds { min: [-3.0, -7.0], max: [17.0, 7.0] },
        default_ground: TerrainClass::Stable,
        start: Pose2::new(0.0, 0.0, 0.0),
        goal: Vec2::new(14.0, 0.0),
    }
}

/// 100 m course over pavement, sand, rocks and lawn with vine patches and trees.
fn long_range() -> Scene {
    let mut obstacles = vec![
        grass(18.0, -1.5, 20.0, 2.0, 0.5),
        grass(42.0, -3.0, 45.0, 1.0, 0.5),
        grass(68.0, -1.0, 70.0, 3.0, 0.5),
        grass(88.0, -2.0, 89.5, 2.0, 0.5),
    ];
    for (x, y) in [(10.0, 3.0), (27.0, -3.5), (33.0, 2.5), (52.0, 3.0), (58.0, -2.8), (63.0, 4.0), (80.0, -3.0), (94.0, 3.5)] {
        obstacles.push(tree(x, y, 0.35));
    }
    Scene {
        name: "long_range".into(),
        obstacles,
        patches: vec![
            rect(22.0, -10.0, 35.0, 10.0, TerrainClass::Granular),
            rect(50.0, -10.0, 60.0, 10.0, TerrainClass::Rocky),
        ],
        bounds: Bounds { min: [-5.0, -12.0], max: [105.0, 12.0] },
        default_ground: TerrainClass::Stable,
        start: Pose2::new(0.0, 0.0, 0.0),
        goal: Vec2::new(100.0, 0.0),
    }
}

/// A deep band of grass between walls; used to probe the front-region depth.
fn deep_grass() -> Scene {
    Scene {
        name: "deep_grass".into(),
        obstacles: vec![
            grass(2.0, -4.5, 16.0, 4.5, 0.6),
            wall(-2.0, 4.5, 20.0, 5.0),
            wall(-2.0, -5.0, 20.0, -4.5),
        ],
        patches: vec![],
        bounds: Bounds { min: [-3.0, -6.0], max: [22.0, 6.0] },
        default_ground: TerrainClass::Stable,
        start: Pose2::new(0.0, 0.0, 0.0),
        goal: Vec2::new(18.0, 0.0),
    }
}

pub fn builtin_scene(name: &str) -> Result<Scene> {
    let scene = match name {
        "open_field" => open_field(),
        "corridor_bushes" => corridor_bushes(),
        "grass_field" => grass_field(),
        "long_range" => long_range(),
        "deep_grass" => deep_grass(),
        _ => {
            return Err(Error::Config(format!(
                "unknown built-in scene {name:?} (expected one of {})",
                BUILTIN_SCENES.join(", ")
            )))
        }
    };
    scene.validate()?;
    Ok(scene)
}
