//! TOML scene files.
//!
//! ```toml
//! name = "demo"
//! default_ground = "stable"
//! start = [0.0, 0.0, 0.0]      # x, y, heading
//! goal = [10.0, 0.0]
//! bounds = { min = [-5.0, -5.0], max = [15.0, 5.0] }
//!
//! [[obstacles]]
//! shape = "cylinder"            # params: cx, cy, radius, height
//! params = [5.0, 1.0, 0.4, 3.0]
//! class = "rigid_obstacle"
//! pliable = false
//!
//! [[obstacles]]
//! shape = "box"                 # params: cx, cy, cz, hx, hy, hz, yaw
//! params = [5.0, -2.0, 0.25, 1.0, 1.0, 0.25, 0.0]
//! class = "vegetation_high_resistance"
//! pliable = true
//!
//! [[patches]]
//! polygon = [[0.0, 0.0], [4.0, 0.0], [4.0, 2.0]]
//! class = "granular"
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bounds, Obstacle, Pose2, Scene, Shape, TerrainPatch};
use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::semantics::TerrainClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ShapeKind {
    Cylinder,
    Box,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleEntry {
    shape: ShapeKind,
    params: Vec<f64>,
    class: TerrainClass,
    pliable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchEntry {
    polygon: Vec<[f64; 2]>,
    class: TerrainClass,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    name: Option<String>,
    default_ground: TerrainClass,
    start: [f64; 3],
    goal: [f64; 2],
    bounds: Bounds,
    #[serde(default)]
    obstacles: Vec<ObstacleEntry>,
    #[serde(default)]
    patches: Vec<PatchEntry>,
}

fn obstacle_from(e: &ObstacleEntry) -> Result<Obstacle> {
    let p = &e.params;
    let shape = match e.shape {
        ShapeKind::Cylinder => {
            let [cx, cy, radius, height] = p[..] else {
                return Err(Error::Config(format!("cylinder needs 4 params, got {}", p.len())));
            };
            Shape::Cylinder { center: Vec2::new(cx, cy), radius, height }
        }
        ShapeKind::Box => {
            let [cx, cy, cz, hx, hy, hz, yaw] = p[..] else {
                return Err(Error::Config(format!("box needs 7 params, got {}", p.len())));
            };
            Shape::Box { center: Vec3::new(cx, cy, cz), half_extents: Vec3::new(hx, hy, hz), yaw }
        }
    };
    Ok(Obstacle { shape, class: e.class, pliable: e.pliable })
}

/// Parses and validates a scene; `fallback_name` is used when the file has no `name`.
pub fn parse_scene(text: &str, fallback_name: &str) -> Result<Scene> {
    let raw: SceneFile = toml::from_str(text).map_err(|e| Error::Config(format!("scene file: {e}")))?;
    let obstacles = raw.obstacles.iter().map(obstacle_from).collect::<Result<Vec<_>>>()?;
    let patches = raw
        .patches
        .iter()
        .map(|p| TerrainPatch { polygon: p.polygon.iter().map(|v| Vec2::new(v[0], v[1])).collect(), class: p.class })
        .collect();
    let scene = Scene {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        obstacles,
        patches,
        bounds: raw.bounds,
        default_ground: raw.default_ground,
        start: Pose2::new(raw.start[0], raw.start[1], raw.start[2]),
        goal: Vec2::new(raw.goal[0], raw.goal[1]),
    };
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    parse_scene(&text, stem)
}

pub fn scene_to_toml(scene: &Scene) -> String {
    let file = SceneFile {
        name: Some(scene.name.clone()),
        default_ground: scene.default_ground,
        start: [scene.start.x, scene.start.y, scene.start.heading],
        goal: [scene.goal.x, scene.goal.y],
        bounds: scene.bounds,
        obstacles: scene
            .obstacles
            .iter()
            .map(|o| {
                let (shape, params) = match &o.shape {
                    Shape::Cylinder { center, radius, height } => {
                        (ShapeKind::Cylinder, vec![center.x, center.y, *radius, *height])
                    }
                    Shape::Box { center, half_extents: h, yaw } => {
                        (ShapeKind::Box, vec![center.x, center.y, center.z, h.x, h.y, h.z, *yaw])
                    }
                };
                ObstacleEntry { shape, params, class: o.class, pliable: o.pliable }
            })
            .collect(),
        patches: scene
            .patches
            .iter()
            .map(|p| PatchEntry { polygon: p.polygon.iter().map(|v| [v.x, v.y]).collect(), class: p.class })
            .collect(),
    };
    toml::to_string(&file).expect("scene serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
default_ground = "stable"
start = [0.0, 0.0, 0.0]
goal = [10.0, 0.0]
bounds = { min = [-5.0, -5.0], max = [15.0, 5.0] }

[[obstacles]]
shape = "cylinder"
params = [5.0, 1.0, 0.4, 3.0]
class = "rigid_obstacle"
pliable = false

[[obstacles]]
shape = "box"
params = [5.0, -2.0, 0.25, 1.0, 1.0, 0.25, 0.0]
class = "vegetation_high_resistance"
pliable = true

[[patches]]
polygon = [[0.0, 0.0], [4.0, 0.0], [4.0, 2.0]]
class = "granular"
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = parse_scene(DEMO, "demo").unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.obstacles.len(), 2);
        assert_eq!(s.ground_class(&Vec2::new(3.0, 0.5)), TerrainClass::Granular);
        assert_eq!(s.ground_class(&Vec2::new(-3.0, 0.5)), TerrainClass::Stable);
        let back = parse_scene(&scene_to_toml(&s), "other").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_scenes() {
        let missing = DEMO.replace("default_ground = \"stable\"\n", "");
        assert!(matches!(parse_scene(&missing, "x"), Err(Error::Config(_))));
        let bad_params = DEMO.replace("[5.0, 1.0, 0.4, 3.0]", "[5.0, 1.0]");
        assert!(parse_scene(&bad_params, "x").is_err());
        let rigid_pliable = DEMO.replace("pliable = false", "pliable = true");
        assert!(parse_scene(&rigid_pliable, "x").is_err());
        let outside = DEMO.replace("[5.0, 1.0, 0.4, 3.0]", "[14.9, 1.0, 0.4, 3.0]");
        assert!(parse_scene(&outside, "x").is_err());
        let unknown_key = format!("{DEMO}\nextra = 1\n");
        assert!(parse_scene(&unknown_key, "x").is_err());
    }
}
