//! Synthetic outdoor world: obstacles and terrain patches, a spinning LiDAR,
//! an oracle semantic camera, unicycle kinematics and contact checks.
//!
//! Pliable vegetation returns LiDAR points exactly like rigid obstacles do;
//! only the semantic camera and the collision check tell them apart.

mod raycast;
mod robot;
mod scenarios;
mod scene_file;
mod sensors;

pub use raycast::Hit;
pub use robot::{check_collision, step_robot, Contact, Pose2, RobotLimits, RobotState};
pub use scenarios::{builtin_scene, BUILTIN_SCENES};
pub use scene_file::{load_scene, parse_scene, scene_to_toml};
pub use sensors::{lidar_scan, semantic_camera, LidarConfig, LidarScan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose3, Vec2, Vec3};
use crate::semantics::TerrainClass;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Vertical cylinder standing on the ground.
    Cylinder { center: Vec2, radius: f64, height: f64 },
    /// Box rotated by `yaw` about the vertical axis.
    Box { center: Vec3, half_extents: Vec3, yaw: f64 },
}

impl Shape {
    /// Corners (box) or bounding square (cylinder) of the ground footprint.
    fn footprint_extent(&self) -> Vec<Vec2> {
        match self {
            Shape::Cylinder { center, radius, .. } => vec![
                center + Vec2::new(-radius, -radius),
                center + Vec2::new(*radius, *radius),
            ],
            Shape::Box { center, half_extents, yaw } => {
                let (s, c) = yaw.sin_cos();
                [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                    .iter()
                    .map(|(a, b)| {
                        let lx = a * half_extents.x;
                        let ly = b * half_extents.y;
                        Vec2::new(center.x + c * lx - s * ly, center.y + s * lx + c * ly)
                    })
                    .collect()
            }
        }
    }

    /// Radius of a vertical cylinder enclosing the shape, with its axis.
    pub(crate) fn bounding_circle(&self) -> (Vec2, f64) {
        match self {
            Shape::Cylinder { center, radius, .. } => (*center, *radius),
            Shape::Box { center, half_extents, .. } => (center.xy(), half_extents.xy().norm()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub class: TerrainClass,
    pub pliable: bool,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if self.pliable && self.class != TerrainClass::VegetationHighResistance {
            return Err(Error::Config(format!("only vegetation may be pliable (got {:?})", self.class)));
        }
        match &self.shape {
            Shape::Cylinder { radius, height, .. } if !(*radius > 0.0 && *height > 0.0) => {
                Err(Error::Config("cylinder radius and height must be positive".into()))
            }
            Shape::Box { half_extents, .. } if half_extents.iter().any(|h| !(*h > 0.0)) => {
                Err(Error::Config("box half extents must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Convex ground polygon carrying a terrain class.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainPatch {
    pub polygon: Vec<Vec2>,
    pub class: TerrainClass,
}

impl TerrainPatch {
    pub fn validate(&self) -> Result<()> {
        let n = self.polygon.len();
        if n < 3 {
            return Err(Error::Config("terrain patch needs at least 3 vertices".into()));
        }
        if !self.class.is_ground() {
            return Err(Error::Config(format!("terrain patch class {:?} is not a ground class", self.class)));
        }
        let mut sign = 0.0f64;
        let mut area2 = 0.0;
        for k in 0..n {
            let a = self.polygon[k];
            let b = self.polygon[(k + 1) % n];
            let c = self.polygon[(k + 2) % n];
            let cross = (b - a).perp(&(c - b));
            area2 += a.perp(&b);
            if cross.abs() > 1e-12 {
                if sign != 0.0 && cross.signum() != sign {
                    return Err(Error::Config("terrain patch polygon must be convex".into()));
                }
                sign = cross.signum();
            }
        }
        if area2.abs() < 1e-9 {
            return Err(Error::Config("terrain patch polygon has no area".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        let n = self.polygon.len();
        let mut sign = 0.0f64;
        for k in 0..n {
            let a = self.polygon[k];
            let b = self.polygon[(k + 1) % n];
            let cross = (b - a).perp(&(p - a));
            if cross.abs() <= 1e-12 {
                continue;
            }
            if sign != 0.0 && cross.signum() != sign {
                return false;
            }
            sign = cross.signum();
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub obstacles: Vec<Obstacle>,
    pub patches: Vec<TerrainPatch>,
    pub bounds: Bounds,
    pub default_ground: TerrainClass,
    pub start: Pose2,
    pub goal: Vec2,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.min[0] < self.bounds.max[0] && self.bounds.min[1] < self.bounds.max[1]) {
            return Err(Error::Config("scene bounds are empty".into()));
        }
        if !self.default_ground.is_ground() {
            return Err(Error::Config("default_ground must be a ground class".into()));
        }
        for o in &self.obstacles {
            o.validate()?;
            for c in o.shape.footprint_extent() {
                if !self.bounds.contains(&c) {
                    return Err(Error::Config(format!("obstacle footprint {c:?} leaves scene bounds")));
                }
            }
        }
        for p in &self.patches {
            p.validate()?;
        }
        let start = Vec2::new(self.start.x, self.start.y);
        if !self.bounds.contains(&start) || !self.bounds.contains(&self.goal) {
            return Err(Error::Config("start and goal must lie inside the scene bounds".into()));
        }
        Ok(())
    }

    /// Ground class at a world position.
    pub fn ground_class(&self, p: &Vec2) -> TerrainClass {
        self.patches
            .iter()
            .find(|patch| patch.contains(p))
            .map(|patch| patch.class)
            .unwrap_or(self.default_ground)
    }
}

/// Sensor mounting on the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mounts {
    pub lidar_height: f64,
    pub camera_height: f64,
    /// Negative looks down, degrees.
    pub camera_pitch_deg: f64,
}

impl Default for Mounts {
    fn default() -> Self {
        Self { lidar_height: 0.8, camera_height: 0.5, camera_pitch_deg: -10.0 }
    }
}

/// Camera-to-world pose of a camera on the robot. The optical frame has `z`
/// forward, `x` right and `y` down.
pub fn camera_pose(pose: &Pose2, height: f64, pitch_deg: f64) -> Pose3 {
    use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
    let body_from_optical = Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ));
    let yaw = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), pose.heading);
    let pitch = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -pitch_deg.to_radians());
    let rot = yaw * pitch * UnitQuaternion::from_rotation_matrix(&body_from_optical);
    Pose3::from_rotation(rot, Vec3::new(pose.x, pose.y, height))
}

/// Sensor-to-world pose of a level LiDAR on the robot.
pub fn lidar_pose(pose: &Pose2, height: f64) -> Pose3 {
    Pose3::from_yaw(pose.heading, Vec3::new(pose.x, pose.y, height))
}

/// Robot body pose used to anchor the front region.
pub fn body_pose(pose: &Pose2) -> Pose3 {
    Pose3::from_yaw(pose.heading, Vec3::new(pose.x, pose.y, 0.0))
}
