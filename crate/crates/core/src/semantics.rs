//! Terrain classes, their traversability costs, and cost attachment to LiDAR
//! returns through the camera.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pinhole_project, CameraModel, Pose3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainClass {
    Stable,
    Granular,
    Rocky,
    VegetationHighResistance,
    RigidObstacle,
    Unknown,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 6] = [
        TerrainClass::Stable,
        TerrainClass::Granular,
        TerrainClass::Rocky,
        TerrainClass::VegetationHighResistance,
        TerrainClass::RigidObstacle,
        TerrainClass::Unknown,
    ];

    pub fn is_ground(self) -> bool {
        matches!(self, TerrainClass::Stable | TerrainClass::Granular | TerrainClass::Rocky)
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

/// Per-class traversability cost in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub stable: f64,
    pub granular: f64,
    pub rocky: f64,
    pub vegetation_high_resistance: f64,
    pub rigid_obstacle: f64,
    pub unknown: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            stable: 0.0,
            granular: 0.25,
            rocky: 0.5,
            vegetation_high_resistance: 0.85,
            rigid_obstacle: 1.0,
            unknown: 0.6,
        }
    }
}

impl CostModel {
    /// Checks range, strict ordering of the terrain classes and rigid saturation.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.stable,
            self.granular,
            self.rocky,
            self.vegetation_high_resistance,
            self.rigid_obstacle,
            self.unknown,
        ];
        if all.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config("cost model values must lie in [0, 1]".into()));
        }
        let ordered = all[..5].windows(2).all(|w| w[0] < w[1]);
        if !ordered {
            return Err(Error::Config(
                "cost model must be strictly increasing from stable to rigid_obstacle".into(),
            ));
        }
        if self.rigid_obstacle != 1.0 {
            return Err(Error::Config("rigid_obstacle cost must be 1.0".into()));
        }
        Ok(())
    }

    pub fn cost_of(&self, class: TerrainClass) -> f64 {
        match class {
            TerrainClass::Stable => self.stable,
            TerrainClass::Granular => self.granular,
            TerrainClass::Rocky => self.rocky,
            TerrainClass::VegetationHighResistance => self.vegetation_high_resistance,
            TerrainClass::RigidObstacle => self.rigid_obstacle,
            TerrainClass::Unknown => self.unknown,
        }
    }
}

/// Row-major per-pixel class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassImage {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<TerrainClass>,
}

impl ClassImage {
    pub fn filled(width: usize, height: usize, class: TerrainClass) -> Self {
        Self { width, height, classes: vec![class; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> TerrainClass {
        self.classes[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, class: TerrainClass) {
        self.classes[v * self.width + u] = class;
    }
}

/// Row-major per-pixel traversability costs and the classes they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CostImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub class_ids: Vec<TerrainClass>,
}

impl CostImage {
    /// Image with every pixel at `value` and class `Unknown`.
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
            class_ids: vec![TerrainClass::Unknown; width * height],
        }
    }

    /// Wraps raw render output; classes are `Unknown`.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        Ok(Self { width, height, class_ids: vec![TerrainClass::Unknown; values.len()], values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn same_shape(&self, other: &CostImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// A LiDAR return with the traversability cost of the pixel it projects to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub p_lidar: Vec3,
    pub p_cam: Vec3,
    pub cost: f64,
    pub class: TerrainClass,
}

/// Maps an oracle class image to costs.
pub fn segment(classes: &ClassImage, model: &CostModel) -> Result<CostImage> {
    if classes.classes.is_empty() {
        return Err(Error::EmptyInput("class image"));
    }
    Ok(CostImage {
        width: classes.width,
        height: classes.height,
        values: classes.classes.iter().map(|&c| model.cost_of(c)).collect(),
        class_ids: classes.classes.clone(),
    })
}

/// Transforms LiDAR points into the camera, projects them and reads the cost
/// of the nearest pixel. Points behind the near plane or outside the image are
/// dropped.
pub fn associate_costs(
    points: &[Vec3],
    lidar_to_cam: &Pose3,
    cam: &CameraModel,
    costmap: &CostImage,
) -> Result<Vec<LabeledPoint>> {
    if costmap.width != cam.width || costmap.height != cam.height {
        return Err(Error::DimensionMismatch(format!(
            "costmap {}x{} vs camera {}x{}",
            costmap.width, costmap.height, cam.width, cam.height
        )));
    }
    Ok(points
        .iter()
        .filter_map(|p| {
            let p_cam = lidar_to_cam.apply(p);
            let uv = pinhole_project(cam, &p_cam).ok()?;
            let (u, v) = cam.pixel_of(&uv)?;
            let idx = v * cam.width + u;
            Some(LabeledPoint {
                p_lidar: *p,
                p_cam,
                cost: costmap.values[idx],
                class: costmap.class_ids[idx],
            })
        })
        .collect())
}
