use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esdf::{
    build_cost_volume, fuse, inflate_soft, lidar_esdf, rasterize_to_ground, volume_to_distance, CostVolumeMode,
    EsdfConfig, EsdfGrid2D, FrontRegion,
};
use crate::geometry::{CameraModel, Grid2Spec, Grid3Spec, Pose3, Vec2, Vec3};
use crate::semantics::{associate_costs, segment, ClassImage, CostModel};
use crate::splat::{enforce_budget, optimize_step, spawn_gaussians, LearningRates, SpawnConfig, SplatField};
use crate::worldsim::{
    body_pose, camera_pose, lidar_pose, lidar_scan, semantic_camera, LidarConfig, LidarScan, Mounts, Pose2, Scene,
};

/// Which map the controller plans on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pipeline {
    /// Semantic splat field fused with the LiDAR field in the front region.
    Semantic(CostVolumeMode),
    /// LiDAR field everywhere; semantics are skipped.
    GeometricOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub camera: CameraModel,
    pub mounts: Mounts,
    pub lidar: LidarConfig,
    pub costs: CostModel,
    pub spawn: SpawnConfig,
    pub budget: usize,
    pub frustum_margin_deg: f64,
    pub optimize_steps: usize,
    pub learning_rates: LearningRates,
    pub esdf: EsdfConfig,
    pub region: FrontRegion,
    /// Local grid cell size, meters.
    pub grid_resolution: f64,
    /// Local grid side length in cells, centered on the robot.
    pub grid_cells: usize,
    /// Height of the lowest voxel layer center, meters.
    pub volume_z0: f64,
    pub volume_layers: usize,
    pub inflation_radius: f64,
    pub inflation_sigma: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel { fx: 32.0, fy: 32.0, cx: 31.5, cy: 23.5, width: 64, height: 48, z_near: 0.05 },
            mounts: Mounts::default(),
            lidar: LidarConfig::default(),
            costs: CostModel::default(),
            spawn: SpawnConfig { alpha0: 0.999, s_min: 0.2, ..SpawnConfig::default() },
            budget: 20_000,
            frustum_margin_deg: 10.0,
            optimize_steps: 5,
            learning_rates: LearningRates::default(),
            esdf: EsdfConfig::default(),
            region: FrontRegion::default(),
            grid_resolution: 0.1,
            grid_cells: 160,
            volume_z0: 0.15,
            volume_layers: 7,
            inflation_radius: 0.6,
            inflation_sigma: 0.4,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.lidar.validate()?;
        self.costs.validate()?;
        self.esdf.validate()?;
        if !(self.grid_resolution > 0.0 && self.grid_cells >= 2 && self.volume_layers >= 1) {
            return Err(Error::Config("local grid needs a positive resolution and at least 2 cells".into()));
        }
        if !(self.region.depth > 0.0 && self.region.width > 0.0) {
            return Err(Error::Config(format!("front region must be non-empty ({:?})", self.region)));
        }
        if !(self.inflation_radius >= 0.0 && self.inflation_sigma > 0.0) {
            return Err(Error::Config("inflation needs r ≥ 0 and σ > 0".into()));
        }
        let top = self.volume_z0 + (self.volume_layers - 1) as f64 * self.grid_resolution;
        if top < self.esdf.z_min || self.volume_z0 > self.esdf.z_max {
            return Err(Error::Config(format!(
                "voxel layers [{}, {top}] miss the height band [{}, {}]",
                self.volume_z0, self.esdf.z_min, self.esdf.z_max
            )));
        }
        Ok(())
    }

    /// Local grid centered on a position snapped to the cell size.
    pub fn grid_around(&self, center: &Vec2) -> Result<Grid2Spec> {
        let r = self.grid_resolution;
        let snapped = Vec2::new((center.x / r).round() * r, (center.y / r).round() * r);
        Grid2Spec::centered(snapped, r, self.grid_cells)
    }
}

/// Raw sensor data for one mapping tick.
#[derive(Debug, Clone)]
pub struct Observation {
    pub robot: Pose2,
    pub lidar_pose: Pose3,
    pub camera_pose: Pose3,
    pub scan: LidarScan,
    pub classes: ClassImage,
}

pub fn observe(scene: &Scene, robot: &Pose2, cfg: &MappingConfig, seed: u64) -> Observation {
    let lp = lidar_pose(robot, cfg.mounts.lidar_height);
    let cp = camera_pose(robot, cfg.mounts.camera_height, cfg.mounts.camera_pitch_deg);
    Observation {
        robot: *robot,
        lidar_pose: lp,
        camera_pose: cp,
        scan: lidar_scan(scene, &lp, &cfg.lidar, seed),
        classes: semantic_camera(scene, &cp, &cfg.camera, cfg.lidar.max_range),
    }
}

#[derive(Debug, Clone)]
pub struct MapProducts {
    /// Inflated LiDAR field.
    pub lidar: EsdfGrid2D,
    /// Inflated semantic field; `None` for the geometric pipeline.
    pub gsplat: Option<EsdfGrid2D>,
    pub fused: EsdfGrid2D,
    pub robot_pose: Pose3,
}

/// Persistent splat field plus the per-tick map pipeline.
#[derive(Debug, Clone)]
pub struct Mapper {
    pub cfg: MappingConfig,
    pub pipeline: Pipeline,
    pub field: SplatField,
}

impl Mapper {
    pub fn new(cfg: MappingConfig, pipeline: Pipeline) -> Result<Self> {
        cfg.validate()?;
        let field = SplatField::new(cfg.budget);
        Ok(Self { cfg, pipeline, field })
    }

    /// Spawn, optimize, prune, and rebuild the fused field around the robot.
    pub fn integrate(&mut self, obs: &Observation) -> Result<MapProducts> {
        let cfg = &self.cfg;
        let spec = cfg.grid_around(&obs.robot.position())?;
        let points_world: Vec<Vec3> = obs.scan.points.iter().map(|p| obs.lidar_pose.apply(p)).collect();
        let lidar = inflate_soft(&lidar_esdf(&points_world, &spec, &cfg.esdf), cfg.inflation_radius, cfg.inflation_sigma)?;
        let robot_pose = body_pose(&obs.robot);
        let Pipeline::Semantic(mode) = self.pipeline else {
            return Ok(MapProducts { fused: lidar.clone(), lidar, gsplat: None, robot_pose });
        };

        let costmap = segment(&obs.classes, &cfg.costs)?;
        let world_to_cam = obs.camera_pose.inverse();
        let lidar_to_cam = world_to_cam.compose(&obs.lidar_pose);
        let labeled = associate_costs(&obs.scan.points, &lidar_to_cam, &cfg.camera, &costmap)?;
        self.field.next_frame();
        spawn_gaussians(&labeled, &mut self.field, &obs.lidar_pose, &cfg.spawn);
        for _ in 0..cfg.optimize_steps {
            optimize_step(&mut self.field, &world_to_cam, &cfg.camera, &costmap, &cfg.learning_rates, cfg.costs.unknown)?;
        }
        enforce_budget(&mut self.field, &world_to_cam, &cfg.camera, cfg.frustum_margin_deg);

        let grid3 = Grid3Spec::over_plane(&spec, cfg.volume_z0, cfg.volume_layers)?;
        let volume = build_cost_volume(&self.field, &grid3, mode)?;
        let distances = volume_to_distance(&volume.values, cfg.esdf.d_max);
        let raster = rasterize_to_ground(&distances, &grid3, (cfg.esdf.z_min, cfg.esdf.z_max), cfg.esdf.d_max)?;
        let gsplat = inflate_soft(&raster, cfg.inflation_radius, cfg.inflation_sigma)?;
        let fused = fuse(&gsplat, &lidar, &robot_pose, &cfg.region)?;
        Ok(MapProducts { lidar, gsplat: Some(gsplat), fused, robot_pose })
    }
}
