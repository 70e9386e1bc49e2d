use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Pose3, Vec3};
use crate::semantics::{ClassImage, TerrainClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub channels: usize,
    /// Half of the vertical field of view, degrees; channels span ±this.
    pub vertical_fov_deg: f64,
    pub azimuth_steps: usize,
    pub max_range: f64,
    /// Standard deviation of additive range noise, meters.
    pub range_noise: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { channels: 32, vertical_fov_deg: 22.5, azimuth_steps: 512, max_range: 30.0, range_noise: 0.0 }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 1 || self.azimuth_steps < 4 || !(self.max_range > 0.0) || self.range_noise < 0.0 {
            return Err(Error::Config(format!("invalid LiDAR config {self:?}")));
        }
        Ok(())
    }

    /// Azimuth step, radians.
    pub fn delta_theta(&self) -> f64 {
        std::f64::consts::TAU / self.azimuth_steps as f64
    }

    pub fn elevations(&self) -> Vec<f64> {
        let fov = self.vertical_fov_deg.to_radians();
        if self.channels == 1 {
            return vec![0.0];
        }
        (0..self.channels)
            .map(|c| -fov + 2.0 * fov * c as f64 / (self.channels - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LidarScan {
    /// Sensor-frame returns.
    pub points: Vec<Vec3>,
    pub ranges: Vec<f64>,
}

/// One revolution of the spinning LiDAR. Returns are ordered by channel,
/// then azimuth.
pub fn lidar_scan(scene: &Scene, sensor_pose: &Pose3, cfg: &LidarConfig, seed: u64) -> LidarScan {
    let noise = (cfg.range_noise > 0.0).then(|| Normal::new(0.0, cfg.range_noise).expect("finite sigma"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = sensor_pose.translation();
    let mut scan = LidarScan::default();
    let dtheta = cfg.delta_theta();
    let azimuths: Vec<(f64, f64)> = (0..cfg.azimuth_steps).map(|a| (a as f64 * dtheta).sin_cos()).collect();
    for elev in cfg.elevations() {
        let (se, ce) = elev.sin_cos();
        for &(sa, ca) in &azimuths {
            let local = Vec3::new(ce * ca, ce * sa, se);
            let dir = sensor_pose.rotate(&local);
            if let Some(hit) = scene.cast(&origin, &dir, cfg.max_range) {
                let mut r = hit.t;
                if let Some(n) = &noise {
                    r = (r + n.sample(&mut rng)).max(0.0);
                }
                scan.points.push(local * r);
                scan.ranges.push(r);
            }
        }
    }
    scan
}

/// Oracle segmentation: the class of the first surface seen through each
/// pixel center; `Unknown` where the ray escapes.
pub fn semantic_camera(scene: &Scene, cam_pose: &Pose3, cam: &CameraModel, max_range: f64) -> ClassImage {
    let origin = cam_pose.translation();
    let mut img = ClassImage::filled(cam.width, cam.height, TerrainClass::Unknown);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = cam_pose.rotate(&cam.ray_through(u as f64, v as f64).normalize());
            if let Some(hit) = scene.cast(&origin, &dir, max_range) {
                img.set(u, v, hit.class);
            }
        }
    }
    img
}
