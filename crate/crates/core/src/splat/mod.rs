//! Gaussian scene field carrying a scalar traversability cost per primitive.
//!
//! Each primitive has a mean, a covariance factorized as `R·S·Sᵀ·Rᵀ`, an
//! opacity logit and a cost in `[0, 1]`. The field is rendered into cost
//! images by front-to-back alpha compositing ([`render`]), fitted to
//! ground-truth cost images ([`optimize`]), grown from labeled LiDAR returns
//! ([`spawn_gaussians`]) and held under a primitive budget
//! ([`enforce_budget`]).

mod dump;
mod optimize;
mod render;
mod ssim;

pub use dump::{read_field, write_field};
pub use optimize::{loss, loss_and_grad, optimize_step, LearningRates, PrimitiveGrad};
pub use render::{
    project_gaussian, render_cost_map, render_with_grad, ProjectedGaussian, RenderGrad, COV_FLOOR,
};
pub use ssim::{ssim, ssim_with_grad, SSIM_C1, SSIM_C2};

use std::collections::HashMap;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraModel, Mat3, Pose3, Vec3};
use crate::semantics::LabeledPoint;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub mu: Vec3,
    /// Per-axis standard deviation, meters.
    pub scale: Vec3,
    pub rot: UnitQuaternion<f64>,
    pub opacity_logit: f64,
    pub cost: f64,
    pub birth_frame: u64,
}

impl GaussianPrimitive {
    pub fn isotropic(mu: Vec3, sigma: f64, opacity: f64, cost: f64, birth_frame: u64) -> Self {
        Self {
            mu,
            scale: Vec3::repeat(sigma),
            rot: UnitQuaternion::identity(),
            opacity_logit: logit(opacity),
            cost,
            birth_frame,
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.max()
    }

    /// `R·S·Sᵀ·Rᵀ`.
    pub fn covariance(&self) -> Mat3 {
        covariance_of(self)
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis_sq(&self, x: &Vec3) -> f64 {
        let local = self.rot.inverse() * (x - self.mu);
        (local.x / self.scale.x).powi(2) + (local.y / self.scale.y).powi(2) + (local.z / self.scale.z).powi(2)
    }
}

pub fn covariance_of(g: &GaussianPrimitive) -> Mat3 {
    let r = g.rot.to_rotation_matrix().into_inner();
    let s2 = Mat3::from_diagonal(&g.scale.component_mul(&g.scale));
    let c = r * s2 * r.transpose();
    // exact symmetry
    (c + c.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnConfig {
    /// Opacity assigned at spawn.
    pub alpha0: f64,
    /// Minimum spacing between primitive means, meters.
    pub r_dup: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Angular spacing of LiDAR rays used for the spawn footprint, radians.
    pub delta_theta: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.7,
            r_dup: 0.15,
            s_min: 0.05,
            s_max: 0.5,
            delta_theta: std::f64::consts::TAU / 512.0,
        }
    }
}

/// Upper bound on any primitive's per-axis scale, meters.
pub const SCALE_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SplatField {
    pub primitives: Vec<GaussianPrimitive>,
    pub budget: usize,
    pub frame_counter: u64,
}

impl Default for SplatField {
    fn default() -> Self {
        Self::new(20_000)
    }
}

impl SplatField {
    pub fn new(budget: usize) -> Self {
        Self { primitives: Vec::new(), budget, frame_counter: 0 }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn next_frame(&mut self) -> u64 {
        self.frame_counter += 1;
        self.frame_counter
    }
}

/// Uniform hash grid over primitive means.
struct MeanHash {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<Vec3>>,
}

impl MeanHash {
    fn new(cell: f64) -> Self {
        Self { cell, buckets: HashMap::new() }
    }

    fn key(&self, p: &Vec3) -> (i64, i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        )
    }

    fn insert(&mut self, p: Vec3) {
        let k = self.key(&p);
        self.buckets.entry(k).or_default().push(p);
    }

    fn any_within(&self, p: &Vec3, r: f64) -> bool {
        let (i, j, k) = self.key(p);
        for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(b) = self.buckets.get(&(i + di, j + dj, k + dk)) {
                        if b.iter().any(|q| (q - p).norm() <= r) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Adds one isotropic primitive per labeled point that has no existing mean
/// within `r_dup`. The footprint grows with range as `range·Δθ`, clamped to
/// `[s_min, s_max]`.
pub fn spawn_gaussians(
    points: &[LabeledPoint],
    field: &mut SplatField,
    lidar_pose_world: &Pose3,
    cfg: &SpawnConfig,
) -> usize {
    let r_dup = cfg.r_dup.max(1e-9);
    let mut hash = MeanHash::new(r_dup);
    for g in &field.primitives {
        hash.insert(g.mu);
    }
    let s_max = cfg.s_max.min(SCALE_MAX);
    let s_min = cfg.s_min.min(s_max);
    let logit0 = logit(cfg.alpha0);
    let mut added = 0;
    for lp in points {
        let mu = lidar_pose_world.apply(&lp.p_lidar);
        if hash.any_within(&mu, cfg.r_dup) {
            continue;
        }
        let range = lp.p_lidar.norm();
        let s = (range * cfg.delta_theta).clamp(s_min, s_max);
        field.primitives.push(GaussianPrimitive {
            mu,
            scale: Vec3::repeat(s),
            rot: UnitQuaternion::identity(),
            opacity_logit: logit0,
            cost: lp.cost.clamp(0.0, 1.0),
            birth_frame: field.frame_counter,
        });
        hash.insert(mu);
        added += 1;
    }
    added
}

/// Whether a world point lies inside the camera frustum widened by `margin_deg`
/// on every side.
pub fn in_expanded_frustum(world_to_cam: &Pose3, cam: &CameraModel, p_world: &Vec3, margin_deg: f64) -> bool {
    let p = world_to_cam.apply(p_world);
    let margin = margin_deg.to_radians();
    let h = p.x.atan2(p.z);
    let v = p.y.atan2(p.z);
    let h_lo = ((-0.5 - cam.cx) / cam.fx).atan() - margin;
    let h_hi = ((cam.width as f64 - 0.5 - cam.cx) / cam.fx).atan() + margin;
    let v_lo = ((-0.5 - cam.cy) / cam.fy).atan() - margin;
    let v_hi = ((cam.height as f64 - 0.5 - cam.cy) / cam.fy).atan() + margin;
    p.z > 0.0 && h >= h_lo && h <= h_hi && v >= v_lo && v <= v_hi
}

/// Drops primitives until the field fits its budget: first those outside the
/// widened frustum, oldest first, then in-frustum ones, oldest first.
/// Returns the number of primitives removed.
pub fn enforce_budget(field: &mut SplatField, world_to_cam: &Pose3, cam: &CameraModel, margin_deg: f64) -> usize {
    let n = field.primitives.len();
    if n <= field.budget {
        return 0;
    }
    let excess = n - field.budget;
    let inside: Vec<bool> = field
        .primitives
        .iter()
        .map(|g| in_expanded_frustum(world_to_cam, cam, &g.mu, margin_deg))
        .collect();
    // (in_frustum, birth_frame, index): outside before inside, older before younger
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (inside[i], field.primitives[i].birth_frame, i));
    let mut drop = vec![false; n];
    for &i in order.iter().take(excess) {
        drop[i] = true;
    }
    let mut idx = 0;
    field.primitives.retain(|_| {
        let keep = !drop[idx];
        idx += 1;
        keep
    });
    excess
}

/// Continuous traversability field `min(1, Σ σ(oᵢ)·cᵢ·exp(-½ mᵢ²))`, skipping
/// primitives farther than three times their largest scale.
pub fn query_field(field: &SplatField, x: &Vec3) -> f64 {
    field_sum(field.primitives.iter(), x).min(1.0)
}

fn field_sum<'a>(prims: impl Iterator<Item = &'a GaussianPrimitive>, x: &Vec3) -> f64 {
    let mut sum = 0.0;
    for g in prims {
        let reach = 3.0 * g.max_scale();
        if (x - g.mu).norm_squared() > reach * reach {
            continue;
        }
        sum += g.opacity() * g.cost * (-0.5 * g.mahalanobis_sq(x)).exp();
    }
    sum
}

/// Bucketed view of a field for many point queries.
pub struct FieldIndex<'a> {
    field: &'a SplatField,
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl<'a> FieldIndex<'a> {
    pub fn new(field: &'a SplatField) -> Self {
        let reach = field
            .primitives
            .iter()
            .map(|g| 3.0 * g.max_scale())
            .fold(0.0f64, f64::max)
            .max(1e-3);
        let cell = reach;
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, g) in field.primitives.iter().enumerate() {
            let k = (
                (g.mu.x / cell).floor() as i64,
                (g.mu.y / cell).floor() as i64,
                (g.mu.z / cell).floor() as i64,
            );
            buckets.entry(k).or_default().push(i as u32);
        }
        Self { field, cell, buckets }
    }

    /// Same value as [`query_field`].
    pub fn query(&self, x: &Vec3) -> f64 {
        let (i, j, k) = (
            (x.x / self.cell).floor() as i64,
            (x.y / self.cell).floor() as i64,
            (x.z / self.cell).floor() as i64,
        );
        let mut ids: Vec<u32> = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(b) = self.buckets.get(&(i + di, j + dj, k + dk)) {
                        ids.extend_from_slice(b);
                    }
                }
            }
        }
        // summation order must match the linear scan
        ids.sort_unstable();
        field_sum(ids.iter().map(|&i| &self.field.primitives[i as usize]), x).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::TerrainClass;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn lp(p: Vec3, cost: f64) -> LabeledPoint {
        LabeledPoint { p_lidar: p, p_cam: p, cost, class: TerrainClass::Unknown }
    }

    fn cam() -> CameraModel {
        CameraModel::new(32.0, 32.0, 31.5, 23.5, 64, 48, 0.05).unwrap()
    }

    #[test]
    fn covariance_examples() {
        let mut g = GaussianPrimitive::isotropic(Vec3::zeros(), 1.0, 0.5, 0.5, 0);
        g.scale = Vec3::new(1.0, 2.0, 3.0);
        let c = covariance_of(&g);
        assert!((c - Mat3::from_diagonal(&Vec3::new(1.0, 4.0, 9.0))).abs().max() < 1e-12);

        g.scale = Vec3::new(1.0, 2.0, 1.0);
        g.rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2);
        let c = covariance_of(&g);
        assert!((c - Mat3::from_diagonal(&Vec3::new(4.0, 1.0, 1.0))).abs().max() < 1e-12);
    }

    proptest! {
        #[test]
        fn covariance_is_spd(
            q in prop::array::uniform4(-1.0f64..1.0),
            s in prop::array::uniform3(0.01f64..2.0),
        ) {
            let n = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
            prop_assume!(n > 1e-3);
            let rot = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
            let g = GaussianPrimitive {
                mu: Vec3::zeros(), scale: Vec3::new(s[0], s[1], s[2]), rot,
                opacity_logit: 0.0, cost: 0.5, birth_frame: 0,
            };
            let c = covariance_of(&g);
            prop_assert!((c - c.transpose()).abs().max() < 1e-12);
            let eig = c.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0);
        }

        #[test]
        fn query_monotone_in_cost(
            mus in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..6),
            x in prop::array::uniform3(-1.0f64..1.0),
            which in 0usize..6,
            bump in 0.0f64..0.5,
        ) {
            let mut f = SplatField::new(100);
            for (i, m) in mus.iter().enumerate() {
                f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(m[0], m[1], m[2]), 0.4, 0.8, 0.1 * i as f64, 0));
            }
            let x = Vec3::new(x[0], x[1], x[2]);
            let before = query_field(&f, &x);
            prop_assert!((0.0..=1.0).contains(&before));
            let k = which % f.len();
            f.primitives[k].cost = (f.primitives[k].cost + bump).min(1.0);
            let after = query_field(&f, &x);
            prop_assert!(after >= before);
            prop_assert_eq!(FieldIndex::new(&f).query(&x), after);
        }

        #[test]
        fn budget_always_holds(n in 0usize..60, budget in 0usize..30, yaw in -3.2f64..3.2) {
            let mut f = SplatField::new(budget);
            for i in 0..n {
                let a = i as f64 * 0.7;
                f.primitives.push(GaussianPrimitive::isotropic(
                    Vec3::new(5.0 * a.cos(), 5.0 * a.sin(), 0.3), 0.1, 0.7, 0.5, (i % 7) as u64));
            }
            let w2c = crate::worldsim::camera_pose(&crate::worldsim::Pose2::new(0.0, 0.0, yaw), 0.5, -10.0).inverse();
            enforce_budget(&mut f, &w2c, &cam(), 10.0);
            prop_assert!(f.len() <= budget);
            prop_assert!(f.len() == n.min(budget));
        }
    }

    #[test]
    fn query_examples() {
        let mut f = SplatField::new(10);
        assert_eq!(query_field(&f, &Vec3::zeros()), 0.0);
        let mut g = GaussianPrimitive::isotropic(Vec3::new(1.0, 2.0, 3.0), 0.3, 0.5, 0.7, 0);
        g.opacity_logit = 40.0;
        f.primitives.push(g.clone());
        assert!((query_field(&f, &Vec3::new(1.0, 2.0, 3.0)) - 0.7).abs() < 1e-6);

        // two saturating primitives of cost 0.8: unclamped sum 1.6, clamped 1.0
        let mut f = SplatField::new(10);
        for _ in 0..2 {
            let mut g = GaussianPrimitive::isotropic(Vec3::zeros(), 0.3, 0.5, 0.8, 0);
            g.opacity_logit = 40.0;
            f.primitives.push(g);
        }
        let raw = field_sum(f.primitives.iter(), &Vec3::zeros());
        assert!((raw - 1.6).abs() < 1e-9);
        assert_eq!(query_field(&f, &Vec3::zeros()), 1.0);
    }

    #[test]
    fn spawn_examples() {
        let cfg = SpawnConfig::default();
        let mut f = SplatField::new(100);
        spawn_gaussians(&[lp(Vec3::new(1.0, 2.0, 3.0), 0.85)], &mut f, &Pose3::identity(), &cfg);
        assert_eq!(f.len(), 1);
        assert_eq!(f.primitives[0].mu, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(f.primitives[0].cost, 0.85);
        assert!((f.primitives[0].opacity() - 0.7).abs() < 1e-12);

        let mut f = SplatField::new(100);
        let p = lp(Vec3::new(4.0, 0.0, 0.0), 0.2);
        spawn_gaussians(&[p, p], &mut f, &Pose3::identity(), &cfg);
        assert_eq!(f.len(), 1);
        // a later frame still deduplicates against existing means
        f.next_frame();
        spawn_gaussians(&[lp(Vec3::new(4.1, 0.0, 0.0), 0.2)], &mut f, &Pose3::identity(), &cfg);
        assert_eq!(f.len(), 1);

        // 10 m · 0.0077 rad = 0.077 m inside [0.05, 0.5]
        let cfg = SpawnConfig { delta_theta: 0.0077, s_min: 0.05, s_max: 0.5, ..SpawnConfig::default() };
        let mut f = SplatField::new(100);
        spawn_gaussians(&[lp(Vec3::new(10.0, 0.0, 0.0), 0.5)], &mut f, &Pose3::from_translation(Vec3::new(1.0, 0.0, 0.0)), &cfg);
        assert!((f.primitives[0].scale - Vec3::repeat(0.077)).norm() < 1e-12);
        assert_eq!(f.primitives[0].mu, Vec3::new(11.0, 0.0, 0.0));
        // clamped at both ends
        let mut f = SplatField::new(100);
        spawn_gaussians(&[lp(Vec3::new(1.0, 0.0, 0.0), 0.5), lp(Vec3::new(100.0, 0.0, 0.0), 0.5)], &mut f, &Pose3::identity(), &cfg);
        assert_eq!(f.primitives[0].scale.x, 0.05);
        assert_eq!(f.primitives[1].scale.x, 0.5);
    }

    #[test]
    fn budget_examples() {
        let cam = cam();
        let w2c = Pose3::identity();
        let ahead = |z: f64, frame: u64| GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, z), 0.1, 0.7, 0.5, frame);

        let mut f = SplatField::new(2);
        f.primitives = vec![ahead(2.0, 0), ahead(3.0, 0)];
        assert_eq!(enforce_budget(&mut f, &w2c, &cam, 10.0), 0);
        assert_eq!(f.len(), 2);

        let mut f = SplatField::new(2);
        f.primitives = vec![ahead(2.0, 5), ahead(-3.0, 9), ahead(3.0, 1)];
        enforce_budget(&mut f, &w2c, &cam, 10.0);
        assert_eq!(f.len(), 2);
        assert!(f.primitives.iter().all(|g| g.mu.z > 0.0));

        let mut f = SplatField::new(1);
        f.primitives = vec![ahead(2.0, 3), ahead(3.0, 7)];
        enforce_budget(&mut f, &w2c, &cam, 10.0);
        assert_eq!(f.len(), 1);
        assert_eq!(f.primitives[0].birth_frame, 7);
    }

    #[test]
    fn frustum_margin() {
        let cam = cam();
        // horizontal half-FOV is atan(32/32) = 45 degrees
        let at = |deg: f64| {
            let a = deg.to_radians();
            Vec3::new(a.sin(), 0.0, a.cos())
        };
        assert!(in_expanded_frustum(&Pose3::identity(), &cam, &at(44.0), 0.0));
        assert!(!in_expanded_frustum(&Pose3::identity(), &cam, &at(50.0), 0.0));
        assert!(in_expanded_frustum(&Pose3::identity(), &cam, &at(50.0), 10.0));
        assert!(!in_expanded_frustum(&Pose3::identity(), &cam, &at(180.0), 10.0));
    }
}
