//! Rigid transforms, the pinhole camera and metric grid specs shared by every
//! other module.
//!
//! Quaternions are written scalar-first `(w, x, y, z)` everywhere they cross
//! a boundary (constructors, dumps, FFI). [`Pose3::from_wxyz`] is the only
//! constructor that accepts raw components.

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose3 {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl Default for Pose3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose3 {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose from a scalar-first quaternion. The quaternion is
    /// normalized; a zero or non-finite quaternion is rejected.
    pub fn from_wxyz(quat: [f64; 4], translation: Vec3) -> Result<Self> {
        let q = Quaternion::new(quat[0], quat[1], quat[2], quat[3]);
        let n = q.norm();
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::Config(format!("degenerate quaternion {quat:?}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("non-finite translation".into()));
        }
        Ok(Self {
            rotation: Unit::new_normalize(q),
            translation,
        })
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: Unit::new_normalize(rotation.into_inner()),
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation,
        }
    }

    /// Rotation about +z by `yaw` radians followed by translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw), translation)
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Scalar-first quaternion components.
    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose3) -> Pose3 {
        let rotation = Unit::new_normalize((self.rotation * other.rotation).into_inner());
        Pose3 {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose3 {
        let inv = self.rotation.inverse();
        Pose3 {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// Rotation angle of the pose (radians, in `[0, π]`).
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }
}

/// Applies a pose to a point.
pub fn se3_apply(pose: &Pose3, point: &Vec3) -> Vec3 {
    pose.apply(point)
}

/// Pinhole intrinsics. Pixel `(u, v)` has its center at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub z_near: f64,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize, z_near: f64) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy, width, height, z_near };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("camera focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image must be at least 1x1".into()));
        }
        if !(self.z_near > 0.0) {
            return Err(Error::Config("camera z_near must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Nearest pixel index for an image-plane position, if inside the image.
    pub fn pixel_of(&self, uv: &Vec2) -> Option<(usize, usize)> {
        let u = (uv.x + 0.5).floor();
        let v = (uv.y + 0.5).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    /// Unit-depth ray direction (camera frame) through the center of pixel `(u, v)`.
    pub fn ray_through(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Perspective projection of a camera-frame point; no clipping to the image.
pub fn pinhole_project(cam: &CameraModel, p_cam: &Vec3) -> Result<Vec2> {
    if !(p_cam.z >= cam.z_near) {
        return Err(Error::BehindCamera { z: p_cam.z, z_near: cam.z_near });
    }
    Ok(Vec2::new(
        cam.fx * p_cam.x / p_cam.z + cam.cx,
        cam.fy * p_cam.y / p_cam.z + cam.cy,
    ))
}

/// Planar grid with values at cell centers; `origin` is the center of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid2Spec {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid2Spec {
    pub fn new(resolution: f64, origin: Vec2, nx: usize, ny: usize) -> Result<Self> {
        let spec = Self { resolution, origin: [origin.x, origin.y], nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    /// Square grid of `n × n` cells centered on `center`.
    pub fn centered(center: Vec2, resolution: f64, n: usize) -> Result<Self> {
        let half = (n as f64 - 1.0) * 0.5 * resolution;
        Self::new(resolution, Vec2::new(center.x - half, center.y - half), n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || self.nx == 0 || self.ny == 0 {
            return Err(Error::Config(format!("invalid 2D grid spec {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center_of(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin[0] + i as f64 * self.resolution,
            self.origin[1] + j as f64 * self.resolution,
        )
    }

    /// Integer cell coordinates of a world point (unbounded).
    pub fn cell_of(&self, p: &Vec2) -> (i64, i64) {
        let half = 0.5 * self.resolution;
        (
            ((p.x - self.origin[0] + half) / self.resolution).floor() as i64,
            ((p.y - self.origin[1] + half) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_in_bounds(&self, p: &Vec2) -> Option<(usize, usize)> {
        let (i, j) = self.cell_of(p);
        (i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny).then_some((i as usize, j as usize))
    }
}

/// Voxel lattice with values at voxel centers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid3Spec {
    pub resolution: f64,
    pub origin: [f64; 3],
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Grid3Spec {
    pub fn new(resolution: f64, origin: Vec3, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let spec = Self { resolution, origin: [origin.x, origin.y, origin.z], nx, ny, nz };
        spec.validate()?;
        Ok(spec)
    }

    /// Lattice whose xy layout matches `plane` with `nz` layers starting at `z0`.
    pub fn over_plane(plane: &Grid2Spec, z0: f64, nz: usize) -> Result<Self> {
        Self::new(plane.resolution, Vec3::new(plane.origin[0], plane.origin[1], z0), plane.nx, plane.ny, nz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Config(format!("invalid 3D grid spec {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn center_of(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.resolution,
            self.origin[1] + j as f64 * self.resolution,
            self.origin[2] + k as f64 * self.resolution,
        )
    }

    pub fn cell_of(&self, p: &Vec3) -> (i64, i64, i64) {
        let half = 0.5 * self.resolution;
        (
            ((p.x - self.origin[0] + half) / self.resolution).floor() as i64,
            ((p.y - self.origin[1] + half) / self.resolution).floor() as i64,
            ((p.z - self.origin[2] + half) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_in_bounds(&self, p: &Vec3) -> Option<(usize, usize, usize)> {
        let (i, j, k) = self.cell_of(p);
        (i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && (k as usize) < self.nz)
            .then_some((i as usize, j as usize, k as usize))
    }

    pub fn plane(&self) -> Grid2Spec {
        Grid2Spec {
            resolution: self.resolution,
            origin: [self.origin[0], self.origin[1]],
            nx: self.nx,
            ny: self.ny,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn pose_strategy() -> impl Strategy<Value = Pose3> {
        (
            prop::array::uniform4(-1.0f64..1.0),
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_filter_map("non-degenerate quaternion", |(q, t)| {
                Pose3::from_wxyz(q, Vec3::new(t[0], t[1], t[2])).ok()
            })
    }

    #[test]
    fn apply_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(se3_apply(&Pose3::identity(), &p), p);
        let t = Pose3::from_translation(Vec3::new(0.0, 0.0, 5.0));
        assert_eq!(se3_apply(&t, &p), Vec3::new(1.0, 2.0, 8.0));
        let yaw = Pose3::from_yaw(FRAC_PI_2, Vec3::zeros());
        let r = se3_apply(&yaw, &Vec3::new(1.0, 0.0, 0.0));
        assert!((r - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn wxyz_is_scalar_first() {
        let s = (0.5f64).sqrt();
        // 90 degrees about z
        let p = Pose3::from_wxyz([s, 0.0, 0.0, s], Vec3::zeros()).unwrap();
        let r = p.apply(&Vec3::new(1.0, 0.0, 0.0));
        assert!((r - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        let q = p.quat_wxyz();
        assert!((q[0] - s).abs() < 1e-12 && (q[3] - s).abs() < 1e-12);
        assert!(Pose3::from_wxyz([0.0; 4], Vec3::zeros()).is_err());
    }

    #[test]
    fn project_examples() {
        let cam = CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100, 0.01).unwrap();
        assert_eq!(pinhole_project(&cam, &Vec3::new(0.0, 0.0, 1.0)).unwrap(), Vec2::new(50.0, 50.0));
        assert_eq!(pinhole_project(&cam, &Vec3::new(1.0, 0.0, 2.0)).unwrap(), Vec2::new(100.0, 50.0));
        assert!(matches!(
            pinhole_project(&cam, &Vec3::new(0.0, 0.0, 0.001)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0.0, 1.0, 0.0, 0.0, 1, 1, 0.1).is_err());
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, 0, 1, 0.1).is_err());
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, 1, 1, 0.0).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let g = Grid2Spec::new(0.37, Vec2::new(-3.1, 2.2), 17, 9).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(g.cell_of(&g.center_of(i, j)), (i as i64, j as i64));
            }
        }
        let g3 = Grid3Spec::new(0.21, Vec3::new(1.0, -2.0, 0.15), 5, 6, 7).unwrap();
        for k in 0..g3.nz {
            for j in 0..g3.ny {
                for i in 0..g3.nx {
                    assert_eq!(g3.cell_in_bounds(&g3.center_of(i, j, k)), Some((i, j, k)));
                }
            }
        }
        assert!(Grid2Spec::new(0.0, Vec2::zeros(), 1, 1).is_err());
        assert!(Grid3Spec::new(1.0, Vec3::zeros(), 1, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(p in pose_strategy()) {
            let id = p.compose(&p.inverse());
            prop_assert!(id.angle() < 1e-9);
            prop_assert!(id.translation().norm() < 1e-9);
            prop_assert!((p.rotation().quaternion().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn composition_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(l.inverse().compose(&r).angle() < 1e-9);
            prop_assert!((l.translation() - r.translation()).norm() < 1e-9);
            prop_assert!((l.rotation().quaternion().norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn projection_is_scale_invariant(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.1f64..10.0, s in 0.5f64..20.0) {
            let cam = CameraModel::new(80.0, 90.0, 31.5, 23.5, 64, 48, 0.05).unwrap();
            let p = Vec3::new(x, y, z);
            let a = pinhole_project(&cam, &p).unwrap();
            let b = pinhole_project(&cam, &(p * s)).unwrap();
            prop_assert!((a - b).norm() < 1e-9);
        }
    }
}
