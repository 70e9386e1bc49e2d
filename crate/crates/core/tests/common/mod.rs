//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, SymmetricEigen, UnitQuaternion, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use splatnav::esdf::{EsdfGrid2D, FrontRegion, OccupancyGrid2D};
use splatnav::geometry::{CameraModel, Grid2Spec, Mat3, Pose3, Vec2, Vec3};
use splatnav::splat::{GaussianPrimitive, SplatField};

/// O(n²) scan: signed distance to the nearest cell of the opposite state.
pub fn brute_edt(occ: &OccupancyGrid2D, d_max: f64) -> Vec<f64> {
    let s = occ.spec;
    let mut out = Vec::with_capacity(s.len());
    for j in 0..s.ny {
        for i in 0..s.nx {
            let me = occ.occupied[j * s.nx + i];
            let mut best = f64::INFINITY;
            for jj in 0..s.ny {
                for ii in 0..s.nx {
                    if occ.occupied[jj * s.nx + ii] != me {
                        let dx = (ii as f64 - i as f64) * s.resolution;
                        let dy = (jj as f64 - j as f64) * s.resolution;
                        best = best.min(dx.hypot(dy));
                    }
                }
            }
            let d = best.min(d_max);
            out.push(if me { -d } else { d });
        }
    }
    out
}

pub fn random_occupancy(rng: &mut ChaCha8Rng, max_side: usize) -> OccupancyGrid2D {
    let nx = rng.gen_range(1..=max_side);
    let ny = rng.gen_range(1..=max_side);
    let res = [0.05, 0.1, 0.25, 1.0][rng.gen_range(0..4)];
    let spec = Grid2Spec::new(res, Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)), nx, ny).unwrap();
    let density = rng.gen_range(0.0..0.6);
    let mut occ = OccupancyGrid2D::empty(spec);
    for o in occ.occupied.iter_mut() {
        *o = rng.gen_bool(density);
    }
    occ
}

pub const COV_FLOOR: f64 = 0.3;

struct Splat2 {
    depth: f64,
    birth: u64,
    mean: Vector2<f64>,
    conic: Matrix2<f64>,
    alpha: f64,
    cost: f64,
}

fn project(g: &GaussianPrimitive, world_to_cam: &Pose3, cam: &CameraModel) -> Option<Splat2> {
    let w = world_to_cam.rotation_matrix();
    let p = w * g.mu + world_to_cam.translation();
    if p.z < cam.z_near {
        return None;
    }
    let mean = Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
    let jac = Matrix2x3::new(
        cam.fx / p.z,
        0.0,
        -cam.fx * p.x / (p.z * p.z),
        0.0,
        cam.fy / p.z,
        -cam.fy * p.y / (p.z * p.z),
    );
    let r: Mat3 = g.rot.to_rotation_matrix().into_inner();
    let s = Mat3::from_diagonal(&g.scale);
    let sigma = r * s * s.transpose() * r.transpose();
    let raw = jac * w * sigma * w.transpose() * jac.transpose();
    let raw = (raw + raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(raw);
    let floored = eig.eigenvalues.map(|l| l.max(COV_FLOOR));
    let cov = eig.eigenvectors * Matrix2::from_diagonal(&floored) * eig.eigenvectors.transpose();
    let (rx, ry) = (3.0 * cov[(0, 0)].sqrt(), 3.0 * cov[(1, 1)].sqrt());
    let (wf, hf) = (cam.width as f64, cam.height as f64);
    if mean.x + rx < -0.5 || mean.x - rx > wf - 0.5 || mean.y + ry < -0.5 || mean.y - ry > hf - 0.5 {
        return None;
    }
    Some(Splat2 {
        depth: p.z,
        birth: g.birth_frame,
        mean,
        conic: cov.try_inverse()?,
        alpha: 1.0 / (1.0 + (-g.opacity_logit).exp()),
        cost: g.cost,
    })
}

/// Every surviving primitive evaluated at every pixel and composited front
/// to back, with no screen-space cutoff.
pub fn naive_render(field: &SplatField, world_to_cam: &Pose3, cam: &CameraModel, c_bg: f64) -> Vec<f64> {
    let mut splats: Vec<Splat2> = field.primitives.iter().filter_map(|g| project(g, world_to_cam, cam)).collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.birth.cmp(&b.birth)));
    let mut out = Vec::with_capacity(cam.pixel_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            let mut color = 0.0;
            let mut t = 1.0;
            for s in &splats {
                let d = Vector2::new(u as f64, v as f64) - s.mean;
                let a = s.alpha * (-0.5 * (d.transpose() * s.conic * d)[(0, 0)]).exp();
                color += s.cost * a * t;
                t *= 1.0 - a;
            }
            out.push(color + t * c_bg);
        }
    }
    out
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5), rng.gen_range(-PI..PI))
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose3 {
    let t = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
    Pose3::from_rotation(random_rotation(rng), t)
}

/// Primitive whose camera-frame mean is `p_cam`.
pub fn primitive_at(rng: &mut ChaCha8Rng, cam_to_world: &Pose3, p_cam: Vec3, scale: (f64, f64)) -> GaussianPrimitive {
    GaussianPrimitive {
        mu: cam_to_world.apply(&p_cam),
        scale: Vec3::new(rng.gen_range(scale.0..scale.1), rng.gen_range(scale.0..scale.1), rng.gen_range(scale.0..scale.1)),
        rot: random_rotation(rng),
        opacity_logit: rng.gen_range(-3.0..3.0),
        cost: rng.gen_range(0.0..1.0),
        birth_frame: rng.gen_range(0..4),
    }
}

/// Front-region membership from the heading angle, without the pose inverse.
pub fn in_front_region(robot_pose: &Pose3, region: &FrontRegion, p: &Vec2) -> bool {
    let t = robot_pose.translation();
    let fwd = robot_pose.rotation_matrix() * Vec3::x();
    let yaw = fwd.y.atan2(fwd.x);
    let (dx, dy) = (p.x - t.x, p.y - t.y);
    let ahead = yaw.cos() * dx + yaw.sin() * dy;
    let left = -yaw.sin() * dx + yaw.cos() * dy;
    (0.0..=region.depth).contains(&ahead) && left.abs() <= region.width / 2.0
}

pub fn fuse_oracle(gsplat: &EsdfGrid2D, lidar: &EsdfGrid2D, robot_pose: &Pose3, region: &FrontRegion) -> Vec<f64> {
    let s = gsplat.spec;
    let mut out = Vec::with_capacity(s.len());
    for j in 0..s.ny {
        for i in 0..s.nx {
            let c = Vec2::new(s.origin[0] + i as f64 * s.resolution, s.origin[1] + j as f64 * s.resolution);
            let k = j * s.nx + i;
            out.push(if in_front_region(robot_pose, region, &c) { gsplat.d[k] } else { lidar.d[k] });
        }
    }
    out
}
