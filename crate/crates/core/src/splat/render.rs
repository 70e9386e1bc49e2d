//! Screen-space projection and front-to-back cost compositing, with the
//! matching reverse pass.

use std::cmp::Ordering;

use nalgebra::{Matrix2, Matrix2x3, Vector2};

use super::{sigmoid, SplatField};
use crate::geometry::{pinhole_project, CameraModel, Mat3, Pose3, Vec3};
use crate::semantics::CostImage;

/// Eigenvalue floor applied to every screen-space covariance, pixels².
pub const COV_FLOOR: f64 = 0.3;

/// Pixels farther than this Mahalanobis radius receive no contribution.
/// At the cutoff a fully opaque primitive contributes below 1e-12.
const CUTOFF_MAHA_SQ: f64 = 2.0 * 27.64; // 2·ln(1e12)

/// Pixels whose transmittance fell below this are saturated; anything behind
/// them contributes less than this.
const MIN_TRANSMITTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGaussian {
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
    pub alpha_base: f64,
    pub cost: f64,
    /// Index of the source primitive in the field.
    pub source: usize,
    pub birth_frame: u64,
    conic: Matrix2<f64>,
    p_cam: Vec3,
    jacobian: Matrix2x3<f64>,
    /// `W·Σ·Wᵀ`, camera-frame covariance.
    cov_cam: Mat3,
    cov_raw: Matrix2<f64>,
}

impl ProjectedGaussian {
    /// Inverse of `cov2d`.
    pub fn conic(&self) -> &Matrix2<f64> {
        &self.conic
    }
}

fn sym_eigen(m: &Matrix2<f64>) -> (f64, f64, Vector2<f64>, Vector2<f64>) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let c = m[(1, 1)];
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = mid + rad;
    let l2 = mid - rad;
    // eigenvector for l1
    let v1 = if b.abs() > 1e-300 {
        Vector2::new(l1 - c, b).normalize()
    } else if a >= c {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    };
    let v2 = Vector2::new(-v1.y, v1.x);
    (l1, l2, v1, v2)
}

fn floor_cov(raw: &Matrix2<f64>) -> Matrix2<f64> {
    let (l1, l2, v1, v2) = sym_eigen(raw);
    if l2 >= COV_FLOOR {
        return *raw;
    }
    let f1 = l1.max(COV_FLOOR);
    let f2 = l2.max(COV_FLOOR);
    let m = v1 * v1.transpose() * f1 + v2 * v2.transpose() * f2;
    (m + m.transpose()) * 0.5
}

/// Adjoint of [`floor_cov`] (spectral function `max(λ, floor)`).
fn floor_cov_adjoint(raw: &Matrix2<f64>, grad: &Matrix2<f64>) -> Matrix2<f64> {
    let (l1, l2, v1, v2) = sym_eigen(raw);
    if l2 >= COV_FLOOR {
        return *grad;
    }
    let g = |l: f64| l.max(COV_FLOOR);
    let d = |l: f64| if l > COV_FLOOR { 1.0 } else { 0.0 };
    let v = Matrix2::from_columns(&[v1, v2]);
    let gt = v.transpose() * grad * v;
    let off = if (l1 - l2).abs() > 1e-12 { (g(l1) - g(l2)) / (l1 - l2) } else { d(l1) };
    let gamma = Matrix2::new(d(l1), off, off, d(l2));
    v * gt.component_mul(&gamma) * v.transpose()
}

/// Projects one primitive. Returns `None` (culled) when the mean is in front
/// of the near plane or the 3σ screen extent misses the image.
pub fn project_gaussian(
    field: &SplatField,
    index: usize,
    world_to_cam: &Pose3,
    cam: &CameraModel,
) -> Option<ProjectedGaussian> {
    let g = &field.primitives[index];
    let p = world_to_cam.apply(&g.mu);
    let mean2d = pinhole_project(cam, &p).ok()?;
    let (x, y, z) = (p.x, p.y, p.z);
    let jacobian = Matrix2x3::new(
        cam.fx / z,
        0.0,
        -cam.fx * x / (z * z),
        0.0,
        cam.fy / z,
        -cam.fy * y / (z * z),
    );
    let w = world_to_cam.rotation_matrix();
    let cov_cam = w * g.covariance() * w.transpose();
    let cov_cam = (cov_cam + cov_cam.transpose()) * 0.5;
    let raw = jacobian * cov_cam * jacobian.transpose();
    let cov_raw = (raw + raw.transpose()) * 0.5;
    let cov2d = floor_cov(&cov_raw);

    let rx = 3.0 * cov2d[(0, 0)].sqrt();
    let ry = 3.0 * cov2d[(1, 1)].sqrt();
    let (w_img, h_img) = (cam.width as f64, cam.height as f64);
    if mean2d.x + rx < -0.5 || mean2d.x - rx > w_img - 0.5 || mean2d.y + ry < -0.5 || mean2d.y - ry > h_img - 0.5 {
        return None;
    }
    let conic = cov2d.try_inverse()?;
    let conic = (conic + conic.transpose()) * 0.5;
    Some(ProjectedGaussian {
        mean2d,
        cov2d,
        depth: z,
        alpha_base: sigmoid(g.opacity_logit),
        cost: g.cost,
        source: index,
        birth_frame: g.birth_frame,
        conic,
        p_cam: p,
        jacobian,
        cov_cam,
        cov_raw,
    })
}

/// Total order used for compositing: depth, then birth frame, then the
/// remaining parameters so that the result does not depend on list order.
fn blend_order(field: &SplatField, a: &ProjectedGaussian, b: &ProjectedGaussian) -> Ordering {
    let ga = &field.primitives[a.source];
    let gb = &field.primitives[b.source];
    a.depth
        .total_cmp(&b.depth)
        .then(a.birth_frame.cmp(&b.birth_frame))
        .then(ga.cost.total_cmp(&gb.cost))
        .then(ga.opacity_logit.total_cmp(&gb.opacity_logit))
        .then(ga.mu.x.total_cmp(&gb.mu.x))
        .then(ga.mu.y.total_cmp(&gb.mu.y))
        .then(ga.mu.z.total_cmp(&gb.mu.z))
        .then(ga.scale.x.total_cmp(&gb.scale.x))
        .then(ga.scale.y.total_cmp(&gb.scale.y))
        .then(ga.scale.z.total_cmp(&gb.scale.z))
        .then(ga.rot.i.total_cmp(&gb.rot.i))
        .then(ga.rot.j.total_cmp(&gb.rot.j))
        .then(ga.rot.k.total_cmp(&gb.rot.k))
        .then(ga.rot.w.total_cmp(&gb.rot.w))
}

/// All visible primitives, sorted front to back.
pub(crate) fn project_all(field: &SplatField, world_to_cam: &Pose3, cam: &CameraModel) -> Vec<ProjectedGaussian> {
    let mut visible: Vec<ProjectedGaussian> = (0..field.primitives.len())
        .filter_map(|i| project_gaussian(field, i, world_to_cam, cam))
        .collect();
    visible.sort_by(|a, b| blend_order(field, a, b));
    visible
}

/// Inclusive pixel rectangle that can receive a contribution.
fn pixel_bounds(pg: &ProjectedGaussian, cam: &CameraModel) -> Option<(usize, usize, usize, usize)> {
    if pg.alpha_base <= 0.0 {
        return None;
    }
    let rx = (CUTOFF_MAHA_SQ * pg.cov2d[(0, 0)]).sqrt();
    let ry = (CUTOFF_MAHA_SQ * pg.cov2d[(1, 1)]).sqrt();
    let u0 = (pg.mean2d.x - rx).ceil().max(0.0);
    let u1 = (pg.mean2d.x + rx).floor().min(cam.width as f64 - 1.0);
    let v0 = (pg.mean2d.y - ry).ceil().max(0.0);
    let v1 = (pg.mean2d.y + ry).floor().min(cam.height as f64 - 1.0);
    if u0 > u1 || v0 > v1 {
        return None;
    }
    Some((u0 as usize, u1 as usize, v0 as usize, v1 as usize))
}

#[inline]
fn alpha_at(pg: &ProjectedGaussian, u: usize, v: usize) -> Option<(f64, Vector2<f64>)> {
    let d = Vector2::new(u as f64 - pg.mean2d.x, v as f64 - pg.mean2d.y);
    let q = pg.conic[(0, 0)] * d.x * d.x + 2.0 * pg.conic[(0, 1)] * d.x * d.y + pg.conic[(1, 1)] * d.y * d.y;
    if q > CUTOFF_MAHA_SQ {
        return None;
    }
    Some((pg.alpha_base * (-0.5 * q).exp(), d))
}

/// Composites the field into a cost image over a background of cost `c_bg`.
pub fn render_cost_map(field: &SplatField, world_to_cam: &Pose3, cam: &CameraModel, c_bg: f64) -> CostImage {
    let visible = project_all(field, world_to_cam, cam);
    let n = cam.pixel_count();
    let mut color = vec![0.0; n];
    let mut trans = vec![1.0; n];
    for pg in &visible {
        let Some((u0, u1, v0, v1)) = pixel_bounds(pg, cam) else { continue };
        for v in v0..=v1 {
            for u in u0..=u1 {
                let p = v * cam.width + u;
                if trans[p] < MIN_TRANSMITTANCE {
                    continue;
                }
                if let Some((a, _)) = alpha_at(pg, u, v) {
                    color[p] += pg.cost * a * trans[p];
                    trans[p] *= 1.0 - a;
                }
            }
        }
    }
    let values = color
        .iter()
        .zip(&trans)
        .map(|(c, t)| (c + t * c_bg).clamp(0.0, 1.0))
        .collect();
    CostImage::from_values(cam.width, cam.height, values).expect("image size matches camera")
}

/// Per-primitive gradient of a scalar objective with respect to the
/// optimized parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderGrad {
    pub mu: Vec3,
    pub opacity_logit: f64,
    pub cost: f64,
}

struct PixelEntry {
    prim: u32,
    alpha: f64,
}

/// Forward render that keeps what the reverse pass needs.
pub(crate) struct RenderTape {
    visible: Vec<ProjectedGaussian>,
    entries: Vec<Vec<PixelEntry>>,
    pub(crate) image: CostImage,
    c_bg: f64,
    width: usize,
}

pub(crate) fn render_tape(field: &SplatField, world_to_cam: &Pose3, cam: &CameraModel, c_bg: f64) -> RenderTape {
    let visible = project_all(field, world_to_cam, cam);
    let n = cam.pixel_count();
    let mut color = vec![0.0; n];
    let mut trans = vec![1.0; n];
    let mut entries: Vec<Vec<PixelEntry>> = (0..n).map(|_| Vec::new()).collect();
    for (k, pg) in visible.iter().enumerate() {
        let Some((u0, u1, v0, v1)) = pixel_bounds(pg, cam) else { continue };
        for v in v0..=v1 {
            for u in u0..=u1 {
                let p = v * cam.width + u;
                if trans[p] < MIN_TRANSMITTANCE {
                    continue;
                }
                if let Some((a, _)) = alpha_at(pg, u, v) {
                    color[p] += pg.cost * a * trans[p];
                    trans[p] *= 1.0 - a;
                    entries[p].push(PixelEntry { prim: k as u32, alpha: a });
                }
            }
        }
    }
    let values = color
        .iter()
        .zip(&trans)
        .map(|(c, t)| (c + t * c_bg).clamp(0.0, 1.0))
        .collect();
    RenderTape {
        visible,
        entries,
        image: CostImage::from_values(cam.width, cam.height, values).expect("image size matches camera"),
        c_bg,
        width: cam.width,
    }
}

impl RenderTape {
    /// Back-propagates `d_image` (∂objective/∂pixel) to the source primitives.
    /// Culled primitives get zero gradient.
    pub(crate) fn backward(&self, field: &SplatField, world_to_cam: &Pose3, cam: &CameraModel, d_image: &[f64]) -> Vec<RenderGrad> {
        let m = self.visible.len();
        let mut g_cost = vec![0.0; m];
        let mut g_logit = vec![0.0; m];
        let mut g_mean = vec![Vector2::<f64>::zeros(); m];
        let mut g_conic = vec![Matrix2::<f64>::zeros(); m];

        let mut prefix_t: Vec<f64> = Vec::new();
        for (p, list) in self.entries.iter().enumerate() {
            let dc = d_image[p];
            if list.is_empty() || dc == 0.0 {
                continue;
            }
            let (u, v) = (p % self.width, p / self.width);
            prefix_t.clear();
            let mut t = 1.0;
            for e in list {
                prefix_t.push(t);
                t *= 1.0 - e.alpha;
            }
            let mut behind = self.c_bg;
            for (e, &t_i) in list.iter().zip(&prefix_t).rev() {
                let k = e.prim as usize;
                let pg = &self.visible[k];
                let a = e.alpha;
                g_cost[k] += dc * a * t_i;
                let d_alpha = dc * t_i * (pg.cost - behind);
                behind = pg.cost * a + (1.0 - a) * behind;

                g_logit[k] += d_alpha * a * (1.0 - pg.alpha_base);
                let d = Vector2::new(u as f64 - pg.mean2d.x, v as f64 - pg.mean2d.y);
                g_mean[k] += pg.conic * d * (d_alpha * a);
                g_conic[k] += d * d.transpose() * (-0.5 * a * d_alpha);
            }
        }

        let w = world_to_cam.rotation_matrix();
        let mut grads = vec![RenderGrad::default(); field.primitives.len()];
        for (k, pg) in self.visible.iter().enumerate() {
            let q = &pg.conic;
            let g_cov2d = -(q * g_conic[k] * q);
            let g_cov2d = (g_cov2d + g_cov2d.transpose()) * 0.5;
            let g_raw = floor_cov_adjoint(&pg.cov_raw, &g_cov2d);
            let g_j = (g_raw + g_raw.transpose()) * pg.jacobian * pg.cov_cam;

            let (px, py, pz) = (pg.p_cam.x, pg.p_cam.y, pg.p_cam.z);
            let (fx, fy) = (cam.fx, cam.fy);
            let gm = g_mean[k];
            let z2 = pz * pz;
            let z3 = z2 * pz;
            let mut gp = Vec3::new(
                gm.x * fx / pz,
                gm.y * fy / pz,
                -gm.x * fx * px / z2 - gm.y * fy * py / z2,
            );
            gp.z += g_j[(0, 0)] * (-fx / z2);
            gp.x += g_j[(0, 2)] * (-fx / z2);
            gp.z += g_j[(0, 2)] * (2.0 * fx * px / z3);
            gp.z += g_j[(1, 1)] * (-fy / z2);
            gp.y += g_j[(1, 2)] * (-fy / z2);
            gp.z += g_j[(1, 2)] * (2.0 * fy * py / z3);

            let out = &mut grads[pg.source];
            out.mu = w.transpose() * gp;
            out.opacity_logit = g_logit[k];
            out.cost = g_cost[k];
        }
        grads
    }
}

/// Renders and back-propagates `d_image` in one call.
pub fn render_with_grad(
    field: &SplatField,
    world_to_cam: &Pose3,
    cam: &CameraModel,
    c_bg: f64,
    d_image: impl FnOnce(&CostImage) -> Vec<f64>,
) -> (CostImage, Vec<RenderGrad>) {
    let tape = render_tape(field, world_to_cam, cam, c_bg);
    let d = d_image(&tape.image);
    let grads = tape.backward(field, world_to_cam, cam, &d);
    (tape.image, grads)
}
