use serde::{Deserialize, Serialize};

use super::render::render_tape;
use super::ssim::{ssim, ssim_with_grad};
use super::{RenderGrad, SplatField};
use crate::error::Result;
use crate::geometry::{CameraModel, Pose3};
use crate::semantics::CostImage;

/// Mean absolute difference plus `1 − SSIM`.
pub fn loss(rendered: &CostImage, gt: &CostImage) -> Result<f64> {
    rendered.same_shape(gt)?;
    let l1 = l1_mean(rendered, gt);
    Ok(l1 + 1.0 - ssim(rendered, gt)?)
}

fn l1_mean(a: &CostImage, b: &CostImage) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.values.len() as f64
}

/// Loss and its gradient with respect to each pixel of `rendered`. The L1
/// subgradient at zero residual is taken as 0.
pub fn loss_image_grad(rendered: &CostImage, gt: &CostImage) -> Result<(f64, Vec<f64>)> {
    rendered.same_shape(gt)?;
    let n = rendered.values.len() as f64;
    let (s, g_ssim) = ssim_with_grad(rendered, gt)?;
    let value = l1_mean(rendered, gt) + 1.0 - s;
    let grad = rendered
        .values
        .iter()
        .zip(&gt.values)
        .zip(&g_ssim)
        .map(|((r, t), gs)| {
            let d = r - t;
            let sign = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            sign / n - gs
        })
        .collect();
    Ok((value, grad))
}

pub type PrimitiveGrad = RenderGrad;

/// Loss of the rendered field against `gt` and its gradient per primitive.
pub fn loss_and_grad(
    field: &SplatField,
    world_to_cam: &Pose3,
    cam: &CameraModel,
    gt: &CostImage,
    c_bg: f64,
) -> Result<(f64, Vec<PrimitiveGrad>)> {
    let tape = render_tape(field, world_to_cam, cam, c_bg);
    let (value, d_image) = loss_image_grad(&tape.image, gt)?;
    Ok((value, tape.backward(field, world_to_cam, cam, &d_image)))
}

/// Step sizes per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub mu: f64,
    pub opacity: f64,
    pub cost: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { mu: 1e-3, opacity: 1e-2, cost: 1e-2 }
    }
}

/// One gradient-descent step on means, opacity logits and costs. Scale and
/// rotation stay fixed. Returns the loss before the step.
pub fn optimize_step(
    field: &mut SplatField,
    world_to_cam: &Pose3,
    cam: &CameraModel,
    gt: &CostImage,
    lr: &LearningRates,
    c_bg: f64,
) -> Result<f64> {
    let (value, grads) = loss_and_grad(field, world_to_cam, cam, gt, c_bg)?;
    for (g, d) in field.primitives.iter_mut().zip(&grads) {
        g.mu -= d.mu * lr.mu;
        g.opacity_logit -= lr.opacity * d.opacity_logit;
        g.cost = (g.cost - lr.cost * d.cost).clamp(0.0, 1.0);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::splat::{render_cost_map, GaussianPrimitive, SSIM_C1};

    fn cam() -> CameraModel {
        CameraModel::new(14.0, 14.0, 7.0, 6.0, 15, 13, 0.05).unwrap()
    }

    fn field() -> SplatField {
        let mut f = SplatField::new(10);
        f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(0.1, 0.0, 2.0), 0.25, 0.6, 0.3, 0));
        f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(-0.3, 0.2, 2.5), 0.3, 0.5, 0.8, 1));
        f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(0.2, -0.3, 3.0), 0.35, 0.7, 0.5, 2));
        f
    }

    #[test]
    fn loss_examples() {
        let a = CostImage::constant(8, 8, 0.3);
        assert!(loss(&a, &a).unwrap().abs() < 1e-9);
        let z = CostImage::constant(8, 8, 0.0);
        let o = CostImage::constant(8, 8, 1.0);
        let want = 1.0 + (1.0 - SSIM_C1 / (1.0 + SSIM_C1));
        assert!((loss(&z, &o).unwrap() - want).abs() < 1e-9);
        assert!(loss(&z, &CostImage::constant(8, 7, 0.0)).is_err());
    }

    #[test]
    fn stationary_at_own_render() {
        let cam = cam();
        let mut f = field();
        let gt = render_cost_map(&f, &Pose3::identity(), &cam, 0.6);
        let before = f.clone();
        let l = optimize_step(&mut f, &Pose3::identity(), &cam, &gt, &LearningRates::default(), 0.6).unwrap();
        assert!(l.abs() < 1e-9);
        let mut change = 0.0;
        for (a, b) in f.primitives.iter().zip(&before.primitives) {
            change += (a.mu - b.mu).norm_squared()
                + (a.opacity_logit - b.opacity_logit).powi(2)
                + (a.cost - b.cost).powi(2);
        }
        assert!(change.sqrt() < 1e-9);
    }

    #[test]
    fn cost_rises_toward_brighter_target() {
        let cam = cam();
        let mut f = SplatField::new(1);
        f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, 2.0), 0.3, 0.7, 0.0, 0));
        let gt = CostImage::constant(cam.width, cam.height, 1.0);
        let (_, grads) = loss_and_grad(&f, &Pose3::identity(), &cam, &gt, 0.6).unwrap();
        // finite-difference sign check
        let h = 1e-4;
        let eval = |c: f64| {
            let mut g = f.clone();
            g.primitives[0].cost = c;
            loss(&render_cost_map(&g, &Pose3::identity(), &cam, 0.6), &gt).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!(grads[0].cost < 0.0 && fd < 0.0);
        optimize_step(&mut f, &Pose3::identity(), &cam, &gt, &LearningRates::default(), 0.6).unwrap();
        assert!(f.primitives[0].cost > 0.0);
    }

    #[test]
    fn twenty_steps_do_not_increase_loss() {
        let cam = cam();
        let mut f = field();
        let mut target = field();
        target.primitives[0].cost = 0.9;
        target.primitives[1].mu.x += 0.1;
        target.primitives[2].opacity_logit += 1.0;
        let gt = render_cost_map(&target, &Pose3::identity(), &cam, 0.6);
        let lr = LearningRates { mu: 1e-2, opacity: 1e-2, cost: 1e-2 };
        let mut prev = f64::INFINITY;
        for _ in 0..20 {
            let l = optimize_step(&mut f, &Pose3::identity(), &cam, &gt, &lr, 0.6).unwrap();
            assert!(l <= prev + 1e-6, "{l} > {prev}");
            prev = l;
        }
    }
}
