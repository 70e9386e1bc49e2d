use super::{Obstacle, Scene, Shape};
use crate::geometry::{Vec2, Vec3};
use crate::semantics::TerrainClass;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub class: TerrainClass,
    /// `None` for the ground plane.
    pub obstacle: Option<usize>,
}

fn ray_cylinder(o: &Vec3, d: &Vec3, center: &Vec2, radius: f64, height: f64) -> Option<f64> {
    let oc = Vec2::new(o.x - center.x, o.y - center.y);
    let inside = oc.norm_squared() <= radius * radius && o.z >= 0.0 && o.z <= height;
    if inside {
        return None;
    }
    let mut best = f64::INFINITY;
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        let b = 2.0 * (oc.x * d.x + oc.y * d.y);
        let c = oc.norm_squared() - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if t > EPS {
                    let z = o.z + t * d.z;
                    if (0.0..=height).contains(&z) {
                        best = best.min(t);
                        break;
                    }
                }
            }
        }
    }
    if d.z.abs() > 1e-15 {
        let t = (height - o.z) / d.z;
        if t > EPS {
            let p = Vec2::new(o.x + t * d.x - center.x, o.y + t * d.y - center.y);
            if p.norm_squared() <= radius * radius {
                best = best.min(t);
            }
        }
    }
    best.is_finite().then_some(best)
}

fn ray_box(o: &Vec3, d: &Vec3, center: &Vec3, half: &Vec3, yaw: f64) -> Option<f64> {
    let (s, c) = yaw.sin_cos();
    let rel = o - center;
    let lo = Vec3::new(c * rel.x + s * rel.y, -s * rel.x + c * rel.y, rel.z);
    let ld = Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
    if (0..3).all(|a| lo[a].abs() <= half[a]) {
        return None;
    }
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if ld[a].abs() < 1e-15 {
            if lo[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / ld[a];
        let (ta, tb) = ((-half[a] - lo[a]) * inv, (half[a] - lo[a]) * inv);
        let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > EPS).then_some(t0)
}

fn ray_obstacle(o: &Vec3, d: &Vec3, ob: &Obstacle) -> Option<f64> {
    match &ob.shape {
        Shape::Cylinder { center, radius, height } => ray_cylinder(o, d, center, *radius, *height),
        Shape::Box { center, half_extents, yaw } => ray_box(o, d, center, half_extents, *yaw),
    }
}

impl Scene {
    /// Nearest surface hit along a unit direction within `max_range`.
    pub fn cast(&self, o: &Vec3, d: &Vec3, max_range: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut t_best = max_range;
        if d.z < -1e-15 {
            let t = -o.z / d.z;
            if t > EPS && t <= t_best {
                let point = o + d * t;
                t_best = t;
                best = Some(Hit { t, point, class: self.ground_class(&point.xy()), obstacle: None });
            }
        }
        let dxy = Vec2::new(d.x, d.y);
        let dxy_len2 = dxy.norm_squared();
        for (k, ob) in self.obstacles.iter().enumerate() {
            // coarse reject on the enclosing vertical cylinder
            let (c, r) = ob.shape.bounding_circle();
            let oc = c - o.xy();
            if dxy_len2 > 1e-15 {
                let along = oc.dot(&dxy) / dxy_len2;
                let closest = oc - dxy * along.max(0.0);
                if closest.norm() > r + 1e-9 {
                    continue;
                }
                if along * dxy_len2.sqrt() > t_best + r {
                    continue;
                }
            } else if oc.norm() > r + 1e-9 {
                continue;
            }
            if let Some(t) = ray_obstacle(o, d, ob) {
                if t <= t_best {
                    t_best = t;
                    best = Some(Hit { t, point: o + d * t, class: ob.class, obstacle: Some(k) });
                }
            }
        }
        best
    }
}
