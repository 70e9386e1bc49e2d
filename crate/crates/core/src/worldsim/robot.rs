use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Scene, Shape};
use crate::geometry::Vec2;

/// Planar pose: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        Self { v_max: 1.0, omega_max: 1.5 }
    }
}

impl RobotLimits {
    pub fn clamp(&self, v: f64, omega: f64) -> (f64, f64) {
        (v.clamp(-self.v_max, self.v_max), omega.clamp(-self.omega_max, self.omega_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose2,
    pub v: f64,
    pub omega: f64,
    pub radius: f64,
    pub t: f64,
}

impl RobotState {
    pub fn at(pose: Pose2) -> Self {
        Self { pose, v: 0.0, omega: 0.0, radius: 0.3, t: 0.0 }
    }
}

/// Unicycle step with the command clamped to the limits.
pub fn step_robot(s: &RobotState, cmd: (f64, f64), dt: f64, limits: &RobotLimits) -> RobotState {
    let (v, omega) = limits.clamp(cmd.0, cmd.1);
    let th = s.pose.heading;
    RobotState {
        pose: Pose2 {
            x: s.pose.x + v * th.cos() * dt,
            y: s.pose.y + v * th.sin() * dt,
            heading: wrap_angle(th + omega * dt),
        },
        v,
        omega,
        radius: s.radius,
        t: s.t + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Contact {
    Free,
    PliableContact,
    RigidCollision,
}

fn footprint_distance(shape: &Shape, p: &Vec2) -> f64 {
    match shape {
        Shape::Cylinder { center, radius, .. } => (p - center).norm() - radius,
        Shape::Box { center, half_extents, yaw } => {
            let (s, c) = yaw.sin_cos();
            let rel = p - center.xy();
            let local = Vec2::new(c * rel.x + s * rel.y, -s * rel.x + c * rel.y);
            let q = Vec2::new(local.x.abs() - half_extents.x, local.y.abs() - half_extents.y);
            let outside = Vec2::new(q.x.max(0.0), q.y.max(0.0)).norm();
            outside + q.x.max(q.y).min(0.0)
        }
    }
}

/// Disc of the robot radius against every obstacle footprint.
pub fn check_collision(scene: &Scene, s: &RobotState) -> Contact {
    let p = s.pose.position();
    let mut contact = Contact::Free;
    for ob in &scene.obstacles {
        if footprint_distance(&ob.shape, &p) < s.radius {
            if !ob.pliable {
                return Contact::RigidCollision;
            }
            contact = Contact::PliableContact;
        }
    }
    contact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::semantics::TerrainClass;
    use crate::worldsim::{Bounds, Obstacle};
    use proptest::prelude::*;

    fn scene(obstacles: Vec<Obstacle>) -> Scene {
        Scene {
            name: "t".into(),
            obstacles,
            patches: vec![],
            bounds: Bounds { min: [-20.0, -20.0], max: [20.0, 20.0] },
            default_ground: TerrainClass::Stable,
            start: Pose2::new(0.0, 0.0, 0.0),
            goal: Vec2::new(5.0, 0.0),
        }
    }

    fn tree(x: f64, y: f64, r: f64) -> Obstacle {
        Obstacle {
            shape: Shape::Cylinder { center: Vec2::new(x, y), radius: r, height: 3.0 },
            class: TerrainClass::RigidObstacle,
            pliable: false,
        }
    }

    #[test]
    fn kinematics_examples() {
        let lim = RobotLimits { v_max: 10.0, omega_max: 10.0 };
        let s = step_robot(&RobotState::at(Pose2::new(0.0, 0.0, 0.0)), (1.0, 0.0), 1.0, &lim);
        assert!((s.pose.x - 1.0).abs() < 1e-12 && s.pose.y.abs() < 1e-12);
        assert_eq!(s.t, 1.0);
        let s = step_robot(&RobotState::at(Pose2::new(0.0, 0.0, 0.0)), (0.0, PI / 2.0), 1.0, &lim);
        assert!((s.pose.heading - PI / 2.0).abs() < 1e-12);

        // full circle closes; the half-turn point matches the exact arc to O(dt)
        let mut errs = vec![];
        for n in [100, 1000] {
            let dt = 1.0 / n as f64;
            let mut s = RobotState::at(Pose2::new(0.0, 0.0, 0.0));
            for k in 0..n {
                s = step_robot(&s, (1.0, 2.0 * PI), dt, &lim);
                if k + 1 == n / 2 {
                    errs.push((s.pose.position() - Vec2::new(0.0, 1.0 / PI)).norm());
                }
            }
            assert!(s.pose.position().norm() < 1e-9);
        }
        assert!(errs[0] < 0.02 && errs[1] < errs[0] / 5.0, "{errs:?}");
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn collision_examples() {
        let grass = Obstacle {
            shape: Shape::Box { center: Vec3::new(0.0, 0.0, 0.25), half_extents: Vec3::new(2.0, 2.0, 0.25), yaw: 0.3 },
            class: TerrainClass::VegetationHighResistance,
            pliable: true,
        };
        let sc = scene(vec![grass.clone(), tree(10.0, 0.0, 0.4)]);
        let far = RobotState::at(Pose2::new(-10.0, 10.0, 0.0));
        assert_eq!(check_collision(&sc, &far), Contact::Free);
        assert_eq!(check_collision(&sc, &RobotState::at(Pose2::new(0.0, 0.0, 0.0))), Contact::PliableContact);
        let graze = RobotState::at(Pose2::new(10.0 - (0.3 + 0.4 - 0.01), 0.0, 0.0));
        assert_eq!(check_collision(&sc, &graze), Contact::RigidCollision);
        let clear = RobotState::at(Pose2::new(10.0 - (0.3 + 0.4 + 0.01), 0.0, 0.0));
        assert_eq!(check_collision(&sc, &clear), Contact::Free);
        // rigid wins over pliable
        let both = scene(vec![grass, tree(0.4, 0.0, 0.2)]);
        assert_eq!(check_collision(&both, &RobotState::at(Pose2::new(0.0, 0.0, 0.0))), Contact::RigidCollision);
    }

    #[test]
    fn box_footprint_distance() {
        let b = Shape::Box { center: Vec3::new(1.0, 1.0, 0.5), half_extents: Vec3::new(1.0, 0.5, 0.5), yaw: PI / 2.0 };
        // rotated: spans y in [0, 2], x in [0.5, 1.5]
        assert!((footprint_distance(&b, &Vec2::new(1.0, 3.0)) - 1.0).abs() < 1e-12);
        assert!((footprint_distance(&b, &Vec2::new(2.5, 1.0)) - 1.0).abs() < 1e-12);
        assert!((footprint_distance(&b, &Vec2::new(1.0, 1.0)) + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn limits_always_hold(v in -50.0..50.0f64, w in -50.0..50.0f64, dt in 1e-3..1.0f64, th in -3.0..3.0f64) {
            let lim = RobotLimits::default();
            let s = step_robot(&RobotState::at(Pose2::new(0.0, 0.0, th)), (v, w), dt, &lim);
            prop_assert!(s.v.abs() <= lim.v_max && s.omega.abs() <= lim.omega_max);
            prop_assert!(s.pose.heading > -PI && s.pose.heading <= PI);
        }
    }
}
