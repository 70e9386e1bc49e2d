use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mapping::{observe, Mapper, MappingConfig, Pipeline};
use super::mppi::{mppi_step, Control, MppiParams};
use super::make_waypoints;
use crate::error::{Error, Result};
use crate::esdf::EsdfGrid2D;
use crate::geometry::Vec2;
use crate::harness::FreezeDetector;
use crate::worldsim::{check_collision, step_robot, Contact, Pose2, RobotLimits, RobotState, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavParams {
    /// Control steps per map update.
    pub map_every: usize,
    pub waypoint_spacing: f64,
    /// Switch to the next waypoint within this distance, meters.
    pub r_waypoint: f64,
    pub r_goal: f64,
    pub max_time: f64,
    pub freeze_window: f64,
    pub freeze_eps: f64,
    pub robot_radius: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        Self {
            map_every: 5,
            waypoint_spacing: 25.0,
            r_waypoint: 2.0,
            r_goal: 0.5,
            max_time: 60.0,
            freeze_window: 10.0,
            freeze_eps: 0.2,
            robot_radius: 0.3,
        }
    }
}

/// Full closed-loop configuration; each field is a TOML section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub mapping: MappingConfig,
    pub mppi: MppiParams,
    pub limits: RobotLimits,
    pub nav: NavParams,
}

impl NavConfig {
    pub fn validate(&self) -> Result<()> {
        self.mapping.validate()?;
        self.mppi.validate()?;
        let n = &self.nav;
        let ok = n.map_every >= 1
            && n.waypoint_spacing > 0.0
            && n.r_goal > 0.0
            && n.r_waypoint > 0.0
            && n.max_time > 0.0
            && n.freeze_window > 0.0
            && n.freeze_eps >= 0.0
            && n.robot_radius >= 0.0
            && self.limits.v_max > 0.0
            && self.limits.omega_max > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid navigation parameters {n:?} / {:?}", self.limits)));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: NavConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Frozen,
    Collided,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Reached => "reached",
            Outcome::Frozen => "frozen",
            Outcome::Collided => "collided",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reached" => Ok(Outcome::Reached),
            "frozen" => Ok(Outcome::Frozen),
            "collided" => Ok(Outcome::Collided),
            "timeout" => Ok(Outcome::Timeout),
            _ => Err(Error::Parse(format!("unknown outcome {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavResult {
    pub outcome: Outcome,
    /// Every control-step state, starting with the initial one.
    pub trajectory: Vec<RobotState>,
    pub freeze_time: Option<f64>,
    /// Control steps spent overlapping pliable vegetation.
    pub pliable_steps: usize,
    pub map_updates: usize,
}

impl NavResult {
    pub fn path_length(&self) -> f64 {
        self.trajectory
            .windows(2)
            .map(|w| (w[1].pose.position() - w[0].pose.position()).norm())
            .sum()
    }

    pub fn duration(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |s| s.t)
    }
}

/// SplitMix64 finalizer over a (seed, stream, step) triple.
pub(crate) fn derive_seed(seed: u64, stream: u64, step: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(step.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_LIDAR: u64 = 1;
const STREAM_MPPI: u64 = 2;

/// Runs the closed loop until the goal is reached, the robot hits something
/// rigid, freezes, or runs out of time.
pub fn navigate(
    scene: &Scene,
    start: &Pose2,
    goal: &Vec2,
    cfg: &NavConfig,
    pipeline: Pipeline,
    seed: u64,
) -> Result<NavResult> {
    cfg.validate()?;
    if !scene.bounds.contains(&start.position()) || !scene.bounds.contains(goal) {
        return Err(Error::Config("start and goal must lie inside the scene bounds".into()));
    }
    let nav = &cfg.nav;
    let dt = cfg.mppi.dt;
    let plan = make_waypoints(&start.position(), goal, nav.waypoint_spacing)?;
    let mut mapper = Mapper::new(cfg.mapping.clone(), pipeline)?;
    let d_outside = cfg.mapping.esdf.lidar_truncation;

    let mut state = RobotState { radius: nav.robot_radius, ..RobotState::at(*start) };
    let mut trajectory = vec![state];
    let mut nominal: Vec<Control> = vec![(0.0, 0.0); cfg.mppi.horizon];
    let mut freeze = FreezeDetector::new(nav.freeze_window, nav.freeze_eps);
    freeze.push(state.t, state.pose.position(), true);
    let mut map: Option<EsdfGrid2D> = None;
    let mut wp_index = 0;
    let mut pliable_steps = 0;
    let mut map_updates = 0;
    let max_steps = (nav.max_time / dt).ceil() as u64;

    let finish = |outcome, trajectory, freeze_time, pliable_steps, map_updates| NavResult {
        outcome,
        trajectory,
        freeze_time,
        pliable_steps,
        map_updates,
    };

    for step in 0..max_steps {
        let pos = state.pose.position();
        if (pos - goal).norm() <= nav.r_goal {
            return Ok(finish(Outcome::Reached, trajectory, None, pliable_steps, map_updates));
        }
        if step % nav.map_every as u64 == 0 || map.is_none() {
            let obs = observe(scene, &state.pose, &cfg.mapping, derive_seed(seed, STREAM_LIDAR, step));
            map = Some(mapper.integrate(&obs)?.fused);
            map_updates += 1;
        }
        while wp_index + 1 < plan.waypoints.len() && (pos - plan.waypoints[wp_index]).norm() <= nav.r_waypoint {
            wp_index += 1;
        }
        let esdf = map.as_ref().expect("map built on the first step");
        let out = mppi_step(
            &state,
            esdf,
            &plan.waypoints[wp_index],
            &nominal,
            &cfg.mppi,
            &cfg.limits,
            d_outside,
            derive_seed(seed, STREAM_MPPI, step),
        )?;
        nominal = out.nominal;
        state = step_robot(&state, out.cmd, dt, &cfg.limits);
        trajectory.push(state);
        match check_collision(scene, &state) {
            Contact::RigidCollision => {
                return Ok(finish(Outcome::Collided, trajectory, None, pliable_steps, map_updates));
            }
            Contact::PliableContact => pliable_steps += 1,
            Contact::Free => {}
        }
        let pos = state.pose.position();
        let far = (pos - goal).norm() > nav.r_goal;
        if let Some(t) = freeze.push(state.t, pos, far) {
            return Ok(finish(Outcome::Frozen, trajectory, Some(t), pliable_steps, map_updates));
        }
    }
    let outcome = if (state.pose.position() - goal).norm() <= nav.r_goal { Outcome::Reached } else { Outcome::Timeout };
    Ok(finish(outcome, trajectory, None, pliable_steps, map_updates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esdf::CostVolumeMode;
    use crate::worldsim::{builtin_scene, Bounds, Obstacle, Shape};
    use crate::semantics::TerrainClass;

    #[test]
    fn outcome_strings() {
        for o in [Outcome::Reached, Outcome::Frozen, Outcome::Collided, Outcome::Timeout] {
            assert_eq!(o.as_str().parse::<Outcome>().unwrap(), o);
        }
        assert!("lost".parse::<Outcome>().is_err());
    }

    #[test]
    fn config_toml_sections() {
        let cfg = NavConfig::from_toml("[mppi]\nsamples = 64\n[nav]\nmax_time = 30.0\n").unwrap();
        assert_eq!(cfg.mppi.samples, 64);
        assert_eq!(cfg.nav.max_time, 30.0);
        assert_eq!(cfg.mapping, MappingConfig::default());
        assert!(NavConfig::from_toml("[mppi]\nbogus = 1\n").is_err());
        assert!(NavConfig::from_toml("[mppi]\nlambda = 0.0\n").is_err());
    }

    #[test]
    fn open_field_is_reached_straight() {
        let scene = builtin_scene("open_field").unwrap();
        let cfg = NavConfig::default();
        let r = navigate(&scene, &scene.start, &scene.goal, &cfg, Pipeline::GeometricOnly, 1).unwrap();
        assert_eq!(r.outcome, Outcome::Reached);
        let ntl = r.path_length() / (scene.goal - scene.start.position()).norm();
        assert!(ntl < 1.1, "ntl {ntl}");
    }

    #[test]
    fn enclosed_goal_is_never_collided() {
        let mut obstacles = vec![];
        for k in 0..24 {
            let a = k as f64 * std::f64::consts::TAU / 24.0;
            obstacles.push(Obstacle {
                shape: Shape::Cylinder { center: Vec2::new(8.0 + 2.0 * a.cos(), 2.0 * a.sin()), radius: 0.3, height: 2.0 },
                class: TerrainClass::RigidObstacle,
                pliable: false,
            });
        }
        let scene = Scene {
            name: "ring".into(),
            obstacles,
            patches: vec![],
            bounds: Bounds { min: [-5.0, -8.0], max: [15.0, 8.0] },
            default_ground: TerrainClass::Stable,
            start: Pose2::new(0.0, 0.0, 0.0),
            goal: Vec2::new(8.0, 0.0),
        };
        scene.validate().unwrap();
        let mut cfg = NavConfig::default();
        cfg.nav.max_time = 30.0;
        for pipeline in [Pipeline::GeometricOnly, Pipeline::Semantic(CostVolumeMode::SampledPoints { fraction: 1.0 })] {
            let r = navigate(&scene, &scene.start, &scene.goal, &cfg, pipeline, 3).unwrap();
            assert!(matches!(r.outcome, Outcome::Frozen | Outcome::Timeout), "{:?}", r.outcome);
        }
    }

    #[test]
    fn rejects_out_of_bounds_goal() {
        let scene = builtin_scene("open_field").unwrap();
        let r = navigate(&scene, &scene.start, &Vec2::new(500.0, 0.0), &NavConfig::default(), Pipeline::GeometricOnly, 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn seeds_mix() {
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 2, 0));
        assert_ne!(derive_seed(1, 1, 0), derive_seed(2, 1, 0));
        assert_eq!(derive_seed(5, 1, 9), derive_seed(5, 1, 9));
    }
}
