//! Straight-line waypoints, an MPPI local controller on the fused distance
//! field, and the closed sense-map-plan-act loop.

mod mapping;
mod mppi;
mod navigate;

pub use mapping::{observe, MapProducts, Mapper, MappingConfig, Observation, Pipeline};
pub use mppi::{mppi_step, mppi_weights, rollout_cost, Control, MppiParams, MppiStep, HARD_PENALTY};
pub use navigate::{navigate, NavConfig, NavParams, NavResult, Outcome};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    pub waypoints: Vec<Vec2>,
    pub spacing: f64,
}

/// Points every `spacing` meters along the start-goal segment, then the goal.
pub fn make_waypoints(start: &Vec2, goal: &Vec2, spacing: f64) -> Result<WaypointPlan> {
    if !(spacing > 0.0) {
        return Err(Error::Config(format!("waypoint spacing must be positive (got {spacing})")));
    }
    let delta = goal - start;
    let length = delta.norm();
    let mut waypoints = Vec::new();
    if length > 0.0 {
        let dir = delta / length;
        let mut k = 1;
        while (k as f64) * spacing < length - 1e-9 {
            waypoints.push(start + dir * (k as f64 * spacing));
            k += 1;
        }
    }
    waypoints.push(*goal);
    Ok(WaypointPlan { waypoints, spacing })
}
