use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esdf::EsdfGrid2D;
use crate::geometry::Vec2;
use crate::worldsim::{step_robot, RobotLimits, RobotState};

/// `(v, ω)` command.
pub type Control = (f64, f64);

pub const HARD_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MppiParams {
    /// Number of sampled rollouts.
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub lambda: f64,
    pub w_obs: f64,
    pub w_goal: f64,
    pub w_ctrl: f64,
    pub d_safe: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self {
            samples: 256,
            horizon: 30,
            dt: 0.1,
            sigma_v: 0.3,
            sigma_omega: 0.5,
            lambda: 1.0,
            w_obs: 100.0,
            w_goal: 1.0,
            w_ctrl: 0.1,
            d_safe: 0.5,
        }
    }
}

impl MppiParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.samples >= 1
            && self.horizon >= 1
            && self.dt > 0.0
            && self.lambda > 0.0
            && self.sigma_v > 0.0
            && self.sigma_omega > 0.0
            && self.w_obs >= 0.0
            && self.w_goal >= 0.0
            && self.w_ctrl >= 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid MPPI parameters {self:?}")));
        }
        Ok(())
    }
}

/// Stage costs summed over the states reached by each control. `traj[0]` is
/// the start state and carries no cost.
pub fn rollout_cost(
    traj: &[RobotState],
    controls: &[Control],
    esdf: &EsdfGrid2D,
    waypoint: &Vec2,
    p: &MppiParams,
    d_outside: f64,
) -> f64 {
    debug_assert_eq!(traj.len(), controls.len() + 1);
    let mut total = 0.0;
    for (s, &(v, w)) in traj[1..].iter().zip(controls) {
        let pos = s.pose.position();
        let d = esdf.sample(&pos, d_outside);
        let gap = (p.d_safe - d).max(0.0);
        total += p.w_obs * gap * gap + p.w_goal * (pos - waypoint).norm() + p.w_ctrl * (v * v + w * w);
        if d <= 0.0 {
            total += HARD_PENALTY;
        }
    }
    total
}

/// Normalized `exp(−(S − min S)/λ)`.
pub fn mppi_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|s| (-(s - min) / lambda).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppiStep {
    pub cmd: Control,
    /// Updated nominal, already shifted by one step.
    pub nominal: Vec<Control>,
    pub costs: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Perturbed control sequences `nominal + ε`, clamped to the limits, in
/// rollout order.
pub(crate) fn sample_sequences(nominal: &[Control], p: &MppiParams, limits: &RobotLimits, seed: u64) -> Vec<Vec<Control>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = Normal::new(0.0, p.sigma_v).expect("positive sigma");
    let nw = Normal::new(0.0, p.sigma_omega).expect("positive sigma");
    (0..p.samples)
        .map(|_| {
            nominal
                .iter()
                .map(|&(v, w)| limits.clamp(v + nv.sample(&mut rng), w + nw.sample(&mut rng)))
                .collect()
        })
        .collect()
}

fn simulate(start: &RobotState, controls: &[Control], dt: f64, limits: &RobotLimits) -> Vec<RobotState> {
    let mut traj = Vec::with_capacity(controls.len() + 1);
    traj.push(*start);
    let mut s = *start;
    for &u in controls {
        s = step_robot(&s, u, dt, limits);
        traj.push(s);
    }
    traj
}

/// One MPPI iteration. Deterministic for a given seed regardless of thread count.
#[allow(clippy::too_many_arguments)]
pub fn mppi_step(
    state: &RobotState,
    esdf: &EsdfGrid2D,
    waypoint: &Vec2,
    nominal: &[Control],
    p: &MppiParams,
    limits: &RobotLimits,
    d_outside: f64,
    seed: u64,
) -> Result<MppiStep> {
    p.validate()?;
    if nominal.len() != p.horizon {
        return Err(Error::DimensionMismatch(format!(
            "nominal has {} controls, horizon is {}",
            nominal.len(),
            p.horizon
        )));
    }
    let sequences = sample_sequences(nominal, p, limits, seed);
    let costs: Vec<f64> = sequences
        .par_iter()
        .map(|u| rollout_cost(&simulate(state, u, p.dt, limits), u, esdf, waypoint, p, d_outside))
        .collect();
    let weights = mppi_weights(&costs, p.lambda);
    let mut averaged = vec![(0.0, 0.0); p.horizon];
    for (w, seq) in weights.iter().zip(&sequences) {
        for (acc, &(v, om)) in averaged.iter_mut().zip(seq) {
            acc.0 += w * v;
            acc.1 += w * om;
        }
    }
    let cmd = limits.clamp(averaged[0].0, averaged[0].1);
    let last = *averaged.last().expect("horizon ≥ 1");
    let mut shifted: Vec<Control> = averaged[1..].to_vec();
    shifted.push(last);
    Ok(MppiStep { cmd, nominal: shifted, costs, weights })
}
