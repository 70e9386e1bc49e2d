use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

const TIME_EPS: f64 = 1e-9;

/// Online sliding-window freeze check: fires when the net displacement over
/// the last `window` seconds stays below `eps` while the robot is still away
/// from the goal.
#[derive(Debug, Clone)]
pub struct FreezeDetector {
    window: f64,
    eps: f64,
    samples: VecDeque<(f64, Vec2)>,
}

impl FreezeDetector {
    pub fn new(window: f64, eps: f64) -> Self {
        Self { window, eps, samples: VecDeque::new() }
    }

    /// Adds a sample and returns the time if this sample completes a frozen
    /// window. `away_from_goal` gates the check.
    pub fn push(&mut self, t: f64, pos: Vec2, away_from_goal: bool) -> Option<f64> {
        self.samples.push_back((t, pos));
        let cutoff = t - self.window + TIME_EPS;
        while self.samples.len() >= 2 && self.samples[1].0 <= cutoff {
            self.samples.pop_front();
        }
        let (t0, p0) = self.samples[0];
        (away_from_goal && t0 <= cutoff && (pos - p0).norm() < self.eps).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeReport {
    pub frozen: bool,
    /// End of the first frozen window.
    pub time: Option<f64>,
}

/// Offline check over timestamped positions.
pub fn detect_freeze(
    samples: &[(f64, Vec2)],
    goal: &Vec2,
    r_goal: f64,
    window: f64,
    eps: f64,
) -> Result<FreezeReport> {
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config("trajectory timestamps must be strictly increasing".into()));
    }
    let mut det = FreezeDetector::new(window, eps);
    for &(t, p) in samples {
        if let Some(ft) = det.push(t, p, (p - goal).norm() > r_goal) {
            return Ok(FreezeReport { frozen: true, time: Some(ft) });
        }
    }
    Ok(FreezeReport { frozen: false, time: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(n: usize, dt: f64, f: impl Fn(f64) -> Vec2) -> Vec<(f64, Vec2)> {
        (0..n).map(|k| (k as f64 * dt, f(k as f64 * dt))).collect()
    }

    const GOAL: Vec2 = Vec2::new(100.0, 0.0);

    #[test]
    fn stuck_robot() {
        // drives for 5 s, then sits still for 11 s
        let s = samples(161, 0.1, |t| Vec2::new(t.min(5.0), 0.0));
        let r = detect_freeze(&s, &GOAL, 0.5, 10.0, 0.2).unwrap();
        assert!(r.frozen);
        let t = r.time.unwrap();
        // displacement first drops below 0.2 once the window starts near t = 4.8
        assert!((14.75..=14.95).contains(&t), "{t}");
    }

    #[test]
    fn oscillation_is_frozen() {
        let s = samples(121, 0.1, |t| Vec2::new(10.0 + if ((t * 10.0).round() as i64) % 2 == 0 { 0.05 } else { -0.05 }, 0.0));
        let path: f64 = s.windows(2).map(|w| (w[1].1 - w[0].1).norm()).sum();
        assert!((path - 12.0).abs() < 1e-6);
        assert!(detect_freeze(&s, &GOAL, 0.5, 10.0, 0.2).unwrap().frozen);
    }

    #[test]
    fn moving_robot_and_goal_exclusion() {
        let s = samples(300, 0.1, |t| Vec2::new(t, 0.0));
        assert!(!detect_freeze(&s, &GOAL, 0.5, 10.0, 0.2).unwrap().frozen);
        let parked = samples(200, 0.1, |_| Vec2::new(99.8, 0.0));
        assert!(!detect_freeze(&parked, &GOAL, 0.5, 10.0, 0.2).unwrap().frozen);
        let bad = vec![(0.0, Vec2::zeros()), (0.0, Vec2::zeros())];
        assert!(detect_freeze(&bad, &GOAL, 0.5, 10.0, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn never_fires_with_steady_progress(speed in 0.03..2.0f64, heading in -3.0..3.0f64, n in 50usize..400) {
            // every 10 s window covers at least 0.3 m
            let dir = Vec2::new(heading.cos(), heading.sin());
            let s = samples(n, 0.1, |t| dir * (speed * t));
            prop_assert!(!detect_freeze(&s, &GOAL, 0.5, 10.0, 0.2).unwrap().frozen);
        }
    }
}
