use serde::{Deserialize, Serialize};

use super::episode::EpisodeLog;
use crate::model::AgentParams;

/// Per-episode tracking and timing statistics of the ego.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub collided: bool,
    pub collision_time: Option<f64>,
    pub min_distance: f64,
    /// Signed mean of `v_long − v_desired` (m/s).
    pub ave_velocity_dev: f64,
    /// Mean of `|v_long − v_desired|` (m/s).
    pub ave_abs_velocity_dev: f64,
    pub max_velocity_dev: f64,
    /// Signed mean heading deviation (degrees).
    pub ave_heading_dev: f64,
    pub max_heading_dev: f64,
    pub ave_solve_time: f64,
    pub max_solve_time: f64,
}

/// Heading `atan2(vy, vx)` minus the 90° northbound reference, in (−180°, 180°].
pub fn heading_deviation_deg(vx: f64, vy: f64) -> f64 {
    let mut d = vy.atan2(vx).to_degrees() - 90.0;
    while d <= -180.0 {
        d += 360.0;
    }
    while d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Statistics over the states after each executed step (post-collision steps
/// never exist because the episode stops there).
pub fn episode_metrics(log: &EpisodeLog, ego_params: &AgentParams) -> EpisodeMetrics {
    let ego = log.ego_index;
    let axis = ego_params.longitudinal_axis.index();
    let v_des = ego_params.desired_velocity[axis];
    let seq = log.state_sequence();
    let after: Vec<_> = seq.iter().skip(1).map(|s| s[ego]).collect();
    let tf = after.len();

    let mut sum_dv = 0.0;
    let mut sum_abs_dv = 0.0;
    let mut max_dv: f64 = 0.0;
    let mut sum_heading = 0.0;
    let mut max_heading: f64 = 0.0;
    for s in &after {
        let dv = s.velocity()[axis] - v_des;
        sum_dv += dv;
        sum_abs_dv += dv.abs();
        max_dv = max_dv.max(dv.abs());
        let h = if ego_params.lateral_locked {
            0.0
        } else {
            heading_deviation_deg(s.vx, s.vy)
        };
        sum_heading += h;
        max_heading = max_heading.max(h.abs());
    }
    let mean = |sum: f64| if tf == 0 { 0.0 } else { sum / tf as f64 };
    let times: Vec<f64> = log.steps.iter().map(|s| s.solve_time).collect();
    EpisodeMetrics {
        steps: log.steps.len(),
        collided: log.collided(),
        collision_time: log.collision_time(),
        min_distance: log.min_ego_distance(),
        ave_velocity_dev: mean(sum_dv),
        ave_abs_velocity_dev: mean(sum_abs_dv),
        max_velocity_dev: max_dv,
        ave_heading_dev: mean(sum_heading),
        max_heading_dev: max_heading,
        ave_solve_time: if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        },
        max_solve_time: times.iter().copied().fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_examples() {
        assert_eq!(heading_deviation_deg(0.0, 5.0), 0.0);
        assert_eq!(heading_deviation_deg(5.0, 0.0), -90.0);
        assert_eq!(heading_deviation_deg(-5.0, 0.0), 90.0);
        // reversing straight back
        assert_eq!(heading_deviation_deg(0.0, -5.0), 180.0);
        assert!((heading_deviation_deg(-1.0, -5.0) - (180.0 - 11.309932474020215)).abs() < 1e-9);
        assert!((heading_deviation_deg(1.0, -5.0) + (180.0 - 11.309932474020215)).abs() < 1e-9);
    }
}
