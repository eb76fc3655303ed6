//! Benchmark scenarios: a head-on encounter on a narrow road and a five-vehicle
//! intersection crossing, each with the ego's assumed view of the others.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::CostConfig;
use crate::error::{Error, Result};
use crate::model::{AgentParams, Axis, Bounds, VehicleState, DEFAULT_DT, DEFAULT_HORIZON};
use crate::safety::SafetySpec;

pub const ONCOMING_OFFSET_RANGE: (f64, f64) = (0.2, 2.0);
pub const ONCOMING_THETA_RANGE: (f64, f64) = (1.0, 10.0);
pub const INTERSECTION_THETA_RANGE: (f64, f64) = (1.0, 100.0);
pub const INTERSECTION_SPEED_RANGE: (f64, f64) = (5.0, 15.0);

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub ego_index: usize,
    pub duration_steps: usize,
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon_steps: usize,
    pub seed: u64,
    pub cost_cfg: CostConfig,
    pub safety_spec: SafetySpec,
    pub initial_states: Vec<VehicleState>,
    /// The parameters each agent actually optimizes.
    pub true_params: Vec<AgentParams>,
    /// The ego's belief about every agent; its own entry equals the true one.
    pub assumed_params: Vec<AgentParams>,
}

impl Scenario {
    pub fn num_agents(&self) -> usize {
        self.initial_states.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.initial_states.len();
        if n < 2 {
            return Err(Error::config("a scenario needs at least two vehicles"));
        }
        if self.true_params.len() != n || self.assumed_params.len() != n {
            return Err(Error::config(
                "states, true_params and assumed_params must have equal length",
            ));
        }
        if self.ego_index >= n {
            return Err(Error::config(format!("ego_index {} out of range", self.ego_index)));
        }
        if self.true_params[self.ego_index] != self.assumed_params[self.ego_index] {
            return Err(Error::config(
                "the ego's assumed parameters must equal its true parameters",
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if self.duration_steps == 0 || self.horizon_steps == 0 {
            return Err(Error::config("duration and horizon must be positive"));
        }
        self.cost_cfg.validate()?;
        self.safety_spec.validate()?;
        for p in self.true_params.iter().chain(&self.assumed_params) {
            p.validate()?;
        }
        if let Some(s) = self.initial_states.iter().find(|s| !s.is_finite()) {
            return Err(Error::CorruptedState(format!("{s:?}")));
        }
        for i in 0..n {
            for j in i + 1..n {
                let d = self.initial_states[i].distance_to(&self.initial_states[j]);
                if d < self.safety_spec.d_safe {
                    return Err(Error::config(format!(
                        "vehicles {i} and {j} start {d:.3} m apart, inside d_safe"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// Same scenario sampled every `dt` seconds. The episode keeps its length in
    /// seconds (rounded to whole steps); the horizon keeps its step count.
    pub fn retimed(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {dt}")));
        }
        let seconds = self.duration_steps as f64 * self.dt;
        Ok(Self {
            dt,
            duration_steps: ((seconds / dt).round() as usize).max(1),
            ..self.clone()
        })
    }

    /// Reflection about the vertical line `x = axis_x`.
    pub fn mirrored_x(&self, axis_x: f64) -> Self {
        Self {
            initial_states: self.initial_states.iter().map(|s| s.mirrored_x(axis_x)).collect(),
            true_params: self.true_params.iter().map(|p| p.mirrored_x(axis_x)).collect(),
            assumed_params: self.assumed_params.iter().map(|p| p.mirrored_x(axis_x)).collect(),
            ..self.clone()
        }
    }
}

/// Geometry of the head-on encounter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OncomingGeometry {
    /// Initial distance along the road (m).
    pub separation: f64,
    /// Initial and desired speed of both vehicles (m/s).
    pub speed: f64,
    /// Shared lane center both vehicles track (m).
    pub lane_center: f64,
    pub accel_limit: f64,
    pub assumed_theta: f64,
    pub duration_steps: usize,
    pub horizon_steps: usize,
    /// Weight on the squared distance to the lane center.
    pub lane_weight: f64,
    /// Weight on each squared velocity error component.
    pub velocity_weight: f64,
}

impl Default for OncomingGeometry {
    fn default() -> Self {
        // Self terms small against the unit interaction weight, over a 4 s
        // horizon: with equal weights braking and swerving cost about the
        // same and neither vehicle yields in time.
        Self {
            separation: 50.0,
            speed: 5.0,
            lane_center: 0.0,
            accel_limit: 3.0,
            assumed_theta: 1.0,
            duration_steps: 30,
            horizon_steps: 8,
            lane_weight: 0.1,
            velocity_weight: 0.01,
        }
    }
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

fn road_driver(theta: f64, vy: f64, geom: &OncomingGeometry) -> AgentParams {
    AgentParams {
        theta,
        q_weights: [geom.lane_weight, 0.0],
        r_weights: [geom.velocity_weight; 2],
        desired_position: Some([geom.lane_center, 0.0]),
        desired_velocity: [0.0, vy],
        action_bounds: [Bounds::symmetric(geom.accel_limit); 2],
        longitudinal_axis: Axis::Y,
        lateral_locked: false,
    }
}

/// Head-on encounter: the ego drives north from the origin, vehicle 2 south from
/// `(lateral_offset, separation)`, and both want the same lane center.
pub fn build_oncoming(lateral_offset: f64, theta2: f64, seed: u64) -> Result<Scenario> {
    build_oncoming_with(&OncomingGeometry::default(), lateral_offset, theta2, seed)
}

pub fn build_oncoming_with(geom: &OncomingGeometry, lateral_offset: f64, theta2: f64, seed: u64) -> Result<Scenario> {
    if !in_range(lateral_offset, ONCOMING_OFFSET_RANGE) {
        return Err(Error::config(format!(
            "lateral offset {lateral_offset} outside [0.2, 2]"
        )));
    }
    if !in_range(theta2, ONCOMING_THETA_RANGE) {
        return Err(Error::config(format!("theta2 {theta2} outside [1, 10]")));
    }
    let v = geom.speed;
    let ego = road_driver(1.0, v, geom);
    let other_true = road_driver(theta2, -v, geom);
    let other_assumed = AgentParams {
        theta: geom.assumed_theta,
        ..other_true.clone()
    };
    let s = Scenario {
        name: "oncoming".into(),
        ego_index: 0,
        duration_steps: geom.duration_steps,
        dt: DEFAULT_DT,
        horizon_steps: geom.horizon_steps,
        seed,
        cost_cfg: CostConfig::default(),
        safety_spec: SafetySpec::default(),
        initial_states: vec![
            VehicleState::new(geom.lane_center, 0.0, 0.0, v),
            VehicleState::new(geom.lane_center + lateral_offset, geom.separation, 0.0, -v),
        ],
        true_params: vec![ego.clone(), other_true],
        assumed_params: vec![ego, other_assumed],
    };
    s.validate()?;
    Ok(s)
}

/// One straight approach to the intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub start: [f64; 2],
    /// Travel direction along `axis`: +1 or −1.
    pub direction: f64,
    pub axis: Axis,
    pub initial_speed: f64,
}

impl Approach {
    fn state(&self) -> VehicleState {
        let v = self.direction * self.initial_speed;
        match self.axis {
            Axis::X => VehicleState::new(self.start[0], self.start[1], v, 0.0),
            Axis::Y => VehicleState::new(self.start[0], self.start[1], 0.0, v),
        }
    }

    fn params(&self, theta: f64, speed: f64, accel: f64, velocity_weight: f64) -> AgentParams {
        let v = self.direction * speed;
        AgentParams {
            theta,
            q_weights: [0.0; 2],
            r_weights: [velocity_weight; 2],
            desired_position: None,
            desired_velocity: match self.axis {
                Axis::X => [v, 0.0],
                Axis::Y => [0.0, v],
            },
            action_bounds: [Bounds::symmetric(accel); 2],
            longitudinal_axis: self.axis,
            lateral_locked: true,
        }
    }
}

/// Five-vehicle crossing layout; approach 0 is the northbound ego.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionGeometry {
    pub approaches: [Approach; 5],
    pub ego_speed: f64,
    pub accel_limit: f64,
    /// The ego's belief about every other vehicle.
    pub assumed_theta: f64,
    pub assumed_speed: f64,
    pub duration_steps: usize,
    pub horizon_steps: usize,
    /// Weight on the squared longitudinal speed error.
    pub velocity_weight: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        let lane = 2.5;
        Self {
            approaches: [
                Approach {
                    start: [lane, -20.0],
                    direction: 1.0,
                    axis: Axis::Y,
                    initial_speed: 5.0,
                },
                Approach {
                    start: [-lane, 40.0],
                    direction: -1.0,
                    axis: Axis::Y,
                    initial_speed: 5.0,
                },
                Approach {
                    start: [-45.0, -lane],
                    direction: 1.0,
                    axis: Axis::X,
                    initial_speed: 5.0,
                },
                Approach {
                    start: [45.0, lane],
                    direction: -1.0,
                    axis: Axis::X,
                    initial_speed: 5.0,
                },
                Approach {
                    start: [-70.0, -lane],
                    direction: 1.0,
                    axis: Axis::X,
                    initial_speed: 5.0,
                },
            ],
            ego_speed: 5.0,
            accel_limit: 3.0,
            assumed_theta: 1.0,
            assumed_speed: 5.0,
            duration_steps: 30,
            horizon_steps: 8,
            velocity_weight: 0.01,
        }
    }
}

/// Intersection crossing with lane-locked vehicles. `thetas` and
/// `desired_speeds` are the true values of vehicles 2 to 5.
pub fn build_intersection(thetas: [f64; 4], desired_speeds: [f64; 4], seed: u64) -> Result<Scenario> {
    build_intersection_with(&IntersectionGeometry::default(), thetas, desired_speeds, seed)
}

pub fn build_intersection_with(
    geom: &IntersectionGeometry,
    thetas: [f64; 4],
    desired_speeds: [f64; 4],
    seed: u64,
) -> Result<Scenario> {
    if let Some(t) = thetas.iter().find(|t| !in_range(**t, INTERSECTION_THETA_RANGE)) {
        return Err(Error::config(format!("theta {t} outside [1, 100]")));
    }
    if let Some(v) = desired_speeds.iter().find(|v| !in_range(**v, INTERSECTION_SPEED_RANGE)) {
        return Err(Error::config(format!("desired speed {v} outside [5, 15]")));
    }
    let w = geom.velocity_weight;
    let ego = geom.approaches[0].params(1.0, geom.ego_speed, geom.accel_limit, w);
    let mut true_params = vec![ego.clone()];
    let mut assumed_params = vec![ego];
    for (k, a) in geom.approaches[1..].iter().enumerate() {
        true_params.push(a.params(thetas[k], desired_speeds[k], geom.accel_limit, w));
        assumed_params.push(a.params(geom.assumed_theta, geom.assumed_speed, geom.accel_limit, w));
    }
    let s = Scenario {
        name: "intersection".into(),
        ego_index: 0,
        duration_steps: geom.duration_steps,
        dt: DEFAULT_DT,
        horizon_steps: geom.horizon_steps,
        seed,
        cost_cfg: CostConfig::default(),
        safety_spec: SafetySpec::default(),
        initial_states: geom.approaches.iter().map(Approach::state).collect(),
        true_params,
        assumed_params,
    };
    s.validate()?;
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Oncoming,
    Intersection,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Oncoming => "oncoming",
            Family::Intersection => "intersection",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oncoming" => Ok(Family::Oncoming),
            "intersection" => Ok(Family::Intersection),
            other => Err(Error::config(format!("unknown scenario family `{other}`"))),
        }
    }
}

/// Seeded scenario stream. Scenario `k` comes from ChaCha8 stream `k` of the
/// seed, so it does not depend on which other scenarios are drawn.
#[derive(Clone, Debug)]
pub struct ScenarioSampler {
    pub family: Family,
    pub seed: u64,
}

impl ScenarioSampler {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    pub fn scenario(&self, index: u64) -> Result<Scenario> {
        let mut rng = self.rng(index);
        let mut s = match self.family {
            Family::Oncoming => sample_oncoming(&mut rng)?,
            Family::Intersection => sample_intersection(&mut rng)?,
        };
        s.seed = self.seed;
        s.name = format!("{}-{index}", self.family);
        Ok(s)
    }
}

pub fn sample_oncoming(rng: &mut impl Rng) -> Result<Scenario> {
    let offset = rng.random_range(ONCOMING_OFFSET_RANGE.0..=ONCOMING_OFFSET_RANGE.1);
    let theta2 = rng.random_range(ONCOMING_THETA_RANGE.0..=ONCOMING_THETA_RANGE.1);
    build_oncoming(offset, theta2, 0)
}

pub fn sample_intersection(rng: &mut impl Rng) -> Result<Scenario> {
    let mut thetas = [0.0; 4];
    let mut speeds = [0.0; 4];
    for k in 0..4 {
        thetas[k] = rng.random_range(INTERSECTION_THETA_RANGE.0..=INTERSECTION_THETA_RANGE.1);
        speeds[k] = rng.random_range(INTERSECTION_SPEED_RANGE.0..=INTERSECTION_SPEED_RANGE.1);
    }
    build_intersection(thetas, speeds, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oncoming_layout() {
        let s = build_oncoming(2.0, 1.0, 3).unwrap();
        assert_eq!(s.true_params, s.assumed_params);
        assert_eq!(s.initial_states[1].x - s.initial_states[0].x, 2.0);
        assert_eq!(s.initial_states[1].y - s.initial_states[0].y, 50.0);
        assert_eq!(s.duration_steps, 30);

        let adv = build_oncoming(0.5, 10.0, 3).unwrap();
        assert_eq!(adv.true_params[1].theta, 10.0);
        assert_eq!(adv.assumed_params[1].theta, 1.0);
        assert_eq!(adv.true_params[0], adv.assumed_params[0]);
    }

    #[test]
    fn oncoming_rejects_out_of_range() {
        assert!(build_oncoming(0.1, 1.0, 0).unwrap_err().is_configuration());
        assert!(build_oncoming(1.0, 10.5, 0).unwrap_err().is_configuration());
    }

    #[test]
    fn intersection_layout() {
        let s = build_intersection([1.0; 4], [5.0; 4], 0).unwrap();
        assert_eq!(s.num_agents(), 5);
        assert_eq!(s.true_params, s.assumed_params);
        assert!(s.true_params.iter().all(|p| p.lateral_locked));
        let adv = build_intersection([1.0, 100.0, 100.0, 1.0], [5.0, 13.0, 15.0, 5.0], 0).unwrap();
        assert_eq!(adv.assumed_params[2].desired_velocity, [5.0, 0.0]);
        assert_eq!(adv.true_params[3].desired_velocity, [-15.0, 0.0]);
        assert_eq!(
            adv,
            build_intersection([1.0, 100.0, 100.0, 1.0], [5.0, 13.0, 15.0, 5.0], 0).unwrap()
        );
        assert!(build_intersection([0.5, 1.0, 1.0, 1.0], [5.0; 4], 0).is_err());
        assert!(build_intersection([1.0; 4], [5.0, 16.0, 5.0, 5.0], 0).is_err());
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let mut rng = ScenarioSampler::new(Family::Intersection, 11).rng(4);
        let s = sample_intersection(&mut rng).unwrap();
        let back = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, s);
        let o = ScenarioSampler::new(Family::Oncoming, 11).scenario(2).unwrap();
        assert_eq!(Scenario::from_toml_str(&o.to_toml_string().unwrap()).unwrap(), o);
    }

    #[test]
    fn sampler_streams_are_order_independent() {
        let s = ScenarioSampler::new(Family::Oncoming, 42);
        let forward: Vec<_> = (0..5).map(|k| s.scenario(k).unwrap()).collect();
        let backward: Vec<_> = (0..5).rev().map(|k| s.scenario(k).unwrap()).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_ne!(forward[0], forward[1]);
    }

    #[test]
    fn oncoming_sample_moments() {
        let sampler = ScenarioSampler::new(Family::Oncoming, 7);
        let n = 10_000;
        let (mut so, mut st) = (0.0, 0.0);
        for k in 0..n {
            let mut rng = sampler.rng(k);
            let offset: f64 = rng.random_range(0.2..=2.0);
            let theta: f64 = rng.random_range(1.0..=10.0);
            assert!(in_range(offset, ONCOMING_OFFSET_RANGE) && in_range(theta, ONCOMING_THETA_RANGE));
            so += offset;
            st += theta;
        }
        let nf = n as f64;
        // standard error of a U[a,b] mean: (b−a)/sqrt(12 n)
        assert!((so / nf - 1.1).abs() < 3.0 * 1.8 / (12.0 * nf).sqrt());
        assert!((st / nf - 5.5).abs() < 3.0 * 9.0 / (12.0 * nf).sqrt());
    }

    #[test]
    fn intersection_draws_are_uncorrelated() {
        let sampler = ScenarioSampler::new(Family::Intersection, 9);
        let n = 10_000;
        let mut draws = vec![[0.0f64; 8]; n];
        for (k, row) in draws.iter_mut().enumerate() {
            let s = sampler.scenario(k as u64).unwrap();
            for j in 0..4 {
                let p = &s.true_params[j + 1];
                assert!(in_range(p.theta, INTERSECTION_THETA_RANGE));
                let speed = p.desired_velocity[0].abs() + p.desired_velocity[1].abs();
                assert!(in_range(speed, INTERSECTION_SPEED_RANGE));
                row[2 * j] = p.theta;
                row[2 * j + 1] = speed;
            }
        }
        let mean = |c: usize| draws.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        let means: Vec<f64> = (0..8).map(mean).collect();
        let sd = |c: usize| (draws.iter().map(|r| (r[c] - means[c]).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sds: Vec<f64> = (0..8).map(sd).collect();
        for a in 0..8 {
            for b in a + 1..8 {
                let cov = draws.iter().map(|r| (r[a] - means[a]) * (r[b] - means[b])).sum::<f64>() / n as f64;
                let corr = cov / (sds[a] * sds[b]);
                // null standard error of a sample correlation is 1/sqrt(n)
                assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{a},{b}: {corr}");
            }
        }
    }
}
