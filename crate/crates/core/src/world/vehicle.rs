use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::behaviors::Setpoints;
use crate::geometry::{heading_unit, wrap_180, wrap_360, EulerAttitude};

/// Speed over ground per propeller RPM at zero pitch (m/s per RPM).
pub const RPM_TO_SPEED: f64 = 1.25e-3;

/// Pitch-compensated speed over ground.
pub fn sog_from_rpm(rpm: f64, pitch_deg: f64) -> f64 {
    rpm * RPM_TO_SPEED * pitch_deg.to_radians().cos()
}

/// Controller limits and passive dynamics of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Heading proportional gain (1/s).
    pub heading_gain: f64,
    /// Maximum turn rate (deg/s).
    pub max_turn_rate: f64,
    /// Depth proportional gain (1/s).
    pub depth_gain: f64,
    /// Maximum vertical speed (m/s).
    pub max_depth_rate: f64,
    /// Ascent rate with the thruster off (m/s).
    pub buoyant_ascent: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            heading_gain: 1.5,
            max_turn_rate: 12.0,
            depth_gain: 0.5,
            max_depth_rate: 0.3,
            buoyant_ascent: 0.02,
        }
    }
}

/// True vehicle pose and propulsion state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTruth {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    /// True compass heading (deg).
    pub heading: f64,
    /// Pitch (deg), positive nose down.
    pub pitch: f64,
    pub rpm: f64,
    /// Rate of change of depth (m/s), positive descending.
    pub depth_rate: f64,
}

impl VehicleTruth {
    pub fn new(x: f64, y: f64, depth: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            depth,
            heading: wrap_360(heading),
            pitch: 0.0,
            rpm: 0.0,
            depth_rate: 0.0,
        }
    }

    pub fn attitude(&self) -> EulerAttitude {
        EulerAttitude::from_compass(0.0, self.pitch, self.heading)
    }

    /// Speed over ground from the propeller alone (m/s).
    pub fn sog(&self) -> f64 {
        sog_from_rpm(self.rpm, self.pitch)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Advance the vehicle by `dt` seconds toward `sp`, drifting with `current`.
pub fn step_vehicle(truth: &VehicleTruth, sp: &Setpoints, params: &VehicleParams, current: [f64; 2], dt: f64) -> VehicleTruth {
    let mut v = *truth;
    let thrust = sp.thruster_active && !sp.surfaced;
    if thrust {
        v.rpm = sp.speed.max(0.0) / RPM_TO_SPEED;
        let rate = (params.heading_gain * wrap_180(sp.heading_deg - v.heading))
            .clamp(-params.max_turn_rate, params.max_turn_rate);
        v.heading = wrap_360(v.heading + rate * dt);
        v.depth_rate = (params.depth_gain * (sp.depth.max(0.0) - v.depth))
            .clamp(-params.max_depth_rate, params.max_depth_rate);
        let through_water = v.rpm * RPM_TO_SPEED;
        v.pitch = if through_water > 0.0 {
            v.depth_rate.atan2(through_water).to_degrees()
        } else {
            0.0
        };
    } else {
        v.rpm = 0.0;
        v.pitch = 0.0;
        v.depth_rate = if v.depth > 0.0 { -params.buoyant_ascent } else { 0.0 };
    }
    let u = heading_unit(v.heading);
    let sog = v.sog();
    v.x += (sog * u[0] + current[0]) * dt;
    v.y += (sog * u[1] + current[1]) * dt;
    v.depth = (v.depth + v.depth_rate * dt).max(0.0);
    v
}

/// Vehicle sensor error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Constant compass bias (deg).
    pub heading_bias: f64,
    /// Stationary standard deviation of the correlated compass error (deg).
    pub heading_sigma: f64,
    /// Correlation time of the compass error (s).
    pub heading_tau: f64,
    /// Fractional error of the RPM speed map.
    pub speed_scale_error: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            heading_bias: 0.0,
            heading_sigma: 3.0,
            heading_tau: 60.0,
            speed_scale_error: 0.0,
        }
    }
}

impl SensorModel {
    pub fn perfect() -> Self {
        Self {
            heading_bias: 0.0,
            heading_sigma: 0.0,
            heading_tau: 60.0,
            speed_scale_error: 0.0,
        }
    }

    /// Speed the vehicle believes it makes good.
    pub fn measured_sog(&self, truth: &VehicleTruth) -> f64 {
        truth.sog() * (1.0 + self.speed_scale_error)
    }
}

/// Compass with constant bias plus first-order Gauss-Markov noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingSensor {
    model: SensorModel,
    state: f64,
}

impl HeadingSensor {
    /// Starts with the correlated error drawn from its stationary distribution.
    pub fn new<R: Rng + ?Sized>(model: SensorModel, rng: &mut R) -> Self {
        let state = model.heading_sigma * rng.sample::<f64, _>(StandardNormal);
        Self { model, state }
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    /// Advance the correlated error by `dt` seconds.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        if self.model.heading_sigma <= 0.0 {
            self.state = 0.0;
            return;
        }
        let a = (-dt / self.model.heading_tau).exp();
        let q = self.model.heading_sigma * (1.0 - a * a).sqrt();
        self.state = a * self.state + q * rng.sample::<f64, _>(StandardNormal);
    }

    /// Current total compass error (deg).
    pub fn error(&self) -> f64 {
        self.model.heading_bias + self.state
    }

    pub fn measure(&self, true_heading: f64) -> f64 {
        wrap_360(true_heading + self.error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::Cruise;
    use crate::world::stream_rng;

    #[test]
    fn rpm_map() {
        assert!((sog_from_rpm(800.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((sog_from_rpm(800.0, 60.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn idle_vehicle_holds_position_and_floats_up() {
        let v0 = VehicleTruth::new(3.0, 4.0, 2.5, 90.0);
        let mut v = v0;
        for _ in 0..100 {
            v = step_vehicle(&v, &Setpoints::idle(0.0), &VehicleParams::default(), [0.0, 0.0], 0.1);
        }
        assert_eq!((v.x, v.y, v.heading), (v0.x, v0.y, v0.heading));
        assert!((v.depth - (2.5 - 0.2)).abs() < 1e-9);
    }

    #[test]
    fn converges_to_setpoints() {
        let mut v = VehicleTruth::new(0.0, 0.0, 0.0, 0.0);
        let sp = Setpoints::drive(90.0, Cruise::default());
        let p = VehicleParams::default();
        for _ in 0..600 {
            v = step_vehicle(&v, &sp, &p, [0.0, 0.0], 0.1);
        }
        assert!(wrap_180(v.heading - 90.0).abs() < 1e-6);
        assert!((v.depth - 2.5).abs() < 1e-3);
        assert!(v.pitch.abs() < 0.1);
        assert!((v.sog() - 1.0).abs() < 1e-4);
        // turning 90 degrees at most 12 deg/s takes at least 7.5 s
        let mut w = VehicleTruth::new(0.0, 0.0, 2.5, 0.0);
        for _ in 0..70 {
            w = step_vehicle(&w, &sp, &p, [0.0, 0.0], 0.1);
        }
        assert!(w.heading < 90.0 - 1e-6);
    }

    #[test]
    fn diving_pitches_nose_down_and_slows() {
        let v = VehicleTruth::new(0.0, 0.0, 0.0, 0.0);
        let v = step_vehicle(&v, &Setpoints::drive(0.0, Cruise::default()), &VehicleParams::default(), [0.0, 0.0], 0.1);
        assert!(v.pitch > 0.0);
        assert!(v.sog() < 1.0);
        assert!(v.attitude().pitch > 0.0);
    }

    #[test]
    fn gauss_markov_statistics() {
        let model = SensorModel {
            heading_bias: 2.0,
            ..SensorModel::default()
        };
        let mut rng = stream_rng(11, 0);
        let mut s = HeadingSensor::new(model, &mut rng);
        let mut sum = 0.0;
        let mut sq = 0.0;
        let n = 200_000;
        for _ in 0..n {
            s.step(1.0, &mut rng);
            sum += s.error();
            sq += (s.error() - 2.0).powi(2);
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 0.3, "mean {mean}");
        assert!((sd - 3.0).abs() < 0.3, "sd {sd}");
    }
}
