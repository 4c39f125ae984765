//! Ground-truth simulator: environment, beacon, vehicles, clocks, acoustic channel, LBL and dead reckoning.

mod beacon;
mod channel;
mod clock;
mod dr;
mod lbl;
mod vehicle;

pub use beacon::{BeaconState, MAX_BEACON_SPEED};
pub use channel::{image_paths, synthesize_reception, AzimuthBiasModel, PathArrival, Reception, Receiver};
pub use clock::{truncated_normal, ClockModel};
pub use dr::{dead_reckon, DeadReckoner};
pub use lbl::{lbl_fix, LblFix, LblSetup};
pub use vehicle::{
    sog_from_rpm, step_vehicle, HeadingSensor, SensorModel, VehicleParams, VehicleTruth, RPM_TO_SPEED,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dynamics tick rate (Hz).
pub const DYNAMICS_RATE: u32 = 10;

/// A vertical reflecting wall parallel to the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub y: f64,
    pub reflection: f64,
}

/// Acoustic and hydrographic environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvModel {
    pub sound_speed: f64,
    pub water_depth: f64,
    pub surface_reflection: f64,
    pub bottom_reflection: f64,
    pub wall: Option<Wall>,
    /// Standard deviation of white ambient noise per sample.
    pub ambient_noise: f64,
    /// Source amplitude at 1 m.
    pub source_level: f64,
    /// Water current (east, north) in m/s.
    pub current: [f64; 2],
    /// Diffuse reverberation energy relative to the direct path.
    pub reverb_level: f64,
    /// Number of discrete scatterers forming the reverberation tail.
    pub reverb_paths: usize,
    /// Mean excess delay of the reverberation tail (s).
    pub reverb_decay: f64,
}

impl Default for EnvModel {
    fn default() -> Self {
        Self {
            sound_speed: 1481.0,
            water_depth: 5.3,
            surface_reflection: -0.9,
            bottom_reflection: 0.0,
            wall: None,
            ambient_noise: 0.005,
            source_level: 1.0,
            current: [0.05, 0.0],
            reverb_level: 0.3,
            reverb_paths: 16,
            reverb_decay: 4e-3,
        }
    }
}

impl EnvModel {
    /// No noise, no reflections, no current.
    pub fn quiet() -> Self {
        Self {
            surface_reflection: 0.0,
            ambient_noise: 0.0,
            reverb_level: 0.0,
            current: [0.0, 0.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed > 0.0) {
            return Err(Error::Config(format!("sound_speed must be positive, got {}", self.sound_speed)));
        }
        if !(self.water_depth > 0.0) {
            return Err(Error::Config("water_depth must be positive".into()));
        }
        let coeffs = [
            Some(self.surface_reflection),
            Some(self.bottom_reflection),
            self.wall.map(|w| w.reflection),
        ];
        if coeffs.iter().flatten().any(|c| c.abs() > 1.0) {
            return Err(Error::Config("reflection coefficients must lie in [-1, 1]".into()));
        }
        if self.reverb_level < 0.0 || self.reverb_decay <= 0.0 {
            return Err(Error::Config("reverb_level must be >= 0 and reverb_decay > 0".into()));
        }
        if self.ambient_noise < 0.0 || self.source_level <= 0.0 {
            return Err(Error::Config("ambient_noise must be >= 0 and source_level > 0".into()));
        }
        Ok(())
    }
}

/// Complete ground truth at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub beacon: BeaconState,
    pub vehicles: Vec<VehicleTruth>,
}

/// Independent deterministic random stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn env_validation() {
        assert!(EnvModel::default().validate().is_ok());
        let bad = EnvModel {
            surface_reflection: -1.2,
            ..EnvModel::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnvModel {
            sound_speed: 0.0,
            ..EnvModel::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn streams_are_independent_and_repeatable() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 1), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 1), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 2), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
