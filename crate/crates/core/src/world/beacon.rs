use rand::Rng;
use serde::{Deserialize, Serialize};

use super::clock::truncated_normal;
use crate::waveforms::ModeId;

/// Beacon boat speed cap (m/s).
pub const MAX_BEACON_SPEED: f64 = 1.5;

/// Surface beacon: GPS position, transducer depth, broadcast mode and waypoint steering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconState {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub mode: ModeId,
    pub target: Option<[f64; 2]>,
    pub speed: f64,
    /// Transmit jitter standard deviation (s); draws are truncated at 1 ms.
    pub jitter_sigma: f64,
}

impl BeaconState {
    pub fn new(x: f64, y: f64, mode: ModeId) -> Self {
        Self {
            x,
            y,
            depth: 1.0,
            mode,
            target: None,
            speed: 0.0,
            jitter_sigma: 0.45e-3,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_active(&self) -> bool {
        !self.mode.is_off()
    }

    /// Head for `target` at `speed`, saturated at the speed cap.
    pub fn set_target(&mut self, target: [f64; 2], speed: f64) {
        self.target = Some(target);
        self.speed = speed.clamp(0.0, MAX_BEACON_SPEED);
    }

    /// Move instantly, cancelling any waypoint.
    pub fn relocate(&mut self, position: [f64; 2]) {
        self.x = position[0];
        self.y = position[1];
        self.target = None;
    }

    pub fn step(&mut self, dt: f64) {
        let Some(t) = self.target else { return };
        let (dx, dy) = (t[0] - self.x, t[1] - self.y);
        let dist = dx.hypot(dy);
        let reach = self.speed * dt;
        if dist <= reach {
            self.x = t[0];
            self.y = t[1];
            self.target = None;
        } else {
            self.x += dx / dist * reach;
            self.y += dy / dist * reach;
        }
    }

    /// True emission time of the broadcast nominally at second `t`.
    pub fn emission_time<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        t + truncated_normal(self.jitter_sigma, 1e-3, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_saturates_at_cap() {
        let mut b = BeaconState::new(0.0, 0.0, ModeId::new(1).unwrap());
        b.set_target([100.0, 0.0], 10.0);
        assert_eq!(b.speed, MAX_BEACON_SPEED);
        for _ in 0..10 {
            b.step(0.1);
        }
        assert!((b.x - 1.5).abs() < 1e-12);
        for _ in 0..1000 {
            b.step(0.1);
        }
        assert_eq!(b.position(), [100.0, 0.0]);
        assert!(b.target.is_none());
    }

    #[test]
    fn off_mode_is_inactive() {
        let b = BeaconState::new(0.0, 0.0, ModeId::OFF);
        assert!(!b.is_active());
    }
}
