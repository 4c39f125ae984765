use serde::{Deserialize, Serialize};

use crate::geometry::heading_unit;

/// Unaided integration of speed and compass heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadReckoner {
    pub position: [f64; 2],
    /// Integrated path length (m).
    pub distance: f64,
}

impl DeadReckoner {
    pub fn new(start: [f64; 2]) -> Self {
        Self {
            position: start,
            distance: 0.0,
        }
    }

    pub fn step(&mut self, sog: f64, heading_deg: f64, dt: f64) {
        let u = heading_unit(heading_deg);
        self.position[0] += sog * u[0] * dt;
        self.position[1] += sog * u[1] * dt;
        self.distance += sog.abs() * dt;
    }
}

/// Positions after each `(sog, heading, dt)` step, starting from `start`.
pub fn dead_reckon(history: &[(f64, f64, f64)], start: [f64; 2]) -> Vec<[f64; 2]> {
    history
        .iter()
        .scan(DeadReckoner::new(start), |dr, &(sog, h, dt)| {
            dr.step(sog, h, dt);
            Some(dr.position)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_speed_is_stationary() {
        let traj = dead_reckon(&[(0.0, 45.0, 1.0); 10], [2.0, 3.0]);
        assert!(traj.iter().all(|p| *p == [2.0, 3.0]));
    }

    #[test]
    fn heading_bias_cross_track() {
        let truth = dead_reckon(&[(1.0, 0.0, 1.0); 600], [0.0, 0.0]);
        let dr = dead_reckon(&[(1.0, 3.0, 1.0); 600], [0.0, 0.0]);
        let (t, d) = (truth[599], dr[599]);
        let cross = d[0] - t[0];
        assert!((cross - 600.0 * 3f64.to_radians().sin()).abs() < 1e-9);
        assert!((cross - 31.4).abs() < 0.05);
    }
}
