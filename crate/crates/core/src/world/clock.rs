use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Receiver sample clock disciplined by a low-drift PPS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockModel {
    /// Offset at t = 0 (s).
    pub offset: f64,
    /// Drift rate (s/s).
    pub drift: f64,
    /// Trigger jitter standard deviation (s).
    pub trigger_jitter: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        Self {
            offset: 0.0,
            drift: 1e-9,
            trigger_jitter: 80e-12,
        }
    }
}

impl ClockModel {
    pub fn perfect() -> Self {
        Self {
            offset: 0.0,
            drift: 0.0,
            trigger_jitter: 0.0,
        }
    }

    /// Deterministic clock error at true time `t` (s).
    pub fn error_at(&self, t: f64) -> f64 {
        self.offset + self.drift * t
    }

    /// True time at which the receiver's capture for nominal second `t` starts.
    pub fn trigger_time<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        let jitter = if self.trigger_jitter > 0.0 {
            self.trigger_jitter * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        t + self.error_at(t) + jitter
    }
}

/// Zero-mean Gaussian draw with standard deviation `sigma`, redrawn until inside `[-limit, limit]`.
pub fn truncated_normal<R: Rng + ?Sized>(sigma: f64, limit: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    loop {
        let x = sigma * rng.sample::<f64, _>(StandardNormal);
        if x.abs() <= limit {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::stream_rng;

    #[test]
    fn drift_accumulates_linearly() {
        let c = ClockModel {
            offset: 1e-6,
            drift: 1e-9,
            trigger_jitter: 0.0,
        };
        let day = 86_400.0;
        assert!((c.error_at(day) - c.error_at(0.0) - 86.4e-6).abs() < 1e-15);
        assert!((c.error_at(2.0 * day) - c.error_at(day) - 86.4e-6).abs() < 1e-15);
        // default holdover stays under 100 microseconds per day
        assert!(ClockModel::default().error_at(day).abs() < 100e-6);
    }

    #[test]
    fn truncation_bounds_jitter() {
        let mut rng = stream_rng(3, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| truncated_normal(0.45e-3, 1e-3, &mut rng)).collect();
        assert!(xs.iter().all(|x| x.abs() <= 1e-3));
        let sd = (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
        // truncated-normal variance at a = 1/0.45: sigma * 0.920
        assert!((sd - 0.414e-3).abs() < 0.015e-3, "sd {sd}");
    }
}
