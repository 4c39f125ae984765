use std::collections::BTreeMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::log::{TickLog, VehicleRow};
use crate::error::{Error, Result};
use crate::filter::principal_sigmas;

/// Ground reference for position errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Truth,
    Lbl,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth" => Ok(Self::Truth),
            "lbl" => Ok(Self::Lbl),
            other => Err(Error::Config(format!("unknown reference '{other}' (expected truth or lbl)"))),
        }
    }
}

/// Summary of 2-D position errors (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: [f64; 2],
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// 68th percentile of radial error.
    pub p68: f64,
    /// 95th percentile of radial error.
    pub p95: f64,
}

impl ErrorStats {
    pub fn from_errors(errors: &[[f64; 2]]) -> Result<Self> {
        let n = errors.len();
        if n < 2 {
            return Err(Error::InsufficientData(n));
        }
        let nf = n as f64;
        let mean = errors.iter().fold([0.0, 0.0], |m, e| [m[0] + e[0] / nf, m[1] + e[1] / nf]);
        let mut c = Matrix2::zeros();
        for e in errors {
            let d = [e[0] - mean[0], e[1] - mean[1]];
            c += Matrix2::new(d[0] * d[0], d[0] * d[1], d[0] * d[1], d[1] * d[1]);
        }
        c /= nf - 1.0;
        let (sigma_major, sigma_minor) = principal_sigmas(&c);
        let mut radial: Vec<f64> = errors.iter().map(|e| e[0].hypot(e[1])).collect();
        radial.sort_by(f64::total_cmp);
        Ok(Self {
            n,
            mean,
            sigma_major,
            sigma_minor,
            sigma_x: c[(0, 0)].sqrt(),
            sigma_y: c[(1, 1)].sqrt(),
            p68: percentile(&radial, 68.0),
            p95: percentile(&radial, 95.0),
        })
    }
}

/// Linear-interpolated percentile of sorted data; NaN when empty.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = (pct / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Per-vehicle and fleet error statistics over converged estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleStats {
    pub reference: Reference,
    pub vehicles: BTreeMap<String, ErrorStats>,
    pub combined: ErrorStats,
}

/// Error of the converged estimate against the chosen reference, if both exist.
pub fn row_error(row: &VehicleRow, reference: Reference) -> Option<[f64; 2]> {
    let est = row.estimate.filter(|e| e.converged)?;
    let r = match reference {
        Reference::Truth => [row.truth.x, row.truth.y],
        Reference::Lbl => row.lbl?,
    };
    Some([est.abs[0] - r[0], est.abs[1] - r[1]])
}

pub fn compute_error_stats(log: &TickLog, reference: Reference) -> Result<VehicleStats> {
    let mut per: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for row in log.records.iter().flat_map(|r| &r.vehicles) {
        if let Some(e) = row_error(row, reference) {
            per.entry(row.name.clone()).or_default().push(e);
        }
    }
    let all: Vec<[f64; 2]> = per.values().flatten().copied().collect();
    let combined = ErrorStats::from_errors(&all)?;
    let vehicles = per
        .into_iter()
        .filter(|(_, e)| e.len() >= 2)
        .map(|(k, e)| ErrorStats::from_errors(&e).map(|s| (k, s)))
        .collect::<Result<_>>()?;
    Ok(VehicleStats {
        reference,
        vehicles,
        combined,
    })
}
