use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::log::TickLog;
use super::stats::{compute_error_stats, percentile, row_error, Reference, VehicleStats};
use crate::error::{Error, Result};

/// Percent of points trimmed from each end of a footprint axis.
pub const FOOTPRINT_TRIM: f64 = 2.5;

/// Principal-axis extents of the central 95% of a point set (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
    /// Compass bearing of the long axis (deg, 0..180).
    pub axis_deg: f64,
    pub n: usize,
}

impl Footprint {
    pub fn of(points: &[[f64; 2]]) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let c = points.iter().fold([0.0, 0.0], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
        let cov = points.iter().fold(Matrix2::zeros(), |acc, p| {
            let d = [p[0] - c[0], p[1] - c[1]];
            acc + Matrix2::new(d[0] * d[0], d[0] * d[1], d[0] * d[1], d[1] * d[1])
        });
        let eig = cov.symmetric_eigen();
        let major = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let u = eig.eigenvectors.column(major);
        let (ux, uy) = (u[0], u[1]);
        let extent = |f: &dyn Fn(&[f64; 2]) -> f64| {
            let mut v: Vec<f64> = points.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            percentile(&v, 100.0 - FOOTPRINT_TRIM) - percentile(&v, FOOTPRINT_TRIM)
        };
        let length = extent(&|p| p[0] * ux + p[1] * uy);
        let width = extent(&|p| -p[0] * uy + p[1] * ux);
        Some(Self {
            length,
            width,
            axis_deg: crate::geometry::heading_of(ux, uy).rem_euclid(180.0),
            n: points.len(),
        })
    }
}

/// Dead-reckoning drift at the end of a vehicle's log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrSummary {
    pub distance: f64,
    pub terminal_error: f64,
    /// Terminal error as a fraction of distance traveled.
    pub ratio: f64,
}

/// Offline validation summary of a mission log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub mission: String,
    pub seed: u64,
    pub truth: Option<VehicleStats>,
    pub lbl: Option<VehicleStats>,
    pub dead_reckoning: BTreeMap<String, DrSummary>,
    /// Truth-position footprint of the fleet while on its tracklines.
    pub trackline_footprint: Option<Footprint>,
}

/// Build the validation report and, when `out` is given, write CSV series and `summary.json` there.
pub fn replay_validation(log: &TickLog, out: Option<&Path>) -> Result<ReplayReport> {
    if log.records.is_empty() {
        return Err(Error::MissingBeaconTrack);
    }
    let mut dr = BTreeMap::new();
    let mut track_pts = Vec::new();
    for row in log.records.iter().flat_map(|r| &r.vehicles) {
        if row.deployed {
            let e = (row.dr[0] - row.truth.x).hypot(row.dr[1] - row.truth.y);
            let ratio = if row.dr_distance > 0.0 { e / row.dr_distance } else { 0.0 };
            dr.insert(
                row.name.clone(),
                DrSummary {
                    distance: row.dr_distance,
                    terminal_error: e,
                    ratio,
                },
            );
        }
        if row.on_line {
            track_pts.push([row.truth.x, row.truth.y]);
        }
    }
    let report = ReplayReport {
        mission: log.header.mission.clone(),
        seed: log.header.seed,
        truth: compute_error_stats(log, Reference::Truth).ok(),
        lbl: compute_error_stats(log, Reference::Lbl).ok(),
        dead_reckoning: dr,
        trackline_footprint: Footprint::of(&track_pts),
    };
    if let Some(dir) = out {
        write_report(log, &report, dir)?;
    }
    Ok(report)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Log(format!("{other:?}")),
    }
}

fn write_report(log: &TickLog, report: &ReplayReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("trajectories.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record([
        "t", "vehicle", "beacon_x", "beacon_y", "truth_x", "truth_y", "est_x", "est_y", "converged", "dr_x", "dr_y",
        "lbl_x", "lbl_y", "mode", "behavior",
    ])
    .map_err(|e| csv_err(&path, e))?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.3}"));
    for rec in &log.records {
        for row in &rec.vehicles {
            // absolute track: beacon position offset by the relative estimate
            let abs = row.estimate.map(|e| [rec.beacon.x - e.rel[0], rec.beacon.y - e.rel[1]]);
            w.write_record([
                format!("{:.1}", rec.t),
                row.name.clone(),
                format!("{:.3}", rec.beacon.x),
                format!("{:.3}", rec.beacon.y),
                format!("{:.3}", row.truth.x),
                format!("{:.3}", row.truth.y),
                opt(abs.map(|a| a[0])),
                opt(abs.map(|a| a[1])),
                row.estimate.is_some_and(|e| e.converged).to_string(),
                format!("{:.3}", row.dr[0]),
                format!("{:.3}", row.dr[1]),
                opt(row.lbl.map(|l| l[0])),
                opt(row.lbl.map(|l| l[1])),
                row.mode.map_or_else(String::new, |m| m.to_string()),
                row.behavior.clone(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for (reference, name) in [(Reference::Truth, "cdf_truth.csv"), (Reference::Lbl, "cdf_lbl.csv")] {
        let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in log.records.iter().flat_map(|r| &r.vehicles) {
            if let Some(e) = row_error(row, reference) {
                let r = e[0].hypot(e[1]);
                per.entry(row.name.clone()).or_default().push(r);
                per.entry("combined".into()).or_default().push(r);
            }
        }
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["vehicle", "error_m", "fraction"]).map_err(|e| csv_err(&path, e))?;
        for (vehicle, mut errs) in per {
            errs.sort_by(f64::total_cmp);
            let n = errs.len() as f64;
            for (i, e) in errs.iter().enumerate() {
                w.write_record([vehicle.clone(), format!("{e:.4}"), format!("{:.5}", (i + 1) as f64 / n)])
                    .map_err(|e| csv_err(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let path = dir.join("dr_divergence.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["t", "vehicle", "distance_m", "dr_error_m"]).map_err(|e| csv_err(&path, e))?;
    for rec in &log.records {
        for row in rec.vehicles.iter().filter(|r| r.deployed) {
            let e = (row.dr[0] - row.truth.x).hypot(row.dr[1] - row.truth.y);
            w.write_record([
                format!("{:.1}", rec.t),
                row.name.clone(),
                format!("{:.3}", row.dr_distance),
                format!("{e:.3}"),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}
