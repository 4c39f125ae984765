use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::MissionConfig;
use super::pipeline::ReceiverDsp;
use super::stats::percentile;
use crate::doa::{correct_azimuth, ArrayGeometry, AzimuthBiasTable};
use crate::error::{Error, Result};
use crate::geometry::{bff_to_vcf, direction_vector, wrap_180, wrap_360, EulerAttitude};
use crate::ranging::RangeStatus;
use crate::waveforms::{ModeId, TemplateBank};
use crate::world::{stream_rng, synthesize_reception, BeaconState, EnvModel, HeadingSensor, Receiver, VehicleTruth};

/// One reception on the rotation rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub vehicle: usize,
    pub range_m: f64,
    pub heading_deg: f64,
    pub range_error: f64,
    pub raw_phi: f64,
    pub true_phi: f64,
    /// Body-frame azimuth error after bias correction (deg).
    pub body_error: f64,
    /// World-frame bearing error using the compass heading (deg).
    pub bearing_error: f64,
}

/// Summary of a simulated rotational calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub table: AzimuthBiasTable,
    pub samples: Vec<CalibrationSample>,
    /// 68th percentile of absolute range-MLE error (m).
    pub range_p68: f64,
    /// 68th percentile of absolute world-bearing error (deg).
    pub azimuth_p68: f64,
    /// 68th percentile of absolute bias-corrected body azimuth error (deg).
    pub body_azimuth_p68: f64,
    /// Receptions that failed detection or consistency.
    pub rejected: usize,
}

struct RawSample {
    vehicle: usize,
    range_m: f64,
    heading_deg: f64,
    range_error: f64,
    raw_phi: f64,
    true_phi: f64,
    theta: f64,
    compass: f64,
    true_bearing: f64,
}

fn rotate(config: &MissionConfig, dsp: &ReceiverDsp, rx: &Receiver, env: &EnvModel, pass: u64) -> Result<(Vec<RawSample>, usize)> {
    let cal = &config.calibration;
    let mode = ModeId::new(cal.mode)?;
    let beacon = BeaconState {
        depth: config.beacon.depth,
        jitter_sigma: config.beacon.jitter_sigma_s,
        ..BeaconState::new(0.0, 0.0, mode)
    };
    let steps = (360.0 / cal.step_deg).round() as usize;
    let jobs: Vec<(usize, f64)> = (0..config.vehicles.len())
        .flat_map(|v| cal.ranges_m.iter().map(move |&r| (v, r)))
        .collect();
    let results = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(v, range))| -> Result<(Vec<RawSample>, usize)> {
            let mut rng = stream_rng(config.seed ^ (pass << 32), j as u64);
            let mut compass = HeadingSensor::new(config.vehicles[v].sensors, &mut rng);
            let vehicle_depth = cal.depth_m - rx.array_offset;
            let dz = cal.depth_m - beacon.depth;
            let horizontal = (range * range - dz * dz).max(0.0).sqrt();
            let mut out = Vec::with_capacity(steps);
            let mut rejected = 0;
            for k in 0..steps {
                let heading = k as f64 * cal.step_deg;
                let truth = VehicleTruth::new(horizontal, 0.0, vehicle_depth, heading);
                compass.step(1.0, &mut rng);
                let rec = synthesize_reception(k as f64, &beacon, &truth, env, rx, &dsp.bank, &mut rng)?;
                let m = dsp.ranging.measure(&rec.recording, mode)?;
                let Some(dist) = m.distribution.filter(|_| m.status == RangeStatus::Valid) else {
                    rejected += 1;
                    continue;
                };
                let d = dsp.beamform(&rec.recording, mode, m.peak_bin)?.mle();
                let to_beacon = [beacon.x - horizontal, beacon.y];
                out.push(RawSample {
                    vehicle: v,
                    range_m: range,
                    heading_deg: heading,
                    range_error: dist.mle() - rec.true_range,
                    raw_phi: d.phi,
                    true_phi: rec.true_direction.phi,
                    theta: d.theta,
                    compass: compass.measure(heading),
                    true_bearing: to_beacon[1].atan2(to_beacon[0]).to_degrees(),
                });
            }
            Ok((out, rejected))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().fold((Vec::new(), 0), |(mut all, n), (s, r)| {
        all.extend(s);
        (all, n + r)
    }))
}

/// Median of `raw - true` azimuth per raw-azimuth bin.
pub fn estimate_bias_table(pairs: &[(f64, f64)], bin_deg: f64) -> Result<AzimuthBiasTable> {
    let n_bins = (360.0 / bin_deg).round() as usize;
    let mut bins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(raw, truth) in pairs {
        let b = (wrap_360(raw + bin_deg / 2.0) / bin_deg).floor() as usize % n_bins;
        bins.entry(b).or_default().push(wrap_180(raw - truth));
    }
    AzimuthBiasTable::new(bins.into_iter().map(|(b, mut e)| {
        e.sort_by(f64::total_cmp);
        (b as f64 * bin_deg, percentile(&e, 50.0))
    }))
}

/// Rotate each vehicle's receiver through a full turn at each rig range: the first pass
/// fits the bias table, the second measures range and bearing accuracy with it applied.
pub fn calibrate(config: &MissionConfig) -> Result<CalibrationReport> {
    config.validate()?;
    let cal = &config.calibration;
    if cal.step_deg <= 0.0 || cal.bin_deg <= 0.0 || cal.ranges_m.is_empty() {
        return Err(Error::Config("calibration needs positive steps and at least one range".into()));
    }
    let env = EnvModel {
        ambient_noise: cal.ambient_noise.unwrap_or(config.environment.ambient_noise),
        ..config.environment.clone()
    };
    let rx = Receiver {
        array: ArrayGeometry::pyramid(config.receiver.array_edge_m),
        clock: config.receiver.clock,
        azimuth_bias: config.receiver.azimuth_bias,
        array_offset: config.receiver.array_offset_m,
        ..Receiver::default()
    };
    let mut dsp = ReceiverDsp::new(
        TemplateBank::default(),
        rx.n_samples,
        rx.array.clone(),
        AzimuthBiasTable::zero(),
        config.filter.angle_kappa,
        env.sound_speed,
    )?;

    let (first, _) = rotate(config, &dsp, &rx, &env, 1)?;
    let pairs: Vec<(f64, f64)> = first.iter().map(|s| (s.raw_phi, s.true_phi)).collect();
    let table = estimate_bias_table(&pairs, cal.bin_deg)?;
    dsp.bias_table = table.clone();

    let (second, rejected) = rotate(config, &dsp, &rx, &env, 2)?;
    let samples: Vec<CalibrationSample> = second
        .iter()
        .map(|s| {
            let phi = correct_azimuth(s.raw_phi, &table);
            let att = EulerAttitude::from_compass(0.0, 0.0, s.compass);
            let world = bff_to_vcf(&att, &direction_vector(s.theta, phi));
            let bearing = world.y.atan2(world.x).to_degrees();
            CalibrationSample {
                vehicle: s.vehicle,
                range_m: s.range_m,
                heading_deg: s.heading_deg,
                range_error: s.range_error,
                raw_phi: s.raw_phi,
                true_phi: s.true_phi,
                body_error: wrap_180(phi - s.true_phi),
                bearing_error: wrap_180(bearing - s.true_bearing),
            }
        })
        .collect();
    let p68 = |f: &dyn Fn(&CalibrationSample) -> f64| {
        let mut v: Vec<f64> = samples.iter().map(|s| f(s).abs()).collect();
        v.sort_by(f64::total_cmp);
        percentile(&v, 68.0)
    };
    Ok(CalibrationReport {
        range_p68: p68(&|s| s.range_error),
        azimuth_p68: p68(&|s| s.bearing_error),
        body_azimuth_p68: p68(&|s| s.body_error),
        table,
        samples,
        rejected,
    })
}
