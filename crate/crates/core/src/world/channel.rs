use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::beacon::BeaconState;
use super::clock::ClockModel;
use super::vehicle::VehicleTruth;
use super::EnvModel;
use crate::doa::{plane_wave_delays, ArrayGeometry, Direction};
use crate::error::Result;
use crate::geometry::{cartesian_to_spherical, vcf_to_bff, wrap_360};
use crate::ranging::{ElementRecording, DEFAULT_CAPTURE_LEN};
use crate::waveforms::TemplateBank;

/// Smooth azimuth-dependent receiver bias, strongest fore and aft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AzimuthBiasModel {
    pub amplitude_deg: f64,
}

impl Default for AzimuthBiasModel {
    fn default() -> Self {
        Self { amplitude_deg: 5.0 }
    }
}

impl AzimuthBiasModel {
    pub fn none() -> Self {
        Self { amplitude_deg: 0.0 }
    }

    /// Bias (deg) at true body azimuth `phi` (deg).
    pub fn bias(&self, phi: f64) -> f64 {
        let r = phi.to_radians();
        self.amplitude_deg * (2.0 * r).cos() * r.cos().powi(2)
    }

    /// Azimuth the array appears to see for a source at true azimuth `phi`.
    pub fn apparent(&self, phi: f64) -> f64 {
        wrap_360(phi + self.bias(phi))
    }
}

/// Per-vehicle receiver hardware.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub array: ArrayGeometry,
    pub clock: ClockModel,
    pub azimuth_bias: AzimuthBiasModel,
    /// Capture length per element (samples).
    pub n_samples: usize,
    /// Array depth below the vehicle reference depth (m).
    pub array_offset: f64,
}

impl Default for Receiver {
    fn default() -> Self {
        Self {
            array: ArrayGeometry::default(),
            clock: ClockModel::default(),
            azimuth_bias: AzimuthBiasModel::default(),
            n_samples: DEFAULT_CAPTURE_LEN,
            array_offset: 0.2,
        }
    }
}

impl Receiver {
    /// Noise-free timing and geometry, no bias.
    pub fn ideal() -> Self {
        Self {
            clock: ClockModel::perfect(),
            azimuth_bias: AzimuthBiasModel::none(),
            ..Self::default()
        }
    }

    /// Array centre in the LLF (z up).
    pub fn array_position(&self, vehicle: &VehicleTruth) -> Vector3<f64> {
        Vector3::new(vehicle.x, vehicle.y, -(vehicle.depth + self.array_offset))
    }
}

/// One propagation path from the beacon (or one of its images) to the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathArrival {
    pub length: f64,
    pub amplitude: f64,
    /// True body-frame direction toward the (image) source.
    pub direction: Direction,
}

/// Beacon images (position, reflection product) for the direct path, surface, bottom and wall.
pub fn image_paths(source: Vector3<f64>, env: &EnvModel) -> Vec<(Vector3<f64>, f64)> {
    let mut out = vec![(source, 1.0)];
    let surface = Vector3::new(source.x, source.y, -source.z);
    if env.surface_reflection != 0.0 {
        out.push((surface, env.surface_reflection));
    }
    if env.bottom_reflection != 0.0 {
        out.push((
            Vector3::new(source.x, source.y, -2.0 * env.water_depth - source.z),
            env.bottom_reflection,
        ));
    }
    if let Some(w) = env.wall.filter(|w| w.reflection != 0.0) {
        let my = 2.0 * w.y - source.y;
        out.push((Vector3::new(source.x, my, source.z), w.reflection));
        if env.surface_reflection != 0.0 {
            out.push((Vector3::new(source.x, my, -source.z), w.reflection * env.surface_reflection));
        }
    }
    out
}

/// A synthesized capture with the ground truth it was made from.
#[derive(Debug, Clone)]
pub struct Reception {
    pub recording: ElementRecording,
    /// Direct-path slant range (m).
    pub true_range: f64,
    /// Direct-path body-frame direction toward the beacon.
    pub true_direction: Direction,
    pub emission_time: f64,
    pub trigger_time: f64,
    pub paths: Vec<PathArrival>,
}

impl Reception {
    /// Fractional sample index at which the direct path reaches the array centre.
    pub fn direct_arrival_sample(&self, sound_speed: f64) -> f64 {
        (self.emission_time + self.true_range / sound_speed - self.trigger_time) * self.recording.sample_rate()
    }
}

/// Synthesize the array capture for the broadcast nominally at second `t`.
///
/// An inactive beacon or an arrival outside the capture window yields a noise-only recording.
pub fn synthesize_reception<R: Rng + ?Sized>(
    t: f64,
    beacon: &BeaconState,
    vehicle: &VehicleTruth,
    env: &EnvModel,
    rx: &Receiver,
    bank: &TemplateBank,
    rng: &mut R,
) -> Result<Reception> {
    let fs = bank.sample_rate();
    let n = rx.n_samples;
    let emission_time = beacon.emission_time(t, rng);
    let trigger_time = rx.clock.trigger_time(t, rng);
    let array = rx.array_position(vehicle);
    let source = Vector3::new(beacon.x, beacon.y, -beacon.depth);
    let attitude = vehicle.attitude();
    let to_body = |v: Vector3<f64>| -> Result<(f64, Direction)> {
        let s = cartesian_to_spherical(&vcf_to_bff(&attitude, &v))?;
        Ok((s.r, Direction::new(s.theta, s.phi)))
    };
    let (true_range, true_direction) = to_body(source - array)?;

    let mut channels = vec![vec![0.0; n]; rx.array.len()];
    let mut paths = Vec::new();
    if let Some(w) = bank.get(beacon.mode).filter(|_| beacon.is_active()) {
        let add = |channels: &mut [Vec<f64>], arrival: f64, amplitude: f64, direction: Direction| {
            let phi = rx.azimuth_bias.apparent(direction.phi);
            let delays = plane_wave_delays(&rx.array, direction.theta, phi, env.sound_speed);
            for (ch, tau) in channels.iter_mut().zip(&delays) {
                let t0 = arrival + tau;
                let first = (t0 * fs).ceil().max(0.0) as usize;
                let last = ((t0 + w.support()) * fs).floor().min(n as f64 - 1.0);
                if last < 0.0 {
                    continue;
                }
                for (k, s) in ch.iter_mut().enumerate().take(last as usize + 1).skip(first) {
                    *s += amplitude * w.evaluate(k as f64 / fs - t0);
                }
            }
        };
        let direct_arrival = emission_time + true_range / env.sound_speed - trigger_time;
        for (image, coef) in image_paths(source, env) {
            let (length, direction) = to_body(image - array)?;
            let amplitude = env.source_level * coef / length.max(1.0);
            add(&mut channels, emission_time + length / env.sound_speed - trigger_time, amplitude, direction);
            paths.push(PathArrival {
                length,
                amplitude,
                direction,
            });
        }
        if env.reverb_level > 0.0 && env.reverb_paths > 0 {
            let scale = env.source_level / true_range.max(1.0) * (env.reverb_level / env.reverb_paths as f64).sqrt();
            for _ in 0..env.reverb_paths {
                let delay = -env.reverb_decay * (1.0 - rng.random::<f64>()).ln();
                let theta = (1.0 - 2.0 * rng.random::<f64>()).acos().to_degrees();
                let phi = 360.0 * rng.random::<f64>();
                let amplitude = scale * rng.sample::<f64, _>(StandardNormal);
                add(&mut channels, direct_arrival + delay, amplitude, Direction::new(theta, phi));
            }
        }
    }
    if env.ambient_noise > 0.0 {
        for s in channels.iter_mut().flatten() {
            *s += env.ambient_noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(Reception {
        recording: ElementRecording::new(channels, fs, t)?,
        true_range,
        true_direction,
        emission_time,
        trigger_time,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranging::{ModeDecision, RangeProcessor, DEFAULT_SOUND_SPEED};
    use crate::waveforms::ModeId;
    use crate::world::stream_rng;

    fn quiet_beacon() -> BeaconState {
        BeaconState {
            jitter_sigma: 0.0,
            ..BeaconState::new(0.0, 0.0, ModeId::new(1).unwrap())
        }
    }

    /// Vehicle placed so the array centre sits at horizontal distance `d` east of the beacon, same depth.
    fn vehicle_at(d: f64) -> VehicleTruth {
        VehicleTruth::new(d, 0.0, 1.0 - Receiver::ideal().array_offset, 0.0)
    }

    #[test]
    fn bias_shape() {
        let b = AzimuthBiasModel::default();
        assert!((b.bias(0.0) - 5.0).abs() < 1e-12);
        assert!((b.bias(180.0) - 5.0).abs() < 1e-12);
        assert!(b.bias(90.0).abs() < 1e-12);
        assert!((0..360).all(|p| b.bias(p as f64).abs() <= 5.0 + 1e-12));
    }

    #[test]
    fn image_geometry() {
        let env = EnvModel {
            bottom_reflection: 0.3,
            wall: Some(super::super::Wall { y: 15.0, reflection: 0.5 }),
            ..EnvModel::default()
        };
        let imgs = image_paths(Vector3::new(1.0, 2.0, -1.0), &env);
        assert_eq!(imgs.len(), 5);
        assert_eq!(imgs[1].0, Vector3::new(1.0, 2.0, 1.0));
        assert_eq!(imgs[2].0, Vector3::new(1.0, 2.0, -2.0 * 5.3 + 1.0));
        assert_eq!(imgs[3].0, Vector3::new(1.0, 28.0, -1.0));
        assert!((imgs[4].1 - 0.5 * -0.9).abs() < 1e-12);
    }

    #[test]
    fn noiseless_range_bin() {
        let bank = TemplateBank::default();
        let rx = Receiver::ideal();
        let env = EnvModel::quiet();
        let rec = synthesize_reception(0.0, &quiet_beacon(), &vehicle_at(74.05), &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
        assert!((rec.true_range - 74.05).abs() < 1e-9);
        let proc = RangeProcessor::new(&bank, rx.n_samples, DEFAULT_SOUND_SPEED);
        let m = proc.measure(&rec.recording, ModeId::new(1).unwrap()).unwrap();
        assert!(m.is_valid());
        // 74.05 / 1481 * 37500 = 1875.0
        assert!((m.peak_bin as i64 - 1875).abs() <= 1, "bin {}", m.peak_bin);
    }

    #[test]
    fn clock_offset_shifts_peak() {
        let bank = TemplateBank::default();
        let env = EnvModel::quiet();
        let proc = RangeProcessor::new(&bank, DEFAULT_CAPTURE_LEN, DEFAULT_SOUND_SPEED);
        let mode = ModeId::new(1).unwrap();
        let peak = |offset: f64| {
            let rx = Receiver {
                clock: ClockModel {
                    offset,
                    ..ClockModel::perfect()
                },
                ..Receiver::ideal()
            };
            let rec = synthesize_reception(0.0, &quiet_beacon(), &vehicle_at(74.05), &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
            proc.measure(&rec.recording, mode).unwrap().peak_bin as i64
        };
        // 50 us * 37500 = 1.875 samples: the receiver starts late, so the peak moves earlier
        let shift = peak(0.0) - peak(50e-6);
        assert!((shift - 2).abs() <= 1, "shift {shift}");
    }

    #[test]
    fn surface_mirror_gives_two_peaks() {
        let bank = TemplateBank::default();
        let rx = Receiver::ideal();
        let env = EnvModel {
            surface_reflection: -0.9,
            ..EnvModel::quiet()
        };
        // shallow range and deep array so the paths are resolvable
        let v = VehicleTruth::new(10.0, 0.0, 4.8, 0.0);
        let rec = synthesize_reception(0.0, &quiet_beacon(), &v, &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(rec.paths.len(), 2);
        let proc = RangeProcessor::new(&bank, rx.n_samples, DEFAULT_SOUND_SPEED);
        let m = proc.measure(&rec.recording, ModeId::new(1).unwrap()).unwrap();
        let dist = m.distribution.as_ref().unwrap();
        let w = dist.weights();
        for p in &rec.paths {
            let bin = dist.nearest_bin(p.length);
            let local = w[bin.saturating_sub(2)..=bin + 2].iter().cloned().fold(0.0, f64::max);
            let floor = crate::dsp::median(w);
            assert!(local > 20.0 * floor, "no peak at path length {}", p.length);
        }
    }

    #[test]
    fn spreading_halves_amplitude() {
        let bank = TemplateBank::default();
        let rx = Receiver::ideal();
        let env = EnvModel::quiet();
        let peak_amp = |d: f64| {
            let rec = synthesize_reception(0.0, &quiet_beacon(), &vehicle_at(d), &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
            rec.recording.channel(0).iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let ratio = peak_amp(50.0) / peak_amp(100.0);
        assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn inactive_or_far_beacon_is_noise_only() {
        let bank = TemplateBank::default();
        let rx = Receiver::ideal();
        let env = EnvModel::quiet();
        let off = BeaconState {
            mode: ModeId::OFF,
            ..quiet_beacon()
        };
        let rec = synthesize_reception(0.0, &off, &vehicle_at(50.0), &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
        assert!(rec.recording.channels().iter().flatten().all(|x| *x == 0.0));
        let rec = synthesize_reception(0.0, &quiet_beacon(), &vehicle_at(400.0), &env, &rx, &bank, &mut stream_rng(1, 0)).unwrap();
        assert!(rec.recording.channels().iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn mode_identified_from_synthesis() {
        let bank = TemplateBank::default();
        let rx = Receiver::default();
        let env = EnvModel::default();
        let proc = RangeProcessor::new(&bank, rx.n_samples, env.sound_speed);
        let mut rng = stream_rng(9, 0);
        let b = BeaconState::new(0.0, 0.0, ModeId::new(3).unwrap());
        let mut dec = ModeDecision::new();
        for t in 0..3 {
            let rec = synthesize_reception(t as f64, &b, &VehicleTruth::new(60.0, -80.0, 2.5, 30.0), &env, &rx, &bank, &mut rng).unwrap();
            proc.identify(&rec.recording, &mut dec).unwrap();
        }
        assert_eq!(dec.confirmed(), Some(ModeId::new(3).unwrap()));
    }

    #[test]
    fn deterministic_for_seed() {
        let bank = TemplateBank::default();
        let rx = Receiver::default();
        let env = EnvModel::default();
        let v = VehicleTruth::new(60.0, -80.0, 2.5, 30.0);
        let b = BeaconState::new(0.0, 0.0, ModeId::new(2).unwrap());
        let a = synthesize_reception(5.0, &b, &v, &env, &rx, &bank, &mut stream_rng(4, 1)).unwrap();
        let c = synthesize_reception(5.0, &b, &v, &env, &rx, &bank, &mut stream_rng(4, 1)).unwrap();
        assert_eq!(a.recording.channels(), c.recording.channels());
    }
}
