//! Track a stationary beacon from one vehicle with the range/angle particle filter.

use std::sync::Arc;

use owtt::filter::{AttitudeBuffer, FilterConfig, ParticleFilter};
use owtt::mission::{builtin_bias_table, AcousticPipeline, ReceiverDsp};
use owtt::waveforms::{ModeId, TemplateBank};
use owtt::world::{stream_rng, synthesize_reception, BeaconState, EnvModel, Receiver, VehicleTruth};

fn main() -> owtt::Result<()> {
    let bank = TemplateBank::default();
    let rx = Receiver::default();
    let env = EnvModel::default();
    let dsp = ReceiverDsp::new(bank.clone(), rx.n_samples, rx.array.clone(), builtin_bias_table()?, 16.0, env.sound_speed)?;
    let mut pipeline = AcousticPipeline::new(Arc::new(dsp));
    let beacon = BeaconState::new(60.0, -35.0, ModeId::new(1)?);
    let vehicle = VehicleTruth::new(0.0, 0.0, 2.3, 75.0);
    let mut attitudes = AttitudeBuffer::new(5.0);
    let mut world_rng = stream_rng(7, 0);
    let mut filter_rng = stream_rng(7, 1);
    let mut filter = ParticleFilter::new(FilterConfig::default(), &mut filter_rng)?;
    println!("true relative beacon ({:.1}, {:.1})", beacon.x - vehicle.x, beacon.y - vehicle.y);
    for t in 0..15 {
        let t = f64::from(t);
        attitudes.push(t, vehicle.attitude());
        attitudes.push(t + 0.5, vehicle.attitude());
        let rec = synthesize_reception(t, &beacon, &vehicle, &env, &rx, &bank, &mut world_rng)?;
        let m = pipeline.process(&rec.recording, &attitudes)?;
        filter.predict(0.0, vehicle.heading, 0.0, 1.0, &mut filter_rng);
        if let (Some(range), Some(pairs), Some(att)) = (m.range.as_ref(), m.pairs.as_ref(), m.attitude) {
            filter.update(range, pipeline.angle_likelihood(pairs), &att, &mut filter_rng);
        }
        let e = filter.estimate(vehicle.depth);
        println!(
            "t={t:>4}: status {:?}, estimate ({:6.1}, {:6.1}), sigma {:5.1}/{:5.1} m, converged {}",
            m.status, e.mean[0], e.mean[1], e.sigma_major, e.sigma_minor, e.converged
        );
    }
    Ok(())
}
