//! Synthesize receptions at a known range, identify the broadcast mode and estimate range.
//!
//! `cargo run --example ranging -- 120` sets the horizontal range in metres.

use owtt::ranging::{ModeDecision, RangeProcessor};
use owtt::waveforms::{ModeId, TemplateBank};
use owtt::world::{stream_rng, synthesize_reception, BeaconState, EnvModel, Receiver, VehicleTruth};

fn main() -> owtt::Result<()> {
    let horizontal: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(74.0);
    let bank = TemplateBank::default();
    let rx = Receiver::default();
    let env = EnvModel::default();
    let ranging = RangeProcessor::new(&bank, rx.n_samples, env.sound_speed);
    let beacon = BeaconState::new(0.0, 0.0, ModeId::new(3)?);
    let vehicle = VehicleTruth::new(horizontal, 0.0, 2.3, 270.0);
    let mut rng = stream_rng(1, 0);
    let mut decision = ModeDecision::new();
    for t in 0..4 {
        let rec = synthesize_reception(f64::from(t), &beacon, &vehicle, &env, &rx, &bank, &mut rng)?;
        let winner = ranging.identify(&rec.recording, &mut decision)?;
        let Some(mode) = winner else {
            println!("t={t}: no detection");
            continue;
        };
        let m = ranging.measure(&rec.recording, mode)?;
        let mle = m.distribution.as_ref().map(|d| d.mle());
        println!(
            "t={t}: detected mode {mode}, confirmed {:?}, status {:?}, range {} (true {:.2} m)",
            decision.confirmed().map(ModeId::get),
            m.status,
            mle.map_or("-".into(), |r| format!("{r:.2} m")),
            rec.true_range
        );
    }
    Ok(())
}
