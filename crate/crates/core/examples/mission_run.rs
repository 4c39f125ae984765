//! Run a mission preset headless and summarize navigation accuracy.
//!
//! `cargo run --release --example mission_run -- mission1 600` runs the first 600 s of Mission 1.

use owtt::mission::{compute_error_stats, replay_validation, run_mission, MissionConfig, Reference};

fn main() -> owtt::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "mission6".into());
    let mut cfg = MissionConfig::load(&name)?;
    if let Some(d) = args.next().and_then(|a| a.parse().ok()) {
        cfg.duration_s = d;
    }
    let seed = cfg.seed;
    let log = run_mission(cfg, seed)?;
    println!("{}: {} s simulated, seed {seed}", log.header.mission, log.records.len());
    for reference in [Reference::Truth, Reference::Lbl] {
        match compute_error_stats(&log, reference) {
            Ok(s) => println!(
                "vs {reference:?}: n {}, p68 {:.2} m, p95 {:.2} m, sigma {:.2}/{:.2} m",
                s.combined.n, s.combined.p68, s.combined.p95, s.combined.sigma_major, s.combined.sigma_minor
            ),
            Err(e) => println!("vs {reference:?}: {e}"),
        }
    }
    let report = replay_validation(&log, None)?;
    for (vehicle, dr) in &report.dead_reckoning {
        println!(
            "{vehicle}: dead reckoning {:.1} m after {:.0} m ({:.1}%)",
            dr.terminal_error,
            dr.distance,
            dr.ratio * 100.0
        );
    }
    if let Some(f) = report.trackline_footprint {
        println!("trackline footprint {:.0} x {:.0} m", f.length, f.width);
    }
    Ok(())
}
