//! Whole-mission runs through the public simulation API.

use owtt::mission::{compute_error_stats, run_mission, MissionConfig, Reference, TickLog, LOG_FORMAT};
use owtt::world::{ClockModel, EnvModel, SensorModel};

fn preset(name: &str) -> MissionConfig {
    MissionConfig::preset(name).unwrap().unwrap()
}

#[test]
fn zero_duration_mission_logs_only_the_header() {
    let mut cfg = preset("mission6");
    cfg.duration_s = 0;
    let log = run_mission(cfg, 1).unwrap();
    assert!(log.records.is_empty());
    let bytes = log.to_bytes().unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains(LOG_FORMAT));
    assert_eq!(TickLog::read_from(bytes.as_slice()).unwrap(), log);
}

#[test]
fn mission1_shows_three_mode_phases() {
    let cfg = preset("mission1");
    let seed = cfg.seed;
    let log = run_mission(cfg, seed).unwrap();
    for v in 0..log.header.vehicles.len() {
        let mut phases: Vec<u8> = Vec::new();
        for m in log.records.iter().filter_map(|r| r.vehicles[v].mode) {
            if phases.last() != Some(&m) {
                phases.push(m);
            }
        }
        assert_eq!(phases, vec![1, 2, 3], "{}", log.header.vehicles[v]);
    }
}

#[test]
fn perfect_sensors_track_within_a_metre() {
    let mut cfg = preset("mission6");
    cfg.duration_s = 600;
    cfg.environment = EnvModel::quiet();
    cfg.beacon.jitter_sigma_s = 0.0;
    cfg.receiver.azimuth_bias.amplitude_deg = 0.0;
    cfg.receiver.clock = ClockModel::perfect();
    cfg.receiver.uncorrected = true;
    for v in &mut cfg.vehicles {
        v.sensors = SensorModel::perfect();
    }
    let log = run_mission(cfg, 3).unwrap();
    let stats = compute_error_stats(&log, Reference::Truth).unwrap();
    assert!(stats.combined.n > 300);
    assert!(stats.combined.p68 < 1.0, "p68 {}", stats.combined.p68);
}
