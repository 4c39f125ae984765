use std::path::PathBuf;

use jsonschema::JSONSchema;
use owtt::mission::{Command, MissionConfig, Simulation};
use owtt_bridge::{ClientMessage, ServerMessage, PROTOCOL_VERSION};
use serde_json::Value;

fn schema(name: &str) -> JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).expect("schema is JSON");
    JSONSchema::compile(&value).expect("schema compiles")
}

fn assert_valid(schema: &JSONSchema, frame: &impl serde::Serialize) {
    let value = serde_json::to_value(frame).unwrap();
    if let Err(errors) = schema.validate(&value) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("{value}\n{}", msgs.join("\n"));
    };
}

#[test]
fn every_command_matches_client_schema() {
    let schema = schema("client-message.schema.json");
    let commands = [
        Command::SetBeaconTarget {
            x: 10.0,
            y: -20.0,
            speed: 0.5,
        },
        Command::SetMode { mode: 3 },
        Command::RelocateBeacon { x: 17.05, y: 1.78 },
        Command::Pause,
        Command::Resume,
        Command::SetTimeScale { scale: 10.0 },
    ];
    for command in commands {
        assert_valid(&schema, &ClientMessage::Command { command });
    }
    let unknown = serde_json::json!({ "type": "command", "command": { "type": "warp", "x": 1 } });
    assert!(!schema.is_valid(&unknown));
}

#[test]
fn server_frames_match_server_schema() {
    let schema = schema("server-message.schema.json");
    let mut cfg = MissionConfig::preset("mission6").unwrap().unwrap();
    cfg.duration_s = 6;
    for v in &mut cfg.vehicles {
        v.deploy_time_s = 0.0;
    }
    let mut sim = Simulation::new(cfg, 2).unwrap();
    let header = sim.header();
    assert_valid(
        &schema,
        &ServerMessage::Hello {
            schema_version: PROTOCOL_VERSION,
            mission: header.mission.clone(),
            seed: header.seed,
            vehicles: header.vehicles.clone(),
        },
    );
    while !sim.is_finished() {
        sim.step().unwrap();
        assert_valid(
            &schema,
            &ServerMessage::Snapshot {
                schema_version: PROTOCOL_VERSION,
                snapshot: sim.snapshot(),
            },
        );
    }
    assert_valid(
        &schema,
        &ServerMessage::Error {
            message: "unknown command".into(),
        },
    );
}
