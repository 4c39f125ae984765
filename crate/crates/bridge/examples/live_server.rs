//! Serve a live mission on `ws://127.0.0.1:8765/sim` at 10x real time.
//!
//! Connect with any WebSocket client and send, for example,
//! `{"type":"command","command":{"type":"set_mode","mode":2}}`.

use owtt::mission::{MissionConfig, Simulation};
use owtt_bridge::{run_live, serve, Bridge, LiveOptions};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "mission6".into());
    let cfg = MissionConfig::load(&name)?;
    let seed = cfg.seed;
    let sim = Simulation::new(cfg, seed)?;
    let (bridge, handle) = Bridge::new(&sim);
    let (addr, server) = serve("127.0.0.1:8765".parse()?, bridge).await?;
    println!("serving ws://{addr}/sim");
    let options = LiveOptions {
        time_scale: 10.0,
        start_paused: false,
    };
    let log = run_live(sim, handle, options, Vec::new()).await?;
    server.abort();
    println!("mission finished, {} log bytes", log.len());
    Ok(())
}
