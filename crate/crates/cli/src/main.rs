use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flate2::write::GzEncoder;
use owtt::mission::{
    calibrate, compute_error_stats, replay_validation, ErrorStats, MissionConfig, Reference, Simulation, TickLog,
    VehicleStats,
};
use owtt_bridge::{run_live, serve, Bridge, LiveOptions};

#[derive(Parser)]
#[command(name = "owtt", version, about = "Single-beacon OWTT-iUSBL fleet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a mission (config file or preset name) and write its tick log.
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Serve live telemetry and control on this address.
        #[arg(long)]
        bridge: Option<SocketAddr>,
        /// Simulated seconds per wall-clock second when bridged.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        /// Wait for a resume command before the first tick when bridged.
        #[arg(long)]
        paused: bool,
    },
    /// Navigation error statistics of a tick log.
    Stats {
        log: PathBuf,
        #[arg(long = "ref", default_value = "truth")]
        reference: Reference,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Write CSV series and a JSON summary for a tick log.
    Replay {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulated rotational calibration; writes the azimuth bias table as CSV.
    Calibrate {
        config: String,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        error: e.into(),
    }
}

fn classify(e: owtt::Error) -> Failure {
    if e.is_config_error() {
        config_error(e)
    } else {
        runtime(e)
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            config,
            seed,
            out,
            bridge,
            time_scale,
            paused,
        } => run(&config, seed, &out, bridge, time_scale, paused),
        Cmd::Stats { log, reference, json } => stats(&log, reference, json),
        Cmd::Replay { log, out } => replay(&log, &out),
        Cmd::Calibrate { config, out } => calibrate_cmd(&config, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &str) -> Result<MissionConfig, Failure> {
    MissionConfig::load(path).map_err(config_error)
}

fn load_log(path: &Path) -> Result<TickLog, Failure> {
    TickLog::load(path).map_err(runtime)
}

fn run(
    config: &str,
    seed: Option<u64>,
    out: &Path,
    bridge: Option<SocketAddr>,
    time_scale: f64,
    paused: bool,
) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if !(time_scale > 0.0 && time_scale.is_finite()) {
        return Err(config_error(anyhow::anyhow!("--time-scale must be positive")));
    }
    let seed = cfg.seed;
    let gzip = cfg.gzip_log;
    let sim = Simulation::new(cfg, seed).map_err(classify)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    let ext = if gzip { "jsonl.gz" } else { "jsonl" };
    let path = out.join(format!("{}-{seed}.{ext}", sim.config().name));
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)?;
    let sink = if gzip {
        Sink::Gzip(GzEncoder::new(BufWriter::new(file), flate2::Compression::default()))
    } else {
        Sink::Plain(BufWriter::new(file))
    };

    let sink = match bridge {
        None => sim_headless(sim, sink)?,
        Some(addr) => {
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(async {
                let (bridge, handle) = Bridge::new(&sim);
                let (local, server) = serve(addr, bridge).await.map_err(runtime)?;
                eprintln!("bridge listening on ws://{local}/sim");
                let options = LiveOptions {
                    time_scale,
                    start_paused: paused,
                };
                let sink = run_live(sim, handle, options, sink).await.map_err(runtime)?;
                server.abort();
                Ok::<_, Failure>(sink)
            })?
        }
    };
    finish(sink, &path)?;
    eprintln!("log written to {}", path.display());
    let log = load_log(&path)?;
    if let Ok(s) = compute_error_stats(&log, Reference::Truth) {
        print_stats(&s);
    }
    Ok(())
}

/// Log destination, optionally gzip-compressed.
enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            Sink::Plain(w) => w.write(buf),
            Sink::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            Sink::Plain(w) => w.flush(),
            Sink::Gzip(w) => w.flush(),
        }
    }
}

fn sim_headless(mut sim: Simulation, sink: Sink) -> Result<Sink, Failure> {
    sim.run_to_writer(sink).map_err(classify)
}

fn finish(sink: Sink, path: &Path) -> Result<(), Failure> {
    let done = match sink {
        Sink::Plain(mut w) => w.flush(),
        Sink::Gzip(w) => w.finish().and_then(|mut w| w.flush()),
    };
    done.with_context(|| format!("writing {}", path.display())).map_err(runtime)
}

fn stats(log: &Path, reference: Reference, json: bool) -> Result<(), Failure> {
    let log = load_log(log)?;
    let s = compute_error_stats(&log, reference).map_err(runtime)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(runtime)?);
    } else {
        print_stats(&s);
    }
    Ok(())
}

fn print_stats(s: &VehicleStats) {
    println!(
        "{:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "vehicle", "n", "mean_x", "mean_y", "sig_maj", "sig_min", "sig_x", "sig_y", "p68", "p95"
    );
    let row = |name: &str, e: &ErrorStats| {
        println!(
            "{:<10} {:>6} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            name, e.n, e.mean[0], e.mean[1], e.sigma_major, e.sigma_minor, e.sigma_x, e.sigma_y, e.p68, e.p95
        );
    };
    for (name, e) in &s.vehicles {
        row(name, e);
    }
    row("combined", &s.combined);
}

fn replay(log: &Path, out: &Path) -> Result<(), Failure> {
    let log = load_log(log)?;
    let report = replay_validation(&log, Some(out)).map_err(runtime)?;
    if let Some(t) = &report.truth {
        print_stats(t);
    }
    eprintln!("report written to {}", out.display());
    Ok(())
}

fn calibrate_cmd(config: &str, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let report = calibrate(&cfg).map_err(classify)?;
    eprintln!(
        "range p68 {:.3} m, bearing p68 {:.2} deg, body azimuth p68 {:.2} deg ({} samples, {} rejected)",
        report.range_p68,
        report.azimuth_p68,
        report.body_azimuth_p68,
        report.samples.len(),
        report.rejected
    );
    match out {
        Some(path) => report.table.save(path).map_err(runtime),
        None => report.table.to_writer(std::io::stdout().lock()).map_err(runtime),
    }
}
