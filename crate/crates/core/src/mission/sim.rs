use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Command, MissionConfig, ScriptEvent};
use super::log::{
    AcousticCause, BeaconRow, EstimateRow, LogHeader, LogWriter, TickLog, TickRecord, TruthRow, VehicleRow, LOG_FORMAT,
    LOG_VERSION,
};
use super::pipeline::{AcousticPipeline, ReceiverDsp};
use crate::behaviors::{Autonomy, Setpoints, VehicleNav};
use crate::doa::ArrayGeometry;
use crate::error::Result;
use crate::filter::{AttitudeBuffer, ParticleFilter, StateEstimate};
use crate::geometry::{heading_of, EulerAttitude};
use crate::ranging::RangeStatus;
use crate::waveforms::{ModeId, TemplateBank};
use crate::world::{
    lbl_fix, stream_rng, synthesize_reception, BeaconState, DeadReckoner, HeadingSensor, Receiver, VehicleTruth,
    WorldState, DYNAMICS_RATE,
};

/// Breadcrumb points kept per vehicle for snapshots.
pub const TRAIL_LEN: usize = 600;
/// Depth (m) at or above which a vehicle counts as surfaced.
pub const SURFACE_DEPTH: f64 = 0.05;

const STREAM_WORLD: u64 = 0;
const STREAM_FILTER: u64 = 1;
const STREAM_LBL: u64 = 2;
const STREAM_SENSOR: u64 = 3;

/// Everything one vehicle owns: its sensors, receiver, filter, autonomy and random streams.
#[derive(Debug, Clone)]
struct Agent {
    name: String,
    deploy_time: f64,
    params: crate::world::VehicleParams,
    hardware: Receiver,
    compass: HeadingSensor,
    pipeline: AcousticPipeline,
    filter: ParticleFilter,
    autonomy: Autonomy,
    dr: DeadReckoner,
    attitudes: AttitudeBuffer,
    setpoints: Setpoints,
    deployed: bool,
    surfaced: bool,
    displacement: [f64; 2],
    depth_at_update: f64,
    estimate: Option<StateEstimate>,
    rng_world: ChaCha8Rng,
    rng_filter: ChaCha8Rng,
    rng_lbl: ChaCha8Rng,
    rng_sensor: ChaCha8Rng,
    trail_truth: VecDeque<[f64; 2]>,
    trail_estimate: VecDeque<[f64; 2]>,
}

impl Agent {
    fn measured_attitude(&self, truth: &VehicleTruth) -> EulerAttitude {
        EulerAttitude::from_compass(0.0, truth.pitch, self.compass.measure(truth.heading))
    }
}

/// Fleet-wide view for live clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub beacon: BeaconRow,
    pub vehicles: Vec<VehicleSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub name: String,
    pub truth: TruthRow,
    pub estimate: Option<EstimateRow>,
    pub converged: bool,
    pub behavior: String,
    pub mode: Option<u8>,
    pub trail_truth: Vec<[f64; 2]>,
    pub trail_estimate: Vec<[f64; 2]>,
}

/// Deterministic mission loop: 1 Hz acoustics, 10 Hz dynamics.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: MissionConfig,
    seed: u64,
    world: WorldState,
    agents: Vec<Agent>,
    script: VecDeque<ScriptEvent>,
    pending: VecDeque<Command>,
    last_row: Option<TickRecord>,
}

impl Simulation {
    pub fn new(config: MissionConfig, seed: u64) -> Result<Self> {
        Self::with_base(config, seed, None)
    }

    /// `base` resolves relative paths inside the config.
    pub fn with_base(config: MissionConfig, seed: u64, base: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let table = config.receiver.load_bias_table(base)?;
        let bank = TemplateBank::default();
        let hardware = Receiver {
            array: ArrayGeometry::pyramid(config.receiver.array_edge_m),
            clock: config.receiver.clock,
            azimuth_bias: config.receiver.azimuth_bias,
            array_offset: config.receiver.array_offset_m,
            ..Receiver::default()
        };
        let dsp = Arc::new(ReceiverDsp::new(
            bank,
            hardware.n_samples,
            hardware.array.clone(),
            table,
            config.filter.angle_kappa,
            config.environment.sound_speed,
        )?);
        let beacon_mode = ModeId::new(config.beacon.mode)?;
        let beacon = BeaconState {
            depth: config.beacon.depth,
            jitter_sigma: config.beacon.jitter_sigma_s,
            ..BeaconState::new(config.beacon.x, config.beacon.y, beacon_mode)
        };
        let mut vehicles = Vec::new();
        let mut agents = Vec::new();
        for (i, vc) in config.vehicles.iter().enumerate() {
            let base_stream = 16 * (i as u64 + 1);
            let mut rng_sensor = stream_rng(seed, base_stream + STREAM_SENSOR);
            let mut rng_filter = stream_rng(seed, base_stream + STREAM_FILTER);
            let truth = VehicleTruth::new(vc.start[0], vc.start[1], 0.0, vc.start_heading_deg);
            let compass = HeadingSensor::new(vc.sensors, &mut rng_sensor);
            let initial = Setpoints::drive(vc.deploy_heading_deg, config.cruise);
            agents.push(Agent {
                name: vc.name.clone(),
                deploy_time: vc.deploy_time_s,
                params: vc.dynamics,
                hardware: hardware.clone(),
                compass,
                pipeline: AcousticPipeline::new(dsp.clone()),
                filter: ParticleFilter::new(config.filter.clone(), &mut rng_filter)?,
                autonomy: Autonomy::new(vc.modes.clone(), config.cruise, initial),
                dr: DeadReckoner::new(vc.start),
                attitudes: AttitudeBuffer::new(1.0),
                setpoints: Setpoints::idle(vc.start_heading_deg),
                deployed: false,
                surfaced: true,
                displacement: [0.0, 0.0],
                depth_at_update: 0.0,
                estimate: None,
                rng_world: stream_rng(seed, base_stream + STREAM_WORLD),
                rng_filter,
                rng_lbl: stream_rng(seed, base_stream + STREAM_LBL),
                rng_sensor,
                trail_truth: VecDeque::new(),
                trail_estimate: VecDeque::new(),
            });
            vehicles.push(truth);
        }
        let mut script: Vec<ScriptEvent> = config.beacon.script.clone();
        script.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        Ok(Self {
            config,
            seed,
            world: WorldState {
                time: 0.0,
                beacon,
                vehicles,
            },
            agents,
            script: script.into(),
            pending: VecDeque::new(),
            last_row: None,
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.world.time
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn is_finished(&self) -> bool {
        self.world.time >= f64::from(self.config.duration_s)
    }

    pub fn header(&self) -> LogHeader {
        LogHeader {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            mission: self.config.name.clone(),
            seed: self.seed,
            vehicles: self.agents.iter().map(|a| a.name.clone()).collect(),
        }
    }

    /// Queue a command for the next tick boundary.
    pub fn enqueue(&mut self, cmd: Command) -> Result<()> {
        cmd.validate()?;
        self.pending.push_back(cmd);
        Ok(())
    }

    fn apply(&mut self, cmd: &Command) {
        let b = &mut self.world.beacon;
        match *cmd {
            Command::SetBeaconTarget { x, y, speed } => b.set_target([x, y], speed),
            Command::SetMode { mode } => {
                if let Ok(m) = ModeId::new(mode) {
                    b.mode = m;
                }
            }
            Command::RelocateBeacon { x, y } => b.relocate([x, y]),
            Command::Pause | Command::Resume | Command::SetTimeScale { .. } => {}
        }
    }

    /// Run one simulated second: commands, acoustic cycle, log row, then dynamics to the next second.
    pub fn step(&mut self) -> Result<TickRecord> {
        let t = self.world.time;
        while self.script.front().is_some_and(|e| e.t_s <= t) {
            let ev = self.script.pop_front().expect("front exists");
            self.apply(&ev.command);
        }
        while let Some(cmd) = self.pending.pop_front() {
            self.apply(&cmd);
        }

        let beacon = self.world.beacon.clone();
        let env = &self.config.environment;
        let lbl = &self.config.lbl;
        let max_range = self.config.filter.max_range;
        let rows: Vec<VehicleRow> = self
            .agents
            .par_iter_mut()
            .zip(self.world.vehicles.par_iter())
            .map(|(agent, truth)| acoustic_second(t, agent, truth, &beacon, env, lbl, max_range))
            .collect::<Result<_>>()?;
        let record = TickRecord {
            t,
            beacon: BeaconRow {
                x: beacon.x,
                y: beacon.y,
                mode: beacon.mode.get(),
            },
            vehicles: rows,
        };

        let dt = 1.0 / f64::from(DYNAMICS_RATE);
        let current = env.current;
        for k in 1..=DYNAMICS_RATE {
            self.world.beacon.step(dt);
            let tk = t + f64::from(k) * dt;
            for (agent, truth) in self.agents.iter_mut().zip(self.world.vehicles.iter_mut()) {
                if !agent.deployed {
                    continue;
                }
                *truth = crate::world::step_vehicle(truth, &agent.setpoints, &agent.params, current, dt);
                agent.compass.step(dt, &mut agent.rng_sensor);
                let heading = agent.compass.measure(truth.heading);
                let sog = agent.compass.model().measured_sog(truth);
                agent.dr.step(sog, heading, dt);
                let u = crate::geometry::heading_unit(heading);
                agent.displacement[0] += sog * u[0] * dt;
                agent.displacement[1] += sog * u[1] * dt;
                let att = agent.measured_attitude(truth);
                agent.attitudes.push(tk, att);
            }
        }
        for (agent, truth) in self.agents.iter_mut().zip(&self.world.vehicles) {
            let at_surface = truth.depth <= SURFACE_DEPTH;
            if agent.deployed && at_surface && !agent.surfaced {
                agent.filter.reinitialize(&mut agent.rng_filter);
            }
            agent.surfaced = at_surface;
            push_trail(&mut agent.trail_truth, truth.position());
            if let Some(e) = record.vehicles.iter().find(|r| r.name == agent.name).and_then(|r| r.estimate) {
                push_trail(&mut agent.trail_estimate, e.abs);
            }
        }
        self.world.time = t + 1.0;
        self.last_row = Some(record.clone());
        Ok(record)
    }

    pub fn snapshot(&self) -> Snapshot {
        let beacon = &self.world.beacon;
        Snapshot {
            t: self.world.time,
            beacon: BeaconRow {
                x: beacon.x,
                y: beacon.y,
                mode: beacon.mode.get(),
            },
            vehicles: self
                .agents
                .iter()
                .zip(&self.world.vehicles)
                .map(|(a, v)| {
                    let row = self
                        .last_row
                        .as_ref()
                        .and_then(|r| r.vehicles.iter().find(|r| r.name == a.name));
                    let estimate = row.and_then(|r| r.estimate);
                    VehicleSnapshot {
                        name: a.name.clone(),
                        truth: truth_row(v),
                        estimate,
                        converged: estimate.is_some_and(|e| e.converged),
                        behavior: a.autonomy.active_behavior().into(),
                        mode: a.pipeline.decision().confirmed().map(|m| m.get()),
                        trail_truth: a.trail_truth.iter().copied().collect(),
                        trail_estimate: a.trail_estimate.iter().copied().collect(),
                    }
                })
                .collect(),
        }
    }

    /// Run to the configured duration, streaming rows to `writer`.
    pub fn run_to_writer<W: std::io::Write>(&mut self, writer: W) -> Result<W> {
        let mut w = LogWriter::new(writer, &self.header())?;
        while !self.is_finished() {
            let rec = self.step()?;
            w.write(&rec)?;
        }
        w.finish()
    }
}

fn push_trail(trail: &mut VecDeque<[f64; 2]>, p: [f64; 2]) {
    if trail.len() == TRAIL_LEN {
        trail.pop_front();
    }
    trail.push_back(p);
}

fn truth_row(v: &VehicleTruth) -> TruthRow {
    TruthRow {
        x: v.x,
        y: v.y,
        depth: v.depth,
        heading: v.heading,
        pitch: v.pitch,
    }
}

fn acoustic_second(
    t: f64,
    agent: &mut Agent,
    truth: &VehicleTruth,
    beacon: &BeaconState,
    env: &crate::world::EnvModel,
    lbl: &crate::world::LblSetup,
    max_range: f64,
) -> Result<VehicleRow> {
    if !agent.deployed && t >= agent.deploy_time {
        agent.deployed = true;
        agent.attitudes.clear();
        agent.attitudes.push(t, agent.measured_attitude(truth));
        agent.depth_at_update = truth.depth;
    }
    let mut row = VehicleRow {
        name: agent.name.clone(),
        deployed: agent.deployed,
        truth: truth_row(truth),
        estimate: None,
        detected: None,
        mode: None,
        cause: AcousticCause::NotDeployed,
        range_mle: None,
        behavior: "idle".into(),
        on_line: false,
        setpoints: agent.setpoints,
        dr: agent.dr.position,
        dr_distance: agent.dr.distance,
        lbl: None,
    };
    if !agent.deployed {
        return Ok(row);
    }

    let reception = synthesize_reception(t, beacon, truth, env, &agent.hardware, &agent.pipeline.dsp().bank, &mut agent.rng_world)?;
    let meas = agent.pipeline.process(&reception.recording, &agent.attitudes)?;

    let d = agent.displacement;
    let moved = d[0].hypot(d[1]);
    let heading = if moved > 0.0 { heading_of(d[0], d[1]) } else { agent.compass.measure(truth.heading) };
    let dz = -(truth.depth - agent.depth_at_update);
    agent.filter.predict(moved, heading, dz, 1.0, &mut agent.rng_filter);
    agent.displacement = [0.0, 0.0];
    agent.depth_at_update = truth.depth;
    if let (Some(range), Some(pairs), Some(att)) = (&meas.range, &meas.pairs, &meas.attitude) {
        let lik = agent.pipeline.angle_likelihood(pairs);
        agent.filter.update(range, lik, att, &mut agent.rng_filter);
    }
    let est = agent.filter.estimate(truth.depth);
    agent.estimate = Some(est);

    let nav = VehicleNav {
        heading_deg: agent.compass.measure(truth.heading),
        depth: truth.depth,
    };
    let rel = [est.mean[0], est.mean[1]];
    agent.setpoints = agent.autonomy.step(t, meas.confirmed, Some((rel, est.converged)), &nav)?;

    let (r1, r2) = lbl.noisy_ranges(truth.position(), &mut agent.rng_lbl);
    row.lbl = lbl_fix(r1, r2, lbl).ok().map(|f| f.position);
    row.cause = if meas.is_valid() {
        AcousticCause::Valid
    } else if !beacon.is_active() {
        AcousticCause::BeaconOff
    } else if reception.true_range > max_range {
        AcousticCause::OutOfRange
    } else if meas.status == RangeStatus::Inconsistent {
        AcousticCause::Inconsistent
    } else {
        AcousticCause::NoDetection
    };
    row.detected = meas.winner.map(|m| m.get());
    row.mode = meas.confirmed.map(|m| m.get());
    row.range_mle = meas.range_mle();
    row.estimate = Some(EstimateRow {
        rel,
        abs: [beacon.x - rel[0], beacon.y - rel[1]],
        cov: est.cov,
        sigma_major: est.sigma_major,
        sigma_minor: est.sigma_minor,
        converged: est.converged,
    });
    row.behavior = agent.autonomy.active_behavior().into();
    row.on_line = agent.autonomy.on_line();
    row.setpoints = agent.setpoints;
    Ok(row)
}

/// Run a mission to completion and keep the log in memory.
pub fn run_mission(config: MissionConfig, seed: u64) -> Result<TickLog> {
    let mut sim = Simulation::new(config, seed)?;
    let mut log = TickLog::new(sim.header());
    while !sim.is_finished() {
        log.records.push(sim.step()?);
    }
    Ok(log)
}
