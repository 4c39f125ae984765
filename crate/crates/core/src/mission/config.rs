use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behaviors::{Cruise, ModeMap};
use crate::doa::{AzimuthBiasTable, DEFAULT_EDGE};
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::waveforms::ModeId;
use crate::world::{AzimuthBiasModel, ClockModel, EnvModel, LblSetup, SensorModel, VehicleParams, MAX_BEACON_SPEED};

/// Config schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

const MISSION1: &str = include_str!("../../presets/mission1.toml");
const MISSION6: &str = include_str!("../../presets/mission6.toml");
const BIAS_TABLE: &str = include_str!("../../presets/bias_table.csv");

/// Names of the built-in mission configs.
pub const PRESETS: [&str; 2] = ["mission1", "mission6"];

/// Operator action on the beacon, from a script or a live client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetBeaconTarget { x: f64, y: f64, speed: f64 },
    SetMode { mode: u8 },
    RelocateBeacon { x: f64, y: f64 },
    Pause,
    Resume,
    SetTimeScale { scale: f64 },
}

impl Command {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Command::SetMode { mode } => ModeId::new(mode).map(|_| ()),
            Command::SetBeaconTarget { x, y, speed } => {
                if !(x.is_finite() && y.is_finite() && speed.is_finite() && speed > 0.0) {
                    return Err(Error::Config("beacon target needs finite position and positive speed".into()));
                }
                Ok(())
            }
            Command::RelocateBeacon { x, y } if !(x.is_finite() && y.is_finite()) => {
                Err(Error::Config("relocation target must be finite".into()))
            }
            Command::SetTimeScale { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::Config("time scale must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A command applied at the first whole second at or after `t_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_beacon_depth")]
    pub depth: f64,
    pub mode: u8,
    #[serde(default = "default_jitter")]
    pub jitter_sigma_s: f64,
    #[serde(default)]
    pub script: Vec<ScriptEvent>,
}

fn default_beacon_depth() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    0.45e-3
}

/// Receiver hardware and processing settings shared by the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub array_edge_m: f64,
    pub array_offset_m: f64,
    pub azimuth_bias: AzimuthBiasModel,
    pub clock: ClockModel,
    /// Bias lookup table CSV; the built-in calibrated table when absent.
    pub bias_table: Option<String>,
    /// Skip bias correction entirely.
    pub uncorrected: bool,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            array_edge_m: DEFAULT_EDGE,
            array_offset_m: 0.2,
            azimuth_bias: AzimuthBiasModel::default(),
            clock: ClockModel::default(),
            bias_table: None,
            uncorrected: false,
        }
    }
}

impl ReceiverConfig {
    /// Resolve the bias table; relative paths are taken from `base`.
    pub fn load_bias_table(&self, base: Option<&Path>) -> Result<AzimuthBiasTable> {
        if self.uncorrected {
            return Ok(AzimuthBiasTable::zero());
        }
        match &self.bias_table {
            Some(p) => {
                let path = match base {
                    Some(b) if Path::new(p).is_relative() => b.join(p),
                    _ => Path::new(p).to_path_buf(),
                };
                AzimuthBiasTable::load(&path)
            }
            None => builtin_bias_table(),
        }
    }
}

/// The shipped bias table produced by the `calibrate` procedure on the default receiver.
pub fn builtin_bias_table() -> Result<AzimuthBiasTable> {
    AzimuthBiasTable::from_reader(BIAS_TABLE.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub name: String,
    pub start: [f64; 2],
    #[serde(default)]
    pub start_heading_deg: f64,
    #[serde(default)]
    pub deploy_time_s: f64,
    /// Heading held until the first converged estimate.
    #[serde(default)]
    pub deploy_heading_deg: f64,
    #[serde(default)]
    pub sensors: SensorModel,
    #[serde(default)]
    pub dynamics: VehicleParams,
    pub modes: ModeMap,
}

/// Simulated rotational calibration rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub ranges_m: Vec<f64>,
    pub depth_m: f64,
    pub step_deg: f64,
    /// Ambient noise during calibration; the mission value when absent.
    pub ambient_noise: Option<f64>,
    pub bin_deg: f64,
    pub mode: u8,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            ranges_m: vec![30.0, 57.0],
            depth_m: 2.0,
            step_deg: 3.0,
            ambient_noise: None,
            bin_deg: 10.0,
            mode: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub schema_version: u32,
    pub name: String,
    pub duration_s: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gzip_log: bool,
    #[serde(default)]
    pub environment: EnvModel,
    #[serde(default)]
    pub lbl: LblSetup,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub cruise: Cruise,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub beacon: BeaconConfig,
    pub vehicles: Vec<VehicleConfig>,
}

impl MissionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file, or a built-in preset by name.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        if let Some(cfg) = Self::preset(path_or_preset) {
            return cfg;
        }
        let text = std::fs::read_to_string(path_or_preset).map_err(|e| Error::io(path_or_preset, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(table), Some(dir)) = (&cfg.receiver.bias_table, Path::new(path_or_preset).parent()) {
            if Path::new(table).is_relative() {
                cfg.receiver.bias_table = Some(dir.join(table).to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Option<Result<Self>> {
        match name {
            "mission1" => Some(Self::from_toml(MISSION1)),
            "mission6" => Some(Self::from_toml(MISSION6)),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.environment.validate()?;
        self.filter.validate()?;
        ModeId::new(self.beacon.mode)?;
        if self.beacon.jitter_sigma_s < 0.0 || self.beacon.depth < 0.0 {
            return Err(Error::Config("beacon jitter and depth must be non-negative".into()));
        }
        if self.lbl.baseline() <= 0.0 {
            return Err(Error::CoincidentBeacons);
        }
        if self.vehicles.is_empty() {
            return Err(Error::Config("mission has no vehicles".into()));
        }
        let mut used = vec![self.beacon.mode];
        for ev in &self.beacon.script {
            if !(ev.t_s >= 0.0) {
                return Err(Error::Config(format!("script time {} is negative", ev.t_s)));
            }
            ev.command.validate()?;
            if let Command::SetMode { mode } = ev.command {
                used.push(mode);
            }
            if let Command::SetBeaconTarget { speed, .. } = ev.command {
                if speed > MAX_BEACON_SPEED {
                    return Err(Error::Config(format!("scripted beacon speed {speed} exceeds {MAX_BEACON_SPEED} m/s")));
                }
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for v in &self.vehicles {
            if !names.insert(v.name.as_str()) {
                return Err(Error::Config(format!("duplicate vehicle name {:?}", v.name)));
            }
            v.modes.validate()?;
            for &m in used.iter().filter(|m| **m != 0) {
                if v.modes.get(ModeId::new(m)?).is_none() {
                    return Err(Error::ModeNotMapped(m));
                }
            }
        }
        if self.calibration.ranges_m.iter().any(|r| !(*r > 0.0)) || !(self.calibration.step_deg > 0.0) {
            return Err(Error::Config("calibration ranges and step must be positive".into()));
        }
        Ok(())
    }
}
