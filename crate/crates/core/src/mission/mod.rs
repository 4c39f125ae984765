//! Mission configs, the simulation loop, logs, error statistics, replay and calibration.

mod calibrate;
mod config;
mod log;
mod pipeline;
mod replay;
mod sim;
mod stats;

pub use calibrate::{calibrate, estimate_bias_table, CalibrationReport, CalibrationSample};
pub use config::{
    builtin_bias_table, BeaconConfig, CalibrationConfig, Command, MissionConfig, ReceiverConfig, ScriptEvent,
    VehicleConfig, PRESETS, SCHEMA_VERSION,
};
pub use log::{
    open_log_writer, AcousticCause, BeaconRow, EstimateRow, LogHeader, LogWriter, TickLog, TickRecord, TruthRow,
    VehicleRow, LOG_FORMAT, LOG_VERSION,
};
pub use pipeline::{AcousticMeasurement, AcousticPipeline, ReceiverDsp, GATE_LEAD, GATE_TAIL};
pub use replay::{replay_validation, DrSummary, Footprint, ReplayReport};
pub use sim::{run_mission, Simulation, Snapshot, VehicleSnapshot, SURFACE_DEPTH, TRAIL_LEN};
pub use stats::{compute_error_stats, percentile, row_error, ErrorStats, Reference, VehicleStats};
