use std::path::PathBuf;

/// Errors produced by the navigation library and simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    Waveform(String),

    #[error("duplicate mode id {0} in template bank")]
    DuplicateMode(u8),

    #[error("mode id {0} outside 1..=4")]
    ModeOutOfRange(u8),

    #[error("templates for modes {a} and {b} are not separable (cross-correlation {xcorr:.3} > {tolerance:.3})")]
    BandOverlap {
        a: u8,
        b: u8,
        xcorr: f64,
        tolerance: f64,
    },

    #[error("sample rate mismatch: {0} S/s vs {1} S/s")]
    SampleRateMismatch(f64, f64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("range response is identically zero")]
    ZeroResponse,

    #[error("empty frequency band")]
    EmptyBand,

    #[error("empty conical grid")]
    EmptyConicalGrid,

    #[error("angles undefined at zero radius")]
    ZeroRadius,

    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("attitude buffer is empty")]
    EmptyBuffer,

    #[error("LBL circles do not intersect")]
    NoFix,

    #[error("LBL beacons are coincident")]
    CoincidentBeacons,

    #[error("behavior for mode {0} is not defined")]
    ModeNotMapped(u8),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not enough converged rows for statistics ({0})")]
    InsufficientData(usize),

    #[error("log has no beacon track")]
    MissingBeaconTrack,

    #[error("malformed bias table: {0}")]
    BiasTable(String),

    #[error("malformed log: {0}")]
    Log(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than a runtime fault.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::DuplicateMode(_)
                | Error::ModeOutOfRange(_)
                | Error::BandOverlap { .. }
                | Error::Waveform(_)
                | Error::ModeNotMapped(_)
                | Error::BiasTable(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
