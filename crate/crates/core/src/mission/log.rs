use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::behaviors::Setpoints;
use crate::error::{Error, Result};

/// Log format identifier written in the header line.
pub const LOG_FORMAT: &str = "owtt-ticklog";
/// Log schema version.
pub const LOG_VERSION: u32 = 1;

/// First line of every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub mission: String,
    pub seed: u64,
    pub vehicles: Vec<String>,
}

/// Why a second produced no acoustic update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcousticCause {
    Valid,
    NoDetection,
    Inconsistent,
    OutOfRange,
    BeaconOff,
    NotDeployed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconRow {
    pub x: f64,
    pub y: f64,
    pub mode: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub heading: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    /// Beacon position relative to the vehicle (east, north).
    pub rel: [f64; 2],
    /// Vehicle position: beacon GPS position minus `rel`.
    pub abs: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRow {
    pub name: String,
    pub deployed: bool,
    pub truth: TruthRow,
    pub estimate: Option<EstimateRow>,
    /// Mode detected this second.
    pub detected: Option<u8>,
    /// Latched confirmed mode.
    pub mode: Option<u8>,
    pub cause: AcousticCause,
    pub range_mle: Option<f64>,
    pub behavior: String,
    /// Trackline vehicle inside its buffer band.
    #[serde(default)]
    pub on_line: bool,
    pub setpoints: Setpoints,
    pub dr: [f64; 2],
    pub dr_distance: f64,
    pub lbl: Option<[f64; 2]>,
}

/// One row per simulated second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub beacon: BeaconRow,
    pub vehicles: Vec<VehicleRow>,
}

/// In-memory mission log.
#[derive(Debug, Clone, PartialEq)]
pub struct TickLog {
    pub header: LogHeader,
    pub records: Vec<TickRecord>,
}

impl TickLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut lw = LogWriter::new(w, &self.header)?;
        for r in &self.records {
            lw.write(r)?;
        }
        lw.finish()?;
        Ok(())
    }

    /// Serialize as JSON lines.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = open_log_writer(path, &self.header)?;
        for r in &self.records {
            w.write(r)?;
        }
        w.finish()?.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Log("empty log".into()))?
            .map_err(|e| Error::Log(e.to_string()))?;
        let header: LogHeader = serde_json::from_str(&first)?;
        if header.format != LOG_FORMAT || header.version != LOG_VERSION {
            return Err(Error::Log(format!("unsupported log {} v{}", header.format, header.version)));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Log(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TickRecord =
                serde_json::from_str(&line).map_err(|e| Error::Log(format!("line {}: {e}", i + 2)))?;
            if records.last().is_some_and(|p: &TickRecord| p.t >= rec.t) {
                return Err(Error::Log(format!("line {}: time is not increasing", i + 2)));
            }
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    /// Read a log file; gzip is detected from the `.gz` extension.
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        if is_gzip(path) {
            Self::read_from(GzDecoder::new(f))
        } else {
            Self::read_from(f)
        }
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Streaming JSON-lines writer.
pub struct LogWriter<W: Write> {
    inner: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut inner: W, header: &LogHeader) -> Result<Self> {
        serde_json::to_writer(&mut inner, header)?;
        inner.write_all(b"\n").map_err(|e| Error::Log(e.to_string()))?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, rec: &TickRecord) -> Result<()> {
        serde_json::to_writer(&mut self.inner, rec)?;
        self.inner.write_all(b"\n").map_err(|e| Error::Log(e.to_string()))
    }

    pub fn finish(self) -> Result<W> {
        Ok(self.inner)
    }
}

/// Boxed writer over a plain or gzip file, selected by extension.
pub fn open_log_writer(path: &Path, header: &LogHeader) -> Result<LogWriter<Box<dyn Write + Send>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let w: Box<dyn Write + Send> = if is_gzip(path) {
        Box::new(GzEncoder::new(BufWriter::new(f), Compression::default()))
    } else {
        Box::new(BufWriter::new(f))
    };
    LogWriter::new(w, header)
}
