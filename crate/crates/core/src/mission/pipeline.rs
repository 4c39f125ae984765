use std::collections::BTreeMap;
use std::sync::Arc;

use crate::doa::{
    correct_azimuth, AzimuthBiasTable, ArrayGeometry, BandSpectra, ConicalGrid, Direction, FrequencyBand, PairResponses,
    DOA_FFT_LEN,
};
use crate::error::Result;
use crate::filter::{attitude_at_peak, AttitudeBuffer};
use crate::geometry::{wrap_360, EulerAttitude};
use crate::ranging::{ElementRecording, ModeDecision, RangeDistribution, RangeProcessor, RangeStatus};
use crate::waveforms::{ModeId, TemplateBank};

/// Samples kept ahead of the range peak in the beamforming gate.
pub const GATE_LEAD: usize = 20;
/// Samples kept past the end of the chirp in the beamforming gate.
pub const GATE_TAIL: usize = 60;

/// Fleet-wide receiver processing state shared between vehicles.
#[derive(Debug)]
pub struct ReceiverDsp {
    pub bank: TemplateBank,
    pub ranging: RangeProcessor,
    pub array: ArrayGeometry,
    pub grid: ConicalGrid,
    pub bias_table: AzimuthBiasTable,
    pub kappa: f64,
    pub sound_speed: f64,
    bands: BTreeMap<ModeId, FrequencyBand>,
}

impl ReceiverDsp {
    pub fn new(
        bank: TemplateBank,
        n_samples: usize,
        array: ArrayGeometry,
        bias_table: AzimuthBiasTable,
        kappa: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        let ranging = RangeProcessor::new(&bank, n_samples, sound_speed);
        let bands = bank
            .modes()
            .map(|(m, w)| FrequencyBand::for_waveform(w, DOA_FFT_LEN).map(|b| (m, b)))
            .collect::<Result<_>>()?;
        Ok(Self {
            bank,
            ranging,
            array,
            grid: ConicalGrid::default(),
            bias_table,
            kappa,
            sound_speed,
            bands,
        })
    }

    /// Pair responses of the capture, gated around the detected arrival.
    pub fn beamform(&self, rec: &ElementRecording, mode: ModeId, peak_bin: usize) -> Result<PairResponses> {
        let len = self.bank.get(mode).map_or(0, |w| w.len());
        let gate = peak_bin.saturating_sub(GATE_LEAD)..(peak_bin + len + GATE_TAIL).min(rec.n_samples());
        let band = &self.bands[&mode];
        let spectra = BandSpectra::from_recording(rec, band, Some(gate))?;
        PairResponses::compute(&spectra, &self.array, &self.grid, self.sound_speed)
    }
}

/// One second's receiver output.
#[derive(Debug, Clone)]
pub struct AcousticMeasurement {
    pub winner: Option<ModeId>,
    pub confirmed: Option<ModeId>,
    pub status: RangeStatus,
    pub range: Option<RangeDistribution>,
    pub pairs: Option<PairResponses>,
    /// Attitude at the range peak, from the rolling buffer.
    pub attitude: Option<EulerAttitude>,
    pub peak_bin: usize,
}

impl AcousticMeasurement {
    pub fn is_valid(&self) -> bool {
        self.range.is_some() && self.pairs.is_some() && self.attitude.is_some()
    }

    pub fn range_mle(&self) -> Option<f64> {
        self.range.as_ref().map(|r| r.mle())
    }

    /// Bias-corrected body-frame direction of maximum pair power.
    pub fn direction_mle(&self, table: &AzimuthBiasTable) -> Option<Direction> {
        self.pairs.as_ref().map(|p| {
            let d = p.mle();
            Direction::new(d.theta, correct_azimuth(d.phi, table))
        })
    }
}

/// Per-vehicle receiver chain: mode identification, ranging and pair beamforming.
#[derive(Debug, Clone)]
pub struct AcousticPipeline {
    dsp: Arc<ReceiverDsp>,
    decision: ModeDecision,
}

impl AcousticPipeline {
    pub fn new(dsp: Arc<ReceiverDsp>) -> Self {
        Self {
            dsp,
            decision: ModeDecision::new(),
        }
    }

    pub fn dsp(&self) -> &ReceiverDsp {
        &self.dsp
    }

    pub fn decision(&self) -> &ModeDecision {
        &self.decision
    }

    pub fn reset(&mut self) {
        self.decision.reset();
    }

    pub fn process(&mut self, rec: &ElementRecording, attitudes: &AttitudeBuffer) -> Result<AcousticMeasurement> {
        let dsp = &*self.dsp;
        let whitened = dsp.ranging.whiten(rec)?;
        let winner = dsp.ranging.identify_whitened(&whitened, &mut self.decision)?;
        let confirmed = self.decision.confirmed();
        let mut out = AcousticMeasurement {
            winner,
            confirmed,
            status: RangeStatus::NoDetection,
            range: None,
            pairs: None,
            attitude: None,
            peak_bin: 0,
        };
        let Some(mode) = winner else { return Ok(out) };
        let m = dsp.ranging.measure_whitened(&whitened, mode)?;
        out.status = m.status;
        out.peak_bin = m.peak_bin;
        if m.status != RangeStatus::Valid {
            return Ok(out);
        }
        let peak_time = rec.trigger_epoch() + m.peak_bin as f64 / rec.sample_rate();
        out.attitude = attitude_at_peak(attitudes, peak_time).ok();
        out.pairs = Some(dsp.beamform(rec, mode, m.peak_bin)?);
        out.range = m.distribution;
        Ok(out)
    }

    /// Likelihood of true body-frame directions, mapped through the bias table to apparent azimuths.
    pub fn angle_likelihood<'a>(&'a self, pairs: &'a PairResponses) -> impl Fn(&[Direction]) -> Vec<f64> + 'a {
        move |dirs: &[Direction]| {
            let apparent: Vec<Direction> = dirs
                .iter()
                .map(|d| Direction::new(d.theta, wrap_360(d.phi + self.dsp.bias_table.bias_at(d.phi))))
                .collect();
            pairs.likelihood(&apparent, self.dsp.kappa)
        }
    }
}
