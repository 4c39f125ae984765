//! PHAT matched filtering, element combination, range normalization and mode identification.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::waveforms::{ModeId, TemplateBank, Waveform};

/// Number of hydrophone elements in the array.
pub const NUM_ELEMENTS: usize = 5;
/// Samples captured per element per second.
pub const DEFAULT_CAPTURE_LEN: usize = 8000;
/// Largest allowed spread (inclusive) of per-element correlation peaks, in samples.
pub const CONSISTENCY_BOUND: usize = 15;
/// Detection threshold on the peak-to-median ratio of the combined response's amplitude.
///
/// The combined response is a sum of products of two magnitudes, so the ratio is taken on its
/// square root to compare amplitudes.
pub const DEFAULT_DETECTION_RATIO: f64 = 4.0;
/// Consecutive identical winners needed to confirm a mode.
pub const CONFIRM_COUNT: usize = 3;
/// Default speed of sound (m/s).
pub const DEFAULT_SOUND_SPEED: f64 = 1481.0;

/// One PPS-triggered capture of all array elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRecording {
    channels: Vec<Vec<f64>>,
    sample_rate: f64,
    trigger_epoch: f64,
}

impl ElementRecording {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64, trigger_epoch: f64) -> Result<Self> {
        if channels.len() != NUM_ELEMENTS {
            return Err(Error::LengthMismatch(NUM_ELEMENTS, channels.len()));
        }
        let n = channels[0].len();
        if let Some(bad) = channels.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch(n, bad.len()));
        }
        Ok(Self {
            channels,
            sample_rate,
            trigger_epoch,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Whole-second instant at which sampling was triggered (s).
    pub fn trigger_epoch(&self) -> f64 {
        self.trigger_epoch
    }
}

/// Unit-energy pseudo-distribution over range bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeDistribution {
    weights: Vec<f64>,
    bin_width: f64,
}

impl RangeDistribution {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Meters per bin, `c / Fs`.
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn max_range(&self) -> f64 {
        self.bin_width * self.weights.len() as f64
    }

    pub fn range_of(&self, bin: usize) -> f64 {
        self.bin_width * bin as f64
    }

    /// Nearest bin to `r`, clamped to the valid bins.
    pub fn nearest_bin(&self, r: f64) -> usize {
        let last = self.weights.len().saturating_sub(1);
        let b = (r / self.bin_width).round();
        if b <= 0.0 || b.is_nan() {
            0
        } else {
            (b as usize).min(last)
        }
    }

    pub fn weight_at(&self, r: f64) -> f64 {
        self.weights[self.nearest_bin(r)]
    }

    pub fn argmax_bin(&self) -> usize {
        dsp::argmax(&self.weights).unwrap_or(0)
    }

    /// Range of the strongest bin (the range MLE).
    pub fn mle(&self) -> f64 {
        self.range_of(self.argmax_bin())
    }
}

/// Phase transform: keep phase, drop magnitude. Zero bins stay zero.
pub fn phat_whiten(spectrum: &[Complex64]) -> Vec<Complex64> {
    spectrum
        .iter()
        .map(|z| {
            let m = z.norm();
            if m > 0.0 {
                z / m
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn correlation_len(n_samples: usize, template_len: usize) -> usize {
    dsp::next_pow2(n_samples + template_len)
}

/// Envelope of the linear correlation of the PHAT-whitened channel with the template, lags `0..channel.len()`.
pub fn matched_filter(channel: &[f64], channel_rate: f64, template: &Waveform) -> Result<Vec<f64>> {
    if channel_rate != template.sample_rate() {
        return Err(Error::SampleRateMismatch(channel_rate, template.sample_rate()));
    }
    let n = correlation_len(channel.len(), template.len());
    let x = phat_whiten(&dsp::real_fft(channel, n));
    let s = dsp::real_fft(template.samples(), n);
    Ok(correlate_spectra(&x, &s, channel.len()))
}

/// Envelope of the correlation: magnitude of its analytic signal.
fn correlate_spectra(x_hat: &[Complex64], s: &[Complex64], keep: usize) -> Vec<f64> {
    let n = x_hat.len();
    let mut y: Vec<Complex64> = x_hat
        .iter()
        .zip(s)
        .enumerate()
        .map(|(k, (x, s))| {
            let gain = match k {
                0 => 1.0,
                k if 2 * k == n => 1.0,
                k if 2 * k < n => 2.0,
                _ => 0.0,
            };
            x * s.conj() * gain
        })
        .collect();
    dsp::ifft_in_place(&mut y);
    y.into_iter().take(keep).map(|z| z.norm()).collect()
}

/// True when the per-element peak indices spread by at most [`CONSISTENCY_BOUND`] samples.
pub fn consistency_check(argmaxima: &[usize]) -> bool {
    match (argmaxima.iter().min(), argmaxima.iter().max()) {
        (Some(lo), Some(hi)) => hi - lo <= CONSISTENCY_BOUND,
        _ => false,
    }
}

/// Sum over all unordered element pairs of `|y_i[n]| * |y_j[n]|`.
pub fn combine_elements(per_element: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = per_element.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if let Some(bad) = per_element.iter().find(|y| y.len() != n) {
        return Err(Error::LengthMismatch(n, bad.len()));
    }
    // sum_{i<j} a_i a_j = ((sum a)^2 - sum a^2) / 2, evaluated per bin
    Ok((0..n)
        .map(|k| {
            let (s, s2) = per_element.iter().fold((0.0, 0.0), |(s, s2), y| {
                let a = y[k].abs();
                (s + a, s2 + a * a)
            });
            (0.5 * (s * s - s2)).max(0.0)
        })
        .collect())
}

/// Scale a non-negative combined response to unit energy; bin `n` maps to `n * c / Fs` meters.
pub fn normalize_to_range(combined: &[f64], c: f64, sample_rate: f64) -> Result<RangeDistribution> {
    let energy: f64 = combined.iter().map(|v| v * v).sum();
    if energy <= 0.0 || !energy.is_finite() {
        return Err(Error::ZeroResponse);
    }
    let norm = energy.sqrt();
    Ok(RangeDistribution {
        weights: combined.iter().map(|v| v.max(0.0) / norm).collect(),
        bin_width: c / sample_rate,
    })
}

/// Rolling mode-identification state for one receiver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeDecision {
    history: VecDeque<Option<ModeId>>,
    confirmed: Option<ModeId>,
    scores: BTreeMap<ModeId, f64>,
}

impl ModeDecision {
    const HISTORY: usize = 8;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn history(&self) -> impl Iterator<Item = Option<ModeId>> + '_ {
        self.history.iter().copied()
    }

    /// Most recently confirmed mode. Stays latched until a different mode is confirmed.
    pub fn confirmed(&self) -> Option<ModeId> {
        self.confirmed
    }

    pub fn scores(&self) -> &BTreeMap<ModeId, f64> {
        &self.scores
    }

    pub fn last(&self) -> Option<ModeId> {
        self.history.back().copied().flatten()
    }

    /// Append a winner (or `None` for no detection) and update the confirmation.
    pub fn push(&mut self, winner: Option<ModeId>) {
        self.history.push_back(winner);
        while self.history.len() > Self::HISTORY {
            self.history.pop_front();
        }
        if self.history.len() >= CONFIRM_COUNT {
            let tail: Vec<_> = self.history.iter().rev().take(CONFIRM_COUNT).collect();
            if let Some(m) = tail[0] {
                if tail.iter().all(|t| **t == Some(*m)) {
                    self.confirmed = Some(*m);
                }
            }
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Why a second's acoustic range measurement was or was not usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeStatus {
    Valid,
    NoDetection,
    Inconsistent,
}

/// Output of the full ranging chain for one recording and one template.
#[derive(Debug, Clone)]
pub struct RangeMeasurement {
    pub status: RangeStatus,
    pub argmaxima: [usize; NUM_ELEMENTS],
    pub peak_bin: usize,
    pub peak_to_median: f64,
    pub distribution: Option<RangeDistribution>,
}

impl RangeMeasurement {
    pub fn is_valid(&self) -> bool {
        self.status == RangeStatus::Valid
    }
}

/// Whitened element spectra of one recording, reusable across templates.
#[derive(Debug, Clone)]
pub struct WhitenedRecording {
    spectra: Vec<Vec<Complex64>>,
    n_samples: usize,
}

/// Ranging pipeline with template spectra cached for a fixed capture length.
#[derive(Debug, Clone)]
pub struct RangeProcessor {
    nfft: usize,
    n_samples: usize,
    sample_rate: f64,
    sound_speed: f64,
    detection_ratio: f64,
    templates: BTreeMap<ModeId, Vec<Complex64>>,
}

impl RangeProcessor {
    pub fn new(bank: &TemplateBank, n_samples: usize, sound_speed: f64) -> Self {
        let nfft = correlation_len(n_samples, bank.max_template_len());
        let templates = bank
            .modes()
            .map(|(m, w)| (m, dsp::real_fft(w.samples(), nfft)))
            .collect();
        Self {
            nfft,
            n_samples,
            sample_rate: bank.sample_rate(),
            sound_speed,
            detection_ratio: DEFAULT_DETECTION_RATIO,
            templates,
        }
    }

    pub fn with_detection_ratio(mut self, ratio: f64) -> Self {
        self.detection_ratio = ratio;
        self
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    fn check(&self, rec: &ElementRecording) -> Result<()> {
        if rec.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(rec.sample_rate(), self.sample_rate));
        }
        if rec.n_samples() != self.n_samples {
            return Err(Error::LengthMismatch(self.n_samples, rec.n_samples()));
        }
        Ok(())
    }

    pub fn whiten(&self, rec: &ElementRecording) -> Result<WhitenedRecording> {
        self.check(rec)?;
        Ok(WhitenedRecording {
            spectra: rec
                .channels()
                .iter()
                .map(|c| phat_whiten(&dsp::real_fft(c, self.nfft)))
                .collect(),
            n_samples: rec.n_samples(),
        })
    }

    /// Per-element matched-filter outputs for one mode.
    pub fn correlate(&self, w: &WhitenedRecording, mode: ModeId) -> Result<Vec<Vec<f64>>> {
        let s = self.templates.get(&mode).ok_or(Error::ModeNotMapped(mode.get()))?;
        Ok(w.spectra
            .iter()
            .map(|x| correlate_spectra(x, s, w.n_samples))
            .collect())
    }

    fn detection(&self, combined: &[f64]) -> (usize, f64) {
        let peak_bin = dsp::argmax(combined).unwrap_or(0);
        let med = dsp::median(combined);
        let ratio = if med > 0.0 {
            (combined[peak_bin] / med).sqrt()
        } else if combined[peak_bin] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (peak_bin, ratio)
    }

    /// Full range chain for one recording against one mode's template.
    pub fn measure(&self, rec: &ElementRecording, mode: ModeId) -> Result<RangeMeasurement> {
        let w = self.whiten(rec)?;
        self.measure_whitened(&w, mode)
    }

    pub fn measure_whitened(&self, w: &WhitenedRecording, mode: ModeId) -> Result<RangeMeasurement> {
        let ys = self.correlate(w, mode)?;
        let mut argmaxima = [0usize; NUM_ELEMENTS];
        for (a, y) in argmaxima.iter_mut().zip(&ys) {
            let mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            *a = dsp::argmax(&mags).unwrap_or(0);
        }
        let combined = combine_elements(&ys)?;
        let (peak_bin, peak_to_median) = self.detection(&combined);
        let status = if peak_to_median <= self.detection_ratio {
            RangeStatus::NoDetection
        } else if !consistency_check(&argmaxima) {
            RangeStatus::Inconsistent
        } else {
            RangeStatus::Valid
        };
        let distribution = match status {
            RangeStatus::Valid => Some(normalize_to_range(&combined, self.sound_speed, self.sample_rate)?),
            _ => None,
        };
        Ok(RangeMeasurement {
            status,
            argmaxima,
            peak_bin,
            peak_to_median,
            distribution,
        })
    }

    /// Score every mode template, append the winner to `decision`, and return it.
    pub fn identify_whitened(&self, w: &WhitenedRecording, decision: &mut ModeDecision) -> Result<Option<ModeId>> {
        let mut best: Option<(ModeId, f64)> = None;
        decision.scores.clear();
        for &mode in self.templates.keys() {
            let combined = combine_elements(&self.correlate(w, mode)?)?;
            let (peak_bin, ratio) = self.detection(&combined);
            let peak = combined[peak_bin];
            decision.scores.insert(mode, peak);
            if ratio > self.detection_ratio && best.is_none_or(|(_, b)| peak > b) {
                best = Some((mode, peak));
            }
        }
        let winner = best.map(|(m, _)| m);
        decision.push(winner);
        Ok(winner)
    }

    pub fn identify(&self, rec: &ElementRecording, decision: &mut ModeDecision) -> Result<Option<ModeId>> {
        let w = self.whiten(rec)?;
        self.identify_whitened(&w, decision)
    }
}

/// Identify the broadcast mode of one recording and update the running decision.
pub fn identify_mode(rec: &ElementRecording, bank: &TemplateBank, decision: &mut ModeDecision) -> Result<Option<ModeId>> {
    if bank.is_empty() {
        return Err(Error::Config("empty template bank".into()));
    }
    RangeProcessor::new(bank, rec.n_samples(), DEFAULT_SOUND_SPEED).identify(rec, decision)
}

/// Binary dump of per-second range rows: `f64 Fs, f64 c, u32 n_bins` then `f32` rows, all little-endian.
pub struct RangeDumpWriter<W: Write> {
    inner: W,
    n_bins: usize,
}

impl<W: Write> RangeDumpWriter<W> {
    pub fn new(mut inner: W, sample_rate: f64, sound_speed: f64, n_bins: usize) -> std::io::Result<Self> {
        inner.write_all(&sample_rate.to_le_bytes())?;
        inner.write_all(&sound_speed.to_le_bytes())?;
        inner.write_all(&(n_bins as u32).to_le_bytes())?;
        Ok(Self { inner, n_bins })
    }

    pub fn write_row(&mut self, row: &[f64]) -> std::io::Result<()> {
        if row.len() != self.n_bins {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("row has {} bins, expected {}", row.len(), self.n_bins),
            ));
        }
        for v in row {
            self.inner.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Parse a dump produced by [`RangeDumpWriter`] into `(Fs, c, rows)`.
pub fn read_range_dump(bytes: &[u8]) -> Result<(f64, f64, Vec<Vec<f32>>)> {
    let bad = || Error::Log("truncated range dump".into());
    let head = bytes.get(..20).ok_or_else(bad)?;
    let fs = f64::from_le_bytes(head[0..8].try_into().map_err(|_| bad())?);
    let c = f64::from_le_bytes(head[8..16].try_into().map_err(|_| bad())?);
    let n = u32::from_le_bytes(head[16..20].try_into().map_err(|_| bad())?) as usize;
    let body = &bytes[20..];
    if n == 0 || !body.len().is_multiple_of(4 * n) {
        return Err(bad());
    }
    let rows = body
        .chunks_exact(4 * n)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
        .collect();
    Ok((fs, c, rows))
}
