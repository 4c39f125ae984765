//! LFM chirp synthesis and the per-mode template bank.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

/// Default receiver and beacon sample rate (S/s).
pub const DEFAULT_SAMPLE_RATE: f64 = 37_500.0;
/// Default chirp duration (s).
pub const DEFAULT_CHIRP_DURATION: f64 = 0.020;
/// Fraction of the chirp covered by the two cosine tapers of the Tukey window.
pub const TUKEY_RAMP: f64 = 0.1;
/// Largest normalized cross-correlation allowed between two mode templates.
pub const SEPARABILITY_TOLERANCE: f64 = 0.5;

/// Beacon mode identifier. Mode 0 means no transmission; 1..=4 select a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(u8);

impl ModeId {
    pub const OFF: ModeId = ModeId(0);

    /// Accepts 0..=4.
    pub fn new(id: u8) -> Result<Self> {
        if id <= 4 {
            Ok(ModeId(id))
        } else {
            Err(Error::ModeOutOfRange(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_off(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for ModeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A sampled, Tukey-windowed linear FM chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: f64,
    f_start: f64,
    f_end: f64,
    duration: f64,
    scale: f64,
}

impl Waveform {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn band(&self) -> (f64, f64) {
        (self.f_start, self.f_end)
    }

    /// Lower and upper band edges regardless of sweep direction.
    pub fn band_edges(&self) -> (f64, f64) {
        (self.f_start.min(self.f_end), self.f_start.max(self.f_end))
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Support of the continuous waveform in seconds: sample `n` sits at `n / Fs`.
    pub fn support(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 / self.sample_rate
    }

    fn sweep_rate(&self) -> f64 {
        (self.f_end - self.f_start) / self.duration
    }

    /// Instantaneous frequency at time `t` (Hz).
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start + self.sweep_rate() * t
    }

    /// Continuous-time evaluation, zero outside the support. Agrees with the stored samples at `t = n / Fs`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let span = self.support();
        if !(0.0..=span).contains(&t) || span <= 0.0 {
            return 0.0;
        }
        let phase = 2.0 * PI * (self.f_start * t + 0.5 * self.sweep_rate() * t * t);
        self.scale * tukey(t / span) * phase.cos()
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

fn tukey(x: f64) -> f64 {
    let half = TUKEY_RAMP / 2.0;
    if x < half {
        0.5 * (1.0 - (PI * x / half).cos())
    } else if x > 1.0 - half {
        0.5 * (1.0 - (PI * (1.0 - x) / half).cos())
    } else {
        1.0
    }
}

/// Synthesize a peak-normalized LFM chirp sweeping `f_start` to `f_end` Hz.
pub fn synth_lfm_chirp(f_start: f64, f_end: f64, duration: f64, sample_rate: f64) -> Result<Waveform> {
    if !(duration > 0.0) {
        return Err(Error::Waveform(format!("non-positive duration {duration}")));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::Waveform(format!("non-positive sample rate {sample_rate}")));
    }
    let nyquist = sample_rate / 2.0;
    for f in [f_start, f_end] {
        if !(f > 0.0 && f < nyquist) {
            return Err(Error::Waveform(format!(
                "frequency {f} Hz outside (0, {nyquist}) Hz"
            )));
        }
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(Error::Waveform("chirp shorter than one sample".into()));
    }
    let mut w = Waveform {
        samples: vec![0.0; n],
        sample_rate,
        f_start,
        f_end,
        duration,
        scale: 1.0,
    };
    let raw: Vec<f64> = (0..n).map(|i| w.evaluate(i as f64 / sample_rate)).collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Waveform("chirp has no energy".into()));
    }
    w.scale = 1.0 / peak;
    w.samples = raw.into_iter().map(|v| v / peak).collect();
    Ok(w)
}

/// One mode's chirp definition as written in a mission config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub mode: u8,
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
}

fn default_duration() -> f64 {
    DEFAULT_CHIRP_DURATION
}

impl ChirpSpec {
    pub const fn new(mode: u8, f_start_hz: f64, f_end_hz: f64, duration_s: f64) -> Self {
        Self {
            mode,
            f_start_hz,
            f_end_hz,
            duration_s,
        }
    }
}

/// The four default broadcast chirps.
pub const DEFAULT_CHIRPS: [ChirpSpec; 4] = [
    ChirpSpec::new(1, 7000.0, 9000.0, DEFAULT_CHIRP_DURATION),
    ChirpSpec::new(2, 10000.0, 8000.0, DEFAULT_CHIRP_DURATION),
    ChirpSpec::new(3, 8000.0, 6000.0, DEFAULT_CHIRP_DURATION),
    ChirpSpec::new(4, 9000.0, 11000.0, DEFAULT_CHIRP_DURATION),
];

/// Auxiliary LBL signals: the East and West ground-truth beacons.
pub const LBL_CHIRPS: [(&str, f64, f64); 2] = [("lbl_east", 5000.0, 2000.0), ("lbl_west", 250.0, 1500.0)];

/// Mode-id to waveform map plus optional auxiliary (non-mode) signals.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    modes: BTreeMap<ModeId, Waveform>,
    auxiliary: BTreeMap<String, Waveform>,
    sample_rate: f64,
}

impl TemplateBank {
    pub fn get(&self, mode: ModeId) -> Option<&Waveform> {
        self.modes.get(&mode)
    }

    pub fn modes(&self) -> impl Iterator<Item = (ModeId, &Waveform)> {
        self.modes.iter().map(|(m, w)| (*m, w))
    }

    pub fn mode_ids(&self) -> Vec<ModeId> {
        self.modes.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn auxiliary(&self, name: &str) -> Option<&Waveform> {
        self.auxiliary.get(name)
    }

    /// Longest template length in samples.
    pub fn max_template_len(&self) -> usize {
        self.modes
            .values()
            .chain(self.auxiliary.values())
            .map(Waveform::len)
            .max()
            .unwrap_or(0)
    }

    /// Add an auxiliary waveform. It must share the bank's sample rate.
    pub fn with_auxiliary(mut self, name: impl Into<String>, w: Waveform) -> Result<Self> {
        if w.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, w.sample_rate()));
        }
        self.auxiliary.insert(name.into(), w);
        Ok(self)
    }

    /// Default bank with the LBL auxiliary signals attached.
    pub fn default_with_lbl() -> Self {
        let mut bank = Self::default();
        for (name, f0, f1) in LBL_CHIRPS {
            let w = synth_lfm_chirp(f0, f1, DEFAULT_CHIRP_DURATION, DEFAULT_SAMPLE_RATE)
                .expect("LBL chirp parameters are valid");
            bank.auxiliary.insert(name.to_string(), w);
        }
        bank
    }
}

impl Default for TemplateBank {
    fn default() -> Self {
        build_template_bank(&DEFAULT_CHIRPS, DEFAULT_SAMPLE_RATE).expect("default chirps are valid")
    }
}

/// Peak of the normalized cross-correlation magnitude over all lags.
pub fn normalized_xcorr_peak(a: &Waveform, b: &Waveform) -> f64 {
    let n = dsp::next_pow2(a.len() + b.len());
    let fa = dsp::real_fft(a.samples(), n);
    let fb = dsp::real_fft(b.samples(), n);
    let mut prod: Vec<_> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    dsp::ifft_in_place(&mut prod);
    let peak = prod.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    peak / (a.energy() * b.energy()).sqrt()
}

/// Build a bank from chirp specs, rejecting duplicate ids and templates too similar to tell apart.
pub fn build_template_bank(specs: &[ChirpSpec], sample_rate: f64) -> Result<TemplateBank> {
    let mut modes = BTreeMap::new();
    for spec in specs {
        if !(1..=4).contains(&spec.mode) {
            return Err(Error::ModeOutOfRange(spec.mode));
        }
        let id = ModeId(spec.mode);
        if modes.contains_key(&id) {
            return Err(Error::DuplicateMode(spec.mode));
        }
        let w = synth_lfm_chirp(spec.f_start_hz, spec.f_end_hz, spec.duration_s, sample_rate)?;
        modes.insert(id, w);
    }
    let entries: Vec<_> = modes.iter().collect();
    for (i, (ma, wa)) in entries.iter().enumerate() {
        for (mb, wb) in &entries[i + 1..] {
            let xcorr = normalized_xcorr_peak(wa, wb);
            if xcorr > SEPARABILITY_TOLERANCE {
                return Err(Error::BandOverlap {
                    a: ma.get(),
                    b: mb.get(),
                    xcorr,
                    tolerance: SEPARABILITY_TOLERANCE,
                });
            }
        }
    }
    Ok(TemplateBank {
        modes,
        auxiliary: BTreeMap::new(),
        sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band_energy_fraction(w: &Waveform) -> f64 {
        let n = 1 << 16;
        let spec = dsp::real_fft(w.samples(), n);
        let (lo, hi) = w.band_edges();
        let mut inside = 0.0;
        let mut total = 0.0;
        for (k, z) in spec.iter().enumerate().take(n / 2) {
            let f = k as f64 * w.sample_rate() / n as f64;
            let e = z.norm_sqr();
            total += e;
            if f >= lo && f <= hi {
                inside += e;
            }
        }
        inside / total
    }

    #[test]
    fn mode_one_chirp_shape() {
        let w = synth_lfm_chirp(7000.0, 9000.0, 0.020, 37500.0).unwrap();
        assert_eq!(w.len(), 750);
        let peak = w.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
        assert!((w.instantaneous_frequency(0.010) - 8000.0).abs() < 1e-9);
        for (i, s) in w.samples().iter().enumerate() {
            assert!((w.evaluate(i as f64 / 37500.0) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sweep_is_a_tone() {
        let w = synth_lfm_chirp(5000.0, 5000.0, 0.020, 37500.0).unwrap();
        for n in 40..710 {
            let t = n as f64 / 37500.0;
            assert!((w.samples()[n] - (2.0 * PI * 5000.0 * t).cos()).abs() < 1e-9);
        }
        assert!((w.instantaneous_frequency(0.015) - 5000.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        assert!(synth_lfm_chirp(7000.0, 19000.0, 0.02, 37500.0).is_err());
        assert!(synth_lfm_chirp(0.0, 9000.0, 0.02, 37500.0).is_err());
        assert!(synth_lfm_chirp(7000.0, 9000.0, 0.0, 37500.0).is_err());
        assert!(synth_lfm_chirp(7000.0, 9000.0, -1.0, 37500.0).is_err());
    }

    #[test]
    fn default_bank() {
        let bank = TemplateBank::default();
        assert_eq!(bank.len(), 4);
        let bands: Vec<_> = bank.modes().map(|(_, w)| w.band()).collect();
        assert_eq!(
            bands,
            vec![(7000.0, 9000.0), (10000.0, 8000.0), (8000.0, 6000.0), (9000.0, 11000.0)]
        );
        let ids: Vec<u8> = bank.mode_ids().iter().map(|m| m.get()).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
        let full = TemplateBank::default_with_lbl();
        assert!(full.auxiliary("lbl_east").is_some());
        assert!(full.auxiliary("lbl_west").is_some());
    }

    #[test]
    fn bank_errors() {
        let single = build_template_bank(&DEFAULT_CHIRPS[..1], 37500.0).unwrap();
        assert_eq!(single.len(), 1);
        let dup = [DEFAULT_CHIRPS[0], ChirpSpec::new(1, 9000.0, 11000.0, 0.02)];
        assert!(matches!(build_template_bank(&dup, 37500.0), Err(Error::DuplicateMode(1))));
        let same = [DEFAULT_CHIRPS[0], ChirpSpec::new(2, 7000.0, 9000.0, 0.02)];
        assert!(matches!(
            build_template_bank(&same, 37500.0),
            Err(Error::BandOverlap { .. })
        ));
        let bad = [ChirpSpec::new(5, 7000.0, 9000.0, 0.02)];
        assert!(matches!(build_template_bank(&bad, 37500.0), Err(Error::ModeOutOfRange(5))));
    }

    #[test]
    fn out_of_band_energy_is_small() {
        for (_, w) in TemplateBank::default().modes() {
            assert!(band_energy_fraction(w) > 0.95, "{:?}", w.band());
        }
    }

    #[test]
    fn time_reversal_preserves_energy() {
        for (_, w) in TemplateBank::default().modes() {
            let rev: f64 = w.samples().iter().rev().map(|s| s * s).sum();
            assert!((rev - w.energy()).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn chirp_invariants(f0 in 100.0..18000.0f64, f1 in 100.0..18000.0f64, d in 0.002..0.05f64) {
            let w = synth_lfm_chirp(f0, f1, d, 37500.0).unwrap();
            prop_assert_eq!(w.len(), (d * 37500.0).round() as usize);
            let peak = w.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!((peak - 1.0).abs() < 1e-12);
        }
    }
}
