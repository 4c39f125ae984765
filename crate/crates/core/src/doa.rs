//! Direction-of-arrival estimation.
//!
//! [`cbf_power`] is the full conventional (delay-and-sum) wideband beamformer over
//! arbitrary look directions. [`PairResponses`] implements sensor-pair decomposition:
//! each of the element pairs is beamformed over a one-dimensional conical-angle grid
//! once per reception, and any look direction is then scored by summing the nearest
//! conical-angle power of every pair.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{direction_vector, wrap_180, wrap_360};
use crate::ranging::ElementRecording;
use crate::waveforms::Waveform;

/// FFT length used for DOA spectra (about 18.3 Hz bins at 37.5 kS/s).
pub const DOA_FFT_LEN: usize = 2048;
/// Default conical-angle resolution (deg).
pub const DEFAULT_CONICAL_RESOLUTION: f64 = 0.25;
/// Default edge length of the pyramidal array (m).
pub const DEFAULT_EDGE: f64 = 0.08;

/// A look direction in body-fixed spherical angles (deg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    /// Inclination from body z, `[0, 180]`.
    pub theta: f64,
    /// Azimuth from body x, `[0, 360)`.
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn unit(&self) -> Vector3<f64> {
        direction_vector(self.theta, self.phi)
    }

    /// Great-circle angle to another direction (deg).
    pub fn separation(&self, other: &Direction) -> f64 {
        self.unit().dot(&other.unit()).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Element positions of the receive array in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Vector3<f64>>,
    tag: String,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<Vector3<f64>>, tag: impl Into<String>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("array needs at least one element".into()));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in &positions[i + 1..] {
                if (a - b).norm() <= 0.0 {
                    return Err(Error::Config("array elements must be distinct".into()));
                }
            }
        }
        Ok(Self {
            positions,
            tag: tag.into(),
        })
    }

    /// Square pyramid with all edges equal to `edge`, centroid at the origin, apex up.
    pub fn pyramid(edge: f64) -> Self {
        let half = edge / 2.0;
        let h = edge / 2f64.sqrt();
        let base_z = -h / 5.0;
        let positions = vec![
            Vector3::new(half, half, base_z),
            Vector3::new(-half, half, base_z),
            Vector3::new(-half, -half, base_z),
            Vector3::new(half, -half, base_z),
            Vector3::new(0.0, 0.0, h + base_z),
        ];
        Self {
            positions,
            tag: format!("pyramid {edge} m"),
        }
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// All unordered element pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.positions.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::pyramid(DEFAULT_EDGE)
    }
}

/// Arrival delay of a plane wave from `(theta, phi)` at each element, relative to the origin (s).
pub fn plane_wave_delays(geometry: &ArrayGeometry, theta: f64, phi: f64, c: f64) -> Vec<f64> {
    let a = -direction_vector(theta, phi);
    geometry.positions().iter().map(|p| a.dot(p) / c).collect()
}

/// Uniformly spaced FFT bins covering a frequency band.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBand {
    first_bin: usize,
    count: usize,
    nfft: usize,
    sample_rate: f64,
}

impl FrequencyBand {
    /// Bins whose centre frequency lies in `[f_lo, f_hi]`.
    pub fn new(f_lo: f64, f_hi: f64, nfft: usize, sample_rate: f64) -> Result<Self> {
        let (lo, hi) = (f_lo.min(f_hi), f_lo.max(f_hi));
        let df = sample_rate / nfft as f64;
        let first = (lo / df).ceil() as usize;
        let last = ((hi / df).floor() as usize).min(nfft / 2);
        if last < first {
            return Err(Error::EmptyBand);
        }
        Ok(Self {
            first_bin: first,
            count: last - first + 1,
            nfft,
            sample_rate,
        })
    }

    pub fn for_waveform(w: &Waveform, nfft: usize) -> Result<Self> {
        let (lo, hi) = w.band_edges();
        Self::new(lo, hi, nfft, w.sample_rate())
    }

    /// A single bin (degenerate band).
    pub fn single(bin: usize, nfft: usize, sample_rate: f64) -> Self {
        Self {
            first_bin: bin,
            count: 1,
            nfft,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate / self.nfft as f64
    }

    pub fn bins(&self) -> std::ops::Range<usize> {
        self.first_bin..self.first_bin + self.count
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (self.first_bin + k) as f64 * self.resolution_hz()
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * self.frequency(k)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.omega(k)).collect()
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }
}

/// Element spectra restricted to a band: `data[element][k]`.
#[derive(Debug, Clone)]
pub struct BandSpectra {
    data: Vec<Vec<Complex64>>,
    band: FrequencyBand,
}

impl BandSpectra {
    pub fn new(data: Vec<Vec<Complex64>>, band: FrequencyBand) -> Result<Self> {
        if band.is_empty() {
            return Err(Error::EmptyBand);
        }
        if let Some(bad) = data.iter().find(|d| d.len() != band.len()) {
            return Err(Error::LengthMismatch(band.len(), bad.len()));
        }
        Ok(Self { data, band })
    }

    /// FFT every channel, or only its `gate` window, and keep the band bins.
    ///
    /// A gate is transformed from its own start, which shifts all elements by the same delay.
    pub fn from_recording(rec: &ElementRecording, band: &FrequencyBand, gate: Option<std::ops::Range<usize>>) -> Result<Self> {
        let n = rec.n_samples();
        let (lo, hi) = gate.map_or((0, n), |g| (g.start.min(n), g.end.min(n)));
        if hi - lo > band.nfft() {
            return Err(Error::LengthMismatch(band.nfft(), hi - lo));
        }
        let data = rec
            .channels()
            .iter()
            .map(|ch| dsp::real_fft(&ch[lo..hi], band.nfft())[band.bins()].to_vec())
            .collect();
        Self::new(data, band.clone())
    }

    pub fn band(&self) -> &FrequencyBand {
        &self.band
    }

    pub fn element(&self, i: usize) -> &[Complex64] {
        &self.data[i]
    }

    pub fn n_elements(&self) -> usize {
        self.data.len()
    }

    /// Same spectra with every bin multiplied by a common phasor.
    pub fn rotated(&self, phase: f64) -> Self {
        let r = Complex64::from_polar(1.0, phase);
        Self {
            data: self.data.iter().map(|d| d.iter().map(|z| z * r).collect()).collect(),
            band: self.band.clone(),
        }
    }
}

/// Beamformer powers over a list of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleResponse {
    pub directions: Vec<Direction>,
    pub powers: Vec<f64>,
}

impl AngleResponse {
    pub fn argmax(&self) -> Option<Direction> {
        dsp::argmax(&self.powers).map(|i| self.directions[i])
    }
}

/// Regular `(theta, phi)` grid: theta in `[0, 180]`, phi in `[0, 360)`.
pub fn direction_grid(theta_step: f64, phi_step: f64) -> Vec<Direction> {
    let nt = (180.0 / theta_step).round() as usize;
    let np = (360.0 / phi_step).round() as usize;
    (0..=nt)
        .flat_map(|i| (0..np).map(move |j| Direction::new(i as f64 * theta_step, j as f64 * phi_step)))
        .collect()
}

/// Local grid of `(2n+1)^2` directions around `center` with spacing `step`.
fn local_grid(center: Direction, step: f64, n: i32) -> Vec<Direction> {
    (-n..=n)
        .flat_map(|i| {
            (-n..=n).map(move |j| {
                let t = center.theta + i as f64 * step;
                let (t, p) = if t < 0.0 {
                    (-t, center.phi + 180.0)
                } else if t > 180.0 {
                    (360.0 - t, center.phi + 180.0)
                } else {
                    (t, center.phi)
                };
                Direction::new(t, wrap_360(p + j as f64 * step))
            })
        })
        .collect()
}

/// Coarse-to-fine maximization of a direction scoring function.
pub fn search_max(score: impl Fn(&[Direction]) -> Vec<f64>, coarse_step: f64, fine_step: f64) -> Direction {
    let grid = direction_grid(coarse_step, coarse_step);
    let powers = score(&grid);
    let mut best = grid[dsp::argmax(&powers).unwrap_or(0)];
    let mut step = coarse_step;
    while step > fine_step {
        step = (step / 4.0).max(fine_step);
        let local = local_grid(best, step, 5);
        let p = score(&local);
        best = local[dsp::argmax(&p).unwrap_or(0)];
    }
    best
}

fn steered_sum(spectra: &BandSpectra, delays: &[f64], scratch: &mut [Complex64]) -> f64 {
    let band = spectra.band();
    let m = band.len();
    let dw = 2.0 * PI * band.resolution_hz();
    scratch.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for (i, tau) in delays.iter().enumerate() {
        let mut ph = Complex64::from_polar(1.0, band.omega(0) * tau);
        let step = Complex64::from_polar(1.0, dw * tau);
        for (acc, x) in scratch.iter_mut().zip(spectra.element(i)) {
            *acc += ph * x;
            ph *= step;
        }
    }
    scratch.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64
}

/// Wideband conventional beamformer: mean over bins of `|sum_i e^{j w tau_i} X_i|^2`.
pub fn cbf_power(spectra: &BandSpectra, geometry: &ArrayGeometry, directions: &[Direction], c: f64) -> Result<AngleResponse> {
    if spectra.band().is_empty() {
        return Err(Error::EmptyBand);
    }
    if spectra.n_elements() != geometry.len() {
        return Err(Error::LengthMismatch(geometry.len(), spectra.n_elements()));
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); spectra.band().len()];
    let powers = directions
        .iter()
        .map(|d| {
            let tau = plane_wave_delays(geometry, d.theta, d.phi, c);
            steered_sum(spectra, &tau, &mut scratch)
        })
        .collect();
    Ok(AngleResponse {
        directions: directions.to_vec(),
        powers,
    })
}

/// Uniform conical-angle grid over `[0, 180]` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicalGrid {
    resolution: f64,
    count: usize,
}

impl ConicalGrid {
    pub fn new(resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || resolution > 180.0 {
            return Err(Error::EmptyConicalGrid);
        }
        let count = (180.0 / resolution).round() as usize + 1;
        Ok(Self { resolution, count })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn angle(&self, i: usize) -> f64 {
        (i as f64 * self.resolution).min(180.0)
    }

    /// Nearest grid index; exact midpoints go to the smaller angle.
    pub fn nearest(&self, zeta: f64) -> usize {
        let idx = (zeta / self.resolution - 0.5).ceil();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.count - 1)
        }
    }
}

impl Default for ConicalGrid {
    fn default() -> Self {
        Self::new(DEFAULT_CONICAL_RESOLUTION).expect("default resolution is valid")
    }
}

/// Per-pair conical beamformer responses for one reception.
#[derive(Debug, Clone)]
pub struct PairResponses {
    grid: ConicalGrid,
    axes: Vec<Vector3<f64>>,
    powers: Vec<Vec<f64>>,
    ranges: Vec<(f64, f64)>,
}

impl PairResponses {
    /// Beamform every element pair over the conical grid.
    pub fn compute(spectra: &BandSpectra, geometry: &ArrayGeometry, grid: &ConicalGrid, c: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyConicalGrid);
        }
        if spectra.n_elements() != geometry.len() {
            return Err(Error::LengthMismatch(geometry.len(), spectra.n_elements()));
        }
        let band = spectra.band();
        let m = band.len() as f64;
        let dw = 2.0 * PI * band.resolution_hz();
        let w0 = band.omega(0);
        let mut axes = Vec::new();
        let mut powers = Vec::new();
        for (i, j) in geometry.pairs() {
            let baseline = geometry.positions()[j] - geometry.positions()[i];
            let d = baseline.norm();
            axes.push(baseline / d);
            let xi = spectra.element(i);
            let xj = spectra.element(j);
            let auto: f64 = xi.iter().chain(xj).map(|z| z.norm_sqr()).sum::<f64>() / m;
            let cross: Vec<Complex64> = xi.iter().zip(xj).map(|(a, b)| a.conj() * b).collect();
            // zeta and 180 - zeta flip the sign of the pair delay, so both share one phasor run
            let n = grid.len();
            let mut row = vec![0.0; n];
            for z in 0..n.div_ceil(2) {
                let dtau = -grid.angle(z).to_radians().cos() * d / c;
                let mut ph = Complex64::from_polar(1.0, w0 * dtau);
                let step = Complex64::from_polar(1.0, dw * dtau);
                let (mut re_re, mut im_im) = (0.0, 0.0);
                for x in &cross {
                    re_re += x.re * ph.re;
                    im_im += x.im * ph.im;
                    ph *= step;
                }
                row[z] = (auto + 2.0 * (re_re - im_im) / m).max(0.0);
                row[n - 1 - z] = (auto + 2.0 * (re_re + im_im) / m).max(0.0);
            }
            powers.push(row);
        }
        let ranges = powers
            .iter()
            .map(|row| {
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        Ok(Self {
            grid: *grid,
            axes,
            powers,
            ranges,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.axes.len()
    }

    /// Conical response of one pair.
    pub fn pair(&self, p: usize) -> &[f64] {
        &self.powers[p]
    }

    /// Number of precomputed steering entries for a band of `m` bins.
    pub fn steering_entries(&self, m: usize) -> usize {
        self.n_pairs() * self.grid.len() * m
    }

    fn indices(&self, d: &Direction) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = d.unit();
        self.axes.iter().enumerate().map(move |(p, u)| {
            let zeta = s.dot(u).clamp(-1.0, 1.0).acos().to_degrees();
            (p, self.grid.nearest(zeta))
        })
    }

    /// Summed pair power at each direction.
    pub fn evaluate(&self, directions: &[Direction]) -> Vec<f64> {
        directions
            .iter()
            .map(|d| self.indices(d).map(|(p, z)| self.powers[p][z]).sum())
            .collect()
    }

    /// Pair powers min-max scaled to `[0, 1]`, averaged over pairs and raised to `kappa`.
    pub fn likelihood(&self, directions: &[Direction], kappa: f64) -> Vec<f64> {
        let n = self.n_pairs() as f64;
        directions
            .iter()
            .map(|d| {
                let s: f64 = self
                    .indices(d)
                    .map(|(p, z)| {
                        let (lo, hi) = self.ranges[p];
                        if hi > lo {
                            (self.powers[p][z] - lo) / (hi - lo)
                        } else {
                            1.0
                        }
                    })
                    .sum();
                (s / n).powf(kappa)
            })
            .collect()
    }

    /// Direction of maximum summed pair power.
    pub fn mle(&self) -> Direction {
        search_max(|d| self.evaluate(d), 2.0, 0.25)
    }
}

/// Sensor-pair-decomposition beamformer evaluated at `directions`.
pub fn spd_beamform(
    spectra: &BandSpectra,
    geometry: &ArrayGeometry,
    directions: &[Direction],
    grid: &ConicalGrid,
    c: f64,
) -> Result<AngleResponse> {
    if directions.is_empty() {
        return Err(Error::Config("no evaluation directions".into()));
    }
    let pr = PairResponses::compute(spectra, geometry, grid, c)?;
    Ok(AngleResponse {
        directions: directions.to_vec(),
        powers: pr.evaluate(directions),
    })
}

/// Sensor-pair beamformer powers aligned with particle directions.
pub fn evaluate_at_particles(
    spectra: &BandSpectra,
    geometry: &ArrayGeometry,
    particle_directions: &[Direction],
    grid: &ConicalGrid,
    c: f64,
) -> Result<Vec<f64>> {
    Ok(PairResponses::compute(spectra, geometry, grid, c)?.evaluate(particle_directions))
}

/// Steering entries a full beamformer needs for a direction grid: directions x elements x bins.
pub fn cbf_steering_entries(n_directions: usize, n_elements: usize, m: usize) -> usize {
    n_directions * n_elements * m
}

/// Steering entries of the pair decomposition: pairs x conical angles x bins.
pub fn spd_steering_entries(n_pairs: usize, grid: &ConicalGrid, m: usize) -> usize {
    n_pairs * grid.len() * m
}

/// Periodic azimuth bias lookup, `bias(phi)` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthBiasTable {
    azimuths: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BiasRow {
    azimuth_deg: f64,
    bias_deg: f64,
}

impl AzimuthBiasTable {
    /// Build from `(azimuth, bias)` rows; azimuths are wrapped and sorted.
    pub fn new(rows: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut rows: Vec<(f64, f64)> = rows.into_iter().map(|(a, b)| (wrap_360(a), b)).collect();
        if rows.is_empty() {
            return Err(Error::BiasTable("table has no rows".into()));
        }
        if rows.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::BiasTable("non-finite entry".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::BiasTable("duplicate azimuth".into()));
        }
        Ok(Self {
            azimuths: rows.iter().map(|r| r.0).collect(),
            biases: rows.iter().map(|r| r.1).collect(),
        })
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(bias: f64) -> Self {
        Self {
            azimuths: vec![0.0],
            biases: vec![bias],
        }
    }

    /// Sample `f` every `step` degrees.
    pub fn from_fn(step: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = (360.0 / step).round() as usize;
        Self::new((0..n).map(|i| {
            let a = i as f64 * step;
            (a, f(a))
        }))
        .expect("sampled table is valid")
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.azimuths.iter().copied().zip(self.biases.iter().copied())
    }

    /// Periodic linear interpolation of the bias at `phi`.
    pub fn bias_at(&self, phi: f64) -> f64 {
        let n = self.azimuths.len();
        if n == 1 {
            return self.biases[0];
        }
        let phi = wrap_360(phi);
        let upper = self.azimuths.partition_point(|a| *a <= phi);
        let (lo, hi) = if upper == 0 || upper == n { (n - 1, 0) } else { (upper - 1, upper) };
        let a0 = self.azimuths[lo];
        let span = wrap_360(self.azimuths[hi] - a0);
        let span = if span == 0.0 { 360.0 } else { span };
        let frac = wrap_360(phi - a0) / span;
        self.biases[lo] + frac * (self.biases[hi] - self.biases[lo])
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let rows = reader
            .deserialize::<BiasRow>()
            .map(|r| r.map(|row| (row.azimuth_deg, row.bias_deg)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::BiasTable(e.to_string()))?;
        Self::new(rows)
    }

    pub fn to_writer(&self, w: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        for (azimuth_deg, bias_deg) in self.rows() {
            writer
                .serialize(BiasRow { azimuth_deg, bias_deg })
                .map_err(|e| Error::BiasTable(e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::BiasTable(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(f)
    }

    /// Mean absolute bias over the table rows.
    pub fn mean_abs(&self) -> f64 {
        self.biases.iter().map(|b| b.abs()).sum::<f64>() / self.biases.len() as f64
    }
}

impl Default for AzimuthBiasTable {
    fn default() -> Self {
        Self::zero()
    }
}

/// Remove the tabulated bias from a raw azimuth; result in `[0, 360)`.
pub fn correct_azimuth(raw_phi: f64, table: &AzimuthBiasTable) -> f64 {
    wrap_360(raw_phi - table.bias_at(raw_phi))
}

/// Signed azimuth difference `a - b` in `[-180, 180)`.
pub fn azimuth_error(a: f64, b: f64) -> f64 {
    wrap_180(a - b)
}
