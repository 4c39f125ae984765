//! Factored range/angle particle filter for the beacon position relative to the vehicle.
//!
//! Particles hold the beacon position in the vehicle-carried frame. An acoustic update
//! splits them into a range set and an angle set (body frame), weights each set by its
//! own measurement surface, sorts both by weight, and recombines them rank by rank.

use std::collections::VecDeque;

use nalgebra::{Matrix2, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::doa::Direction;
use crate::error::{Error, Result};
use crate::geometry::{bff_to_vcf, cartesian_to_spherical, direction_vector, heading_unit, vcf_to_bff, EulerAttitude};
use crate::ranging::{RangeDistribution, DEFAULT_CAPTURE_LEN, DEFAULT_SOUND_SPEED};
use crate::waveforms::DEFAULT_SAMPLE_RATE;

/// Principal 1-sigma bound (m) below which an estimate counts as converged.
pub const CONVERGENCE_SIGMA: f64 = 15.0;

/// Particle filter parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Speed-over-ground noise (m/s).
    pub sigma_sog: f64,
    /// Heading noise (deg).
    pub sigma_heading_deg: f64,
    /// Beacon random-walk noise per one-second step (m).
    pub sigma_beacon: f64,
    /// Lowest-weight entries redrawn in each duplicate set per update.
    pub reinit_count: usize,
    pub max_range: f64,
    /// Beacon depth below the surface (m).
    pub beacon_depth: f64,
    /// Exponent applied to the normalized pair-beamformer likelihood.
    pub angle_kappa: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            sigma_sog: 0.1,
            sigma_heading_deg: 3.0,
            sigma_beacon: 0.5,
            reinit_count: 50,
            max_range: DEFAULT_CAPTURE_LEN as f64 * DEFAULT_SOUND_SPEED / DEFAULT_SAMPLE_RATE,
            beacon_depth: 1.0,
            angle_kappa: 16.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config("filter needs at least two particles".into()));
        }
        if self.reinit_count >= self.n_particles {
            return Err(Error::Config(format!(
                "reinit_count {} must be below n_particles {}",
                self.reinit_count, self.n_particles
            )));
        }
        let sigmas = [self.sigma_sog, self.sigma_heading_deg, self.sigma_beacon];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("filter noise levels must be non-negative".into()));
        }
        if !(self.max_range > 0.0) || !(self.beacon_depth >= 0.0) || !(self.angle_kappa > 0.0) {
            return Err(Error::Config("max_range and angle_kappa must be positive, beacon_depth non-negative".into()));
        }
        Ok(())
    }
}

/// Weighted beacon-position hypotheses in the vehicle-carried frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    positions: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

impl ParticleSet {
    pub fn new(positions: Vec<Vector3<f64>>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::LengthMismatch(positions.len(), weights.len()));
        }
        Ok(Self { positions, weights })
    }

    pub fn uniform(positions: Vec<Vector3<f64>>) -> Self {
        let n = positions.len();
        Self {
            positions,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().map(|p| p.norm())
    }
}

/// Range-domain duplicate entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeParticle {
    pub r: f64,
    pub w: f64,
}

/// Angle-domain duplicate entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleParticle {
    pub dir: Direction,
    pub w: f64,
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Direction::new((1.0 - 2.0 * u).clamp(-1.0, 1.0).acos().to_degrees(), 360.0 * v)
}

fn uniform_range<R: Rng + ?Sized>(rng: &mut R, max_range: f64) -> f64 {
    rng.random::<f64>() * max_range
}

/// Draw the initial particle set: radius uniform on `[0, max_range]`, direction uniform on the sphere.
pub fn initialize<R: Rng + ?Sized>(config: &FilterConfig, rng: &mut R) -> ParticleSet {
    let positions = (0..config.n_particles)
        .map(|_| {
            let r = uniform_range(rng, config.max_range);
            let d = uniform_direction(rng);
            direction_vector(d.theta, d.phi) * r
        })
        .collect();
    ParticleSet::uniform(positions)
}

/// Constant-velocity prediction with compass heading.
///
/// `dz_vehicle` is the change of the vehicle's up coordinate over the step (negative when diving).
pub fn predict<R: Rng + ?Sized>(
    set: &mut ParticleSet,
    sog: f64,
    heading_deg: f64,
    dz_vehicle: f64,
    dt: f64,
    config: &FilterConfig,
    rng: &mut R,
) {
    let sog_noise = Normal::new(0.0, config.sigma_sog).expect("finite sigma");
    let hdg_noise = Normal::new(0.0, config.sigma_heading_deg).expect("finite sigma");
    let beacon_noise = Normal::new(0.0, config.sigma_beacon * dt.sqrt()).expect("finite sigma");
    for p in &mut set.positions {
        let v = sog + sog_noise.sample(rng);
        let [sx, sy] = heading_unit(heading_deg + hdg_noise.sample(rng));
        p.x -= v * dt * sx + beacon_noise.sample(rng);
        p.y -= v * dt * sy + beacon_noise.sample(rng);
        p.z -= dz_vehicle;
    }
}

fn sort_ascending<T>(items: &mut [T], weight: impl Fn(&T) -> f64) {
    // stable sort keeps original order among equal weights
    items.sort_by(|a, b| weight(a).total_cmp(&weight(b)));
}

fn normalize(weights: &mut [f64]) -> bool {
    let s: f64 = weights.iter().sum();
    if s > 0.0 && s.is_finite() {
        weights.iter_mut().for_each(|w| *w /= s);
        true
    } else {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
        false
    }
}

/// Redraw the `k` lowest-weight entries of both duplicate sets uniformly over their domains.
///
/// Fresh entries are weighted `base_weight * likelihood(new value)`, on the same scale as the
/// surviving entries.
#[allow(clippy::too_many_arguments)]
pub fn reinit_lowest<R: Rng + ?Sized>(
    range_set: &mut [RangeParticle],
    angle_set: &mut [AngleParticle],
    k: usize,
    config: &FilterConfig,
    rng: &mut R,
    base_weight: f64,
    range_likelihood: impl Fn(f64) -> f64,
    angle_likelihood: impl Fn(&[Direction]) -> Vec<f64>,
) {
    if k == 0 {
        return;
    }
    let lowest = |weights: Vec<f64>| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..weights.len()).collect();
        idx.sort_by(|a, b| weights[*a].total_cmp(&weights[*b]).then(a.cmp(b)));
        idx.truncate(k);
        idx
    };
    for i in lowest(range_set.iter().map(|p| p.w).collect()) {
        let r = uniform_range(rng, config.max_range);
        range_set[i] = RangeParticle {
            r,
            w: base_weight * range_likelihood(r),
        };
    }
    let idx = lowest(angle_set.iter().map(|p| p.w).collect());
    let dirs: Vec<Direction> = idx.iter().map(|_| uniform_direction(rng)).collect();
    let lik = angle_likelihood(&dirs);
    for ((i, d), l) in idx.into_iter().zip(dirs).zip(lik) {
        angle_set[i] = AngleParticle {
            dir: d,
            w: base_weight * l,
        };
    }
}

/// Result flags of one acoustic update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateOutcome {
    /// The combined weights were all zero or non-finite and were reset to uniform.
    pub degenerate: bool,
}

fn to_body(p: &Vector3<f64>, att: &EulerAttitude) -> (f64, Direction) {
    let b = vcf_to_bff(att, p);
    match cartesian_to_spherical(&b) {
        Ok(s) => (s.r, Direction::new(s.theta, s.phi)),
        Err(_) => (0.0, Direction::new(90.0, 0.0)),
    }
}

/// Factored acoustic update: split, weight, partially re-draw, sort, and recombine by rank.
pub fn update_acoustic<R: Rng + ?Sized>(
    set: &mut ParticleSet,
    range: &RangeDistribution,
    angle_likelihood: impl Fn(&[Direction]) -> Vec<f64>,
    attitude: &EulerAttitude,
    config: &FilterConfig,
    rng: &mut R,
) -> UpdateOutcome {
    let n = set.len();
    let body: Vec<(f64, Direction)> = set.positions.iter().map(|p| to_body(p, attitude)).collect();
    let dirs: Vec<Direction> = body.iter().map(|b| b.1).collect();
    let angle_lik = angle_likelihood(&dirs);
    let mut range_set: Vec<RangeParticle> = body
        .iter()
        .zip(&set.weights)
        .map(|((r, _), w)| RangeParticle {
            r: *r,
            w: w * range.weight_at(*r),
        })
        .collect();
    let mut angle_set: Vec<AngleParticle> = body
        .iter()
        .zip(&set.weights)
        .zip(&angle_lik)
        .map(|(((_, d), w), l)| AngleParticle { dir: *d, w: w * l })
        .collect();
    reinit_lowest(
        &mut range_set,
        &mut angle_set,
        config.reinit_count.min(n.saturating_sub(1)),
        config,
        rng,
        1.0 / n as f64,
        |r| range.weight_at(r),
        &angle_likelihood,
    );
    let mut rw: Vec<f64> = range_set.iter().map(|p| p.w).collect();
    let range_ok = normalize(&mut rw);
    range_set.iter_mut().zip(&rw).for_each(|(p, w)| p.w = *w);
    let mut aw: Vec<f64> = angle_set.iter().map(|p| p.w).collect();
    let angle_ok = normalize(&mut aw);
    angle_set.iter_mut().zip(&aw).for_each(|(p, w)| p.w = *w);
    sort_ascending(&mut range_set, |p| p.w);
    sort_ascending(&mut angle_set, |p| p.w);
    let rot = crate::geometry::attitude_rotation(attitude);
    let mut weights: Vec<f64> = Vec::with_capacity(n);
    set.positions = range_set
        .iter()
        .zip(&angle_set)
        .map(|(r, a)| {
            weights.push(r.w * a.w);
            rot * (a.dir.unit() * r.r)
        })
        .collect();
    let ok = normalize(&mut weights);
    set.weights = weights;
    UpdateOutcome {
        degenerate: !(ok && range_ok && angle_ok),
    }
}

/// Rank-paired recombination of two already-sorted duplicate sets (body frame, normalized weights).
pub fn recombine(range_sorted: &[RangeParticle], angle_sorted: &[AngleParticle], attitude: &EulerAttitude) -> ParticleSet {
    let positions = range_sorted
        .iter()
        .zip(angle_sorted)
        .map(|(r, a)| bff_to_vcf(attitude, &(a.dir.unit() * r.r)))
        .collect();
    let mut weights: Vec<f64> = range_sorted.iter().zip(angle_sorted).map(|(r, a)| r.w * a.w).collect();
    normalize(&mut weights);
    ParticleSet { positions, weights }
}

/// Systematic resampling to equal weights.
pub fn resample_systematic<R: Rng + ?Sized>(set: &mut ParticleSet, rng: &mut R) {
    let n = set.len();
    if n == 0 {
        return;
    }
    let counts = systematic_counts(&set.weights, rng.random::<f64>());
    let mut positions = Vec::with_capacity(n);
    for (p, c) in set.positions.iter().zip(&counts) {
        positions.extend(std::iter::repeat_n(*p, *c));
    }
    set.positions = positions;
    set.weights = vec![1.0 / n as f64; n];
}

/// Copy counts of systematic resampling for a single offset `u0` in `[0, 1)`.
pub fn systematic_counts(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut counts = vec![0usize; n];
    let mut cumulative = 0.0;
    let mut j = 0usize;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w / total * n as f64;
        let hi = if i + 1 == n { n as f64 } else { cumulative };
        while j < n && (j as f64 + u0) < hi {
            counts[i] += 1;
            j += 1;
        }
    }
    counts
}

/// Weighted mean and spread of the particle cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    /// Beacon position relative to the vehicle, VCF (m).
    pub mean: [f64; 3],
    /// Horizontal covariance `[[xx, xy], [xy, yy]]` (m^2).
    pub cov: [[f64; 2]; 2],
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub converged: bool,
}

impl StateEstimate {
    pub fn mean_vector(&self) -> Vector3<f64> {
        Vector3::new(self.mean[0], self.mean[1], self.mean[2])
    }
}

/// Principal standard deviations (major, minor) of a 2x2 covariance.
pub fn principal_sigmas(cov: &Matrix2<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(*cov);
    let a = eig.eigenvalues[0].max(0.0).sqrt();
    let b = eig.eigenvalues[1].max(0.0).sqrt();
    (a.max(b), a.min(b))
}

/// Weighted mean over x and y; z from the beacon and vehicle depths.
pub fn estimate(set: &ParticleSet, beacon_depth: f64, vehicle_depth: f64) -> StateEstimate {
    let n = set.len() as f64;
    let wsum = set.weight_sum();
    let (mx, my) = set
        .positions
        .iter()
        .zip(&set.weights)
        .fold((0.0, 0.0), |(x, y), (p, w)| (x + w * p.x, y + w * p.y));
    let (mx, my) = (mx / wsum, my / wsum);
    let mut c = Matrix2::zeros();
    for (p, w) in set.positions.iter().zip(&set.weights) {
        let dx = p.x - mx;
        let dy = p.y - my;
        c += Matrix2::new(dx * dx, dx * dy, dx * dy, dy * dy) * (w / wsum);
    }
    c *= n / (n - 1.0);
    let (major, minor) = principal_sigmas(&c);
    StateEstimate {
        mean: [mx, my, vehicle_depth - beacon_depth],
        cov: [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
        sigma_major: major,
        sigma_minor: minor,
        converged: major <= CONVERGENCE_SIGMA && minor <= CONVERGENCE_SIGMA,
    }
}

/// Rolling record of recent vehicle attitudes.
#[derive(Debug, Clone, Default)]
pub struct AttitudeBuffer {
    entries: VecDeque<(f64, EulerAttitude)>,
    span: f64,
}

impl AttitudeBuffer {
    /// Buffer keeping entries no older than `span` seconds behind the newest.
    pub fn new(span: f64) -> Self {
        Self {
            entries: VecDeque::new(),
            span,
        }
    }

    /// Append an entry. Timestamps must not decrease; older out-of-order entries are ignored.
    pub fn push(&mut self, t: f64, att: EulerAttitude) {
        if self.entries.back().is_some_and(|(last, _)| t < *last) {
            return;
        }
        self.entries.push_back((t, att));
        while self.entries.front().is_some_and(|(t0, _)| t - t0 > self.span) {
            self.entries.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Attitude whose timestamp is nearest `peak_time`; ties go to the earlier entry.
pub fn attitude_at_peak(buffer: &AttitudeBuffer, peak_time: f64) -> Result<EulerAttitude> {
    buffer
        .entries
        .iter()
        .fold(None, |best: Option<(f64, EulerAttitude)>, (t, a)| {
            let d = (t - peak_time).abs();
            match best {
                Some((bd, _)) if bd <= d => best,
                _ => Some((d, *a)),
            }
        })
        .map(|(_, a)| a)
        .ok_or(Error::EmptyBuffer)
}

/// A particle filter instance owning its particles and configuration.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    config: FilterConfig,
    particles: ParticleSet,
}

impl ParticleFilter {
    pub fn new<R: Rng + ?Sized>(config: FilterConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let particles = initialize(&config, rng);
        Ok(Self { config, particles })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    /// Re-draw the whole cloud (used when the vehicle surfaces).
    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.particles = initialize(&self.config, rng);
    }

    pub fn predict<R: Rng + ?Sized>(&mut self, sog: f64, heading_deg: f64, dz_vehicle: f64, dt: f64, rng: &mut R) {
        predict(&mut self.particles, sog, heading_deg, dz_vehicle, dt, &self.config, rng);
    }

    /// Acoustic update followed by systematic resampling.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        range: &RangeDistribution,
        angle_likelihood: impl Fn(&[Direction]) -> Vec<f64>,
        attitude: &EulerAttitude,
        rng: &mut R,
    ) -> UpdateOutcome {
        let out = update_acoustic(&mut self.particles, range, angle_likelihood, attitude, &self.config, rng);
        resample_systematic(&mut self.particles, rng);
        out
    }

    pub fn estimate(&self, vehicle_depth: f64) -> StateEstimate {
        estimate(&self.particles, self.config.beacon_depth, vehicle_depth)
    }
}
