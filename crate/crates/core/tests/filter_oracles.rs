//! Particle-filter updates against dense grid posteriors.

use owtt::doa::Direction;
use owtt::filter::{FilterConfig, ParticleFilter, ParticleSet};
use owtt::geometry::EulerAttitude;
use owtt::ranging::{normalize_to_range, RangeDistribution, DEFAULT_SOUND_SPEED};
use owtt::waveforms::DEFAULT_SAMPLE_RATE;
use owtt::world::stream_rng;

const BIN: f64 = DEFAULT_SOUND_SPEED / DEFAULT_SAMPLE_RATE;

/// Gaussian range response centred on `r0` with width `sigma` (m).
fn gaussian_range(r0: f64, sigma: f64) -> RangeDistribution {
    let combined: Vec<f64> = (0..8000)
        .map(|k| (-0.5 * ((k as f64 * BIN - r0) / sigma).powi(2)).exp())
        .collect();
    normalize_to_range(&combined, DEFAULT_SOUND_SPEED, DEFAULT_SAMPLE_RATE).unwrap()
}

fn flat(d: &[Direction]) -> Vec<f64> {
    vec![1.0; d.len()]
}

fn mean_radius(set: &ParticleSet) -> f64 {
    let s = set.weight_sum();
    set.radii().zip(set.weights()).map(|(r, w)| r * w).sum::<f64>() / s
}

#[test]
fn narrow_range_response_matches_grid_posterior() {
    let r0 = 1875.0 * BIN;
    let range = gaussian_range(r0, 2.0 * BIN);
    // uniform prior in radius: the grid posterior mean is the likelihood-weighted mean radius
    let (num, den) = (0..=316_000)
        .map(|k| k as f64 * 0.001)
        .fold((0.0, 0.0), |(n, d), r| {
            let w = range.weight_at(r);
            (n + w * r, d + w)
        });
    let grid_mean = num / den;
    assert!((grid_mean - r0).abs() < BIN);

    let config = FilterConfig {
        n_particles: 100_000,
        ..FilterConfig::default()
    };
    let mut rng = stream_rng(11, 0);
    let mut pf = ParticleFilter::new(config, &mut rng).unwrap();
    let out = pf.update(&range, flat, &EulerAttitude::default(), &mut rng);
    assert!(!out.degenerate);
    let pf_mean = mean_radius(pf.particles());
    assert!((pf_mean - grid_mean).abs() < BIN, "{pf_mean} vs {grid_mean}");
}

#[test]
fn reconverges_after_contradictory_range() {
    let mut rng = stream_rng(12, 0);
    let mut pf = ParticleFilter::new(FilterConfig::default(), &mut rng).unwrap();
    let att = EulerAttitude::default();
    let first = gaussian_range(74.05, 0.3);
    for _ in 0..30 {
        pf.predict(0.0, 0.0, 0.0, 1.0, &mut rng);
        pf.update(&first, flat, &att, &mut rng);
    }
    assert!((mean_radius(pf.particles()) - 74.05).abs() < 1.0);

    let jump = gaussian_range(120.0, 0.3);
    let steps = (1..=30).find(|_| {
        pf.predict(0.0, 0.0, 0.0, 1.0, &mut rng);
        pf.update(&jump, flat, &att, &mut rng);
        (mean_radius(pf.particles()) - 120.0).abs() < 1.0
    });
    assert!(steps.is_some(), "no re-convergence within 30 updates");
}
