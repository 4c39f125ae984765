//! Direction finding on the five-element pyramid array: pair decomposition versus full beamforming.

use owtt::doa::{
    cbf_power, cbf_steering_entries, direction_grid, plane_wave_delays, search_max, spd_steering_entries, ArrayGeometry,
    BandSpectra, ConicalGrid, Direction, FrequencyBand, PairResponses, DOA_FFT_LEN,
};
use owtt::ranging::{ElementRecording, DEFAULT_SOUND_SPEED};
use owtt::waveforms::{ModeId, TemplateBank};

fn main() -> owtt::Result<()> {
    let bank = TemplateBank::default();
    let w = bank.get(ModeId::new(1)?).expect("mode 1 template");
    let geom = ArrayGeometry::default();
    let grid = ConicalGrid::default();
    let band = FrequencyBand::for_waveform(w, DOA_FFT_LEN)?;
    let fs = w.sample_rate();
    let t0 = 0.01;
    let start = (t0 * fs) as usize;
    for truth in [Direction::new(95.0, 30.0), Direction::new(60.0, 200.0), Direction::new(140.0, 310.0)] {
        let delays = plane_wave_delays(&geom, truth.theta, truth.phi, DEFAULT_SOUND_SPEED);
        let channels = delays
            .iter()
            .map(|tau| (0..2000).map(|k| w.evaluate(k as f64 / fs - t0 - tau)).collect())
            .collect();
        let rec = ElementRecording::new(channels, fs, 0.0)?;
        let spectra = BandSpectra::from_recording(&rec, &band, Some(start - 20..start + w.len() + 60))?;
        let spd = PairResponses::compute(&spectra, &geom, &grid, DEFAULT_SOUND_SPEED)?.mle();
        let cbf = search_max(
            |d| cbf_power(&spectra, &geom, d, DEFAULT_SOUND_SPEED).map(|r| r.powers).unwrap_or_default(),
            2.0,
            0.25,
        );
        println!(
            "true ({:.1}, {:.1})  pair-decomposition ({:.2}, {:.2})  full ({:.2}, {:.2})  separation {:.2} deg",
            truth.theta,
            truth.phi,
            spd.theta,
            spd.phi,
            cbf.theta,
            cbf.phi,
            spd.separation(&cbf)
        );
    }
    let m = band.len();
    let full = cbf_steering_entries(direction_grid(0.25, 0.25).len(), geom.len(), m);
    let pairs = spd_steering_entries(geom.pairs().len(), &grid, m);
    println!("steering entries: full {full}, pairs {pairs} ({:.3}%)", 100.0 * pairs as f64 / full as f64);
    Ok(())
}
