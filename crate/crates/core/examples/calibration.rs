//! Simulated rotational calibration: fit the azimuth bias table and report residual errors.

use owtt::mission::{calibrate, MissionConfig};

fn main() -> owtt::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "mission6".into());
    let report = calibrate(&MissionConfig::load(&name)?)?;
    println!(
        "{} samples ({} rejected): range p68 {:.3} m, bearing p68 {:.2} deg, body azimuth p68 {:.2} deg",
        report.samples.len(),
        report.rejected,
        report.range_p68,
        report.azimuth_p68,
        report.body_azimuth_p68
    );
    println!("fitted bias (mean |bias| {:.2} deg):", report.table.mean_abs());
    for (phi, bias) in report.table.rows().step_by(3) {
        println!("  {phi:5.0} deg: {bias:+.2}");
    }
    Ok(())
}
