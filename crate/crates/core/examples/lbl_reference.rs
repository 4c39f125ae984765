//! Long-baseline reference fixes: exact recovery and noisy scatter.

use owtt::world::{lbl_fix, stream_rng, LblSetup};

fn main() -> owtt::Result<()> {
    let setup = LblSetup::default();
    println!("baseline {:.2} m, range sigma {:.3} m", setup.baseline(), setup.range_sigma);
    let p = [40.0, -90.0];
    let (r1, r2) = setup.ranges(p);
    let exact = lbl_fix(r1, r2, &setup)?;
    println!("exact ranges ({r1:.2}, {r2:.2}) -> ({:.6}, {:.6})", exact.position[0], exact.position[1]);
    let mut rng = stream_rng(3, 0);
    let fixes: Vec<[f64; 2]> = (0..5000)
        .filter_map(|_| {
            let (a, b) = setup.noisy_ranges(p, &mut rng);
            lbl_fix(a, b, &setup).ok().map(|f| f.position)
        })
        .collect();
    let n = fixes.len() as f64;
    let rms = (fixes.iter().map(|f| (f[0] - p[0]).powi(2) + (f[1] - p[1]).powi(2)).sum::<f64>() / n).sqrt();
    println!("{} noisy fixes, rms error {rms:.2} m", fixes.len());
    Ok(())
}
