//! Build the four-mode chirp bank and show how well the modes separate.

use owtt::waveforms::{normalized_xcorr_peak, TemplateBank};

fn main() {
    let bank = TemplateBank::default();
    println!("sample rate {} Hz", bank.sample_rate());
    for (mode, w) in bank.modes() {
        let (f0, f1) = w.band();
        println!(
            "mode {mode}: {f0:.0} -> {f1:.0} Hz, {} samples, f(10 ms) = {:.0} Hz",
            w.len(),
            w.instantaneous_frequency(0.010)
        );
    }
    println!("\nnormalized cross-correlation peaks:");
    for (a, wa) in bank.modes() {
        let row: Vec<String> = bank
            .modes()
            .map(|(_, wb)| format!("{:.3}", normalized_xcorr_peak(wa, wb)))
            .collect();
        println!("  {a}: {}", row.join("  "));
    }
}
