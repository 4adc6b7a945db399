//! Masks the STFT to the true ridges and reconstructs each mode.

use etfr::signals::{analytic, NoiseSpec, Preset};
use etfr::synthesis::{etfr, output_snr, reconstruct_from_etfr, reconstruct_mode, seo};
use etfr::tfa::{stft, StftConfig};

fn main() -> etfr::Result<()> {
    let (signal, truth) = Preset::Fig1a.synthesize(&NoiseSpec::new(5.0, 0))?;
    let cfg = StftConfig::for_signal(signal.len(), signal.fs);
    let tf = stft(&analytic(&signal.samples), &cfg)?;
    let mask = seo(&truth.tracks, &tf)?;
    let plane = etfr(&tf, &mask)?;
    println!("mask keeps {} cells, {:.1}% of the energy", mask.active_count(), 100.0 * plane.energy() / tf.energy());
    let edge = cfg.edge();
    for (i, track) in truth.tracks.iter().enumerate() {
        let m = reconstruct_mode(&plane, track)?;
        println!("mode {i}: output SNR {:.2} dB", output_snr(&truth.modes[i].samples, &m.samples, edge)?);
    }
    let total = reconstruct_from_etfr(&plane, &mask)?;
    println!(
        "sum: output SNR {:.2} dB, input {:.2} dB",
        output_snr(&truth.clean_sum(), &total.samples, edge)?,
        output_snr(&truth.clean_sum(), &signal.samples, edge)?
    );
    Ok(())
}
