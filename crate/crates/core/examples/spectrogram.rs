//! STFT of a noisy preset; writes the spectrogram as a PGM image.
//!
//! Usage: cargo run --example spectrogram -- [out.pgm]

use etfr::io::write_pgm;
use etfr::signals::{analytic, NoiseSpec, Preset};
use etfr::tfa::{half_spectrogram, stft, StftConfig};

fn main() -> etfr::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "spectrogram.pgm".into());
    let (signal, _) = Preset::Fig1b.synthesize(&NoiseSpec::new(10.0, 0))?;
    let cfg = StftConfig::for_signal(signal.len(), signal.fs);
    let tf = stft(&analytic(&signal.samples), &cfg)?;
    println!(
        "sigma {:.4} s, window {} samples, nfft {}, {} slices, energy {:.3e}",
        cfg.sigma,
        cfg.window_len(),
        cfg.nfft,
        tf.n_slices,
        tf.energy()
    );
    write_pgm(out.as_ref(), &half_spectrogram(&tf))?;
    println!("wrote {out}");
    Ok(())
}
