//! Pulls the 200 Hz tone out of a 200 + 400 Hz pair with a short KPA window,
//! and compares the leftover leakage with the closed-form prediction.

use etfr::analysis::{interference_exact, InterferenceQuery};
use etfr::kpa::{encode, kpa_extract_mode, quarter_shift, KpaConfig};
use etfr::ridge::{IFTrack, TrackSource};
use etfr::signals::{synthesize_multimode, ModeSpec, NoiseSpec};
use etfr::synthesis::output_snr;

fn main() -> etfr::Result<()> {
    let (fs, f, fd) = (1024.0, 200.0, 200.0);
    let specs = [ModeSpec::lfm(f, 0.0), ModeSpec::lfm(f + fd, 0.0)];
    let (x, truth) = synthesize_multimode(&specs, &NoiseSpec::none(), 2048, fs)?;
    // one period of the beat: L = fs / f_delta, rounded up to even
    let l = ((fs / fd).ceil() as usize).next_multiple_of(2);
    let cfg = KpaConfig { window_len: l, ..KpaConfig::default() };
    let z = encode(&x, cfg.mu_for(&x))?;
    let y = kpa_extract_mode(&z, &IFTrack::constant(f, x.len(), TrackSource::Truth), &cfg)?;
    let edge = l / 2 + quarter_shift(f, fs) as usize + 1;
    let leak = y.samples[edge..x.len() - edge]
        .iter()
        .zip(&truth.modes[0].samples[edge..])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let predicted = interference_exact(&InterferenceQuery::pair(f, fd, l, fs))?.abs();
    println!("L = {l}: leakage {leak:.4}, predicted {predicted:.4}");
    println!("200 Hz mode output SNR {:.1} dB", output_snr(&truth.modes[0].samples, &y.samples, edge)?);
    Ok(())
}
