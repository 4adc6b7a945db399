//! Initial IF estimates by penalized path search, compared with the truth.

use etfr::ridge::{estimate_initial_ifs, PenaltyConfig};
use etfr::signals::{analytic, NoiseSpec, Preset};
use etfr::tfa::{stft, StftConfig};

fn main() -> etfr::Result<()> {
    let (signal, truth) = Preset::Fig1a.synthesize(&NoiseSpec::new(10.0, 3))?;
    let cfg = StftConfig::for_signal(signal.len(), signal.fs);
    let tf = stft(&analytic(&signal.samples), &cfg)?;
    let tracks = estimate_initial_ifs(&tf, &PenaltyConfig::default())?;
    let edge = cfg.edge();
    println!("{} ridges found", tracks.len());
    for (i, t) in tracks.iter().enumerate() {
        let (best, err) = truth
            .tracks
            .iter()
            .enumerate()
            .map(|(j, u)| (j, t.rms_error(u, edge, signal.len() - edge)))
            .fold((0, f64::MAX), |a, b| if b.1 < a.1 { b } else { a });
        println!("ridge {i}: nearest truth mode {best}, RMS IF error {err:.2} Hz");
    }
    Ok(())
}
