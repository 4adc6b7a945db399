//! Full decomposition of the crossing preset, with scores and artifacts.
//!
//! Usage: cargo run --example pipeline -- [out_dir]

use etfr::pipeline::{run_pipeline, PipelineConfig};
use etfr::signals::Preset;

fn main() -> etfr::Result<()> {
    env_logger::init();
    let dir = std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into());
    let report = run_pipeline(&PipelineConfig::preset(Preset::Fig1b, Some(5.0), 0, &dir))?;
    println!("{} modes, KPA windows {:?}", report.mode_count, report.window_lens);
    for m in &report.per_mode {
        println!(
            "mode {}: IF RMS {:.2} -> {:.2} Hz, output SNR {:.2} dB",
            m.index,
            m.if_rms_initial_hz.unwrap_or(f64::NAN),
            m.if_rms_enhanced_hz.unwrap_or(f64::NAN),
            m.output_snr_db.unwrap_or(f64::NAN)
        );
    }
    if let Some(t) = report.total {
        println!("total: {:.2} dB from {:.2} dB input", t.output_snr_db, t.input_snr_db);
    }
    println!("artifacts in {dir}");
    Ok(())
}
