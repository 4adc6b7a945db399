//! Interference, bias and window-length analyses, printed and written as CSV.
//!
//! Usage: cargo run --example analysis_curves -- [out_dir]

use etfr::analysis::{interference_exact, mean_absolute_bias, InterferenceQuery};
use etfr::kpa::select_window_length;
use etfr::reproduce::{run_reproduction, Target};

fn main() -> etfr::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "analysis_out".into());
    for l in [16, 64, 256, 1024] {
        let row: Vec<String> = [1.0, 10.0, 200.0]
            .iter()
            .map(|fd| format!("{:+.4}", interference_exact(&InterferenceQuery::pair(200.0, *fd, l, 1024.0)).unwrap()))
            .collect();
        println!("L {l:4}: interference at f_delta 1/10/200 Hz {}", row.join(" "));
    }
    let mab = mean_absolute_bias(50.0, 10.0, 1024.0, 1024, &[16, 64, 256], true)?;
    println!("mean absolute bias at r0 = 10, L = 16/64/256: {:.3e} {:.3e} {:.3e}", mab[0], mab[1], mab[2]);
    println!("largest window for r0 = 10, eps2 = 0.01: {}", select_window_length(10.0, 1e-2, 1024.0, 1024));
    for t in Target::ALL {
        println!("{t}: {} files", run_reproduction(t, dir.as_ref())?.len());
    }
    Ok(())
}
