//! Curve files for the separation, bias and window-length analyses.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{block_means, interference_curve, mean_absolute_bias, ShiftRule};
use crate::error::{Error, Result};
use crate::io::write_table_csv;
use crate::kpa::select_window_length;

pub const FS: f64 = 1024.0;
pub const FIG4_F1: f64 = 200.0;
pub const FIG4_N: usize = 10240;
pub const FIG4_BLOCK: usize = 256;
pub const FIG4_DELTAS: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];
pub const FIG4B_F0: f64 = 50.0;
pub const FIG4B_N: usize = 1024;
pub const FIG4B_MAX_LEN: usize = 256;
pub const R0_GRID: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
pub const EPS2_GRID: [f64; 5] = [1e-3, 5e-3, 1e-2, 5e-2, 1e-1];
pub const WINDOW_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Fig4,
    Fig4b,
    TableWindow,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Fig4, Target::Fig4b, Target::TableWindow];

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig4 => "fig4",
            Target::Fig4b => "fig4b",
            Target::TableWindow => "table_window",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown target '{s}' (expected fig4, fig4b or table_window)")))
    }
}

/// Label used in file names: `10` for 10.0, `0.5` for 0.5.
fn label(v: f64) -> String {
    format!("{v}")
}

/// Rows `(r0, eps2, L)` over the grids above.
pub fn window_table() -> Vec<(f64, f64, usize)> {
    let mut rows = Vec::new();
    for r0 in R0_GRID {
        for eps2 in EPS2_GRID {
            rows.push((r0, eps2, select_window_length(r0, eps2, FS, WINDOW_CAP)));
        }
    }
    rows
}

/// Writes the CSVs for `target` into `dir` and returns their paths.
pub fn run_reproduction(target: Target, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match target {
        Target::Fig4 => {
            for fd in FIG4_DELTAS {
                let curve = interference_curve(FIG4_F1, fd, FS, FIG4_N, ShiftRule::Rounded)?;
                let rows: Vec<Vec<f64>> = curve.iter().map(|(l, e, a)| vec![*l as f64, *e, *a]).collect();
                let p = dir.join(format!("fig4_fdelta_{}.csv", label(fd)));
                write_table_csv(&p, &["L", "aae_exact", "aae_approx"], &rows)?;
                written.push(p);

                let ls: Vec<f64> = rows.iter().map(|r| r[0]).collect();
                let ex: Vec<f64> = rows.iter().map(|r| r[1]).collect();
                let ap: Vec<f64> = rows.iter().map(|r| r[2]).collect();
                let avg: Vec<Vec<f64>> = block_means(&ls, FIG4_BLOCK)
                    .into_iter()
                    .zip(block_means(&ex, FIG4_BLOCK))
                    .zip(block_means(&ap, FIG4_BLOCK))
                    .map(|((l, e), a)| vec![l, e, a])
                    .collect();
                let p = dir.join(format!("fig4_avg_fdelta_{}.csv", label(fd)));
                write_table_csv(&p, &["L", "aae_exact", "aae_approx"], &avg)?;
                written.push(p);
            }
        }
        Target::Fig4b => {
            let lens: Vec<usize> = (2..=FIG4B_MAX_LEN).step_by(2).collect();
            for r0 in R0_GRID {
                let exact = mean_absolute_bias(FIG4B_F0, r0, FS, FIG4B_N, &lens, true)?;
                let approx = mean_absolute_bias(FIG4B_F0, r0, FS, FIG4B_N, &lens, false)?;
                let rows: Vec<Vec<f64>> =
                    lens.iter().zip(exact.iter().zip(&approx)).map(|(l, (e, a))| vec![*l as f64, *e, *a]).collect();
                let p = dir.join(format!("fig4b_r0_{}.csv", label(r0)));
                write_table_csv(&p, &["L", "mab_exact", "mab_approx"], &rows)?;
                written.push(p);
            }
        }
        Target::TableWindow => {
            let rows: Vec<Vec<f64>> = window_table().into_iter().map(|(r, e, l)| vec![r, e, l as f64]).collect();
            let p = dir.join("table_window.csv");
            write_table_csv(&p, &["r0", "eps2", "L"], &rows)?;
            written.push(p);
        }
    }
    Ok(written)
}
