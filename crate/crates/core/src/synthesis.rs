//! Ridge masks, the masked (enhanced) TF plane, per-mode reconstruction and
//! quality metrics.
//!
//! A mode is read back from one STFT coefficient per slice. Because the
//! transform keeps an absolute-time phase reference, the coefficient at bin
//! `b` and slice center `c` is rotated by `exp(j 2 pi c b / nfft)` before the
//! real part is taken, and divided by the window DC gain so a unit tone comes
//! back with unit amplitude.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ridge::IFTrack;
use crate::signals::TimeSeries;
use crate::tfa::TFMatrix;

/// Output SNR reported for an exact reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// Binary ridge mask plus the per-mode bins it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeoMask {
    /// Row-major `[slice][bin]`.
    pub active: Vec<bool>,
    pub n_slices: usize,
    pub nfft: usize,
    /// One bin per slice for every mode.
    pub mode_bins: Vec<Vec<usize>>,
}

impl SeoMask {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn is_active(&self, n: usize, v: usize) -> bool {
        self.active[n * self.nfft + v]
    }

    /// Mask with every cell set to `value` and no mode bins.
    pub fn filled(n_slices: usize, nfft: usize, value: bool) -> Self {
        Self { active: vec![value; n_slices * nfft], n_slices, nfft, mode_bins: Vec::new() }
    }
}

/// One decomposed mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimate {
    pub track: IFTrack,
    /// Reconstructed real samples, one per slice.
    pub samples: Vec<f64>,
    /// STFT values on the ridge, before any rotation or gain normalization.
    pub ridge: Vec<Complex64>,
    pub fs: f64,
}

fn track_bins(track: &IFTrack, tf: &TFMatrix) -> Result<Vec<usize>> {
    if track.len() != tf.n_slices {
        return Err(Error::LengthMismatch { expected: tf.n_slices, found: track.len() });
    }
    let nyquist = tf.fs / 2.0;
    if let Some(f) = track.freqs_hz.iter().find(|f| !(**f >= 0.0 && **f < nyquist)) {
        return Err(Error::Range(format!("track frequency {f} Hz is outside [0, {nyquist}) Hz")));
    }
    Ok(track
        .bins_on(tf.fs, tf.nfft)
        .into_iter()
        .map(|b| b.clamp(0, tf.nfft as i64 - 1) as usize)
        .collect())
}

/// Marks `round(f_i[n] nfft / fs)` in every slice for every track.
pub fn seo(tracks: &[IFTrack], tf: &TFMatrix) -> Result<SeoMask> {
    let mut mask = SeoMask::filled(tf.n_slices, tf.nfft, false);
    for track in tracks {
        let bins = track_bins(track, tf)?;
        for (n, &b) in bins.iter().enumerate() {
            mask.active[n * tf.nfft + b] = true;
        }
        mask.mode_bins.push(bins);
    }
    Ok(mask)
}

/// Element-wise product of the STFT and the mask.
pub fn etfr(tf: &TFMatrix, mask: &SeoMask) -> Result<TFMatrix> {
    if mask.n_slices != tf.n_slices || mask.nfft != tf.nfft {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, transform is {}x{}",
            mask.n_slices, mask.nfft, tf.n_slices, tf.nfft
        )));
    }
    let mut out = tf.clone();
    for (c, keep) in out.data.iter_mut().zip(&mask.active) {
        if !keep {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// `Re{X[n, b] exp(j 2 pi c b / nfft)} / G` with `c = n * hop`.
fn demodulate(tf: &TFMatrix, n: usize, b: usize) -> f64 {
    let c = n * tf.hop;
    // reduce before scaling to keep the angle exact for long signals
    let turn = ((c % tf.nfft) * b) % tf.nfft;
    let rot = Complex64::from_polar(1.0, 2.0 * PI * turn as f64 / tf.nfft as f64);
    (tf.get(n, b) * rot).re / tf.gain
}

/// Mode samples from the STFT coefficients on the track's ridge.
pub fn reconstruct_mode(tf: &TFMatrix, track: &IFTrack) -> Result<ModeEstimate> {
    let bins = track_bins(track, tf)?;
    let ridge = bins.iter().enumerate().map(|(n, &b)| tf.get(n, b)).collect();
    let samples = bins.iter().enumerate().map(|(n, &b)| demodulate(tf, n, b)).collect();
    Ok(ModeEstimate { track: track.clone(), samples, ridge, fs: tf.fs })
}

/// Sample-wise sum of reconstructed modes.
pub fn reconstruct_signal(modes: &[ModeEstimate]) -> Result<TimeSeries> {
    let first = modes.first().ok_or(Error::Empty("mode estimates"))?;
    let n = first.samples.len();
    let mut sum = vec![0.0; n];
    for m in modes {
        if m.samples.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: m.samples.len() });
        }
        for (s, v) in sum.iter_mut().zip(&m.samples) {
            *s += v;
        }
    }
    TimeSeries::new(sum, first.fs)
}

/// Whole-signal reconstruction straight from the masked plane: every active
/// cell contributes once per slice, so a cell shared by crossing modes is
/// not counted twice.
pub fn reconstruct_from_etfr(etfr: &TFMatrix, mask: &SeoMask) -> Result<TimeSeries> {
    if mask.n_slices != etfr.n_slices || mask.nfft != etfr.nfft {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, transform is {}x{}",
            mask.n_slices, mask.nfft, etfr.n_slices, etfr.nfft
        )));
    }
    let samples = (0..etfr.n_slices)
        .map(|n| {
            (0..etfr.nfft)
                .filter(|&v| mask.is_active(n, v))
                .map(|v| demodulate(etfr, n, v))
                .sum()
        })
        .collect();
    TimeSeries::new(samples, etfr.fs)
}

fn scored_range(len: usize, other: usize, edge: usize) -> Result<std::ops::Range<usize>> {
    if len != other {
        return Err(Error::LengthMismatch { expected: len, found: other });
    }
    if 2 * edge >= len {
        return Err(Error::InvalidConfig(format!(
            "edge exclusion of {edge} samples leaves nothing of {len} to score"
        )));
    }
    Ok(edge..len - edge)
}

/// Mean squared error over `[edge, N - edge)`.
pub fn mse(x: &[f64], xhat: &[f64], edge: usize) -> Result<f64> {
    let r = scored_range(x.len(), xhat.len(), edge)?;
    let k = r.len() as f64;
    Ok(x[r.clone()].iter().zip(&xhat[r]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / k)
}

/// `10 log10(sum x^2 / sum (x - xhat)^2)` over `[edge, N - edge)`, capped at
/// [`SNR_CAP_DB`] for an exact match.
pub fn output_snr(x: &[f64], xhat: &[f64], edge: usize) -> Result<f64> {
    let r = scored_range(x.len(), xhat.len(), edge)?;
    let signal: f64 = x[r.clone()].iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = x[r.clone()].iter().zip(&xhat[r]).map(|(a, b)| (a - b).powi(2)).sum();
    if error == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SNR_CAP_DB))
}

/// Per-mode and whole-signal scores against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    pub mse: f64,
    pub output_snr_db: f64,
}
