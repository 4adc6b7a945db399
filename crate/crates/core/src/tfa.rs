//! Gaussian-window STFT and magnitude grids.
//!
//! Column `n` of the transform is `sum_l x[l] g[l - c] exp(-j 2 pi l v / nfft)`
//! with `c = n * hop`: the phase reference is absolute sample time, not the
//! window center. Samples outside the signal count as zero.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the Gaussian-window STFT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    /// Sampling rate in Hz.
    pub fs: f64,
    /// Gaussian width parameter in seconds.
    pub sigma: f64,
    pub nfft: usize,
    /// Time-slice spacing in samples.
    pub hop: usize,
    /// Window truncation half-width in samples; the window spans `2 * half_width + 1` taps.
    pub half_width: usize,
}

impl StftConfig {
    /// Window truncated at `3 * sigma`.
    pub fn new(fs: f64, sigma: f64, nfft: usize) -> Self {
        Self { fs, sigma, nfft, hop: 1, half_width: default_half_width(sigma, fs) }
    }

    /// Defaults for a signal of `n` samples: `sigma = 0.04 * n / fs`, and a
    /// power-of-two DFT length of at least 1024 that holds the window.
    pub fn for_signal(n: usize, fs: f64) -> Self {
        let sigma = 0.04 * n as f64 / fs;
        let half = default_half_width(sigma, fs);
        let nfft = (2 * half + 1).next_power_of_two().max(1024);
        Self { fs, sigma, nfft, hop: 1, half_width: half }
    }

    pub fn with_hop(mut self, hop: usize) -> Self {
        self.hop = hop;
        self
    }

    pub fn window_len(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Hz per DFT bin.
    pub fn bin_width(&self) -> f64 {
        self.fs / self.nfft as f64
    }

    /// Samples at each end touched by zero padding.
    pub fn edge(&self) -> usize {
        (3.0 * self.sigma * self.fs).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {}", self.fs)));
        }
        if self.hop == 0 {
            return Err(Error::InvalidConfig("hop must be at least 1".into()));
        }
        if self.nfft < self.window_len() {
            return Err(Error::InvalidConfig(format!(
                "nfft {} is shorter than the window ({} taps)",
                self.nfft,
                self.window_len()
            )));
        }
        Ok(())
    }
}

fn default_half_width(sigma: f64, fs: f64) -> usize {
    (3.0 * sigma * fs).floor().max(0.0) as usize
}

/// `g[n] = exp(-pi n^2 T^2 / sigma^2) / sigma` for `|n| <= half_width`,
/// stored from `-half_width` to `half_width`.
pub fn gaussian_window(cfg: &StftConfig) -> Result<Vec<f64>> {
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    let t = 1.0 / cfg.fs;
    let h = cfg.half_width as i64;
    Ok((-h..=h)
        .map(|n| {
            let u = n as f64 * t / cfg.sigma;
            (-std::f64::consts::PI * u * u).exp() / cfg.sigma
        })
        .collect())
}

/// Complex STFT grid, row-major `[slice][bin]` over all `nfft` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct TFMatrix {
    pub data: Vec<Complex64>,
    pub n_slices: usize,
    pub nfft: usize,
    pub fs: f64,
    pub hop: usize,
    pub sigma: f64,
    /// Window DC gain `sum g[n]`.
    pub gain: f64,
}

impl TFMatrix {
    pub fn zeros_like(&self) -> Self {
        Self { data: vec![Complex64::new(0.0, 0.0); self.data.len()], ..self.clone() }
    }

    pub fn slice(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.nfft..(n + 1) * self.nfft]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.data[n * self.nfft..(n + 1) * self.nfft]
    }

    pub fn get(&self, n: usize, v: usize) -> Complex64 {
        self.data[n * self.nfft + v]
    }

    pub fn bin_to_hz(&self, v: usize) -> f64 {
        v as f64 * self.fs / self.nfft as f64
    }

    /// Nearest bin for a frequency in Hz (no range check).
    pub fn hz_to_bin(&self, f: f64) -> i64 {
        (f * self.nfft as f64 / self.fs).round() as i64
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Real grid `[slice][bin]` with the frequency axis metadata of its source.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    pub data: Vec<f64>,
    pub n_slices: usize,
    pub n_bins: usize,
    pub fs: f64,
    pub nfft: usize,
}

impl RealGrid {
    pub fn new(data: Vec<f64>, n_slices: usize, n_bins: usize, fs: f64, nfft: usize) -> Result<Self> {
        if data.len() != n_slices * n_bins {
            return Err(Error::LengthMismatch { expected: n_slices * n_bins, found: data.len() });
        }
        Ok(Self { data, n_slices, n_bins, fs, nfft })
    }

    /// Grid from per-slice rows, with a unit Hz-per-bin axis (`fs = nfft = 2 * n_bins`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_bins = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || n_bins == 0 {
            return Err(Error::Empty("grid rows"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_bins) {
            return Err(Error::LengthMismatch { expected: n_bins, found: bad.len() });
        }
        let data = rows.concat();
        Ok(Self { data, n_slices: rows.len(), n_bins, fs: 2.0 * n_bins as f64, nfft: 2 * n_bins })
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn get(&self, n: usize, v: usize) -> f64 {
        self.data[n * self.n_bins + v]
    }

    pub fn bin_to_hz(&self, v: usize) -> f64 {
        v as f64 * self.fs / self.nfft as f64
    }

    /// Sum of squared entries.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Element-wise magnitude of a TF matrix.
pub fn spectrogram(tf: &TFMatrix) -> RealGrid {
    RealGrid {
        data: tf.data.iter().map(|c| c.norm()).collect(),
        n_slices: tf.n_slices,
        n_bins: tf.nfft,
        fs: tf.fs,
        nfft: tf.nfft,
    }
}

/// Magnitudes over the positive half `[0, nfft/2)` only.
pub fn half_spectrogram(tf: &TFMatrix) -> RealGrid {
    let half = tf.nfft / 2;
    let mut data = Vec::with_capacity(tf.n_slices * half);
    for n in 0..tf.n_slices {
        data.extend(tf.slice(n)[..half].iter().map(|c| c.norm()));
    }
    RealGrid { data, n_slices: tf.n_slices, n_bins: half, fs: tf.fs, nfft: tf.nfft }
}

/// Column-at-a-time STFT engine; keeps the FFT plan and window.
pub struct StftEngine {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl StftEngine {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let window = gaussian_window(cfg)?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.nfft);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Self { cfg: *cfg, window, fft, scratch })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn gain(&self) -> f64 {
        self.window.iter().sum()
    }

    /// Number of time slices for an input of length `len`.
    pub fn n_slices(&self, len: usize) -> usize {
        len.div_ceil(self.cfg.hop)
    }

    /// Writes column `n` (centered at sample `n * hop`) into `out` (length nfft).
    pub fn column(&mut self, x: &[Complex64], n: usize, out: &mut [Complex64]) {
        let nfft = self.cfg.nfft;
        let h = self.cfg.half_width as i64;
        let center = (n * self.cfg.hop) as i64;
        out.fill(Complex64::new(0.0, 0.0));
        let lo = (center - h).max(0);
        let hi = (center + h).min(x.len() as i64 - 1);
        for l in lo..=hi {
            let g = self.window[(l - center + h) as usize];
            // absolute-time phase: sample l sits at DFT index l mod nfft
            out[l as usize % nfft] += x[l as usize] * g;
        }
        self.fft.process_with_scratch(out, &mut self.scratch);
    }
}

/// Full STFT of a complex series.
pub fn stft(x: &[Complex64], cfg: &StftConfig) -> Result<TFMatrix> {
    if x.is_empty() {
        return Err(Error::Empty("stft input"));
    }
    let mut engine = StftEngine::new(cfg)?;
    let n_slices = engine.n_slices(x.len());
    let mut data = vec![Complex64::new(0.0, 0.0); n_slices * cfg.nfft];
    for (n, col) in data.chunks_mut(cfg.nfft).enumerate() {
        engine.column(x, n, col);
    }
    Ok(TFMatrix {
        data,
        n_slices,
        nfft: cfg.nfft,
        fs: cfg.fs,
        hop: cfg.hop,
        sigma: cfg.sigma,
        gain: engine.gain(),
    })
}

/// STFT of a real series (imaginary part zero).
pub fn stft_real(x: &[f64], cfg: &StftConfig) -> Result<TFMatrix> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    stft(&z, cfg)
}

/// Per-slice argmax bin of `|STFT|` over `[0, max_bin)`, without storing the grid.
/// Ties go to the lower bin.
pub fn stft_argmax(x: &[Complex64], cfg: &StftConfig, max_bin: usize) -> Result<Vec<usize>> {
    let limit = max_bin.clamp(1, cfg.nfft);
    argmax_in(x, cfg, |_| 0..limit)
}

/// Like [`stft_argmax`], but slice `n` is searched only within
/// `centers[n] +- half_band`, clipped to `[0, max_bin)`.
pub fn stft_argmax_near(
    x: &[Complex64],
    cfg: &StftConfig,
    centers: &[usize],
    half_band: usize,
    max_bin: usize,
) -> Result<Vec<usize>> {
    let limit = max_bin.clamp(1, cfg.nfft);
    argmax_in(x, cfg, |n| {
        let c = centers.get(n).copied().unwrap_or(0).min(limit - 1);
        c.saturating_sub(half_band)..(c + half_band + 1).min(limit)
    })
}

fn argmax_in(
    x: &[Complex64],
    cfg: &StftConfig,
    range: impl Fn(usize) -> std::ops::Range<usize>,
) -> Result<Vec<usize>> {
    if x.is_empty() {
        return Err(Error::Empty("stft input"));
    }
    let mut engine = StftEngine::new(cfg)?;
    let mut col = vec![Complex64::new(0.0, 0.0); cfg.nfft];
    let n_slices = engine.n_slices(x.len());
    let mut bins = Vec::with_capacity(n_slices);
    for n in 0..n_slices {
        engine.column(x, n, &mut col);
        let r = range(n);
        let mut best = r.start;
        let mut best_v = f64::NEG_INFINITY;
        for v in r {
            let m = col[v].norm_sqr();
            if m > best_v {
                best_v = m;
                best = v;
            }
        }
        bins.push(best);
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::white_noise;
    use std::f64::consts::PI;

    fn naive(x: &[Complex64], cfg: &StftConfig) -> Vec<Complex64> {
        let g = gaussian_window(cfg).unwrap();
        let h = cfg.half_width as i64;
        let mut out = Vec::new();
        for n in 0..x.len() {
            for v in 0..cfg.nfft {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, xl) in x.iter().enumerate() {
                    let d = l as i64 - n as i64;
                    if d.abs() <= h {
                        let ang = -2.0 * PI * (l * v) as f64 / cfg.nfft as f64;
                        acc += xl * g[(d + h) as usize] * Complex64::from_polar(1.0, ang);
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
        let re = white_noise(n, seed);
        let im = white_noise(n, seed + 1000);
        re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
    }

    #[test]
    fn window_center_and_symmetry() {
        let cfg = StftConfig::new(1024.0, 0.05, 1024);
        let g = gaussian_window(&cfg).unwrap();
        let h = cfg.half_width;
        assert_eq!(g.len() % 2, 1);
        assert!((g[h] - 20.0).abs() < 1e-12);
        for k in 0..h {
            assert_eq!(g[h - k], g[h + k]);
        }
        assert!((g[h + 32] - 5.862).abs() < 1e-3);
    }

    #[test]
    fn window_rejects_bad_sigma() {
        assert!(gaussian_window(&StftConfig::new(1024.0, 0.0, 1024)).is_err());
        assert!(gaussian_window(&StftConfig::new(1024.0, -1.0, 1024)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(1024.0, 0.05, 64).validate().is_err());
        assert!(StftConfig::new(1024.0, 0.05, 1024).with_hop(0).validate().is_err());
        let d = StftConfig::for_signal(1024, 1024.0);
        assert!(d.validate().is_ok());
        assert!((d.sigma - 0.04).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_dft() {
        let cfg = StftConfig::new(256.0, 0.05, 256);
        let x = random_complex(64, 3);
        let tf = stft(&x, &cfg).unwrap();
        let reference = naive(&x, &cfg);
        let worst = tf.data.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = StftConfig::new(1024.0, 0.02, 256);
        let tf = stft(&vec![Complex64::new(0.0, 0.0); 100], &cfg).unwrap();
        assert!(tf.data.iter().all(|c| c.norm() == 0.0));
        assert!(spectrogram(&tf).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_ridge_sits_on_its_bin_with_gain_magnitude() {
        let cfg = StftConfig::new(1024.0, 0.04, 1024);
        let k = 200;
        let x: Vec<Complex64> =
            (0..1024).map(|n| Complex64::from_polar(1.0, 2.0 * PI * (k * n) as f64 / 1024.0)).collect();
        let tf = stft(&x, &cfg).unwrap();
        let mag = spectrogram(&tf);
        let edge = cfg.edge();
        for n in edge..1024 - edge {
            let row = mag.slice(n);
            let arg = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(arg, k);
            assert!((row[k] / tf.gain - 1.0).abs() < 1e-6);
        }
        assert!((tf.gain / 1024.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn column_energy_matches_frame_energy() {
        let cfg = StftConfig::new(512.0, 0.05, 256);
        let x = random_complex(300, 11);
        let tf = stft(&x, &cfg).unwrap();
        let g = gaussian_window(&cfg).unwrap();
        let h = cfg.half_width as i64;
        for n in [0usize, 17, 150, 299] {
            let frame: f64 = (-h..=h)
                .filter_map(|m| {
                    let l = n as i64 + m;
                    (l >= 0 && l < x.len() as i64).then(|| (x[l as usize] * g[(m + h) as usize]).norm_sqr())
                })
                .sum();
            let col: f64 = tf.slice(n).iter().map(|c| c.norm_sqr()).sum();
            assert!((col / (cfg.nfft as f64 * frame) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_in_input() {
        let cfg = StftConfig::new(512.0, 0.03, 128);
        let x = random_complex(80, 1);
        let y = random_complex(80, 2);
        let (a, b) = (Complex64::new(0.7, -1.2), Complex64::new(-2.0, 0.5));
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (tx, ty, tm) = (stft(&x, &cfg).unwrap(), stft(&y, &cfg).unwrap(), stft(&mixed, &cfg).unwrap());
        let scale = tm.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..tm.data.len() {
            assert!((tm.data[i] - (a * tx.data[i] + b * ty.data[i])).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn shift_moves_columns_in_interior() {
        let cfg = StftConfig::new(512.0, 0.02, 128);
        let x = random_complex(200, 5);
        let d = 7;
        let mut shifted = vec![Complex64::new(0.0, 0.0); d];
        shifted.extend_from_slice(&x[..x.len() - d]);
        let a = spectrogram(&stft(&x, &cfg).unwrap());
        let b = spectrogram(&stft(&shifted, &cfg).unwrap());
        let h = cfg.half_width;
        for n in h + d..200 - h - d {
            for v in 0..cfg.nfft {
                assert!((a.get(n, v) - b.get(n + d, v)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hop_selects_every_hth_column() {
        let cfg = StftConfig::new(512.0, 0.02, 128);
        let x = random_complex(101, 9);
        let full = stft(&x, &cfg).unwrap();
        let sparse = stft(&x, &cfg.with_hop(4)).unwrap();
        assert_eq!(sparse.n_slices, 26);
        for n in 0..sparse.n_slices {
            assert_eq!(sparse.slice(n), full.slice(4 * n));
        }
    }

    #[test]
    fn streaming_argmax_agrees_with_grid() {
        let cfg = StftConfig::new(1024.0, 0.03, 256);
        let x = random_complex(120, 21);
        let tf = stft(&x, &cfg).unwrap();
        let bins = stft_argmax(&x, &cfg, 128).unwrap();
        for (n, &b) in bins.iter().enumerate() {
            let row = &tf.slice(n)[..128];
            let best = row.iter().map(|c| c.norm_sqr()).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(row[b].norm_sqr(), best);
        }
    }
}
