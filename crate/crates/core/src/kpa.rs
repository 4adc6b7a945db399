//! Kernel phase averaging.
//!
//! The signal is encoded as the phase of a unit-magnitude exponential,
//! `Phi[n] = 2 pi T mu sum_{m<=n} s[m]`, and each mode is read back by
//! averaging a two-term kernel phase over a lag window, with the kernel tuned
//! to that mode's IF. A refined IF is then taken from STFT peaks of the
//! recovered mode, and the two steps alternate.
//!
//! Kernel phase is built from phase differences only, so nothing is ever
//! wrapped. The default kernel is exact for a sampled tone at its pivot
//! frequency; [`KernelForm::Literal`] keeps the continuous-time coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ridge::{spread_knots, IFTrack, TrackSource};
use crate::signals::{analytic, TimeSeries};
use crate::tfa::{stft_argmax, stft_argmax_near, StftConfig};

/// A signal stored as its unwrapped cumulative encoding phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSignal {
    /// `phase[n] = 2 pi T mu sum_{m<=n} s[m]`.
    pub phase: Vec<f64>,
    /// Modulation index, Hz per signal unit.
    pub mu: f64,
    pub fs: f64,
}

impl EncodedSignal {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    /// `exp(j phase[n])`, unit magnitude by construction.
    pub fn exp(&self, n: usize) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.phase[n])
    }

    /// Phase at index `i >= -1`, with `phase[-1] = 0`.
    fn at(&self, i: i64) -> f64 {
        if i < 0 {
            0.0
        } else {
            self.phase[i as usize]
        }
    }

    /// Phase at any index under `policy`; `None` when `Skip` hits the outside.
    fn extended(&self, i: i64, policy: Boundary) -> Option<f64> {
        let last = self.phase.len() as i64 - 1;
        if (-1..=last).contains(&i) {
            return Some(self.at(i));
        }
        match policy {
            Boundary::Skip => None,
            Boundary::Clamp => Some(self.at(i.clamp(-1, last))),
            Boundary::Reflect => {
                if i < -1 {
                    // increments mirrored about sample 0
                    let j = (-i - 1).min(last);
                    Some(-(self.at(j) - self.at(0)))
                } else {
                    // increments mirrored about sample N-1
                    let j = (i - last).min(last);
                    Some(self.at(last) + self.at(last - 1) - self.at(last - 1 - j))
                }
            }
        }
    }
}

/// Largest `mu` that keeps the encoded IF strictly inside Nyquist.
pub fn max_admissible_mu(x: &TimeSeries) -> f64 {
    let peak = x.max_abs();
    if peak == 0.0 {
        f64::INFINITY
    } else {
        x.fs / (2.0 * peak)
    }
}

/// Default modulation index `fs / (8 max|s|)`; 1 for an all-zero signal.
pub fn auto_mu(x: &TimeSeries) -> f64 {
    let peak = x.max_abs();
    if peak == 0.0 {
        1.0
    } else {
        x.fs / (8.0 * peak)
    }
}

/// Encodes `x` with modulation index `mu`.
pub fn encode(x: &TimeSeries, mu: f64) -> Result<EncodedSignal> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig(format!("modulation index must be positive, got {mu}")));
    }
    let limit = max_admissible_mu(x);
    if mu >= limit {
        return Err(Error::Range(format!(
            "modulation index {mu} puts the encoded IF past Nyquist; it must stay below {limit}"
        )));
    }
    let step = 2.0 * PI * mu / x.fs;
    let mut acc = 0.0;
    let phase = x
        .samples
        .iter()
        .map(|v| {
            acc += v;
            step * acc
        })
        .collect();
    Ok(EncodedSignal { phase, mu, fs: x.fs })
}

/// How lags that reach past the signal ends are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Mirror the signal about its first and last samples.
    #[default]
    Reflect,
    /// Hold the cumulative phase flat outside the signal.
    Clamp,
    /// Drop lags that leave the signal.
    Skip,
}

/// Kernel coefficient set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// Sampled-tone exact weights on half-sample-centered phase differences.
    #[default]
    Exact,
    /// Continuous-time weights `pi f l T sin(2 pi f l T)`, `pi f l T cos(2 pi f l T)`
    /// on plain phase differences.
    Literal,
}

/// Lags and exponents of the two-term kernel at pivot `f` and lag `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCoefficients {
    pub a1: i64,
    pub a2: i64,
    pub b1: f64,
    pub b2: f64,
}

/// Quarter-period shift `round(fs / 4f)`, at least 1.
pub fn quarter_shift(f: f64, fs: f64) -> i64 {
    ((fs / (4.0 * f)).round() as i64).max(1)
}

impl KernelCoefficients {
    /// Continuous-time weights.
    pub fn literal(f: f64, l: i64, fs: f64) -> Self {
        let x = 2.0 * PI * f * l as f64 / fs;
        let a = PI * f * l as f64 / fs;
        Self { a1: 0, a2: quarter_shift(f, fs), b1: a * x.sin(), b2: a * x.cos() }
    }

    /// Weights that make the kernel phase exactly `2 pi l T mu x[n]` for a
    /// sampled tone at `f`, whatever the rounding of the quarter shift.
    /// They tend to [`KernelCoefficients::literal`] as `f T -> 0`.
    pub fn exact(f: f64, l: i64, fs: f64) -> Self {
        let w = 2.0 * PI * f / fs;
        let a2 = quarter_shift(f, fs);
        let phi = w * a2 as f64;
        let lf = l as f64;
        let t = lf * (w / 2.0).tan();
        let (s, c) = (w * lf).sin_cos();
        Self { a1: 0, a2, b1: t * (s - c / phi.tan()), b2: t * c / phi.sin() }
    }

    pub fn for_form(form: KernelForm, f: f64, l: i64, fs: f64) -> Self {
        match form {
            KernelForm::Exact => Self::exact(f, l, fs),
            KernelForm::Literal => Self::literal(f, l, fs),
        }
    }
}

/// `Phi[n+m] - Phi[n-m]` for the literal kernel, or its half-sample-centered
/// version `(Phi[n+m] + Phi[n+m-1])/2 - (Phi[n-m] + Phi[n-m-1])/2`.
fn phase_difference(z: &EncodedSignal, n: i64, m: i64, form: KernelForm, policy: Boundary) -> Option<f64> {
    match form {
        KernelForm::Literal => Some(z.extended(n + m, policy)? - z.extended(n - m, policy)?),
        KernelForm::Exact => {
            let hi = z.extended(n + m, policy)? + z.extended(n + m - 1, policy)?;
            let lo = z.extended(n - m, policy)? + z.extended(n - m - 1, policy)?;
            Some(0.5 * (hi - lo))
        }
    }
}

fn kernel_phase_with(
    z: &EncodedSignal,
    n: usize,
    l: i64,
    f: f64,
    form: KernelForm,
    policy: Boundary,
) -> Option<f64> {
    let k = KernelCoefficients::for_form(form, f, l, z.fs);
    let n = n as i64;
    let d1 = phase_difference(z, n, l + k.a1, form, policy)?;
    let d2 = phase_difference(z, n, l + k.a2, form, policy)?;
    Some(k.b1 * d1 + k.b2 * d2)
}

/// Unwrapped phase of the kernel at sample `n`, lag `l`, pivot `f` Hz,
/// using the exact kernel and reflecting boundaries.
pub fn kernel_phase(z: &EncodedSignal, n: usize, l: i64, f: f64) -> Result<f64> {
    check_pivot(f)?;
    if l == 0 {
        return Err(Error::InvalidConfig("lag 0 is not part of the kernel".into()));
    }
    Ok(kernel_phase_with(z, n, l, f, KernelForm::Exact, Boundary::Reflect).unwrap_or(0.0))
}

fn check_pivot(f: f64) -> Result<()> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(Error::Range(format!("pivot frequency must be positive, got {f}")))
    }
}

/// How the modulation index is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuPolicy {
    /// `fs / (8 max|s|)`.
    #[default]
    Auto,
    Fixed(f64),
}

/// KPA settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpaConfig {
    /// Lag window length (even); lags run over `+-1 ..= +-L/2`.
    pub window_len: usize,
    /// Extract/refine rounds.
    pub iterations: usize,
    pub mu: MuPolicy,
    /// Pick the window per mode from its estimated chirp rate and `eps2`.
    pub adaptive_window: bool,
    /// Bias budget for the adaptive window.
    pub eps2: f64,
    /// Upper bound for the adaptive window.
    pub max_window_len: usize,
    pub boundary: Boundary,
    pub kernel: KernelForm,
    /// Peak search half-band around the previous track when refining, bins; 0 searches everywhere.
    pub refine_half_band: usize,
}

impl Default for KpaConfig {
    fn default() -> Self {
        Self {
            window_len: 32,
            iterations: 3,
            mu: MuPolicy::Auto,
            adaptive_window: false,
            eps2: 1e-2,
            max_window_len: 256,
            boundary: Boundary::Reflect,
            kernel: KernelForm::Exact,
            refine_half_band: 30,
        }
    }
}

impl KpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || !self.window_len.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "window length must be even and at least 2, got {}",
                self.window_len
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("at least one KPA iteration is required".into()));
        }
        if !(self.eps2 > 0.0) {
            return Err(Error::InvalidConfig(format!("eps2 must be positive, got {}", self.eps2)));
        }
        if self.max_window_len < 2 {
            return Err(Error::InvalidConfig("max_window_len must be at least 2".into()));
        }
        if let MuPolicy::Fixed(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidConfig(format!("modulation index must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    pub fn mu_for(&self, x: &TimeSeries) -> f64 {
        match self.mu {
            MuPolicy::Auto => auto_mu(x),
            MuPolicy::Fixed(mu) => mu,
        }
    }
}

fn warn_above_quarter(track: &IFTrack, fs: f64) {
    if let Some(f) = track.freqs_hz.iter().copied().find(|f| *f > fs / 4.0) {
        log::info!(
            "track reaches {f:.1} Hz, above fs/4 = {:.1} Hz; the quarter-period shift rounds to 1 sample",
            fs / 4.0
        );
    }
}

/// One mode read off the encoded signal with window length `window_len`.
pub fn extract_with_window(
    z: &EncodedSignal,
    track: &IFTrack,
    window_len: usize,
    form: KernelForm,
    policy: Boundary,
) -> Result<TimeSeries> {
    if track.len() != z.len() {
        return Err(Error::LengthMismatch { expected: z.len(), found: track.len() });
    }
    if let Some(f) = track.freqs_hz.iter().copied().find(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::Range(format!("track frequencies must be positive, found {f}")));
    }
    if window_len < 2 || !window_len.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "window length must be even and at least 2, got {window_len}"
        )));
    }
    warn_above_quarter(track, z.fs);
    let half = (window_len / 2) as i64;
    let scale = 2.0 * PI * z.mu / z.fs;
    let samples = track
        .freqs_hz
        .iter()
        .enumerate()
        .map(|(n, &f)| {
            let mut sum = 0.0;
            let mut used = 0usize;
            for l in (-half..=half).filter(|l| *l != 0) {
                if let Some(p) = kernel_phase_with(z, n, l, f, form, policy) {
                    sum += p / (scale * l as f64);
                    used += 1;
                }
            }
            if used == 0 {
                0.0
            } else {
                sum / used as f64
            }
        })
        .collect();
    TimeSeries::new(samples, z.fs)
}

/// One mode read off the encoded signal, pivoting on `track[n]` at each sample.
pub fn kpa_extract_mode(z: &EncodedSignal, track: &IFTrack, cfg: &KpaConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    extract_with_window(z, track, window_for(track, cfg, z.fs), cfg.kernel, cfg.boundary)
}

/// Sum of per-track extractions.
pub fn kpa_extract_sum(z: &EncodedSignal, tracks: &[IFTrack], cfg: &KpaConfig) -> Result<TimeSeries> {
    let mut total = vec![0.0; z.len()];
    for track in tracks {
        let mode = kpa_extract_mode(z, track, cfg)?;
        for (t, v) in total.iter_mut().zip(&mode.samples) {
            *t += v;
        }
    }
    TimeSeries::new(total, z.fs)
}

fn window_for(track: &IFTrack, cfg: &KpaConfig, fs: f64) -> usize {
    if !cfg.adaptive_window || track.len() < 8 {
        return cfg.window_len;
    }
    let r0 = estimate_chirp_rate(track, fs);
    select_window_length(r0, cfg.eps2, fs, cfg.max_window_len)
}

/// Per-sample IF from STFT peaks of the analytic version of `mode`.
///
/// Peaks are searched over `[0, nfft/2)`. With `hop > 1` the per-slice bins are
/// interpolated back to every sample. An all-zero mode gives bin 0 everywhere
/// and sets the `degenerate` flag.
pub fn refine_if(mode: &TimeSeries, stft_cfg: &StftConfig) -> Result<IFTrack> {
    refine_with(mode, stft_cfg, None)
}

/// [`refine_if`] with each slice's peak searched only within `half_band`
/// bins of `prior`.
pub fn refine_if_near(mode: &TimeSeries, stft_cfg: &StftConfig, prior: &IFTrack, half_band: usize) -> Result<IFTrack> {
    if prior.len() != mode.len() {
        return Err(Error::LengthMismatch { expected: mode.len(), found: prior.len() });
    }
    refine_with(mode, stft_cfg, Some((prior, half_band)))
}

fn refine_with(mode: &TimeSeries, stft_cfg: &StftConfig, near: Option<(&IFTrack, usize)>) -> Result<IFTrack> {
    if mode.is_empty() {
        return Err(Error::Empty("mode samples"));
    }
    let n = mode.len();
    if mode.samples.iter().all(|v| *v == 0.0) {
        log::warn!("refine_if: mode carries no energy; returning bin 0");
        let mut t = IFTrack::from_bins(vec![0; n], stft_cfg.fs, stft_cfg.nfft, TrackSource::Refined);
        t.degenerate = true;
        return Ok(t);
    }
    let z = analytic(&mode.samples);
    let per_slice = match near {
        None => stft_argmax(&z, stft_cfg, stft_cfg.nfft / 2)?,
        Some((prior, half)) => {
            let scale = stft_cfg.nfft as f64 / stft_cfg.fs;
            let centers: Vec<usize> = (0..n)
                .step_by(stft_cfg.hop)
                .map(|t| (prior.freqs_hz[t] * scale).round().max(0.0) as usize)
                .collect();
            stft_argmax_near(&z, stft_cfg, &centers, half, stft_cfg.nfft / 2)?
        }
    };
    let bins = if stft_cfg.hop == 1 {
        per_slice
    } else {
        let at: Vec<usize> = (0..per_slice.len()).map(|k| k * stft_cfg.hop).collect();
        spread_knots(&at, &per_slice, n)
    };
    Ok(IFTrack::from_bins(bins, stft_cfg.fs, stft_cfg.nfft, TrackSource::Refined))
}

/// Result of the extract/refine loop.
#[derive(Debug, Clone)]
pub struct Enhancement {
    pub tracks: Vec<IFTrack>,
    pub modes: Vec<TimeSeries>,
    pub mu: f64,
    /// Lag window actually used per mode.
    pub window_lens: Vec<usize>,
}

/// `cfg.iterations` rounds of: extract every mode with the current tracks,
/// then re-estimate each track from its extracted mode.
pub fn enhance(
    s: &TimeSeries,
    initial: &[IFTrack],
    cfg: &KpaConfig,
    stft_cfg: &StftConfig,
) -> Result<Enhancement> {
    cfg.validate()?;
    if initial.is_empty() {
        return Err(Error::Empty("initial IF tracks"));
    }
    let mu = cfg.mu_for(s);
    let z = encode(s, mu)?;
    let mut tracks: Vec<IFTrack> = initial.to_vec();
    let mut modes = Vec::new();
    let mut window_lens = Vec::new();
    for round in 0..cfg.iterations {
        modes.clear();
        window_lens.clear();
        for track in tracks.iter_mut() {
            lift_dc(track, stft_cfg.bin_width());
            let l = window_for(track, cfg, s.fs);
            modes.push(extract_with_window(&z, track, l, cfg.kernel, cfg.boundary)?);
            window_lens.push(l);
        }
        tracks = modes
            .iter()
            .zip(&tracks)
            .map(|(m, prior)| match cfg.refine_half_band {
                0 => refine_if(m, stft_cfg),
                half => refine_if_near(m, stft_cfg, prior, half),
            })
            .collect::<Result<_>>()?;
        log::debug!("kpa: round {} done for {} modes", round + 1, tracks.len());
    }
    Ok(Enhancement { tracks, modes, mu, window_lens })
}

/// The kernel needs a positive pivot; DC entries move up to `floor` Hz.
fn lift_dc(track: &mut IFTrack, floor: f64) {
    let mut lifted = 0;
    for f in track.freqs_hz.iter_mut().filter(|f| **f < floor) {
        *f = floor;
        lifted += 1;
    }
    if lifted > 0 {
        log::warn!("kpa: {lifted} track samples below {floor:.3} Hz raised to it");
    }
}

/// Largest even `L <= cap` with `pi |r0| (L/2)^2 / fs^2 < eps2`; `cap` when `r0 = 0`.
pub fn select_window_length(r0: f64, eps2: f64, fs: f64, cap: usize) -> usize {
    let r = r0.abs();
    if r == 0.0 {
        return cap;
    }
    let fits = |l: usize| PI * r * ((l / 2) as f64).powi(2) / (fs * fs) < eps2;
    let bound = 2.0 * fs * (eps2 / (PI * r)).sqrt();
    let mut l = (bound.min(cap as f64).floor() as usize) & !1;
    while l > 2 && !fits(l) {
        l -= 2;
    }
    l.max(2)
}

/// Typical chirp rate of a per-sample track, Hz/s: median absolute slope of
/// a moving-average-smoothed copy.
pub fn estimate_chirp_rate(track: &IFTrack, fs: f64) -> f64 {
    let f = &track.freqs_hz;
    if f.len() < 8 {
        return 0.0;
    }
    let mut w = (f.len() / 8).clamp(3, 65);
    if w.is_multiple_of(2) {
        w -= 1;
    }
    let mut smooth = Vec::with_capacity(f.len() - w + 1);
    let mut acc: f64 = f[..w].iter().sum();
    smooth.push(acc / w as f64);
    for k in w..f.len() {
        acc += f[k] - f[k - w];
        smooth.push(acc / w as f64);
    }
    let mut slopes: Vec<f64> = smooth.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    if slopes.is_empty() {
        return 0.0;
    }
    let mid = slopes.len() / 2;
    let (_, m, _) = slopes.select_nth_unstable_by(mid, f64::total_cmp);
    // round away summation noise on flat tracks
    let r = *m * fs;
    if r < 1e-9 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synthesize_mode, ModeSpec};

    fn tone(f: f64, rho: f64, theta: f64, n: usize, fs: f64) -> TimeSeries {
        let spec = ModeSpec::lfm(f, 0.0).with_amplitude(rho).with_phase(theta);
        synthesize_mode(&spec, n, fs).unwrap().0
    }

    #[test]
    fn encode_zero_and_unit_magnitude() {
        let z = encode(&TimeSeries::new(vec![0.0; 16], 1024.0).unwrap(), 3.0).unwrap();
        assert!(z.phase.iter().all(|p| *p == 0.0));
        let x = tone(100.0, 1.0, 0.2, 256, 1024.0);
        let z = encode(&x, 50.0).unwrap();
        assert!((0..z.len()).all(|n| (z.exp(n).norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn encoded_if_is_mu_times_signal() {
        let x = tone(100.0, 1.0, 0.0, 512, 1024.0);
        let mu = 40.0;
        let z = encode(&x, mu).unwrap();
        for n in 1..512 {
            let f = (z.phase[n] - z.phase[n - 1]) * 1024.0 / (2.0 * PI);
            assert!((f - mu * x.samples[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn encode_rejects_nyquist_violation() {
        let x = tone(100.0, 2.0, 0.0, 64, 1024.0);
        let err = encode(&x, 300.0).unwrap_err().to_string();
        assert!(err.contains("256"), "{err}");
    }

    #[test]
    fn exact_kernel_recovers_tone_at_every_lag() {
        let fs = 1024.0;
        let x = tone(200.0, 1.3, 0.9, 1024, fs);
        let z = encode(&x, 30.0).unwrap();
        for n in [100usize, 400, 777] {
            for l in [1i64, 2, 5, 16, -3, -16, 40] {
                let v = kernel_phase(&z, n, l, 200.0).unwrap() / (2.0 * PI * l as f64 / fs * 30.0);
                assert!((v - x.samples[n]).abs() < 1e-6, "n={n} l={l}: {v} vs {}", x.samples[n]);
            }
        }
    }

    #[test]
    fn kernel_ratio_is_even_in_lag() {
        let fs = 1024.0;
        let z = encode(&tone(150.0, 1.0, 0.4, 512, fs), 20.0).unwrap();
        for l in 1..20i64 {
            let a = kernel_phase(&z, 250, l, 150.0).unwrap() / l as f64;
            let b = kernel_phase(&z, 250, -l, 150.0).unwrap() / -l as f64;
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_weights_approach_literal_weights_at_low_frequency() {
        let fs = 1024.0;
        for l in [1i64, 4, 9] {
            // a pivot whose quarter period is an exact number of samples
            let f = fs / 4.0 / 64.0;
            let e = KernelCoefficients::exact(f, l, fs);
            let c = KernelCoefficients::literal(f, l, fs);
            assert_eq!(e.a2, 64);
            assert!((e.b1 - c.b1).abs() < 1e-4 * (1.0 + c.b1.abs()));
            assert!((e.b2 - c.b2).abs() < 1e-4 * (1.0 + c.b2.abs()));
        }
    }

    #[test]
    fn zero_signal_gives_zero_kernel() {
        let z = encode(&TimeSeries::new(vec![0.0; 64], 1024.0).unwrap(), 1.0).unwrap();
        for l in [1, -2, 7] {
            assert_eq!(kernel_phase(&z, 10, l, 100.0).unwrap(), 0.0);
        }
        assert!(kernel_phase(&z, 10, 1, 0.0).is_err());
        assert!(kernel_phase(&z, 10, 0, 10.0).is_err());
    }

    #[test]
    fn extraction_is_mu_invariant() {
        let x = tone(200.0, 1.0, 0.3, 512, 1024.0);
        let track = IFTrack::constant(200.0, 512, TrackSource::Truth);
        let cfg = KpaConfig::default();
        let a = kpa_extract_mode(&encode(&x, 20.0).unwrap(), &track, &cfg).unwrap();
        let b = kpa_extract_mode(&encode(&x, 40.0).unwrap(), &track, &cfg).unwrap();
        for (p, q) in a.samples.iter().zip(&b.samples) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_policies_agree_in_the_interior() {
        let x = tone(120.0, 1.0, 0.0, 300, 1024.0);
        let z = encode(&x, 10.0).unwrap();
        let track = IFTrack::constant(120.0, 300, TrackSource::Truth);
        let out: Vec<TimeSeries> = [Boundary::Reflect, Boundary::Clamp, Boundary::Skip]
            .into_iter()
            .map(|b| extract_with_window(&z, &track, 16, KernelForm::Exact, b).unwrap())
            .collect();
        for n in 20..280 {
            assert!((out[0].samples[n] - out[1].samples[n]).abs() < 1e-12);
            assert!((out[0].samples[n] - out[2].samples[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_rejects_nonpositive_track() {
        let x = tone(120.0, 1.0, 0.0, 64, 1024.0);
        let z = encode(&x, 10.0).unwrap();
        let mut track = IFTrack::constant(120.0, 64, TrackSource::Truth);
        track.freqs_hz[5] = 0.0;
        assert!(matches!(kpa_extract_mode(&z, &track, &KpaConfig::default()), Err(Error::Range(_))));
    }

    #[test]
    fn refine_zero_mode_is_flagged() {
        let cfg = StftConfig::new(1024.0, 0.02, 256);
        let t = refine_if(&TimeSeries::new(vec![0.0; 100], 1024.0).unwrap(), &cfg).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.bins.unwrap(), vec![0; 100]);
    }

    #[test]
    fn refine_tone() {
        let cfg = StftConfig::new(1024.0, 0.04, 1024);
        let t = refine_if(&tone(200.0, 1.0, 0.0, 1024, 1024.0), &cfg).unwrap();
        let e = cfg.edge();
        assert!(t.freqs_hz[e..1024 - e].iter().all(|f| (f - 200.0).abs() <= 1.0));
        assert_eq!(t.source, TrackSource::Refined);
        let coarse = refine_if(&tone(200.0, 1.0, 0.0, 1024, 1024.0), &cfg.with_hop(8)).unwrap();
        assert_eq!(coarse.len(), 1024);
        assert!(coarse.freqs_hz[e..1024 - e].iter().all(|f| (f - 200.0).abs() <= 1.0));
    }

    #[test]
    fn window_length_rule() {
        assert_eq!(select_window_length(10.0, 1e-2, 1024.0, 1024), 36);
        assert_eq!(select_window_length(1.0, 1e-2, 1024.0, 1024), 114);
        assert_eq!(select_window_length(-10.0, 1e-2, 1024.0, 1024), 36);
        assert_eq!(select_window_length(0.0, 1e-2, 1024.0, 512), 512);
        assert_eq!(select_window_length(1.0, 1e-2, 1024.0, 64), 64);
        assert_eq!(select_window_length(1e9, 1e-2, 1024.0, 64), 2);
    }

    #[test]
    fn chirp_rate_cases() {
        assert_eq!(estimate_chirp_rate(&IFTrack::constant(5.0, 100, TrackSource::Initial), 1024.0), 0.0);
        let lfm = IFTrack::from_freqs((0..1024).map(|n| 100.0 + 50.0 * n as f64 / 1024.0).collect(), TrackSource::Truth);
        let r = estimate_chirp_rate(&lfm, 1024.0);
        assert!((r / 50.0 - 1.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn config_checks() {
        assert!(KpaConfig::default().validate().is_ok());
        assert!(KpaConfig { window_len: 31, ..Default::default() }.validate().is_err());
        assert!(KpaConfig { iterations: 0, ..Default::default() }.validate().is_err());
        assert!(KpaConfig { eps2: 0.0, ..Default::default() }.validate().is_err());
    }
}
