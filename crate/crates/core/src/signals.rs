//! Multi-mode FM test signals with ground truth.
//!
//! A signal is the sum of modes `rho[n] * cos(2*pi*T * sum_{k<=n} f[k] + theta)`
//! plus real white Gaussian noise at a requested SNR. Every generator returns
//! the exact per-sample IF it used so downstream estimators can be scored.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ridge::{IFTrack, TrackSource};

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a time series needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {fs}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sampling interval in seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.fs
    }

    /// Mean power `sum(x^2) / N`.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// IF law of a single mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeKind {
    /// `f(t) = f0 + rate * t`.
    Lfm { f0: f64, rate: f64 },
    /// `f(t) = carrier + depth * cos(2*pi*rate*t + mod_phase)`.
    Sfm {
        carrier: f64,
        depth: f64,
        rate: f64,
        #[serde(default)]
        mod_phase: f64,
    },
    /// Sinusoidal FM with envelope `amplitude * exp(-decay * t)`.
    DampedSfm {
        carrier: f64,
        depth: f64,
        rate: f64,
        #[serde(default)]
        mod_phase: f64,
        decay: f64,
    },
    /// Polynomial IF `f(t) = sum_k coeffs[k] * t^k`.
    NonlinearFm { coeffs: Vec<f64> },
}

/// One summand of the multi-mode model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub kind: ModeKind,
    /// Peak amplitude (initial amplitude for damped modes).
    pub amplitude: f64,
    /// Initial phase in radians.
    pub phase: f64,
}

impl ModeSpec {
    pub fn new(kind: ModeKind) -> Self {
        Self { kind, amplitude: 1.0, phase: 0.0 }
    }

    pub fn lfm(f0: f64, rate: f64) -> Self {
        Self::new(ModeKind::Lfm { f0, rate })
    }

    pub fn sfm(carrier: f64, depth: f64, rate: f64) -> Self {
        Self::new(ModeKind::Sfm { carrier, depth, rate, mod_phase: 0.0 })
    }

    pub fn damped_sfm(carrier: f64, depth: f64, rate: f64, decay: f64) -> Self {
        Self::new(ModeKind::DampedSfm { carrier, depth, rate, mod_phase: 0.0, decay })
    }

    pub fn nonlinear_fm(coeffs: Vec<f64>) -> Self {
        Self::new(ModeKind::NonlinearFm { coeffs })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Sets the modulation phase of SFM-type modes; no effect on other kinds.
    pub fn with_mod_phase(mut self, value: f64) -> Self {
        match &mut self.kind {
            ModeKind::Sfm { mod_phase, .. } | ModeKind::DampedSfm { mod_phase, .. } => *mod_phase = value,
            _ => {}
        }
        self
    }

    /// Instantaneous frequency in Hz at time `t` seconds.
    pub fn frequency_at(&self, t: f64) -> f64 {
        match &self.kind {
            ModeKind::Lfm { f0, rate } => f0 + rate * t,
            ModeKind::Sfm { carrier, depth, rate, mod_phase }
            | ModeKind::DampedSfm { carrier, depth, rate, mod_phase, .. } => {
                carrier + depth * (2.0 * PI * rate * t + mod_phase).cos()
            }
            ModeKind::NonlinearFm { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    /// Instantaneous amplitude at time `t` seconds.
    pub fn envelope_at(&self, t: f64) -> f64 {
        match &self.kind {
            ModeKind::DampedSfm { decay, .. } => self.amplitude * (-decay * t).exp(),
            _ => self.amplitude,
        }
    }

    pub fn frequency_track(&self, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|k| self.frequency_at(k as f64 / fs)).collect()
    }

    /// Generator phase `2*pi*T * sum_{k<=m} f[k] + theta`, unwrapped.
    pub fn phase_track(&self, n: usize, fs: f64) -> Vec<f64> {
        accumulate_phase(&self.frequency_track(n, fs), fs, self.phase)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mode amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidConfig("mode phase must be finite".into()));
        }
        if let ModeKind::DampedSfm { decay, .. } = self.kind {
            if !(decay >= 0.0 && decay.is_finite()) {
                return Err(Error::InvalidConfig(format!("decay must be nonnegative, got {decay}")));
            }
        }
        Ok(())
    }
}

fn accumulate_phase(freqs: &[f64], fs: f64, theta: f64) -> Vec<f64> {
    let step = 2.0 * PI / fs;
    let mut acc = 0.0;
    freqs
        .iter()
        .map(|f| {
            acc += f;
            step * acc + theta
        })
        .collect()
}

/// Additive white Gaussian noise request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Target SNR in dB; `+inf` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed }
    }

    pub fn none() -> Self {
        Self { snr_db: f64::INFINITY, seed: 0 }
    }

    pub fn is_disabled(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

/// Reference modes and IF laws behind a synthesized signal.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub tracks: Vec<IFTrack>,
    pub modes: Vec<TimeSeries>,
}

impl GroundTruth {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Noise-free sum of all modes.
    pub fn clean_sum(&self) -> Vec<f64> {
        let n = self.modes.first().map_or(0, |m| m.len());
        let mut sum = vec![0.0; n];
        for mode in &self.modes {
            for (s, v) in sum.iter_mut().zip(&mode.samples) {
                *s += v;
            }
        }
        sum
    }
}

/// Generates one mode and the exact IF track used to build it.
pub fn synthesize_mode(spec: &ModeSpec, n: usize, fs: f64) -> Result<(TimeSeries, IFTrack)> {
    spec.validate()?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidConfig(format!("sampling rate must be positive, got {fs}")));
    }
    let freqs = spec.frequency_track(n, fs);
    let nyquist = fs / 2.0;
    if let Some((k, f)) = freqs.iter().enumerate().find(|(_, f)| !(**f > 0.0 && **f < nyquist)) {
        return Err(Error::Range(format!(
            "instantaneous frequency {f:.3} Hz at sample {k} is outside (0, {nyquist}) Hz"
        )));
    }
    let phase = accumulate_phase(&freqs, fs, spec.phase);
    let samples = phase
        .iter()
        .enumerate()
        .map(|(k, p)| spec.envelope_at(k as f64 / fs) * p.cos())
        .collect();
    let series = TimeSeries::new(samples, fs)?;
    Ok((series, IFTrack::from_freqs(freqs, TrackSource::Truth)))
}

/// Draws `n` unit-variance Gaussian samples from a seeded stream.
pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Adds white Gaussian noise so that `10*log10(P_clean / P_noise)` equals the
/// requested SNR exactly; the drawn noise is rescaled to its target energy.
pub fn add_noise(clean: &[f64], noise: &NoiseSpec) -> Vec<f64> {
    if noise.is_disabled() {
        return clean.to_vec();
    }
    let draw = white_noise(clean.len(), noise.seed);
    let target = power(clean) / 10f64.powf(noise.snr_db / 10.0);
    let realized = power(&draw);
    let scale = if realized > 0.0 { (target / realized).sqrt() } else { 0.0 };
    clean.iter().zip(&draw).map(|(c, e)| c + scale * e).collect()
}

/// Sums the requested modes and adds noise at the requested SNR, measured
/// against the clean sum of all modes.
pub fn synthesize_multimode(
    specs: &[ModeSpec],
    noise: &NoiseSpec,
    n: usize,
    fs: f64,
) -> Result<(TimeSeries, GroundTruth)> {
    if specs.is_empty() {
        return Err(Error::Empty("mode specification list"));
    }
    let mut tracks = Vec::with_capacity(specs.len());
    let mut modes = Vec::with_capacity(specs.len());
    for spec in specs {
        let (mode, track) = synthesize_mode(spec, n, fs)?;
        tracks.push(track);
        modes.push(mode);
    }
    let truth = GroundTruth { tracks, modes };
    let noisy = add_noise(&truth.clean_sum(), noise);
    Ok((TimeSeries::new(noisy, fs)?, truth))
}

/// Discrete analytic signal: negative frequencies zeroed, positive doubled.
/// The real part is the input, bit for bit.
pub fn analytic(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    buf.iter()
        .zip(x)
        .map(|(c, &re)| Complex64::new(re, c.im * norm))
        .collect()
}

/// Named test signals modeled on three typical multi-mode scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Five closely-spaced modes: LFM, two SFM, damped SFM, cubic-IF FM.
    Fig1a,
    /// Two crossing, weakly-modulated SFM modes.
    Fig1b,
    /// Two crossing, strongly-modulated SFM modes.
    Fig1c,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig1a, Preset::Fig1b, Preset::Fig1c];

    /// Default sample count for the preset.
    pub const N: usize = 1024;
    /// Default sampling rate in Hz.
    pub const FS: f64 = 1024.0;

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
        }
    }

    /// Mode parameters, laid out for `fs = 1024 Hz` over one second.
    pub fn specs(self) -> Vec<ModeSpec> {
        match self {
            Preset::Fig1a => vec![
                ModeSpec::lfm(40.0, 60.0).with_phase(0.3),
                ModeSpec::sfm(170.0, 15.0, 2.0).with_phase(1.1),
                ModeSpec::sfm(255.0, 15.0, 1.5).with_mod_phase(PI / 2.0).with_phase(2.0),
                ModeSpec::damped_sfm(340.0, 12.0, 1.0, 0.4).with_amplitude(1.5).with_phase(0.7),
                // IF = 430 + 25 * (2t - 1)^3, expanded in powers of t.
                ModeSpec::nonlinear_fm(vec![405.0, 150.0, -300.0, 200.0]).with_phase(4.0),
            ],
            Preset::Fig1b => vec![
                ModeSpec::sfm(250.0, 60.0, 1.0).with_mod_phase(-PI / 2.0),
                ModeSpec::sfm(250.0, 60.0, 1.0)
                    .with_mod_phase(PI / 2.0)
                    .with_amplitude(0.8)
                    .with_phase(1.3),
            ],
            Preset::Fig1c => vec![
                ModeSpec::sfm(250.0, 110.0, 1.0).with_mod_phase(-PI / 2.0),
                ModeSpec::sfm(250.0, 110.0, 1.0)
                    .with_mod_phase(PI / 2.0)
                    .with_amplitude(0.8)
                    .with_phase(2.1),
            ],
        }
    }

    pub fn synthesize(self, noise: &NoiseSpec) -> Result<(TimeSeries, GroundTruth)> {
        synthesize_multimode(&self.specs(), noise, Self::N, Self::FS)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown preset '{s}' (expected fig1a, fig1b or fig1c)")))
    }
}
