//! Closed-form oracles for KPA mode separation and bias.
//!
//! Every expectation over lags is the plain mean over `l = +-1 ..= +-L/2`,
//! the same lag set the extractor uses.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpa::{quarter_shift, KernelCoefficients};

/// How the quarter-period shift enters the interference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftRule {
    /// `round(fs / 4 f_i)` samples, as the kernel uses.
    #[default]
    Rounded,
    /// `fs / 4 f_i` without rounding: an exact quarter period.
    Exact,
}

/// A competing mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Interference on mode `i` from the listed other modes at sample `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceQuery {
    pub f_i: f64,
    pub others: Vec<Interferer>,
    pub n: i64,
    pub window_len: usize,
    pub fs: f64,
    #[serde(default)]
    pub shift: ShiftRule,
}

impl InterferenceQuery {
    /// Two-mode query with the interferer `f_delta` above `f_i`.
    pub fn pair(f_i: f64, f_delta: f64, window_len: usize, fs: f64) -> Self {
        Self {
            f_i,
            others: vec![Interferer { freq: f_i + f_delta, amplitude: 1.0, phase: 0.0 }],
            n: 0,
            window_len,
            fs,
            shift: ShiftRule::Rounded,
        }
    }

    pub fn with_shift(mut self, shift: ShiftRule) -> Self {
        self.shift = shift;
        self
    }

    fn validate(&self) -> Result<()> {
        let nyq = self.fs / 2.0;
        let ok = |f: f64| f > 0.0 && f < nyq;
        if !ok(self.f_i) || self.others.iter().any(|o| !ok(o.freq)) {
            return Err(Error::Range(format!("frequencies must lie in (0, {nyq}) Hz")));
        }
        if self.window_len < 2 {
            return Err(Error::InvalidConfig("window length must be at least 2".into()));
        }
        Ok(())
    }

    fn shift_samples(&self) -> f64 {
        match self.shift {
            ShiftRule::Rounded => quarter_shift(self.f_i, self.fs) as f64,
            ShiftRule::Exact => self.fs / (4.0 * self.f_i),
        }
    }

    fn weight(&self, o: &Interferer) -> f64 {
        o.amplitude * (2.0 * PI * o.freq * self.n as f64 / self.fs + o.phase).cos()
    }
}

fn lag_half(window_len: usize) -> i64 {
    (window_len / 2) as i64
}

/// Lag-mean factor multiplying `A_i'` in the full interference expression.
fn exact_factor(f_i: f64, f_o: f64, a2: f64, half: i64, fs: f64) -> f64 {
    if half == 0 {
        return 0.0;
    }
    let t = 1.0 / fs;
    let ratio = f_i / f_o;
    let mut sum = 0.0;
    for l in (-half..=half).filter(|l| *l != 0) {
        let lf = l as f64;
        let a = 2.0 * PI * f_i * lf * t;
        let b = 2.0 * PI * f_o * lf * t;
        sum += ratio * (a.sin() * b.sin() + a.cos() * (2.0 * PI * f_o * t * (lf + a2)).sin());
    }
    sum / (2 * half) as f64
}

/// Mean of `cos(2 pi f_delta l T)` over the lag window.
pub fn lag_mean_cos(f_delta: f64, window_len: usize, fs: f64) -> f64 {
    let half = lag_half(window_len);
    if half == 0 {
        return 0.0;
    }
    // even in l: average the positive half
    (1..=half).map(|l| (2.0 * PI * f_delta * l as f64 / fs).cos()).sum::<f64>() / half as f64
}

/// Interference amplitude with the full two-term expression.
pub fn interference_exact(q: &InterferenceQuery) -> Result<f64> {
    q.validate()?;
    let a2 = q.shift_samples();
    let half = lag_half(q.window_len);
    Ok(q.others.iter().map(|o| q.weight(o) * exact_factor(q.f_i, o.freq, a2, half, q.fs)).sum())
}

/// Small-separation form `sum A_i' (f_i / f_i') mean cos(2 pi f_delta l T)`.
pub fn interference_approx(q: &InterferenceQuery) -> Result<f64> {
    q.validate()?;
    Ok(q.others
        .iter()
        .map(|o| q.weight(o) * q.f_i / o.freq * lag_mean_cos(q.f_i - o.freq, q.window_len, q.fs))
        .sum())
}

/// Cross-mode leakage of the implemented extractor (exact kernel, interior
/// samples): what a tone at `f_i'` contributes when extracting at pivot `f_i`.
pub fn interference_discrete(q: &InterferenceQuery) -> Result<f64> {
    q.validate()?;
    let half = lag_half(q.window_len);
    let mut total = 0.0;
    for o in &q.others {
        let w = 2.0 * PI * o.freq / q.fs;
        let cot = 1.0 / (w / 2.0).tan();
        let mut sum = 0.0;
        for l in (-half..=half).filter(|l| *l != 0) {
            let k = KernelCoefficients::exact(q.f_i, l, q.fs);
            let lf = l as f64;
            sum += cot * (k.b1 * (w * lf).sin() + k.b2 * (w * (lf + k.a2 as f64)).sin()) / lf;
        }
        total += q.weight(o) * sum / (2 * half) as f64;
    }
    Ok(total)
}

/// Whether `|mean cos(2 pi f_delta l T)| < eps1` over the lag window.
pub fn separation_check(f_delta: f64, window_len: usize, fs: f64, eps1: f64) -> Result<bool> {
    if window_len < 2 {
        return Err(Error::InvalidConfig("window length must be at least 2".into()));
    }
    Ok(lag_mean_cos(f_delta, window_len, fs).abs() < eps1)
}

/// Bias query for a unit LFM segment `cos(2 pi f0 nT + pi r0 n^2 T^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasQuery {
    pub f0: f64,
    pub r0: f64,
    /// IF-error draws, Hz; empty means no error.
    pub deltas: Vec<f64>,
    pub window_len: usize,
    pub fs: f64,
    pub n: i64,
}

impl BiasQuery {
    pub fn new(f0: f64, r0: f64, window_len: usize, fs: f64) -> Self {
        Self { f0, r0, deltas: Vec::new(), window_len, fs, n: 0 }
    }

    pub fn at(mut self, n: i64) -> Self {
        self.n = n;
        self
    }

    pub fn with_deltas(mut self, deltas: Vec<f64>) -> Self {
        self.deltas = deltas;
        self
    }

    fn base_phase(&self, n: f64) -> f64 {
        let t = 1.0 / self.fs;
        2.0 * PI * self.f0 * n * t + PI * self.r0 * n * n * t * t
    }

    /// Clean sample `x[n]`.
    pub fn signal(&self) -> f64 {
        self.base_phase(self.n as f64).cos()
    }

    fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(Error::Range(format!("f0 must be positive, got {}", self.f0)));
        }
        if self.window_len < 2 {
            return Err(Error::InvalidConfig("window length must be at least 2".into()));
        }
        Ok(())
    }
}

/// `sigma_e`-Gaussian IF errors, drawn in `+-` pairs so their mean is exactly zero.
pub fn gaussian_if_errors(sigma_e: f64, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, sigma_e).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(draws + 1);
    while out.len() < draws {
        let d: f64 = normal.sample(&mut rng);
        out.push(d);
        out.push(-d);
    }
    out.truncate(draws);
    Ok(out)
}

/// Bias from IF error on a constant-IF mode:
/// `x[n] E{1 - (f_hat / f0) mean cos(2 pi Delta l T)}`, `f_hat = f0 + Delta`.
pub fn bias_constant_if(q: &BiasQuery) -> Result<f64> {
    q.validate()?;
    if q.r0 != 0.0 {
        return Err(Error::InvalidConfig(format!("constant-IF bias needs r0 = 0, got {}", q.r0)));
    }
    if q.deltas.is_empty() {
        return Ok(0.0);
    }
    let mean: f64 = q
        .deltas
        .iter()
        .map(|d| 1.0 - (q.f0 + d) / q.f0 * lag_mean_cos(*d, q.window_len, q.fs))
        .sum::<f64>()
        / q.deltas.len() as f64;
    Ok(q.signal() * mean)
}

/// Chirp-induced bias with exact IF knowledge; `exact` picks the two-term
/// expression, otherwise the single-term approximation.
pub fn bias_lfm(q: &BiasQuery, exact: bool) -> Result<f64> {
    q.validate()?;
    if q.deltas.iter().any(|d| *d != 0.0) {
        return Err(Error::InvalidConfig("chirp bias assumes a perfect IF (Delta = 0)".into()));
    }
    let half = lag_half(q.window_len);
    let s = lfm_lag_sums(q, half, exact);
    Ok(q.signal() - s[half as usize - 1] / half as f64)
}

/// Running lag sums: entry `k` is the sum over `l = 1..=k+1` of the
/// pair-averaged `(+l, -l)` term, for `k < half`.
fn lfm_lag_sums(q: &BiasQuery, half: i64, exact: bool) -> Vec<f64> {
    let t = 1.0 / q.fs;
    let n = q.n as f64;
    let f = q.f0 + q.r0 * n * t;
    let base = q.base_phase(n);
    let a2 = quarter_shift(f, q.fs) as f64;
    let term = |l: f64| -> f64 {
        let rl = q.r0 * l * t;
        let d1 = f * f / ((f + rl) * (f - rl));
        let first = d1 * (base + PI * q.r0 * l * l * t * t).cos();
        if !exact {
            return first;
        }
        let ra = rl + q.r0 * t * a2;
        let d2 = f * f / ((f + ra) * (f - ra));
        let s = (2.0 * PI * l * t * f).sin();
        let c2 = 1.0 - s * s;
        s * s * first + c2 * d2 * (base + PI * q.r0 * t * t * (l + a2).powi(2)).cos()
    };
    let mut acc = 0.0;
    (1..=half)
        .map(|l| {
            let lf = l as f64;
            acc += 0.5 * (term(lf) + term(-lf));
            acc
        })
        .collect()
}

/// Mean absolute bias over `n in [0, n_samples)` for each window length in `lens`.
pub fn mean_absolute_bias(
    f0: f64,
    r0: f64,
    fs: f64,
    n_samples: usize,
    lens: &[usize],
    exact: bool,
) -> Result<Vec<f64>> {
    let max_len = lens.iter().copied().max().unwrap_or(0);
    if max_len < 2 || lens.iter().any(|l| *l < 2) {
        return Err(Error::InvalidConfig("window lengths must be at least 2".into()));
    }
    let half_max = lag_half(max_len);
    let mut out = vec![0.0; lens.len()];
    for n in 0..n_samples {
        let q = BiasQuery::new(f0, r0, max_len, fs).at(n as i64);
        q.validate()?;
        let sums = lfm_lag_sums(&q, half_max, exact);
        let x = q.signal();
        for (o, &len) in out.iter_mut().zip(lens) {
            let h = len / 2;
            *o += (x - sums[h - 1] / h as f64).abs();
        }
    }
    Ok(out.into_iter().map(|v| v / n_samples as f64).collect())
}

/// Interference amplitude curves over window lengths `2..=max_len`:
/// `(L, |exact|, |approx|)` for one interferer of unit amplitude at its peak.
pub fn interference_curve(
    f_i: f64,
    f_delta: f64,
    fs: f64,
    max_len: usize,
    shift: ShiftRule,
) -> Result<Vec<(usize, f64, f64)>> {
    let q = InterferenceQuery::pair(f_i, f_delta, max_len.max(2), fs).with_shift(shift);
    q.validate()?;
    let f_o = f_i + f_delta;
    let t = 1.0 / fs;
    let a2 = q.shift_samples();
    let ratio = f_i / f_o;
    let (mut ex, mut ap) = (0.0, 0.0);
    let mut partial = Vec::with_capacity(max_len / 2);
    for l in 1..=lag_half(max_len) {
        let lf = l as f64;
        let a = 2.0 * PI * f_i * lf * t;
        let b = 2.0 * PI * f_o * lf * t;
        for s in [lf, -lf] {
            let (a, b) = (a * s.signum(), b * s.signum());
            ex += ratio * (a.sin() * b.sin() + a.cos() * (2.0 * PI * f_o * t * (s + a2)).sin());
        }
        ap += 2.0 * ratio * (2.0 * PI * f_delta * lf * t).cos();
        partial.push((ex, ap));
    }
    Ok((2..=max_len)
        .map(|len| {
            let h = len / 2;
            let (e, a) = partial[h - 1];
            (len, (e / (2 * h) as f64).abs(), (a / (2 * h) as f64).abs())
        })
        .collect())
}

/// Means over consecutive blocks of `block` entries (the last block may be short).
pub fn block_means(values: &[f64], block: usize) -> Vec<f64> {
    values.chunks(block.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}
