//! Initial IF estimation: three-penalty optimal path search over the STFT
//! magnitude plane, then erase-and-repeat to peel off one mode at a time.
//!
//! Path cost is the sum of
//! * `P1`: per-slice rank of the visited bin (0 for the largest magnitude),
//! * `P2`: `c1 * max(0, |p[n+1] - p[n]| - delta1)`,
//! * `P3`: `c2 * max(0, |g[n+1] - g[n]| - delta2)` on per-step gradients.
//!
//! The search is a Viterbi recursion over states `(bin, previous step)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tfa::{half_spectrogram, RealGrid, TFMatrix};

/// Where a track came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackSource {
    Initial,
    Refined,
    Truth,
}

/// A frequency trajectory, one value per time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IFTrack {
    pub freqs_hz: Vec<f64>,
    /// DFT bins behind `freqs_hz`, when the track was read off a grid.
    pub bins: Option<Vec<usize>>,
    pub source: TrackSource,
    /// Set when the track came from a signal with no energy.
    #[serde(default)]
    pub degenerate: bool,
}

impl IFTrack {
    pub fn from_freqs(freqs_hz: Vec<f64>, source: TrackSource) -> Self {
        Self { freqs_hz, bins: None, source, degenerate: false }
    }

    /// Track with `freqs_hz[n] = bins[n] * fs / nfft`.
    pub fn from_bins(bins: Vec<usize>, fs: f64, nfft: usize, source: TrackSource) -> Self {
        let scale = fs / nfft as f64;
        let freqs_hz = bins.iter().map(|&b| b as f64 * scale).collect();
        Self { freqs_hz, bins: Some(bins), source, degenerate: false }
    }

    pub fn constant(f: f64, n: usize, source: TrackSource) -> Self {
        Self::from_freqs(vec![f; n], source)
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Nearest-bin representation on an `nfft`-point grid; stored bins win when present.
    pub fn bins_on(&self, fs: f64, nfft: usize) -> Vec<i64> {
        if let Some(b) = &self.bins {
            return b.iter().map(|&v| v as i64).collect();
        }
        let scale = nfft as f64 / fs;
        self.freqs_hz.iter().map(|f| (f * scale).round() as i64).collect()
    }

    /// Root-mean-square deviation from `other` over `[from, to)`.
    pub fn rms_error(&self, other: &IFTrack, from: usize, to: usize) -> f64 {
        let to = to.min(self.len()).min(other.len());
        if from >= to {
            return 0.0;
        }
        let s: f64 = (from..to).map(|n| (self.freqs_hz[n] - other.freqs_hz[n]).powi(2)).sum();
        (s / (to - from) as f64).sqrt()
    }
}

/// Weights and thresholds of the path search and the peel loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Rank units per bin of excess step.
    pub c1: f64,
    /// Rank units per unit of excess gradient change.
    pub c2: f64,
    /// Tolerated step between DP knots, bins.
    pub delta1: f64,
    /// Tolerated gradient change, bins per slice.
    pub delta2: f64,
    /// Erase half-band, bins.
    pub delta: usize,
    /// Stop once residual excess energy falls below this share of the original.
    pub epsilon0: f64,
    /// Largest step between DP knots, bins.
    pub max_transition: usize,
    pub max_modes: usize,
    /// Slices between DP knots. 1 searches every slice.
    pub step: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            c1: 50.0,
            c2: 5000.0,
            delta1: 3.0,
            delta2: 0.3,
            delta: 30,
            epsilon0: 0.1,
            max_transition: 9,
            max_modes: 8,
            step: 8,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad(format!("c1 and c2 must be nonnegative, got {} and {}", self.c1, self.c2));
        }
        if !(self.delta1 >= 0.0 && self.delta2 >= 0.0) {
            return bad("delta1 and delta2 must be nonnegative".into());
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return bad(format!("epsilon0 must lie in (0, 1), got {}", self.epsilon0));
        }
        if (self.max_transition as f64) < self.delta1 {
            return bad(format!(
                "max_transition {} is below delta1 {}",
                self.max_transition, self.delta1
            ));
        }
        if self.max_modes == 0 || self.step == 0 {
            return bad("max_modes and step must be at least 1".into());
        }
        Ok(())
    }

    fn p2(&self, d: i64) -> f64 {
        let excess = d.unsigned_abs() as f64 - self.delta1;
        if excess > 0.0 {
            self.c1 * excess
        } else {
            0.0
        }
    }

    /// Gradients are in bins per slice.
    fn p3(&self, g: f64, prev: f64) -> f64 {
        let excess = (g - prev).abs() - self.delta2;
        if excess > 0.0 {
            self.c2 * excess
        } else {
            0.0
        }
    }
}

/// Per-slice rank of every bin under a nonincreasing magnitude sort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankGrid {
    pub ranks: Vec<u32>,
    pub n_slices: usize,
    pub n_bins: usize,
}

impl RankGrid {
    pub fn slice(&self, n: usize) -> &[u32] {
        &self.ranks[n * self.n_bins..(n + 1) * self.n_bins]
    }
}

fn rank_slice(row: &[f64], out: &mut [u32], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..row.len());
    // stable: equal magnitudes keep ascending bin order
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    for (r, &v) in order.iter().enumerate() {
        out[v] = r as u32;
    }
}

/// Rank 0 for each slice's largest magnitude; ties go to the lower bin.
pub fn rank_columns(mag: &RealGrid) -> RankGrid {
    let mut ranks = vec![0u32; mag.data.len()];
    let mut order = Vec::with_capacity(mag.n_bins);
    for n in 0..mag.n_slices {
        rank_slice(mag.slice(n), &mut ranks[n * mag.n_bins..(n + 1) * mag.n_bins], &mut order);
    }
    RankGrid { ranks, n_slices: mag.n_slices, n_bins: mag.n_bins }
}

/// Total penalty of a bin path under `cfg` (the quantity the search minimizes):
/// ranks of every slice, the continuity penalty of every adjacent pair, and the
/// gradient penalty between consecutive knot segments.
pub fn path_cost(ranks: &RankGrid, path: &[usize], cfg: &PenaltyConfig) -> f64 {
    let mut cost: f64 = path.iter().enumerate().map(|(n, &b)| ranks.slice(n)[b] as f64).sum();
    cost += path.windows(2).map(|w| cfg.p2(w[1] as i64 - w[0] as i64)).sum::<f64>();
    let at = knots(path.len(), cfg.step);
    let grads: Vec<f64> = at
        .windows(2)
        .map(|w| (path[w[1]] as f64 - path[w[0]] as f64) / (w[1] - w[0]) as f64)
        .collect();
    cost += grads.windows(2).map(|g| cfg.p3(g[1], g[0])).sum::<f64>();
    cost
}

/// Per-cell data cost of the path search.
struct CostGrid {
    cost: Vec<f64>,
    n_slices: usize,
    n_bins: usize,
}

impl CostGrid {
    fn slice(&self, n: usize) -> &[f64] {
        &self.cost[n * self.n_bins..(n + 1) * self.n_bins]
    }
}

impl From<&RankGrid> for CostGrid {
    fn from(r: &RankGrid) -> Self {
        CostGrid { cost: r.ranks.iter().map(|&v| v as f64).collect(), n_slices: r.n_slices, n_bins: r.n_bins }
    }
}

/// Rank quantile of the live cells charged for crossing an erased band.
/// Cheaper than typical noise, dearer than a real ridge.
const ERASED_QUANTILE: f64 = 0.1;

/// Ranks of `mag` where cells flagged in `erased` cost a fixed low quantile
/// of the slice's remaining ranks instead.
fn neutral_costs(mag: &RealGrid, erased: &[bool]) -> CostGrid {
    let ranks = rank_columns(mag);
    let mut grid = CostGrid::from(&ranks);
    for n in 0..grid.n_slices {
        let row = &mut grid.cost[n * grid.n_bins..(n + 1) * grid.n_bins];
        let gone = &erased[n * grid.n_bins..(n + 1) * grid.n_bins];
        let live = gone.iter().filter(|g| !**g).count();
        let neutral = live.saturating_sub(1) as f64 * ERASED_QUANTILE;
        for (c, g) in row.iter_mut().zip(gone) {
            if *g {
                *c = neutral;
            }
        }
    }
    grid
}

#[derive(Clone, Copy)]
struct Key {
    cost: f64,
    bin_sum: u64,
    first: u32,
}

impl Key {
    const INF: Key = Key { cost: f64::INFINITY, bin_sum: u64::MAX, first: u32::MAX };

    fn better(&self, other: &Key) -> bool {
        (self.cost, self.bin_sum, self.first) < (other.cost, other.bin_sum, other.first)
    }
}

/// Bin on slice `t0 + k` of the straight segment from `b0` to `b0 + d` over `len` slices.
fn segment_bin(b0: usize, d: i64, k: usize, len: usize) -> usize {
    let a = k as f64 / len as f64;
    (b0 as f64 + a * d as f64).round() as usize
}

/// Rank, continuity and bin-sum totals of every segment leaving each bin.
/// Slices `(t0, t1]` are charged; the start slice belongs to the previous segment.
fn segment_costs(ranks: &CostGrid, t0: usize, t1: usize, m: i64, cfg: &PenaltyConfig) -> (Vec<f64>, Vec<u64>) {
    let nb = ranks.n_bins;
    let nd = (2 * m + 1) as usize;
    let len = t1 - t0;
    let mut cost = vec![f64::INFINITY; nb * nd];
    let mut sums = vec![0u64; nb * nd];
    for p in 0..nb {
        for di in 0..nd {
            let d = di as i64 - m;
            let end = p as i64 + d;
            if end < 0 || end >= nb as i64 {
                continue;
            }
            let (mut c, mut s, mut last) = (0.0, 0u64, p);
            for k in 1..=len {
                let b = segment_bin(p, d, k, len);
                c += ranks.slice(t0 + k)[b] + cfg.p2(b as i64 - last as i64);
                s += b as u64;
                last = b;
            }
            cost[p * nd + di] = c;
            sums[p * nd + di] = s;
        }
    }
    (cost, sums)
}

/// Viterbi search over straight segments joining knots `at` (first and last
/// slice included). Returns one bin per slice.
fn viterbi(ranks: &CostGrid, at: &[usize], cfg: &PenaltyConfig) -> Vec<usize> {
    let nb = ranks.n_bins;
    let m = cfg.max_transition.min(nb.saturating_sub(1)) as i64;
    let nd = (2 * m + 1) as usize;
    if at.len() < 2 {
        let r = ranks.slice(0);
        return vec![(0..nb).min_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b))).unwrap_or(0)];
    }

    // state (b, di) at knot k: bin b reached by a segment of step di - m
    let r0 = ranks.slice(at[0]);
    let (seg, sums) = segment_costs(ranks, at[0], at[1], m, cfg);
    let mut cur = vec![Key::INF; nb * nd];
    for p in 0..nb {
        for di in 0..nd {
            let c = seg[p * nd + di];
            if c.is_finite() {
                let b = (p as i64 + di as i64 - m) as usize;
                cur[b * nd + di] = Key {
                    cost: r0[p] + c,
                    bin_sum: p as u64 + sums[p * nd + di],
                    first: p as u32,
                };
            }
        }
    }
    let mut back: Vec<Vec<u8>> = Vec::with_capacity(at.len().saturating_sub(2));
    let mut next = vec![Key::INF; nb * nd];
    for k in 2..at.len() {
        let (prev_len, len) = ((at[k - 1] - at[k - 2]) as f64, (at[k] - at[k - 1]) as f64);
        let p3: Vec<f64> = (0..nd * nd)
            .map(|i| cfg.p3(((i / nd) as f64 - m as f64) / len, ((i % nd) as f64 - m as f64) / prev_len))
            .collect();
        let (seg, sums) = segment_costs(ranks, at[k - 1], at[k], m, cfg);
        let mut bp = vec![0u8; nb * nd];
        for b in 0..nb {
            for di in 0..nd {
                let prev = b as i64 - (di as i64 - m);
                if prev < 0 || prev >= nb as i64 {
                    next[b * nd + di] = Key::INF;
                    continue;
                }
                let base = prev as usize * nd;
                let mut best = Key::INF;
                let mut arg = 0u8;
                for pi in 0..nd {
                    let key = &cur[base + pi];
                    if key.cost.is_infinite() {
                        continue;
                    }
                    let cand = Key { cost: key.cost + p3[di * nd + pi], bin_sum: key.bin_sum, first: key.first };
                    if cand.better(&best) {
                        best = cand;
                        arg = pi as u8;
                    }
                }
                if best.cost.is_finite() {
                    best.cost += seg[base + di];
                    best.bin_sum += sums[base + di];
                }
                next[b * nd + di] = best;
                bp[b * nd + di] = arg;
            }
        }
        back.push(bp);
        std::mem::swap(&mut cur, &mut next);
    }

    let mut best = Key::INF;
    let mut state = 0;
    for (i, key) in cur.iter().enumerate() {
        if key.better(&best) {
            best = *key;
            state = i;
        }
    }
    let mut knot_bins = vec![0usize; at.len()];
    let (mut b, mut di) = (state / nd, state % nd);
    for k in (2..at.len()).rev() {
        knot_bins[k] = b;
        let pi = back[k - 2][b * nd + di] as usize;
        b = (b as i64 - (di as i64 - m)) as usize;
        di = pi;
    }
    knot_bins[1] = b;
    knot_bins[0] = (b as i64 - (di as i64 - m)) as usize;
    spread_knots(at, &knot_bins, ranks.n_slices)
}

/// Minimum-penalty bin path across all slices of `mag`. With `cfg.step > 1`
/// the path is piecewise linear between knots every `step` slices.
pub fn find_optimal_path(mag: &RealGrid, cfg: &PenaltyConfig) -> Result<IFTrack> {
    cfg.validate()?;
    if mag.n_slices < 2 {
        return Err(Error::InvalidConfig(format!(
            "path search needs at least 2 time slices, got {}",
            mag.n_slices
        )));
    }
    if mag.max() <= 0.0 {
        return Err(Error::NoEnergy);
    }
    let limit = mag.n_bins.min((mag.nfft / 2).max(1));
    let mag = restrict_bins(mag, limit);
    let costs = CostGrid::from(&rank_columns(&mag));
    let path = viterbi(&costs, &knots(mag.n_slices, cfg.step), cfg);
    Ok(IFTrack::from_bins(path, mag.fs, mag.nfft, TrackSource::Initial))
}

fn restrict_bins(mag: &RealGrid, limit: usize) -> RealGrid {
    if limit == mag.n_bins {
        return mag.clone();
    }
    let mut data = Vec::with_capacity(mag.n_slices * limit);
    for n in 0..mag.n_slices {
        data.extend_from_slice(&mag.slice(n)[..limit]);
    }
    RealGrid { data, n_slices: mag.n_slices, n_bins: limit, fs: mag.fs, nfft: mag.nfft }
}

/// Zeroes `[bin[n] - delta, bin[n] + delta]` in every slice, clipped to the grid.
pub fn erase_band(mag: &RealGrid, track: &IFTrack, delta: usize) -> Result<RealGrid> {
    if track.len() != mag.n_slices {
        return Err(Error::LengthMismatch { expected: mag.n_slices, found: track.len() });
    }
    let mut out = mag.clone();
    let bins = track.bins_on(mag.fs, mag.nfft);
    let nb = mag.n_bins as i64;
    let d = delta as i64;
    for (n, &b) in bins.iter().enumerate() {
        let lo = (b - d).max(0);
        let hi = (b + d).min(nb - 1);
        if lo <= hi {
            out.slice_mut(n)[lo as usize..=hi as usize].fill(0.0);
        }
    }
    Ok(out)
}

fn mark_band(erased: &mut [bool], n_bins: usize, track: &IFTrack, delta: usize) {
    let bins = track.bins.as_deref().unwrap_or_default();
    for (n, &b) in bins.iter().enumerate() {
        let lo = b.saturating_sub(delta);
        let hi = (b + delta).min(n_bins - 1);
        erased[n * n_bins + lo..=n * n_bins + hi].fill(true);
    }
}

const FLOOR_CLIP: f64 = 6.907_755_278_982_137; // -ln(1e-3)

/// Mean noise power per cell, from a clipped mean of the power values.
/// Assumes noise cells follow an exponential law (complex Gaussian noise).
fn noise_floor(power: &[f64]) -> f64 {
    let mut live: Vec<f64> = power.iter().copied().filter(|v| *v > 0.0).collect();
    if live.is_empty() {
        return 0.0;
    }
    let mid = live.len() / 2;
    let (_, median, _) = live.select_nth_unstable_by(mid, f64::total_cmp);
    let mut nu = *median / std::f64::consts::LN_2;
    let c = FLOOR_CLIP;
    let ec = (-c).exp();
    let correction = (1.0 - ec) / (1.0 - (1.0 + c) * ec);
    for _ in 0..20 {
        let cut = c * nu;
        let (s, k) = live.iter().filter(|v| **v < cut).fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
        if k == 0 {
            break;
        }
        let updated = s / k as f64 * correction;
        if (updated - nu).abs() <= 1e-12 * nu.max(f64::MIN_POSITIVE) {
            nu = updated;
            break;
        }
        nu = updated;
    }
    nu
}

const EXCESS_CUT: f64 = 3.0;

/// Energy above the noise floor in live cells with power over `EXCESS_CUT`
/// times the floor, less what exponential noise alone would put there.
fn excess_energy(power: &RealGrid, erased: &[bool], nu: f64) -> f64 {
    let cut = EXCESS_CUT * nu;
    let mut live = 0usize;
    let mut sum = 0.0;
    for (v, e) in power.data.iter().zip(erased) {
        if *e {
            continue;
        }
        live += 1;
        if *v > cut {
            sum += v - nu;
        }
    }
    let noise = live as f64 * nu * EXCESS_CUT * (-EXCESS_CUT).exp();
    (sum - noise).max(0.0)
}

/// Slice indices `0, step, 2*step, ...` below `n`, plus the last slice.
fn knots(n: usize, step: usize) -> Vec<usize> {
    let mut at: Vec<usize> = (0..n).step_by(step.max(1)).collect();
    if n > 1 && at.last() != Some(&(n - 1)) {
        at.push(n - 1);
    }
    at
}

/// Linear interpolation of knot bins onto every slice; held flat after the last knot.
pub(crate) fn spread_knots(knot_at: &[usize], knot_bins: &[usize], n: usize) -> Vec<usize> {
    let mut out = vec![0usize; n];
    for w in 0..knot_at.len() {
        let (t0, b0) = (knot_at[w], knot_bins[w] as f64);
        let (t1, b1) = match (knot_at.get(w + 1), knot_bins.get(w + 1)) {
            (Some(&t), Some(&b)) => (t, b as f64),
            _ => (n, b0),
        };
        for (t, slot) in out.iter_mut().enumerate().take(t1).skip(t0) {
            let a = (t - t0) as f64 / (t1 - t0) as f64;
            *slot = (b0 + a * (b1 - b0)).round() as usize;
        }
    }
    out
}

/// Peels modes off the positive-frequency magnitude plane of `tf`, strongest first.
///
/// Each path is piecewise linear between knots every `cfg.step` slices. Peeling stops when the energy left
/// above the estimated noise floor drops below `epsilon0` times the original
/// excess, or after `max_modes` tracks.
pub fn estimate_initial_ifs(tf: &TFMatrix, cfg: &PenaltyConfig) -> Result<Vec<IFTrack>> {
    cfg.validate()?;
    let full = half_spectrogram(tf);
    if full.max() <= 0.0 {
        return Err(Error::NoEnergy);
    }
    if full.n_slices < 2 {
        return Err(Error::InvalidConfig(format!("path search needs at least 2 time slices, got {}", full.n_slices)));
    }
    let limit = full.n_bins.min((full.nfft / 2).max(1));
    let mut grid = restrict_bins(&full, limit);
    let at = knots(grid.n_slices, cfg.step);
    let mut erased = vec![false; grid.data.len()];
    let power = RealGrid { data: grid.data.iter().map(|v| v * v).collect(), ..grid.clone() };
    let nu = noise_floor(&power.data);
    let original = excess_energy(&power, &erased, nu);
    log::debug!("ridge: noise floor {nu:.3e}, excess energy {original:.3e}");

    let mut tracks = Vec::new();
    while tracks.len() < cfg.max_modes {
        if grid.max() <= 0.0 {
            break;
        }
        let costs = neutral_costs(&grid, &erased);
        let path = viterbi(&costs, &at, cfg);
        let track = IFTrack::from_bins(path, grid.fs, grid.nfft, TrackSource::Initial);
        grid = erase_band(&grid, &track, cfg.delta)?;
        mark_band(&mut erased, grid.n_bins, &track, cfg.delta);
        tracks.push(track);
        let residual = excess_energy(&power, &erased, nu);
        log::debug!("ridge: mode {} residual share {:.4}", tracks.len(), residual / original.max(f64::MIN_POSITIVE));
        if residual <= cfg.epsilon0 * original {
            break;
        }
    }
    Ok(tracks)
}
