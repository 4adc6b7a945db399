//! End-to-end decomposition: STFT, ridge peeling, KPA enhancement, SEO mask,
//! ETFR and per-mode reconstruction, plus scoring against ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::kpa::{enhance, KpaConfig};
use crate::ridge::{estimate_initial_ifs, IFTrack, PenaltyConfig};
use crate::signals::{analytic, GroundTruth, NoiseSpec, Preset, TimeSeries};
use crate::synthesis::{
    etfr, mse, output_snr, reconstruct_from_etfr, reconstruct_mode, seo, ModeEstimate, ModeScore, SeoMask,
};
use crate::tfa::{half_spectrogram, stft, StftConfig, TFMatrix};

/// Where the signal comes from. Exactly one source per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// Built-in test signal; the run seed drives the noise.
    Preset {
        name: Preset,
        /// Input SNR in dB; omit for a noiseless signal.
        #[serde(default)]
        snr_db: Option<f64>,
    },
    /// `t,s` CSV, or a single column with `fs` given.
    Csv {
        path: PathBuf,
        #[serde(default)]
        fs: Option<f64>,
    },
    Wav { path: PathBuf },
}

/// Everything a `decompose` run needs. Stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// STFT parameters; derived from the signal length when absent.
    #[serde(default)]
    pub stft: Option<StftConfig>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub kpa: KpaConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(input: InputSource, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input,
            stft: None,
            penalty: PenaltyConfig::default(),
            kpa: KpaConfig::default(),
            output_dir: output_dir.into(),
            seed: 0,
        }
    }

    pub fn preset(preset: Preset, snr_db: Option<f64>, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self { seed, ..Self::new(InputSource::Preset { name: preset, snr_db }, output_dir) }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::open(path))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        self.kpa.validate()?;
        if let Some(stft) = &self.stft {
            stft.validate()?;
            if stft.hop != 1 {
                return Err(Error::InvalidConfig(format!(
                    "the pipeline reconstructs one sample per slice and needs hop = 1, got {}",
                    stft.hop
                )));
            }
        }
        if let InputSource::Preset { snr_db: Some(snr), .. } = &self.input {
            if snr.is_nan() {
                return Err(Error::InvalidConfig("input SNR is NaN".into()));
            }
        }
        Ok(())
    }
}

/// A loaded signal and, for presets, its ground truth.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub signal: TimeSeries,
    pub truth: Option<GroundTruth>,
    pub label: String,
}

pub fn load_input(input: &InputSource, seed: u64) -> Result<LoadedInput> {
    match input {
        InputSource::Preset { name, snr_db } => {
            let noise = snr_db.map_or_else(NoiseSpec::none, |snr| NoiseSpec::new(snr, seed));
            let (signal, truth) = name.synthesize(&noise)?;
            Ok(LoadedInput { signal, truth: Some(truth), label: format!("preset:{name}") })
        }
        InputSource::Csv { path, fs } => Ok(LoadedInput {
            signal: io::read_signal_csv(path, *fs)?,
            truth: None,
            label: format!("csv:{}", path.display()),
        }),
        InputSource::Wav { path } => Ok(LoadedInput {
            signal: io::read_wav(path)?,
            truth: None,
            label: format!("wav:{}", path.display()),
        }),
    }
}

/// Wall-clock per stage, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes(pub BTreeMap<String, f64>);

impl StageTimes {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.0.insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.0.get(stage).copied()
    }
}

/// All in-memory products of one run.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub stft_cfg: StftConfig,
    pub tf: TFMatrix,
    pub initial: Vec<IFTrack>,
    pub enhanced: Vec<IFTrack>,
    /// Modes read off the encoded signal in the last KPA round.
    pub kpa_modes: Vec<TimeSeries>,
    pub mu: f64,
    pub window_lens: Vec<usize>,
    pub mask: SeoMask,
    pub etfr: TFMatrix,
    pub modes: Vec<ModeEstimate>,
    /// Whole-signal reconstruction from the masked plane.
    pub summed: TimeSeries,
    pub times: StageTimes,
}

/// Runs every stage on `s`. Failures carry the stage name.
pub fn decompose(
    s: &TimeSeries,
    stft_cfg: Option<StftConfig>,
    penalty: &PenaltyConfig,
    kpa: &KpaConfig,
) -> Result<Decomposition> {
    let stft_cfg = stft_cfg.unwrap_or_else(|| StftConfig::for_signal(s.len(), s.fs));
    if (stft_cfg.fs - s.fs).abs() > 1e-9 * s.fs {
        return Err(Error::InvalidConfig(format!(
            "STFT sampling rate {} does not match the signal's {}",
            stft_cfg.fs, s.fs
        )));
    }
    let mut times = StageTimes::default();
    let tf = times.run("stft", || stft(&analytic(&s.samples), &stft_cfg))?;
    let initial = times.run("initial_if", || {
        let tracks = estimate_initial_ifs(&tf, penalty)?;
        if tracks.is_empty() {
            return Err(Error::NoEnergy);
        }
        Ok(tracks)
    })?;
    let enh = times.run("kpa", || enhance(s, &initial, kpa, &stft_cfg))?;
    let (mask, plane) = times.run("etfr", || {
        let mask = seo(&enh.tracks, &tf)?;
        let plane = etfr(&tf, &mask)?;
        Ok((mask, plane))
    })?;
    let (modes, summed) = times.run("reconstruct", || {
        let modes = enh.tracks.iter().map(|t| reconstruct_mode(&tf, t)).collect::<Result<Vec<_>>>()?;
        let summed = reconstruct_from_etfr(&plane, &mask)?;
        Ok((modes, summed))
    })?;
    log::info!("decomposed {} modes (mu = {:.3})", modes.len(), enh.mu);
    Ok(Decomposition {
        stft_cfg,
        tf,
        initial,
        enhanced: enh.tracks,
        kpa_modes: enh.modes,
        mu: enh.mu,
        window_lens: enh.window_lens,
        mask,
        etfr: plane,
        modes,
        summed,
        times,
    })
}

/// For each estimate, the ground-truth index it is paired with. Pairing
/// minimizes the summed interior RMS IF error over all one-to-one assignments.
pub fn match_tracks(estimates: &[IFTrack], truth: &[IFTrack], edge: usize) -> Vec<Option<usize>> {
    let n = truth.first().map_or(0, IFTrack::len);
    let (from, to) = (edge.min(n / 2), n.saturating_sub(edge).max(n / 2 + 1).min(n));
    let cost: Vec<Vec<f64>> =
        estimates.iter().map(|e| truth.iter().map(|t| e.rms_error(t, from, to)).collect()).collect();
    let mut best = (f64::INFINITY, vec![None; estimates.len()]);
    let mut current = vec![None; estimates.len()];
    let mut used = vec![false; truth.len()];
    assign(&cost, 0, 0.0, &mut current, &mut used, &mut best);
    best.1
}

fn assign(
    cost: &[Vec<f64>],
    i: usize,
    acc: f64,
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut (f64, Vec<Option<usize>>),
) {
    if acc >= best.0 {
        return;
    }
    let assigned = current.iter().filter(|c| c.is_some()).count();
    let want = cost.len().min(used.len());
    if i == cost.len() {
        if assigned == want {
            *best = (acc, current.clone());
        }
        return;
    }
    // an estimate may stay unpaired only when estimates outnumber truths
    let remaining = cost.len() - i;
    if assigned + remaining > want {
        current[i] = None;
        assign(cost, i + 1, acc, current, used, best);
    }
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            current[i] = Some(j);
            assign(cost, i + 1, acc + cost[i][j], current, used, best);
            current[i] = None;
            used[j] = false;
        }
    }
}

/// Scores of one reconstructed mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub index: usize,
    pub truth_index: Option<usize>,
    pub mean_if_hz: f64,
    pub mse: Option<f64>,
    pub output_snr_db: Option<f64>,
    pub if_rms_initial_hz: Option<f64>,
    pub if_rms_enhanced_hz: Option<f64>,
}

/// Whole-signal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalScore {
    pub mse: f64,
    pub output_snr_db: f64,
    pub input_snr_db: f64,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: String,
    pub n_samples: usize,
    pub fs: f64,
    pub mode_count: usize,
    pub mu: f64,
    pub window_lens: Vec<usize>,
    pub edge_samples: usize,
    pub stft: StftConfig,
    pub per_mode: Vec<ModeReport>,
    pub total: Option<TotalScore>,
    pub timing_ms: BTreeMap<String, f64>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_mode: Vec<ModeScore>,
    pub total: Option<TotalScore>,
}

/// Builds the report; per-mode scores need ground truth.
pub fn score(input: &LoadedInput, d: &Decomposition) -> Result<RunReport> {
    let s = &input.signal;
    let edge = d.stft_cfg.edge();
    let pairing = match &input.truth {
        Some(t) => match_tracks(&d.enhanced, &t.tracks, edge),
        None => vec![None; d.modes.len()],
    };
    let mut per_mode = Vec::with_capacity(d.modes.len());
    for (i, m) in d.modes.iter().enumerate() {
        let mean_if_hz = m.track.freqs_hz.iter().sum::<f64>() / m.track.len().max(1) as f64;
        let mut rep = ModeReport {
            index: i,
            truth_index: pairing[i],
            mean_if_hz,
            mse: None,
            output_snr_db: None,
            if_rms_initial_hz: None,
            if_rms_enhanced_hz: None,
        };
        if let (Some(truth), Some(j)) = (&input.truth, pairing[i]) {
            let reference = &truth.modes[j].samples;
            rep.mse = Some(mse(reference, &m.samples, edge)?);
            rep.output_snr_db = Some(output_snr(reference, &m.samples, edge)?);
            let to = s.len() - edge;
            rep.if_rms_initial_hz = Some(d.initial[i].rms_error(&truth.tracks[j], edge, to));
            rep.if_rms_enhanced_hz = Some(d.enhanced[i].rms_error(&truth.tracks[j], edge, to));
        }
        per_mode.push(rep);
    }
    let total = match &input.truth {
        Some(truth) => {
            let clean = truth.clean_sum();
            Some(TotalScore {
                mse: mse(&clean, &d.summed.samples, edge)?,
                output_snr_db: output_snr(&clean, &d.summed.samples, edge)?,
                input_snr_db: output_snr(&clean, &s.samples, edge)?,
            })
        }
        None => None,
    };
    Ok(RunReport {
        input: input.label.clone(),
        n_samples: s.len(),
        fs: s.fs,
        mode_count: d.modes.len(),
        mu: d.mu,
        window_lens: d.window_lens.clone(),
        edge_samples: edge,
        stft: d.stft_cfg,
        per_mode,
        total,
        timing_ms: d.times.0.clone(),
    })
}

/// Loads, decomposes, scores, then writes every artifact. Nothing is written
/// unless all stages succeed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let input = load_input(&cfg.input, cfg.seed)?;
    let d = decompose(&input.signal, cfg.stft, &cfg.penalty, &cfg.kpa)?;
    let report = score(&input, &d).map_err(|e| e.in_stage("metrics"))?;
    write_artifacts(&cfg.output_dir, &d, &report)?;
    Ok(report)
}

fn write_artifacts(dir: &Path, d: &Decomposition, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, m) in d.modes.iter().enumerate() {
        io::write_track_csv(&dir.join(format!("mode_{i}_if_initial.csv")), &d.initial[i])?;
        io::write_track_csv(&dir.join(format!("mode_{i}_if_enhanced.csv")), &d.enhanced[i])?;
        io::write_samples_csv(&dir.join(format!("mode_{i}_kpa.csv")), &d.kpa_modes[i].samples)?;
        io::write_samples_csv(&dir.join(format!("mode_{i}_recon.csv")), &m.samples)?;
    }
    io::write_samples_csv(&dir.join("recon_sum.csv"), &d.summed.samples)?;
    io::write_tf_binary(&dir.join("stft.f32"), &d.tf)?;
    io::write_tf_binary(&dir.join("etfr.f32"), &d.etfr)?;
    io::write_pgm(&dir.join("spectrogram.pgm"), &half_spectrogram(&d.tf))?;
    io::write_pgm(&dir.join("etfr.pgm"), &half_spectrogram(&d.etfr))?;
    let metrics = Metrics {
        per_mode: report
            .per_mode
            .iter()
            .filter_map(|m| Some(ModeScore { mse: m.mse?, output_snr_db: m.output_snr_db? }))
            .collect(),
        total: report.total.clone(),
    };
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// What `synth` writes: the signal as CSV and WAV, plus truth modes and IF laws.
pub fn write_synthetic(dir: &Path, preset: Preset, noise: &NoiseSpec) -> Result<(TimeSeries, GroundTruth)> {
    let (signal, truth) = preset.synthesize(noise)?;
    fs::create_dir_all(dir)?;
    io::write_signal_csv(&dir.join("signal.csv"), &signal)?;
    io::write_wav(&dir.join("signal.wav"), &signal)?;
    for (i, (mode, track)) in truth.modes.iter().zip(&truth.tracks).enumerate() {
        io::write_samples_csv(&dir.join(format!("truth_mode_{i}.csv")), &mode.samples)?;
        io::write_track_csv(&dir.join(format!("truth_if_{i}.csv")), track)?;
    }
    let meta = serde_json::json!({
        "preset": preset.name(),
        "snr_db": if noise.is_disabled() { None } else { Some(noise.snr_db) },
        "seed": noise.seed,
        "fs": signal.fs,
        "n_samples": signal.len(),
        "modes": preset.specs(),
    });
    fs::write(dir.join("synth.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok((signal, truth))
}

/// Process exit status for an error: 3 for a failed stage, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Stage { .. } => 3,
        _ => 2,
    }
}
