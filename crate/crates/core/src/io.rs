//! File formats: CSV series and tracks, 16-bit WAV with a JSON sidecar,
//! raw float32 TF planes with a JSON sidecar, and 8-bit PGM previews.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ridge::IFTrack;
use crate::signals::TimeSeries;
use crate::tfa::{RealGrid, TFMatrix};

/// Writes `t,s` rows.
pub fn write_signal_csv(path: &Path, x: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,s")?;
    for (n, v) in x.samples.iter().enumerate() {
        writeln!(w, "{},{}", n as f64 / x.fs, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `n,value` rows.
pub fn write_samples_csv(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "n,value")?;
    for (n, v) in samples.iter().enumerate() {
        writeln!(w, "{n},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `slice,bin,freq_hz` rows; `bin` is left empty for tracks without bins.
pub fn write_track_csv(path: &Path, track: &IFTrack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "slice,bin,freq_hz")?;
    for (n, f) in track.freqs_hz.iter().enumerate() {
        match &track.bins {
            Some(b) => writeln!(w, "{n},{},{f}", b[n])?,
            None => writeln!(w, "{n},,{f}")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Generic CSV writer for numeric tables.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal from CSV. Two columns are taken as `t,s` and the sampling
/// rate comes from the time step; one column needs `fs`. A non-numeric first
/// line is skipped as a header.
pub fn read_signal_csv(path: &Path, fs: Option<f64>) -> Result<TimeSeries> {
    let reader = BufReader::new(File::open(path).map_err(Error::open(path))?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 1 => values.push(v[0]),
            Ok(v) if v.len() >= 2 => {
                times.push(v[0]);
                values.push(v[1]);
            }
            _ if k == 0 => continue,
            _ => return Err(Error::Parse(format!("{}: line {} is not numeric", path.display(), k + 1))),
        }
    }
    let fs = match (fs, times.len() >= 2) {
        (Some(fs), _) => fs,
        (None, true) => {
            let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
            if !(dt > 0.0) {
                return Err(Error::Parse(format!("{}: time column is not increasing", path.display())));
            }
            1.0 / dt
        }
        (None, false) => {
            return Err(Error::Parse(format!(
                "{}: single-column CSV needs an explicit sampling rate",
                path.display()
            )))
        }
    };
    TimeSeries::new(values, fs)
}

/// Sidecar written next to a WAV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavSidecar {
    /// Stored sample = signal sample * scale (before 16-bit quantization).
    pub scale: f64,
    pub fs: f64,
    pub n_samples: usize,
}

/// `<path>.json`, e.g. `signal.wav.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// 16-bit mono PCM at 0.9 full scale, plus a JSON sidecar holding the scale.
pub fn write_wav(path: &Path, x: &TimeSeries) -> Result<WavSidecar> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.fs.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let peak = x.max_abs();
    let scale = if peak > 0.0 { 0.9 / peak } else { 1.0 };
    let mut w = hound::WavWriter::create(path, spec)?;
    for v in &x.samples {
        w.write_sample((v * scale * i16::MAX as f64).round() as i16)?;
    }
    w.finalize()?;
    let side = WavSidecar { scale, fs: x.fs, n_samples: x.len() };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(side)
}

/// Reads a mono WAV; undoes the sidecar scale when one is present.
pub fn read_wav(path: &Path) -> Result<TimeSeries> {
    let mut r = hound::WavReader::new(BufReader::new(File::open(path).map_err(Error::open(path))?))?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(Error::Parse(format!("{}: expected mono audio, found {} channels", path.display(), spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let full = (1i64 << (spec.bits_per_sample - 1)) as f64 - 1.0;
            r.samples::<i32>().map(|s| s.map(|v| v as f64 / full)).collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Float => {
            r.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?
        }
    };
    let side = sidecar_path(path);
    let scale = if side.exists() {
        serde_json::from_str::<WavSidecar>(&fs::read_to_string(side)?)?.scale
    } else {
        1.0
    };
    TimeSeries::new(samples.into_iter().map(|v| v / scale).collect(), spec.sample_rate as f64)
}

/// Sidecar of a raw TF plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfSidecar {
    pub n_slices: usize,
    pub nfft: usize,
    pub fs: f64,
    pub hop: usize,
    pub sigma: f64,
}

/// Little-endian float32 `(re, im)` pairs, row-major `[slice][bin]`, plus `<path>.json`.
pub fn write_tf_binary(path: &Path, tf: &TFMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in &tf.data {
        w.write_all(&(c.re as f32).to_le_bytes())?;
        w.write_all(&(c.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    let side = TfSidecar { n_slices: tf.n_slices, nfft: tf.nfft, fs: tf.fs, hop: tf.hop, sigma: tf.sigma };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Reads back a plane written by [`write_tf_binary`]; the gain is recomputed
/// from the stored window parameters.
pub fn read_tf_binary(path: &Path) -> Result<TFMatrix> {
    let side: TfSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    let expected = side.n_slices * side.nfft * 8;
    if bytes.len() != expected {
        return Err(Error::LengthMismatch { expected, found: bytes.len() });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            num_complex::Complex64::new(re, im)
        })
        .collect();
    let cfg = crate::tfa::StftConfig::new(side.fs, side.sigma, side.nfft);
    let gain = crate::tfa::gaussian_window(&cfg)?.iter().sum();
    Ok(TFMatrix { data, n_slices: side.n_slices, nfft: side.nfft, fs: side.fs, hop: side.hop, sigma: side.sigma, gain })
}

/// 8-bit binary PGM, max-normalized; rows are frequency bins from high to low.
pub fn write_pgm(path: &Path, grid: &RealGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", grid.n_slices, grid.n_bins)?;
    let peak = grid.max();
    let mut row = vec![0u8; grid.n_slices];
    for v in (0..grid.n_bins).rev() {
        for (n, px) in row.iter_mut().enumerate() {
            *px = if peak > 0.0 { (255.0 * grid.get(n, v) / peak).round() as u8 } else { 0 };
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Magnitude grid as CSV, one row per slice.
pub fn write_grid_csv(path: &Path, grid: &RealGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for n in 0..grid.n_slices {
        let cells: Vec<String> = grid.slice(n).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synthesize_mode, ModeSpec};
    use crate::tfa::{stft_real, StftConfig};

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (x, _) = synthesize_mode(&ModeSpec::sfm(100.0, 10.0, 2.0), 300, 1000.0).unwrap();
        let p = dir.path().join("s.csv");
        write_signal_csv(&p, &x).unwrap();
        let y = read_signal_csv(&p, None).unwrap();
        assert!((y.fs - 1000.0).abs() < 1e-6);
        assert_eq!(y.samples, x.samples);
    }

    #[test]
    fn single_column_csv_needs_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.csv");
        fs::write(&p, "s\n0.1\n0.2\n0.3\n").unwrap();
        assert!(read_signal_csv(&p, None).is_err());
        assert_eq!(read_signal_csv(&p, Some(8.0)).unwrap().samples, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn wav_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let (x, _) = synthesize_mode(&ModeSpec::lfm(50.0, 20.0).with_amplitude(3.0), 512, 1024.0).unwrap();
        let p = dir.path().join("s.wav");
        let side = write_wav(&p, &x).unwrap();
        assert!((side.scale - 0.9 / x.max_abs()).abs() < 1e-12);
        let y = read_wav(&p).unwrap();
        assert_eq!(y.fs, 1024.0);
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 3.0 / 0.9 / 32767.0);
        }
    }

    #[test]
    fn tf_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StftConfig::new(256.0, 0.05, 128);
        let tf = stft_real(&crate::signals::white_noise(40, 1), &cfg).unwrap();
        let p = dir.path().join("tf.f32");
        write_tf_binary(&p, &tf).unwrap();
        let back = read_tf_binary(&p).unwrap();
        assert_eq!(back.n_slices, 40);
        assert!((back.gain - tf.gain).abs() < 1e-12);
        for (a, b) in tf.data.iter().zip(&back.data) {
            assert!((a - b).norm() <= 1e-6 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn pgm_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let g = RealGrid::from_rows(&[vec![0.0, 1.0, 2.0], vec![4.0, 0.0, 0.0]]).unwrap();
        let p = dir.path().join("g.pgm");
        write_pgm(&p, &g).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n2 3\n255\n"));
        assert_eq!(bytes.len(), b"P5\n2 3\n255\n".len() + 6);
    }
}
