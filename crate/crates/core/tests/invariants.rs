//! Properties that hold for any input, plus the worked examples.

use etfr::kpa::KpaConfig;
use etfr::pipeline::{decompose, score, LoadedInput};
use etfr::ridge::{erase_band, find_optimal_path, IFTrack, PenaltyConfig, TrackSource};
use etfr::signals::{analytic, synthesize_mode, ModeSpec, NoiseSpec, Preset, TimeSeries};
use etfr::synthesis::{etfr, output_snr, reconstruct_from_etfr, reconstruct_mode, reconstruct_signal, seo, SNR_CAP_DB};
use etfr::tfa::{spectrogram, stft, stft_real, RealGrid, StftConfig};
use proptest::prelude::*;

const FS: f64 = 1024.0;

fn tone_plane(f: f64, n: usize) -> (TimeSeries, etfr::tfa::TFMatrix, IFTrack) {
    let (x, track) = synthesize_mode(&ModeSpec::lfm(f, 0.0).with_phase(0.4), n, FS).unwrap();
    let tf = stft(&analytic(&x.samples), &StftConfig::for_signal(n, FS)).unwrap();
    (x, tf, track)
}

#[test]
fn masking_twice_changes_nothing_and_never_adds_energy() {
    let (signal, truth) = Preset::Fig1b.synthesize(&NoiseSpec::new(5.0, 3)).unwrap();
    let tf = stft(&analytic(&signal.samples), &StftConfig::for_signal(signal.len(), FS)).unwrap();
    let mask = seo(&truth.tracks, &tf).unwrap();
    let once = etfr(&tf, &mask).unwrap();
    let twice = etfr(&once, &mask).unwrap();
    assert_eq!(once.data, twice.data);
    assert!(once.energy() <= tf.energy());
}

#[test]
fn crossing_modes_share_mask_cells() {
    let (signal, truth) = Preset::Fig1b.synthesize(&NoiseSpec::none()).unwrap();
    let tf = stft(&analytic(&signal.samples), &StftConfig::for_signal(signal.len(), FS)).unwrap();
    let mask = seo(&truth.tracks, &tf).unwrap();
    let shared = (0..tf.n_slices).filter(|&n| mask.mode_bins[0][n] == mask.mode_bins[1][n]).count();
    assert!(shared >= 1);
    assert_eq!(mask.active_count(), 2 * tf.n_slices - shared);
}

#[test]
fn truth_tracks_of_the_crossing_preset_intersect() {
    let (_, truth) = Preset::Fig1b.synthesize(&NoiseSpec::none()).unwrap();
    let d: Vec<f64> = truth.tracks[0].freqs_hz.iter().zip(&truth.tracks[1].freqs_hz).map(|(a, b)| a - b).collect();
    assert!(d.windows(2).any(|w| w[0].signum() != w[1].signum()));
}

#[test]
fn separate_modes_sum_to_the_masked_reconstruction() {
    let (signal, truth) = Preset::Fig1a.synthesize(&NoiseSpec::new(10.0, 1)).unwrap();
    let tf = stft(&analytic(&signal.samples), &StftConfig::for_signal(signal.len(), FS)).unwrap();
    let mask = seo(&truth.tracks, &tf).unwrap();
    let masked = etfr(&tf, &mask).unwrap();
    let modes: Vec<_> = truth.tracks.iter().map(|t| reconstruct_mode(&masked, t).unwrap()).collect();
    let summed = reconstruct_signal(&modes).unwrap();
    let direct = reconstruct_from_etfr(&masked, &mask).unwrap();
    for (a, b) in summed.samples.iter().zip(&direct.samples) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn ridge_readout_recovers_a_tone() {
    let (x, tf, track) = tone_plane(200.0, 1024);
    let m = reconstruct_mode(&tf, &track).unwrap();
    let edge = StftConfig::for_signal(1024, FS).edge();
    assert!(output_snr(&x.samples, &m.samples, edge).unwrap() > 40.0);
}

#[test]
fn noiseless_tone_gives_one_clean_mode() {
    let (x, track) = synthesize_mode(&ModeSpec::lfm(200.0, 0.0), 1024, FS).unwrap();
    let input = LoadedInput {
        signal: x.clone(),
        truth: Some(etfr::signals::GroundTruth { tracks: vec![track], modes: vec![x.clone()] }),
        label: "tone".into(),
    };
    let d = decompose(&x, None, &PenaltyConfig::default(), &KpaConfig::default()).unwrap();
    assert_eq!(d.modes.len(), 1);
    let r = score(&input, &d).unwrap();
    assert!(r.per_mode[0].output_snr_db.unwrap() > 40.0);
}

#[test]
fn crossing_preset_at_5_db_gives_two_modes() {
    let (signal, _) = Preset::Fig1b.synthesize(&NoiseSpec::new(5.0, 0)).unwrap();
    let d = decompose(&signal, None, &PenaltyConfig::default(), &KpaConfig::default()).unwrap();
    assert_eq!(d.modes.len(), 2);
}

#[test]
fn realized_input_snr_matches_the_request() {
    for seed in 0..5 {
        let (signal, truth) = Preset::Fig1a.synthesize(&NoiseSpec::new(5.0, seed)).unwrap();
        let clean = truth.clean_sum();
        let noise: f64 = signal.samples.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum();
        let power: f64 = clean.iter().map(|v| v * v).sum();
        let realized = 10.0 * (power / noise).log10();
        assert!((realized - 5.0).abs() < 0.1, "seed {seed}: {realized}");
    }
}

#[test]
fn analytic_signal_keeps_the_real_part() {
    let (x, _) = synthesize_mode(&ModeSpec::sfm(150.0, 20.0, 2.0), 1000, FS).unwrap();
    for (z, v) in analytic(&x.samples).iter().zip(&x.samples) {
        assert!((z.re - v).abs() < 1e-9);
    }
}

#[test]
fn erasing_a_band_removes_only_that_band() {
    let (_, tf, track) = tone_plane(300.0, 512);
    let mag = spectrogram(&tf);
    let erased = erase_band(&mag, &track, 5).unwrap();
    let centre = tf.hz_to_bin(300.0) as usize;
    for n in 0..mag.n_slices {
        assert_eq!(erased.get(n, centre), 0.0);
        assert_eq!(erased.get(n, centre + 40), mag.get(n, centre + 40));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snr_is_capped_for_identical_inputs(x in prop::collection::vec(-5.0f64..5.0, 8..64)) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        prop_assert_eq!(output_snr(&x, &x, 0).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn snr_is_invariant_to_common_scaling(
        x in prop::collection::vec(-5.0f64..5.0, 8..64),
        e in prop::collection::vec(-1.0f64..1.0, 64),
        k in 0.1f64..10.0,
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let xhat: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + b + 1e-3).collect();
        let a = output_snr(&x, &xhat, 0).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * k).collect();
        let hs: Vec<f64> = xhat.iter().map(|v| v * k).collect();
        prop_assert!((a - output_snr(&xs, &hs, 0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn path_stays_on_grid_within_the_jump_limit(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 2..40),
        mt in 1usize..5,
    ) {
        let grid = RealGrid::from_rows(&rows).unwrap();
        let cfg = PenaltyConfig { max_transition: mt, delta1: 0.0, step: 1, ..PenaltyConfig::default() };
        let bins = find_optimal_path(&grid, &cfg).unwrap().bins.unwrap();
        prop_assert_eq!(bins.len(), rows.len());
        prop_assert!(bins.iter().all(|b| *b < 12));
        prop_assert!(bins.windows(2).all(|w| w[0].abs_diff(w[1]) <= mt));
    }

    #[test]
    fn mask_energy_never_exceeds_the_plane(f in 20.0f64..480.0, g in 20.0f64..480.0) {
        let (x, _) = synthesize_mode(&ModeSpec::lfm(f, 0.0), 256, FS).unwrap();
        let tf = stft_real(&x.samples, &StftConfig::for_signal(256, FS)).unwrap();
        let tracks = [IFTrack::constant(f, 256, TrackSource::Truth), IFTrack::constant(g, 256, TrackSource::Truth)];
        let masked = etfr(&tf, &seo(&tracks, &tf).unwrap()).unwrap();
        prop_assert!(masked.energy() <= tf.energy());
    }
}
