#![allow(dead_code)]

use std::io::Write;
use std::time::{Duration, Instant};

use etfr::ridge::IFTrack;

/// Writes one verdict line past the test harness capture, then fails the test on FAIL.
pub fn verdict(id: u32, name: &str, pass: bool, elapsed: Duration, limit: Option<Duration>, detail: &str) {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = pass && in_time;
    let limit_txt = limit.map(|l| format!(" (limit {:.0} s)", l.as_secs_f64())).unwrap_or_default();
    let line = format!(
        "ACCEPTANCE {id:>2} {} {name}: {detail}; {:.2} s{limit_txt}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its time limit: {:.2} s", elapsed.as_secs_f64());
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Smallest wall-clock time of `reps` runs.
pub fn min_time(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .min()
        .unwrap()
}

/// True when two estimated tracks stay on their own branches of two crossing truth tracks.
///
/// The interior is cut at the true crossings into segments. Slices where
/// the truths are closer than `min_gap_hz` are skipped. A segment counts as
/// swapped when more of its slices put each estimate nearer the other truth
/// than its own.
pub fn tracked_without_swap(est: [&IFTrack; 2], truth: [&IFTrack; 2], edge: usize, min_gap_hz: f64) -> bool {
    let n = truth[0].len();
    let above = |t: usize| truth[0].freqs_hz[t] >= truth[1].freqs_hz[t];
    let mut t = edge;
    while t < n.saturating_sub(edge) {
        let side = above(t);
        let (mut own, mut other) = (0usize, 0usize);
        while t < n - edge && above(t) == side {
            let (f0, f1) = (truth[0].freqs_hz[t], truth[1].freqs_hz[t]);
            if (f0 - f1).abs() >= min_gap_hz {
                let (e0, e1) = (est[0].freqs_hz[t], est[1].freqs_hz[t]);
                if (e0 - f0).abs() < (e0 - f1).abs() && (e1 - f1).abs() < (e1 - f0).abs() {
                    own += 1;
                } else {
                    other += 1;
                }
            }
            t += 1;
        }
        if other > own {
            return false;
        }
    }
    true
}
