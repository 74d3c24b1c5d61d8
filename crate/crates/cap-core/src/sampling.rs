//! Event-balanced selection of training windows.
//!
//! Cell divisions are rare relative to sequence length, so uniform window
//! sampling under-represents them. With probability `p_aeg` a window is
//! anchored on a division event so the complete event (mother's last frame
//! through the daughters' first) falls inside the window; otherwise the
//! start is uniform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineage::{division_events, LineageGraph};

/// Window sampler configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Window length in frames.
    pub t_s: usize,
    /// Sliding stride in frames.
    pub l_slide: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            t_s: 24,
            l_slide: 8,
            rng_seed: 0,
        }
    }
}

/// One complete division event: the mother's last frame through the
/// daughters' first visible frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivisionAnchor {
    pub t_start: usize,
    pub t_end: usize,
}

impl DivisionAnchor {
    pub fn duration(&self) -> usize {
        self.t_end - self.t_start + 1
    }
}

/// Division anchors of a lineage graph. Each event spans the mother's last
/// frame and the daughters' first.
pub fn anchors_from_graph(g: &LineageGraph) -> Vec<DivisionAnchor> {
    division_events(g)
        .into_iter()
        .map(|(_, t_div)| DivisionAnchor {
            t_start: t_div,
            t_end: t_div + 1,
        })
        .collect()
}

/// Probability of sampling through an anchor: min(1, N_div * T_div / T).
///
/// The raw ratio can exceed 1 for division-rich data, so it is clamped to
/// remain a probability.
pub fn aeg_probability(n_div: usize, t_div: usize, total_frames: usize) -> Result<f64> {
    if total_frames == 0 {
        return Err(Error::Domain("sequence length T must be > 0".into()));
    }
    let p = (n_div as f64 * t_div as f64) / total_frames as f64;
    Ok(p.min(1.0))
}

/// How a window start was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSample {
    pub start: usize,
    /// Whether the anchored (event-guided) branch was taken.
    pub via_anchor: bool,
}

/// Draws a window start. With probability `p_aeg` (and a non-empty anchor
/// list) an anchor is chosen uniformly and the start is drawn uniformly
/// from the positions that contain the whole event; if the event does not
/// fit in the window, the start falls back to the event start clamped into
/// range. Otherwise the start is uniform over [0, T - T_s].
pub fn sample_window_start<R: Rng>(
    rng: &mut R,
    total_frames: usize,
    t_s: usize,
    anchors: &[DivisionAnchor],
    p_aeg: f64,
) -> Result<usize> {
    Ok(sample_window(rng, total_frames, t_s, anchors, p_aeg)?.start)
}

/// Like [`sample_window_start`], also reporting which branch was taken.
pub fn sample_window<R: Rng>(
    rng: &mut R,
    total_frames: usize,
    t_s: usize,
    anchors: &[DivisionAnchor],
    p_aeg: f64,
) -> Result<WindowSample> {
    if t_s == 0 || t_s > total_frames {
        return Err(Error::Domain(format!(
            "window length {t_s} outside (0, {total_frames}]"
        )));
    }
    if !(0.0..=1.0).contains(&p_aeg) {
        return Err(Error::Domain(format!("p_aeg {p_aeg} outside [0,1]")));
    }
    let max_start = total_frames - t_s;
    let p: f64 = rng.gen();
    if p < p_aeg && !anchors.is_empty() {
        let anchor = anchors[rng.gen_range(0..anchors.len())];
        // Starts that contain [t_start, t_end]: s <= t_start and
        // t_end <= s + t_s - 1, clamped into [0, max_start].
        let lo = anchor.t_end.saturating_sub(t_s - 1);
        let hi = anchor.t_start.min(max_start);
        let start = if anchor.duration() <= t_s && lo <= hi {
            rng.gen_range(lo..=hi)
        } else {
            anchor.t_start.min(max_start)
        };
        return Ok(WindowSample {
            start,
            via_anchor: true,
        });
    }
    let start = if max_start == 0 {
        0
    } else {
        rng.gen_range(0..=max_start)
    };
    Ok(WindowSample {
        start,
        via_anchor: false,
    })
}

/// Start frames of the semi-overlapping loss windows: 0, l_slide,
/// 2*l_slide, ... while the window fits, plus a final tail window ending at
/// the last frame when the stride would otherwise leave frames uncovered.
pub fn sliding_windows(t_seq: usize, t_s: usize, l_slide: usize) -> Result<Vec<usize>> {
    if t_s == 0 || t_s > t_seq {
        return Err(Error::Domain(format!(
            "window length {t_s} outside (0, {t_seq}]"
        )));
    }
    if l_slide == 0 || l_slide > t_s {
        return Err(Error::Domain(format!(
            "slide {l_slide} outside (0, {t_s}]"
        )));
    }
    let mut starts = Vec::new();
    let mut s = 0;
    while s + t_s <= t_seq {
        starts.push(s);
        s += l_slide;
    }
    let last = *starts.last().expect("at least one window");
    if last + t_s < t_seq {
        starts.push(t_seq - t_s);
    }
    Ok(starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probability_examples() {
        assert_eq!(aeg_probability(0, 3, 24).unwrap(), 0.0);
        assert_eq!(aeg_probability(2, 3, 24).unwrap(), 0.25);
        // Unclamped value would be 20*3/24 = 2.5.
        assert_eq!(aeg_probability(20, 3, 24).unwrap(), 1.0);
        assert!(matches!(
            aeg_probability(1, 3, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn uniform_branch_passes_chi_square() {
        // T=40, T_s=24: starts live in {0..16}. Chi-square over 17 bins with
        // 10^4 draws; critical value for df=16 at alpha=0.01 is 32.0.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let mut hist = [0usize; 17];
        for _ in 0..draws {
            let s = sample_window_start(&mut rng, 40, 24, &[], 0.0).unwrap();
            hist[s] += 1;
        }
        let expected = draws as f64 / 17.0;
        let chi2: f64 = hist
            .iter()
            .map(|&h| (h as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 32.0, "chi-square {chi2} exceeds the 1% critical value");
    }

    #[test]
    fn anchored_branch_contains_the_event() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let anchors = [DivisionAnchor {
            t_start: 10,
            t_end: 12,
        }];
        for _ in 0..2000 {
            let s = sample_window_start(&mut rng, 40, 24, &anchors, 1.0).unwrap();
            assert!(s <= 10, "start {s} misses the event head");
            assert!(12 <= s + 23, "start {s} misses the event tail");
            assert!(s <= 16);
        }
    }

    #[test]
    fn window_equal_to_sequence_always_starts_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(sample_window_start(&mut rng, 24, 24, &[], 0.0).unwrap(), 0);
        }
    }

    #[test]
    fn oversized_event_falls_back_to_clamped_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let anchors = [DivisionAnchor {
            t_start: 30,
            t_end: 38,
        }];
        for _ in 0..100 {
            let s = sample_window_start(&mut rng, 40, 8, &anchors, 1.0).unwrap();
            assert_eq!(s, 30.min(32));
        }
    }

    #[test]
    fn trigger_rate_matches_p_aeg() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let anchors = [DivisionAnchor {
            t_start: 5,
            t_end: 6,
        }];
        let p = 0.3;
        let draws = 10_000;
        let mut hits = 0;
        for _ in 0..draws {
            if sample_window(&mut rng, 40, 24, &anchors, p)
                .unwrap()
                .via_anchor
            {
                hits += 1;
            }
        }
        let rate = hits as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (rate - p).abs() < 3.0 * sigma,
            "rate {rate} outside 3 sigma of {p}"
        );
    }

    #[test]
    fn sliding_window_examples() {
        assert_eq!(sliding_windows(24, 24, 8).unwrap(), vec![0]);
        assert_eq!(sliding_windows(40, 24, 8).unwrap(), vec![0, 8, 16]);
        assert_eq!(sliding_windows(42, 24, 8).unwrap(), vec![0, 8, 16, 18]);
    }

    #[test]
    fn sliding_windows_cover_every_frame() {
        for t_seq in 24..120 {
            let starts = sliding_windows(t_seq, 24, 8).unwrap();
            let mut covered = vec![false; t_seq];
            for s in starts {
                for f in s..s + 24 {
                    covered[f] = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "gap for T={t_seq}");
        }
    }

    #[test]
    fn every_sampled_start_is_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let anchors = [
            DivisionAnchor { t_start: 0, t_end: 1 },
            DivisionAnchor { t_start: 37, t_end: 38 },
        ];
        for _ in 0..5000 {
            let s = sample_window_start(&mut rng, 39, 13, &anchors, 0.5).unwrap();
            assert!(s <= 39 - 13);
        }
    }
}
