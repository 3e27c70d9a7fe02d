//! Synthetic trajectory generator: realizes the density signatures of the
//! three traffic states (contracting, rigid, dispersing point clouds) so the
//! pipeline is trainable and testable without real data.

use crate::error::{Error, Result};
use crate::ingest::{Frame, RawSequence};
use crate::num::Scalar;
use crate::rng::rng_for;
use crate::types::Label;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    /// inclusive range of road users per sequence
    pub n_users: (usize, usize),
    pub duration_s: f64,
    pub rate_hz: f64,
    /// convergence target for clumping sequences
    pub stop_line: (f64, f64),
    /// clumping start spread (m)
    pub approach_spread_m: f64,
    /// unclumping start zone (m)
    pub packed_zone_m: f64,
    /// neutral common drift speed range (m/s)
    pub drift_speed: (f64, f64),
    /// position jitter sigma (m)
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: (20, 60),
            duration_s: 10.0,
            rate_hz: 5.0,
            stop_line: (50.0, 50.0),
            approach_spread_m: 60.0,
            packed_zone_m: 15.0,
            drift_speed: (0.5, 1.5),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users.0 == 0 || self.n_users.0 > self.n_users.1 {
            return Err(Error::data("n_users range must be nonempty and positive"));
        }
        if self.duration_s <= 0.0 || self.rate_hz <= 0.0 {
            return Err(Error::data("duration and rate must be positive"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::data("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generate one labeled sequence.
///
/// clumping: users spread over the approach contract toward the stop line
/// (every pairwise distance shrinks monotonically). neutral: rigid cloud
/// under a common drift. unclumping: packed cloud expands outward.
pub fn generate<S: Scalar>(
    label: Label,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RawSequence<S>> {
    cfg.validate()?;
    let n = rng.gen_range(cfg.n_users.0..=cfg.n_users.1);
    let n_frames = (cfg.duration_s * cfg.rate_hz).floor() as usize + 1;
    let (cx, cy) = cfg.stop_line;

    let spread = match label {
        Label::Clumping => cfg.approach_spread_m,
        Label::Neutral => cfg.approach_spread_m * 0.5,
        Label::Unclumping => cfg.packed_zone_m,
    };
    let base: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                cx + rng.gen_range(-0.5..0.5) * spread,
                cy + rng.gen_range(-0.5..0.5) * spread,
            )
        })
        .collect();
    let drift_angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let drift_speed = rng.gen_range(cfg.drift_speed.0..cfg.drift_speed.1);

    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let t = k as f64 / cfg.rate_hz;
        let frac = if n_frames > 1 { k as f64 / (n_frames - 1) as f64 } else { 0.0 };
        let users: Vec<(u64, S, S)> = base
            .iter()
            .enumerate()
            .map(|(id, &(bx, by))| {
                let (x, y) = match label {
                    // contract toward the stop line: scale offsets by s(t) in [0.1, 1]
                    Label::Clumping => {
                        let s = 1.0 - 0.9 * frac;
                        (cx + (bx - cx) * s, cy + (by - cy) * s)
                    }
                    Label::Neutral => (
                        bx + drift_speed * t * drift_angle.cos(),
                        by + drift_speed * t * drift_angle.sin(),
                    ),
                    // disperse: scale offsets by g(t) in [1, 5]
                    Label::Unclumping => {
                        let g = 1.0 + 4.0 * frac;
                        (cx + (bx - cx) * g, cy + (by - cy) * g)
                    }
                };
                let (nx, ny) = if cfg.noise_sigma > 0.0 {
                    (gaussian(rng) * cfg.noise_sigma, gaussian(rng) * cfg.noise_sigma)
                } else {
                    (0.0, 0.0)
                };
                (id as u64, S::of(x + nx), S::of(y + ny))
            })
            .collect();
        frames.push(Frame { t: S::of(t), users });
    }
    Ok(RawSequence {
        region_id: String::new(),
        label,
        frames,
        unique_user_count: n,
    })
}

/// Deterministic per seed; labels balanced as requested
/// (counts order: neutral, clumping, unclumping).
pub fn generate_dataset<S: Scalar>(
    counts: [usize; 3],
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<RawSequence<S>>> {
    let mut out = Vec::new();
    let mut k = 0usize;
    for (ci, &count) in counts.iter().enumerate() {
        let label = Label::from_index(ci).unwrap();
        for _ in 0..count {
            let mut rng = rng_for(seed, &format!("synth-seq-{k}"));
            let mut seq = generate::<S>(label, cfg, &mut rng)?;
            seq.region_id = format!("s{k:04}{}", label.code());
            out.push(seq);
            k += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_adjacency, density};

    fn mean_pairwise(frame: &Frame<f64>) -> f64 {
        let n = frame.users.len();
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                let dx = frame.users[i].1 - frame.users[j].1;
                let dy = frame.users[i].2 - frame.users[j].2;
                sum += (dx * dx + dy * dy).sqrt();
                cnt += 1;
            }
        }
        sum / cnt as f64
    }

    fn window_mean(frames: &[Frame<f64>], f: impl Fn(&Frame<f64>) -> f64, last: bool) -> f64 {
        let w = (frames.len() as f64 * 0.2).ceil() as usize;
        let slice = if last { &frames[frames.len() - w..] } else { &frames[..w] };
        slice.iter().map(&f).sum::<f64>() / w as f64
    }

    #[test]
    fn clumping_contracts_pairwise_distances() {
        let cfg = SynthConfig { noise_sigma: 0.3, ..Default::default() };
        let mut rng = rng_for(1, "t");
        let seq = generate::<f64>(Label::Clumping, &cfg, &mut rng).unwrap();
        let first = window_mean(&seq.frames, mean_pairwise, false);
        let last = window_mean(&seq.frames, mean_pairwise, true);
        assert!(last < first);
    }

    #[test]
    fn unclumping_density_drops() {
        let cfg = SynthConfig::default();
        let mut rng = rng_for(2, "t");
        let seq = generate::<f64>(Label::Unclumping, &cfg, &mut rng).unwrap();
        let d = |f: &Frame<f64>| density(&build_adjacency(&f.users, 10.0).unwrap());
        let first = window_mean(&seq.frames, d, false);
        let last = window_mean(&seq.frames, d, true);
        assert!(last < first);
    }

    #[test]
    fn neutral_noise_free_is_rigid() {
        let cfg = SynthConfig { noise_sigma: 0.0, ..Default::default() };
        let mut rng = rng_for(3, "t");
        let seq = generate::<f64>(Label::Neutral, &cfg, &mut rng).unwrap();
        let first = mean_pairwise(&seq.frames[0]);
        for f in &seq.frames {
            assert!((mean_pairwise(f) - first).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_free_density_is_monotone_per_state() {
        let cfg = SynthConfig::default();
        for (label, sign) in [(Label::Clumping, 1.0), (Label::Unclumping, -1.0)] {
            let mut rng = rng_for(4, "t");
            let seq = generate::<f64>(label, &cfg, &mut rng).unwrap();
            let ds: Vec<f64> = seq
                .frames
                .iter()
                .map(|f| density(&build_adjacency(&f.users, 10.0).unwrap()))
                .collect();
            for pair in ds.windows(2) {
                assert!(sign * (pair[1] - pair[0]) >= 0.0);
            }
        }
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let cfg = SynthConfig::default();
        assert!(generate_dataset::<f64>([0, 0, 0], &cfg, 1).unwrap().is_empty());
        let a = generate_dataset::<f64>([5, 5, 5], &cfg, 1).unwrap();
        assert_eq!(a.len(), 15);
        for (i, label) in Label::ALL.iter().enumerate() {
            assert_eq!(a.iter().filter(|s| s.label == *label).count(), 5, "label {i}");
        }
        let b = generate_dataset::<f64>([5, 5, 5], &cfg, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frames_satisfy_raw_sequence_invariants() {
        let cfg = SynthConfig::default();
        let mut rng = rng_for(5, "t");
        let seq = generate::<f64>(Label::Clumping, &cfg, &mut rng).unwrap();
        assert_eq!(seq.frames.len(), 51);
        for (k, f) in seq.frames.iter().enumerate() {
            assert_eq!(f.t, k as f64 / 5.0);
            assert_eq!(f.users.len(), seq.unique_user_count);
        }
    }
}
