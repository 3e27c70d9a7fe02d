//! Fixed-dimension feature extraction from adjacency images and sequence
//! length normalization.

use crate::error::{Error, Result};
use crate::graph::AdjacencyImage;
use crate::linalg::Mat;
use crate::num::Scalar;
use crate::types::Label;

pub const FEATURE_DIM: usize = 147;
pub const SEQ_LEN: usize = 50;

/// T x F tensor for one labeled sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence<S> {
    pub label: Label,
    pub region_id: String,
    pub steps: Mat<S>,
}

/// Pluggable image-to-vector front end.
pub trait FeatureExtractor<S: Scalar> {
    fn dim(&self) -> usize;
    fn extract(&self, img: &AdjacencyImage<S>) -> Result<Vec<S>>;
}

/// Deterministic pooled extractor: 7x7 grid of (mean, max, nonzero fraction)
/// block statistics, 147 values total.
#[derive(Clone, Copy, Debug, Default)]
pub struct PooledExtractor;

pub const POOL_GRID: usize = 7;

impl<S: Scalar> FeatureExtractor<S> for PooledExtractor {
    fn dim(&self) -> usize {
        FEATURE_DIM
    }

    fn extract(&self, img: &AdjacencyImage<S>) -> Result<Vec<S>> {
        extract_features(img)
    }
}

/// Block statistics in row-major block order, channel-minor:
/// [b0 mean, b0 max, b0 nonzero, b1 mean, ...].
pub fn extract_features<S: Scalar>(img: &AdjacencyImage<S>) -> Result<Vec<S>> {
    if img.side == 0 || img.side % POOL_GRID != 0 {
        return Err(Error::data(format!(
            "image side {} is not divisible by {POOL_GRID}",
            img.side
        )));
    }
    let block = img.side / POOL_GRID;
    let block_px = S::of((block * block) as f64);
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for bi in 0..POOL_GRID {
        for bj in 0..POOL_GRID {
            let mut sum = S::zero();
            let mut max = S::zero();
            let mut nonzero = 0usize;
            for i in bi * block..(bi + 1) * block {
                for j in bj * block..(bj + 1) * block {
                    let v = img.get(i, j);
                    sum += v;
                    max = max.max(v);
                    if v != S::zero() {
                        nonzero += 1;
                    }
                }
            }
            out.push(sum / block_px);
            out.push(max);
            out.push(S::of(nonzero as f64) / block_px);
        }
    }
    Ok(out)
}

/// Fit a variable-length sequence of feature vectors to exactly `t_len` steps:
/// evenly spaced subsampling when too long, pad-by-repeating-last when short.
pub fn normalize_length<S: Scalar>(seq: &[Vec<S>], t_len: usize) -> Result<Mat<S>> {
    if seq.is_empty() {
        return Err(Error::data("cannot normalize an empty sequence"));
    }
    assert!(t_len >= 1);
    let len = seq.len();
    let rows: Vec<Vec<S>> = if len == t_len {
        seq.to_vec()
    } else if len > t_len {
        (0..t_len)
            .map(|i| {
                let idx = if t_len == 1 {
                    0
                } else {
                    ((i * (len - 1)) as f64 / (t_len - 1) as f64).round() as usize
                };
                seq[idx].clone()
            })
            .collect()
    } else {
        let mut rows = seq.to_vec();
        rows.resize(t_len, seq.last().unwrap().clone());
        rows
    };
    Ok(Mat::from_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(side: usize, f: impl Fn(usize, usize) -> f64) -> AdjacencyImage<f64> {
        let mut pixels = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                pixels.push(f(i, j));
            }
        }
        AdjacencyImage { side, pixels }
    }

    #[test]
    fn all_zero_image_gives_zeros() {
        let f = extract_features(&image(56, |_, _| 0.0)).unwrap();
        assert_eq!(f.len(), FEATURE_DIM);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_image_gives_ones() {
        let f = extract_features(&image(56, |_, _| 1.0)).unwrap();
        assert!(f.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_hot_pixel_block_statistics() {
        // oracle: direct block statistics, block size 8x8 = 64 pixels
        let f = extract_features(&image(56, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }))
            .unwrap();
        assert!((f[0] - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(f[1], 1.0);
        assert!((f[2] - 1.0 / 64.0).abs() < 1e-15);
        assert!(f[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_side_not_divisible_by_grid() {
        assert!(extract_features(&image(50, |_, _| 0.0)).is_err());
    }

    #[test]
    fn normalize_identity_pad_and_subsample() {
        let vec_of = |v: f64| vec![v, v + 1.0];
        let same: Vec<Vec<f64>> = (0..50).map(|i| vec_of(i as f64)).collect();
        assert_eq!(normalize_length(&same, 50).unwrap(), Mat::from_rows(&same));

        let one = vec![vec_of(7.0)];
        let padded = normalize_length(&one, 50).unwrap();
        assert_eq!(padded.rows(), 50);
        for i in 0..50 {
            assert_eq!(padded.row(i), &one[0][..]);
        }

        // oracle: idx = round(i*(len-1)/(T-1)); len 99, T 50 -> 0,2,4,...,98
        let long: Vec<Vec<f64>> = (0..99).map(|i| vec_of(i as f64)).collect();
        let sub = normalize_length(&long, 50).unwrap();
        for i in 0..50 {
            assert_eq!(sub.row(i)[0], (2 * i) as f64);
        }
    }

    #[test]
    fn normalize_preserves_endpoints_when_long() {
        let seq: Vec<Vec<f64>> = (0..83).map(|i| vec![i as f64]).collect();
        let m = normalize_length(&seq, 50).unwrap();
        assert_eq!(m.row(0)[0], 0.0);
        assert_eq!(m.row(49)[0], 82.0);
    }

    #[test]
    fn dominance_in_mean_and_max_channels() {
        let small = extract_features(&image(56, |i, j| ((i + j) % 5) as f64 * 0.1)).unwrap();
        let big = extract_features(&image(56, |i, j| ((i + j) % 5) as f64 * 0.1 + 0.2)).unwrap();
        for b in 0..POOL_GRID * POOL_GRID {
            assert!(big[3 * b] >= small[3 * b]);
            assert!(big[3 * b + 1] >= small[3 * b + 1]);
        }
    }
}
