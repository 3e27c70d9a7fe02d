//! Per-frame traffic graphs: weighted adjacency matrices over road users and
//! their grayscale image rendering.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num::Scalar;
use crate::types::Label;

/// Symmetric weighted adjacency matrix for one frame. Rows/columns follow
/// `ids`, which is sorted ascending so the ordering is stable across frames.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix<S> {
    pub ids: Vec<u64>,
    pub w: Mat<S>,
}

#[derive(Clone, Debug)]
pub struct AdjacencySequence<S> {
    pub label: Label,
    pub region_id: String,
    pub mats: Vec<AdjacencyMatrix<S>>,
}

/// Square grayscale image with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyImage<S> {
    pub side: usize,
    pub pixels: Vec<S>,
}

impl<S: Scalar> AdjacencyImage<S> {
    pub fn get(&self, i: usize, j: usize) -> S {
        self.pixels[i * self.side + j]
    }
}

/// Weight e^(-d) for pairs strictly closer than `mu_m` meters, 0 otherwise.
/// Each pair is computed once and mirrored, so the matrix is bitwise symmetric.
pub fn build_adjacency<S: Scalar>(frame: &[(u64, S, S)], mu_m: S) -> Result<AdjacencyMatrix<S>> {
    let mut users: Vec<(u64, S, S)> = frame.to_vec();
    users.sort_by_key(|u| u.0);
    for pair in users.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::data(format!(
                "duplicate track id {} within one frame",
                pair[0].0
            )));
        }
    }
    let n = users.len();
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dx = users[i].1 - users[j].1;
            let dy = users[i].2 - users[j].2;
            let d = (dx * dx + dy * dy).sqrt();
            if d < mu_m {
                let weight = (-d).exp();
                w[(i, j)] = weight;
                w[(j, i)] = weight;
            }
        }
    }
    Ok(AdjacencyMatrix { ids: users.iter().map(|u| u.0).collect(), w })
}

/// Fraction of strictly positive off-diagonal entries; 0 for n <= 1.
pub fn density<S: Scalar>(m: &AdjacencyMatrix<S>) -> f64 {
    let n = m.ids.len();
    if n <= 1 {
        return 0.0;
    }
    let mut nnz = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && m.w[(i, j)] > S::zero() {
                nnz += 1;
            }
        }
    }
    nnz as f64 / (n * (n - 1)) as f64
}

/// Place the matrix in the top-left corner of a `canvas_n` square canvas and
/// downscale to `out_size` by exact area averaging.
pub fn render_image<S: Scalar>(
    m: &AdjacencyMatrix<S>,
    canvas_n: usize,
    out_size: usize,
) -> Result<AdjacencyImage<S>> {
    let n = m.ids.len();
    if n > canvas_n {
        return Err(Error::data(format!(
            "frame has {n} users, above the canvas capacity {canvas_n}"
        )));
    }
    if out_size == 0 {
        return Err(Error::data("output image size must be >= 1"));
    }

    // per output index: (input cell, overlap length) pairs along one axis
    let ratio = canvas_n as f64 / out_size as f64;
    let axis_weights: Vec<Vec<(usize, f64)>> = (0..out_size)
        .map(|o| {
            let lo = o as f64 * ratio;
            let hi = (o + 1) as f64 * ratio;
            let mut ws = Vec::new();
            let mut c = lo.floor() as usize;
            while (c as f64) < hi && c < canvas_n {
                let overlap = hi.min((c + 1) as f64) - lo.max(c as f64);
                if overlap > 0.0 {
                    ws.push((c, overlap));
                }
                c += 1;
            }
            ws
        })
        .collect();

    let cell = |i: usize, j: usize| -> S {
        if i < n && j < n {
            m.w[(i, j)]
        } else {
            S::zero()
        }
    };

    let area = S::of(ratio * ratio);
    let mut pixels = Vec::with_capacity(out_size * out_size);
    for oi in 0..out_size {
        for oj in 0..out_size {
            let mut acc = S::zero();
            for &(ci, wi) in &axis_weights[oi] {
                if ci >= n {
                    continue;
                }
                for &(cj, wj) in &axis_weights[oj] {
                    acc += S::of(wi * wj) * cell(ci, cj);
                }
            }
            pixels.push(acc / area);
        }
    }
    Ok(AdjacencyImage { side: out_size, pixels })
}
