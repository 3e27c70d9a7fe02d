//! Parameter initialization: Glorot-uniform input kernels, orthogonal
//! recurrent kernels, zero biases except the LSTM forget gate (1).

use super::cell::{CellParams, GruParams, LstmParams, RnnParams};
use super::model::{DenseParams, TemporalModel};
use super::attention::AttentionParams;
use super::{CellKind, TemporalModelConfig};
use crate::error::Result;
use crate::linalg::{dot, Mat};
use crate::num::Scalar;
use crate::rng::rng_for;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn glorot<S: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<S> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| S::of(rng.gen_range(-limit..limit)))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian matrix.
fn orthogonal<S: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Mat<S> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| standard_normal(rng)).collect())
            .collect();
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let proj = dot(&rows[i], &rows[j]);
                let prev = rows[j].clone();
                for (a, b) in rows[i].iter_mut().zip(&prev) {
                    *a -= proj * b;
                }
            }
            let norm = dot(&rows[i], &rows[i]).sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for v in rows[i].iter_mut() {
                *v /= norm;
            }
        }
        if ok {
            return Mat::from_fn(n, n, |i, j| S::of(rows[i][j]));
        }
    }
}

fn init_cell<S: Scalar>(
    kind: CellKind,
    hidden: usize,
    input: usize,
    rng: &mut ChaCha8Rng,
) -> CellParams<S> {
    match kind {
        CellKind::Gru => {
            let mut p = GruParams::zeros(hidden, input);
            p.wz = glorot(hidden, input, rng);
            p.uz = orthogonal(hidden, rng);
            p.wr = glorot(hidden, input, rng);
            p.ur = orthogonal(hidden, rng);
            p.wh = glorot(hidden, input, rng);
            p.uh = orthogonal(hidden, rng);
            CellParams::Gru(p)
        }
        CellKind::Lstm => {
            let mut p = LstmParams::zeros(hidden, input);
            p.wi = glorot(hidden, input, rng);
            p.ui = orthogonal(hidden, rng);
            p.wf = glorot(hidden, input, rng);
            p.uf = orthogonal(hidden, rng);
            p.bf = vec![S::one(); hidden];
            p.wo = glorot(hidden, input, rng);
            p.uo = orthogonal(hidden, rng);
            p.wg = glorot(hidden, input, rng);
            p.ug = orthogonal(hidden, rng);
            CellParams::Lstm(p)
        }
        CellKind::Rnn => {
            let mut p = RnnParams::zeros(hidden, input);
            p.w = glorot(hidden, input, rng);
            p.u = orthogonal(hidden, rng);
            CellParams::Rnn(p)
        }
    }
}

pub fn init_model<S: Scalar>(config: &TemporalModelConfig, seed: u64) -> Result<TemporalModel<S>> {
    config.validate()?;
    let mut rng = rng_for(seed, "model-init");
    let [h1, h2] = config.layer_sizes;
    let layer1 = init_cell(config.cell, h1, config.input_dim, &mut rng);
    let layer2 = init_cell(config.cell, h2, h1, &mut rng);
    let attention = config.attention.then(|| AttentionParams {
        wa: glorot(h2, h2, &mut rng),
        va: {
            let limit = (6.0 / (h2 + 1) as f64).sqrt();
            (0..h2).map(|_| S::of(rng.gen_range(-limit..limit))).collect()
        },
    });
    let dense = config.dense_units.map(|d| DenseParams {
        w: glorot(d, h2, &mut rng),
        b: vec![S::zero(); d],
    });
    let head_in = config.dense_units.unwrap_or(h2);
    let head = DenseParams {
        w: glorot(config.num_classes, head_in, &mut rng),
        b: vec![S::zero(); config.num_classes],
    };
    Ok(TemporalModel {
        config: config.clone(),
        layer1,
        layer2,
        attention,
        dense,
        head,
    })
}
