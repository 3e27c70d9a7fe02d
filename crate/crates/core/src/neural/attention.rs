//! Additive temporal attention over a layer's hidden-state sequence:
//! score_t = v . tanh(Wa h_t), alpha = softmax(score), context = sum alpha_t h_t.

use crate::linalg::{dot, softmax, Mat};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<S> {
    pub wa: Mat<S>,
    pub va: Vec<S>,
}

impl<S: Scalar> AttentionParams<S> {
    pub fn zeros(hidden: usize) -> Self {
        AttentionParams { wa: Mat::zeros(hidden, hidden), va: vec![S::zero(); hidden] }
    }
}

#[derive(Clone, Debug)]
pub struct AttnCache<S> {
    pub tanh_wa: Vec<Vec<S>>,
    pub alphas: Vec<S>,
    pub context: Vec<S>,
}

pub fn attention_forward<S: Scalar>(p: &AttentionParams<S>, hs: &[Vec<S>]) -> AttnCache<S> {
    assert!(!hs.is_empty());
    let tanh_wa: Vec<Vec<S>> = hs
        .iter()
        .map(|h| p.wa.matvec(h).into_iter().map(|a| a.tanh()).collect())
        .collect();
    let scores: Vec<S> = tanh_wa.iter().map(|t| dot(&p.va, t)).collect();
    let alphas = softmax(&scores);
    let hsize = hs[0].len();
    let mut context = vec![S::zero(); hsize];
    for (a, h) in alphas.iter().zip(hs) {
        for k in 0..hsize {
            context[k] += *a * h[k];
        }
    }
    AttnCache { tanh_wa, alphas, context }
}

/// Spec-level op: attention weights and context for a hidden-state sequence.
pub fn attention<S: Scalar>(p: &AttentionParams<S>, hs: &[Vec<S>]) -> (Vec<S>, Vec<S>) {
    let c = attention_forward(p, hs);
    (c.context, c.alphas)
}

/// Accumulates parameter gradients into `g` and per-step hidden gradients
/// into `dhs` given the gradient of the loss w.r.t. the context vector.
pub fn attention_backward<S: Scalar>(
    p: &AttentionParams<S>,
    g: &mut AttentionParams<S>,
    hs: &[Vec<S>],
    cache: &AttnCache<S>,
    dctx: &[S],
    dhs: &mut [Vec<S>],
) {
    let t_len = hs.len();
    let hsize = dctx.len();
    let one = S::one();

    let dalpha: Vec<S> = hs.iter().map(|h| dot(dctx, h)).collect();
    let mut mix = S::zero();
    for t in 0..t_len {
        mix += cache.alphas[t] * dalpha[t];
    }
    for t in 0..t_len {
        let a = cache.alphas[t];
        for k in 0..hsize {
            dhs[t][k] += a * dctx[k];
        }
        let dscore = a * (dalpha[t] - mix);
        let tanh_t = &cache.tanh_wa[t];
        let mut datt = vec![S::zero(); hsize];
        for k in 0..hsize {
            g.va[k] += dscore * tanh_t[k];
            datt[k] = dscore * p.va[k] * (one - tanh_t[k] * tanh_t[k]);
        }
        g.wa.add_outer(&datt, &hs[t]);
        let back = p.wa.matvec_t(&datt);
        for k in 0..hsize {
            dhs[t][k] += back[k];
        }
    }
}
