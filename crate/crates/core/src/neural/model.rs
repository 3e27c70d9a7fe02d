//! Two-layer temporal classifier: cell layers, optional attention, optional
//! ReLU dense layer, softmax head, and exact reverse-mode gradients.

use super::attention::{attention_backward, attention_forward, AttnCache, AttentionParams};
use super::cell::{
    gru_backward, gru_forward, lstm_backward, lstm_forward, rnn_backward, rnn_forward, CellParams,
    GruStep, LstmStep, RnnStep,
};
use super::{CellKind, TemporalModelConfig};
use crate::error::{Error, Result};
use crate::linalg::{add_assign, softmax, Mat};
use crate::num::Scalar;
use rand::Rng;

pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<S> {
    pub w: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> DenseParams<S> {
    pub fn zeros(out: usize, inp: usize) -> Self {
        DenseParams { w: Mat::zeros(out, inp), b: vec![S::zero(); out] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalModel<S> {
    pub config: TemporalModelConfig,
    pub layer1: CellParams<S>,
    pub layer2: CellParams<S>,
    pub attention: Option<AttentionParams<S>>,
    pub dense: Option<DenseParams<S>>,
    pub head: DenseParams<S>,
}

#[derive(Clone, Debug)]
pub enum StepCache<S> {
    Gru(GruStep<S>),
    Lstm(LstmStep<S>),
    Rnn(RnnStep<S>),
}

#[derive(Clone, Debug)]
pub struct LayerCache<S> {
    pub mask: Option<Vec<S>>,
    pub h: Vec<Vec<S>>,
    pub steps: Vec<StepCache<S>>,
}

#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    pub l1: LayerCache<S>,
    pub l2: LayerCache<S>,
    pub attn: Option<AttnCache<S>>,
    pub dense_pre: Option<Vec<S>>,
    pub dense_out: Option<Vec<S>>,
    pub probs: Vec<S>,
}

fn run_layer<S: Scalar>(
    cell: &CellParams<S>,
    xs: &[&[S]],
    mask: Option<Vec<S>>,
) -> LayerCache<S> {
    let hsize = cell.hidden_size();
    let mut h_prev = vec![S::zero(); hsize];
    let mut c_prev = vec![S::zero(); hsize];
    let mut h_all = Vec::with_capacity(xs.len());
    let mut steps = Vec::with_capacity(xs.len());
    for &x in xs {
        match cell {
            CellParams::Gru(p) => {
                let (h, sc) = gru_forward(p, x, &h_prev, mask.as_deref());
                h_prev = h.clone();
                h_all.push(h);
                steps.push(StepCache::Gru(sc));
            }
            CellParams::Lstm(p) => {
                let (h, sc) = lstm_forward(p, x, &h_prev, &c_prev, mask.as_deref());
                c_prev = sc.c.clone();
                h_prev = h.clone();
                h_all.push(h);
                steps.push(StepCache::Lstm(sc));
            }
            CellParams::Rnn(p) => {
                let (h, sc) = rnn_forward(p, x, &h_prev, mask.as_deref());
                h_prev = h.clone();
                h_all.push(h);
                steps.push(StepCache::Rnn(sc));
            }
        }
    }
    LayerCache { mask, h: h_all, steps }
}

/// BPTT over one layer. `dh_out[t]` carries the external gradient on h_t;
/// returns the gradients w.r.t. the layer inputs.
fn backward_layer<S: Scalar>(
    cell: &CellParams<S>,
    grads: &mut CellParams<S>,
    xs: &[&[S]],
    cache: &LayerCache<S>,
    dh_out: &[Vec<S>],
) -> Vec<Vec<S>> {
    let t_len = xs.len();
    let hsize = cell.hidden_size();
    let zero_h = vec![S::zero(); hsize];
    let mut dx_all = vec![Vec::new(); t_len];
    let mut dh_carry = vec![S::zero(); hsize];
    let mut dc_carry = vec![S::zero(); hsize];
    let mask = cache.mask.as_deref();

    for t in (0..t_len).rev() {
        let mut dh = dh_out[t].clone();
        add_assign(&mut dh, &dh_carry);
        let h_prev = if t == 0 { &zero_h } else { &cache.h[t - 1] };
        match (cell, &mut *grads, &cache.steps[t]) {
            (CellParams::Gru(p), CellParams::Gru(g), StepCache::Gru(sc)) => {
                let (dx, dhp) = gru_backward(p, g, xs[t], h_prev, mask, sc, &dh);
                dx_all[t] = dx;
                dh_carry = dhp;
            }
            (CellParams::Lstm(p), CellParams::Lstm(g), StepCache::Lstm(sc)) => {
                let c_prev = if t == 0 {
                    &zero_h
                } else {
                    match &cache.steps[t - 1] {
                        StepCache::Lstm(prev) => &prev.c,
                        _ => unreachable!(),
                    }
                };
                let (dx, dhp, dcp) =
                    lstm_backward(p, g, xs[t], c_prev, mask, sc, &dh, &dc_carry);
                dx_all[t] = dx;
                dh_carry = dhp;
                dc_carry = dcp;
            }
            (CellParams::Rnn(p), CellParams::Rnn(g), StepCache::Rnn(sc)) => {
                let (dx, dhp) = rnn_backward(p, g, xs[t], mask, sc, &dh);
                dx_all[t] = dx;
                dh_carry = dhp;
            }
            _ => unreachable!("cell/cache kind mismatch"),
        }
    }
    dx_all
}

fn dropout_mask<S: Scalar>(hsize: usize, dropout: f64, rng: &mut impl Rng) -> Option<Vec<S>> {
    if dropout <= 0.0 {
        return None;
    }
    let keep = 1.0 - dropout;
    let scale = S::of(1.0 / keep);
    Some(
        (0..hsize)
            .map(|_| if rng.gen::<f64>() < keep { scale } else { S::zero() })
            .collect(),
    )
}

impl<S: Scalar> TemporalModel<S> {
    /// Zero-parameter model of the given shape.
    pub fn zeros(config: TemporalModelConfig) -> Result<Self> {
        config.validate()?;
        let [h1, h2] = config.layer_sizes;
        let mk = |hidden: usize, input: usize| match config.cell {
            CellKind::Gru => CellParams::Gru(super::cell::GruParams::zeros(hidden, input)),
            CellKind::Lstm => CellParams::Lstm(super::cell::LstmParams::zeros(hidden, input)),
            CellKind::Rnn => CellParams::Rnn(super::cell::RnnParams::zeros(hidden, input)),
        };
        let head_in = config.dense_units.unwrap_or(h2);
        Ok(TemporalModel {
            layer1: mk(h1, config.input_dim),
            layer2: mk(h2, h1),
            attention: config.attention.then(|| AttentionParams::zeros(h2)),
            dense: config.dense_units.map(|d| DenseParams::zeros(d, h2)),
            head: DenseParams::zeros(config.num_classes, head_in),
            config,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = TemporalModel::zeros(self.config.clone()).expect("config already validated");
        z.config = self.config.clone();
        z
    }

    fn check_input(&self, steps: &Mat<S>) -> Result<()> {
        if steps.cols() != self.config.input_dim {
            return Err(Error::data(format!(
                "input dim {} does not match model input dim {}",
                steps.cols(),
                self.config.input_dim
            )));
        }
        if steps.rows() == 0 {
            return Err(Error::data("empty input sequence"));
        }
        Ok(())
    }

    fn forward_cached(
        &self,
        steps: &Mat<S>,
        masks: (Option<Vec<S>>, Option<Vec<S>>),
    ) -> Result<ForwardCache<S>> {
        self.check_input(steps)?;
        let t_len = steps.rows();
        let xs1: Vec<&[S]> = (0..t_len).map(|t| steps.row(t)).collect();
        let l1 = run_layer(&self.layer1, &xs1, masks.0);
        let xs2: Vec<&[S]> = l1.h.iter().map(|h| h.as_slice()).collect();
        let l2 = run_layer(&self.layer2, &xs2, masks.1);

        let attn = self.attention.as_ref().map(|p| attention_forward(p, &l2.h));
        let feed: &[S] = match &attn {
            Some(c) => &c.context,
            None => l2.h.last().unwrap(),
        };

        let (dense_pre, dense_out) = match &self.dense {
            Some(d) => {
                let mut pre = d.w.matvec(feed);
                add_assign(&mut pre, &d.b);
                let out: Vec<S> = pre.iter().map(|&v| v.max(S::zero())).collect();
                (Some(pre), Some(out))
            }
            None => (None, None),
        };
        let head_in: &[S] = dense_out.as_deref().unwrap_or(feed);
        let mut logits = self.head.w.matvec(head_in);
        add_assign(&mut logits, &self.head.b);
        let probs = softmax(&logits);
        Ok(ForwardCache { l1, l2, attn, dense_pre, dense_out, probs })
    }

    /// Inference-mode class probabilities (never drops state).
    pub fn forward(&self, steps: &Mat<S>) -> Result<Vec<S>> {
        Ok(self.forward_cached(steps, (None, None))?.probs)
    }

    /// Training-mode forward pass: samples one recurrent-dropout keep mask
    /// per layer per sequence, and keeps the activations for backward().
    pub fn forward_train(
        &self,
        steps: &Mat<S>,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<ForwardCache<S>> {
        let m1 = dropout_mask(self.layer1.hidden_size(), dropout, rng);
        let m2 = dropout_mask(self.layer2.hidden_size(), dropout, rng);
        self.forward_cached(steps, (m1, m2))
    }

    pub fn predict(&self, steps: &Mat<S>) -> Result<usize> {
        let probs = self.forward(steps)?;
        Ok(argmax(&probs))
    }

    /// Accumulate exact gradients of cross_entropy(forward(steps), label)
    /// into `grads` (same shapes as the model, from zeros_like()).
    pub fn backward(
        &self,
        steps: &Mat<S>,
        cache: &ForwardCache<S>,
        label: usize,
        grads: &mut TemporalModel<S>,
    ) {
        let t_len = steps.rows();
        let h2 = self.layer2.hidden_size();

        let mut dlogits = cache.probs.clone();
        dlogits[label] -= S::one();

        let feed: &[S] = match &cache.attn {
            Some(c) => &c.context,
            None => cache.l2.h.last().unwrap(),
        };
        let head_in: &[S] = cache.dense_out.as_deref().unwrap_or(feed);
        grads.head.w.add_outer(&dlogits, head_in);
        add_assign(&mut grads.head.b, &dlogits);
        let dhead_in = self.head.w.matvec_t(&dlogits);

        let dfeed: Vec<S> = match (&self.dense, &cache.dense_pre) {
            (Some(d), Some(pre)) => {
                let dpre: Vec<S> = dhead_in
                    .iter()
                    .zip(pre)
                    .map(|(&g, &p)| if p > S::zero() { g } else { S::zero() })
                    .collect();
                let gd = grads.dense.as_mut().unwrap();
                gd.w.add_outer(&dpre, feed);
                add_assign(&mut gd.b, &dpre);
                d.w.matvec_t(&dpre)
            }
            _ => dhead_in,
        };

        let mut dh2_out = vec![vec![S::zero(); h2]; t_len];
        match (&self.attention, &cache.attn) {
            (Some(p), Some(ac)) => {
                attention_backward(
                    p,
                    grads.attention.as_mut().unwrap(),
                    &cache.l2.h,
                    ac,
                    &dfeed,
                    &mut dh2_out,
                );
            }
            _ => {
                dh2_out[t_len - 1] = dfeed;
            }
        }

        let xs2: Vec<&[S]> = cache.l1.h.iter().map(|h| h.as_slice()).collect();
        let dh1_out = backward_layer(&self.layer2, &mut grads.layer2, &xs2, &cache.l2, &dh2_out);

        let xs1: Vec<&[S]> = (0..t_len).map(|t| steps.row(t)).collect();
        backward_layer(&self.layer1, &mut grads.layer1, &xs1, &cache.l1, &dh1_out);
    }

    /// Tensor names and shapes in serialization order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (name, shape) in self.layer1.tensor_specs() {
            out.push((format!("layer1.{name}"), shape));
        }
        for (name, shape) in self.layer2.tensor_specs() {
            out.push((format!("layer2.{name}"), shape));
        }
        if let Some(a) = &self.attention {
            out.push(("attention.wa".into(), vec![a.wa.rows(), a.wa.cols()]));
            out.push(("attention.va".into(), vec![a.va.len()]));
        }
        if let Some(d) = &self.dense {
            out.push(("dense.w".into(), vec![d.w.rows(), d.w.cols()]));
            out.push(("dense.b".into(), vec![d.b.len()]));
        }
        out.push(("head.w".into(), vec![self.head.w.rows(), self.head.w.cols()]));
        out.push(("head.b".into(), vec![self.head.b.len()]));
        out
    }

    pub fn flat(&self) -> Vec<&[S]> {
        let mut out = self.layer1.flat();
        out.extend(self.layer2.flat());
        if let Some(a) = &self.attention {
            out.push(a.wa.data());
            out.push(&a.va);
        }
        if let Some(d) = &self.dense {
            out.push(d.w.data());
            out.push(&d.b);
        }
        out.push(self.head.w.data());
        out.push(&self.head.b);
        out
    }

    pub fn flat_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = self.layer1.flat_mut();
        out.extend(self.layer2.flat_mut());
        if let Some(a) = &mut self.attention {
            out.push(a.wa.data_mut());
            out.push(&mut a.va);
        }
        if let Some(d) = &mut self.dense {
            out.push(d.w.data_mut());
            out.push(&mut d.b);
        }
        out.push(self.head.w.data_mut());
        out.push(&mut self.head.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.flat().iter().map(|t| t.len()).sum()
    }
}

pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Categorical cross-entropy with the probability floored at 1e-12.
pub fn cross_entropy<S: Scalar>(probs: &[S], label: usize) -> S {
    let p = probs[label].max(S::of(PROB_FLOOR));
    -p.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init::init_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config(cell: CellKind, attention: bool) -> TemporalModelConfig {
        TemporalModelConfig {
            cell,
            layer_sizes: [3, 2],
            attention,
            dense_units: attention.then_some(4),
            num_classes: 3,
            input_dim: 5,
        }
    }

    fn random_steps(t: usize, f: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        use rand::Rng;
        Mat::from_fn(t, f, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = TemporalModel::<f64>::zeros(tiny_config(CellKind::Gru, false)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let probs = model.forward(&random_steps(4, 5, &mut rng)).unwrap();
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let model = init_model::<f64>(&tiny_config(CellKind::Lstm, true), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let steps = random_steps(6, 5, &mut rng);
        let a = model.forward(&steps).unwrap();
        let b = model.forward(&steps).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for cell in [CellKind::Gru, CellKind::Lstm, CellKind::Rnn] {
            let model = init_model::<f64>(&tiny_config(cell, true), 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let probs = model.forward(&random_steps(5, 5, &mut rng)).unwrap();
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn zero_dropout_train_matches_inference() {
        let model = init_model::<f64>(&tiny_config(CellKind::Gru, true), 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let steps = random_steps(5, 5, &mut rng);
        let cache = model.forward_train(&steps, 0.0, &mut rng).unwrap();
        let probs = model.forward(&steps).unwrap();
        assert_eq!(cache.probs, probs);
    }

    #[test]
    fn forward_matches_chained_step_oracle() {
        // compose the public single-step ops by hand and compare
        let config = tiny_config(CellKind::Gru, false);
        let model = init_model::<f64>(&config, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let steps = random_steps(4, 5, &mut rng);

        let (p1, p2) = match (&model.layer1, &model.layer2) {
            (CellParams::Gru(a), CellParams::Gru(b)) => (a, b),
            _ => unreachable!(),
        };
        let mut h1 = vec![0.0; 3];
        let mut h2 = vec![0.0; 2];
        for t in 0..4 {
            h1 = crate::neural::cell::gru_step(steps.row(t), &h1, p1);
            h2 = crate::neural::cell::gru_step(&h1, &h2, p2);
        }
        let mut logits = model.head.w.matvec(&h2);
        add_assign(&mut logits, &model.head.b);
        let expect = softmax(&logits);

        let got = model.forward(&steps).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
        let u = 1.0 / 3.0;
        assert!((cross_entropy(&[u, u, u], 0) - 3.0f64.ln()).abs() < 1e-12);
        let probs = [0.2, 0.5, 0.3];
        assert!((cross_entropy(&probs, 2) - (-(0.3f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_input_zero_params_head_bias_gradient() {
        let config = tiny_config(CellKind::Gru, false);
        let model = TemporalModel::<f64>::zeros(config).unwrap();
        let steps = Mat::zeros(4, 5);
        let cache = model
            .forward_train(&steps, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let mut grads = model.zeros_like();
        model.backward(&steps, &cache, 1, &mut grads);
        // head bias gradient = probs - onehot
        assert!((grads.head.b[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((grads.head.b[1] + 2.0 / 3.0).abs() < 1e-12);
        // no signal reaches recurrent weights through zero activations
        for slice in grads.layer1.flat() {
            assert!(slice.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }
}
