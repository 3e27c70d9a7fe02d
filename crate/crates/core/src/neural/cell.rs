//! Recurrent cell parameter sets and single-step forward/backward kernels.
//!
//! The recurrent dropout mask, when present, is applied to `h_prev` wherever
//! it enters a gate computation (variational style, scaled at train time);
//! the final state mix always sees the raw `h_prev`.

use crate::linalg::{add_assign, Mat};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<S> {
    pub wz: Mat<S>,
    pub uz: Mat<S>,
    pub bz: Vec<S>,
    pub wr: Mat<S>,
    pub ur: Mat<S>,
    pub br: Vec<S>,
    pub wh: Mat<S>,
    pub uh: Mat<S>,
    pub bh: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<S> {
    pub wi: Mat<S>,
    pub ui: Mat<S>,
    pub bi: Vec<S>,
    pub wf: Mat<S>,
    pub uf: Mat<S>,
    pub bf: Vec<S>,
    pub wo: Mat<S>,
    pub uo: Mat<S>,
    pub bo: Vec<S>,
    pub wg: Mat<S>,
    pub ug: Mat<S>,
    pub bg: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams<S> {
    pub w: Mat<S>,
    pub u: Mat<S>,
    pub b: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams<S> {
    Gru(GruParams<S>),
    Lstm(LstmParams<S>),
    Rnn(RnnParams<S>),
}

impl<S: Scalar> CellParams<S> {
    pub fn hidden_size(&self) -> usize {
        match self {
            CellParams::Gru(p) => p.wz.rows(),
            CellParams::Lstm(p) => p.wi.rows(),
            CellParams::Rnn(p) => p.w.rows(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            CellParams::Gru(p) => p.wz.cols(),
            CellParams::Lstm(p) => p.wi.cols(),
            CellParams::Rnn(p) => p.w.cols(),
        }
    }
}

fn masked<S: Scalar>(h_prev: &[S], mask: Option<&[S]>) -> Vec<S> {
    match mask {
        Some(m) => h_prev.iter().zip(m).map(|(&h, &m)| h * m).collect(),
        None => h_prev.to_vec(),
    }
}

// ---------------------------------------------------------------- GRU

#[derive(Clone, Debug)]
pub struct GruStep<S> {
    pub hm: Vec<S>,
    pub z: Vec<S>,
    pub r: Vec<S>,
    pub uh_hm: Vec<S>,
    pub hbar: Vec<S>,
}

pub fn gru_forward<S: Scalar>(
    p: &GruParams<S>,
    x: &[S],
    h_prev: &[S],
    mask: Option<&[S]>,
) -> (Vec<S>, GruStep<S>) {
    let hm = masked(h_prev, mask);
    let h_size = p.bz.len();

    let mut az = p.wz.matvec(x);
    add_assign(&mut az, &p.uz.matvec(&hm));
    add_assign(&mut az, &p.bz);
    let z: Vec<S> = az.into_iter().map(Scalar::sigmoid).collect();

    let mut ar = p.wr.matvec(x);
    add_assign(&mut ar, &p.ur.matvec(&hm));
    add_assign(&mut ar, &p.br);
    let r: Vec<S> = ar.into_iter().map(Scalar::sigmoid).collect();

    let uh_hm = p.uh.matvec(&hm);
    let mut ah = p.wh.matvec(x);
    for i in 0..h_size {
        ah[i] += r[i] * uh_hm[i] + p.bh[i];
    }
    let hbar: Vec<S> = ah.into_iter().map(|a| a.tanh()).collect();

    let one = S::one();
    let h: Vec<S> = (0..h_size)
        .map(|i| z[i] * hbar[i] + (one - z[i]) * h_prev[i])
        .collect();
    (h, GruStep { hm, z, r, uh_hm, hbar })
}

/// Spec-level single GRU step (Eqs. 2-5 with zero-initialized biases).
pub fn gru_step<S: Scalar>(x: &[S], h_prev: &[S], p: &GruParams<S>) -> Vec<S> {
    gru_forward(p, x, h_prev, None).0
}

#[allow(clippy::too_many_arguments)]
pub fn gru_backward<S: Scalar>(
    p: &GruParams<S>,
    g: &mut GruParams<S>,
    x: &[S],
    h_prev: &[S],
    mask: Option<&[S]>,
    sc: &GruStep<S>,
    dh: &[S],
) -> (Vec<S>, Vec<S>) {
    let h_size = dh.len();
    let one = S::one();

    let mut daz = vec![S::zero(); h_size];
    let mut dah = vec![S::zero(); h_size];
    let mut dh_prev = vec![S::zero(); h_size];
    for i in 0..h_size {
        let z = sc.z[i];
        daz[i] = dh[i] * (sc.hbar[i] - h_prev[i]) * z * (one - z);
        dah[i] = dh[i] * z * (one - sc.hbar[i] * sc.hbar[i]);
        dh_prev[i] = dh[i] * (one - z);
    }

    let mut dar = vec![S::zero(); h_size];
    let mut duh = vec![S::zero(); h_size];
    for i in 0..h_size {
        let r = sc.r[i];
        dar[i] = dah[i] * sc.uh_hm[i] * r * (one - r);
        duh[i] = dah[i] * r;
    }

    g.wh.add_outer(&dah, x);
    add_assign(&mut g.bh, &dah);
    g.uh.add_outer(&duh, &sc.hm);
    g.wr.add_outer(&dar, x);
    add_assign(&mut g.br, &dar);
    g.ur.add_outer(&dar, &sc.hm);
    g.wz.add_outer(&daz, x);
    add_assign(&mut g.bz, &daz);
    g.uz.add_outer(&daz, &sc.hm);

    let mut dhm = p.uh.matvec_t(&duh);
    add_assign(&mut dhm, &p.ur.matvec_t(&dar));
    add_assign(&mut dhm, &p.uz.matvec_t(&daz));
    match mask {
        Some(m) => {
            for i in 0..h_size {
                dh_prev[i] += m[i] * dhm[i];
            }
        }
        None => add_assign(&mut dh_prev, &dhm),
    }

    let mut dx = p.wz.matvec_t(&daz);
    add_assign(&mut dx, &p.wr.matvec_t(&dar));
    add_assign(&mut dx, &p.wh.matvec_t(&dah));
    (dx, dh_prev)
}

// ---------------------------------------------------------------- LSTM

#[derive(Clone, Debug)]
pub struct LstmStep<S> {
    pub hm: Vec<S>,
    pub i: Vec<S>,
    pub f: Vec<S>,
    pub o: Vec<S>,
    pub g: Vec<S>,
    pub c: Vec<S>,
    pub tanh_c: Vec<S>,
}

pub fn lstm_forward<S: Scalar>(
    p: &LstmParams<S>,
    x: &[S],
    h_prev: &[S],
    c_prev: &[S],
    mask: Option<&[S]>,
) -> (Vec<S>, LstmStep<S>) {
    let hm = masked(h_prev, mask);
    let h_size = p.bi.len();

    let gate = |w: &Mat<S>, u: &Mat<S>, b: &[S]| -> Vec<S> {
        let mut a = w.matvec(x);
        add_assign(&mut a, &u.matvec(&hm));
        add_assign(&mut a, b);
        a
    };
    let i: Vec<S> = gate(&p.wi, &p.ui, &p.bi).into_iter().map(Scalar::sigmoid).collect();
    let f: Vec<S> = gate(&p.wf, &p.uf, &p.bf).into_iter().map(Scalar::sigmoid).collect();
    let o: Vec<S> = gate(&p.wo, &p.uo, &p.bo).into_iter().map(Scalar::sigmoid).collect();
    let g: Vec<S> = gate(&p.wg, &p.ug, &p.bg).into_iter().map(|a| a.tanh()).collect();

    let mut c = vec![S::zero(); h_size];
    let mut tanh_c = vec![S::zero(); h_size];
    let mut h = vec![S::zero(); h_size];
    for k in 0..h_size {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    (h, LstmStep { hm, i, f, o, g, c, tanh_c })
}

/// Spec-level single LSTM step; returns (h, c).
pub fn lstm_step<S: Scalar>(
    x: &[S],
    h_prev: &[S],
    c_prev: &[S],
    p: &LstmParams<S>,
) -> (Vec<S>, Vec<S>) {
    let (h, sc) = lstm_forward(p, x, h_prev, c_prev, None);
    (h, sc.c)
}

#[allow(clippy::too_many_arguments)]
pub fn lstm_backward<S: Scalar>(
    p: &LstmParams<S>,
    g: &mut LstmParams<S>,
    x: &[S],
    c_prev: &[S],
    mask: Option<&[S]>,
    sc: &LstmStep<S>,
    dh: &[S],
    dc_in: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let h_size = dh.len();
    let one = S::one();

    let mut dc = vec![S::zero(); h_size];
    let mut dao = vec![S::zero(); h_size];
    for k in 0..h_size {
        dc[k] = dc_in[k] + dh[k] * sc.o[k] * (one - sc.tanh_c[k] * sc.tanh_c[k]);
        dao[k] = dh[k] * sc.tanh_c[k] * sc.o[k] * (one - sc.o[k]);
    }
    let mut dai = vec![S::zero(); h_size];
    let mut daf = vec![S::zero(); h_size];
    let mut dag = vec![S::zero(); h_size];
    let mut dc_prev = vec![S::zero(); h_size];
    for k in 0..h_size {
        dai[k] = dc[k] * sc.g[k] * sc.i[k] * (one - sc.i[k]);
        daf[k] = dc[k] * c_prev[k] * sc.f[k] * (one - sc.f[k]);
        dag[k] = dc[k] * sc.i[k] * (one - sc.g[k] * sc.g[k]);
        dc_prev[k] = dc[k] * sc.f[k];
    }

    g.wi.add_outer(&dai, x);
    add_assign(&mut g.bi, &dai);
    g.ui.add_outer(&dai, &sc.hm);
    g.wf.add_outer(&daf, x);
    add_assign(&mut g.bf, &daf);
    g.uf.add_outer(&daf, &sc.hm);
    g.wo.add_outer(&dao, x);
    add_assign(&mut g.bo, &dao);
    g.uo.add_outer(&dao, &sc.hm);
    g.wg.add_outer(&dag, x);
    add_assign(&mut g.bg, &dag);
    g.ug.add_outer(&dag, &sc.hm);

    let mut dhm = p.ui.matvec_t(&dai);
    add_assign(&mut dhm, &p.uf.matvec_t(&daf));
    add_assign(&mut dhm, &p.uo.matvec_t(&dao));
    add_assign(&mut dhm, &p.ug.matvec_t(&dag));
    let dh_prev: Vec<S> = match mask {
        Some(m) => dhm.iter().zip(m).map(|(&d, &m)| d * m).collect(),
        None => dhm,
    };

    let mut dx = p.wi.matvec_t(&dai);
    add_assign(&mut dx, &p.wf.matvec_t(&daf));
    add_assign(&mut dx, &p.wo.matvec_t(&dao));
    add_assign(&mut dx, &p.wg.matvec_t(&dag));
    (dx, dh_prev, dc_prev)
}

// ---------------------------------------------------------------- RNN

#[derive(Clone, Debug)]
pub struct RnnStep<S> {
    pub hm: Vec<S>,
    pub h: Vec<S>,
}

pub fn rnn_forward<S: Scalar>(
    p: &RnnParams<S>,
    x: &[S],
    h_prev: &[S],
    mask: Option<&[S]>,
) -> (Vec<S>, RnnStep<S>) {
    let hm = masked(h_prev, mask);
    let mut a = p.w.matvec(x);
    add_assign(&mut a, &p.u.matvec(&hm));
    add_assign(&mut a, &p.b);
    let h: Vec<S> = a.into_iter().map(|v| v.tanh()).collect();
    (h.clone(), RnnStep { hm, h })
}

/// Spec-level single vanilla RNN step: h = tanh(Wx + Uh + b).
pub fn rnn_step<S: Scalar>(x: &[S], h_prev: &[S], p: &RnnParams<S>) -> Vec<S> {
    rnn_forward(p, x, h_prev, None).0
}

pub fn rnn_backward<S: Scalar>(
    p: &RnnParams<S>,
    g: &mut RnnParams<S>,
    x: &[S],
    mask: Option<&[S]>,
    sc: &RnnStep<S>,
    dh: &[S],
) -> (Vec<S>, Vec<S>) {
    let one = S::one();
    let da: Vec<S> = (0..dh.len())
        .map(|i| dh[i] * (one - sc.h[i] * sc.h[i]))
        .collect();
    g.w.add_outer(&da, x);
    add_assign(&mut g.b, &da);
    g.u.add_outer(&da, &sc.hm);
    let dhm = p.u.matvec_t(&da);
    let dh_prev: Vec<S> = match mask {
        Some(m) => dhm.iter().zip(m).map(|(&d, &m)| d * m).collect(),
        None => dhm,
    };
    (p.w.matvec_t(&da), dh_prev)
}

// -------------------------------------------------- tensor traversal

pub(crate) type TensorSpec = (&'static str, Vec<usize>);

impl<S: Scalar> GruParams<S> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            wz: Mat::zeros(hidden, input),
            uz: Mat::zeros(hidden, hidden),
            bz: vec![S::zero(); hidden],
            wr: Mat::zeros(hidden, input),
            ur: Mat::zeros(hidden, hidden),
            br: vec![S::zero(); hidden],
            wh: Mat::zeros(hidden, input),
            uh: Mat::zeros(hidden, hidden),
            bh: vec![S::zero(); hidden],
        }
    }
}

impl<S: Scalar> LstmParams<S> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            wi: Mat::zeros(hidden, input),
            ui: Mat::zeros(hidden, hidden),
            bi: vec![S::zero(); hidden],
            wf: Mat::zeros(hidden, input),
            uf: Mat::zeros(hidden, hidden),
            bf: vec![S::zero(); hidden],
            wo: Mat::zeros(hidden, input),
            uo: Mat::zeros(hidden, hidden),
            bo: vec![S::zero(); hidden],
            wg: Mat::zeros(hidden, input),
            ug: Mat::zeros(hidden, hidden),
            bg: vec![S::zero(); hidden],
        }
    }
}

impl<S: Scalar> RnnParams<S> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        RnnParams {
            w: Mat::zeros(hidden, input),
            u: Mat::zeros(hidden, hidden),
            b: vec![S::zero(); hidden],
        }
    }
}

impl<S: Scalar> CellParams<S> {
    pub fn zeros_like(&self) -> Self {
        match self {
            CellParams::Gru(p) => {
                CellParams::Gru(GruParams::zeros(p.wz.rows(), p.wz.cols()))
            }
            CellParams::Lstm(p) => {
                CellParams::Lstm(LstmParams::zeros(p.wi.rows(), p.wi.cols()))
            }
            CellParams::Rnn(p) => CellParams::Rnn(RnnParams::zeros(p.w.rows(), p.w.cols())),
        }
    }

    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mat = |m: &Mat<S>| vec![m.rows(), m.cols()];
        match self {
            CellParams::Gru(p) => vec![
                ("wz", mat(&p.wz)),
                ("uz", mat(&p.uz)),
                ("bz", vec![p.bz.len()]),
                ("wr", mat(&p.wr)),
                ("ur", mat(&p.ur)),
                ("br", vec![p.br.len()]),
                ("wh", mat(&p.wh)),
                ("uh", mat(&p.uh)),
                ("bh", vec![p.bh.len()]),
            ],
            CellParams::Lstm(p) => vec![
                ("wi", mat(&p.wi)),
                ("ui", mat(&p.ui)),
                ("bi", vec![p.bi.len()]),
                ("wf", mat(&p.wf)),
                ("uf", mat(&p.uf)),
                ("bf", vec![p.bf.len()]),
                ("wo", mat(&p.wo)),
                ("uo", mat(&p.uo)),
                ("bo", vec![p.bo.len()]),
                ("wg", mat(&p.wg)),
                ("ug", mat(&p.ug)),
                ("bg", vec![p.bg.len()]),
            ],
            CellParams::Rnn(p) => vec![
                ("w", mat(&p.w)),
                ("u", mat(&p.u)),
                ("b", vec![p.b.len()]),
            ],
        }
    }

    pub fn flat(&self) -> Vec<&[S]> {
        match self {
            CellParams::Gru(p) => vec![
                p.wz.data(),
                p.uz.data(),
                &p.bz,
                p.wr.data(),
                p.ur.data(),
                &p.br,
                p.wh.data(),
                p.uh.data(),
                &p.bh,
            ],
            CellParams::Lstm(p) => vec![
                p.wi.data(),
                p.ui.data(),
                &p.bi,
                p.wf.data(),
                p.uf.data(),
                &p.bf,
                p.wo.data(),
                p.uo.data(),
                &p.bo,
                p.wg.data(),
                p.ug.data(),
                &p.bg,
            ],
            CellParams::Rnn(p) => vec![p.w.data(), p.u.data(), &p.b],
        }
    }

    pub fn flat_mut(&mut self) -> Vec<&mut [S]> {
        match self {
            CellParams::Gru(p) => vec![
                p.wz.data_mut(),
                p.uz.data_mut(),
                &mut p.bz,
                p.wr.data_mut(),
                p.ur.data_mut(),
                &mut p.br,
                p.wh.data_mut(),
                p.uh.data_mut(),
                &mut p.bh,
            ],
            CellParams::Lstm(p) => vec![
                p.wi.data_mut(),
                p.ui.data_mut(),
                &mut p.bi,
                p.wf.data_mut(),
                p.uf.data_mut(),
                &mut p.bf,
                p.wo.data_mut(),
                p.uo.data_mut(),
                &mut p.bo,
                p.wg.data_mut(),
                p.ug.data_mut(),
                &mut p.bg,
            ],
            CellParams::Rnn(p) => vec![p.w.data_mut(), p.u.data_mut(), &mut p.b],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gru_zero_params_halves_state() {
        let p = GruParams::<f64>::zeros(3, 2);
        let h_prev = vec![0.4, -0.2, 1.0];
        let h = gru_step(&[1.0, 2.0], &h_prev, &p);
        for (out, prev) in h.iter().zip(&h_prev) {
            assert!((out - 0.5 * prev).abs() < 1e-15);
        }
    }

    #[test]
    fn gru_zero_prev_state() {
        // h_prev = 0, U and b zero: h = sigma(Wz x) (.) tanh(Wh x)
        let mut p = GruParams::<f64>::zeros(2, 2);
        p.wz = Mat::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.5]]);
        p.wh = Mat::from_rows(&[vec![1.0, 0.4], vec![-0.3, 0.8]]);
        let x = [0.7, -1.2];
        let h = gru_step(&x, &[0.0, 0.0], &p);
        for i in 0..2 {
            let z = (p.wz.row(i)[0] * x[0] + p.wz.row(i)[1] * x[1]).sigmoid();
            let hb = (p.wh.row(i)[0] * x[0] + p.wh.row(i)[1] * x[1]).tanh();
            assert!((h[i] - z * hb).abs() < 1e-15);
        }
    }

    #[test]
    fn lstm_zero_params_outputs_zero() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let (h, c) = lstm_step(&[1.0, -1.0], &[0.0; 3], &[0.0; 3], &p);
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_saturated_forget_carries_cell() {
        let mut p = LstmParams::<f64>::zeros(2, 1);
        // forget gate saturated to 1, input gate to 0
        p.bf = vec![100.0, 100.0];
        p.bi = vec![-100.0, -100.0];
        let c_prev = vec![0.7, -0.3];
        let (_, c) = lstm_step(&[0.5], &[0.1, 0.2], &c_prev, &p);
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rnn_zero_params_and_stateless_projection() {
        let p = RnnParams::<f64>::zeros(2, 2);
        assert!(rnn_step(&[1.0, 1.0], &[0.5, 0.5], &p)
            .iter()
            .all(|&v| v == 0.0));

        let mut p = RnnParams::<f64>::zeros(1, 2);
        p.w = Mat::from_rows(&[vec![0.6, -0.4]]);
        let h = rnn_step(&[1.0, 2.0], &[5.0], &p);
        assert!((h[0] - (0.6 - 0.8f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn gru_gate_saturation_approaches_identity() {
        // as z -> 0 (gate pre-activations pushed negative), h -> h_prev
        let h_prev = vec![0.3, -0.6];
        let x = [1.0, 0.5, -0.5];
        let mut last_gap = f64::INFINITY;
        for bias in [0.0, -2.0, -4.0, -8.0, -16.0] {
            let mut p = GruParams::<f64>::zeros(2, 3);
            p.bz = vec![bias; 2];
            let h = gru_step(&x, &h_prev, &p);
            let gap: f64 = h
                .iter()
                .zip(&h_prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap < last_gap || gap == 0.0);
            last_gap = gap;
        }
        assert!(last_gap < 1e-6);
    }
}
