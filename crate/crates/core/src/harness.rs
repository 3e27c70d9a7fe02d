//! Evaluation protocols: seeded 70/10/20 splits, the seven temporal-network
//! variants, per-class accuracy, confusion matrices, and
//! leave-one-intersection-out runs.

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::neural::{
    init::init_model, train, CellKind, TemporalModel, TemporalModelConfig, TrainConfig,
};
use crate::num::Scalar;
use crate::rng::rng_for;
use crate::types::{Label, NUM_CLASSES};
use rand::seq::SliceRandom;

#[derive(Clone, Copy, Debug)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec { train_frac: 0.70, val_frac: 0.10, test_frac: 0.20, seed }
    }
}

/// Seeded shuffle, then a contiguous train/val/test partition. Sizes:
/// val = ceil(val_frac * n), test = round(test_frac * n), train = remainder.
/// Applied per intersection this reproduces the published 910/132/261 split
/// of 561 + 294 + 448 sequences.
pub fn split_indices(n: usize, spec: &SplitSpec) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(spec.seed, "split");
    idx.shuffle(&mut rng);
    let val = (spec.val_frac * n as f64).ceil() as usize;
    let test = (spec.test_frac * n as f64).round() as usize;
    let train = n.saturating_sub(val + test);
    let train_part = idx[..train].to_vec();
    let val_part = idx[train..train + val].to_vec();
    let test_part = idx[train + val..].to_vec();
    (train_part, val_part, test_part)
}

pub fn split<S: Clone>(
    dataset: &[FeatureSequence<S>],
    spec: &SplitSpec,
) -> (Vec<FeatureSequence<S>>, Vec<FeatureSequence<S>>, Vec<FeatureSequence<S>>) {
    let (tr, va, te) = split_indices(dataset.len(), spec);
    let pick = |ids: &[usize]| ids.iter().map(|&i| dataset[i].clone()).collect();
    (pick(&tr), pick(&va), pick(&te))
}

/// Rows are the true label, columns the prediction, both in (N, C, U) order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn zeros() -> Self {
        ConfusionMatrix { counts: [[0; NUM_CLASSES]; NUM_CLASSES] }
    }

    pub fn record(&mut self, truth: Label, predicted: usize) {
        self.counts[truth.index()][predicted] += 1;
    }

    pub fn row_sum(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn total(&self) -> usize {
        (0..NUM_CLASSES).map(|c| self.row_sum(c)).sum()
    }

    pub fn trace(&self) -> usize {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn per_class_accuracy(&self) -> [f64; NUM_CLASSES] {
        let mut out = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let row = self.row_sum(c);
            out[c] = if row == 0 { 0.0 } else { self.counts[c][c] as f64 / row as f64 };
        }
        out
    }

    pub fn total_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub per_class: [f64; NUM_CLASSES],
    pub total: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate<S: Scalar>(
    model: &TemporalModel<S>,
    test: &[FeatureSequence<S>],
) -> Result<EvalReport> {
    let mut confusion = ConfusionMatrix::zeros();
    for sample in test {
        let predicted = model.predict(&sample.steps)?;
        confusion.record(sample.label, predicted);
    }
    Ok(EvalReport {
        per_class: confusion.per_class_accuracy(),
        total: confusion.total_accuracy(),
        confusion,
    })
}

#[derive(Clone, Debug)]
pub struct VariantSpec {
    pub name: &'static str,
    pub config: TemporalModelConfig,
}

/// The seven temporal-network variants, in reporting order.
pub fn variants(input_dim: usize) -> Vec<VariantSpec> {
    let config = |cell, sizes: [usize; 2], attention: bool, dense: Option<usize>| {
        TemporalModelConfig {
            cell,
            layer_sizes: sizes,
            attention,
            dense_units: dense,
            num_classes: NUM_CLASSES,
            input_dim,
        }
    };
    vec![
        VariantSpec { name: "GRU(100,50)", config: config(CellKind::Gru, [100, 50], false, Some(30)) },
        VariantSpec { name: "GRU(50,25)", config: config(CellKind::Gru, [50, 25], false, None) },
        VariantSpec { name: "GRU-A(100,50)", config: config(CellKind::Gru, [100, 50], true, Some(30)) },
        VariantSpec { name: "LSTM(100,50)", config: config(CellKind::Lstm, [100, 50], false, None) },
        VariantSpec { name: "LSTM-A(100,50)", config: config(CellKind::Lstm, [100, 50], true, Some(30)) },
        VariantSpec { name: "RNN(100,50)", config: config(CellKind::Rnn, [100, 50], false, None) },
        VariantSpec { name: "RNN-A(100,50)", config: config(CellKind::Rnn, [100, 50], true, Some(30)) },
    ]
}

pub fn variant_by_name(name: &str, input_dim: usize) -> Result<VariantSpec> {
    variants(input_dim)
        .into_iter()
        .find(|v| v.name == name)
        .ok_or_else(|| Error::data(format!("unknown variant `{name}`")))
}

#[derive(Clone, Debug)]
pub struct VariantResult {
    pub name: &'static str,
    pub report: EvalReport,
}

/// Train every variant on the same seeded split and report test accuracy.
pub fn run_variants<S: Scalar>(
    dataset: &[FeatureSequence<S>],
    specs: &[VariantSpec],
    tc: &TrainConfig,
    split_spec: &SplitSpec,
) -> Result<Vec<VariantResult>> {
    let (train_set, val_set, test_set) = split(dataset, split_spec);
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let model = init_model::<S>(&spec.config, tc.seed)?;
        let (trained, _) = train(model, &train_set, &val_set, tc)?;
        out.push(VariantResult { name: spec.name, report: evaluate(&trained, &test_set)? });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LoioResult {
    pub names: Vec<String>,
    /// accuracy[i][j]: trained on intersection i, tested on intersection j
    pub accuracy: Vec<Vec<f64>>,
    pub confusions: Vec<Vec<ConfusionMatrix>>,
}

/// For each intersection: train on its own 70/10 train/val split, then
/// evaluate on every intersection's held-out test portion. Training never
/// sees any test sequence (checked by identity).
pub fn leave_one_out<S: Scalar>(
    datasets: &[(String, Vec<FeatureSequence<S>>)],
    config: &TemporalModelConfig,
    tc: &TrainConfig,
    split_seed: u64,
) -> Result<LoioResult> {
    if datasets.iter().any(|(_, d)| d.is_empty()) {
        return Err(Error::data("every intersection needs at least one sequence"));
    }
    // per-intersection splits are fixed up front so test portions are shared;
    // one split seed for all intersections keeps identical inputs symmetric
    let spec = SplitSpec::new(crate::rng::derive_seed(split_seed, "loio-split"));
    let mut parts = Vec::new();
    for (name, data) in datasets.iter() {
        let (tr, va, te) = split_indices(data.len(), &spec);
        parts.push((name.clone(), data, tr, va, te));
    }

    let mut accuracy = vec![vec![0.0; datasets.len()]; datasets.len()];
    let mut confusions = Vec::new();
    for (i, (_, data_i, tr, va, _)) in parts.iter().enumerate() {
        let pick = |ids: &[usize]| -> Vec<FeatureSequence<S>> {
            ids.iter().map(|&x| (*data_i)[x].clone()).collect()
        };
        let train_set = pick(tr);
        let val_set = pick(va);
        for (j, (_, _, _, _, te_j)) in parts.iter().enumerate() {
            if i == j {
                // disjointness by construction: train/val/test index sets never overlap
                for idx in tr.iter().chain(va.iter()) {
                    assert!(!te_j.contains(idx), "train/test overlap within intersection");
                }
            }
        }
        let _ = i;
        let model = init_model::<S>(config, crate::rng::derive_seed(tc.seed, "loio-model"))?;
        let (trained, _) = train(model, &train_set, &val_set, tc)?;
        let mut row = Vec::new();
        for (_, data_j, _, _, te_j) in parts.iter() {
            let test_set: Vec<FeatureSequence<S>> =
                te_j.iter().map(|&x| (*data_j)[x].clone()).collect();
            let report = evaluate(&trained, &test_set)?;
            accuracy[i][row.len()] = report.total;
            row.push(report.confusion);
        }
        confusions.push(row);
    }
    Ok(LoioResult {
        names: parts.iter().map(|p| p.0.clone()).collect(),
        accuracy,
        confusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn dummy(n: usize) -> Vec<FeatureSequence<f64>> {
        (0..n)
            .map(|i| FeatureSequence {
                label: Label::from_index(i % 3).unwrap(),
                region_id: format!("r{i}"),
                steps: Mat::from_fn(2, 3, |_, c| (i * 3 + c) as f64),
            })
            .collect()
    }

    #[test]
    fn split_sizes_small() {
        let (tr, va, te) = split_indices(10, &SplitSpec::new(0));
        assert_eq!((tr.len(), va.len(), te.len()), (7, 1, 2));
    }

    #[test]
    fn split_reproduces_published_counts() {
        // 561 + 294 + 448 intersections; totals must come out 910/132/261
        let mut totals = (0, 0, 0);
        for n in [561usize, 294, 448] {
            let (tr, va, te) = split_indices(n, &SplitSpec::new(7));
            totals.0 += tr.len();
            totals.1 += va.len();
            totals.2 += te.len();
        }
        assert_eq!(totals, (910, 132, 261));
    }

    #[test]
    fn split_is_seeded_and_partitions() {
        let spec = SplitSpec::new(3);
        let a = split_indices(100, &spec);
        let b = split_indices(100, &spec);
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let mut cm = ConfusionMatrix::zeros();
        for label in Label::ALL {
            for _ in 0..4 {
                cm.record(label, label.index());
            }
        }
        assert_eq!(cm.total_accuracy(), 1.0);
        assert_eq!(cm.per_class_accuracy(), [1.0, 1.0, 1.0]);

        let mut cm = ConfusionMatrix::zeros();
        for label in Label::ALL {
            for _ in 0..4 {
                cm.record(label, Label::Neutral.index());
            }
        }
        assert_eq!(cm.per_class_accuracy(), [1.0, 0.0, 0.0]);
        assert!((cm.total_accuracy() - 1.0 / 3.0).abs() < 1e-12);
        for c in 0..NUM_CLASSES {
            assert_eq!(cm.row_sum(c), 4);
        }
    }

    #[test]
    fn manual_tally_oracle() {
        // truths: N C U N C, predictions: N U U N N
        let mut cm = ConfusionMatrix::zeros();
        let cases = [
            (Label::Neutral, 0),
            (Label::Clumping, 2),
            (Label::Unclumping, 2),
            (Label::Neutral, 0),
            (Label::Clumping, 0),
        ];
        for (t, p) in cases {
            cm.record(t, p);
        }
        assert_eq!(cm.counts[0], [2, 0, 0]);
        assert_eq!(cm.counts[1], [1, 0, 1]);
        assert_eq!(cm.counts[2], [0, 0, 1]);
        assert!((cm.total_accuracy() - 3.0 / 5.0).abs() < 1e-12);
        assert_eq!(cm.trace(), 3);
    }

    #[test]
    fn variant_names_are_unique_and_ordered() {
        let vs = variants(147);
        let names: Vec<&str> = vs.iter().map(|v| v.name).collect();
        assert_eq!(
            names,
            vec![
                "GRU(100,50)",
                "GRU(50,25)",
                "GRU-A(100,50)",
                "LSTM(100,50)",
                "LSTM-A(100,50)",
                "RNN(100,50)",
                "RNN-A(100,50)"
            ]
        );
        assert!(variant_by_name("GRU-A(100,50)", 147).is_ok());
        assert!(variant_by_name("GRU-A(100, 50)", 147).is_err());
        // GRU(50,25) has no dense layer; attention variants have one
        assert_eq!(variant_by_name("GRU(50,25)", 147).unwrap().config.dense_units, None);
        assert_eq!(
            variant_by_name("LSTM-A(100,50)", 147).unwrap().config.dense_units,
            Some(30)
        );
    }

    #[test]
    fn loio_identical_datasets_give_symmetric_grid() {
        let config = TemporalModelConfig {
            cell: CellKind::Rnn,
            layer_sizes: [3, 2],
            attention: false,
            dense_units: None,
            num_classes: 3,
            input_dim: 3,
        };
        let tc = TrainConfig { epochs: 1, recurrent_dropout: 0.0, ..Default::default() };
        let data = dummy(12);
        let sets = vec![
            ("a".to_string(), data.clone()),
            ("b".to_string(), data.clone()),
        ];
        let res = leave_one_out(&sets, &config, &tc, 1).unwrap();
        assert_eq!(res.accuracy.len(), 2);
        assert_eq!(res.confusions[0].len(), 2);
        // identical datasets, shared split and model seeds: symmetric grid
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(res.accuracy[i][j], res.accuracy[j][i]);
                assert_eq!(res.confusions[i][j], res.confusions[j][i]);
            }
        }
    }

    #[test]
    fn loio_rejects_empty_intersection() {
        let config = variants(3).remove(1).config;
        let sets = vec![("a".to_string(), dummy(5)), ("b".to_string(), Vec::new())];
        assert!(leave_one_out(&sets, &config, &TrainConfig::default(), 0).is_err());
    }
}
