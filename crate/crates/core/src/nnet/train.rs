use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{CnnArch, CnnModel};
use super::scalar::Scalar;
use super::LabeledExample;
use crate::activity::ActivityClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub arch: CnnArch,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: CnnArch::default(),
            adam: AdamConfig::default(),
            epochs: 25,
            batch_size: 16,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.adam.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Indices into the example list, each sorted by example id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class split: every class present contributes
/// `round(fraction * n)` examples to training, clamped so both sides get at
/// least one. Depends only on example ids and `seed`, not on input order.
pub fn stratified_split(examples: &[LabeledExample], fraction: f64, seed: u64) -> Result<Split> {
    let mut by_class: BTreeMap<ActivityClass, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        by_class.entry(ex.label).or_default().push(i);
    }
    let mut ids: Vec<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate example id {}", w[0])));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut members) in by_class {
        let n = members.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "class {class} ({}) has {n} example; at least 2 are needed to split",
                class.label()
            )));
        }
        members.sort_by(|&a, &b| examples[a].id.cmp(&examples[b].id));
        members.shuffle(&mut rng);
        let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        split.train.extend_from_slice(&members[..k]);
        split.test.extend_from_slice(&members[k..]);
    }
    let by_id = |v: &mut Vec<usize>| v.sort_by(|&a, &b| examples[a].id.cmp(&examples[b].id));
    by_id(&mut split.train);
    by_id(&mut split.test);
    Ok(split)
}

/// Confusion counts, `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub counts: Vec<Vec<usize>>,
    pub total: usize,
    pub correct: usize,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    /// Row-normalised percentages; rows with no examples are all zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    /// Percentage confusion matrix with class labels on both axes.
    pub fn write_confusion_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let classes = self.counts.len();
        let label = |i: usize| ActivityClass::from_index(i).map(|c| c.label().to_string()).unwrap_or(i.to_string());
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend((0..classes).map(label));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (i, row) in self.row_percentages().iter().enumerate() {
            let mut rec = vec![label(i)];
            rec.extend(row.iter().map(|p| format!("{p:.2}")));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(format!("{}: {e}", path.display()))
}

pub fn evaluate<F: Scalar>(model: &CnnModel<F>, examples: &[&LabeledExample]) -> Result<Evaluation> {
    let classes = model.arch.classes;
    let mut eval = Evaluation {
        counts: vec![vec![0; classes]; classes],
        total: 0,
        correct: 0,
    };
    for ex in examples {
        let actual = ex.label.index();
        let predicted = super::model::argmax(&model.forward(ex)?);
        eval.counts[actual][predicted] += 1;
        eval.total += 1;
        if actual == predicted {
            eval.correct += 1;
        }
    }
    Ok(eval)
}

/// Runs `cfg.epochs` of mini-batch Adam over `train_set` and returns the mean
/// training loss of every epoch. Batches are drawn from the id-sorted set
/// shuffled by an RNG seeded with `cfg.seed`.
pub fn fit<F: Scalar>(model: &mut CnnModel<F>, train_set: &[&LabeledExample], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut order: Vec<&LabeledExample> = train_set.to_vec();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut adam = AdamState::new(model.params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = model.loss_and_grad(batch)?;
            if !loss.is_finite() {
                return Err(Error::invalid("training diverged: non-finite loss"));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.update(&cfg.adam, &mut model.params, &grads)?;
        }
        history.push(epoch_loss / order.len() as f64);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel<f32>,
    pub split: Split,
    pub loss_history: Vec<f64>,
    pub train_eval: Evaluation,
    pub test_eval: Evaluation,
}

/// Splits, initialises from `cfg.seed`, fits and evaluates on both sides.
pub fn train(examples: &[LabeledExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = stratified_split(examples, cfg.train_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &examples[i]).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&split.train), pick(&split.test));
    let mut model = CnnModel::<f32>::init(cfg.arch, cfg.seed)?;
    let loss_history = fit(&mut model, &train_set, cfg)?;
    let train_eval = evaluate(&model, &train_set)?;
    let test_eval = evaluate(&model, &test_set)?;
    Ok(TrainOutcome {
        model,
        split,
        loss_history,
        train_eval,
        test_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor3;

    fn tiny_arch() -> CnnArch {
        CnnArch {
            input_size: 8,
            in_channels: 1,
            branches: 2,
            conv_layers: 2,
            filters: 3,
            hidden: 8,
            classes: 9,
        }
    }

    /// Class `k` lights up a `k`-dependent pixel block in the first branch.
    fn separable(n_per_class: usize, classes: &[ActivityClass]) -> Vec<LabeledExample> {
        let mut out = Vec::new();
        for &c in classes {
            for j in 0..n_per_class {
                let mut a = Tensor3::zeros(1, 8, 8);
                let k = c.index();
                for r in 0..2 {
                    for col in 0..2 {
                        a.data[((k / 3) * 2 + r + 1) * 8 + (k % 3) * 2 + col + 1] = 1.0;
                    }
                }
                a.data[63] = 0.01 * j as f64;
                out.push(LabeledExample {
                    id: format!("{}-{j:02}", c.label()),
                    images: vec![a, Tensor3::zeros(1, 8, 8)],
                    label: c,
                });
            }
        }
        out
    }

    #[test]
    fn split_is_stratified_and_order_independent() {
        let exs = separable(10, &ActivityClass::ALL);
        let s = stratified_split(&exs, 0.8, 3).unwrap();
        assert_eq!(s.train.len(), 72);
        assert_eq!(s.test.len(), 18);
        let mut rev = exs.clone();
        rev.reverse();
        let s2 = stratified_split(&rev, 0.8, 3).unwrap();
        let ids = |e: &[LabeledExample], v: &[usize]| v.iter().map(|&i| e[i].id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&exs, &s.train), ids(&rev, &s2.train));
        assert_eq!(ids(&exs, &s.test), ids(&rev, &s2.test));
    }

    #[test]
    fn singleton_class_is_named_in_error() {
        let mut exs = separable(3, &[ActivityClass::SitDown0]);
        exs.extend(separable(1, &[ActivityClass::WalkBackP30]));
        let err = stratified_split(&exs, 0.8, 0).unwrap_err();
        assert!(err.to_string().contains(ActivityClass::WalkBackP30.label()));
        let mut dup = separable(2, &[ActivityClass::SitDown0]);
        dup[1].id = dup[0].id.clone();
        assert!(stratified_split(&dup, 0.8, 0).is_err());
    }

    #[test]
    fn separable_data_is_learned() {
        let exs = separable(4, &ActivityClass::ALL);
        let cfg = TrainConfig {
            arch: tiny_arch(),
            adam: AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            epochs: 60,
            batch_size: 4,
            train_fraction: 0.5,
            seed: 1,
        };
        let out = train(&exs, &cfg).unwrap();
        assert_eq!(out.train_eval.accuracy(), 1.0);
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
        let again = train(&exs, &cfg).unwrap();
        assert_eq!(out.loss_history, again.loss_history);
        assert_eq!(out.model.params, again.model.params);
    }

    #[test]
    fn confusion_csv_rows_sum_to_100() {
        let eval = Evaluation {
            counts: {
                let mut c = vec![vec![0; 9]; 9];
                c[0][0] = 2;
                c[0][3] = 1;
                c[4][4] = 5;
                c
            },
            total: 8,
            correct: 7,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        eval.write_confusion_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert!(lines[1].contains("66.67") && lines[1].contains("33.33"));
        let pct = eval.row_percentages();
        assert!((pct[0].iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert_eq!(pct[1].iter().sum::<f64>(), 0.0);
    }
}
