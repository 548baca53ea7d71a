//! Tabular baselines over the 11 diagnostic features: KNN and SimpleNN for
//! position classification and 2-D regression, plus an adapter trait for
//! external tree-ensemble implementations.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::{localization_metrics, MetricsReport};
use crate::error::{JamlocError, Result};
use crate::models::{SimpleNn, SimpleNnHead};
use crate::nn::optim::Adam;
use crate::nn::Params;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Regress,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineModel {
    Knn,
    Simplenn,
    ExternalAdapter,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub wall_time_min: f64,
}

/// Either kind of evaluation output from `train_tabular`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineReport {
    Classification(ClassificationReport),
    Regression(MetricsReport),
}

/// External model hook (tree ensembles etc. are deliberately not
/// reimplemented here).
pub trait ExternalModel {
    fn fit(&mut self, x: &Array2<f64>, y: &Array2<f64>) -> Result<()>;
    fn predict(&mut self, x: &Array2<f64>) -> Result<Array2<f64>>;
}

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

/// K-nearest-neighbor prediction with the Euclidean metric. For
/// classification, `train_y` holds class ids in column 0 and ties in the
/// majority vote go to the smallest class id; for regression the neighbor
/// coordinate rows are averaged.
pub fn knn_predict(
    train_x: &Array2<f64>,
    train_y: &Array2<f64>,
    query_x: &Array2<f64>,
    k: usize,
    task: Task,
) -> Result<Array2<f64>> {
    let n = train_x.dim().0;
    if k == 0 || k > n {
        return Err(JamlocError::Invalid(format!(
            "knn: k={k} out of range 1..={n}"
        )));
    }
    if train_y.dim().0 != n || train_x.dim().1 != query_x.dim().1 {
        return Err(JamlocError::Invalid("knn: shape mismatch".into()));
    }
    let out_dim = match task {
        Task::Classify => 1,
        Task::Regress => train_y.dim().1,
    };
    let q = query_x.dim().0;
    let mut out = Array2::<f64>::zeros((q, out_dim));
    let d = train_x.dim().1;
    for qi in 0..q {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..d {
                    let dif = train_x[[i, j]] - query_x[[qi, j]];
                    s += dif * dif;
                }
                (s, i)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let neighbors = &dists[..k];
        match task {
            Task::Classify => {
                let mut votes: std::collections::BTreeMap<i64, usize> =
                    std::collections::BTreeMap::new();
                for &(_, i) in neighbors {
                    *votes.entry(train_y[[i, 0]] as i64).or_insert(0) += 1;
                }
                // BTreeMap iteration is ascending by class id, so `>` keeps
                // the smallest id on ties
                let mut best = (0usize, 0i64);
                for (&cls, &cnt) in &votes {
                    if cnt > best.0 {
                        best = (cnt, cls);
                    }
                }
                out[[qi, 0]] = best.1 as f64;
            }
            Task::Regress => {
                for j in 0..out_dim {
                    out[[qi, j]] = neighbors
                        .iter()
                        .map(|&(_, i)| train_y[[i, j]])
                        .sum::<f64>()
                        / k as f64;
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

/// Accuracy plus macro/weighted precision-recall-F1 from integer labels.
pub fn classification_report(pred: &[i64], truth: &[i64], wall_time_min: f64) -> ClassificationReport {
    assert_eq!(pred.len(), truth.len());
    let n = truth.len();
    let mut classes: Vec<i64> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut acc = 0usize;
    let (mut f1_sum, mut f1_wsum, mut prec_sum, mut rec_sum) = (0.0, 0.0, 0.0, 0.0);
    for &c in &classes {
        let tp = pred
            .iter()
            .zip(truth)
            .filter(|(p, t)| **p == c && **t == c)
            .count() as f64;
        let fp = pred
            .iter()
            .zip(truth)
            .filter(|(p, t)| **p == c && **t != c)
            .count() as f64;
        let fne = pred
            .iter()
            .zip(truth)
            .filter(|(p, t)| **p != c && **t == c)
            .count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fne > 0.0 { tp / (tp + fne) } else { 0.0 };
        let f1 = if prec + rec > 0.0 {
            2.0 * prec * rec / (prec + rec)
        } else {
            0.0
        };
        let support = (tp + fne) / n as f64;
        f1_sum += f1;
        f1_wsum += f1 * support;
        prec_sum += prec;
        rec_sum += rec;
    }
    for (p, t) in pred.iter().zip(truth) {
        if p == t {
            acc += 1;
        }
    }
    let kf = classes.len() as f64;
    ClassificationReport {
        accuracy: acc as f64 / n as f64,
        f1_macro: f1_sum / kf,
        f1_weighted: f1_wsum,
        precision_macro: prec_sum / kf,
        recall_macro: rec_sum / kf,
        wall_time_min,
    }
}

// ---------------------------------------------------------------------------
// SimpleNN training
// ---------------------------------------------------------------------------

/// Train a SimpleNN with Adam; cross-entropy for classification (labels in
/// `y` column 0), mean squared error for regression.
pub fn train_simplenn(
    x: &Array2<f64>,
    y: &Array2<f64>,
    task: Task,
    n_classes: usize,
    epochs: usize,
    seed: u64,
) -> Result<SimpleNn> {
    let (n, d) = x.dim();
    if n == 0 || y.dim().0 != n {
        return Err(JamlocError::Invalid("train_simplenn: bad shapes".into()));
    }
    let head = match task {
        Task::Classify => SimpleNnHead::Classify(n_classes),
        Task::Regress => SimpleNnHead::Regress2,
    };
    let mut model = SimpleNn::new(seed, d, head);
    let mut opt = Adam::new(1e-3);
    for _ in 0..epochs {
        let logits = model.forward(x);
        let dlogits = match task {
            Task::Classify => {
                let mut dl = Array2::<f64>::zeros(logits.dim());
                for i in 0..n {
                    let row: Vec<f64> = logits.row(i).to_vec();
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
                    let s: f64 = e.iter().sum();
                    let t = y[[i, 0]] as usize;
                    for c in 0..n_classes {
                        dl[[i, c]] = (e[c] / s - f64::from(c == t)) / n as f64;
                    }
                }
                dl
            }
            Task::Regress => {
                let mut dl = &logits - y;
                dl.mapv_inplace(|v| 2.0 * v / n as f64);
                dl
            }
        };
        model.zero_grad();
        model.backward(&dlogits);
        opt.begin_step();
        model.visit_params("", &mut |p| opt.update(p));
    }
    Ok(model)
}

fn argmax_rows(logits: &Array2<f64>) -> Vec<i64> {
    logits
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (i, &v) in r.iter().enumerate() {
                if v > best.0 {
                    best = (v, i);
                }
            }
            best.1 as i64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Unified entry point
// ---------------------------------------------------------------------------

pub struct TabularConfig {
    pub k: usize,
    pub epochs: usize,
    pub n_classes: usize,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            k: 5,
            epochs: 200,
            n_classes: 52,
            seed: 0,
        }
    }
}

/// Fit a tabular baseline on (train_x, train_y) and evaluate on the test
/// split. Features are expected pre-standardized with a train-fit scaler.
pub fn train_tabular(
    model: BaselineModel,
    task: Task,
    train_x: &Array2<f64>,
    train_y: &Array2<f64>,
    test_x: &Array2<f64>,
    test_y: &Array2<f64>,
    cfg: &TabularConfig,
    external: Option<&mut dyn ExternalModel>,
) -> Result<BaselineReport> {
    let start = Instant::now();
    let preds = match model {
        BaselineModel::Knn => knn_predict(train_x, train_y, test_x, cfg.k, task)?,
        BaselineModel::Simplenn => {
            let mut nn = train_simplenn(train_x, train_y, task, cfg.n_classes, cfg.epochs, cfg.seed)?;
            let logits = nn.forward(test_x);
            match task {
                Task::Classify => {
                    let labels = argmax_rows(&logits);
                    Array2::from_shape_fn((labels.len(), 1), |(i, _)| labels[i] as f64)
                }
                Task::Regress => logits,
            }
        }
        BaselineModel::ExternalAdapter => {
            let ext = external.ok_or_else(|| {
                JamlocError::Invalid("external_adapter selected but no adapter supplied".into())
            })?;
            ext.fit(train_x, train_y)?;
            ext.predict(test_x)?
        }
    };
    let wall = start.elapsed().as_secs_f64() / 60.0;
    match task {
        Task::Classify => {
            let p: Vec<i64> = preds.column(0).iter().map(|v| *v as i64).collect();
            let t: Vec<i64> = test_y.column(0).iter().map(|v| *v as i64).collect();
            Ok(BaselineReport::Classification(classification_report(
                &p, &t, wall,
            )))
        }
        Task::Regress => {
            let mut rep = localization_metrics(&preds, test_y)?;
            rep.wall_time_min = wall;
            Ok(BaselineReport::Regression(rep))
        }
    }
}
