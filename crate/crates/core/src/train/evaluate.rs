use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, f1, metric_topk, rmse_mae};
use crate::data::{DatasetBundle, InteractionIndex, InteractionRecord, TaskKind};
use crate::error::{Error, Result};
use crate::model::Model;

pub const TOPK_CUTOFFS: [usize; 2] = [10, 20];
pub const F1_THRESHOLD: f64 = 0.5;
/// Recorded in every ranking report.
pub const NEGATIVE_POOL: &str = "sampled, 2 per positive";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSplit {
    Valid,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskKind,
    pub model: String,
    pub seed: Option<u64>,
    /// Metric name and value, in reporting order.
    pub metrics: Vec<(String, f64)>,
    pub counts: Vec<(String, usize)>,
    /// Free-form echo of the run that produced the checkpoint.
    pub config: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Flat `key: value` text.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let _ = writeln!(s, "model: {}", self.model);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        for (k, v) in &self.counts {
            let _ = writeln!(s, "{k}: {v}");
        }
        if self.task == TaskKind::Ranking {
            let _ = writeln!(s, "negative_pool: {NEGATIVE_POOL}");
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}: {v:.6}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}: {v}");
        }
        s
    }

    pub fn tsv_header(&self) -> String {
        let mut cols = vec!["model".to_string(), "task".into(), "seed".into()];
        cols.extend(self.metrics.iter().map(|(k, _)| k.clone()));
        cols.join("\t")
    }

    pub fn tsv_row(&self) -> String {
        let mut cols = vec![
            self.model.clone(),
            self.task.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ];
        cols.extend(self.metrics.iter().map(|(_, v)| format!("{v:.6}")));
        cols.join("\t")
    }
}

fn check(model: &Model, bundle: &DatasetBundle, task: TaskKind) -> Result<()> {
    if bundle.task != task {
        return Err(Error::TaskMismatch {
            expected: task.to_string(),
            found: format!("{} bundle", bundle.task),
        });
    }
    if model.config().task != task {
        return Err(Error::TaskMismatch {
            expected: task.to_string(),
            found: format!("{} checkpoint", model.config().task),
        });
    }
    if model.vocab() != &bundle.vocabularies() {
        return Err(Error::InvalidArgument(
            "checkpoint vocabularies do not match the dataset bundle".into(),
        ));
    }
    model.check_graph(&bundle.graph)
}

fn predictions(model: &Model, bundle: &DatasetBundle, records: &[InteractionRecord]) -> Result<Vec<f64>> {
    let preds = records
        .iter()
        .map(|r| model.predict(&bundle.graph, r.user, r.item, &r.situation))
        .collect::<Result<Vec<_>>>()?;
    if preds.iter().any(|p| !p.is_finite()) {
        return Err(Error::Undefined("model produced a non-finite score".into()));
    }
    Ok(preds)
}

fn split_records(bundle: &DatasetBundle, split: EvalSplit) -> (&[InteractionRecord], &[InteractionRecord]) {
    match split {
        EvalSplit::Valid => (&bundle.valid, &bundle.valid_negatives),
        EvalSplit::Test => (&bundle.test, &bundle.test_negatives),
    }
}

/// Model-selection metric on a split: RMSE for rating, AUC for ranking.
/// `None` when the split is empty.
pub fn selection_metric(model: &Model, bundle: &DatasetBundle, split: EvalSplit) -> Result<Option<f64>> {
    let (pos, neg) = split_records(bundle, split);
    if pos.is_empty() {
        return Ok(None);
    }
    match bundle.task {
        TaskKind::Rating => {
            let p = predictions(model, bundle, pos)?;
            let y: Vec<f64> = pos.iter().map(|r| r.label).collect();
            Ok(Some(rmse_mae(&p, &y)?.0))
        }
        TaskKind::Ranking => {
            let all: Vec<InteractionRecord> = pos.iter().chain(neg).cloned().collect();
            let s = predictions(model, bundle, &all)?;
            let labels: Vec<bool> = all.iter().map(InteractionRecord::is_positive).collect();
            Ok(Some(auc(&s, &labels)?))
        }
    }
}

/// Whether `candidate` beats `incumbent` under the task's selection metric.
pub fn improves(task: TaskKind, candidate: f64, incumbent: f64) -> bool {
    match task {
        TaskKind::Rating => candidate < incumbent,
        TaskKind::Ranking => candidate > incumbent,
    }
}

/// Test-split metrics for a trained model.
pub fn evaluate(model: &Model, bundle: &DatasetBundle, task: TaskKind) -> Result<MetricReport> {
    evaluate_split(model, bundle, task, EvalSplit::Test)
}

pub fn evaluate_split(model: &Model, bundle: &DatasetBundle, task: TaskKind, split: EvalSplit) -> Result<MetricReport> {
    check(model, bundle, task)?;
    let (pos, neg) = split_records(bundle, split);
    if pos.is_empty() {
        return Err(Error::Undefined("evaluation split is empty".into()));
    }
    let mut report = MetricReport {
        task,
        model: model.config().label(),
        seed: None,
        metrics: Vec::new(),
        counts: vec![("records".into(), pos.len())],
        config: BTreeMap::new(),
    };
    match task {
        TaskKind::Rating => {
            let p = predictions(model, bundle, pos)?;
            let y: Vec<f64> = pos.iter().map(|r| r.label).collect();
            let (rmse, mae) = rmse_mae(&p, &y)?;
            report.metrics.push(("RMSE".into(), rmse));
            report.metrics.push(("MAE".into(), mae));
            if let Some(scale) = bundle.scale {
                let clamped: Vec<f64> = p.iter().map(|&v| scale.clamp(v)).collect();
                let (rmse, mae) = rmse_mae(&clamped, &y)?;
                report.metrics.push(("RMSE_clamped".into(), rmse));
                report.metrics.push(("MAE_clamped".into(), mae));
            }
        }
        TaskKind::Ranking => {
            let all: Vec<InteractionRecord> = pos.iter().chain(neg).cloned().collect();
            let s = predictions(model, bundle, &all)?;
            let labels: Vec<bool> = all.iter().map(InteractionRecord::is_positive).collect();
            report.counts.push(("negatives".into(), neg.len()));
            report.metrics.push(("AUC".into(), auc(&s, &labels)?));
            report.metrics.push(("F1".into(), f1(&s, &labels, F1_THRESHOLD)?));
            let topk = topk_metrics(model, bundle, pos, split)?;
            for (k, (hr, _)) in TOPK_CUTOFFS.iter().zip(&topk) {
                report.metrics.push((format!("HR@{k}"), *hr));
            }
            for (k, (_, nd)) in TOPK_CUTOFFS.iter().zip(&topk) {
                report.metrics.push((format!("NDCG@{k}"), *nd));
            }
        }
    }
    if let Some((name, _)) = report.metrics.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Undefined(format!("{name} is not finite")));
    }
    Ok(report)
}

/// Mean `(hr, ndcg)` per cutoff in [`TOPK_CUTOFFS`]. Each held-out positive
/// is ranked against every item except those the user interacted with under
/// the same situation before the split (train, plus valid when testing).
fn topk_metrics(
    model: &Model,
    bundle: &DatasetBundle,
    held_out: &[InteractionRecord],
    split: EvalSplit,
) -> Result<Vec<(f64, f64)>> {
    let mut seen = InteractionIndex::build(bundle.train.iter().filter(|r| r.is_positive()));
    if split == EvalSplit::Test {
        seen.extend(bundle.valid.iter().filter(|r| r.is_positive()));
    }
    let items: Vec<u32> = (0..bundle.num_items() as u32).collect();
    let mut sums = vec![(0.0, 0.0); TOPK_CUTOFFS.len()];
    let mut cache: Option<((u32, Vec<u32>), Vec<f64>)> = None;
    for r in held_out {
        let key = (r.user, r.situation.0.clone());
        if cache.as_ref().is_none_or(|(k, _)| *k != key) {
            let scores = model.score_items(&bundle.graph, r.user, &r.situation, &items)?;
            cache = Some((key, scores));
        }
        let scores = &cache.as_ref().expect("filled above").1;
        let excluded = seen.items(r.user, &r.situation);
        let candidates: Vec<(u32, f64)> = items
            .iter()
            .filter(|&&i| i == r.item || !excluded.is_some_and(|e| e.contains(&i)))
            .map(|&i| (i, scores[i as usize]))
            .collect();
        for (slot, &k) in sums.iter_mut().zip(&TOPK_CUTOFFS) {
            let (hr, nd) = metric_topk(&candidates, r.item, k)?;
            slot.0 += hr;
            slot.1 += nd;
        }
    }
    let n = held_out.len() as f64;
    Ok(sums.into_iter().map(|(h, d)| (h / n, d / n)).collect())
}
