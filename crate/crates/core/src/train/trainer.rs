use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::evaluate::{improves, selection_metric, EvalSplit};
use crate::compute::{AdamConfig, AdamState, ParamId, ParamStore, Tape};
use crate::data::{sample_negatives, DatasetBundle, InteractionIndex, InteractionRecord, TaskKind};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::seed::{SeedStreams, DROPOUT, INIT, SAMPLING};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Summed data loss over the epoch plus `λ‖Θ‖²` at its end.
    pub train_loss: f64,
    /// RMSE (rating) or AUC (ranking) on the validation split.
    pub valid_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch (the last epoch when there
    /// is no validation data).
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// `epoch<TAB>train_loss<TAB>valid_metric` with a header line.
    pub fn history_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tvalid_metric\n");
        for r in &self.history {
            let metric = r.valid_metric.map(|m| m.to_string()).unwrap_or_else(|| "NA".into());
            let _ = writeln!(s, "{}\t{}\t{}", r.epoch, r.train_loss, metric);
        }
        s
    }
}

/// Initialises a model from the `init` stream of `run.seed` and trains it.
/// `run.dropout` replaces the model config's rate.
pub fn train(bundle: &DatasetBundle, config: &ModelConfig, run: &TrainConfig) -> Result<TrainOutcome> {
    train_with(bundle, config, run, &mut |_| {})
}

/// [`train`] with a per-epoch callback.
pub fn train_with(
    bundle: &DatasetBundle,
    config: &ModelConfig,
    run: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if config.task != bundle.task {
        return Err(Error::TaskMismatch {
            expected: bundle.task.to_string(),
            found: config.task.to_string(),
        });
    }
    run.validate()?;
    let config = config.clone().with_dropout(run.dropout);
    config.validate()?;
    let seeds = SeedStreams::new(run.seed);
    let model = Model::new(config, bundle.vocabularies(), &mut seeds.rng(INIT))?;
    train_model(model, bundle, run, on_epoch)
}

/// Trains an existing model in place. Dropout comes from the model's own
/// config; `run.dropout` is ignored here.
pub fn train_model(
    mut model: Model,
    bundle: &DatasetBundle,
    run: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    run.validate()?;
    if model.config().task != bundle.task {
        return Err(Error::TaskMismatch {
            expected: bundle.task.to_string(),
            found: model.config().task.to_string(),
        });
    }
    if bundle.train.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    model.check_graph(&bundle.graph)?;
    let seeds = SeedStreams::new(run.seed);
    let task = bundle.task;
    let interacted = InteractionIndex::build(bundle.positives());
    let mut adam = AdamState::new(AdamConfig::with_lr(run.lr), model.params());
    model.params_mut().zero_grads();

    let mut history = Vec::new();
    let mut best: Option<(f64, ParamStore, usize)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=run.epochs {
        let mut sampling = seeds.rng_indexed(SAMPLING, &[epoch as u64]);
        let mut dropout = seeds.rng_indexed(DROPOUT, &[epoch as u64]);
        let mut records: Vec<InteractionRecord> = bundle.train.clone();
        if task == TaskKind::Ranking && run.negatives > 0 {
            for r in bundle.train.iter().filter(|r| r.is_positive()) {
                let s = sample_negatives(
                    r,
                    run.negatives,
                    interacted.items(r.user, &r.situation),
                    bundle.num_items(),
                    &mut sampling,
                );
                records.extend(s.records);
            }
        }
        records.shuffle(&mut sampling);

        let mut data_loss = 0.0;
        for batch in records.chunks(run.batch) {
            let mut touched: HashSet<(ParamId, usize)> = HashSet::new();
            for r in batch {
                let grads = {
                    let mut tape = Tape::new(model.params());
                    let score = model.forward(
                        &mut tape,
                        &bundle.graph,
                        r.user,
                        r.item,
                        &r.situation,
                        true,
                        &mut dropout,
                    )?;
                    let loss = match task {
                        TaskKind::Rating => tape.squared_error(score, r.label),
                        TaskKind::Ranking => tape.log_loss(score, r.is_positive()),
                    };
                    data_loss += tape.scalar(loss);
                    let g = tape.backward(loss)?;
                    touched.extend(g.touched(model.params()));
                    g
                };
                model.params_mut().accumulate(&grads)?;
            }
            if run.l2 > 0.0 {
                penalise(model.params_mut(), &touched, run.l2);
            }
            model.params_mut().scale_grads(1.0 / batch.len() as f64);
            adam.step(model.params_mut())?;
        }
        if !model.params().iter().all(|(_, _, t)| t.is_finite()) {
            return Err(Error::Training(format!("parameters diverged in epoch {epoch}")));
        }

        let train_loss = data_loss + run.l2 * model.params().squared_norm();
        let valid_metric = selection_metric(&model, bundle, EvalSplit::Valid)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            valid_metric,
        };
        on_epoch(&record);
        history.push(record);

        match valid_metric {
            Some(m) => match &best {
                Some((b, _, _)) if !improves(task, m, *b) => {
                    stale += 1;
                    if stale >= run.patience {
                        stopped_early = epoch < run.epochs;
                        break;
                    }
                }
                _ => {
                    best = Some((m, model.params().clone(), epoch));
                    stale = 0;
                }
            },
            None => best = None,
        }
    }

    let (best_metric, best_epoch) = match best {
        Some((m, params, epoch)) => {
            model.set_params(params)?;
            (Some(m), epoch)
        }
        None => (None, history.len()),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_metric,
        stopped_early,
    })
}

/// Adds the gradient of `λ‖θ‖²` over the rows this batch touched (whole
/// tensors for dense parameters).
fn penalise(params: &mut ParamStore, touched: &HashSet<(ParamId, usize)>, l2: f64) {
    let whole: HashSet<ParamId> = touched
        .iter()
        .filter(|(_, r)| *r == usize::MAX)
        .map(|(id, _)| *id)
        .collect();
    let mut rows: Vec<_> = touched
        .iter()
        .copied()
        .filter(|(id, r)| *r == usize::MAX || !whole.contains(id))
        .collect();
    rows.sort_unstable();
    for (id, row) in rows {
        let t = params.get_mut(id);
        let width = t.row_len();
        let (values, grad) = t.values_and_grad_mut();
        let Some(grad) = grad else { continue };
        let range = if row == usize::MAX {
            0..values.len()
        } else {
            row * width..(row + 1) * width
        };
        for k in range {
            grad[k] += 2.0 * l2 * values[k];
        }
    }
}
