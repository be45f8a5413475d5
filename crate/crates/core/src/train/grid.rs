use std::fmt::Write as _;

use super::config::{Grid, TrainConfig};
use super::evaluate::improves;
use super::trainer::{train_with, EpochRecord, TrainOutcome};
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderboardRow {
    pub config: TrainConfig,
    pub valid_metric: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best: TrainConfig,
    /// One row per grid point, in visiting order.
    pub leaderboard: Vec<LeaderboardRow>,
    /// The winning run.
    pub outcome: TrainOutcome,
}

impl GridOutcome {
    pub fn leaderboard_tsv(&self) -> String {
        let mut s = String::from("lr\tbatch\tl2\tdropout\tvalid_metric\tbest_epoch\tepochs_run\n");
        for r in &self.leaderboard {
            let m = r.valid_metric.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.config.lr, r.config.batch, r.config.l2, r.config.dropout, m, r.best_epoch, r.epochs_run
            );
        }
        s
    }
}

/// Trains every point of `grid` on top of `base` and keeps the best by
/// validation metric; ties go to the smaller λ, then the smaller lr, then
/// the earlier point.
pub fn grid_search(
    bundle: &DatasetBundle,
    config: &ModelConfig,
    base: &TrainConfig,
    grid: &Grid,
) -> Result<GridOutcome> {
    grid_search_with(bundle, config, base, grid, &mut |_, _| {})
}

/// [`grid_search`] with a callback per finished epoch of each point.
pub fn grid_search_with(
    bundle: &DatasetBundle,
    config: &ModelConfig,
    base: &TrainConfig,
    grid: &Grid,
    on_epoch: &mut dyn FnMut(&TrainConfig, &EpochRecord),
) -> Result<GridOutcome> {
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::Config("grid has no points".into()));
    }
    let mut leaderboard = Vec::with_capacity(points.len());
    let mut best: Option<(TrainConfig, TrainOutcome)> = None;
    for point in points {
        let outcome = train_with(bundle, config, &point, &mut |r| on_epoch(&point, r))?;
        leaderboard.push(LeaderboardRow {
            config: point.clone(),
            valid_metric: outcome.best_metric,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
        });
        let better = match &best {
            None => true,
            Some((cfg, inc)) => beats(bundle, &point, outcome.best_metric, cfg, inc.best_metric)?,
        };
        if better {
            best = Some((point, outcome));
        }
    }
    let (best, outcome) = best.expect("grid is nonempty");
    Ok(GridOutcome {
        best,
        leaderboard,
        outcome,
    })
}

fn beats(
    bundle: &DatasetBundle,
    cand: &TrainConfig,
    cand_metric: Option<f64>,
    inc: &TrainConfig,
    inc_metric: Option<f64>,
) -> Result<bool> {
    let (Some(c), Some(i)) = (cand_metric, inc_metric) else {
        return Err(Error::Training("grid search needs a nonempty validation split".into()));
    };
    if improves(bundle.task, c, i) {
        return Ok(true);
    }
    if c != i {
        return Ok(false);
    }
    Ok((cand.l2, cand.lr) < (inc.l2, inc.lr))
}
