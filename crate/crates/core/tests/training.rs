mod common;

use cakgcn_core::data::{generate_synthetic, DatasetBundle, SyntheticSpec, TaskKind};
use cakgcn_core::model::{Head, Model, ModelConfig};
use cakgcn_core::seed::{SeedStreams, INIT};
use cakgcn_core::train::{
    evaluate, grid_search, selection_metric, train, EvalSplit, Grid, TrainConfig,
};
use cakgcn_core::Error;
use common::*;

fn run(lr: f64) -> TrainConfig {
    TrainConfig {
        lr,
        batch: 16,
        l2: 1e-3,
        dropout: 0.0,
        epochs: 3,
        patience: 100,
        negatives: 2,
        seed: 4,
    }
}

fn ranking_bundle() -> DatasetBundle {
    let shape = Shape {
        users: 8,
        items: 12,
        conditions: vec![2, 2],
        relations: 2,
        values_per_relation: 3,
        records: 160,
    };
    bundle(TaskKind::Ranking, &shape, 8)
}

/// 50 ratings fully determined by (user, item) parity; validation is the
/// training set itself so the selection metric is the training RMSE.
fn separable_ratings() -> DatasetBundle {
    let shape = Shape {
        users: 5,
        items: 10,
        conditions: vec![2],
        relations: 2,
        values_per_relation: 2,
        records: 50,
    };
    let mut raw = random_raw(TaskKind::Rating, &shape, 50);
    for r in &mut raw.records {
        r.label = if (r.user + r.item) % 2 == 0 { 5.0 } else { 1.0 };
    }
    let mut b = DatasetBundle::from_raw(raw, &SeedStreams::new(50)).unwrap();
    b.train.append(&mut b.valid);
    b.train.append(&mut b.test);
    b.valid = b.train.clone();
    b.test = b.train.clone();
    assert_eq!(b.train.len(), 50);
    b
}

fn initial_model(b: &DatasetBundle, config: &ModelConfig, run: &TrainConfig) -> Model {
    let config = config.clone().with_dropout(run.dropout);
    Model::new(config, b.vocabularies(), &mut SeedStreams::new(run.seed).rng(INIT)).unwrap()
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let b = ranking_bundle();
    let config = ModelConfig::new(TaskKind::Ranking).with_head(Head::Nfm).with_dim(6);
    let r = run(0.0);
    let out = train(&b, &config, &r).unwrap();
    assert_eq!(out.history.len(), 3);
    assert_eq!(out.model.params().digest(), initial_model(&b, &config, &r).params().digest());
}

#[test]
fn identical_seeds_give_identical_runs() {
    let b = ranking_bundle();
    let config = ModelConfig::new(TaskKind::Ranking).with_head(Head::Nfm).with_dim(6);
    let mut r = run(5e-3);
    r.dropout = 0.2;
    let a = train(&b, &config, &r).unwrap();
    let c = train(&b, &config, &r).unwrap();
    assert_eq!(a.model.params().digest(), c.model.params().digest());
    assert_eq!(a.history_tsv(), c.history_tsv());
    r.seed += 1;
    let d = train(&b, &config, &r).unwrap();
    assert_ne!(a.model.params().digest(), d.model.params().digest());
}

#[test]
fn l2_penalty_shrinks_parameters() {
    let b = ranking_bundle();
    let config = ModelConfig::new(TaskKind::Ranking).with_dim(6);
    let mut r = run(1e-2);
    r.epochs = 8;
    r.l2 = 0.0;
    let free = train(&b, &config, &r).unwrap();
    r.l2 = 0.05;
    let held = train(&b, &config, &r).unwrap();
    assert!(held.model.params().squared_norm() < free.model.params().squared_norm());
}

#[test]
fn training_rmse_falls_for_five_epochs_at_some_grid_rate() {
    let b = separable_ratings();
    let config = ModelConfig::new(TaskKind::Rating).with_head(Head::Nfm).with_dim(8);
    let mut found = Vec::new();
    for lr in Grid::default().lr {
        let r = TrainConfig {
            lr,
            batch: 128,
            l2: 5e-4,
            dropout: 0.0,
            epochs: 5,
            patience: 100,
            negatives: 0,
            seed: 1,
        };
        let start = selection_metric(&initial_model(&b, &config, &r), &b, EvalSplit::Valid)
            .unwrap()
            .unwrap();
        let out = train(&b, &config, &r).unwrap();
        let mut curve = vec![start];
        curve.extend(out.history.iter().map(|e| e.valid_metric.unwrap()));
        if curve.windows(2).all(|w| w[1] < w[0]) {
            found.push(lr);
        }
    }
    assert!(!found.is_empty(), "no grid learning rate lowers training RMSE every epoch");
}

#[test]
fn singleton_grid_returns_its_point() {
    let b = ranking_bundle();
    let config = ModelConfig::new(TaskKind::Ranking).with_dim(4);
    let base = run(5e-3);
    let g = grid_search(&b, &config, &base, &Grid::singleton(&base)).unwrap();
    assert_eq!(g.best, base);
    assert_eq!(g.leaderboard.len(), 1);
    let direct = train(&b, &config, &base).unwrap();
    assert_eq!(g.outcome.model.params().digest(), direct.model.params().digest());
}

#[test]
fn grid_prefers_a_learning_rate_over_none() {
    let b = ranking_bundle();
    let config = ModelConfig::new(TaskKind::Ranking).with_dim(4);
    let base = run(0.0);
    let grid: Grid = "lr=0,0.01;batch=16,32;l2=1e-3;dropout=0".parse().unwrap();
    let g = grid_search(&b, &config, &base, &grid).unwrap();
    assert_eq!(g.leaderboard.len(), grid.size());
    assert_eq!(grid.size(), 4);
    assert_eq!(g.best.lr, 0.01);
}

#[test]
fn task_mismatch_and_empty_training_set_are_errors() {
    let b = ranking_bundle();
    let err = train(&b, &ModelConfig::new(TaskKind::Rating).with_dim(4), &run(1e-3)).unwrap_err();
    assert!(matches!(err, Error::TaskMismatch { .. }), "{err}");
    let mut empty = b.clone();
    empty.train.clear();
    let err = train(&empty, &ModelConfig::new(TaskKind::Ranking).with_dim(4), &run(1e-3)).unwrap_err();
    assert!(matches!(err, Error::Training(_)), "{err}");
}

#[test]
fn random_models_score_chance_auc() {
    for seed in 0..5 {
        let data = generate_synthetic(&SyntheticSpec::recovery(seed)).unwrap();
        let b = DatasetBundle::from_raw(data.raw, &SeedStreams::new(seed)).unwrap();
        let config = ModelConfig::new(TaskKind::Ranking).with_head(Head::Nfm).with_dim(16);
        let m = Model::new(config, b.vocabularies(), &mut SeedStreams::new(seed).rng(INIT)).unwrap();
        let report = evaluate(&m, &b, TaskKind::Ranking).unwrap();
        let auc = report.get("AUC").unwrap();
        assert!((0.45..=0.55).contains(&auc), "seed {seed}: AUC {auc}");
        assert!(report.metrics.iter().all(|(_, v)| v.is_finite()));
        assert_eq!(report, evaluate(&m, &b, TaskKind::Ranking).unwrap());
    }
}

#[test]
fn rating_reports_carry_rating_metrics_only() {
    let b = separable_ratings();
    let m = initial_model(&b, &ModelConfig::new(TaskKind::Rating).with_dim(4), &run(0.0));
    let report = evaluate(&m, &b, TaskKind::Rating).unwrap();
    let names: Vec<&str> = report.metrics.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["RMSE", "MAE", "RMSE_clamped", "MAE_clamped"]);
}
