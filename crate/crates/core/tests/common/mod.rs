#![allow(dead_code)]

use cakgcn_core::data::{
    ContextSchema, ContextualSituation, DatasetBundle, IdSpace, InteractionRecord, KnowledgeGraph, RatingScale,
    RawDataset, TaskKind,
};
use cakgcn_core::model::{Ablation, Aggregator, Head, Model, ModelConfig, ModelKind};
use cakgcn_core::seed::SeedStreams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AGGREGATORS: [Aggregator; 3] = [Aggregator::Sum, Aggregator::Cat, Aggregator::Avg];
pub const HEADS: [Head; 4] = [Head::Mf, Head::Fm, Head::Mlp, Head::Nfm];
pub const ABLATIONS: [Ablation; 4] = [Ablation::Full, Ablation::CaOnly, Ablation::KgcnOnly, Ablation::PlainMf];

/// Sizes for [`random_raw`].
#[derive(Clone, Debug)]
pub struct Shape {
    pub users: usize,
    pub items: usize,
    pub conditions: Vec<usize>,
    pub relations: usize,
    pub values_per_relation: usize,
    pub records: usize,
}

impl Shape {
    /// 3 users, 4 items, 2 factors, 2 relations. Item 3 has no graph edges,
    /// item 0 links to item 1.
    pub fn toy() -> Self {
        Self {
            users: 3,
            items: 4,
            conditions: vec![2, 3],
            relations: 2,
            values_per_relation: 2,
            records: 36,
        }
    }
}

pub fn random_raw(task: TaskKind, shape: &Shape, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..shape.conditions.len()).map(|f| format!("f{f}")).collect();
    let mut schema = ContextSchema::new(&names).unwrap();
    for (f, &n) in shape.conditions.iter().enumerate() {
        for c in 0..n {
            schema.intern_condition(f, &format!("f{f}c{c}"));
        }
    }
    let mut ids = IdSpace::default();
    for u in 0..shape.users {
        ids.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..shape.items {
        ids.items.get_or_insert(&format!("i{i}"));
    }
    let mut kg = KnowledgeGraph::new();
    for i in 0..shape.items.saturating_sub(1) {
        for r in 0..shape.relations {
            let v = rng.random_range(0..shape.values_per_relation);
            kg.insert(&format!("i{i}"), &format!("r{r}"), &format!("r{r}v{v}")).unwrap();
        }
    }
    if shape.items > 2 {
        kg.insert("i0", "r0", "i1").unwrap();
    }
    let records = (0..shape.records)
        .map(|k| {
            let user = (k % shape.users) as u32;
            let item = rng.random_range(0..shape.items) as u32;
            let cs = shape.conditions.iter().map(|&n| rng.random_range(0..n) as u32).collect();
            let label = match task {
                TaskKind::Rating => rng.random_range(1..=5) as f64,
                TaskKind::Ranking => 1.0,
            };
            InteractionRecord {
                user,
                item,
                situation: ContextualSituation(cs),
                label,
            }
        })
        .collect();
    RawDataset {
        task,
        scale: (task == TaskKind::Rating).then(|| RatingScale::new(1.0, 5.0).unwrap()),
        schema,
        ids,
        records,
        kg,
    }
}

pub fn bundle(task: TaskKind, shape: &Shape, seed: u64) -> DatasetBundle {
    DatasetBundle::from_raw(random_raw(task, shape, seed), &SeedStreams::new(seed)).unwrap()
}

pub fn toy_bundle(task: TaskKind, seed: u64) -> DatasetBundle {
    bundle(task, &Shape::toy(), seed)
}

/// Every legal attention-model configuration.
pub fn all_configs(task: TaskKind, dim: usize) -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for agg in AGGREGATORS {
        for ab in ABLATIONS {
            for head in HEADS {
                if ab == Ablation::PlainMf && head != Head::Mf {
                    continue;
                }
                out.push(
                    ModelConfig::new(task)
                        .with_aggregator(agg)
                        .with_ablation(ab)
                        .with_head(head)
                        .with_dim(dim),
                );
            }
        }
    }
    for kind in [ModelKind::Fm, ModelKind::Nfm] {
        out.push(ModelConfig::baseline(kind, task).with_dim(dim));
    }
    out
}

pub fn model(config: ModelConfig, bundle: &DatasetBundle, seed: u64) -> Model {
    Model::new(config, bundle.vocabularies(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Every (user, item, situation) the bundle mentions, labels included.
pub fn all_records(bundle: &DatasetBundle) -> Vec<InteractionRecord> {
    bundle
        .train
        .iter()
        .chain(&bundle.valid)
        .chain(&bundle.test)
        .chain(&bundle.valid_negatives)
        .chain(&bundle.test_negatives)
        .cloned()
        .collect()
}

pub fn predictions(model: &Model, bundle: &DatasetBundle) -> Vec<f64> {
    all_records(bundle)
        .iter()
        .map(|r| model.predict(&bundle.graph, r.user, r.item, &r.situation).unwrap())
        .collect()
}
