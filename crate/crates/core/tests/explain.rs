mod common;

use std::collections::BTreeSet;
use std::fs;

use cakgcn_core::data::{ContextualSituation, TaskKind};
use cakgcn_core::explain::{
    export_analysis, extract_attention, percent, render_explanation, select_k, CENTROIDS_FILE,
};
use cakgcn_core::model::{Aggregator, ModelConfig};
use common::*;

fn shape() -> Shape {
    Shape {
        users: 12,
        items: 9,
        conditions: vec![3, 2, 4],
        relations: 3,
        values_per_relation: 3,
        records: 120,
    }
}

fn situations(b: &cakgcn_core::data::DatasetBundle) -> Vec<ContextualSituation> {
    all_records(b).into_iter().map(|r| r.situation).collect::<BTreeSet<_>>().into_iter().collect()
}

#[test]
fn factor_attention_does_not_depend_on_the_situation() {
    let b = bundle(TaskKind::Ranking, &shape(), 3);
    let sits = situations(&b);
    assert!(sits.len() > 5);
    for agg in [Aggregator::Sum, Aggregator::Cat] {
        let m = model(ModelConfig::new(TaskKind::Ranking).with_aggregator(agg).with_dim(8), &b, 1);
        for u in 0..b.num_users() as u32 {
            let first = m.attention(u, &sits[0]).unwrap().factor_weights;
            for s in &sits[1..] {
                let w = m.attention(u, s).unwrap().factor_weights;
                let same = first.iter().zip(&w).all(|(a, c)| a.to_bits() == c.to_bits());
                assert!(same, "user {u}: {first:?} vs {w:?}");
            }
        }
    }
}

#[test]
fn explanations_quote_live_weights_and_real_triplets() {
    let b = bundle(TaskKind::Ranking, &shape(), 4);
    let vocab = b.vocabularies();
    let m = model(ModelConfig::new(TaskKind::Ranking).with_dim(8), &b, 2);
    let mut rendered = 0;
    for r in all_records(&b) {
        let p = m.attention(r.user, &r.situation).unwrap();
        for top_n in 1..=3 {
            let e = render_explanation(&p, r.item, &vocab, &b.graph, top_n).unwrap();
            for f in &e.factors {
                let k = vocab.schema.factor_index(&f.factor).unwrap();
                assert_eq!(f.weight, p.factor_weights[k]);
                assert_eq!(f.condition, vocab.schema.condition_name(k, r.situation.0[k]));
            }
            for h in &e.relations {
                let rel = vocab.relations.id(&h.relation).unwrap();
                assert_eq!(h.weight, p.relation_weights[rel as usize]);
                let tails: Vec<String> = b
                    .graph
                    .neighbors(r.item)
                    .iter()
                    .filter(|(x, _)| *x == rel)
                    .map(|&(_, n)| b.graph.node_name(n, &vocab.items).to_string())
                    .collect();
                assert!(h.values.iter().all(|v| tails.contains(v)));
                assert!(e.sentence.contains(&percent(h.weight)));
            }
            rendered += 1;
        }
    }
    assert!(rendered > 100);
}

#[test]
fn cluster_exports_are_reproducible() {
    let b = bundle(TaskKind::Ranking, &shape(), 5);
    let m = model(ModelConfig::new(TaskKind::Ranking).with_dim(8), &b, 6);
    let users: Vec<u32> = (0..b.num_users() as u32).collect();
    let extract = extract_attention(&m, &users, &situations(&b)[..1]).unwrap();
    let vectors: Vec<Vec<f64>> = extract.factors.iter().map(|v| v.weights.clone()).collect();
    let ks: Vec<usize> = (2..=4).collect();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut written = Vec::new();
    for d in &dirs {
        let sel = select_k(&vectors, &ks, 42).unwrap();
        let paths = export_analysis(&sel.assignment, &extract.factors, &m.vocab().clone(), d.path()).unwrap();
        written.push(paths.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(written[0], written[1]);

    let centroids = fs::read_to_string(dirs[0].path().join(CENTROIDS_FILE)).unwrap();
    for line in centroids.lines().skip(1) {
        let sum: f64 = line.split('\t').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12, "{line}");
    }
}

#[test]
fn context_free_models_have_no_factor_attention_to_extract() {
    let b = bundle(TaskKind::Ranking, &shape(), 5);
    let m = model(
        ModelConfig::new(TaskKind::Ranking).with_ablation(cakgcn_core::model::Ablation::KgcnOnly).with_dim(4),
        &b,
        1,
    );
    assert!(extract_attention(&m, &[0], &situations(&b)[..1]).is_err());
}
