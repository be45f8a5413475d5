//! Logistic regression over one-hot (condition × KG attribute) crosses. A
//! cheap check that a ranking dataset carries context-by-attribute signal
//! at all, independent of the attention model.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::metrics::auc;
use crate::compute::ops::sigmoid;
use crate::data::{sample_negatives, DatasetBundle, InteractionIndex, InteractionRecord, NodeRef, TaskKind};
use crate::error::{Error, Result};
use crate::seed::{SeedStreams, SAMPLING};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub negatives: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            lr: 0.05,
            l2: 1e-6,
            negatives: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub auc: f64,
    pub features: usize,
    pub train_examples: usize,
    pub test_examples: usize,
}

struct Featurizer {
    index: HashMap<(u32, NodeRef), usize>,
}

impl Featurizer {
    fn features(&mut self, bundle: &DatasetBundle, r: &InteractionRecord, grow: bool) -> Vec<usize> {
        let mut out = Vec::new();
        for (f, &c) in r.situation.0.iter().enumerate() {
            let global = (bundle.schema.condition_offset(f) + c as usize) as u32;
            for &(_, node) in bundle.graph.neighbors(r.item) {
                let next = self.index.len();
                match self.index.get(&(global, node)) {
                    Some(&k) => out.push(k),
                    None if grow => {
                        self.index.insert((global, node), next);
                        out.push(next);
                    }
                    None => {}
                }
            }
        }
        out
    }
}

/// Test AUC of the probe on a ranking bundle.
pub fn probe_auc(bundle: &DatasetBundle, config: &ProbeConfig) -> Result<ProbeReport> {
    if bundle.task != TaskKind::Ranking {
        return Err(Error::TaskMismatch {
            expected: TaskKind::Ranking.to_string(),
            found: bundle.task.to_string(),
        });
    }
    let seeds = SeedStreams::new(config.seed);
    let mut rng = seeds.rng_indexed(SAMPLING, &[u64::MAX - 1]);
    let interacted = InteractionIndex::build(bundle.positives());
    let mut feat = Featurizer { index: HashMap::new() };

    let mut train: Vec<(Vec<usize>, bool)> = Vec::new();
    for r in bundle.train.iter().filter(|r| r.is_positive()) {
        train.push((feat.features(bundle, r, true), true));
        let neg = sample_negatives(
            r,
            config.negatives,
            interacted.items(r.user, &r.situation),
            bundle.num_items(),
            &mut rng,
        );
        for n in &neg.records {
            train.push((feat.features(bundle, n, true), false));
        }
    }
    if train.is_empty() {
        return Err(Error::Training("probe has no training positives".into()));
    }

    let mut w = vec![0.0; feat.index.len()];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let (x, y) = &train[k];
            let z = bias + x.iter().map(|&j| w[j]).sum::<f64>();
            let g = sigmoid(z) - if *y { 1.0 } else { 0.0 };
            bias -= config.lr * g;
            for &j in x {
                w[j] -= config.lr * (g + config.l2 * w[j]);
            }
        }
    }

    let test: Vec<&InteractionRecord> = bundle.test.iter().chain(&bundle.test_negatives).collect();
    let scores: Vec<f64> = test
        .iter()
        .map(|r| bias + feat.features(bundle, r, false).iter().map(|&j| w[j]).sum::<f64>())
        .collect();
    let labels: Vec<bool> = test.iter().map(|r| r.is_positive()).collect();
    Ok(ProbeReport {
        auc: auc(&scores, &labels)?,
        features: w.len(),
        train_examples: train.len(),
        test_examples: test.len(),
    })
}
