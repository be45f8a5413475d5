use std::collections::{HashMap, HashSet};

use rand::seq::index;
use rand::Rng;

use super::records::InteractionRecord;
use super::schema::ContextualSituation;

/// Items each user touched under each situation.
#[derive(Clone, Debug, Default)]
pub struct InteractionIndex {
    map: HashMap<(u32, ContextualSituation), HashSet<u32>>,
}

impl InteractionIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build<'a>(records: impl IntoIterator<Item = &'a InteractionRecord>) -> Self {
        let mut idx = Self::new();
        idx.extend(records);
        idx
    }

    pub fn extend<'a>(&mut self, records: impl IntoIterator<Item = &'a InteractionRecord>) {
        for r in records {
            self.insert(r.user, &r.situation, r.item);
        }
    }

    pub fn insert(&mut self, user: u32, situation: &ContextualSituation, item: u32) {
        self.map
            .entry((user, situation.clone()))
            .or_default()
            .insert(item);
    }

    pub fn items(&self, user: u32, situation: &ContextualSituation) -> Option<&HashSet<u32>> {
        self.map.get(&(user, situation.clone()))
    }

    pub fn contains(&self, user: u32, situation: &ContextualSituation, item: u32) -> bool {
        self.items(user, situation).is_some_and(|s| s.contains(&item))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegativeSample {
    pub records: Vec<InteractionRecord>,
    /// Fewer than `k` candidates existed; every candidate was returned.
    pub short: bool,
}

/// Draws `k` items uniformly without replacement from the catalog
/// `0..num_items` minus `interacted`, labelled negative.
pub fn sample_negatives(
    positive: &InteractionRecord,
    k: usize,
    interacted: Option<&HashSet<u32>>,
    num_items: usize,
    rng: &mut impl Rng,
) -> NegativeSample {
    let empty = HashSet::new();
    let interacted = interacted.unwrap_or(&empty);
    let excluded = interacted.iter().filter(|&&i| (i as usize) < num_items).count();
    let available = num_items - excluded;
    let make = |item: u32| InteractionRecord {
        user: positive.user,
        item,
        situation: positive.situation.clone(),
        label: 0.0,
    };
    if k == 0 {
        return NegativeSample {
            records: Vec::new(),
            short: false,
        };
    }
    let items: Vec<u32> = if k >= available || available < 4 * k + 8 {
        // Dense case: enumerate the candidates and choose among them.
        let candidates: Vec<u32> = (0..num_items as u32).filter(|i| !interacted.contains(i)).collect();
        if k >= candidates.len() {
            candidates
        } else {
            index::sample(rng, candidates.len(), k)
                .into_iter()
                .map(|j| candidates[j])
                .collect()
        }
    } else {
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let i = rng.random_range(0..num_items as u32);
            if !interacted.contains(&i) && !chosen.contains(&i) {
                chosen.push(i);
            }
        }
        chosen
    };
    NegativeSample {
        short: items.len() < k,
        records: items.into_iter().map(make).collect(),
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn pos(item: u32) -> InteractionRecord {
        InteractionRecord {
            user: 0,
            item,
            situation: ContextualSituation(vec![1, 0]),
            label: 1.0,
        }
    }

    #[test]
    fn forced_set() {
        let seen: HashSet<u32> = [0].into();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_negatives(&pos(0), 2, Some(&seen), 3, &mut rng);
        let mut items: Vec<u32> = s.records.iter().map(|r| r.item).collect();
        items.sort();
        assert_eq!(items, vec![1, 2]);
        assert!(!s.short);
        assert!(s.records.iter().all(|r| r.label == 0.0 && r.situation == pos(0).situation));
    }

    #[test]
    fn k_zero_and_shortfall() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_negatives(&pos(0), 0, None, 5, &mut rng).records.is_empty());
        let seen: HashSet<u32> = [0, 1].into();
        let s = sample_negatives(&pos(0), 2, Some(&seen), 3, &mut rng);
        assert_eq!(s.records.len(), 1);
        assert!(s.short);
    }

    #[test]
    fn uniform_over_eligible_items() {
        // 10 eligible of 100 exercises the enumeration path, 10 of 12 the other.
        for (num_items, seen) in [(12u32, vec![3u32, 7]), (100, (10..100).collect())] {
            let seen: HashSet<u32> = seen.into_iter().collect();
            let trials = 10_000;
            let k = 2;
            let mut counts = HashMap::new();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            for _ in 0..trials {
                let s = sample_negatives(&pos(3), k, Some(&seen), num_items as usize, &mut rng);
                let items: HashSet<u32> = s.records.iter().map(|r| r.item).collect();
                assert_eq!(items.len(), k);
                for i in items {
                    assert!(!seen.contains(&i));
                    *counts.entry(i).or_insert(0usize) += 1;
                }
            }
            assert_eq!(counts.len(), 10);
            let p = k as f64 / 10.0;
            let mean = trials as f64 * p;
            let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
            for (&i, &c) in &counts {
                assert!((c as f64 - mean).abs() <= 3.0 * sigma, "item {i}: {c} vs {mean}±{sigma}");
            }
        }
    }

    #[test]
    fn index_lookup() {
        let idx = InteractionIndex::build(&[pos(4), pos(5)]);
        assert!(idx.contains(0, &pos(0).situation, 4));
        assert!(!idx.contains(0, &ContextualSituation(vec![0, 0]), 4));
        assert_eq!(idx.items(0, &pos(0).situation).unwrap().len(), 2);
    }
}
