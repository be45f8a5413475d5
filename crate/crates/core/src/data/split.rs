use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::records::InteractionRecord;
use crate::error::{Error, Result};

/// Split sizes for `n` records: floor every share, then hand the leftover
/// records to the largest fractional remainders (earlier splits win ties).
pub fn split_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 || ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be in [0, 1] and sum to 1"
        )));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    // Stable sort keeps earlier splits first among equal remainders.
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    Ok(sizes)
}

pub struct Split<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffled partition into train/valid/test; each part keeps input order.
pub fn split_random<T: Clone>(records: &[T], ratios: (f64, f64, f64), rng: &mut impl Rng) -> Result<Split<T>> {
    let sizes = split_sizes(records.len(), &[ratios.0, ratios.1, ratios.2])?;
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(rng);
    let mut part = vec![0u8; records.len()];
    for &i in &idx[sizes[0]..sizes[0] + sizes[1]] {
        part[i] = 1;
    }
    for &i in &idx[sizes[0] + sizes[1]..] {
        part[i] = 2;
    }
    let mut out = Split {
        train: Vec::with_capacity(sizes[0]),
        valid: Vec::with_capacity(sizes[1]),
        test: Vec::with_capacity(sizes[2]),
    };
    for (r, p) in records.iter().zip(part) {
        match p {
            0 => out.train.push(r.clone()),
            1 => out.valid.push(r.clone()),
            _ => out.test.push(r.clone()),
        }
    }
    Ok(out)
}

/// Holds out one random record per user with at least two records. Users
/// with a single record stay in train. Both outputs keep input order.
pub fn split_leave_one_out(
    records: &[InteractionRecord],
    rng: &mut impl Rng,
) -> (Vec<InteractionRecord>, Vec<InteractionRecord>) {
    let mut by_user: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<u32, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let s = *slot.entry(r.user).or_insert_with(|| {
            by_user.push((r.user, Vec::new()));
            by_user.len() - 1
        });
        by_user[s].1.push(i);
    }
    let mut held = vec![false; records.len()];
    for (_, idx) in &by_user {
        if idx.len() >= 2 {
            held[idx[rng.random_range(0..idx.len())]] = true;
        }
    }
    let mut train = Vec::with_capacity(records.len());
    let mut test = Vec::with_capacity(by_user.len());
    for (r, h) in records.iter().zip(held) {
        if h {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    (train, test)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::schema::ContextualSituation;

    fn rec(user: u32, item: u32) -> InteractionRecord {
        InteractionRecord {
            user,
            item,
            situation: ContextualSituation(vec![0]),
            label: 1.0,
        }
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(split_sizes(10, &[0.8, 0.1, 0.1]).unwrap(), vec![8, 1, 1]);
        assert_eq!(split_sizes(142289, &[0.8, 0.1, 0.1]).unwrap(), vec![113831, 14229, 14229]);
        assert_eq!(split_sizes(3, &[1.0 / 3.0; 3]).unwrap(), vec![1, 1, 1]);
        assert_eq!(split_sizes(4, &[1.0 / 3.0; 3]).unwrap(), vec![2, 1, 1]);
        assert!(split_sizes(10, &[0.8, 0.1, 0.2]).is_err());
    }

    #[test]
    fn random_split_is_partition_and_deterministic() {
        let recs: Vec<usize> = (0..10).collect();
        let a = split_random(&recs, (0.8, 0.1, 0.1), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = split_random(&recs, (0.8, 0.1, 0.1), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((a.train.len(), a.valid.len(), a.test.len()), (8, 1, 1));
        assert_eq!((&a.train, &a.valid, &a.test), (&b.train, &b.valid, &b.test));
        let mut all: Vec<usize> = a.train.iter().chain(&a.valid).chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, recs);
    }

    #[test]
    fn leave_one_out_eligibility() {
        let mut recs: Vec<_> = (0..5).map(|i| rec(0, i)).collect();
        recs.push(rec(1, 9));
        let (train, test) = split_leave_one_out(&recs, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(test.len(), 1);
        assert_eq!(test[0].user, 0);
        assert_eq!(train.iter().filter(|r| r.user == 0).count(), 4);
        assert_eq!(train.iter().filter(|r| r.user == 1).count(), 1);
        let (train2, test2) = split_leave_one_out(&recs, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!((train, test), (train2, test2));
    }
}
