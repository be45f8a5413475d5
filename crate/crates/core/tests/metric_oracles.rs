use cakgcn_core::train::{auc, hit_ndcg, loss_ranking, loss_rating, metric_topk, rmse_mae};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_equals_the_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut done = 0;
    while done < 50 {
        let n = rng.random_range(2..=30);
        // Few distinct values so ties are common.
        let levels = rng.random_range(1..=6);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
            assert!(auc(&scores, &labels).is_err());
            continue;
        }
        assert_eq!(auc(&scores, &labels).unwrap(), pairwise_auc(&scores, &labels));
        done += 1;
    }
}

#[test]
fn topk_closed_forms() {
    assert_eq!(hit_ndcg(1, 10), (1.0, 1.0));
    assert_eq!(hit_ndcg(3, 10), (1.0, 0.5));
    assert_eq!(hit_ndcg(15, 10), (0.0, 0.0));
    let cands: Vec<(u32, f64)> = (0..20).map(|i| (i, 20.0 - i as f64)).collect();
    assert_eq!(metric_topk(&cands, 2, 10).unwrap(), (1.0, 0.5));
    assert!(metric_topk(&cands, 99, 10).is_err());
}

proptest! {
    #[test]
    fn ndcg_never_rises_with_rank(rank in 1usize..100, k in 1usize..30) {
        let (h0, n0) = hit_ndcg(rank, k);
        let (h1, n1) = hit_ndcg(rank + 1, k);
        prop_assert!(n1 <= n0);
        prop_assert_eq!(h0, if rank <= k { 1.0 } else { 0.0 });
        prop_assert!(h1 <= h0);
    }
}

#[test]
fn rmse_mae_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..6.0)).collect();
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(1..=5) as f64).collect();
    let (rmse, mae) = rmse_mae(&p, &y).unwrap();
    let n = p.len() as f64;
    let rmse_ref = (p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
    let mae_ref = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    assert!((rmse - rmse_ref).abs() <= 1e-12);
    assert!((mae - mae_ref).abs() <= 1e-12);
}

#[test]
fn ranking_loss_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits: Vec<f64> = (0..20).map(|_| rng.random_range(-8.0..8.0)).collect();
    let (pos, neg) = logits.split_at(9);
    let theta = [0.3, -1.2, 2.0];
    let got = loss_ranking(pos, neg, 0.01, &[&theta]);
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let expect = -pos.iter().map(|&s| sig(s).ln()).sum::<f64>() - neg.iter().map(|&s| (1.0 - sig(s)).ln()).sum::<f64>()
        + 0.01 * theta.iter().map(|t| t * t).sum::<f64>();
    assert!((got - expect).abs() <= 1e-12, "{got} vs {expect}");
}

#[test]
fn rating_loss_examples() {
    assert_eq!(loss_rating(&[3.0], &[5.0], 0.0, &[]).unwrap(), 4.0);
    assert!((loss_rating(&[2.0], &[2.0], 0.1, &[&[1.0, 2.0]]).unwrap() - 0.5).abs() < 1e-15);
    assert!(loss_rating(&[1.0, 2.0], &[1.0], 0.0, &[]).is_err());
}
