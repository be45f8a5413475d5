use crate::compute::ops::sigmoid;
use crate::error::{Error, Result};

/// `(rmse, mae)`.
pub fn rmse_mae(predictions: &[f64], labels: &[f64]) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(
            "rmse_mae",
            format!("{} predictions for {} labels", predictions.len(), labels.len()),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::Undefined("RMSE/MAE of an empty set".into()));
    }
    let n = predictions.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, y) in predictions.iter().zip(labels) {
        let e = p - y;
        se += e * e;
        ae += e.abs();
    }
    Ok(((se / n).sqrt(), ae / n))
}

/// Area under the ROC curve from the rank statistic; tied scores share
/// their average rank, which counts a tied pair as one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Undefined("AUC over NaN scores".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are kept doubled so that tie averages stay integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Positions i..=j hold ranks i+1..=j+1; twice their mean is i+j+2.
        let doubled = (i + j + 2) as u128;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum2 += doubled;
            }
        }
        i = j + 1;
    }
    let np = n_pos as u128;
    let numerator2 = rank_sum2 - np * (np + 1);
    Ok(numerator2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// F1 of `sigmoid(score) >= threshold` against the labels. Zero when there
/// is nothing to be right about.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("f1", format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (sigmoid(s) >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 })
}

/// `(auc, f1)`; AUC is an error on single-class input, F1 is still defined.
pub fn auc_f1(scores: &[f64], labels: &[bool], threshold: f64) -> (Result<f64>, Result<f64>) {
    (auc(scores, labels), f1(scores, labels, threshold))
}

/// Pessimistic 1-based rank of `held_out` among `(item, score)` candidates:
/// every other candidate scoring at least as high ranks above it.
pub fn rank_of(candidates: &[(u32, f64)], held_out: u32) -> Result<usize> {
    let target = candidates
        .iter()
        .find(|(i, _)| *i == held_out)
        .map(|&(_, s)| s)
        .ok_or_else(|| Error::InvalidArgument(format!("held-out item {held_out} is not a candidate")))?;
    Ok(1 + candidates
        .iter()
        .filter(|&&(i, s)| i != held_out && s >= target)
        .count())
}

/// `(hr@K, ndcg@K)` for a single relevant item at `rank`.
pub fn hit_ndcg(rank: usize, k: usize) -> (f64, f64) {
    if rank >= 1 && rank <= k {
        (1.0, 1.0 / ((rank + 1) as f64).log2())
    } else {
        (0.0, 0.0)
    }
}

/// `(hr@K, ndcg@K)` straight from scored candidates.
pub fn metric_topk(candidates: &[(u32, f64)], held_out: u32, k: usize) -> Result<(f64, f64)> {
    Ok(hit_ndcg(rank_of(candidates, held_out)?, k))
}
