//! Summed losses with an L2 penalty, evaluated directly on scalars.
//! Training builds the same terms on the tape.

use crate::compute::ops;
use crate::error::{Error, Result};

fn l2(lambda: f64, params: &[&[f64]]) -> f64 {
    lambda * params.iter().flat_map(|p| p.iter()).map(|x| x * x).sum::<f64>()
}

/// `Σ (ŷ − y)² + λ‖Θ‖²`.
pub fn loss_rating(predictions: &[f64], labels: &[f64], lambda: f64, params: &[&[f64]]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(
            "loss_rating",
            format!("{} predictions for {} labels", predictions.len(), labels.len()),
        ));
    }
    let data: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(data + l2(lambda, params))
}

/// `−Σ⁺ log σ(ŷ) − Σ⁻ log(1 − σ(ŷ)) + λ‖Θ‖²` over logits, with log
/// arguments floored at 1e-12.
pub fn loss_ranking(positive: &[f64], negative: &[f64], lambda: f64, params: &[&[f64]]) -> f64 {
    let pos: f64 = positive.iter().map(|&s| ops::log_loss(s, true)).sum();
    let neg: f64 = negative.iter().map(|&s| ops::log_loss(s, false)).sum();
    pos + neg + l2(lambda, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_examples() {
        assert_eq!(loss_rating(&[1.0, 2.5], &[1.0, 2.5], 0.0, &[]).unwrap(), 0.0);
        assert_eq!(loss_rating(&[3.0], &[5.0], 0.0, &[]).unwrap(), 4.0);
        let with = loss_rating(&[3.0], &[5.0], 0.1, &[&[1.0, 2.0]]).unwrap();
        assert!((with - 4.5).abs() < 1e-12);
        assert!(loss_rating(&[1.0], &[], 0.0, &[]).is_err());
    }

    #[test]
    fn ranking_examples() {
        let l = loss_ranking(&[0.0], &[0.0], 0.0, &[]);
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);
        assert!(loss_ranking(&[30.0], &[-30.0], 0.0, &[]) < 1e-10);
        let reg = loss_ranking(&[30.0], &[-30.0], 0.5, &[&[2.0]]);
        assert!((reg - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ranking_monotone_in_logits() {
        let base = loss_ranking(&[0.3, -1.0], &[0.2], 0.0, &[]);
        assert!(loss_ranking(&[0.4, -1.0], &[0.2], 0.0, &[]) < base);
        assert!(loss_ranking(&[0.3, -1.0], &[0.3], 0.0, &[]) > base);
    }
}
