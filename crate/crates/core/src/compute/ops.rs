//! Scalar and slice kernels shared by the tape and by non-differentiated code.

use crate::error::{Error, Result};

/// Negative slope used for attention scores.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Floor applied to probabilities inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `-ln(max(p, floor))` where `p = sigmoid(logit)` for positives and
/// `1 - sigmoid(logit)` for negatives.
pub fn log_loss(logit: f64, positive: bool) -> f64 {
    let p = if positive {
        sigmoid(logit)
    } else {
        sigmoid(-logit)
    };
    -p.max(LOG_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_saturates_without_nan() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [700.0, -700.0, 1e300, -1e300] {
            assert!(sigmoid(x).is_finite());
        }
        assert!(sigmoid(700.0) > 1.0 - 1e-12 && sigmoid(700.0) <= 1.0);
        for x in [-30.0, -2.5, 0.3, 17.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leaky_relu_branches() {
        assert_eq!(leaky_relu(2.0, 0.01), 2.0);
        assert_eq!(leaky_relu(-1.0, 0.01), -0.01);
        assert_eq!(leaky_relu(0.0, 0.01), 0.0);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let c = 4.2;
        let s = softmax(&[c, c + 2f64.ln()]).unwrap();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-12 && (s[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn log_loss_clamps() {
        assert!((log_loss(0.0, true) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_loss(-1e4, true), -(LOG_FLOOR.ln()));
        assert!(log_loss(30.0, true) < 1e-10);
        assert!(log_loss(-30.0, false) < 1e-10);
    }
}
