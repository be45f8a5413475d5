//! Attention and aggregation layers, each a small function over a [`Backend`].

use super::backend::Backend;
use super::config::Aggregator;
use crate::compute::ops::LEAKY_SLOPE;
use crate::error::{Error, Result};

/// Raw inner-product scores and their normalized weights.
pub struct Attention<V> {
    pub scores: V,
    pub weights: V,
}

/// `β = softmax(LeakyReLU(⟨query, key_k⟩))` over all keys.
pub fn attention<B: Backend>(b: &mut B, query: &B::V, keys: &[B::V]) -> Result<Attention<B::V>> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument("attention over an empty key set".into()));
    }
    let mut dots = Vec::with_capacity(keys.len());
    for k in keys {
        dots.push(b.dot(query, k)?);
    }
    let scores = b.concat(&dots)?;
    let activated = b.leaky_relu(&scores, LEAKY_SLOPE)?;
    let weights = b.softmax(&activated)?;
    Ok(Attention { scores, weights })
}

/// Attention of a user over contextual factors.
pub fn context_attention<B: Backend>(b: &mut B, user: &B::V, factors: &[B::V]) -> Result<Attention<B::V>> {
    attention(b, user, factors)
}

/// Attention of a (context-aware) user over relation types.
pub fn relation_attention<B: Backend>(b: &mut B, user: &B::V, relations: &[B::V]) -> Result<Attention<B::V>> {
    attention(b, user, relations)
}

/// `cs = Σ_f β_f · cd_f`, one condition vector per factor.
pub fn situation_vector<B: Backend>(b: &mut B, weights: &B::V, conditions: &[B::V], dim: usize) -> Result<B::V> {
    let n = b.value(weights).len();
    if conditions.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} conditions for {n} factors",
            conditions.len()
        )));
    }
    let terms: Vec<(usize, B::V)> = conditions.iter().cloned().enumerate().collect();
    b.weighted_sum(weights, &terms, dim)
}

/// `E_i = Σ_(r, e) w_k · e` where `k` indexes `weights`: the relation type
/// under attention, or the edge itself under uniform averaging. No edges
/// give the zero vector.
pub fn neighborhood_vector<B: Backend>(b: &mut B, weights: &B::V, edges: &[(usize, B::V)], dim: usize) -> Result<B::V> {
    b.weighted_sum(weights, edges, dim)
}

/// Fuses a base vector with its neighborhood.
///
/// SUM and AVG: `ReLU(W (base + nb) + bias)` with `W` of shape `[d, d]`.
/// CAT: `ReLU(W [nb; base] + bias)` with `W` of shape `[d, 2d]`.
pub fn aggregate<B: Backend>(
    b: &mut B,
    aggregator: Aggregator,
    base: &B::V,
    neighborhood: &B::V,
    w: &B::V,
    bias: &B::V,
) -> Result<B::V> {
    let input = match aggregator {
        Aggregator::Sum | Aggregator::Avg => b.add(base, neighborhood)?,
        Aggregator::Cat => b.concat(&[neighborhood.clone(), base.clone()])?,
    };
    let z = b.matmul(w, &input)?;
    let z = b.add(&z, bias)?;
    Ok(b.relu(&z))
}

/// User side: `aggregate(u, cs)`.
pub fn aggregate_user<B: Backend>(
    b: &mut B,
    aggregator: Aggregator,
    user: &B::V,
    situation: &B::V,
    w: &B::V,
    bias: &B::V,
) -> Result<B::V> {
    aggregate(b, aggregator, user, situation, w, bias)
}

/// Item side: `aggregate(i, E_i)`.
pub fn aggregate_item<B: Backend>(
    b: &mut B,
    aggregator: Aggregator,
    item: &B::V,
    neighborhood: &B::V,
    w: &B::V,
    bias: &B::V,
) -> Result<B::V> {
    aggregate(b, aggregator, item, neighborhood, w, bias)
}

/// Uniform weights of length `n`.
pub fn uniform<B: Backend>(b: &mut B, n: usize) -> B::V {
    b.constant(vec![1.0 / n.max(1) as f64; n])
}
