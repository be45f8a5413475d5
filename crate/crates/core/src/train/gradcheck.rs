//! Finite-difference check of the whole training objective for one model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compute::gradcheck::{check_params, flat_grads, GradCheckReport};
use crate::compute::Tape;
use crate::data::{InteractionRecord, ItemGraph, TaskKind};
use crate::error::Result;
use crate::model::{Backend, Eval, Model};

use super::loss::{loss_ranking, loss_rating};

/// Compares tape gradients of `Σℓ + λ‖Θ‖²` over `records` with central
/// differences of the same objective evaluated through [`loss_rating`] or
/// [`loss_ranking`] on inference scores. Dropout is ignored.
pub fn check_objective_gradients(
    model: &Model,
    graph: &ItemGraph,
    records: &[InteractionRecord],
    lambda: f64,
    h: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let task = model.config().task;
    let mut params = model.params().clone();
    params.zero_grads();
    // Never drawn from: dropout is off.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for r in records {
        let grads = {
            let mut tape = Tape::new(&params);
            let s = model.forward(&mut tape, graph, r.user, r.item, &r.situation, false, &mut rng)?;
            let l = match task {
                TaskKind::Rating => tape.squared_error(s, r.label),
                TaskKind::Ranking => tape.log_loss(s, r.is_positive()),
            };
            tape.backward(l)?
        };
        params.accumulate(&grads)?;
    }
    let mut analytic = flat_grads(&params);
    for (g, v) in analytic.iter_mut().zip(params.flatten()) {
        *g += 2.0 * lambda * v;
    }
    check_params(&mut params, &analytic, h, floor, |p| {
        let mut b = Eval::new(p);
        let mut scores = Vec::with_capacity(records.len());
        for r in records {
            let s = model.forward(&mut b, graph, r.user, r.item, &r.situation, false, &mut rng)?;
            scores.push(b.scalar(&s));
        }
        let flat = p.flatten();
        match task {
            TaskKind::Rating => {
                let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
                loss_rating(&scores, &labels, lambda, &[&flat])
            }
            TaskKind::Ranking => {
                let (mut pos, mut neg) = (Vec::new(), Vec::new());
                for (r, s) in records.iter().zip(scores) {
                    if r.is_positive() {
                        pos.push(s);
                    } else {
                        neg.push(s);
                    }
                }
                Ok(loss_ranking(&pos, &neg, lambda, &[&flat]))
            }
        }
    })
}
