//! Central finite-difference checks against the tape's analytic gradients.

use super::params::{ParamId, ParamStore};
use crate::error::Result;

/// Largest disagreement found by [`check_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Relative error with a floor on the denominator so entries whose true
/// gradient is ~0 are judged on an absolute scale of `floor * tolerance`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Perturbs every entry of every parameter by `±h`, re-evaluates `loss`, and
/// compares the central difference with `analytic` (which must be laid out
/// like `ParamStore::flatten`).
pub fn check_params(
    params: &mut ParamStore,
    analytic: &[f64],
    h: f64,
    floor: f64,
    mut loss: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<GradCheckReport> {
    let ids: Vec<ParamId> = params.ids().collect();
    let mut offset = 0;
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for id in ids {
        let n = params.get(id).len();
        for j in 0..n {
            let orig = params.get(id).values()[j];
            params.get_mut(id).values_mut()[j] = orig + h;
            let up = loss(params)?;
            params.get_mut(id).values_mut()[j] = orig - h;
            let down = loss(params)?;
            params.get_mut(id).values_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[offset + j];
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= report.max_relative_error {
                    report.worst = Some((params.name(id).to_string(), j, a, numeric));
                }
            }
        }
        offset += n;
    }
    Ok(report)
}

/// Flattened gradient slots, zero where a parameter has none.
pub fn flat_grads(params: &ParamStore) -> Vec<f64> {
    params
        .iter()
        .flat_map(|(_, _, t)| match t.grad() {
            Some(g) => g.to_vec(),
            None => vec![0.0; t.len()],
        })
        .collect()
}
