use serde::Serialize;

use crate::data::ContextualSituation;
use crate::error::{Error, Result};
use crate::model::{AttentionProfile, Model};

/// One user's attention over contextual factors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserAttentionVector {
    pub user: u32,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionExtract {
    /// One vector per requested user; factor attention has no situation term.
    pub factors: Vec<UserAttentionVector>,
    /// One profile per (user, situation), users outermost.
    pub profiles: Vec<AttentionProfile>,
}

/// Runs only the attention sub-passes for every (user, situation) pair.
pub fn extract_attention(
    model: &Model,
    users: &[u32],
    situations: &[ContextualSituation],
) -> Result<AttentionExtract> {
    if !model.config().uses_context() {
        return Err(Error::Config(format!(
            "model `{}` has no contextual factor attention",
            model.config().label()
        )));
    }
    if situations.is_empty() {
        return Err(Error::InvalidArgument("at least one situation is required".into()));
    }
    let mut factors = Vec::with_capacity(users.len());
    let mut profiles = Vec::with_capacity(users.len() * situations.len());
    for &user in users {
        let first = model.attention(user, &situations[0])?;
        factors.push(UserAttentionVector {
            user,
            weights: first.factor_weights.clone(),
        });
        profiles.push(first);
        for cs in &situations[1..] {
            profiles.push(model.attention(user, cs)?);
        }
    }
    Ok(AttentionExtract { factors, profiles })
}
