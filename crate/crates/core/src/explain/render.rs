use serde::Serialize;

use crate::data::{ContextualSituation, ItemGraph, Vocabularies};
use crate::error::{Error, Result};
use crate::model::AttentionProfile;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorHighlight {
    pub factor: String,
    pub condition: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationHighlight {
    pub relation: String,
    /// The item's attribute values under this relation.
    pub values: Vec<String>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Explanation {
    pub user: String,
    pub item: String,
    pub situation: ContextualSituation,
    pub situation_text: String,
    pub factors: Vec<FactorHighlight>,
    pub relations: Vec<RelationHighlight>,
    pub sentence: String,
}

impl Explanation {
    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// A weight as quoted in sentences.
pub fn percent(weight: f64) -> String {
    format!("{:.1}%", weight * 100.0)
}

fn argsort_desc(w: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    idx
}

/// Fills the explanation template from a live attention profile.
///
/// Relations are taken in descending attention order, skipping those the
/// item has no triplet for, until `top_n` are cited. Without any citable
/// relation the sentence falls back to context-only wording, and `top_n = 0`
/// yields a generic sentence with no highlights.
pub fn render_explanation(
    profile: &AttentionProfile,
    item: u32,
    vocab: &Vocabularies,
    graph: &ItemGraph,
    top_n: usize,
) -> Result<Explanation> {
    let schema = &vocab.schema;
    schema.validate(&profile.situation)?;
    if item as usize >= vocab.items.len() {
        return Err(Error::UnknownId {
            kind: "item",
            name: item.to_string(),
        });
    }
    let factor_names = schema.factor_names();
    let situation_text = factor_names
        .iter()
        .zip(&profile.situation.0)
        .enumerate()
        .map(|(f, (name, &c))| format!("{name} {}", schema.condition_name(f, c)))
        .collect::<Vec<_>>()
        .join(", ");
    let mut out = Explanation {
        user: vocab.users.name(profile.user).to_string(),
        item: vocab.items.name(item).to_string(),
        situation: profile.situation.clone(),
        situation_text: situation_text.clone(),
        factors: Vec::new(),
        relations: Vec::new(),
        sentence: String::new(),
    };
    if top_n == 0 {
        out.sentence = format!("Under {situation_text}, this is recommended for you.");
        return Ok(out);
    }

    for f in argsort_desc(&profile.factor_weights).into_iter().take(top_n) {
        out.factors.push(FactorHighlight {
            factor: factor_names[f].to_string(),
            condition: schema.condition_name(f, profile.situation.0[f]).to_string(),
            weight: profile.factor_weights[f],
        });
    }

    let neighbors = if (item as usize) < graph.num_items() { graph.neighbors(item) } else { &[] };
    for r in argsort_desc(&profile.relation_weights) {
        if out.relations.len() == top_n {
            break;
        }
        let values: Vec<String> = neighbors
            .iter()
            .filter(|(rel, _)| *rel as usize == r)
            .map(|&(_, node)| graph.node_name(node, &vocab.items).to_string())
            .collect();
        if values.is_empty() {
            continue;
        }
        out.relations.push(RelationHighlight {
            relation: vocab.relations.name(r as u32).to_string(),
            values,
            weight: profile.relation_weights[r],
        });
    }

    let context = out
        .factors
        .first()
        .map(|f| format!(", especially given {}: {}", f.factor, f.condition))
        .unwrap_or_default();
    out.sentence = match out.relations.as_slice() {
        [] => format!("Under {situation_text}, this is recommended because it fits your situation{context}."),
        [one] => format!(
            "Under {situation_text}, this is recommended because its {}: {} matches what matters most to you ({}){context}.",
            one.relation,
            one.values.join("/"),
            percent(one.weight)
        ),
        many => format!(
            "Under {situation_text}, this is recommended because its {} match what matters most to you{context}.",
            many.iter()
                .map(|h| format!("{}: {} ({})", h.relation, h.values.join("/"), percent(h.weight)))
                .collect::<Vec<_>>()
                .join(" and ")
        ),
    };
    Ok(out)
}
