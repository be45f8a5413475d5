use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{Backend, Eval};
use super::config::{Aggregator, ModelConfig, ModelKind};
use super::heads::{self, find, HeadParams};
use super::layers;
use crate::compute::{ParamId, ParamStore, Tensor};
use crate::data::{ContextualSituation, ItemGraph, NodeRef, Vocabularies};
use crate::error::{Error, Result};

/// Attention a user pays under one situation. Vectors are empty for layers
/// the configuration does not have; under AVG the weights are uniform and
/// there are no scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionProfile {
    pub user: u32,
    pub situation: ContextualSituation,
    pub factor_scores: Vec<f64>,
    pub factor_weights: Vec<f64>,
    pub relation_scores: Vec<f64>,
    pub relation_weights: Vec<f64>,
}

/// The context-aware user side of one forward pass.
pub struct UserState<V> {
    pub u_final: V,
    pub factor: Option<layers::Attention<V>>,
    pub relation: Option<layers::Attention<V>>,
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    user: ParamId,
    item: ParamId,
    factor: Option<ParamId>,
    condition: Option<ParamId>,
    user_w: Option<ParamId>,
    user_b: Option<ParamId>,
    relation: Option<ParamId>,
    entity: Option<ParamId>,
    item_w: Option<ParamId>,
    item_b: Option<ParamId>,
    head: Option<HeadParams>,
    baseline: Option<BaselineParams>,
}

/// Per-feature linear weights and the optional deep part of the one-hot
/// factorization baselines.
#[derive(Clone, Debug, PartialEq)]
struct BaselineParams {
    bias: ParamId,
    lin_user: ParamId,
    lin_item: ParamId,
    lin_condition: ParamId,
    lin_entity: ParamId,
    deep: Option<(ParamId, ParamId, ParamId)>,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocabularies,
    params: ParamStore,
    layout: Layout,
    offsets: Vec<usize>,
}

fn opt(store: &ParamStore, name: &str, wanted: bool) -> Result<Option<ParamId>> {
    if wanted {
        find(store, name).map(Some)
    } else {
        Ok(None)
    }
}

fn need<B: Backend>(b: &mut B, id: Option<ParamId>) -> Result<B::V> {
    b.param(id.ok_or_else(|| Error::Config("parameter not part of this model".into()))?)
}

impl Model {
    /// Fresh parameters: embeddings and weight matrices uniform in
    /// `±1/sqrt(fan_in)`, biases zero.
    pub fn new(config: ModelConfig, vocab: Vocabularies, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        if config.uses_kg() && config.kind == ModelKind::CaKgcn && vocab.relations.is_empty() {
            return Err(Error::Config(format!(
                "ablation `{}` needs a knowledge graph, but the bundle has no relations",
                config.ablation
            )));
        }
        if config.uses_context() && vocab.schema.num_factors() == 0 {
            return Err(Error::Config("context layer needs at least one contextual factor".into()));
        }
        let emb = 1.0 / (d as f64).sqrt();
        let mut s = ParamStore::new();
        let (nu, ni) = (vocab.users.len(), vocab.items.len());
        let (nf, nc) = (vocab.schema.num_factors(), vocab.num_conditions());
        let (nr, ne) = (vocab.relations.len(), vocab.entities.len());
        s.add_uniform("emb.user", vec![nu, d], emb, rng);
        s.add_uniform("emb.item", vec![ni, d], emb, rng);
        match config.kind {
            ModelKind::CaKgcn => {
                let in_w = match config.aggregator {
                    Aggregator::Cat => 2 * d,
                    _ => d,
                };
                let wscale = 1.0 / (in_w as f64).sqrt();
                if config.uses_context() {
                    s.add_uniform("emb.factor", vec![nf, d], emb, rng);
                    s.add_uniform("emb.condition", vec![nc, d], emb, rng);
                    s.add_uniform("agg.user.w", vec![d, in_w], wscale, rng);
                    s.add_zeros("agg.user.b", vec![d]);
                }
                if config.uses_kg() {
                    s.add_uniform("emb.relation", vec![nr, d], emb, rng);
                    s.add_uniform("emb.entity", vec![ne, d], emb, rng);
                    s.add_uniform("agg.item.w", vec![d, in_w], wscale, rng);
                    s.add_zeros("agg.item.b", vec![d]);
                }
                HeadParams::init(&mut s, config.head, d, config.fm_factors, rng);
            }
            ModelKind::Fm | ModelKind::Nfm => {
                s.add_uniform("emb.condition", vec![nc, d], emb, rng);
                s.add_uniform("emb.entity", vec![ne, d], emb, rng);
                s.add_zeros("bias", vec![]);
                s.add_zeros("lin.user", vec![nu, 1]);
                s.add_zeros("lin.item", vec![ni, 1]);
                s.add_zeros("lin.condition", vec![nc, 1]);
                s.add_zeros("lin.entity", vec![ne, 1]);
                if config.kind == ModelKind::Nfm {
                    s.add_uniform("deep.hidden.w", vec![d, d], emb, rng);
                    s.add_zeros("deep.hidden.b", vec![d]);
                    s.add_uniform("deep.out.w", vec![d], emb, rng);
                }
            }
        }
        Self::from_parts(config, vocab, s)
    }

    /// Binds an existing parameter store to a configuration, checking that
    /// every expected tensor is present with the right shape.
    pub fn from_parts(config: ModelConfig, vocab: Vocabularies, mut params: ParamStore) -> Result<Self> {
        config.validate()?;
        let ids: Vec<ParamId> = params.ids().collect();
        for id in ids {
            let t = params.get_mut(id);
            if !t.is_trainable() {
                let fresh: Tensor = t.clone().trainable();
                *t = fresh;
            }
        }
        let s = &params;
        let ca = config.kind == ModelKind::CaKgcn;
        let ctx = config.uses_context();
        let kg = ca && config.uses_kg();
        let baseline = if ca {
            None
        } else {
            Some(BaselineParams {
                bias: find(s, "bias")?,
                lin_user: find(s, "lin.user")?,
                lin_item: find(s, "lin.item")?,
                lin_condition: find(s, "lin.condition")?,
                lin_entity: find(s, "lin.entity")?,
                deep: if config.kind == ModelKind::Nfm {
                    Some((
                        find(s, "deep.hidden.w")?,
                        find(s, "deep.hidden.b")?,
                        find(s, "deep.out.w")?,
                    ))
                } else {
                    None
                },
            })
        };
        let layout = Layout {
            user: find(s, "emb.user")?,
            item: find(s, "emb.item")?,
            factor: opt(s, "emb.factor", ctx)?,
            condition: opt(s, "emb.condition", ctx || !ca)?,
            user_w: opt(s, "agg.user.w", ctx)?,
            user_b: opt(s, "agg.user.b", ctx)?,
            relation: opt(s, "emb.relation", kg)?,
            entity: opt(s, "emb.entity", kg || !ca)?,
            item_w: opt(s, "agg.item.w", kg)?,
            item_b: opt(s, "agg.item.b", kg)?,
            head: if ca {
                Some(HeadParams::resolve(s, config.head)?)
            } else {
                None
            },
            baseline,
        };
        let d = config.dim;
        let expect = [
            (Some(layout.user), vocab.users.len()),
            (Some(layout.item), vocab.items.len()),
            (layout.factor, vocab.schema.num_factors()),
            (layout.condition, vocab.num_conditions()),
            (layout.relation, vocab.relations.len()),
            (layout.entity, vocab.entities.len()),
        ];
        for (id, rows) in expect {
            if let Some(id) = id {
                if params.get(id).shape() != [rows, d] {
                    return Err(Error::Checkpoint(format!(
                        "`{}` has shape {:?}, expected [{rows}, {d}]",
                        params.name(id),
                        params.get(id).shape()
                    )));
                }
            }
        }
        let offsets = (0..vocab.schema.num_factors())
            .map(|f| vocab.schema.condition_offset(f))
            .collect();
        Ok(Self {
            config,
            vocab,
            params,
            layout,
            offsets,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        let rebuilt = Self::from_parts(self.config.clone(), self.vocab.clone(), params)?;
        *self = rebuilt;
        Ok(())
    }

    pub fn check_graph(&self, graph: &ItemGraph) -> Result<()> {
        if graph.num_items() != self.vocab.items.len() || graph.relations != self.vocab.relations {
            return Err(Error::InvalidArgument(
                "item graph does not match the model vocabularies".into(),
            ));
        }
        Ok(())
    }

    fn check_ids(&self, user: u32, item: Option<u32>, cs: &ContextualSituation) -> Result<()> {
        if user as usize >= self.vocab.users.len() {
            return Err(Error::UnknownId {
                kind: "user",
                name: user.to_string(),
            });
        }
        if let Some(i) = item {
            if i as usize >= self.vocab.items.len() {
                return Err(Error::UnknownId {
                    kind: "item",
                    name: i.to_string(),
                });
            }
        }
        self.vocab.schema.validate(cs)
    }

    fn node_row<B: Backend>(&self, b: &mut B, node: NodeRef) -> Result<B::V> {
        match node {
            NodeRef::Item(i) => b.row(self.layout.item, i as usize),
            NodeRef::Entity(e) => b.row(
                self.layout
                    .entity
                    .ok_or_else(|| Error::Config("model has no entity table".into()))?,
                e as usize,
            ),
        }
    }

    fn condition_rows<B: Backend>(&self, b: &mut B, cs: &ContextualSituation) -> Result<Vec<B::V>> {
        let table = self
            .layout
            .condition
            .ok_or_else(|| Error::Config("model has no condition table".into()))?;
        cs.0.iter()
            .enumerate()
            .map(|(f, &c)| b.row(table, self.offsets[f] + c as usize))
            .collect()
    }

    /// Context layer and relation attention. Without a context layer the raw
    /// user vector is used.
    pub fn user_state<B: Backend>(&self, b: &mut B, user: u32, cs: &ContextualSituation) -> Result<UserState<B::V>> {
        let d = self.config.dim;
        let avg = self.config.aggregator == Aggregator::Avg;
        let u = b.row(self.layout.user, user as usize)?;
        let (u_final, factor) = if self.config.uses_context() {
            let nf = self.vocab.schema.num_factors();
            let factor = if avg {
                None
            } else {
                let table = need_id(self.layout.factor)?;
                let keys = (0..nf).map(|f| b.row(table, f)).collect::<Result<Vec<_>>>()?;
                Some(layers::context_attention(b, &u, &keys)?)
            };
            let weights = match &factor {
                Some(a) => a.weights.clone(),
                None => layers::uniform(b, nf),
            };
            let conds = self.condition_rows(b, cs)?;
            let situation = layers::situation_vector(b, &weights, &conds, d)?;
            let (w, bias) = (need(b, self.layout.user_w)?, need(b, self.layout.user_b)?);
            let u_final = layers::aggregate_user(b, self.config.aggregator, &u, &situation, &w, &bias)?;
            (u_final, factor)
        } else {
            (u, None)
        };
        let relation = if self.config.kind == ModelKind::CaKgcn && self.config.uses_kg() && !avg {
            let table = need_id(self.layout.relation)?;
            let keys = (0..self.vocab.relations.len())
                .map(|r| b.row(table, r))
                .collect::<Result<Vec<_>>>()?;
            Some(layers::relation_attention(b, &u_final, &keys)?)
        } else {
            None
        };
        Ok(UserState {
            u_final,
            factor,
            relation,
        })
    }

    /// Knowledge-graph layer for one item under a user's relation attention.
    pub fn item_final<B: Backend>(
        &self,
        b: &mut B,
        graph: &ItemGraph,
        item: u32,
        state: &UserState<B::V>,
    ) -> Result<B::V> {
        let i = b.row(self.layout.item, item as usize)?;
        if !(self.config.kind == ModelKind::CaKgcn && self.config.uses_kg()) {
            return Ok(i);
        }
        let edges = graph.neighbors(item);
        let avg = self.config.aggregator == Aggregator::Avg;
        let mut terms = Vec::with_capacity(edges.len());
        for (k, &(r, node)) in edges.iter().enumerate() {
            terms.push((if avg { k } else { r as usize }, self.node_row(b, node)?));
        }
        let weights = match &state.relation {
            Some(a) if !avg => a.weights.clone(),
            _ => layers::uniform(b, edges.len()),
        };
        let nb = layers::neighborhood_vector(b, &weights, &terms, self.config.dim)?;
        let (w, bias) = (need(b, self.layout.item_w)?, need(b, self.layout.item_b)?);
        layers::aggregate_item(b, self.config.aggregator, &i, &nb, &w, &bias)
    }

    /// Head applied to final vectors.
    pub fn head<B: Backend, R: Rng>(&self, b: &mut B, u: &B::V, i: &B::V, training: bool, rng: &mut R) -> Result<B::V> {
        let p = self
            .layout
            .head
            .as_ref()
            .ok_or_else(|| Error::Config("baseline models have no head".into()))?;
        heads::predict(b, p, u, i, self.config.dropout, training, rng)
    }

    /// Raw score of one (user, item, situation); a logit for ranking tasks.
    pub fn forward<B: Backend, R: Rng>(
        &self,
        b: &mut B,
        graph: &ItemGraph,
        user: u32,
        item: u32,
        cs: &ContextualSituation,
        training: bool,
        rng: &mut R,
    ) -> Result<B::V> {
        self.check_ids(user, Some(item), cs)?;
        if self.layout.baseline.is_some() {
            return self.baseline_forward(b, graph, user, item, cs, training, rng);
        }
        let state = self.user_state(b, user, cs)?;
        let i = self.item_final(b, graph, item, &state)?;
        self.head(b, &state.u_final, &i, training, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn baseline_forward<B: Backend, R: Rng>(
        &self,
        b: &mut B,
        graph: &ItemGraph,
        user: u32,
        item: u32,
        cs: &ContextualSituation,
        training: bool,
        rng: &mut R,
    ) -> Result<B::V> {
        let p = self.layout.baseline.as_ref().expect("baseline layout");
        let d = self.config.dim;
        let mut emb = vec![b.row(self.layout.user, user as usize)?, b.row(self.layout.item, item as usize)?];
        let mut lin = vec![b.row(p.lin_user, user as usize)?, b.row(p.lin_item, item as usize)?];
        emb.extend(self.condition_rows(b, cs)?);
        for (f, &c) in cs.0.iter().enumerate() {
            lin.push(b.row(p.lin_condition, self.offsets[f] + c as usize)?);
        }
        for &(_, node) in graph.neighbors(item) {
            emb.push(self.node_row(b, node)?);
            lin.push(match node {
                NodeRef::Item(j) => b.row(p.lin_item, j as usize)?,
                NodeRef::Entity(e) => b.row(p.lin_entity, e as usize)?,
            });
        }
        // Bi-interaction over one-hot features: ½((Σv)² − Σv²).
        let total = b.add_all(&emb)?;
        let mut squares = Vec::with_capacity(emb.len());
        for v in &emb {
            squares.push(b.mul(v, v)?);
        }
        let sq_sum = b.add_all(&squares)?;
        let sum_sq = b.mul(&total, &total)?;
        let diff = b.sub(&sum_sq, &sq_sum)?;
        let bi = b.scale(&diff, 0.5);
        let lin_sum = b.add_all(&lin)?;
        let linear = b.sum(&lin_sum);
        let bias = b.param(p.bias)?;
        let interaction = match p.deep {
            None => b.sum(&bi),
            Some((w, hb, out)) => {
                let bi = b.dropout(&bi, self.config.dropout, training, rng)?;
                let (w, hb, out) = (b.param(w)?, b.param(hb)?, b.param(out)?);
                let z = b.matmul(&w, &bi)?;
                let z = b.add(&z, &hb)?;
                let h = b.relu(&z);
                let h = b.dropout(&h, self.config.dropout, training, rng)?;
                debug_assert_eq!(b.value(&h).len(), d);
                b.dot(&out, &h)?
            }
        };
        b.add_all(&[bias, linear, interaction])
    }

    /// Inference score without dropout.
    pub fn predict(&self, graph: &ItemGraph, user: u32, item: u32, cs: &ContextualSituation) -> Result<f64> {
        let mut b = Eval::new(&self.params);
        let mut rng = inference_rng();
        let v = self.forward(&mut b, graph, user, item, cs, false, &mut rng)?;
        Ok(b.scalar(&v))
    }

    /// Scores many items for one (user, situation), sharing the user side.
    pub fn score_items(
        &self,
        graph: &ItemGraph,
        user: u32,
        cs: &ContextualSituation,
        items: &[u32],
    ) -> Result<Vec<f64>> {
        self.check_ids(user, None, cs)?;
        let mut b = Eval::new(&self.params);
        let mut rng = inference_rng();
        if self.layout.baseline.is_some() {
            return items
                .iter()
                .map(|&i| {
                    let v = self.baseline_forward(&mut b, graph, user, i, cs, false, &mut rng)?;
                    Ok(b.scalar(&v))
                })
                .collect();
        }
        let state = self.user_state(&mut b, user, cs)?;
        let mut out = Vec::with_capacity(items.len());
        for &i in items {
            if i as usize >= self.vocab.items.len() {
                return Err(Error::UnknownId {
                    kind: "item",
                    name: i.to_string(),
                });
            }
            let iv = self.item_final(&mut b, graph, i, &state)?;
            let s = self.head(&mut b, &state.u_final, &iv, false, &mut rng)?;
            out.push(b.scalar(&s));
        }
        Ok(out)
    }

    /// Attention sub-passes only.
    pub fn attention(&self, user: u32, cs: &ContextualSituation) -> Result<AttentionProfile> {
        self.check_ids(user, None, cs)?;
        let mut profile = AttentionProfile {
            user,
            situation: cs.clone(),
            factor_scores: Vec::new(),
            factor_weights: Vec::new(),
            relation_scores: Vec::new(),
            relation_weights: Vec::new(),
        };
        if self.config.kind != ModelKind::CaKgcn {
            return Ok(profile);
        }
        let mut b = Eval::new(&self.params);
        let state = self.user_state(&mut b, user, cs)?;
        let avg = self.config.aggregator == Aggregator::Avg;
        if self.config.uses_context() {
            match &state.factor {
                Some(a) => {
                    profile.factor_scores = b.value(&a.scores).to_vec();
                    profile.factor_weights = b.value(&a.weights).to_vec();
                }
                None => profile.factor_weights = uniform(self.vocab.schema.num_factors()),
            }
        }
        if self.config.uses_kg() {
            match &state.relation {
                Some(a) => {
                    profile.relation_scores = b.value(&a.scores).to_vec();
                    profile.relation_weights = b.value(&a.weights).to_vec();
                }
                None if avg => profile.relation_weights = uniform(self.vocab.relations.len()),
                None => {}
            }
        }
        Ok(profile)
    }
}

fn need_id(id: Option<ParamId>) -> Result<ParamId> {
    id.ok_or_else(|| Error::Config("parameter not part of this model".into()))
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n.max(1) as f64; n]
}

/// Dropout is off at inference, so this stream is never drawn from.
fn inference_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}
