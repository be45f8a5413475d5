//! Synthetic interactions with planted per-user factor attention and
//! per-(user, situation) relation attention.
//!
//! Each user belongs to group `u % F` and attends mostly to factor `g`.
//! Every condition favors one relation, so the condition a user sees on their
//! dominant factor decides which item attribute matters. The latent score of
//! `(u, i, cs)` is
//!
//! ```text
//! s = Σ_r β_r(u, cs) · Σ_f β_f(u) · A[c_f, v_r(i)]  +  taste · q(i)
//! ```
//!
//! where `A` is a random condition × attribute affinity table, `v_r(i)` the
//! item's value under relation `r` and `q(i)` a static appeal shared by all
//! users. Ranking positives come from the top-scoring items, ratings from a
//! standardized score; a `noise` share of labels is replaced by random ones.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::bundle::RawDataset;
use super::kg::KnowledgeGraph;
use super::records::{write_interactions, write_text, IdSpace, InteractionRecord};
use super::schema::{ContextSchema, ContextualSituation, RatingScale, SchemaFile, TaskKind};
use crate::error::{Error, Result};
use crate::seed::{self, SeedStreams, StreamRng};

pub const TRUTH_FACTORS_FILE: &str = "truth_factors.tsv";
pub const TRUTH_RELATIONS_FILE: &str = "truth_relations.tsv";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub task: TaskKind,
    pub users: usize,
    pub items: usize,
    /// Condition count of each factor.
    pub conditions: Vec<usize>,
    pub relations: usize,
    /// Non-item entities, spread evenly over relations as attribute values.
    pub entities: usize,
    pub interactions: usize,
    pub noise: f64,
    pub seed: u64,
    /// Planted weight of the dominant factor.
    pub factor_focus: f64,
    /// Planted weight of the relation favored by the dominant condition.
    pub relation_focus: f64,
    /// Weight of the context-free item appeal.
    pub taste: f64,
    /// Ranking positives are drawn from this top share of items.
    pub top_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::recovery(7)
    }
}

impl SyntheticSpec {
    /// 200 users, 300 items, 3 factors, 4 relations, noise 0.1.
    pub fn recovery(seed: u64) -> Self {
        Self {
            task: TaskKind::Ranking,
            users: 200,
            items: 300,
            conditions: vec![4, 4, 4],
            relations: 4,
            entities: 64,
            interactions: 12_000,
            noise: 0.1,
            seed,
            factor_focus: 0.8,
            relation_focus: 0.85,
            taste: 0.3,
            top_fraction: 0.03,
        }
    }

    /// Dimensions of the public Frappé logs after the usual preprocessing.
    pub fn frappe_scale(seed: u64) -> Self {
        Self {
            task: TaskKind::Ranking,
            users: 957,
            items: 4082,
            conditions: vec![7, 2, 3, 9, 77],
            relations: 5,
            entities: 84,
            interactions: 96_203,
            noise: 0.1,
            seed,
            factor_focus: 0.8,
            relation_focus: 0.85,
            taste: 0.3,
            top_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if self.users == 0 || self.items == 0 {
            return bad("needs at least one user and one item");
        }
        if self.conditions.is_empty() || self.conditions.contains(&0) {
            return bad("every factor needs at least one condition");
        }
        if self.relations == 0 || self.entities < self.relations {
            return bad("needs at least one attribute value per relation");
        }
        if self.interactions < self.users {
            return bad("needs at least one interaction per user");
        }
        for (name, v) in [
            ("noise", self.noise),
            ("factor_focus", self.factor_focus),
            ("relation_focus", self.relation_focus),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) || !self.taste.is_finite() {
            return bad("top_fraction must lie in (0, 1] and taste be finite");
        }
        Ok(())
    }

    pub fn num_factors(&self) -> usize {
        self.conditions.len()
    }
}

/// Planted attention, never part of the training files.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub factor_attention: Vec<Vec<f64>>,
    pub dominant_factor: Vec<usize>,
    /// Relation attention for every observed (user, situation).
    pub relation_attention: BTreeMap<(u32, ContextualSituation), Vec<f64>>,
    /// Relation favored by each global condition.
    pub favored_relation: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub raw: RawDataset,
    pub truth: GroundTruth,
}

/// Concentrates `focus` on one index and spreads the rest evenly.
fn focused(n: usize, at: usize, focus: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let rest = (1.0 - focus) / (n - 1) as f64;
    (0..n).map(|k| if k == at { focus } else { rest }).collect()
}

fn symmetric(rng: &mut StreamRng) -> f64 {
    rng.random_range(-1.0..1.0)
}

struct Planted {
    /// `affinity[c][v]` over global conditions and attribute values.
    affinity: Vec<Vec<f64>>,
    appeal: Vec<f64>,
    /// `values[i][r]`: global attribute value of item `i` under relation `r`.
    values: Vec<Vec<usize>>,
    favored: Vec<usize>,
    offsets: Vec<usize>,
    factor_attention: Vec<Vec<f64>>,
}

impl Planted {
    fn relation_attention(&self, spec: &SyntheticSpec, user: usize, cs: &[u32]) -> Vec<f64> {
        let g = user % spec.num_factors();
        let c = self.offsets[g] + cs[g] as usize;
        focused(spec.relations, self.favored[c], spec.relation_focus)
    }

    /// Latent scores of every item for one (user, situation).
    fn scores(&self, spec: &SyntheticSpec, user: usize, cs: &[u32], out: &mut Vec<f64>) {
        let beta_f = &self.factor_attention[user];
        let beta_r = self.relation_attention(spec, user, cs);
        let num_values = self.affinity[0].len();
        // Per attribute value: Σ_f β_f A[c_f, v].
        let mut g = vec![0.0; num_values];
        for (f, &c) in cs.iter().enumerate() {
            let row = &self.affinity[self.offsets[f] + c as usize];
            for (gv, a) in g.iter_mut().zip(row) {
                *gv += beta_f[f] * a;
            }
        }
        out.clear();
        out.extend(self.values.iter().zip(&self.appeal).map(|(vals, q)| {
            let ctx: f64 = vals.iter().zip(&beta_r).map(|(&v, b)| b * g[v]).sum();
            ctx + spec.taste * q
        }));
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = SeedStreams::new(spec.seed).rng(seed::SYNTH);
    let nf = spec.num_factors();

    let factor_names: Vec<String> = (0..nf).map(|f| format!("factor{f}")).collect();
    let mut schema = ContextSchema::new(&factor_names)?;
    let mut offsets = Vec::with_capacity(nf);
    for (f, &n) in spec.conditions.iter().enumerate() {
        offsets.push(schema.num_conditions());
        for k in 0..n {
            schema.intern_condition(f, &format!("f{f}c{k}"));
        }
    }
    let num_conditions = schema.num_conditions();

    let mut ids = IdSpace::default();
    for u in 0..spec.users {
        ids.users.get_or_insert(&format!("u{u}"));
    }
    for i in 0..spec.items {
        ids.items.get_or_insert(&format!("i{i}"));
    }

    // Attribute values: relation r owns a contiguous block of global values.
    let (base, extra) = (spec.entities / spec.relations, spec.entities % spec.relations);
    let mut value_start = Vec::with_capacity(spec.relations);
    let mut value_count = Vec::with_capacity(spec.relations);
    let mut next = 0;
    for r in 0..spec.relations {
        let n = base + usize::from(r < extra);
        value_start.push(next);
        value_count.push(n);
        next += n;
    }
    let mut kg = KnowledgeGraph::new();
    let mut values = Vec::with_capacity(spec.items);
    for i in 0..spec.items {
        let vals: Vec<usize> = (0..spec.relations)
            .map(|r| value_start[r] + rng.random_range(0..value_count[r]))
            .collect();
        for (r, &v) in vals.iter().enumerate() {
            kg.insert(
                &format!("i{i}"),
                &format!("rel{r}"),
                &format!("rel{r}v{}", v - value_start[r]),
            )?;
        }
        values.push(vals);
    }

    // Conditions of a factor cycle through relations from a random offset.
    let mut favored = Vec::with_capacity(num_conditions);
    for &n in &spec.conditions {
        let start = rng.random_range(0..spec.relations);
        favored.extend((0..n).map(|k| (start + k) % spec.relations));
    }
    let affinity: Vec<Vec<f64>> = (0..num_conditions)
        .map(|_| (0..spec.entities).map(|_| symmetric(&mut rng)).collect())
        .collect();
    let value_appeal: Vec<f64> = (0..spec.entities).map(|_| symmetric(&mut rng)).collect();
    let appeal: Vec<f64> = values
        .iter()
        .map(|vals| {
            let attr: f64 = vals.iter().map(|&v| value_appeal[v]).sum::<f64>() / spec.relations as f64;
            attr + 0.3 * symmetric(&mut rng)
        })
        .collect();
    let factor_attention: Vec<Vec<f64>> = (0..spec.users)
        .map(|u| focused(nf, u % nf, spec.factor_focus))
        .collect();
    let planted = Planted {
        affinity,
        appeal,
        values,
        favored: favored.clone(),
        offsets,
        factor_attention: factor_attention.clone(),
    };

    let records = match spec.task {
        TaskKind::Ranking => ranking_records(spec, &planted, &mut rng),
        TaskKind::Rating => rating_records(spec, &planted, &mut rng),
    };

    let mut relation_attention = BTreeMap::new();
    for r in &records {
        relation_attention
            .entry((r.user, r.situation.clone()))
            .or_insert_with(|| planted.relation_attention(spec, r.user as usize, &r.situation.0));
    }
    let truth = GroundTruth {
        dominant_factor: (0..spec.users).map(|u| u % nf).collect(),
        factor_attention,
        relation_attention,
        favored_relation: favored,
    };
    let scale = match spec.task {
        TaskKind::Rating => Some(RatingScale::new(1.0, 5.0)?),
        TaskKind::Ranking => None,
    };
    Ok(SyntheticData {
        spec: spec.clone(),
        raw: RawDataset {
            task: spec.task,
            scale,
            schema,
            ids,
            records,
            kg,
        },
        truth,
    })
}

fn random_situation(spec: &SyntheticSpec, rng: &mut StreamRng) -> Vec<u32> {
    spec.conditions.iter().map(|&n| rng.random_range(0..n as u32)).collect()
}

fn per_user_counts(spec: &SyntheticSpec) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (base, extra) = (spec.interactions / spec.users, spec.interactions % spec.users);
    (0..spec.users).map(move |u| (u, base + usize::from(u < extra)))
}

fn ranking_records(spec: &SyntheticSpec, planted: &Planted, rng: &mut StreamRng) -> Vec<InteractionRecord> {
    let top = ((spec.top_fraction * spec.items as f64).round() as usize).clamp(1, spec.items);
    let mut out = Vec::with_capacity(spec.interactions);
    let mut scores = Vec::with_capacity(spec.items);
    let mut order: Vec<u32> = Vec::with_capacity(spec.items);
    for (u, count) in per_user_counts(spec) {
        let mut seen = HashSet::new();
        for _ in 0..count {
            let cs = random_situation(spec, rng);
            planted.scores(spec, u, &cs, &mut scores);
            order.clear();
            order.extend(0..spec.items as u32);
            if top < spec.items {
                order.select_nth_unstable_by(top - 1, |&a, &b| {
                    scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
                });
            }
            // A few redraws avoid exact (user, item, situation) repeats.
            let mut item = 0;
            for _ in 0..8 {
                item = if rng.random::<f64>() < spec.noise {
                    rng.random_range(0..spec.items as u32)
                } else {
                    order[rng.random_range(0..top)]
                };
                if !seen.contains(&(item, cs.clone())) {
                    break;
                }
            }
            seen.insert((item, cs.clone()));
            out.push(InteractionRecord {
                user: u as u32,
                item,
                situation: ContextualSituation(cs),
                label: 1.0,
            });
        }
    }
    out
}

fn rating_records(spec: &SyntheticSpec, planted: &Planted, rng: &mut StreamRng) -> Vec<InteractionRecord> {
    let mut scores = Vec::with_capacity(spec.items);
    // Standardize latent scores with a pilot sample.
    let mut pilot = Vec::new();
    for _ in 0..64 {
        let u = rng.random_range(0..spec.users);
        let cs = random_situation(spec, rng);
        planted.scores(spec, u, &cs, &mut scores);
        pilot.extend_from_slice(&scores);
    }
    let mean = pilot.iter().sum::<f64>() / pilot.len() as f64;
    let sd = (pilot.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / pilot.len() as f64)
        .sqrt()
        .max(1e-12);
    let mut out = Vec::with_capacity(spec.interactions);
    for (u, count) in per_user_counts(spec) {
        for _ in 0..count {
            let cs = random_situation(spec, rng);
            let item = rng.random_range(0..spec.items);
            planted.scores(spec, u, &cs, &mut scores);
            let z = (scores[item] - mean) / sd;
            let rating = if rng.random::<f64>() < spec.noise {
                rng.random_range(1..=5) as f64
            } else {
                (3.0 + 1.5 * z).round().clamp(1.0, 5.0)
            };
            out.push(InteractionRecord {
                user: u as u32,
                item: item as u32,
                situation: ContextualSituation(cs),
                label: rating,
            });
        }
    }
    out
}

impl SyntheticData {
    /// Writes raw files in the ingestion formats plus the ground-truth files.
    pub fn write_raw(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let raw = &self.raw;
        let p = |name: &str| dir.join(name);
        write_interactions(&p(INTERACTIONS_FILE), &raw.records, &raw.schema, &raw.ids)?;
        write_text(&p("kg.tsv"), &raw.kg.render())?;
        let schema = SchemaFile {
            task: raw.task,
            scale: raw.scale,
            schema: raw.schema.clone(),
        };
        write_text(&p("schema.txt"), &schema.render())?;
        write_text(&p(TRUTH_FACTORS_FILE), &self.render_truth_factors())?;
        write_text(&p(TRUTH_RELATIONS_FILE), &self.render_truth_relations())?;
        Ok([INTERACTIONS_FILE, "kg.tsv", "schema.txt", TRUTH_FACTORS_FILE, TRUTH_RELATIONS_FILE]
            .iter()
            .map(|n| p(n))
            .collect())
    }

    pub fn render_truth_factors(&self) -> String {
        let mut out = String::from("user\tfactor\tweight\n");
        for (u, w) in self.truth.factor_attention.iter().enumerate() {
            for (f, x) in w.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{x}\n",
                    self.raw.ids.users.name(u as u32),
                    self.raw.schema.factors()[f].name
                ));
            }
        }
        out
    }

    pub fn render_truth_relations(&self) -> String {
        let mut out = String::from("user\tsituation\trelation\tweight\n");
        for ((u, cs), w) in &self.truth.relation_attention {
            let user = self.raw.ids.users.name(*u);
            let key = self.raw.schema.situation_key(cs);
            for (r, x) in w.iter().enumerate() {
                out.push_str(&format!(
                    "{user}\t{key}\t{}\t{x}\n",
                    self.raw.kg.relations().name(r as u32)
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: TaskKind, noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            task,
            users: 12,
            items: 40,
            conditions: vec![3, 2],
            relations: 3,
            entities: 9,
            interactions: 240,
            noise,
            seed: 3,
            factor_focus: 1.0,
            relation_focus: 1.0,
            taste: 0.0,
            top_fraction: 0.05,
        }
    }

    #[test]
    fn degenerate_specs_rejected() {
        let mut s = small(TaskKind::Ranking, 0.1);
        s.users = 0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = small(TaskKind::Ranking, 0.1);
        s.items = 0;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn truth_is_distributions() {
        let d = generate_synthetic(&small(TaskKind::Ranking, 0.1)).unwrap();
        let mut spec = small(TaskKind::Ranking, 0.1);
        spec.factor_focus = 0.7;
        spec.relation_focus = 0.6;
        let d2 = generate_synthetic(&spec).unwrap();
        for t in [&d.truth, &d2.truth] {
            for w in t.factor_attention.iter().chain(t.relation_attention.values()) {
                assert!(w.iter().all(|&x| x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(d.raw.kg.len(), 40 * 3);
        assert_eq!(d.raw.records.len(), 240);
    }

    #[test]
    fn noiseless_full_focus_is_a_function_of_dominant_condition() {
        // With full focus the score depends on (group, dominant condition,
        // item) only, so positives for a user come from one fixed top set
        // per dominant condition.
        let spec = small(TaskKind::Ranking, 0.0);
        let d = generate_synthetic(&spec).unwrap();
        let top = 2;
        let mut sets: BTreeMap<(u32, u32), HashSet<u32>> = BTreeMap::new();
        for r in &d.raw.records {
            let g = r.user as usize % 2;
            sets.entry((g as u32, r.situation.0[g])).or_default().insert(r.item);
        }
        for (k, s) in sets {
            assert!(s.len() <= top, "{k:?} -> {s:?}");
        }
    }

    #[test]
    fn rating_labels_on_scale() {
        let d = generate_synthetic(&small(TaskKind::Rating, 0.1)).unwrap();
        assert!(d.raw.records.iter().all(|r| (1.0..=5.0).contains(&r.label) && r.label.fract() == 0.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = small(TaskKind::Ranking, 0.1);
        let pa = generate_synthetic(&spec).unwrap().write_raw(a.path()).unwrap();
        let pb = generate_synthetic(&spec).unwrap().write_raw(b.path()).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }
}
