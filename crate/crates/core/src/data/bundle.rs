use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::kg::{load_kg, KnowledgeGraph};
use super::negatives::{sample_negatives, InteractionIndex};
use super::records::{load_interactions, write_interactions, write_text, IdSpace, InteractionRecord};
use super::schema::{ContextSchema, RatingScale, SchemaFile, TaskKind};
use super::split::{split_leave_one_out, split_random};
use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::seed::{self, SeedStreams};

pub const SCHEMA_FILE: &str = "schema.txt";
pub const KG_FILE: &str = "kg.tsv";
pub const TRAIN_FILE: &str = "train.tsv";
pub const VALID_FILE: &str = "valid.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const VALID_NEG_FILE: &str = "valid_negatives.tsv";
pub const TEST_NEG_FILE: &str = "test_negatives.tsv";
pub const STATS_FILE: &str = "stats.txt";

/// Negatives drawn per evaluation positive.
pub const EVAL_NEGATIVES: usize = 2;

/// A graph neighbor is either another item or an attribute entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    Item(u32),
    Entity(u32),
}

/// Graph resolved against the item vocabulary: every item id has an
/// adjacency list (possibly empty) of `(relation, neighbor)` edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemGraph {
    /// Entities that are not items.
    pub entities: Vocab,
    pub relations: Vocab,
    adjacency: Vec<Vec<(u32, NodeRef)>>,
}

impl ItemGraph {
    /// Appends graph heads missing from `items` to it, then resolves edges.
    pub fn build(kg: &KnowledgeGraph, items: &mut Vocab) -> Self {
        for h in kg.heads() {
            items.get_or_insert(kg.entities().name(h));
        }
        let entities: Vocab = kg
            .entities()
            .names()
            .iter()
            .filter(|n| !items.contains(n))
            .collect();
        let resolve = |e: u32| {
            let name = kg.entities().name(e);
            match items.id(name) {
                Some(i) => NodeRef::Item(i),
                None => NodeRef::Entity(entities.id(name).expect("non-item entity")),
            }
        };
        let adjacency = (0..items.len() as u32)
            .map(|i| {
                kg.neighbors_of(items.name(i))
                    .iter()
                    .map(|&(r, t)| (r, resolve(t)))
                    .collect()
            })
            .collect();
        Self {
            entities,
            relations: kg.relations().clone(),
            adjacency,
        }
    }

    pub fn neighbors(&self, item: u32) -> &[(u32, NodeRef)] {
        self.adjacency.get(item as usize).map_or(&[], Vec::as_slice)
    }

    pub fn num_items(&self) -> usize {
        self.adjacency.len()
    }

    /// Reorders one item's edges so that position `k` holds the old edge
    /// `order[k]`. Scores must not depend on edge order.
    pub fn reorder_neighbors(&mut self, item: u32, order: &[usize]) -> Result<()> {
        let edges = self
            .adjacency
            .get_mut(item as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("no item {item} in graph")))?;
        let mut seen = vec![false; edges.len()];
        if order.len() != edges.len() || order.iter().any(|&k| k >= seen.len() || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidArgument(format!(
                "{order:?} is not a permutation of {} edges",
                edges.len()
            )));
        }
        *edges = order.iter().map(|&k| edges[k]).collect();
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn node_name<'a>(&'a self, node: NodeRef, items: &'a Vocab) -> &'a str {
        match node {
            NodeRef::Item(i) => items.name(i),
            NodeRef::Entity(e) => self.entities.name(e),
        }
    }
}

/// Everything the model needs to know about id spaces, in one comparable value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub schema: ContextSchema,
    pub users: Vocab,
    pub items: Vocab,
    pub entities: Vocab,
    pub relations: Vocab,
}

impl Vocabularies {
    /// Condition count across all factors.
    pub fn num_conditions(&self) -> usize {
        self.schema.num_conditions()
    }
}

/// Raw ingested data before splitting.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub task: TaskKind,
    pub scale: Option<RatingScale>,
    pub schema: ContextSchema,
    pub ids: IdSpace,
    pub records: Vec<InteractionRecord>,
    pub kg: KnowledgeGraph,
}

#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub task: TaskKind,
    pub scale: Option<RatingScale>,
    pub schema: ContextSchema,
    pub ids: IdSpace,
    pub kg: KnowledgeGraph,
    pub graph: ItemGraph,
    pub train: Vec<InteractionRecord>,
    pub valid: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    /// Fixed negatives for validation and test positives (ranking only).
    pub valid_negatives: Vec<InteractionRecord>,
    pub test_negatives: Vec<InteractionRecord>,
    /// Positives that got fewer than the requested negatives.
    pub short_negatives: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleStats {
    pub task: TaskKind,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub factors: usize,
    pub conditions: Vec<(String, usize)>,
    pub relations: usize,
    pub entities: usize,
    pub triplets: usize,
    pub valid_negatives: usize,
    pub test_negatives: usize,
}

impl BundleStats {
    pub fn render(&self) -> String {
        let mut out = format!(
            "task: {}\nusers: {}\nitems: {}\ninteractions: {}\ntrain: {}\nvalid: {}\ntest: {}\n\
             contextual_factors: {}\n",
            self.task, self.users, self.items, self.interactions, self.train, self.valid, self.test, self.factors
        );
        for (f, n) in &self.conditions {
            out.push_str(&format!("conditions.{f}: {n}\n"));
        }
        out.push_str(&format!(
            "relations: {}\nentities: {}\ntriplets: {}\nvalid_negatives: {}\ntest_negatives: {}\n",
            self.relations, self.entities, self.triplets, self.valid_negatives, self.test_negatives
        ));
        out
    }
}

impl DatasetBundle {
    /// Splits raw data. Rating data gets a random 80/10/10 split. Ranking data
    /// is deduplicated on (user, item, situation), then leave-one-out yields
    /// test and a second leave-one-out on the remainder yields validation;
    /// each held-out positive gets fixed sampled negatives.
    pub fn from_raw(raw: RawDataset, seeds: &SeedStreams) -> Result<Self> {
        let RawDataset {
            task,
            scale,
            schema,
            mut ids,
            records,
            kg,
        } = raw;
        let graph = ItemGraph::build(&kg, &mut ids.items);
        let mut rng = seeds.rng(seed::SPLIT);
        let bundle = match task {
            TaskKind::Rating => {
                let s = split_random(&records, (0.8, 0.1, 0.1), &mut rng)?;
                Self::empty(task, scale, schema, ids, kg, graph, s.train, s.valid, s.test)
            }
            TaskKind::Ranking => {
                let mut seen = HashSet::new();
                let records: Vec<InteractionRecord> = records
                    .into_iter()
                    .filter(|r| seen.insert((r.user, r.item, r.situation.clone())))
                    .collect();
                let (rest, test) = split_leave_one_out(&records, &mut rng);
                let (train, valid) = split_leave_one_out(&rest, &mut rng);
                let all = InteractionIndex::build(&records);
                let mut b = Self::empty(task, scale, schema, ids, kg, graph, train, valid, test);
                let n = b.ids.items.len();
                let mut short = 0;
                let mut drawn = Vec::with_capacity(2);
                for (which, split) in [&b.valid, &b.test].into_iter().enumerate() {
                    let mut rng = seeds.rng_indexed(seed::SAMPLING, &[u64::MAX, which as u64]);
                    let mut out = Vec::with_capacity(split.len() * EVAL_NEGATIVES);
                    for p in split {
                        let s = sample_negatives(p, EVAL_NEGATIVES, all.items(p.user, &p.situation), n, &mut rng);
                        short += s.short as usize;
                        out.extend(s.records);
                    }
                    drawn.push(out);
                }
                b.test_negatives = drawn.pop().unwrap_or_default();
                b.valid_negatives = drawn.pop().unwrap_or_default();
                b.short_negatives = short;
                b
            }
        };
        bundle.validate()?;
        Ok(bundle)
    }

    #[allow(clippy::too_many_arguments)]
    fn empty(
        task: TaskKind,
        scale: Option<RatingScale>,
        schema: ContextSchema,
        ids: IdSpace,
        kg: KnowledgeGraph,
        graph: ItemGraph,
        train: Vec<InteractionRecord>,
        valid: Vec<InteractionRecord>,
        test: Vec<InteractionRecord>,
    ) -> Self {
        Self {
            task,
            scale,
            schema,
            ids,
            kg,
            graph,
            train,
            valid,
            test,
            valid_negatives: Vec::new(),
            test_negatives: Vec::new(),
            short_negatives: 0,
        }
    }

    pub fn num_users(&self) -> usize {
        self.ids.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.ids.items.len()
    }

    pub fn vocabularies(&self) -> Vocabularies {
        Vocabularies {
            schema: self.schema.clone(),
            users: self.ids.users.clone(),
            items: self.ids.items.clone(),
            entities: self.graph.entities.clone(),
            relations: self.graph.relations.clone(),
        }
    }

    /// Every record in every split, negatives included.
    pub fn all_records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .chain(&self.valid_negatives)
            .chain(&self.test_negatives)
    }

    /// Positives across train, valid and test.
    pub fn positives(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn validate(&self) -> Result<()> {
        let (nu, ni) = (self.num_users() as u32, self.num_items() as u32);
        for r in self.all_records() {
            if r.user >= nu || r.item >= ni {
                return Err(Error::InvalidArgument(format!(
                    "record ({}, {}) outside vocabularies",
                    r.user, r.item
                )));
            }
            self.schema.validate(&r.situation)?;
            if let (TaskKind::Rating, Some(s)) = (self.task, self.scale) {
                if !s.contains(r.label) {
                    return Err(Error::InvalidArgument(format!("rating {} outside {s}", r.label)));
                }
            }
        }
        if self.graph.num_items() != self.num_items() {
            return Err(Error::InvalidArgument("item graph does not cover the catalog".into()));
        }
        Ok(())
    }

    pub fn stats(&self) -> BundleStats {
        BundleStats {
            task: self.task,
            users: self.num_users(),
            items: self.num_items(),
            interactions: self.train.len() + self.valid.len() + self.test.len(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
            factors: self.schema.num_factors(),
            conditions: self
                .schema
                .factors()
                .iter()
                .map(|f| (f.name.clone(), f.conditions.len()))
                .collect(),
            relations: self.graph.relations.len(),
            entities: self.graph.entities.len(),
            triplets: self.kg.len(),
            valid_negatives: self.valid_negatives.len(),
            test_negatives: self.test_negatives.len(),
        }
    }

    pub fn schema_file(&self) -> SchemaFile {
        SchemaFile {
            task: self.task,
            scale: self.scale,
            schema: self.schema.clone(),
        }
    }

    /// Writes every bundle file and returns their paths in a fixed order.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths = Vec::new();
        let mut put = |name: &str, text: String| -> Result<()> {
            let p = dir.join(name);
            write_text(&p, &text)?;
            paths.push(p);
            Ok(())
        };
        put(SCHEMA_FILE, self.schema_file().render())?;
        put(KG_FILE, self.kg.render())?;
        for (name, recs) in [
            (TRAIN_FILE, &self.train),
            (VALID_FILE, &self.valid),
            (TEST_FILE, &self.test),
            (VALID_NEG_FILE, &self.valid_negatives),
            (TEST_NEG_FILE, &self.test_negatives),
        ] {
            let p = dir.join(name);
            write_interactions(&p, recs, &self.schema, &self.ids)?;
            paths.push(p);
        }
        let p = dir.join(STATS_FILE);
        write_text(&p, &self.stats().render())?;
        paths.push(p);
        Ok(paths)
    }

    /// Loads a bundle directory. Vocabularies are rebuilt in file order:
    /// train, valid, test, the negative files, then graph heads. A missing
    /// `kg.tsv` yields an empty graph.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let SchemaFile { task, scale, mut schema } = SchemaFile::load(&dir.join(SCHEMA_FILE))?;
        let mut ids = IdSpace::default();
        let mut load = |name: &str, required: bool| -> Result<Vec<InteractionRecord>> {
            let p = dir.join(name);
            if !required && !p.exists() {
                return Ok(Vec::new());
            }
            load_interactions(&p, &mut schema, task, scale, &mut ids)
        };
        let train = load(TRAIN_FILE, true)?;
        let valid = load(VALID_FILE, true)?;
        let test = load(TEST_FILE, true)?;
        let valid_negatives = load(VALID_NEG_FILE, false)?;
        let test_negatives = load(TEST_NEG_FILE, false)?;
        let kg_path = dir.join(KG_FILE);
        let kg = if kg_path.exists() {
            load_kg(&kg_path)?
        } else {
            KnowledgeGraph::new()
        };
        let graph = ItemGraph::build(&kg, &mut ids.items);
        let mut b = Self::empty(task, scale, schema, ids, kg, graph, train, valid, test);
        b.valid_negatives = valid_negatives;
        b.test_negatives = test_negatives;
        b.validate()?;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::kg::parse_kg;
    use crate::data::schema::ContextualSituation;

    fn raw(task: TaskKind) -> RawDataset {
        let mut schema = ContextSchema::new(&["time"]).unwrap();
        schema.intern_condition(0, "am");
        schema.intern_condition(0, "pm");
        let mut ids = IdSpace::default();
        let mut records = Vec::new();
        for u in 0..4 {
            ids.users.get_or_insert(&format!("u{u}"));
            for i in 0..5 {
                ids.items.get_or_insert(&format!("i{i}"));
                records.push(InteractionRecord {
                    user: u,
                    item: i,
                    situation: ContextualSituation(vec![(u + i) % 2]),
                    label: if task == TaskKind::Rating { 1.0 + i as f64 } else { 1.0 },
                });
            }
        }
        let kg = parse_kg(
            "head\trelation\ttail\ni0\tgenre\tjazz\ni1\tgenre\tjazz\ni9\tsimilar\ti0\n",
            Path::new("kg.tsv"),
        )
        .unwrap();
        RawDataset {
            task,
            scale: Some(RatingScale::new(1.0, 5.0).unwrap()),
            schema,
            ids,
            records,
            kg,
        }
    }

    #[test]
    fn graph_heads_become_items() {
        let b = DatasetBundle::from_raw(raw(TaskKind::Ranking), &SeedStreams::new(1)).unwrap();
        assert_eq!(b.num_items(), 6);
        assert_eq!(b.ids.items.name(5), "i9");
        assert_eq!(b.graph.entities.names(), ["jazz"]);
        assert_eq!(b.graph.neighbors(5), &[(1, NodeRef::Item(0))]);
        assert_eq!(b.graph.neighbors(0), &[(0, NodeRef::Entity(0))]);
        assert!(b.graph.neighbors(3).is_empty());
    }

    #[test]
    fn ranking_protocol() {
        let b = DatasetBundle::from_raw(raw(TaskKind::Ranking), &SeedStreams::new(1)).unwrap();
        assert_eq!((b.train.len(), b.valid.len(), b.test.len()), (12, 4, 4));
        assert_eq!(b.test_negatives.len(), 8);
        let all = InteractionIndex::build(b.positives());
        for n in b.valid_negatives.iter().chain(&b.test_negatives) {
            assert!(!all.contains(n.user, &n.situation, n.item));
        }
    }

    #[test]
    fn dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for task in [TaskKind::Rating, TaskKind::Ranking] {
            let b = DatasetBundle::from_raw(raw(task), &SeedStreams::new(5)).unwrap();
            b.write_dir(dir.path()).unwrap();
            let back = DatasetBundle::load_dir(dir.path()).unwrap();
            assert_eq!(back.stats(), b.stats());
            // A second write of the reloaded bundle is byte-identical.
            let dir2 = tempfile::tempdir().unwrap();
            back.write_dir(dir2.path()).unwrap();
            let again = DatasetBundle::load_dir(dir2.path()).unwrap();
            assert_eq!(again.vocabularies(), back.vocabularies());
            assert_eq!(again.train, back.train);
        }
    }
}
