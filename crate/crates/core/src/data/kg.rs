use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::RawTable;
use super::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

/// Entity-relation triplets over an open entity vocabulary, plus the
/// head-indexed adjacency `entity -> [(relation, tail)]`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "KnowledgeGraphRaw")]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triplets: Vec<Triplet>,
    #[serde(skip)]
    adjacency: Vec<Vec<(u32, u32)>>,
    #[serde(skip)]
    seen: HashSet<Triplet>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.triplets == other.triplets
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a triplet by name. Returns `false` for an exact duplicate.
    pub fn insert(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool> {
        if head.is_empty() || relation.is_empty() || tail.is_empty() {
            return Err(Error::InvalidArgument("empty triplet member".into()));
        }
        if head == tail {
            return Err(Error::InvalidArgument(format!(
                "self-loop ({head}, {relation}, {tail})"
            )));
        }
        let t = Triplet {
            head: self.entities.get_or_insert(head),
            relation: self.relations.get_or_insert(relation),
            tail: self.entities.get_or_insert(tail),
        };
        if !self.seen.insert(t) {
            return Ok(false);
        }
        if self.adjacency.len() < self.entities.len() {
            self.adjacency.resize(self.entities.len(), Vec::new());
        }
        self.adjacency[t.head as usize].push((t.relation, t.tail));
        self.triplets.push(t);
        Ok(true)
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// `(relation, tail)` edges leaving an entity.
    pub fn neighbors(&self, entity: u32) -> &[(u32, u32)] {
        self.adjacency.get(entity as usize).map_or(&[], Vec::as_slice)
    }

    pub fn neighbors_of(&self, name: &str) -> &[(u32, u32)] {
        self.entities.id(name).map_or(&[], |e| self.neighbors(e))
    }

    /// Entities that head at least one triplet, in first-seen order.
    pub fn heads(&self) -> Vec<u32> {
        let mut seen = HashSet::new();
        self.triplets
            .iter()
            .filter(|t| seen.insert(t.head))
            .map(|t| t.head)
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("head\trelation\ttail\n");
        for t in &self.triplets {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                self.entities.name(t.head),
                self.relations.name(t.relation),
                self.entities.name(t.tail)
            ));
        }
        out
    }

    fn rebuild_index(&mut self) {
        self.adjacency = vec![Vec::new(); self.entities.len()];
        self.seen.clear();
        for t in &self.triplets {
            self.adjacency[t.head as usize].push((t.relation, t.tail));
            self.seen.insert(*t);
        }
    }

    pub(crate) fn from_table(table: &RawTable, path: &Path) -> Result<Self> {
        let col = |name: &str| {
            table
                .column(name)
                .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))
        };
        let (h, r, t) = (col("head")?, col("relation")?, col("tail")?);
        let mut kg = Self::new();
        for (line, cells) in &table.rows {
            kg.insert(&cells[h], &cells[r], &cells[t])
                .map_err(|e| Error::parse(path, *line, e.to_string()))?;
        }
        Ok(kg)
    }
}

#[derive(Deserialize)]
struct KnowledgeGraphRaw {
    entities: Vocab,
    relations: Vocab,
    triplets: Vec<Triplet>,
}

impl From<KnowledgeGraphRaw> for KnowledgeGraph {
    fn from(raw: KnowledgeGraphRaw) -> Self {
        let mut kg = KnowledgeGraph {
            entities: raw.entities,
            relations: raw.relations,
            triplets: raw.triplets,
            adjacency: Vec::new(),
            seen: HashSet::new(),
        };
        kg.rebuild_index();
        kg
    }
}

pub fn load_kg(path: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::from_table(&RawTable::load(path)?, path)
}

pub fn parse_kg(text: &str, path: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::from_table(&RawTable::parse(text, path)?, path)
}
