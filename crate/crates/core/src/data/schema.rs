use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Explicit ratings, squared loss, RMSE/MAE.
    Rating,
    /// Implicit positives with sampled negatives, log loss, AUC/F1/HR/NDCG.
    Ranking,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Rating => "rating",
            TaskKind::Ranking => "ranking",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rating" => Ok(TaskKind::Rating),
            "ranking" => Ok(TaskKind::Ranking),
            other => Err(Error::InvalidArgument(format!(
                "unknown task `{other}` (expected rating|ranking)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidArgument(format!("bad rating scale {min}-{max}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

impl fmt::Display for RatingScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.min, self.max)
    }
}

impl FromStr for RatingScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("scale `{s}` is not min-max")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("scale `{s}` is not numeric")))
        };
        RatingScale::new(parse(a)?, parse(b)?)
    }
}

/// One contextual factor and its conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextFactor {
    pub name: String,
    pub conditions: Vocab,
}

/// Ordered contextual factors. Conditions are addressed either locally
/// (per factor) or globally, by offsetting with the preceding factors' sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSchema {
    factors: Vec<ContextFactor>,
}

/// One local condition id per factor, in schema order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextualSituation(pub Vec<u32>);

impl ContextualSituation {
    pub fn conditions(&self) -> &[u32] {
        &self.0
    }
}

impl ContextSchema {
    pub fn new<S: AsRef<str>>(factor_names: &[S]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut factors = Vec::with_capacity(factor_names.len());
        for n in factor_names {
            let n = n.as_ref().trim();
            if n.is_empty() {
                return Err(Error::InvalidArgument("empty factor name".into()));
            }
            if !seen.insert(n.to_string()) {
                return Err(Error::InvalidArgument(format!("duplicate factor `{n}`")));
            }
            factors.push(ContextFactor {
                name: n.to_string(),
                conditions: Vocab::new(),
            });
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[ContextFactor] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn factor_names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn intern_condition(&mut self, factor: usize, condition: &str) -> u32 {
        self.factors[factor].conditions.get_or_insert(condition)
    }

    pub fn num_conditions(&self) -> usize {
        self.factors.iter().map(|f| f.conditions.len()).sum()
    }

    pub fn condition_offset(&self, factor: usize) -> usize {
        self.factors[..factor].iter().map(|f| f.conditions.len()).sum()
    }

    /// Global condition index of every entry of a situation.
    pub fn global_conditions(&self, s: &ContextualSituation) -> Result<Vec<usize>> {
        self.validate(s)?;
        let mut offset = 0;
        Ok(self
            .factors
            .iter()
            .zip(&s.0)
            .map(|(f, &c)| {
                let g = offset + c as usize;
                offset += f.conditions.len();
                g
            })
            .collect())
    }

    pub fn validate(&self, s: &ContextualSituation) -> Result<()> {
        if s.0.len() != self.factors.len() {
            return Err(Error::InvalidArgument(format!(
                "situation has {} conditions, schema has {} factors",
                s.0.len(),
                self.factors.len()
            )));
        }
        for (f, &c) in self.factors.iter().zip(&s.0) {
            if c as usize >= f.conditions.len() {
                return Err(Error::UnknownId {
                    kind: "condition",
                    name: format!("{}#{c}", f.name),
                });
            }
        }
        Ok(())
    }

    pub fn condition_name(&self, factor: usize, id: u32) -> &str {
        self.factors[factor].conditions.name(id)
    }

    /// `cond1|cond2|...`, stable across runs.
    pub fn situation_key(&self, s: &ContextualSituation) -> String {
        self.factors
            .iter()
            .zip(&s.0)
            .map(|(f, &c)| f.conditions.name(c))
            .collect::<Vec<_>>()
            .join("|")
    }

    /// Parses `cond1|cond2` or `cond1,cond2`, or `factor=cond` pairs in any order.
    pub fn parse_situation(&self, text: &str) -> Result<ContextualSituation> {
        let parts: Vec<&str> = text
            .split(['|', ','])
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .collect();
        if parts.len() != self.factors.len() {
            return Err(Error::InvalidArgument(format!(
                "situation `{text}` has {} conditions, schema has {} factors",
                parts.len(),
                self.factors.len()
            )));
        }
        let mut ids = vec![u32::MAX; self.factors.len()];
        for (pos, part) in parts.iter().enumerate() {
            let (f, cond) = match part.split_once('=') {
                Some((fname, cond)) => (
                    self.factor_index(fname.trim()).ok_or_else(|| Error::UnknownId {
                        kind: "factor",
                        name: fname.trim().to_string(),
                    })?,
                    cond.trim(),
                ),
                None => (pos, *part),
            };
            ids[f] = self.factors[f]
                .conditions
                .id(cond)
                .ok_or_else(|| Error::UnknownId {
                    kind: "condition",
                    name: format!("{}={cond}", self.factors[f].name),
                })?;
        }
        if let Some(f) = ids.iter().position(|&c| c == u32::MAX) {
            return Err(Error::InvalidArgument(format!(
                "situation `{text}` is missing factor `{}`",
                self.factors[f].name
            )));
        }
        Ok(ContextualSituation(ids))
    }
}

/// Plain `key: value` sidecar describing a dataset.
///
/// ```text
/// task: ranking
/// scale: none
/// factors: daytime, isweekend
/// conditions.daytime: morning, evening
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct SchemaFile {
    pub task: TaskKind,
    pub scale: Option<RatingScale>,
    pub schema: ContextSchema,
}

impl SchemaFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut task = None;
        let mut scale = None;
        let mut factors: Option<Vec<String>> = None;
        let mut conditions: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(path, n + 1, "expected `key: value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: Error| Error::parse(path, n + 1, e.to_string());
            match key {
                "task" => task = Some(value.parse::<TaskKind>().map_err(bad)?),
                "scale" => {
                    scale = match value {
                        "" | "none" => None,
                        v => Some(v.parse::<RatingScale>().map_err(bad)?),
                    }
                }
                "factors" => factors = Some(split_list(value)),
                k if k.starts_with("conditions.") => {
                    conditions.push((n + 1, k["conditions.".len()..].to_string(), split_list(value)))
                }
                other => return Err(Error::parse(path, n + 1, format!("unknown key `{other}`"))),
            }
        }
        let task = task.ok_or_else(|| Error::parse(path, 0, "missing `task`"))?;
        let factors = factors.ok_or_else(|| Error::parse(path, 0, "missing `factors`"))?;
        if task == TaskKind::Rating && scale.is_none() {
            return Err(Error::parse(path, 0, "rating task needs a `scale`"));
        }
        let mut schema = ContextSchema::new(&factors).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        for (line, factor, conds) in conditions {
            let f = schema
                .factor_index(&factor)
                .ok_or_else(|| Error::parse(path, line, format!("unknown factor `{factor}`")))?;
            for c in conds {
                schema.intern_condition(f, &c);
            }
        }
        Ok(Self {
            task,
            scale,
            schema,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn render(&self) -> String {
        let mut out = format!("task: {}\n", self.task);
        match self.scale {
            Some(s) => out.push_str(&format!("scale: {s}\n")),
            None => out.push_str("scale: none\n"),
        }
        out.push_str(&format!("factors: {}\n", self.schema.factor_names().join(", ")));
        for f in self.schema.factors() {
            if !f.conditions.is_empty() {
                out.push_str(&format!(
                    "conditions.{}: {}\n",
                    f.name,
                    f.conditions.names().join(", ")
                ));
            }
        }
        out
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_factors() {
        assert!(ContextSchema::new(&["a", "b", "a"]).is_err());
    }

    #[test]
    fn global_condition_offsets() {
        let mut s = ContextSchema::new(&["daytime", "isweekend"]).unwrap();
        s.intern_condition(0, "morning");
        s.intern_condition(0, "evening");
        s.intern_condition(1, "weekend");
        let cs = ContextualSituation(vec![1, 0]);
        assert_eq!(s.global_conditions(&cs).unwrap(), vec![1, 2]);
        assert_eq!(s.situation_key(&cs), "evening|weekend");
        assert_eq!(s.parse_situation("evening,weekend").unwrap(), cs);
        assert_eq!(s.parse_situation("isweekend=weekend|daytime=evening").unwrap(), cs);
        assert!(s.parse_situation("evening").is_err());
        assert!(s.global_conditions(&ContextualSituation(vec![2, 0])).is_err());
    }

    #[test]
    fn schema_file_round_trip() {
        let text = "task: rating\nscale: 1-5\nfactors: a, b\nconditions.b: x, y\n";
        let f = SchemaFile::parse(text, Path::new("schema.txt")).unwrap();
        assert_eq!(f.scale, Some(RatingScale { min: 1.0, max: 5.0 }));
        assert_eq!(f.schema.factors()[1].conditions.len(), 2);
        let again = SchemaFile::parse(&f.render(), Path::new("schema.txt")).unwrap();
        assert_eq!(again, f);
        assert!(SchemaFile::parse("task: rating\nfactors: a\n", Path::new("s")).is_err());
    }
}
