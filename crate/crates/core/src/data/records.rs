use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{ContextSchema, ContextualSituation, RatingScale, TaskKind};
use super::vocab::Vocab;
use crate::error::{Error, Result};

/// One observation. Implicit positives carry label 1, sampled negatives 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user: u32,
    pub item: u32,
    pub situation: ContextualSituation,
    pub label: f64,
}

impl InteractionRecord {
    pub fn is_positive(&self) -> bool {
        self.label > 0.5
    }
}

/// User and item vocabularies shared by every split of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdSpace {
    pub users: Vocab,
    pub items: Vocab,
}

/// Header-checked TSV table kept as strings, used before columns are mapped
/// onto a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    /// `(line number, cells)`; line numbers are 1-based and count the header.
    pub rows: Vec<(usize, Vec<String>)>,
}

impl RawTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some((_, h)) => h.split('\t').map(|c| c.trim().to_string()).collect(),
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        let mut rows = Vec::new();
        for (n, line) in lines {
            let cells: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
            if cells.len() != header.len() {
                return Err(Error::parse(
                    path,
                    n + 1,
                    format!("expected {} columns, found {}", header.len(), cells.len()),
                ));
            }
            rows.push((n + 1, cells));
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Maps a raw table onto the schema, extending vocabularies in first-seen order.
pub fn interactions_from_table(
    table: &RawTable,
    path: &Path,
    schema: &mut ContextSchema,
    task: TaskKind,
    scale: Option<RatingScale>,
    ids: &mut IdSpace,
) -> Result<Vec<InteractionRecord>> {
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))
    };
    let (user_col, item_col, label_col) = (col("user")?, col("item")?, col("label")?);
    let mut factor_cols = vec![usize::MAX; schema.num_factors()];
    for (c, name) in table.header.iter().enumerate() {
        if c == user_col || c == item_col || c == label_col {
            continue;
        }
        match schema.factor_index(name) {
            Some(f) if factor_cols[f] == usize::MAX => factor_cols[f] = c,
            Some(_) => return Err(Error::parse(path, 1, format!("duplicate column `{name}`"))),
            None => return Err(Error::parse(path, 1, format!("unknown factor column `{name}`"))),
        }
    }
    if let Some(f) = factor_cols.iter().position(|&c| c == usize::MAX) {
        return Err(Error::parse(
            path,
            1,
            format!("missing factor column `{}`", schema.factors()[f].name),
        ));
    }

    let mut out = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        let label = parse_label(&cells[label_col], task, scale).map_err(|m| Error::parse(path, *line, m))?;
        for (f, &c) in factor_cols.iter().enumerate() {
            if cells[c].is_empty() {
                return Err(Error::parse(
                    path,
                    *line,
                    format!("empty condition for `{}`", schema.factors()[f].name),
                ));
            }
        }
        if cells[user_col].is_empty() || cells[item_col].is_empty() {
            return Err(Error::parse(path, *line, "empty user or item"));
        }
        let situation = factor_cols
            .iter()
            .enumerate()
            .map(|(f, &c)| schema.intern_condition(f, &cells[c]))
            .collect();
        out.push(InteractionRecord {
            user: ids.users.get_or_insert(&cells[user_col]),
            item: ids.items.get_or_insert(&cells[item_col]),
            situation: ContextualSituation(situation),
            label,
        });
    }
    Ok(out)
}

fn parse_label(text: &str, task: TaskKind, scale: Option<RatingScale>) -> std::result::Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("label `{text}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("label `{text}` is not finite"));
    }
    match task {
        TaskKind::Rating => {
            let scale = scale.ok_or("rating task without a scale")?;
            if !scale.contains(v) {
                return Err(format!("rating {v} outside scale {scale}"));
            }
        }
        TaskKind::Ranking => {
            if v != 0.0 && v != 1.0 {
                return Err(format!("implicit label must be 0 or 1, found `{text}`"));
            }
        }
    }
    Ok(v)
}

pub fn load_interactions(
    path: &Path,
    schema: &mut ContextSchema,
    task: TaskKind,
    scale: Option<RatingScale>,
    ids: &mut IdSpace,
) -> Result<Vec<InteractionRecord>> {
    let table = RawTable::load(path)?;
    interactions_from_table(&table, path, schema, task, scale, ids)
}

pub fn render_interactions(records: &[InteractionRecord], schema: &ContextSchema, ids: &IdSpace) -> String {
    let mut out = String::from("user\titem");
    for f in schema.factors() {
        out.push('\t');
        out.push_str(&f.name);
    }
    out.push_str("\tlabel\n");
    for r in records {
        out.push_str(ids.users.name(r.user));
        out.push('\t');
        out.push_str(ids.items.name(r.item));
        for (f, &c) in r.situation.0.iter().enumerate() {
            out.push('\t');
            out.push_str(schema.condition_name(f, c));
        }
        out.push('\t');
        out.push_str(&format_label(r.label));
        out.push('\n');
    }
    out
}

fn format_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn write_interactions(
    path: &Path,
    records: &[InteractionRecord],
    schema: &ContextSchema,
    ids: &IdSpace,
) -> Result<()> {
    write_text(path, &render_interactions(records, schema, ids))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> ContextSchema {
        ContextSchema::new(&["daytime", "isweekend"]).unwrap()
    }

    fn parse(text: &str, task: TaskKind, scale: Option<RatingScale>) -> Result<Vec<InteractionRecord>> {
        let path = Path::new("interactions.tsv");
        let table = RawTable::parse(text, path)?;
        interactions_from_table(&table, path, &mut schema(), task, scale, &mut IdSpace::default())
    }

    #[test]
    fn three_rows_two_factors() {
        let text = "user\titem\tdaytime\tisweekend\tlabel\n\
                    u1\ta\tmorning\tweekend\t1\n\
                    u2\tb\tevening\tworkday\t1\n\
                    u1\tb\tmorning\tworkday\t1\n";
        let recs = parse(text, TaskKind::Ranking, None).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.situation.0.len() == 2));
        assert_eq!(recs[2].user, 0);
        assert_eq!(recs[2].situation, ContextualSituation(vec![0, 1]));
    }

    #[test]
    fn header_only_is_empty() {
        let recs = parse("user\titem\tdaytime\tisweekend\tlabel\n", TaskKind::Ranking, None).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let scale = Some(RatingScale::new(1.0, 5.0).unwrap());
        let bad_scale = "user\titem\tdaytime\tisweekend\tlabel\nu\ti\tm\tw\t4\nu\ti\tm\tw\t6\n";
        let err = parse(bad_scale, TaskKind::Rating, scale).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");

        let unknown = "user\titem\tdaytime\tcity\tlabel\n";
        let err = parse(unknown, TaskKind::Ranking, None).unwrap_err().to_string();
        assert!(err.contains("unknown factor column `city`"), "{err}");

        let short = "user\titem\tdaytime\tisweekend\tlabel\nu\ti\tm\t1\n";
        let err = parse(short, TaskKind::Ranking, None).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn render_then_parse_is_stable() {
        let text = "user\titem\tdaytime\tisweekend\tlabel\nu1\ta\tmorning\tweekend\t3.5\nu2\tb\tevening\tworkday\t5\n";
        let path = Path::new("x");
        let mut s = schema();
        let mut ids = IdSpace::default();
        let scale = Some(RatingScale::new(1.0, 5.0).unwrap());
        let table = RawTable::parse(text, path).unwrap();
        let recs = interactions_from_table(&table, path, &mut s, TaskKind::Rating, scale, &mut ids).unwrap();
        assert_eq!(render_interactions(&recs, &s, &ids), text);
    }
}
