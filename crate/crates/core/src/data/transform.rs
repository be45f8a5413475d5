//! Optional column rewrites applied to a raw interaction table before it is
//! mapped onto a schema.
//!
//! For the public Frappé logs the usual recipe is `--drop-column weekday
//! --drop-column city --column-to-relation cost=price`: the weekday column is
//! redundant with `isweekend`, and the app's cost is an item attribute.

use std::fmt;
use std::str::FromStr;

use super::kg::KnowledgeGraph;
use super::records::RawTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transform {
    DropColumn(String),
    /// Moves a per-interaction column into the graph as `(item, relation, value)`.
    ColumnToRelation { column: String, relation: String },
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::DropColumn(c) => write!(f, "drop-column {c}"),
            Transform::ColumnToRelation { column, relation } => {
                write!(f, "column-to-relation {column}={relation}")
            }
        }
    }
}

impl Transform {
    /// Parses `column=relation`; a bare column keeps its name as the relation.
    pub fn column_to_relation(spec: &str) -> Result<Self> {
        let (column, relation) = match spec.split_once('=') {
            Some((c, r)) => (c.trim(), r.trim()),
            None => (spec.trim(), spec.trim()),
        };
        if column.is_empty() || relation.is_empty() {
            return Err(Error::InvalidArgument(format!("bad column-to-relation `{spec}`")));
        }
        Ok(Transform::ColumnToRelation {
            column: column.to_string(),
            relation: relation.to_string(),
        })
    }

    pub fn apply(&self, table: &mut RawTable, kg: &mut KnowledgeGraph) -> Result<()> {
        match self {
            Transform::DropColumn(name) => {
                remove_column(table, name)?;
            }
            Transform::ColumnToRelation { column, relation } => {
                let item_col = table
                    .column("item")
                    .ok_or_else(|| Error::InvalidArgument("table has no `item` column".into()))?;
                let col = table
                    .column(column)
                    .ok_or_else(|| Error::InvalidArgument(format!("no column `{column}`")))?;
                for (line, cells) in &table.rows {
                    let value = &cells[col];
                    if value.is_empty() {
                        continue;
                    }
                    kg.insert(&cells[item_col], relation, value).map_err(|e| {
                        Error::InvalidArgument(format!("line {line}: {e}"))
                    })?;
                }
                remove_column(table, column)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("drop-column ") {
            return Ok(Transform::DropColumn(rest.trim().to_string()));
        }
        if let Some(rest) = s.strip_prefix("column-to-relation ") {
            return Transform::column_to_relation(rest);
        }
        Err(Error::InvalidArgument(format!("unknown transform `{s}`")))
    }
}

fn remove_column(table: &mut RawTable, name: &str) -> Result<()> {
    let col = table
        .column(name)
        .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`")))?;
    if matches!(name, "user" | "item" | "label") {
        return Err(Error::InvalidArgument(format!("column `{name}` is required")));
    }
    table.header.remove(col);
    for (_, cells) in &mut table.rows {
        cells.remove(col);
    }
    Ok(())
}

pub fn apply_all(transforms: &[Transform], table: &mut RawTable, kg: &mut KnowledgeGraph) -> Result<()> {
    for t in transforms {
        t.apply(table, kg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    #[test]
    fn drop_and_move_columns() {
        let text = "user\titem\tweekday\tcity\tisweekend\tcost\tlabel\n\
                    u\ta\tmonday\tx\tworkday\tfree\t1\n\
                    v\ta\tsunday\ty\tweekend\tfree\t1\n\
                    v\tb\tsunday\ty\tweekend\tpaid\t1\n";
        let mut table = RawTable::parse(text, Path::new("t")).unwrap();
        let mut kg = KnowledgeGraph::new();
        let ts = [
            Transform::DropColumn("weekday".into()),
            Transform::DropColumn("city".into()),
            Transform::column_to_relation("cost=price").unwrap(),
        ];
        apply_all(&ts, &mut table, &mut kg).unwrap();
        assert_eq!(table.header, ["user", "item", "isweekend", "label"]);
        assert_eq!(kg.len(), 2);
        assert_eq!(kg.relations().names(), ["price"]);
        assert!(Transform::DropColumn("label".into()).apply(&mut table, &mut kg).is_err());
    }

    #[test]
    fn display_round_trips() {
        for t in [
            Transform::DropColumn("city".into()),
            Transform::column_to_relation("cost=price").unwrap(),
        ] {
            assert_eq!(t.to_string().parse::<Transform>().unwrap(), t);
        }
    }
}
