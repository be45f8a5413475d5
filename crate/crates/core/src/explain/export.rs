use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::attention::UserAttentionVector;
use super::cluster::ClusterAssignment;
use crate::data::Vocabularies;
use crate::error::{Error, Result};

pub const CLUSTERS_FILE: &str = "clusters.tsv";
pub const CENTROIDS_FILE: &str = "centroids.tsv";
pub const ATTENTION_FILE: &str = "attention.tsv";

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `clusters.tsv`, `centroids.tsv` and `attention.tsv` into `dir`,
/// with factor columns in schema order.
pub fn export_analysis(
    assignment: &ClusterAssignment,
    vectors: &[UserAttentionVector],
    vocab: &Vocabularies,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if assignment.labels.len() != vectors.len() {
        return Err(Error::shape(
            "export_analysis",
            format!("{} labels for {} users", assignment.labels.len(), vectors.len()),
        ));
    }
    let factors = vocab.schema.factor_names();
    if vectors.iter().any(|v| v.weights.len() != factors.len()) {
        return Err(Error::shape("export_analysis", "attention width differs from the factor count"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = factors.join("\t");

    let mut clusters = String::from("user\tcluster\n");
    let mut attention = format!("user\t{header}\n");
    for (v, label) in vectors.iter().zip(&assignment.labels) {
        let name = vocab.users.name(v.user);
        let _ = writeln!(clusters, "{name}\t{label}");
        let w: Vec<String> = v.weights.iter().map(f64::to_string).collect();
        let _ = writeln!(attention, "{name}\t{}", w.join("\t"));
    }
    let mut centroids = format!("cluster\t{header}\n");
    for (c, centroid) in assignment.centroids.iter().enumerate() {
        let w: Vec<String> = centroid.iter().map(f64::to_string).collect();
        let _ = writeln!(centroids, "{c}\t{}", w.join("\t"));
    }
    Ok(vec![
        write(dir.join(CLUSTERS_FILE), &clusters)?,
        write(dir.join(CENTROIDS_FILE), &centroids)?,
        write(dir.join(ATTENTION_FILE), &attention)?,
    ])
}
