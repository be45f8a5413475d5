//! Attention extraction, user clustering and templated explanations.

pub mod attention;
pub mod cluster;
pub mod export;
pub mod render;

pub use attention::{extract_attention, AttentionExtract, UserAttentionVector};
pub use cluster::{
    adjusted_rand_index, kmeans, select_k, silhouette, ClusterAssignment, KDiagnostic, KSelection,
    DEFAULT_K_RANGE, STRUCTURE_THRESHOLD,
};
pub use export::{export_analysis, ATTENTION_FILE, CENTROIDS_FILE, CLUSTERS_FILE};
pub use render::{percent, render_explanation, Explanation, FactorHighlight, RelationHighlight};
