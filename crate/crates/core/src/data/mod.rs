//! Dataset schemas, TSV ingestion, splitting protocols, negative sampling and
//! a synthetic generator with planted attention.

pub mod bundle;
pub mod kg;
pub mod negatives;
pub mod records;
pub mod schema;
pub mod split;
pub mod synthetic;
pub mod transform;
pub mod vocab;

pub use bundle::{DatasetBundle, ItemGraph, NodeRef, RawDataset, Vocabularies};
pub use kg::{load_kg, KnowledgeGraph, Triplet};
pub use negatives::{sample_negatives, InteractionIndex, NegativeSample};
pub use records::{load_interactions, IdSpace, InteractionRecord, RawTable};
pub use schema::{ContextSchema, ContextualSituation, RatingScale, SchemaFile, TaskKind};
pub use split::{split_leave_one_out, split_random};
pub use synthetic::{generate_synthetic, GroundTruth, SyntheticData, SyntheticSpec};
pub use transform::Transform;
pub use vocab::Vocab;
