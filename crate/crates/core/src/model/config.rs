use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::TaskKind;
use crate::error::{Error, Result};

/// Pairwise factor size of the FM and NFM heads.
pub const FM_FACTORS: usize = 16;

macro_rules! tag_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $tag:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $tag)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn tag(self) -> &'static str {
                match self {
                    $($name::$variant => $tag),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($tag => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($name), " `{}` (expected {})"),
                        other,
                        [$($tag),+].join("|")
                    ))),
                }
            }
        }
    };
}

tag_enum!(
    /// How a base embedding is fused with its attended neighborhood.
    Aggregator { Sum => "sum", Cat => "cat", Avg => "avg" }
);

tag_enum!(
    /// Scoring function over the final user and item vectors.
    Head { Mf => "mf", Fm => "fm", Mlp => "mlp", Nfm => "nfm" }
);

tag_enum!(
    /// Which embedding layers are active.
    Ablation { Full => "full", CaOnly => "ca", KgcnOnly => "kgcn", PlainMf => "plain-mf" }
);

tag_enum!(
    /// The attention network, or a one-hot factorization baseline.
    ModelKind { CaKgcn => "cakgcn", Fm => "fm", Nfm => "nfm" }
);

impl Ablation {
    pub fn uses_context(self) -> bool {
        matches!(self, Ablation::Full | Ablation::CaOnly)
    }

    pub fn uses_kg(self) -> bool {
        matches!(self, Ablation::Full | Ablation::KgcnOnly)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub aggregator: Aggregator,
    pub head: Head,
    pub ablation: Ablation,
    pub dim: usize,
    pub fm_factors: usize,
    pub dropout: f64,
    pub task: TaskKind,
}

impl ModelConfig {
    pub fn new(task: TaskKind) -> Self {
        Self {
            kind: ModelKind::CaKgcn,
            aggregator: Aggregator::Sum,
            head: Head::Mf,
            ablation: Ablation::Full,
            dim: 128,
            fm_factors: FM_FACTORS,
            dropout: 0.0,
            task,
        }
    }

    /// The one-hot factorization baseline of the given kind.
    pub fn baseline(kind: ModelKind, task: TaskKind) -> Self {
        Self {
            kind,
            ..Self::new(task)
        }
    }

    /// Plain matrix factorization: both layers off, inner-product head.
    pub fn mf(task: TaskKind) -> Self {
        Self {
            ablation: Ablation::PlainMf,
            head: Head::Mf,
            ..Self::new(task)
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }

    pub fn with_aggregator(mut self, aggregator: Aggregator) -> Self {
        self.aggregator = aggregator;
        self
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.fm_factors == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn uses_context(&self) -> bool {
        self.kind == ModelKind::CaKgcn && self.ablation.uses_context()
    }

    pub fn uses_kg(&self) -> bool {
        match self.kind {
            ModelKind::CaKgcn => self.ablation.uses_kg(),
            ModelKind::Fm | ModelKind::Nfm => true,
        }
    }

    /// Short label used in leaderboards, e.g. `cakgcn-sum-nfm-full`.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::CaKgcn => format!("cakgcn-{}-{}-{}", self.aggregator, self.head, self.ablation),
            k => k.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.tag().parse::<Ablation>().unwrap(), *a);
        }
        for h in Head::ALL {
            assert_eq!(h.to_string().parse::<Head>().unwrap(), *h);
        }
        assert_eq!("CAT".parse::<Aggregator>().unwrap(), Aggregator::Cat);
        let err = "max".parse::<Aggregator>().unwrap_err().to_string();
        assert!(err.contains("sum|cat|avg"), "{err}");
    }

    #[test]
    fn serde_uses_flag_tags() {
        let c = ModelConfig::new(TaskKind::Ranking).with_ablation(Ablation::PlainMf);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"plain-mf\""), "{json}");
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), c);
    }
}
