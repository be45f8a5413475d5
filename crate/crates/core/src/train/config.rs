use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimisation settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub l2: f64,
    /// Overrides the model config's dropout rate.
    pub dropout: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Sampled negatives per training positive, redrawn every epoch.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 256,
            l2: 1e-3,
            dropout: 0.1,
            epochs: 200,
            patience: 10,
            negatives: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be finite and >= 0, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be positive".into()));
        }
        Ok(())
    }

    /// `key=value` pairs for report and checkpoint echoes.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("lr".into(), self.lr.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("l2".into(), self.l2.to_string()),
            ("dropout".into(), self.dropout.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("patience".into(), self.patience.to_string()),
            ("negatives".into(), self.negatives.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Candidate values per hyperparameter; the search visits their product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lr: Vec<f64>,
    pub batch: Vec<usize>,
    pub l2: Vec<f64>,
    pub dropout: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            lr: vec![5e-4, 1e-3, 5e-3, 1e-2, 5e-2],
            batch: vec![128, 256, 512, 1024],
            l2: vec![5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1],
            dropout: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

impl Grid {
    /// The single point `base` itself.
    pub fn singleton(base: &TrainConfig) -> Self {
        Self {
            lr: vec![base.lr],
            batch: vec![base.batch],
            l2: vec![base.l2],
            dropout: vec![base.dropout],
        }
    }

    pub fn size(&self) -> usize {
        self.lr.len() * self.batch.len() * self.l2.len() * self.dropout.len()
    }

    /// Every grid point applied on top of `base`, lr varying slowest.
    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.size());
        for &lr in &self.lr {
            for &batch in &self.batch {
                for &l2 in &self.l2 {
                    for &dropout in &self.dropout {
                        out.push(TrainConfig {
                            lr,
                            batch,
                            l2,
                            dropout,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        write!(
            f,
            "lr={};batch={};l2={};dropout={}",
            join(&self.lr),
            join(&self.batch),
            join(&self.l2),
            join(&self.dropout)
        )
    }
}

/// Parses `lr=1e-3,5e-3;batch=256;l2=1e-3;dropout=0.1`. Keys left out keep
/// their default candidate lists.
impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
            let v: Vec<T> = raw
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("grid `{key}`: cannot parse `{}`", x.trim())))
                })
                .collect::<Result<_>>()?;
            if v.is_empty() {
                return Err(Error::Config(format!("grid `{key}` is empty")));
            }
            Ok(v)
        }
        let mut grid = Grid::default();
        for part in s.split([';', ' ']).map(str::trim).filter(|p| !p.is_empty()) {
            let (key, raw) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry `{part}` is not key=values")))?;
            match key.trim() {
                "lr" => grid.lr = list(key, raw)?,
                "batch" => grid.batch = list(key, raw)?,
                "l2" | "lambda" => grid.l2 = list(key, raw)?,
                "dropout" => grid.dropout = list(key, raw)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown grid key `{other}` (expected lr, batch, l2, dropout)"
                    )))
                }
            }
        }
        Ok(grid)
    }
}
