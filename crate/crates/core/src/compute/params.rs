use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named set of trainable tensors owned by one model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Gradient contributions produced by one backward pass.
///
/// Each entry adds `values` into the parameter's gradient slot starting at
/// `offset`; row gathers produce one entry per gathered row.
#[derive(Clone, Debug, Default)]
pub struct GradBuffer {
    pub(crate) entries: Vec<GradEntry>,
}

#[derive(Clone, Debug)]
pub(crate) struct GradEntry {
    pub(crate) param: ParamId,
    pub(crate) offset: usize,
    pub(crate) values: Vec<f64>,
}

impl GradBuffer {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(param, row)` pairs touched by row gathers, plus `(param, usize::MAX)`
    /// for whole-parameter leaves.
    pub fn touched(&self, params: &ParamStore) -> Vec<(ParamId, usize)> {
        self.entries
            .iter()
            .map(|e| {
                let t = params.get(e.param);
                if e.values.len() == t.len() {
                    (e.param, usize::MAX)
                } else {
                    (e.param, e.offset / t.row_len())
                }
            })
            .collect()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor; it becomes trainable if it is not already.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let tensor = if tensor.is_trainable() {
            tensor
        } else {
            tensor.trainable()
        };
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform in `[-scale, scale]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        scale: f64,
        rng: &mut impl Rng,
    ) -> ParamId {
        let mut t = Tensor::zeros(shape);
        for v in t.values_mut() {
            *v = rng.random_range(-scale..=scale);
        }
        self.add(name, t)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    /// Adds a backward pass's contributions into the gradient slots.
    pub fn accumulate(&mut self, grads: &GradBuffer) -> Result<()> {
        for e in &grads.entries {
            let name = &self.names[e.param.0];
            let t = &mut self.tensors[e.param.0];
            let slot = t
                .grad_mut()
                .ok_or_else(|| Error::MissingGradient(name.clone()))?;
            let dst = &mut slot[e.offset..e.offset + e.values.len()];
            for (d, s) in dst.iter_mut().zip(&e.values) {
                *d += s;
            }
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for t in &mut self.tensors {
            if let Some(g) = t.grad_mut() {
                g.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::squared_norm).sum()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Flat copy of all parameter values, in registration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    /// Order-sensitive digest of every parameter's name, shape and bit pattern.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (_, name, t) in self.iter() {
            h.update(name.as_bytes());
            for s in t.shape() {
                h.update((*s as u64).to_le_bytes());
            }
            for v in t.values() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
