use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{NdError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// A named collection of trainable tensors. The store name tells gradients of
/// different stores apart when they share a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    name: String,
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new(name: impl Into<String>) -> ParamStore {
        ParamStore {
            name: name.into(),
            params: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a tensor drawn uniformly from `±sqrt(1/fan_in)`.
    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape and data agree"))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON checkpoint: `{seed, params: [{name, shape, values}]}`. Names are
/// qualified as `store/param`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn from_stores(seed: u64, stores: &[&ParamStore]) -> Checkpoint {
        let params = stores
            .iter()
            .flat_map(|s| {
                s.params.iter().map(move |p| ParamRecord {
                    name: format!("{}/{}", s.name, p.name),
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().to_vec(),
                })
            })
            .collect();
        Checkpoint { seed, params }
    }

    /// Overwrites every parameter of `store` from the checkpoint.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        let prefix = format!("{}/", store.name);
        for p in &mut store.params {
            let full = format!("{prefix}{}", p.name);
            let rec = self
                .params
                .iter()
                .find(|r| r.name == full)
                .ok_or_else(|| NdError::Checkpoint(format!("missing parameter `{full}`")))?;
            if rec.shape != p.value.shape() {
                return Err(NdError::Checkpoint(format!(
                    "`{full}` has shape {:?}, expected {:?}",
                    rec.shape,
                    p.value.shape()
                )));
            }
            p.value = Tensor::new(rec.shape.clone(), rec.values.clone())
                .map_err(|e| NdError::Checkpoint(format!("`{full}`: {e}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        serde_json::from_str(text).map_err(|e| NdError::Checkpoint(e.to_string()))
    }
}
