use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer.
    Trainable,
    /// State carried along with the model but not trained (running statistics).
    Buffer,
}

impl ParamKind {
    pub fn flag(self) -> u8 {
        match self {
            ParamKind::Trainable => 1,
            ParamKind::Buffer => 0,
        }
    }

    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            1 => Some(ParamKind::Trainable),
            0 => Some(ParamKind::Buffer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry<T> {
    name: String,
    kind: ParamKind,
    value: Arc<Tensor<T>>,
}

/// Named tensors in insertion order. Iteration order is stable, which keeps
/// checkpoints byte-for-byte reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    entries: Vec<Entry<T>>,
    index: BTreeMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Entry {
            name,
            kind,
            value: Arc::new(value),
        });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.shared(name).map(|a| &**a)
    }

    pub fn shared(&self, name: &str) -> Option<&Arc<Tensor<T>>> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn kind(&self, name: &str) -> Option<ParamKind> {
        self.index.get(name).map(|&i| self.entries[i].kind)
    }

    /// Mutable access; copies the tensor first if a forward pass still holds it.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let i = *self.index.get(name)?;
        Some(Arc::make_mut(&mut self.entries[i].value))
    }

    /// Replaces a value, keeping its slot; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let current = self
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
        if current.shape() != value.shape() {
            return Err(Error::Config(format!(
                "shape mismatch for `{name}`: {:?} vs {:?}",
                current.shape(),
                value.shape()
            )));
        }
        *current = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ParamKind, &Tensor<T>)> {
        self.entries.iter().map(|e| (e.name.as_str(), e.kind, &*e.value))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.kind == ParamKind::Trainable)
            .map(|e| e.name.to_string())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind == ParamKind::Trainable)
            .map(|e| e.value.numel())
            .sum()
    }
}
