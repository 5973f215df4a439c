//! Clip sources backed by FSEQ files listed in a manifest.

use std::path::PathBuf;

use engagenet_core::data::Normalization;
use engagenet_core::model::ModelConfig;
use engagenet_core::train::ClipSource;
use engagenet_core::{Error as CoreError, Result as CoreResult, Tensor};

use crate::fseq;
use crate::manifest::{Manifest, Split};

/// Loads and preprocesses clips on demand, optionally keeping them in memory
/// and recording every file read.
pub struct FileClipSource {
    items: Vec<(PathBuf, usize)>,
    model: ModelConfig,
    norm: Normalization,
    cache: Option<Vec<Option<Tensor<f32>>>>,
    log: Option<Vec<PathBuf>>,
}

impl FileClipSource {
    pub fn new(manifest: &Manifest, splits: &[Split], model: &ModelConfig, norm: &Normalization) -> Self {
        let items = manifest
            .select(splits)
            .into_iter()
            .map(|e| (manifest.resolve(e), e.label))
            .collect();
        FileClipSource { items, model: model.clone(), norm: norm.clone(), cache: None, log: None }
    }

    /// Keep preprocessed clips after the first read.
    pub fn cached(mut self) -> Self {
        self.cache = Some(vec![None; self.items.len()]);
        self
    }

    /// Record the path of every file read.
    pub fn logged(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn access_log(&self) -> &[PathBuf] {
        self.log.as_deref().unwrap_or_default()
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.items.iter().map(|(p, _)| p)
    }

    fn read(&mut self, index: usize) -> CoreResult<Tensor<f32>> {
        let (path, _) = self
            .items
            .get(index)
            .ok_or(CoreError::Index { what: "clip", index, bound: self.items.len() })?;
        if let Some(log) = &mut self.log {
            log.push(path.clone());
        }
        let raw = fseq::read(path).map_err(|e| CoreError::Source(e.to_string()))?;
        self.norm
            .preprocess(&raw, &self.model)
            .map_err(|e| CoreError::Source(format!("{}: {e}", path.display())))
    }
}

impl ClipSource<f32> for FileClipSource {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn label(&self, index: usize) -> usize {
        self.items[index].1
    }

    fn load(&mut self, index: usize) -> CoreResult<Tensor<f32>> {
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(index).cloned().flatten()) {
            return Ok(hit);
        }
        let t = self.read(index)?;
        if let Some(cache) = &mut self.cache {
            cache[index] = Some(t.clone());
        }
        Ok(t)
    }
}
