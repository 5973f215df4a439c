//! Writes synthetic motion datasets as FSEQ files plus a manifest.

use std::path::Path;

use engagenet_core::data::SynthConfig;

use crate::error::{Error, Result};
use crate::fseq;
use crate::manifest::{Entry, Manifest, Split};

/// Seed of the generator for one split, so splits never share clips.
pub fn split_seed(seed: u64, split: Split) -> u64 {
    let salt = match split {
        Split::Train => 0,
        Split::Validation => 1,
        Split::Test => 2,
    };
    seed.wrapping_mul(3).wrapping_add(salt)
}

/// Renders every requested split into `out/clips/` and writes
/// `out/manifest.csv`.
pub fn generate(out: &Path, base: &SynthConfig, splits: &[(Split, Vec<usize>)]) -> Result<Manifest> {
    let clips = out.join("clips");
    std::fs::create_dir_all(&clips).map_err(|e| Error::io(&clips, e))?;
    let mut entries = Vec::new();
    for (split, counts) in splits {
        let config = SynthConfig { counts: counts.clone(), seed: split_seed(base.seed, *split), ..base.clone() };
        config.validate()?;
        for i in 0..config.len() {
            let (label, clip) = config.render(i)?;
            let rel = format!("clips/{}_{i:05}.fseq", split.name());
            fseq::write(&out.join(&rel), &clip)?;
            entries.push(Entry { path: rel, label, split: *split });
        }
    }
    let manifest = Manifest::new(entries, out)?;
    manifest.write(&out.join("manifest.csv"))?;
    Ok(manifest)
}
