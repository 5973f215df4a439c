//! CSV manifests with header `path,label,split`. Relative paths resolve
//! against the manifest's directory.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" | "val" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    /// As written in the manifest.
    pub path: String,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<Entry>,
    /// Directory that relative entry paths are resolved against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<Entry>, root: impl Into<PathBuf>) -> Result<Self> {
        let m = Manifest { entries, root: root.into() };
        let mut seen = BTreeSet::new();
        for e in &m.entries {
            if !seen.insert(e.path.as_str()) {
                return Err(Error::data(&m.root, format!("duplicate path `{}`", e.path)));
            }
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::data(path, e.to_string()))?;
        let headers = reader.headers().map_err(|e| Error::data(path, e.to_string()))?;
        if headers != vec!["path", "label", "split"] {
            return Err(Error::data(path, format!("header must be `path,label,split`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
            let row = i + 2;
            let label = rec[1]
                .parse::<usize>()
                .map_err(|_| Error::data(path, format!("line {row}: bad label `{}`", &rec[1])))?;
            let split = Split::parse(&rec[2])
                .ok_or_else(|| Error::data(path, format!("line {row}: unknown split `{}`", &rec[2])))?;
            entries.push(Entry { path: rec[0].to_string(), label, split });
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::new(entries, root)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
        let fail = |e: csv::Error| Error::data(path, e.to_string());
        w.write_record(["path", "label", "split"]).map_err(fail)?;
        for e in &self.entries {
            w.write_record([e.path.as_str(), &e.label.to_string(), e.split.name()]).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &Entry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn select(&self, splits: &[Split]) -> Vec<&Entry> {
        self.entries.iter().filter(|e| splits.contains(&e.split)).collect()
    }

    /// Per-class counts over `splits`.
    pub fn counts(&self, splits: &[Split], classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for e in self.select(splits) {
            if let Some(c) = counts.get_mut(e.label) {
                *c += 1;
            }
        }
        counts
    }

    /// Fails unless every label is below `classes` and `splits` are nonempty.
    pub fn check(&self, classes: usize, splits: &[Split]) -> Result<()> {
        if let Some(e) = self.entries.iter().find(|e| e.label >= classes) {
            return Err(Error::data(&self.root, format!("`{}` has label {} but there are {classes} classes", e.path, e.label)));
        }
        for s in splits {
            if !self.entries.iter().any(|e| e.split == *s) {
                return Err(Error::data(&self.root, format!("no {s} entries")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Manifest::new(
            vec![
                Entry { path: "a.fseq".into(), label: 0, split: Split::Train },
                Entry { path: "b.fseq".into(), label: 3, split: Split::Test },
            ],
            dir.path(),
        )
        .unwrap();
        m.write(&p).unwrap();
        let back = Manifest::read(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.counts(&[Split::Train, Split::Test], 4), [1, 0, 0, 1]);
        assert!(back.check(4, &[Split::Train]).is_ok());
        assert!(back.check(3, &[]).is_err());
        assert!(back.check(4, &[Split::Validation]).is_err());
    }

    #[test]
    fn duplicates_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "path,label,split\na,0,train\na,1,test\n").unwrap();
        assert!(Manifest::read(&p).unwrap_err().to_string().contains("duplicate"));
        std::fs::write(&p, "path,label,split\na,x,train\n").unwrap();
        assert!(Manifest::read(&p).is_err());
        std::fs::write(&p, "file,label,split\na,0,train\n").unwrap();
        assert!(Manifest::read(&p).is_err());
    }
}
