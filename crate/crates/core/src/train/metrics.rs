//! Confusion matrix with accuracy and per-class recall.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};

/// `K x K` counts, rows are true classes and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![0; k * k] }
    }

    pub fn from_pairs(k: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim("ConfusionMatrix", "predictions", truth.len(), predicted.len()));
        }
        let mut m = Self::new(k);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        for v in [truth, predicted] {
            if v >= self.k {
                return Err(Error::Index { what: "class", index: v, bound: self.k });
            }
        }
        self.counts[truth * self.k + predicted] += 1;
        Ok(())
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.k..(truth + 1) * self.k]
    }

    pub fn support(&self, class: usize) -> u64 {
        self.row(class).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Recall of `class`, and whether the class had any samples. A class
    /// without samples reports 0.
    pub fn recall(&self, class: usize) -> (f64, bool) {
        match self.support(class) {
            0 => (0.0, false),
            n => (self.get(class, class) as f64 / n as f64, true),
        }
    }

    pub fn recalls(&self) -> Vec<f64> {
        (0..self.k).map(|c| self.recall(c).0).collect()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::dim("ConfusionMatrix::merge", "classes", self.k, other.k));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `true\pred,0,1,...` header then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for c in 0..self.k {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for t in 0..self.k {
            let _ = write!(s, "{t}");
            for v in self.row(t) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Aligned table with recall per row and overall accuracy.
    pub fn to_table(&self) -> String {
        let width = self
            .counts
            .iter()
            .map(|v| format!("{v}").len())
            .max()
            .unwrap_or(1)
            .max(format!("{}", self.k).len())
            .max(4);
        let mut s = format!("{:>10}", "true\\pred");
        for c in 0..self.k {
            let _ = write!(s, " {c:>width$}");
        }
        s.push_str("   recall\n");
        for t in 0..self.k {
            let _ = write!(s, "{t:>10}");
            for v in self.row(t) {
                let _ = write!(s, " {v:>width$}");
            }
            let (r, supported) = self.recall(t);
            let _ = writeln!(s, "   {r:.4}{}", if supported { "" } else { " (no samples)" });
        }
        let _ = writeln!(s, "accuracy {:.4} over {} clips", self.accuracy(), self.total());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let m = ConfusionMatrix::from_pairs(3, &[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.recalls(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn hand_counted() {
        let m = ConfusionMatrix::from_pairs(4, &[0, 1, 2, 3], &[2, 2, 3, 3]).unwrap();
        // only the last clip is right
        assert_eq!(m.accuracy(), 0.25);
        assert_eq!(m.recalls(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.get(0, 2), 1);
        assert_eq!(m.get(2, 3), 1);
    }

    #[test]
    fn minority_collapse_shape() {
        let truth = [0, 1, 2, 3, 2, 3];
        let pred = [2, 3, 2, 3, 3, 2];
        let m = ConfusionMatrix::from_pairs(4, &truth, &pred).unwrap();
        for t in 0..4 {
            assert_eq!(m.get(t, 0) + m.get(t, 1), 0);
        }
        assert_eq!(m.recall(0), (0.0, true));
        assert_eq!(m.recall(1), (0.0, true));
    }

    #[test]
    fn zero_support_flagged() {
        let m = ConfusionMatrix::from_pairs(2, &[0], &[0]).unwrap();
        assert_eq!(m.recall(1), (0.0, false));
    }

    #[test]
    fn merge_adds() {
        let mut a = ConfusionMatrix::from_pairs(2, &[0, 1], &[0, 0]).unwrap();
        let b = ConfusionMatrix::from_pairs(2, &[1], &[1]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.total(), 3);
        assert_eq!(a.to_csv(), "true\\pred,0,1\n0,1,0\n1,1,1\n");
        assert!(a.to_table().contains("accuracy 0.6667 over 3 clips"));
    }
}
