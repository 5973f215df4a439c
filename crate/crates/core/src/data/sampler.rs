//! Epoch batch orders.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Shuffled indices cut into batches of `batch_size`; the last batch may be
/// short.
pub fn uniform_batches(len: usize, batch_size: usize, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::param("batch_size", "must be at least 1"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// One epoch of `ceil(N / batch_size)` full batches in which every class
/// present in `labels` appears in every batch.
///
/// Slots are assigned to classes round-robin (class order shuffled once per
/// epoch, the pointer carrying over between batches). Within a class,
/// samples are drawn from a shuffled pool; an exhausted pool is reshuffled
/// and drawing starts over.
pub fn stratified_batches(labels: &[usize], batch_size: usize, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    let mut pools: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        pools.entry(l).or_default().push(i);
    }
    if batch_size < pools.len().max(1) {
        return Err(Error::param(
            "batch_size",
            format!("{batch_size} cannot hold all {} classes", pools.len()),
        ));
    }
    let mut pools: Vec<Vec<usize>> = pools.into_values().collect();
    for pool in &mut pools {
        rng.shuffle(pool);
    }
    let mut order: Vec<usize> = (0..pools.len()).collect();
    rng.shuffle(&mut order);
    let mut cursors = alloc::vec![0usize; pools.len()];

    let batches = labels.len().div_ceil(batch_size);
    let mut next = 0;
    let mut out = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let c = order[next % order.len()];
            next += 1;
            if cursors[c] == pools[c].len() {
                rng.shuffle(&mut pools[c]);
                cursors[c] = 0;
            }
            batch.push(pools[c][cursors[c]]);
            cursors[c] += 1;
        }
        out.push(batch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn imbalanced() -> Vec<usize> {
        let mut labels = Vec::new();
        for (c, n) in [6, 36, 343, 294].into_iter().enumerate() {
            labels.extend(core::iter::repeat_n(c, n));
        }
        labels
    }

    #[test]
    fn every_batch_has_every_class() {
        let labels = imbalanced();
        let mut rng = SeededRng::new(4);
        let batches = stratified_batches(&labels, 5, &mut rng).unwrap();
        assert_eq!(batches.len(), labels.len().div_ceil(5));
        for b in &batches {
            assert_eq!(b.len(), 5);
            let classes: BTreeSet<_> = b.iter().map(|&i| labels[i]).collect();
            assert_eq!(classes.len(), 4);
        }
    }

    #[test]
    fn too_small_batch_rejected() {
        let labels = imbalanced();
        assert!(matches!(
            stratified_batches(&labels, 3, &mut SeededRng::new(0)),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn single_class_is_plain_shuffle() {
        let labels = alloc::vec![0; 6];
        let batches = stratified_batches(&labels, 2, &mut SeededRng::new(1)).unwrap();
        assert_eq!(batches.len(), 3);
        let seen: BTreeSet<_> = batches.iter().flatten().copied().collect();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn seeded_epochs_repeat() {
        let labels = imbalanced();
        let a = stratified_batches(&labels, 5, &mut SeededRng::new(9)).unwrap();
        let b = stratified_batches(&labels, 5, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_covers_all_once() {
        let batches = uniform_batches(11, 4, &mut SeededRng::new(2)).unwrap();
        assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), [4, 4, 3]);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
    }
}
