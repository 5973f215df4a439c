use std::collections::BTreeSet;

use engagenet_core::data::{class_weights, stratified_batches, temporal_downsample, SynthConfig};
use engagenet_core::{SeededRng, Tensor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stratified_batches_hold_every_class(
        counts in prop::collection::vec(0usize..30, 2..6), extra in 0usize..4, seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        prop_assume!(!labels.is_empty());
        let present: BTreeSet<usize> = labels.iter().copied().collect();
        let batch = counts.len() + extra;
        let epoch = stratified_batches(&labels, batch, &mut SeededRng::new(seed)).unwrap();
        prop_assert_eq!(epoch.len(), labels.len().div_ceil(batch));
        for b in &epoch {
            prop_assert_eq!(b.len(), batch);
            let seen: BTreeSet<usize> = b.iter().map(|&i| labels[i]).collect();
            prop_assert_eq!(&seen, &present);
        }
    }

    #[test]
    fn class_weights_preserve_the_sample_count(counts in prop::collection::vec(1usize..5000, 2..8)) {
        let w = class_weights(&counts).unwrap();
        let n: usize = counts.iter().sum();
        let weighted: f64 = counts.iter().zip(&w).map(|(&c, w)| c as f64 * w).sum();
        prop_assert!((weighted - n as f64).abs() <= 1e-9 * n as f64);
    }

    #[test]
    fn downsampled_frames_are_source_frames(len in 1usize..40, target in 1usize..20, frame in 1usize..6) {
        let frames = Tensor::<f64>::from_fn([len, frame], |i| i as f64 * 0.5 - 3.0);
        let out = temporal_downsample(&frames, target).unwrap();
        prop_assert_eq!(out.shape(), &[target, frame]);
        let mut last = 0;
        for (j, row) in out.data().chunks(frame).enumerate() {
            let src = frames.data().chunks(frame).position(|r| r == row);
            prop_assert!(src.is_some());
            let src = src.unwrap();
            prop_assert!(src >= last, "frame {j} goes backwards");
            if j > 0 && src == last {
                prop_assert_eq!(src, len - 1, "only the last frame may repeat");
            }
            last = src;
        }
    }
}

/// Order-free clip descriptor: per-channel 16-bin pixel histograms over all
/// frames.
fn histogram(clip: &engagenet_core::data::RawClip) -> Vec<f64> {
    let [l, c, h, w] = clip.shape();
    let t = clip.to_unit_tensor::<f64>();
    let mut out = vec![0.0; c * 16];
    for f in 0..l {
        for ch in 0..c {
            for p in 0..h * w {
                let v = t.data()[(f * c + ch) * h * w + p];
                out[ch * 16 + ((v * 16.0) as usize).min(15)] += 1.0;
            }
        }
    }
    let total = (l * h * w) as f64;
    out.iter_mut().for_each(|v| *v /= total);
    out
}

#[test]
fn frame_content_alone_does_not_predict_the_label() {
    let train = SynthConfig::new(vec![60; 4], 16, 32, 32, 11).generate().unwrap();
    let test = SynthConfig::new(vec![40; 4], 16, 32, 32, 12).generate().unwrap();
    let mut centroids = vec![vec![0.0; 48]; 4];
    for (label, clip) in &train {
        for (c, v) in centroids[*label].iter_mut().zip(histogram(clip)) {
            *c += v / 60.0;
        }
    }
    let correct = test
        .iter()
        .filter(|(label, clip)| {
            let h = histogram(clip);
            let dist = |c: &Vec<f64>| c.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let best = (0..4).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
            best == *label
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    assert!(acc <= 0.40, "histogram classifier accuracy {acc}");
}
