use engagenet_core::model::{EngagementModel, Head, ModelConfig};
use engagenet_core::nn::{
    basic_block2d, basic_block_param_count, init_basic_block, init_temporal_block, temporal_block, Forward, Mode,
    ParamStore, TemporalBlockSpec,
};
use engagenet_core::{SeededRng, Tape, Tensor, Var};
use proptest::prelude::*;

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = SeededRng::new(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform_range(-1.0, 1.0))
}

fn model(head: Head, seed: u64) -> EngagementModel<f64> {
    let mut c = ModelConfig::desk();
    c.head = head;
    EngagementModel::new(c, &mut SeededRng::new(seed)).unwrap()
}

fn reversed(features: &Tensor<f64>) -> Tensor<f64> {
    let (l, f) = (features.shape()[0], features.shape()[1]);
    Tensor::from_fn([l, f], |i| features.data()[(l - 1 - i / f) * f + i % f])
}

#[test]
fn tcn_sees_order_and_mean_pool_does_not() {
    for seed in 0..20 {
        let feats = random(&[16, 32], 100 + seed);
        let mut tcn = model(Head::Tcn, seed);
        let a = tcn.head_logits(&feats).unwrap();
        let b = tcn.head_logits(&reversed(&feats)).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() > 1e-9, "seed {seed}: TCN logits unchanged by time reversal");

        let mut pool = model(Head::MeanPool, seed);
        let a = pool.head_logits(&feats).unwrap();
        let b = pool.head_logits(&reversed(&feats)).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12, "seed {seed}: mean-pool logits depend on order");
    }
}

#[test]
fn first_frame_reaches_the_logits() {
    let config = ModelConfig::desk();
    assert!(config.receptive_field() >= config.clip_len);
    for seed in 0..20 {
        let mut m = model(Head::Tcn, seed);
        let feats = random(&[config.clip_len, config.feature_dim], 200 + seed);
        let mut bumped = feats.clone();
        bumped.data_mut()[..config.feature_dim].iter_mut().for_each(|v| *v += 1.0);
        let a = m.head_logits(&feats).unwrap();
        let b = m.head_logits(&bumped).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() > 1e-9, "seed {seed}: frame 0 has no effect");
    }
}

#[test]
fn mean_pool_degenerate_inputs() {
    let mut m = model(Head::MeanPool, 3);
    let row = random(&[1, 32], 9);
    let constant = Tensor::from_fn([7, 32], |i| row.data()[i % 32]);
    let single = m.head_logits(&row).unwrap();
    assert!(m.head_logits(&constant).unwrap().max_abs_diff(&single).unwrap() < 1e-12);

    let w = m.params.get("fc.weight").unwrap().clone();
    let b = m.params.get("fc.bias").unwrap().clone();
    let by_hand = Tensor::from_fn([4], |k| b.data()[k] + (0..32).map(|j| w.data()[k * 32 + j] * row.data()[j]).sum::<f64>());
    assert!(single.max_abs_diff(&by_hand).unwrap() < 1e-12);
}

#[test]
fn eval_forward_is_bitwise_repeatable() {
    let mut c = ModelConfig::desk();
    c.clip_len = 4;
    let mut m = EngagementModel::<f32>::new(c.clone(), &mut SeededRng::new(5)).unwrap();
    m.set_mode(Mode::Eval);
    let clip = random(&c.clip_shape(), 6).cast::<f32>();
    assert_eq!(m.logits(&clip).unwrap(), m.logits(&clip).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_pool_is_permutation_invariant(len in 1usize..10, seed in any::<u64>(), rot in 0usize..10) {
        let mut m = model(Head::MeanPool, seed % 7);
        let feats = random(&[len, 32], seed);
        let shift = rot % len;
        let permuted = Tensor::from_fn([len, 32], |i| feats.data()[((i / 32 + shift) % len) * 32 + i % 32]);
        let a = m.head_logits(&feats).unwrap();
        let b = m.head_logits(&permuted).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn temporal_block_keeps_batch_and_length(
        n in 1usize..3, cin in 1usize..5, cout in 1usize..5, len in 1usize..10,
        kernel in 1usize..4, dilation in 1usize..5, dropout in 0.0f64..0.5, seed in any::<u64>(), train in any::<bool>(),
    ) {
        let spec = TemporalBlockSpec { in_channels: cin, out_channels: cout, kernel, dilation, dropout };
        let mut rng = SeededRng::new(seed);
        let mut store = ParamStore::new();
        init_temporal_block(&mut store, "t", &spec, &mut rng).unwrap();
        prop_assert_eq!(store.trainable_count(), spec.param_count());
        let mode = if train { Mode::Train } else { Mode::Eval };
        let run = |store: &mut ParamStore<f64>| {
            let mut tape = Tape::new();
            let mut rng = SeededRng::new(seed ^ 3);
            let mut ctx = Forward::new(&mut tape, store, mode, &mut rng);
            temporal_block(&mut ctx, &Var::constant(random(&[n, cin, len], seed)), &spec, "t").unwrap().value().clone()
        };
        let y = run(&mut store);
        prop_assert_eq!(y.shape(), &[n, cout, len]);
        if !train {
            prop_assert_eq!(run(&mut store), y);
        }
    }

    #[test]
    fn basic_block_keeps_batch(
        n in 1usize..3, cin in 1usize..4, cout in 1usize..5, h in 2usize..7, w in 2usize..7,
        stride in 1usize..3, seed in any::<u64>(), train in any::<bool>(),
    ) {
        let mut store = ParamStore::new();
        init_basic_block(&mut store, "b", cin, cout, stride, &mut SeededRng::new(seed)).unwrap();
        prop_assert_eq!(store.trainable_count(), basic_block_param_count(cin, cout, stride));
        let x = random(&[n, cin, h, w], seed);
        prop_assume!(!train || n * h.div_ceil(stride) * w.div_ceil(stride) > 1);
        let mode = if train { Mode::Train } else { Mode::Eval };
        let run = |store: &mut ParamStore<f64>| {
            let mut tape = Tape::new();
            let mut rng = SeededRng::new(0);
            let mut ctx = Forward::new(&mut tape, store, mode, &mut rng);
            basic_block2d(&mut ctx, &Var::constant(x.clone()), "b", stride).unwrap().value().clone()
        };
        let y = run(&mut store);
        prop_assert_eq!(y.shape(), &[n, cout, h.div_ceil(stride), w.div_ceil(stride)]);
        if !train {
            prop_assert_eq!(run(&mut store), y);
        }
    }
}
