use std::path::Path;

use engagenet::checkpoint::Checkpoint;
use engagenet::experiment::ExperimentConfig;
use engagenet::{fseq, tnsr};
use engagenet_core::data::{RawClip, RawData};
use engagenet_core::model::EngagementModel;
use engagenet_core::train::{MemorySource, TrainConfig, Trainer};
use engagenet_core::{SeededRng, Tensor};
use proptest::prelude::*;

fn raw_data() -> impl Strategy<Value = ([usize; 4], RawData)> {
    (1usize..4, 1usize..4, 1usize..6, 1usize..6, 0u8..3).prop_flat_map(|(l, c, h, w, kind)| {
        let n = l * c * h * w;
        let data = match kind {
            0 => prop::collection::vec(any::<u8>(), n).prop_map(RawData::U8).boxed(),
            1 => prop::collection::vec(any::<f32>(), n).prop_map(RawData::F32).boxed(),
            _ => prop::collection::vec(any::<f64>(), n).prop_map(RawData::F64).boxed(),
        };
        (Just([l, c, h, w]), data)
    })
}

fn same_bits(a: &RawData, b: &RawData) -> bool {
    match (a, b) {
        (RawData::U8(x), RawData::U8(y)) => x == y,
        (RawData::F32(x), RawData::F32(y)) => x.iter().map(|v| v.to_bits()).eq(y.iter().map(|v| v.to_bits())),
        (RawData::F64(x), RawData::F64(y)) => x.iter().map(|v| v.to_bits()).eq(y.iter().map(|v| v.to_bits())),
        _ => false,
    }
}

proptest! {
    #[test]
    fn fseq_round_trip_is_identity((shape, data) in raw_data()) {
        let clip = RawClip::new(shape, data).unwrap();
        let bytes = fseq::encode(&clip).unwrap();
        let back = fseq::decode(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back.shape(), shape);
        prop_assert!(same_bits(back.data(), clip.data()));
        prop_assert_eq!(fseq::encode(&back).unwrap(), bytes);
    }

    #[test]
    fn truncated_fseq_is_a_format_error((shape, data) in raw_data(), cut in 0.0f64..1.0) {
        let bytes = fseq::encode(&RawClip::new(shape, data).unwrap()).unwrap();
        let keep = ((bytes.len() as f64) * cut) as usize;
        let err = fseq::decode(&bytes[..keep], Path::new("mem")).unwrap_err();
        prop_assert_eq!(err.exit_code(), 2);
    }
}

fn trained_checkpoint() -> Checkpoint<f32> {
    let mut experiment = ExperimentConfig::preset("desk").unwrap();
    experiment.model.clip_len = 4;
    experiment.model.frame_height = 16;
    experiment.model.frame_width = 16;
    let model = EngagementModel::new(experiment.model.clone(), &mut SeededRng::new(1)).unwrap();
    let config = TrainConfig { lr: 0.01, momentum: 0.9, batch_size: 4, epochs: 1, ..TrainConfig::default() };
    let mut trainer = Trainer::new(model, config, Some(vec![0.5, 1.0, 2.0, 4.0])).unwrap();
    let mut rng = SeededRng::new(2);
    let clips = (0..8)
        .map(|_| Tensor::from_fn(experiment.model.clip_shape(), |_| rng.uniform_range(-1.0, 1.0) as f32))
        .collect();
    let mut source = MemorySource { clips, labels: vec![0, 1, 2, 3, 0, 1, 2, 3] };
    trainer.run_epoch(&mut source).unwrap();
    Checkpoint::from_trainer(&trainer, &experiment)
}

#[test]
fn checkpoint_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained_checkpoint();
    assert!(!ck.velocity.is_empty());
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    ck.save(&a).unwrap();
    let loaded = Checkpoint::<f32>::load(&a).unwrap();
    assert_eq!(loaded, ck);
    for ((n0, k0, t0), (n1, k1, t1)) in ck.params.iter().zip(loaded.params.iter()) {
        assert_eq!((n0, k0), (n1, k1));
        assert!(t0.data().iter().zip(t1.data()).all(|(x, y)| x.to_bits() == y.to_bits()), "{n0}");
    }
    loaded.save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn restored_trainer_continues_identically() {
    let ck = trained_checkpoint();
    let again = Checkpoint::from_trainer(&ck.clone().into_trainer().unwrap(), &ck.experiment);
    assert_eq!(again.encode(), ck.encode());
}

#[test]
fn damaged_checkpoints_are_format_errors() {
    let bytes = trained_checkpoint().encode();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let err = Checkpoint::<f32>::decode(&bad_magic, Path::new("ck.bin")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(format!("{err}").contains("byte 0"), "{err}");
    for keep in [3, 10, bytes.len() / 2, bytes.len() - 1] {
        let err = Checkpoint::<f32>::decode(&bytes[..keep], Path::new("ck.bin")).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{keep}: {err}");
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(Checkpoint::<f32>::decode(&longer, Path::new("ck.bin")).is_err());
}

#[test]
fn tensor_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::<f64>::from_fn([2, 3, 1], |i| i as f64 / 7.0 - 0.3);
    let path = dir.path().join("t.tnsr");
    tnsr::write(&path, &t).unwrap();
    assert_eq!(tnsr::read(&path).unwrap().into_tensor::<f64>(), t);
}
