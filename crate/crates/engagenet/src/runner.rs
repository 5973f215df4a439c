//! The `train`, `eval`, `gradcheck` and `inspect` jobs.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use engagenet_core::data::class_weights;
use engagenet_core::model::EngagementModel;
use engagenet_core::nn::Mode;
use engagenet_core::train::{evaluate, ClipSource, ConfusionMatrix, EpochStats, Trainer};
use engagenet_core::verify::{check_op, OpReport, SUITE_OPS};
use engagenet_core::SeededRng;

use crate::checkpoint::Checkpoint;
use crate::dataset::FileClipSource;
use crate::error::{write_file, Error, Result};
use crate::experiment::{ExperimentConfig, WeightSource};
use crate::manifest::{Manifest, Split};
use crate::{fseq, tnsr};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const ACCESS_LOG_FILE: &str = "access_log.txt";

/// Clips are kept in memory when the whole training set fits in this many
/// bytes.
const CACHE_BYTES: usize = 1 << 30;

/// Splits a model is trained on: the validation clips join the training
/// clips, and the test split is never touched.
pub const TRAINING_SPLITS: [Split; 2] = [Split::Train, Split::Validation];

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub stats: EpochStats,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub checkpoint: Checkpoint<f32>,
    /// Files read during training, in first-read order (deterministic runs).
    pub accessed: Vec<PathBuf>,
}

/// Per-class loss weights for the chosen source, or `None` for unit weights.
pub fn weights_for(source: WeightSource, manifest: &Manifest, classes: usize) -> Result<Option<Vec<f64>>> {
    let splits: &[Split] = match source {
        WeightSource::None => return Ok(None),
        WeightSource::Train => &[Split::Train],
        WeightSource::TrainVal => &TRAINING_SPLITS,
    };
    Ok(Some(class_weights(&manifest.counts(splits, classes))?))
}

/// Trains until `experiment.train.epochs` epochs are complete, starting from
/// `resume` if given. Writes the config snapshot, the metrics CSV, the
/// checkpoint after every epoch and, in deterministic mode, the access log.
pub fn train(
    experiment: &ExperimentConfig,
    manifest_path: &Path,
    out: &Path,
    resume: Option<&Path>,
    echo: &mut dyn Write,
) -> Result<TrainOutcome> {
    experiment.validate()?;
    let manifest = Manifest::read(manifest_path)?;
    let k = experiment.model.num_classes;
    manifest.check(k, &[Split::Train])?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut trainer = match resume {
        Some(path) => {
            let ck = Checkpoint::<f32>::load(path)?;
            if ck.experiment.model != experiment.model {
                return Err(Error::data(path, "checkpoint model configuration differs from the requested one"));
            }
            let mut t = ck.into_trainer()?;
            t.config.epochs = experiment.train.epochs;
            t
        }
        None => {
            let weights = weights_for(experiment.class_weights, &manifest, k)?;
            let mut init = SeededRng::with_stream(experiment.train.seed, 0);
            let model = EngagementModel::new(experiment.model.clone(), &mut init)?;
            Trainer::new(model, experiment.train.clone(), weights)?
        }
    };

    let mut snapshot = format!(
        "# manifest={}\n# class weights: {}\n",
        manifest_path.display(),
        trainer.weights.iter().map(|w| format!("{w}")).collect::<Vec<_>>().join(",")
    );
    snapshot.push_str(&experiment.render());
    write_file(&out.join(CONFIG_FILE), snapshot.as_bytes())?;

    let mut source = FileClipSource::new(&manifest, &TRAINING_SPLITS, &experiment.model, &experiment.normalization);
    let clip_bytes = experiment.model.clip_shape().iter().product::<usize>() * 4;
    if clip_bytes.saturating_mul(source.len()) <= CACHE_BYTES {
        source = source.cached();
    }
    if experiment.train.deterministic {
        source = source.logged();
    }

    let metrics_path = out.join(METRICS_FILE);
    let mut metrics = if resume.is_some() && metrics_path.exists() {
        std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?
    } else {
        String::from("epoch,loss,train_acc,seconds\n")
    };
    let checkpoint_path = out.join(CHECKPOINT_FILE);
    let mut log = Vec::new();
    while trainer.epoch < trainer.config.epochs {
        let start = Instant::now();
        let stats = trainer.run_epoch(&mut source)?;
        let seconds = start.elapsed().as_secs_f64();
        let line = format!("{},{:.6},{:.4},{:.2}", stats.epoch, stats.loss, stats.train_acc, seconds);
        let _ = writeln!(echo, "{line}");
        metrics.push_str(&line);
        metrics.push('\n');
        write_file(&metrics_path, metrics.as_bytes())?;
        Checkpoint::from_trainer(&trainer, experiment).save(&checkpoint_path)?;
        log.push(EpochRecord { stats, seconds });
    }
    let checkpoint = Checkpoint::from_trainer(&trainer, experiment);
    if log.is_empty() {
        write_file(&metrics_path, metrics.as_bytes())?;
        checkpoint.save(&checkpoint_path)?;
    }

    let mut seen = BTreeSet::new();
    let accessed: Vec<PathBuf> = source
        .access_log()
        .iter()
        .filter(|p| seen.insert(p.to_path_buf()))
        .cloned()
        .collect();
    if experiment.train.deterministic {
        let text: String = accessed.iter().map(|p| format!("{}\n", p.display())).collect();
        write_file(&out.join(ACCESS_LOG_FILE), text.as_bytes())?;
    }
    Ok(TrainOutcome { log, checkpoint, accessed })
}

/// Evaluates a checkpoint on one split and, if `out` is given, writes
/// `confusion_<split>.csv` and `confusion_<split>.txt` there.
pub fn eval(checkpoint: &Path, manifest_path: &Path, split: Split, out: Option<&Path>, echo: &mut dyn Write) -> Result<ConfusionMatrix> {
    let ck = Checkpoint::<f32>::load(checkpoint)?;
    let manifest = Manifest::read(manifest_path)?;
    let config = ck.experiment.model.clone();
    manifest.check(config.num_classes, &[split])?;
    let mut model = EngagementModel::from_params(config.clone(), ck.params)?;
    model.set_mode(Mode::Eval);
    let mut source = FileClipSource::new(&manifest, &[split], &config, &ck.experiment.normalization);
    let matrix = evaluate(&mut model, &mut source)?;
    let table = matrix.to_table();
    let _ = write!(echo, "{table}");
    if let Some(dir) = out {
        write_file(&dir.join(format!("confusion_{split}.csv")), matrix.to_csv().as_bytes())?;
        write_file(&dir.join(format!("confusion_{split}.txt")), table.as_bytes())?;
    }
    Ok(matrix)
}

/// Threshold for the gradient suite.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Runs the gradient suite over `ops` (all when empty). Fails with a numeric
/// error when any maximum relative error reaches the tolerance.
pub fn gradcheck(ops: &[String], cases: usize, seed: u64, eps: f64, echo: &mut dyn Write) -> Result<Vec<OpReport>> {
    let selected: Vec<&'static str> = if ops.is_empty() {
        SUITE_OPS.to_vec()
    } else {
        ops.iter()
            .map(|o| {
                SUITE_OPS
                    .iter()
                    .copied()
                    .find(|s| s == o)
                    .ok_or_else(|| Error::Usage(format!("unknown op `{o}`; choose from {}", SUITE_OPS.join(", "))))
            })
            .collect::<Result<_>>()?
    };
    let mut reports = Vec::new();
    for op in selected {
        let start = Instant::now();
        let r = check_op(op, cases, seed, eps)?;
        let status = if r.max_rel_error < GRADCHECK_TOLERANCE { "ok" } else { "FAIL" };
        let _ = writeln!(
            echo,
            "{op:<16} max_rel_error {:.3e}  cases {}  coordinates {}  {:.2}s  {status}",
            r.max_rel_error,
            r.cases,
            r.coordinates,
            start.elapsed().as_secs_f64()
        );
        reports.push(r);
    }
    if let Some(bad) = reports.iter().find(|r| r.max_rel_error >= GRADCHECK_TOLERANCE) {
        return Err(Error::Numeric(format!(
            "{}: max relative error {:.3e} is not below {GRADCHECK_TOLERANCE:e}",
            bad.op, bad.max_rel_error
        )));
    }
    Ok(reports)
}

/// Describes a checkpoint, tensor, clip or manifest file.
pub fn inspect(path: &Path, echo: &mut dyn Write) -> Result<()> {
    let bytes = crate::error::read_file(path)?;
    let magic = bytes.get(..4).unwrap_or_default();
    let text = match magic {
        b"ENGK" => {
            let ck = Checkpoint::<f32>::decode(&bytes, path)?;
            let mut s = format!("checkpoint after {} epochs\n", ck.epoch);
            s.push_str(&ck.experiment.render());
            s.push_str(&format!(
                "class weights {:?}\n{} tensors, {} trainable values ({} expected)\n",
                ck.weights,
                ck.params.len(),
                ck.params.trainable_count(),
                ck.experiment.model.param_count()
            ));
            for (name, kind, t) in ck.params.iter() {
                s.push_str(&format!("  {name:<40} {kind:?} {:?}\n", t.shape()));
            }
            s.push_str(&format!("{} momentum buffers\n", ck.velocity.len()));
            s
        }
        b"TNSR" => {
            let t = tnsr::read(path)?;
            let v: engagenet_core::Tensor<f64> = t.clone().into_tensor();
            let (lo, hi) = v.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            format!(
                "tensor {} {:?} min {lo} max {hi} mean {}\n",
                t.dtype().name(),
                t.shape(),
                v.sum() / v.numel() as f64
            )
        }
        b"FSEQ" => {
            let clip = fseq::decode(&bytes, path)?;
            let kind = match clip.data() {
                engagenet_core::data::RawData::U8(_) => "u8",
                engagenet_core::data::RawData::F32(_) => "f32",
                engagenet_core::data::RawData::F64(_) => "f64",
            };
            format!("clip {kind} {:?} (frames, channels, height, width)\n", clip.shape())
        }
        _ if path.extension().is_some_and(|e| e == "csv") => {
            let m = Manifest::read(path)?;
            let classes = m.entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
            let mut s = format!("manifest with {} clips\n", m.entries.len());
            for split in Split::ALL {
                let counts = m.counts(&[split], classes);
                if counts.iter().any(|&c| c > 0) {
                    s.push_str(&format!("  {:<10} {counts:?}\n", split.name()));
                }
            }
            s
        }
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                detail: "not a checkpoint, tensor, clip or manifest".into(),
            })
        }
    };
    let _ = write!(echo, "{text}");
    Ok(())
}
