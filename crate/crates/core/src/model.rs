//! The ResNet+TCN classifier: a residual 2-D encoder applied to every frame,
//! a stack of dilated causal temporal blocks over the frame features, and a
//! linear classifier on the final time step. A mean-pool head replaces the
//! temporal stack for ablations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::blocks::{basic_block2d, basic_block_param_count, init_basic_block, init_temporal_block, temporal_block};
use crate::nn::layers::{init_batch_norm, init_conv2d, init_linear, Forward, Mode};
use crate::nn::{ParamStore, TemporalBlockSpec};
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Tcn,
    MeanPool,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Tcn => "tcn",
            Head::MeanPool => "meanpool",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tcn" => Some(Head::Tcn),
            "meanpool" => Some(Head::MeanPool),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
    pub input_channels: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub stem_pool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcnConfig {
    pub levels: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub feature_dim: usize,
    pub tcn: TcnConfig,
    pub num_classes: usize,
    pub clip_len: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub head: Head,
}

/// Number of trailing time steps visible to the last output of a TCN with
/// two causal convolutions per level and dilation `2^i` at level `i`.
pub fn receptive_field(levels: usize, kernel: usize) -> usize {
    1 + 2 * kernel.saturating_sub(1) * ((1usize << levels) - 1)
}

impl ModelConfig {
    /// ResNet18 encoder on 50 frames of 3×224×224 with an 8-level TCN.
    pub fn paper() -> Self {
        ModelConfig {
            encoder: EncoderConfig {
                stage_widths: alloc::vec![64, 128, 256, 512],
                blocks_per_stage: alloc::vec![2, 2, 2, 2],
                input_channels: 3,
                stem_kernel: 7,
                stem_stride: 2,
                stem_pool: true,
            },
            feature_dim: 512,
            tcn: TcnConfig { levels: 8, hidden: 128, kernel: 7, dropout: 0.25 },
            num_classes: 4,
            clip_len: 50,
            frame_height: 224,
            frame_width: 224,
            head: Head::Tcn,
        }
    }

    /// A CPU-sized variant that exercises the same code paths.
    pub fn desk() -> Self {
        ModelConfig {
            encoder: EncoderConfig {
                stage_widths: alloc::vec![16, 32],
                blocks_per_stage: alloc::vec![1, 1],
                input_channels: 3,
                stem_kernel: 7,
                stem_stride: 2,
                stem_pool: true,
            },
            feature_dim: 32,
            tcn: TcnConfig { levels: 4, hidden: 32, kernel: 3, dropout: 0.25 },
            num_classes: 4,
            clip_len: 16,
            frame_height: 32,
            frame_width: 32,
            head: Head::Tcn,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(self.tcn.levels, self.tcn.kernel)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        if e.stage_widths.is_empty() || e.stage_widths.len() != e.blocks_per_stage.len() {
            return Err(Error::Config(format!(
                "{} stage widths but {} block counts",
                e.stage_widths.len(),
                e.blocks_per_stage.len()
            )));
        }
        let positive = [
            ("encoder.input_channels", e.input_channels),
            ("encoder.stem_kernel", e.stem_kernel),
            ("encoder.stem_stride", e.stem_stride),
            ("tcn.hidden", self.tcn.hidden),
            ("tcn.kernel", self.tcn.kernel),
            ("num_classes", self.num_classes),
            ("clip_len", self.clip_len),
            ("frame_height", self.frame_height),
            ("frame_width", self.frame_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if e.stage_widths.iter().chain(&e.blocks_per_stage).any(|&v| v == 0) {
            return Err(Error::Config("stage widths and block counts must be positive".into()));
        }
        if self.feature_dim != *e.stage_widths.last().unwrap_or(&0) {
            return Err(Error::Config(format!(
                "feature_dim {} differs from the last stage width {:?}",
                self.feature_dim,
                e.stage_widths.last()
            )));
        }
        if !(0.0..1.0).contains(&self.tcn.dropout) {
            return Err(Error::Config(format!("tcn.dropout {} is outside [0, 1)", self.tcn.dropout)));
        }
        if self.tcn.levels >= usize::BITS as usize - 2 {
            return Err(Error::Config(format!("tcn.levels {} is too deep", self.tcn.levels)));
        }
        Ok(())
    }

    /// Specs of the temporal blocks, level `i` at dilation `2^i`.
    pub fn temporal_specs(&self) -> Vec<TemporalBlockSpec> {
        (0..self.tcn.levels)
            .map(|i| TemporalBlockSpec {
                in_channels: if i == 0 { self.feature_dim } else { self.tcn.hidden },
                out_channels: self.tcn.hidden,
                kernel: self.tcn.kernel,
                dilation: 1 << i,
                dropout: self.tcn.dropout,
            })
            .collect()
    }

    fn classifier_inputs(&self) -> usize {
        match self.head {
            Head::Tcn if self.tcn.levels > 0 => self.tcn.hidden,
            _ => self.feature_dim,
        }
    }

    /// Trainable parameter count, from the configuration alone.
    pub fn param_count(&self) -> usize {
        let e = &self.encoder;
        let w0 = e.stage_widths[0];
        let mut n = e.input_channels * w0 * e.stem_kernel * e.stem_kernel + 2 * w0;
        let mut in_c = w0;
        for (s, (&w, &blocks)) in e.stage_widths.iter().zip(&e.blocks_per_stage).enumerate() {
            for j in 0..blocks {
                let stride = if s > 0 && j == 0 { 2 } else { 1 };
                n += basic_block_param_count(in_c, w, stride);
                in_c = w;
            }
        }
        if self.head == Head::Tcn {
            n += self.temporal_specs().iter().map(|s| s.param_count()).sum::<usize>();
        }
        n + self.classifier_inputs() * self.num_classes + self.num_classes
    }

    /// Flat `key=value` pairs, one per field.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let e = &self.encoder;
        [
            ("head", self.head.name().to_string()),
            ("encoder.stage_widths", join(&e.stage_widths)),
            ("encoder.blocks_per_stage", join(&e.blocks_per_stage)),
            ("encoder.input_channels", e.input_channels.to_string()),
            ("encoder.stem_kernel", e.stem_kernel.to_string()),
            ("encoder.stem_stride", e.stem_stride.to_string()),
            ("encoder.stem_pool", e.stem_pool.to_string()),
            ("feature_dim", self.feature_dim.to_string()),
            ("tcn.levels", self.tcn.levels.to_string()),
            ("tcn.hidden", self.tcn.hidden.to_string()),
            ("tcn.kernel", self.tcn.kernel.to_string()),
            ("tcn.dropout", format!("{}", self.tcn.dropout)),
            ("num_classes", self.num_classes.to_string()),
            ("clip_len", self.clip_len.to_string()),
            ("frame_height", self.frame_height.to_string()),
            ("frame_width", self.frame_width.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Sets one field from its text form. Returns `Ok(false)` for keys that
    /// are not model fields.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = || Error::Config(format!("invalid value `{value}` for `{key}`"));
        let uint = || value.trim().parse::<usize>().map_err(|_| bad());
        let list = || -> Result<Vec<usize>> {
            value.split(',').map(|s| s.trim().parse::<usize>().map_err(|_| bad())).collect()
        };
        match key {
            "head" => self.head = Head::parse(value.trim()).ok_or_else(bad)?,
            "encoder.stage_widths" => self.encoder.stage_widths = list()?,
            "encoder.blocks_per_stage" => self.encoder.blocks_per_stage = list()?,
            "encoder.input_channels" => self.encoder.input_channels = uint()?,
            "encoder.stem_kernel" => self.encoder.stem_kernel = uint()?,
            "encoder.stem_stride" => self.encoder.stem_stride = uint()?,
            "encoder.stem_pool" => self.encoder.stem_pool = value.trim().parse().map_err(|_| bad())?,
            "feature_dim" => self.feature_dim = uint()?,
            "tcn.levels" => self.tcn.levels = uint()?,
            "tcn.hidden" => self.tcn.hidden = uint()?,
            "tcn.kernel" => self.tcn.kernel = uint()?,
            "tcn.dropout" => self.tcn.dropout = value.trim().parse().map_err(|_| bad())?,
            "num_classes" => self.num_classes = uint()?,
            "clip_len" => self.clip_len = uint()?,
            "frame_height" => self.frame_height = uint()?,
            "frame_width" => self.frame_width = uint()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Clip extents `[L, C, H, W]`.
    pub fn clip_shape(&self) -> [usize; 4] {
        [self.clip_len, self.encoder.input_channels, self.frame_height, self.frame_width]
    }
}

/// Index of the largest value; ties go to the lower index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Output of one batched forward pass.
pub struct Pass<T: Scalar> {
    /// `[B, K]` logits.
    pub logits: Var<T>,
    /// Tape variables of the trainable parameters used, by name.
    pub params: BTreeMap<String, Var<T>>,
}

#[derive(Debug, Clone)]
pub struct EngagementModel<T: Scalar> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    mode: Mode,
}

impl<T: Scalar> EngagementModel<T> {
    /// A freshly initialized model. Parameters are drawn in registration
    /// order from `rng`.
    pub fn new(config: ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let e = &config.encoder;
        let w0 = e.stage_widths[0];
        init_conv2d(&mut params, "encoder.conv1", e.input_channels, w0, e.stem_kernel, false, rng)?;
        init_batch_norm(&mut params, "encoder.bn1", w0)?;
        let mut in_c = w0;
        for (s, (&w, &blocks)) in e.stage_widths.iter().zip(&e.blocks_per_stage).enumerate() {
            for j in 0..blocks {
                let stride = if s > 0 && j == 0 { 2 } else { 1 };
                init_basic_block(&mut params, &format!("encoder.layer{}.{j}", s + 1), in_c, w, stride, rng)?;
                in_c = w;
            }
        }
        if config.head == Head::Tcn {
            for (i, spec) in config.temporal_specs().iter().enumerate() {
                init_temporal_block(&mut params, &format!("tcn.{i}"), spec, rng)?;
            }
        }
        init_linear(&mut params, "fc", config.classifier_inputs(), config.num_classes, rng)?;
        Ok(EngagementModel { config, params, mode: Mode::Eval })
    }

    /// Wraps existing parameters, checking that every expected tensor is
    /// present with the expected shape.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        let template = EngagementModel::<T>::new(config.clone(), &mut SeededRng::new(0))?;
        for (name, kind, t) in template.params.iter() {
            let got = params
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
            if got.shape() != t.shape() || params.kind(name) != Some(kind) {
                return Err(Error::Config(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    got.shape(),
                    t.shape()
                )));
            }
        }
        if params.len() != template.params.len() {
            return Err(Error::Config(format!(
                "{} parameters supplied, configuration defines {}",
                params.len(),
                template.params.len()
            )));
        }
        Ok(EngagementModel { config, params, mode: Mode::Eval })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Batched forward over `[B, L, C, H, W]` clips. All `B·L` frames go
    /// through the encoder as one batch-norm batch.
    pub fn forward(&mut self, tape: &mut Tape<T>, clips: &Tensor<T>, rng: &mut SeededRng) -> Result<Pass<T>> {
        let shape = clips.shape();
        if shape.len() != 5 {
            return Err(Error::dim("forward", "clip batch rank", 5, shape.len()));
        }
        self.check_clip(&shape[1..], "forward")?;
        let b = shape[0];
        let [l, c, h, w] = self.config.clip_shape();
        let frames = Var::constant(clips.clone().reshape([b * l, c, h, w])?);
        let config = self.config.clone();
        let mut ctx = Forward::new(tape, &mut self.params, self.mode, rng);
        let feats = encode(&mut ctx, &config, &frames)?;
        let feats = ctx.tape.reshape(&feats, &[b, l, config.feature_dim])?;
        let logits = head(&mut ctx, &config, &feats)?;
        Ok(Pass { logits, params: ctx.into_bindings() })
    }

    fn check_clip(&self, shape: &[usize], op: &'static str) -> Result<()> {
        let want = self.config.clip_shape();
        if shape.len() != 4 {
            return Err(Error::dim(op, "clip rank", 4, shape.len()));
        }
        for (axis, (&g, &e)) in ["frames", "channels", "height", "width"].iter().zip(shape.iter().zip(&want)) {
            if g != e {
                return Err(Error::dim(op, *axis, e, g));
            }
        }
        Ok(())
    }

    /// Per-frame features `[L, feature_dim]` of one `[L, C, H, W]` clip.
    pub fn encode_frames(&mut self, clip: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_clip(clip.shape(), "encode_frames")?;
        let config = self.config.clone();
        let mut tape = Tape::no_grad();
        let mut rng = SeededRng::new(0);
        let mut ctx = Forward::new(&mut tape, &mut self.params, self.mode, &mut rng);
        let y = encode(&mut ctx, &config, &Var::constant(clip.clone()))?;
        Ok(y.value().clone())
    }

    /// Logits `[K]` from per-frame features `[L', feature_dim]` through the
    /// configured head. Any sequence length is accepted.
    pub fn head_logits(&mut self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = features.shape();
        if shape.len() != 2 || shape[1] != self.config.feature_dim {
            return Err(Error::dim(
                "head_logits",
                "feature_dim",
                self.config.feature_dim,
                shape.get(1).copied().unwrap_or(0),
            ));
        }
        let config = self.config.clone();
        let mut tape = Tape::no_grad();
        let mut rng = SeededRng::new(0);
        let mut ctx = Forward::new(&mut tape, &mut self.params, self.mode, &mut rng);
        let feats = Var::constant(features.clone().reshape([1, shape[0], shape[1]])?);
        let y = head(&mut ctx, &config, &feats)?;
        y.value().clone().reshape([config.num_classes])
    }

    /// Logits `[K]` for one clip, without recording gradients.
    pub fn logits(&mut self, clip: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_clip(clip.shape(), "logits")?;
        let mut shape = alloc::vec![1];
        shape.extend_from_slice(clip.shape());
        let batch = clip.clone().reshape(shape)?;
        let mut tape = Tape::no_grad();
        let pass = self.forward(&mut tape, &batch, &mut SeededRng::new(0))?;
        pass.logits.value().clone().reshape([self.config.num_classes])
    }

    pub fn predict(&mut self, clip: &Tensor<T>) -> Result<usize> {
        Ok(argmax(self.logits(clip)?.data()))
    }
}

fn encode<T: Scalar>(ctx: &mut Forward<'_, T>, config: &ModelConfig, frames: &Var<T>) -> Result<Var<T>> {
    let e = &config.encoder;
    let x = ctx.conv2d(frames, "encoder.conv1", e.stem_stride, e.stem_kernel / 2)?;
    let x = ctx.batch_norm(&x, "encoder.bn1")?;
    let mut x = ctx.relu(&x);
    if e.stem_pool {
        x = ctx.tape.max_pool2d(&x, 3, 2, 1)?;
    }
    for (s, &blocks) in e.blocks_per_stage.iter().enumerate() {
        for j in 0..blocks {
            let stride = if s > 0 && j == 0 { 2 } else { 1 };
            x = basic_block2d(ctx, &x, &format!("encoder.layer{}.{j}", s + 1), stride)?;
        }
    }
    ctx.tape.global_avg_pool2d(&x)
}

/// `[B, L, F]` features to `[B, K]` logits.
fn head<T: Scalar>(ctx: &mut Forward<'_, T>, config: &ModelConfig, feats: &Var<T>) -> Result<Var<T>> {
    let pooled = match config.head {
        Head::MeanPool => ctx.tape.mean_axis1(feats)?,
        Head::Tcn => {
            let mut x = ctx.tape.swap_last_two(feats)?;
            for (i, spec) in config.temporal_specs().iter().enumerate() {
                x = temporal_block(ctx, &x, spec, &format!("tcn.{i}"))?;
            }
            ctx.tape.last_step(&x)?
        }
    };
    ctx.linear(&pooled, "fc")
}
