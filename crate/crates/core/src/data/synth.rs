//! Synthetic motion clips whose class is only visible in frame order.
//!
//! Every clip carries two squares shown on alternating frames: on even
//! frames a square sliding horizontally, on odd frames one sliding
//! vertically. The class is the pair of directions. Squares are tinted by
//! position (red grows with x, green with y), so a per-frame feature can read
//! where a square is but not where it is heading. Start positions are drawn
//! symmetrically, so a clip and its time reversal are equally likely and the
//! bag of frames carries no information about the label.

use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use crate::data::clip::{RawClip, RawData};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthDirection {
    Up,
    Down,
    Left,
    Right,
}

impl SynthDirection {
    pub const ALL: [SynthDirection; 4] = [Self::Up, Self::Down, Self::Left, Self::Right];

    pub fn label(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Up => "up",
            Self::Down => "down",
            Self::Left => "left",
            Self::Right => "right",
        }
    }

    /// Signs of motion of the horizontal and the vertical square (screen
    /// coordinates, y grows downward). Up and down are named after the
    /// vertical square, left and right after the horizontal one.
    pub fn signs(self) -> (f64, f64) {
        match self {
            Self::Up => (-1.0, -1.0),
            Self::Down => (1.0, 1.0),
            Self::Left => (-1.0, 1.0),
            Self::Right => (1.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Clips per class, classes in [`SynthDirection::ALL`] order.
    pub counts: Vec<usize>,
    pub clip_len: usize,
    pub height: usize,
    pub width: usize,
    /// Square side as a fraction of the shorter frame side.
    pub size: (f64, f64),
    /// Distance travelled as a fraction of the free track length.
    pub travel: (f64, f64),
    /// Standard deviation of the background pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(counts: Vec<usize>, clip_len: usize, height: usize, width: usize, seed: u64) -> Self {
        SynthConfig {
            counts,
            clip_len,
            height,
            width,
            size: (0.16, 0.22),
            travel: (0.5, 0.9),
            noise: 0.05,
            seed,
        }
    }

    /// Frames sized for the given model.
    pub fn for_model(config: &ModelConfig, counts: Vec<usize>, seed: u64) -> Self {
        Self::new(counts, config.clip_len, config.frame_height, config.frame_width, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() > SynthDirection::ALL.len() {
            return Err(Error::param("counts", format!("at most 4 classes, got {}", self.counts.len())));
        }
        if self.counts.iter().filter(|&&n| n > 0).count() < 2 {
            return Err(Error::param("counts", "at least two classes need clips"));
        }
        if self.clip_len < 4 {
            return Err(Error::param("clip_len", "at least 4 frames are needed"));
        }
        let ok_range = |(lo, hi): (f64, f64), max: f64| lo > 0.0 && lo <= hi && hi <= max;
        if !ok_range(self.size, 1.0) {
            return Err(Error::param("size", format!("{:?} is not a range within (0, 1]", self.size)));
        }
        if !ok_range(self.travel, 1.0) {
            return Err(Error::param("travel", format!("{:?} is not a range within (0, 1]", self.travel)));
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(Error::param("noise", "must be non-negative"));
        }
        let side = self.height.min(self.width) as f64;
        let smallest = self.size.0 * side;
        if smallest < 2.0 || side - self.size.1 * side < 2.0 {
            return Err(Error::param(
                "frame",
                format!("{}x{} is too small for the moving square", self.height, self.width),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Labels of all clips, grouped by class.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        for (c, &n) in self.counts.iter().enumerate() {
            out.extend(core::iter::repeat_n(c, n));
        }
        out
    }

    /// Clip `index` of [`labels`](Self::labels). Each clip draws from its own
    /// stream, so clips can be rendered in any order.
    pub fn render(&self, index: usize) -> Result<(usize, RawClip)> {
        self.validate()?;
        let label = *self
            .labels()
            .get(index)
            .ok_or(Error::Index { what: "synthetic clip", index, bound: self.len() })?;
        let (sx, sy) = SynthDirection::ALL[label].signs();
        let mut rng = SeededRng::with_stream(self.seed, index as u64);
        let (h, w, len) = (self.height as f64, self.width as f64, self.clip_len);
        let size = rng.uniform_range(self.size.0, self.size.1) * h.min(w);
        let (room_x, room_y) = (w - size, h - size);

        let horizontal = Track::draw(&mut rng, room_x, sx, self.travel, len.div_ceil(2));
        let row = rng.uniform_range(0.0, room_y);
        let vertical = Track::draw(&mut rng, room_y, sy, self.travel, len / 2);
        let column = rng.uniform_range(0.0, room_x);

        let plane = self.height * self.width;
        let mut data = Vec::with_capacity(len * 3 * plane);
        let mut frame = alloc::vec![0.0f64; 3 * plane];
        for t in 0..len {
            for v in frame.iter_mut() {
                *v = (0.15 + self.noise * rng.normal(0.0, 1.0)).clamp(0.0, 1.0);
            }
            let (x, y) = if t % 2 == 0 {
                (horizontal.at(t / 2), row)
            } else {
                (column, vertical.at(t / 2))
            };
            let tint = [0.25 + 0.75 * x / room_x, 0.25 + 0.75 * y / room_y, 1.0];
            for py in 0..self.height {
                let cy = overlap(py as f64, y, size);
                if cy == 0.0 {
                    continue;
                }
                for px in 0..self.width {
                    let a = cy * overlap(px as f64, x, size);
                    if a == 0.0 {
                        continue;
                    }
                    for (ch, &c) in tint.iter().enumerate() {
                        let v = &mut frame[ch * plane + py * self.width + px];
                        *v = *v * (1.0 - a) + c * a;
                    }
                }
            }
            data.extend(frame.iter().map(|&v| Float::round(v * 255.0) as u8));
        }
        let clip = RawClip::new([len, 3, self.height, self.width], RawData::U8(data))?;
        Ok((label, clip))
    }

    pub fn generate(&self) -> Result<Vec<(usize, RawClip)>> {
        (0..self.len()).map(|i| self.render(i)).collect()
    }
}

/// Evenly spaced positions along one axis over the frames a square is shown.
struct Track {
    start: f64,
    step: f64,
}

impl Track {
    fn draw(rng: &mut SeededRng, room: f64, sign: f64, travel: (f64, f64), shown: usize) -> Self {
        let dist = rng.uniform_range(travel.0, travel.1) * room;
        let start = if sign > 0.0 {
            rng.uniform_range(0.0, room - dist)
        } else {
            rng.uniform_range(dist, room)
        };
        Track { start, step: sign * dist / (shown.max(2) - 1) as f64 }
    }

    fn at(&self, j: usize) -> f64 {
        self.start + self.step * j as f64
    }
}

/// Length of `[pixel, pixel + 1]` covered by `[lo, lo + size]`.
fn overlap(pixel: f64, lo: f64, size: f64) -> f64 {
    ((pixel + 1.0).min(lo + size) - pixel.max(lo)).max(0.0)
}
