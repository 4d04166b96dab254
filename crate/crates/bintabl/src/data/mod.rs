//! Order-book data: frames, window/label construction, train/test day
//! splits, the text-file loader and the synthetic regime-shift generator.

pub mod fi2010;
pub mod synthetic;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One order-book event: 10 levels of (ask price, ask volume, bid price,
/// bid volume), 40 values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LobFrame(pub [f64; LobFrame::DIM]);

impl LobFrame {
    pub const DIM: usize = 40;
    pub const LEVELS: usize = 10;

    pub fn ask_price(&self, level: usize) -> f64 {
        self.0[4 * level]
    }

    pub fn ask_volume(&self, level: usize) -> f64 {
        self.0[4 * level + 1]
    }

    pub fn bid_price(&self, level: usize) -> f64 {
        self.0[4 * level + 2]
    }

    pub fn bid_volume(&self, level: usize) -> f64 {
        self.0[4 * level + 3]
    }

    /// Mean of the best bid and best ask prices.
    pub fn mid_price(&self) -> f64 {
        (self.ask_price(0) + self.bid_price(0)) / 2.0
    }
}

/// One trading day: an event sequence plus, per horizon, a class track
/// (0 down, 1 stationary, 2 up). A track may be shorter than the frame
/// sequence when the trailing events have no lookahead.
#[derive(Clone, Debug)]
pub struct DayData {
    pub frames: Vec<LobFrame>,
    pub labels: BTreeMap<u32, Vec<usize>>,
}

/// A batch of D×T window matrices with one class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesBatch {
    pub samples: Vec<Matrix>,
    pub labels: Vec<usize>,
    pub horizon: u32,
}

impl SeriesBatch {
    pub fn new(samples: Vec<Matrix>, labels: Vec<usize>, horizon: u32) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::contract(format!(
                "series batch: {} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        Ok(SeriesBatch {
            samples,
            labels,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

pub const WINDOW_LEN: usize = 10;

/// Sliding windows of `t_len` consecutive events, stride 1, never crossing
/// a day boundary. The window ending at event t takes that event's label
/// for the requested horizon. Columns are in chronological order (oldest
/// first).
pub fn make_windows(days: &[DayData], t_len: usize, horizon: u32) -> Result<SeriesBatch> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (di, day) in days.iter().enumerate() {
        let track = day.labels.get(&horizon).ok_or_else(|| {
            Error::config(format!(
                "horizon {horizon} not in provided label tracks {:?} (day {di})",
                day.labels.keys().collect::<Vec<_>>()
            ))
        })?;
        let n = day.frames.len();
        if n < t_len {
            return Err(Error::config(format!(
                "insufficient events: day {di} has {n} event(s), a window needs {t_len}"
            )));
        }
        if track.len() > n {
            return Err(Error::contract(format!(
                "day {di}: label track ({}) longer than frame sequence ({n})",
                track.len()
            )));
        }
        let d = LobFrame::DIM;
        for (end, &label) in track.iter().enumerate().skip(t_len - 1) {
            let start = end + 1 - t_len;
            let window = Matrix::from_fn(d, t_len, |i, j| day.frames[start + j].0[i]);
            samples.push(window);
            if label > 2 {
                return Err(Error::contract(format!(
                    "day {di}, event {end}: label {label} out of range 0..3"
                )));
            }
            labels.push(label);
        }
    }
    SeriesBatch::new(samples, labels, horizon)
}

/// First `train_days` days train, the rest evaluate. Windows never span
/// the boundary because they never span days at all.
#[derive(Clone, Copy, Debug)]
pub struct SplitSpec {
    pub train_days: usize,
}

impl SplitSpec {
    /// The published split: days 1–7 train, 8–10 test.
    pub fn fi2010() -> Self {
        SplitSpec { train_days: 7 }
    }

    pub fn split<'a>(&self, days: &'a [DayData]) -> Result<(&'a [DayData], &'a [DayData])> {
        if self.train_days == 0 || self.train_days >= days.len() {
            return Err(Error::config(format!(
                "split needs 0 < train_days < {}, got {}",
                days.len(),
                self.train_days
            )));
        }
        Ok(days.split_at(self.train_days))
    }
}
