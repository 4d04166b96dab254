//! Synthetic non-stationary order-book generator.
//!
//! Each regime is one trading day at mid-price level
//! `base_price + offset_scale * regime_index`. Within a day the mid is a
//! random walk around that level with AR(1) increment momentum and a
//! restoring force pulling it back to the level:
//!
//!   delta ← momentum · delta + vol · noise
//!   excursion ← (1 − reversion) · excursion + delta
//!
//! Both effects make the near future partially predictable from the recent
//! window — a pure martingale walk would leave every model at the class
//! prior. The regime ladder of offsets is the distribution shift: with
//! enough scale, train-day and test-day price ranges are disjoint, which
//! is exactly the situation per-sample normalization is built for. Ten
//! price levels sit at fixed ticks around the mid with log-normal volumes.
//!
//! Labels compare the mean mid over the next H events against the current
//! mid, with a dead zone of `theta` mapping to "stationary".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{DayData, LobFrame, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub regimes: usize,
    pub events_per_regime: usize,
    /// Mid-price offset between consecutive regimes.
    pub offset_scale: f64,
    /// Standard deviation of one walk innovation.
    pub vol_scale: f64,
    /// AR(1) coefficient of the mid-price increments.
    pub momentum: f64,
    /// Pull of the excursion back toward the regime level, in [0, 1).
    pub reversion: f64,
    /// Dead zone: |mean future mid − mid| ≤ theta labels "stationary".
    pub theta: f64,
    pub horizons: Vec<u32>,
    pub base_price: f64,
    pub tick: f64,
    pub spread: f64,
    pub base_volume: f64,
    pub volume_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            regimes: 6,
            events_per_regime: 600,
            offset_scale: 8.0,
            vol_scale: 0.02,
            momentum: 0.2,
            reversion: 0.5,
            theta: 0.012,
            horizons: vec![10, 20, 50],
            base_price: 100.0,
            tick: 0.01,
            spread: 0.02,
            base_volume: 100.0,
            volume_sigma: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regimes == 0 {
            return Err(Error::config("synthetic generator needs at least 1 regime"));
        }
        let max_h = self.horizons.iter().copied().max().unwrap_or(0) as usize;
        if self.horizons.is_empty() {
            return Err(Error::config("synthetic generator needs at least one horizon"));
        }
        if self.events_per_regime < WINDOW_LEN + max_h {
            return Err(Error::config(format!(
                "events_per_regime must be at least window + max horizon = {}, got {}",
                WINDOW_LEN + max_h,
                self.events_per_regime
            )));
        }
        if self.vol_scale <= 0.0 {
            return Err(Error::config("vol_scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.reversion) {
            return Err(Error::config("reversion must be in [0, 1)"));
        }
        if self.theta < 0.0 {
            return Err(Error::config("theta must be non-negative"));
        }
        Ok(())
    }
}

/// One day per regime. Every emitted event carries a label for every
/// configured horizon (the walk is simulated past the day end to provide
/// the lookahead).
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<DayData>> {
    cfg.validate()?;
    let max_h = *cfg.horizons.iter().max().unwrap() as usize;
    let n = cfg.events_per_regime;
    let mut days = Vec::with_capacity(cfg.regimes);

    for regime in 0..cfg.regimes {
        let mut rng = Rng::derive(cfg.seed, regime as u64);
        let level = cfg.base_price + cfg.offset_scale * regime as f64;

        // Momentum + mean-reverting excursion around the regime level;
        // simulate past the day end for the label lookahead.
        let mut mids = Vec::with_capacity(n + max_h);
        let mut excursion = 0.0;
        let mut delta = 0.0;
        for _ in 0..n + max_h {
            delta = cfg.momentum * delta + cfg.vol_scale * rng.normal();
            excursion = (1.0 - cfg.reversion) * excursion + delta;
            mids.push(level + excursion);
        }

        let mut frames = Vec::with_capacity(n);
        for &m in mids.iter().take(n) {
            let mut values = [0.0; LobFrame::DIM];
            for level in 0..LobFrame::LEVELS {
                let depth = cfg.spread / 2.0 + level as f64 * cfg.tick;
                values[4 * level] = m + depth;
                values[4 * level + 1] =
                    cfg.base_volume * (cfg.volume_sigma * rng.normal()).exp();
                values[4 * level + 2] = m - depth;
                values[4 * level + 3] =
                    cfg.base_volume * (cfg.volume_sigma * rng.normal()).exp();
            }
            frames.push(LobFrame(values));
        }

        let mut labels = BTreeMap::new();
        for &h in &cfg.horizons {
            let h_usize = h as usize;
            let mut track = Vec::with_capacity(n);
            for t in 0..n {
                let future: f64 =
                    mids[t + 1..=t + h_usize].iter().sum::<f64>() / h_usize as f64;
                let change = future - mids[t];
                let class = if change > cfg.theta {
                    2
                } else if change < -cfg.theta {
                    0
                } else {
                    1
                };
                track.push(class);
            }
            labels.insert(h, track);
        }
        days.push(DayData { frames, labels });
    }
    Ok(days)
}
