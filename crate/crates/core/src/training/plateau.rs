use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauConfig {
    /// Epochs without improvement before the rate is cut.
    pub patience: usize,
    /// Smallest change that counts as an improvement.
    pub min_delta: f64,
    pub factor: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            patience: 4,
            min_delta: 1e-4,
            factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlateauAction {
    Continue,
    /// The rate was cut to this value.
    Decayed(f64),
    /// A further cut would go below the floor: training is over.
    Stop,
}

/// Divides the learning rate by `factor` whenever the monitored metric has
/// not improved for `patience` epochs, down to `floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub floor: f64,
    pub config: PlateauConfig,
    pub direction: Direction,
    pub best: Option<f64>,
    stale: usize,
    pub decays: usize,
}

impl PlateauSchedule {
    pub fn new(initial: f64, floor: f64, config: PlateauConfig, direction: Direction) -> Result<Self> {
        if !(initial > floor && floor > 0.0) || config.factor <= 1.0 || config.patience == 0 {
            return Err(Error::Config(format!(
                "plateau schedule needs initial > floor > 0, factor > 1, patience > 0 \
                 (got {initial}, {floor}, {}, {})",
                config.factor, config.patience
            )));
        }
        Ok(Self {
            lr: initial,
            floor,
            config,
            direction,
            best: None,
            stale: 0,
            decays: 0,
        })
    }

    fn improves(&self, metric: f64) -> bool {
        match (self.best, self.direction) {
            (None, _) => true,
            (Some(b), Direction::Maximize) => metric > b + self.config.min_delta,
            (Some(b), Direction::Minimize) => metric < b - self.config.min_delta,
        }
    }

    /// Feeds one epoch's metric. A NaN metric never counts as improvement.
    pub fn step(&mut self, metric: f64) -> PlateauAction {
        if !metric.is_nan() && self.improves(metric) {
            self.best = Some(metric);
            self.stale = 0;
            return PlateauAction::Continue;
        }
        self.stale += 1;
        if self.stale < self.config.patience {
            return PlateauAction::Continue;
        }
        self.stale = 0;
        let next = self.lr / self.config.factor;
        // Relative slack so that e.g. 1e-3 / 10 / 10 still reaches a 1e-5 floor.
        if next < self.floor * (1.0 - 1e-9) {
            return PlateauAction::Stop;
        }
        self.lr = next;
        self.decays += 1;
        PlateauAction::Decayed(next)
    }
}
