//! Per-process migration toggle: the ping-pong slope detector that switches
//! migration off once page movement has settled, and the access-count
//! variation detector that switches it back on.

use std::collections::VecDeque;
use std::fmt;

use crate::sim::{Nanos, NS_PER_SEC};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub eval_period_ns: Nanos,
    pub restart_period_ns: Nanos,
    /// Consecutive stabilized evaluations required to stop (K).
    pub stop_streak: u32,
    /// Varying evaluations that must have been seen before a stop (M).
    pub varying_min: u32,
    pub restart_threshold: u32,
    pub window_capacity: usize,
    pub refault_distance: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            eval_period_ns: 2 * NS_PER_SEC,
            restart_period_ns: 5 * NS_PER_SEC,
            stop_streak: 3,
            varying_min: 2,
            restart_threshold: 3,
            window_capacity: 8,
            refault_distance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlopeState {
    #[default]
    Varying,
    Stabilizing,
    Stabilized,
}

impl SlopeState {
    pub fn name(self) -> &'static str {
        match self {
            SlopeState::Varying => "varying",
            SlopeState::Stabilizing => "stabilizing",
            SlopeState::Stabilized => "stabilized",
        }
    }
}

impl fmt::Display for SlopeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ping-pong counter history, sampled once per evaluation period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaTracker {
    last_sample: Option<u64>,
    deltas: VecDeque<u64>,
}

impl DeltaTracker {
    const HISTORY: usize = 3;

    pub fn new() -> Self {
        Self::default()
    }

    /// Record a baseline sample without producing a delta.
    pub fn prime(&mut self, counter: u64) {
        self.last_sample = Some(counter);
        self.deltas.clear();
    }

    /// Sample the cumulative counter and return its increase since the
    /// previous sample. The first sample yields 0.
    pub fn compute_delta(&mut self, counter: u64) -> u64 {
        let delta = match self.last_sample {
            Some(prev) => counter.saturating_sub(prev),
            None => {
                self.last_sample = Some(counter);
                return 0;
            }
        };
        self.last_sample = Some(counter);
        if self.deltas.len() == Self::HISTORY {
            self.deltas.pop_front();
        }
        self.deltas.push_back(delta);
        delta
    }

    /// `|delta(t) - delta(t-2p)| / 2`, or 0 until three deltas exist.
    pub fn compute_slope(&self) -> u64 {
        if self.deltas.len() < Self::HISTORY {
            return 0;
        }
        self.deltas[2].abs_diff(self.deltas[0]) / 2
    }

    /// Whether enough deltas exist for a central difference.
    pub fn has_slope(&self) -> bool {
        self.deltas.len() >= Self::HISTORY
    }

    pub fn deltas(&self) -> impl Iterator<Item = u64> + '_ {
        self.deltas.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAction {
    None,
    DisableMigration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToggleState {
    pub migration_on: bool,
    pub slope_state: SlopeState,
    pub max_slope: u64,
    pub stop_threshold: u64,
    pub prev_slope: u64,
    pub curr_slope: u64,
    pub stabilized_streak: u32,
    pub varying_streak: u32,
}

impl Default for ToggleState {
    fn default() -> Self {
        Self {
            migration_on: true,
            slope_state: SlopeState::Varying,
            max_slope: 0,
            stop_threshold: 0,
            prev_slope: 0,
            curr_slope: 0,
            stabilized_streak: 0,
            varying_streak: 0,
        }
    }
}

impl ToggleState {
    pub fn new() -> Self {
        Self::default()
    }

    /// One stop evaluation with the slope of the current period.
    ///
    /// While Varying, a period below threshold that follows a quiet period
    /// is still allocation, and movement that falls back to or below
    /// threshold moves to Stabilizing. From Stabilizing or Stabilized any
    /// period above threshold means pages still need moving. Migration
    /// switches off after `stop_streak` Stabilized periods, but only once
    /// `varying_min` evaluations have been spent in Varying since the state
    /// was last reset.
    pub fn evaluate_stop(&mut self, slope: u64, stop_streak: u32, varying_min: u32) -> StopAction {
        if !self.migration_on {
            return StopAction::None;
        }
        self.curr_slope = slope;
        if slope > self.max_slope {
            self.max_slope = slope;
            self.stop_threshold = slope >> 2;
        }
        let thr = self.stop_threshold;
        let prev = self.prev_slope;
        match self.slope_state {
            SlopeState::Varying => {
                self.varying_streak = self.varying_streak.saturating_add(1);
                if prev >= thr && slope <= thr {
                    self.slope_state = SlopeState::Stabilizing;
                }
            }
            SlopeState::Stabilizing => {
                if slope > thr {
                    self.slope_state = SlopeState::Varying;
                } else {
                    self.slope_state = SlopeState::Stabilized;
                    self.stabilized_streak = 1;
                }
            }
            SlopeState::Stabilized => {
                if slope > thr {
                    self.slope_state = SlopeState::Varying;
                    self.stabilized_streak = 0;
                } else {
                    self.stabilized_streak += 1;
                }
            }
        }
        self.prev_slope = slope;
        if self.slope_state == SlopeState::Stabilized
            && self.stabilized_streak >= stop_streak
            && self.varying_streak >= varying_min
        {
            self.migration_on = false;
            return StopAction::DisableMigration;
        }
        StopAction::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariationState {
    #[default]
    Varying,
    Stabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartAction {
    None,
    Restart,
}

/// Sliding window of sampled access counts observed while migration is off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestartState {
    window: VecDeque<u64>,
    capacity: usize,
    pub variation_state: VariationState,
    pub count_variation: u32,
}

impl RestartState {
    pub fn new(capacity: usize) -> Self {
        Self { window: VecDeque::with_capacity(capacity), capacity: capacity.max(1), variation_state: VariationState::Varying, count_variation: 0 }
    }

    pub fn window(&self) -> impl Iterator<Item = u64> + '_ {
        self.window.iter().copied()
    }

    /// Integer mean of the window, `None` while it is empty.
    pub fn mean(&self) -> Option<u64> {
        if self.window.is_empty() {
            return None;
        }
        Some(self.window.iter().sum::<u64>() / self.window.len() as u64)
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.variation_state = VariationState::Varying;
        self.count_variation = 0;
    }

    fn push(&mut self, count: u64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(count);
    }

    /// One restart evaluation with the latest sampled access count. The
    /// mean excludes the new sample. Once stabilized, deviating samples are
    /// kept out of the window so the reference level does not drift toward
    /// the new phase.
    pub fn evaluate_restart(&mut self, count: u64, restart_threshold: u32) -> RestartAction {
        let Some(mean) = self.mean() else {
            self.push(count);
            return RestartAction::None;
        };
        let tolerance = mean >> 4;
        let deviation = count.abs_diff(mean);
        match self.variation_state {
            VariationState::Varying => {
                if deviation < tolerance {
                    self.variation_state = VariationState::Stabilized;
                }
                self.push(count);
            }
            VariationState::Stabilized => {
                if deviation > tolerance {
                    self.count_variation += 1;
                } else {
                    self.count_variation = self.count_variation.saturating_sub(1);
                    self.push(count);
                }
            }
        }
        if self.count_variation > restart_threshold {
            RestartAction::Restart
        } else {
            RestartAction::None
        }
    }
}
