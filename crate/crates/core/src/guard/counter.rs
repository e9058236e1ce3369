// SPDX-License-Identifier: Apache-2.0

//! Prescaled timeout counters with a sticky near-timeout bit.
//!
//! A counter advances one step every `P` cycles, so a budget of `B` cycles
//! needs only `ceil(B / P)` steps of range. The divider phase is captured
//! when the counter starts, which keeps the expiry no earlier than the exact
//! budget. The sticky bit latches the moment the exact budget is used up
//! while the counter still waits for its final step; the timeout is then
//! reported at that step even if the monitored phase has ended meanwhile.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Prescaler(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("prescaler step {0} is not a power of two in 1..=128")]
pub struct InvalidPrescaler(pub u32);

impl Prescaler {
    pub const MAX_STEP: u32 = 128;

    pub fn new(step: u32) -> Result<Self, InvalidPrescaler> {
        if step.is_power_of_two() && step <= Self::MAX_STEP {
            Ok(Prescaler(step))
        } else {
            Err(InvalidPrescaler(step))
        }
    }

    pub fn step(self) -> u32 {
        self.0
    }

    /// Counter steps needed for a budget of `budget` cycles.
    pub fn threshold(self, budget: u32) -> u32 {
        budget.div_ceil(self.0)
    }

    /// Longest budget a `bits`-wide counter can time at this step.
    pub fn max_budget(self, bits: u32) -> u64 {
        let steps = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        steps.saturating_mul(u64::from(self.0))
    }

    pub fn all() -> impl Iterator<Item = Prescaler> {
        (0..=7).map(|s| Prescaler(1 << s))
    }
}

impl Default for Prescaler {
    fn default() -> Self {
        Prescaler(1)
    }
}

impl TryFrom<u32> for Prescaler {
    type Error = InvalidPrescaler;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Prescaler::new(v)
    }
}

impl From<Prescaler> for u32 {
    fn from(p: Prescaler) -> u32 {
        p.0
    }
}

/// Bits needed to hold the values `0..=n`.
pub fn bits_for(n: u64) -> u32 {
    u64::BITS - n.leading_zeros()
}

/// Counter width needed to time `max_budget` cycles at step `step`:
/// `ceil(log2(ceil(max_budget / step) + 1))`.
pub fn required_counter_bits(max_budget: u64, step: u32) -> u32 {
    bits_for(max_budget.div_ceil(u64::from(step)))
}

/// Outcome of evaluating a counter at the start of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterStatus {
    Running,
    /// Exact budget used up; waiting for the final prescaled step.
    Sticky,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseCounter {
    budget: u32,
    threshold: u32,
    step: u32,
    /// Prescaled count.
    count: u32,
    /// Divider phase since the counter started, in `0..step`.
    divider: u32,
    sticky: bool,
}

impl PhaseCounter {
    pub fn start(budget: u32, prescaler: Prescaler) -> Self {
        PhaseCounter {
            budget,
            threshold: prescaler.threshold(budget),
            step: prescaler.step(),
            count: 0,
            divider: 0,
            sticky: false,
        }
    }

    /// Advances by one clock cycle.
    pub fn tick(&mut self) {
        self.divider += 1;
        if self.divider == self.step {
            self.divider = 0;
            self.count = self.count.saturating_add(1);
        }
    }

    pub fn evaluate(&mut self) -> CounterStatus {
        if self.count >= self.threshold {
            return CounterStatus::Expired;
        }
        if self.count + 1 == self.threshold && self.elapsed() >= u64::from(self.budget) {
            self.sticky = true;
        }
        if self.sticky {
            CounterStatus::Sticky
        } else {
            CounterStatus::Running
        }
    }

    /// Cycles since the counter started.
    pub fn elapsed(&self) -> u64 {
        u64::from(self.count) * u64::from(self.step) + u64::from(self.divider)
    }

    /// Cycles until the next prescaled step completes the count.
    pub fn cycles_to_expiry(&self) -> u64 {
        let remaining_steps = u64::from(self.threshold.saturating_sub(self.count));
        (remaining_steps * u64::from(self.step)).saturating_sub(u64::from(self.divider))
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn sticky(&self) -> bool {
        self.sticky
    }
}
