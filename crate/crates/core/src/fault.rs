// SPDX-License-Identifier: Apache-2.0

//! Recovery sequencing after a detected fault.
//!
//! Monitoring -> Isolated -> Resetting -> Resuming -> Monitoring. While
//! isolated or resetting, both paths to the subordinate are cut, every
//! aborted transaction is answered with one SLVERR (one per cycle, slot
//! order), and the external reset unit is asked to reinitialise the
//! subordinate.

use std::collections::VecDeque;

use thiserror::Error;

use crate::axi::{Cycle, Direction};
use crate::ott::{LdEntry, OutstandingTable, SlotIdx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsolationState {
    Monitoring,
    Isolated { since: Cycle },
    Resetting { since: Cycle, done_at: Cycle },
    Resuming,
}

/// A SLVERR response generated toward the manager for an aborted transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticResponse {
    pub dir: Direction,
    pub raw_id: u32,
    pub slot: SlotIdx,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecoveryOutputs {
    pub sever_request_path: bool,
    pub sever_response_path: bool,
    pub irq: bool,
    pub reset_req: bool,
    /// SLVERR presented toward the manager this cycle (B for writes, R with
    /// `last` for reads).
    pub synthetic: Option<SyntheticResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FaultUnitError {
    #[error("reset completion signalled while monitoring")]
    ResetWhileMonitoring,
}

/// Fixed-latency stand-in for the external reset controller.
#[derive(Debug, Clone, Copy)]
pub struct ResetUnit {
    latency: Cycle,
    done_at: Option<Cycle>,
}

impl ResetUnit {
    pub const DEFAULT_LATENCY: Cycle = 16;

    pub fn new(latency: Cycle) -> Self {
        ResetUnit { latency, done_at: None }
    }

    pub fn latency(&self) -> Cycle {
        self.latency
    }

    pub fn request(&mut self, cycle: Cycle) -> Cycle {
        let done = cycle + self.latency;
        self.done_at = Some(done);
        done
    }

    /// True exactly once, in the cycle the reset completes.
    pub fn poll(&mut self, cycle: Cycle) -> bool {
        match self.done_at {
            Some(d) if cycle >= d => {
                self.done_at = None;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FaultUnit {
    state: IsolationState,
    irq_enable: bool,
    reset: ResetUnit,
    reset_done: bool,
    queue: VecDeque<SyntheticResponse>,
    irq_pulses: u64,
    isolations: u64,
}

impl FaultUnit {
    pub fn new(reset_latency: Cycle, irq_enable: bool) -> Self {
        FaultUnit {
            state: IsolationState::Monitoring,
            irq_enable,
            reset: ResetUnit::new(reset_latency),
            reset_done: false,
            queue: VecDeque::new(),
            irq_pulses: 0,
            isolations: 0,
        }
    }

    pub fn state(&self) -> IsolationState {
        self.state
    }

    pub fn is_monitoring(&self) -> bool {
        self.state == IsolationState::Monitoring
    }

    pub fn severed(&self) -> bool {
        matches!(self.state, IsolationState::Isolated { .. } | IsolationState::Resetting { .. })
    }

    pub fn set_irq_enable(&mut self, on: bool) {
        self.irq_enable = on;
    }

    pub fn irq_pulses(&self) -> u64 {
        self.irq_pulses
    }

    pub fn isolations(&self) -> u64 {
        self.isolations
    }

    pub fn pending_responses(&self) -> usize {
        self.queue.len()
    }

    /// Reacts to the guards' output for this cycle. `None` is an Ok cycle.
    /// Starting isolation aborts the whole table; the aborted entries are
    /// returned for logging. Faults while already recovering are swallowed.
    pub fn on_verdict<M, V>(
        &mut self,
        verdict: Option<V>,
        cycle: Cycle,
        ott: &mut OutstandingTable<M>,
    ) -> (RecoveryOutputs, Vec<(SlotIdx, LdEntry<M>)>) {
        if verdict.is_none() || !self.is_monitoring() {
            return (self.outputs(false, false), Vec::new());
        }
        let aborted = ott.abort_all();
        self.queue.extend(aborted.iter().map(|(slot, e)| SyntheticResponse {
            dir: e.desc.dir,
            raw_id: e.desc.id.raw,
            slot: *slot,
        }));
        self.state = IsolationState::Isolated { since: cycle };
        self.isolations += 1;
        self.reset.request(cycle);
        self.reset_done = false;
        let irq = self.irq_enable;
        if irq {
            self.irq_pulses += 1;
        }
        (self.outputs(irq, true), aborted)
    }

    /// Signals the end of the external reset.
    pub fn on_reset_done(&mut self, _cycle: Cycle) -> Result<(), FaultUnitError> {
        match self.state {
            IsolationState::Monitoring => Err(FaultUnitError::ResetWhileMonitoring),
            _ => {
                self.reset_done = true;
                Ok(())
            }
        }
    }

    /// Advances the recovery sequence by one cycle. Returns the outputs and
    /// whether the reset unit completed in this cycle.
    pub fn advance(&mut self, cycle: Cycle) -> (RecoveryOutputs, bool) {
        let mut reset_completed = false;
        match self.state {
            IsolationState::Monitoring => return (RecoveryOutputs::default(), false),
            IsolationState::Resuming => {
                self.state = IsolationState::Monitoring;
                return (RecoveryOutputs::default(), false);
            }
            IsolationState::Isolated { since } => {
                self.state = IsolationState::Resetting { since, done_at: since + self.reset.latency() };
            }
            IsolationState::Resetting { .. } => {}
        }
        if self.reset.poll(cycle) {
            reset_completed = true;
            self.on_reset_done(cycle).expect("not monitoring");
        }
        let synthetic = self.queue.pop_front();
        if self.reset_done && self.queue.is_empty() {
            self.state = IsolationState::Resuming;
        }
        let mut out = self.outputs(false, false);
        out.synthetic = synthetic;
        (out, reset_completed)
    }

    fn outputs(&self, irq: bool, reset_req: bool) -> RecoveryOutputs {
        let severed = self.severed();
        RecoveryOutputs {
            sever_request_path: severed,
            sever_response_path: severed,
            irq,
            reset_req,
            synthetic: None,
        }
    }

    /// Drops any recovery in progress.
    pub fn clear(&mut self) {
        self.state = IsolationState::Monitoring;
        self.queue.clear();
        self.reset = ResetUnit::new(self.reset.latency());
        self.reset_done = false;
    }
}
