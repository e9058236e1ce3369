// SPDX-License-Identifier: Apache-2.0

//! Write and read guards.
//!
//! Each live table slot carries a [`SlotMonitor`] that follows the
//! transaction through its phases and owns the timeout counter. The
//! full-counter variant times every phase against its own budget; the
//! tiny-counter variant runs one counter from `aw_valid`/`ar_valid` until
//! `b_valid`/`r_last`. Protocol checks run in both variants.
//!
//! Evaluation order inside one cycle: counters tick and expire, new requests
//! are admitted, then the observed handshakes advance the state machines.

pub mod budget;
pub mod counter;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::axi::{classify_beat, BeatEvents, ClassifyError, Cycle, CycleSample, Direction, OpenBursts, TxnDescriptor, TxnId};
use crate::ott::{DumpFields, LdEntry, OttError, OutstandingTable, SlotIdx, StallReason, TxnState};

pub use budget::{compute_budget, BudgetConfig, BudgetError, Budgets};
pub use counter::{required_counter_bits, CounterStatus, PhaseCounter, Prescaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "tc")]
    TinyCounter,
    #[default]
    #[serde(rename = "fc")]
    FullCounter,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::TinyCounter => "tc",
            Variant::FullCounter => "fc",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tc" | "tiny" | "tinycounter" | "0" => Ok(Variant::TinyCounter),
            "fc" | "full" | "fullcounter" | "1" => Ok(Variant::FullCounter),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WritePhase {
    AddrHandshake = 0,
    DataPhaseEntry,
    FirstDataHandshake,
    BurstTransfer,
    RespMonitor,
    RespReady,
}

impl WritePhase {
    pub const ALL: [WritePhase; 6] = [
        WritePhase::AddrHandshake,
        WritePhase::DataPhaseEntry,
        WritePhase::FirstDataHandshake,
        WritePhase::BurstTransfer,
        WritePhase::RespMonitor,
        WritePhase::RespReady,
    ];

    pub fn label(self) -> &'static str {
        ["P1", "P2", "P3", "P4", "P5", "P6"][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReadPhase {
    AddrHandshake = 0,
    DataPhaseEntry,
    FirstDataHandshake,
    BurstTransfer,
    LastReady,
}

impl ReadPhase {
    pub const ALL: [ReadPhase; 5] = [
        ReadPhase::AddrHandshake,
        ReadPhase::DataPhaseEntry,
        ReadPhase::FirstDataHandshake,
        ReadPhase::BurstTransfer,
        ReadPhase::LastReady,
    ];

    pub fn label(self) -> &'static str {
        ["R1", "R2", "R3", "R4", "R5"][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Write(WritePhase),
    Read(ReadPhase),
    /// Whole-transaction window of the tiny-counter variant.
    Transaction,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Write(p) => p.label(),
            Phase::Read(p) => p.label(),
            Phase::Transaction => "TXN",
        }
    }

    /// Phase a transaction in `state` is in.
    pub fn of(dir: Direction, state: TxnState) -> Option<Phase> {
        use TxnState::*;
        match (dir, state) {
            (Direction::Write, WaitAddrReady) => Some(Phase::Write(WritePhase::AddrHandshake)),
            (Direction::Write, WaitFirstData) => Some(Phase::Write(WritePhase::DataPhaseEntry)),
            (Direction::Write, WaitDataReady) => Some(Phase::Write(WritePhase::FirstDataHandshake)),
            (Direction::Write, Burst) => Some(Phase::Write(WritePhase::BurstTransfer)),
            (Direction::Write, WaitResp) => Some(Phase::Write(WritePhase::RespMonitor)),
            (Direction::Write, WaitRespReady) => Some(Phase::Write(WritePhase::RespReady)),
            (Direction::Read, WaitAddrReady) => Some(Phase::Read(ReadPhase::AddrHandshake)),
            (Direction::Read, WaitFirstData) => Some(Phase::Read(ReadPhase::DataPhaseEntry)),
            (Direction::Read, WaitDataReady) => Some(Phase::Read(ReadPhase::FirstDataHandshake)),
            (Direction::Read, Burst) => Some(Phase::Read(ReadPhase::BurstTransfer)),
            (Direction::Read, WaitRespReady) => Some(Phase::Read(ReadPhase::LastReady)),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ViolationKind {
    /// `b_valid` for an ID whose oldest write is not waiting for a response,
    /// or for an unknown ID while some write is waiting.
    BIdMismatch,
    /// W beat with no accepted write burst to attach to.
    OrphanW,
    /// Completion of a transaction that is not the oldest of its ID.
    OutOfOrderComplete,
    /// `b_valid` while no write is waiting for a response.
    OrphanB,
    /// R beat for an ID whose oldest read has not completed its AR handshake.
    OrphanR,
    /// R beat with an ID that has no outstanding read.
    RIdUnknown,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::BIdMismatch => "BIdMismatch",
            ViolationKind::OrphanW => "OrphanW",
            ViolationKind::OutOfOrderComplete => "OutOfOrderComplete",
            ViolationKind::OrphanB => "OrphanB",
            ViolationKind::OrphanR => "OrphanR",
            ViolationKind::RIdUnknown => "RIdUnknown",
        }
    }
}

/// A non-Ok per-cycle guard output. A cycle with no verdicts is Ok.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Timeout { slot: SlotIdx, phase: Phase },
    Violation { slot: Option<SlotIdx>, kind: ViolationKind },
}

impl Verdict {
    pub fn slot(&self) -> Option<SlotIdx> {
        match *self {
            Verdict::Timeout { slot, .. } => Some(slot),
            Verdict::Violation { slot, .. } => slot,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Timeout { phase, .. } => phase.label(),
            Verdict::Violation { kind, .. } => kind.label(),
        }
    }
}

/// A closed phase interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub entry: Cycle,
    pub exit: Cycle,
}

/// Per-slot monitoring state stored in the LD entry.
#[derive(Debug, Clone)]
pub struct SlotMonitor {
    pub budgets: Budgets,
    counter: Option<PhaseCounter>,
    counted: Option<Phase>,
    phase_entry: Cycle,
    pub spans: Vec<PhaseSpan>,
    timeout_flag: bool,
}

impl SlotMonitor {
    pub fn counter(&self) -> Option<&PhaseCounter> {
        self.counter.as_ref()
    }

    /// Phase the active counter is timing.
    pub fn counted_phase(&self) -> Option<Phase> {
        self.counted.filter(|_| self.counter.is_some())
    }
}

impl DumpFields for SlotMonitor {
    fn elapsed(&self) -> u64 {
        self.counter.map_or(0, |c| c.elapsed())
    }
    fn budget(&self) -> u64 {
        self.counter.map_or(0, |c| u64::from(c.budget()))
    }
    fn timeout_flag(&self) -> bool {
        self.timeout_flag
    }
}

pub type MonitorTable = OutstandingTable<SlotMonitor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingTimeout {
    slot: SlotIdx,
    phase: Phase,
    fire_at: Cycle,
}

/// Result of presenting a new address request to the guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Tracked(SlotIdx),
    Stalled(StallReason),
}

#[derive(Debug, Clone)]
pub struct Guard {
    variant: Variant,
    prescaler: Prescaler,
    budgets: BudgetConfig,
    pending: Vec<PendingTimeout>,
    /// Slot of the request currently presented on AW / AR.
    aw_slot: Option<SlotIdx>,
    ar_slot: Option<SlotIdx>,
}

/// Open-burst view used by the beat classifier.
struct TableView<'a>(&'a MonitorTable);

impl OpenBursts for TableView<'_> {
    fn open_write_beats(&self) -> Option<u16> {
        let slot = self.0.ei_front(Direction::Write)?;
        let e = self.0.get(slot)?;
        matches!(e.state, TxnState::WaitFirstData | TxnState::WaitDataReady | TxnState::Burst).then_some(e.beats_done)
    }

    fn open_read_beats(&self, raw_id: u32) -> Option<u16> {
        let slot = self.0.head_of_raw(Direction::Read, raw_id)?;
        self.0.get(slot).map(|e| e.beats_done)
    }
}

impl Guard {
    pub fn new(variant: Variant, prescaler: Prescaler, budgets: BudgetConfig) -> Self {
        Guard { variant, prescaler, budgets, pending: Vec::new(), aw_slot: None, ar_slot: None }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn prescaler(&self) -> Prescaler {
        self.prescaler
    }

    pub fn budgets(&self) -> &BudgetConfig {
        &self.budgets
    }

    /// New budgets apply to transactions admitted from now on.
    pub fn set_budgets(&mut self, budgets: BudgetConfig) {
        self.budgets = budgets;
    }

    pub fn set_variant(&mut self, variant: Variant) {
        self.variant = variant;
    }

    pub fn set_prescaler(&mut self, prescaler: Prescaler) {
        self.prescaler = prescaler;
    }

    /// Drops all per-transaction state after an abort.
    pub fn reset(&mut self) {
        self.pending.clear();
        self.aw_slot = None;
        self.ar_slot = None;
    }

    fn start_counter(&self, budget: u32) -> PhaseCounter {
        PhaseCounter::start(budget, self.prescaler)
    }

    pub fn new_monitor(&self, desc: &TxnDescriptor, occupancy: usize, cycle: Cycle) -> SlotMonitor {
        let budgets = compute_budget(desc, occupancy, &self.budgets, self.variant);
        let counted = match self.variant {
            Variant::TinyCounter => Phase::Transaction,
            Variant::FullCounter => Phase::of(desc.dir, TxnState::WaitAddrReady).expect("first phase"),
        };
        SlotMonitor {
            budgets,
            counter: Some(self.start_counter(budgets.for_phase(counted))),
            counted: Some(counted),
            phase_entry: cycle,
            spans: Vec::new(),
            timeout_flag: false,
        }
    }

    /// Advances every running counter by one cycle and reports expiries,
    /// including timeouts latched by the sticky bit of a phase that has
    /// already ended.
    pub fn tick_counters(&mut self, ott: &mut MonitorTable, cycle: Cycle) -> Vec<Verdict> {
        let mut out = Vec::new();
        for slot in ott.live_slots() {
            let e = ott.get_mut(slot).expect("live");
            let m = &mut e.monitor;
            if let Some(c) = m.counter.as_mut() {
                c.tick();
                match c.evaluate() {
                    CounterStatus::Expired => {
                        m.timeout_flag = true;
                        out.push(Verdict::Timeout { slot, phase: m.counted.expect("counter has a phase") });
                    }
                    CounterStatus::Sticky => m.timeout_flag = true,
                    CounterStatus::Running => {}
                }
            }
        }
        let (due, rest): (Vec<_>, Vec<_>) = self.pending.iter().partition(|p| p.fire_at <= cycle);
        self.pending = rest;
        for p in due {
            if !out.iter().any(|v| v.slot() == Some(p.slot)) {
                out.push(Verdict::Timeout { slot: p.slot, phase: p.phase });
            }
        }
        out
    }

    /// Stops a counter; a latched sticky bit still reports at the counter's
    /// final step.
    fn stop_counter(&mut self, slot: SlotIdx, m: &mut SlotMonitor, cycle: Cycle) {
        if let (Some(c), Some(phase)) = (m.counter.take(), m.counted) {
            if c.sticky() {
                self.pending.push(PendingTimeout { slot, phase, fire_at: cycle + c.cycles_to_expiry() });
            }
        }
    }

    /// Moves a transaction to `next`, closing the current phase span and
    /// restarting or stopping its counter.
    fn enter(&mut self, slot: SlotIdx, e: &mut LdEntry<SlotMonitor>, next: TxnState, cycle: Cycle) {
        let dir = e.desc.dir;
        let m = &mut e.monitor;
        if let Some(phase) = Phase::of(dir, e.state) {
            m.spans.push(PhaseSpan { phase, entry: m.phase_entry, exit: cycle });
        }
        e.state = next;
        m.phase_entry = cycle;
        // b_valid / last r_valid end the tiny-counter window.
        let stop_tc = next >= TxnState::WaitRespReady;
        let restart = self.variant == Variant::FullCounter || next.is_terminal();
        if restart || stop_tc {
            self.stop_counter(slot, m, cycle);
        }
        if self.variant == Variant::FullCounter {
            m.counted = Phase::of(dir, next);
            m.counter = m.counted.map(|p| PhaseCounter::start(m.budgets.for_phase(p), self.prescaler));
        }
    }

    /// Presents the AW/AR requests of this cycle to the table.
    pub fn admit(&mut self, ott: &mut MonitorTable, s: &CycleSample) -> [Option<Admission>; 2] {
        let mut res = [None, None];
        for (i, dir) in [Direction::Write, Direction::Read].into_iter().enumerate() {
            let (ch, pending) = match dir {
                Direction::Write => (&s.aw, self.aw_slot),
                Direction::Read => (&s.ar, self.ar_slot),
            };
            if !ch.valid || pending.is_some() {
                continue;
            }
            let desc = TxnDescriptor {
                dir,
                id: TxnId::raw(ch.id),
                addr: ch.addr,
                burst_len: ch.len.max(1),
                issue_cycle: s.cycle,
            };
            let monitor = self.new_monitor(&desc, ott.occupancy(), s.cycle);
            let adm = match ott.enqueue(desc, monitor) {
                Ok(slot) => {
                    match dir {
                        Direction::Write => self.aw_slot = Some(slot),
                        Direction::Read => self.ar_slot = Some(slot),
                    }
                    Admission::Tracked(slot)
                }
                Err(reason) => Admission::Stalled(reason),
            };
            res[i] = Some(adm);
        }
        res
    }

    pub fn classify(&self, ott: &MonitorTable, s: &CycleSample) -> Result<BeatEvents, ClassifyError> {
        classify_beat(s, &TableView(ott))
    }

    /// Write guard. Returns verdicts; finished slots are pushed to `done`.
    pub fn step_write(
        &mut self,
        ott: &mut MonitorTable,
        events: BeatEvents,
        s: &CycleSample,
        done: &mut Vec<(SlotIdx, LdEntry<SlotMonitor>)>,
    ) -> Vec<Verdict> {
        let cycle = s.cycle;
        let mut out = Vec::new();

        if events.contains(BeatEvents::AW_FIRE) {
            if let Some(slot) = self.aw_slot.take() {
                let mut e = ott.get(slot).cloned().expect("pending AW slot is live");
                self.enter(slot, &mut e, TxnState::WaitFirstData, cycle);
                *ott.get_mut(slot).unwrap() = e;
            }
        }

        if let Some(slot) = ott.ei_front(Direction::Write) {
            let mut e = ott.get(slot).cloned().expect("EI slot is live");
            if s.w.valid && e.state == TxnState::WaitFirstData {
                self.enter(slot, &mut e, TxnState::WaitDataReady, cycle);
            }
            if events.contains(BeatEvents::W_FIRE) {
                e.beats_done = e.beats_done.saturating_add(1);
                if e.state == TxnState::WaitDataReady {
                    self.enter(slot, &mut e, TxnState::Burst, cycle);
                }
                if events.contains(BeatEvents::W_LAST) && e.state == TxnState::Burst {
                    self.enter(slot, &mut e, TxnState::WaitResp, cycle);
                    ott.ei_retire_write();
                }
            }
            *ott.get_mut(slot).unwrap() = e;
        }

        if s.b.valid {
            match ott.head_of_raw(Direction::Write, s.b.id) {
                Some(slot) => {
                    let mut e = ott.get(slot).cloned().unwrap();
                    match e.state {
                        TxnState::WaitResp | TxnState::WaitRespReady => {
                            if e.state == TxnState::WaitResp {
                                self.enter(slot, &mut e, TxnState::WaitRespReady, cycle);
                            }
                            if s.b.ready {
                                self.enter(slot, &mut e, TxnState::Done, cycle);
                            }
                            *ott.get_mut(slot).unwrap() = e;
                            if s.b.ready {
                                self.retire(ott, slot, done, &mut out);
                            }
                        }
                        _ => out.push(Verdict::Violation { slot: Some(slot), kind: ViolationKind::BIdMismatch }),
                    }
                }
                None => {
                    let waiting = ott
                        .live()
                        .find(|(_, e)| e.desc.dir == Direction::Write && e.state == TxnState::WaitResp)
                        .map(|(s, _)| s);
                    out.push(match waiting {
                        Some(slot) => Verdict::Violation { slot: Some(slot), kind: ViolationKind::BIdMismatch },
                        None => Verdict::Violation { slot: None, kind: ViolationKind::OrphanB },
                    });
                }
            }
        }
        out
    }

    /// Read guard.
    pub fn step_read(
        &mut self,
        ott: &mut MonitorTable,
        events: BeatEvents,
        s: &CycleSample,
        done: &mut Vec<(SlotIdx, LdEntry<SlotMonitor>)>,
    ) -> Vec<Verdict> {
        let cycle = s.cycle;
        let mut out = Vec::new();

        if events.contains(BeatEvents::AR_FIRE) {
            if let Some(slot) = self.ar_slot.take() {
                let mut e = ott.get(slot).cloned().expect("pending AR slot is live");
                self.enter(slot, &mut e, TxnState::WaitFirstData, cycle);
                *ott.get_mut(slot).unwrap() = e;
            }
        }

        if s.r.valid {
            let Some(slot) = ott.head_of_raw(Direction::Read, s.r.id) else {
                out.push(Verdict::Violation { slot: None, kind: ViolationKind::RIdUnknown });
                return out;
            };
            let mut e = ott.get(slot).cloned().unwrap();
            if e.state == TxnState::WaitAddrReady {
                out.push(Verdict::Violation { slot: Some(slot), kind: ViolationKind::OrphanR });
                return out;
            }
            if e.state == TxnState::WaitFirstData {
                self.enter(slot, &mut e, TxnState::WaitDataReady, cycle);
            }
            if s.r.last && self.variant == Variant::TinyCounter {
                // The tiny counter stops at r_last.
                self.stop_counter(slot, &mut e.monitor, cycle);
            }
            if events.contains(BeatEvents::R_FIRE) {
                e.beats_done = e.beats_done.saturating_add(1);
                if e.state == TxnState::WaitDataReady {
                    self.enter(slot, &mut e, TxnState::Burst, cycle);
                }
                if s.r.last {
                    if e.state == TxnState::Burst {
                        self.enter(slot, &mut e, TxnState::WaitRespReady, cycle);
                    }
                    self.enter(slot, &mut e, TxnState::Done, cycle);
                }
            } else if s.r.last && e.state == TxnState::Burst {
                self.enter(slot, &mut e, TxnState::WaitRespReady, cycle);
            }
            let finished = e.state == TxnState::Done;
            *ott.get_mut(slot).unwrap() = e;
            if finished {
                self.retire(ott, slot, done, &mut out);
            }
        }
        out
    }

    fn retire(
        &mut self,
        ott: &mut MonitorTable,
        slot: SlotIdx,
        done: &mut Vec<(SlotIdx, LdEntry<SlotMonitor>)>,
        out: &mut Vec<Verdict>,
    ) {
        match ott.complete(slot) {
            Ok(e) => done.push((slot, e)),
            Err(OttError::OutOfOrderComplete(s)) => {
                out.push(Verdict::Violation { slot: Some(s), kind: ViolationKind::OutOfOrderComplete })
            }
            Err(err) => panic!("guard retired slot {slot} in a bad state: {err}"),
        }
    }
}
