// SPDX-License-Identifier: Apache-2.0

//! The monitoring unit as a whole: table, guards, fault unit and registers.
//!
//! A cycle is processed in two steps. [`Tmu::begin_cycle`] runs the
//! counters and the recovery sequence; its outputs (sever, SLVERR, irq) are
//! in effect for the whole cycle. [`Tmu::observe`] then looks at the
//! handshakes of the cycle and advances the guards.

use thiserror::Error;

use crate::axi::{Cycle, CycleSample, Direction};
use crate::config::{LogLevel, Reg, RegError, RegisterFile};
use crate::fault::{FaultUnit, IsolationState, RecoveryOutputs};
use crate::guard::budget::check_fits;
use crate::guard::{Admission, BudgetError, Guard, MonitorTable, SlotMonitor, Variant, Verdict, ViolationKind};
use crate::ott::{Capacity, LdEntry, SlotIdx};
use crate::stats::{Event, EventKind, Outcome, StatsCollector};

pub const MAX_UNIQ_IDS: u16 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TmuError {
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error("invalid capacity: {0}")]
    Capacity(String),
}

/// What the unit drives during the current cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CycleStart {
    pub outputs: RecoveryOutputs,
    /// The external reset finished in this cycle.
    pub reset_done: bool,
}

#[derive(Debug, Clone)]
pub struct Tmu {
    regs: RegisterFile,
    ott: MonitorTable,
    guard: Guard,
    fault: FaultUnit,
    stats: StatsCollector,
    verdicts: Vec<(Cycle, Verdict)>,
    capture_dumps: bool,
    dumps: Vec<(Cycle, String)>,
}

pub fn validate_capacity(cap: Capacity) -> Result<(), TmuError> {
    if !(1..=MAX_UNIQ_IDS).contains(&cap.max_uniq_ids) {
        return Err(TmuError::Capacity(format!("max_uniq_ids {} not in 1..={MAX_UNIQ_IDS}", cap.max_uniq_ids)));
    }
    if cap.txn_per_uniq_id == 0 || cap.max_outstanding == 0 {
        return Err(TmuError::Capacity("zero transactions per ID or zero outstanding".into()));
    }
    let product = u32::from(cap.max_uniq_ids) * u32::from(cap.txn_per_uniq_id);
    if u32::from(cap.max_outstanding) > product {
        return Err(TmuError::Capacity(format!(
            "max_outstanding {} exceeds max_uniq_ids x txn_per_uniq_id = {product}",
            cap.max_outstanding
        )));
    }
    Ok(())
}

impl Tmu {
    pub fn new(regs: RegisterFile, capacity: Capacity, reset_latency: Cycle) -> Result<Self, TmuError> {
        validate_capacity(capacity)?;
        check_fits(&regs.budgets, regs.variant, regs.prescaler, regs.counter_bits, capacity.max_outstanding.into())?;
        Ok(Tmu {
            ott: MonitorTable::new(capacity),
            guard: Guard::new(regs.variant, regs.prescaler, regs.budgets),
            fault: FaultUnit::new(reset_latency, regs.irq_enable),
            stats: StatsCollector::default(),
            verdicts: Vec::new(),
            capture_dumps: false,
            dumps: Vec::new(),
            regs,
        })
    }

    pub fn regs(&self) -> &RegisterFile {
        &self.regs
    }

    pub fn variant(&self) -> Variant {
        self.regs.variant
    }

    pub fn table(&self) -> &MonitorTable {
        &self.ott
    }

    pub fn state(&self) -> IsolationState {
        self.fault.state()
    }

    pub fn enabled(&self) -> bool {
        self.regs.enable
    }

    pub fn severed(&self) -> bool {
        self.regs.enable && self.fault.severed()
    }

    pub fn irq_pulses(&self) -> u64 {
        self.fault.irq_pulses()
    }

    pub fn isolations(&self) -> u64 {
        self.fault.isolations()
    }

    /// Every verdict produced, with its cycle.
    pub fn verdicts(&self) -> &[(Cycle, Verdict)] {
        &self.verdicts
    }

    pub fn stats(&self) -> &StatsCollector {
        &self.stats
    }

    pub fn into_stats(self) -> StatsCollector {
        self.stats
    }

    pub fn dump_ott(&self) -> String {
        self.ott.dump()
    }

    /// Keep a table dump taken just before each isolation.
    pub fn set_capture_dumps(&mut self, on: bool) {
        self.capture_dumps = on;
    }

    pub fn dumps(&self) -> &[(Cycle, String)] {
        &self.dumps
    }

    /// Whether a new request with this ID would be accepted now. A stalled
    /// request must be held back by the manager port.
    pub fn can_admit(&self, raw_id: u32) -> bool {
        if !self.regs.enable {
            return true;
        }
        self.fault.is_monitoring() && self.ott.admission(raw_id).is_none()
    }

    pub fn read_reg(&self, offset: u32) -> Result<u32, RegError> {
        self.regs.read_reg(offset)
    }

    /// Register write between cycles. Budget changes apply to transactions
    /// admitted afterwards.
    pub fn write_reg(&mut self, offset: u32, value: u32) -> Result<(), RegError> {
        let reg = Reg::at(offset).ok_or(RegError::InvalidOffset(offset))?;
        let before = self.regs.clone();
        self.regs.write(reg, value, self.ott.occupancy() > 0)?;
        let cap = self.ott.capacity();
        let r = &self.regs;
        if check_fits(&r.budgets, r.variant, r.prescaler, r.counter_bits, cap.max_outstanding.into()).is_err() {
            self.regs = before;
            return Err(RegError::RangeViolation { reg, value });
        }
        self.guard.set_budgets(r.budgets);
        self.guard.set_variant(r.variant);
        self.guard.set_prescaler(r.prescaler);
        self.fault.set_irq_enable(r.irq_enable);
        if before.enable && !r.enable {
            self.ott.abort_all();
            self.guard.reset();
            self.fault.clear();
        }
        Ok(())
    }

    fn log(&mut self, cycle: Cycle, kind: EventKind, slot: Option<SlotIdx>, detail: String, action: &str) {
        let keep = match self.regs.log_level {
            LogLevel::Off => false,
            LogLevel::Errors => matches!(
                kind,
                EventKind::Timeout | EventKind::Violation | EventKind::Isolate | EventKind::Swallowed
            ),
            LogLevel::Full => true,
        };
        if keep {
            self.stats.event(Event { cycle, kind, slot, detail, action: action.to_string() });
        }
    }

    pub fn begin_cycle(&mut self, cycle: Cycle) -> CycleStart {
        if !self.regs.enable {
            return CycleStart::default();
        }
        if !self.fault.is_monitoring() {
            let (outputs, reset_done) = self.fault.advance(cycle);
            if let Some(r) = outputs.synthetic {
                self.log(cycle, EventKind::Slverr, Some(r.slot), r.dir.to_string(), "slverr");
            }
            if reset_done {
                self.log(cycle, EventKind::ResetDone, None, String::new(), "reset_done");
            }
            if !self.fault.is_monitoring() {
                return CycleStart { outputs, reset_done };
            }
            self.log(cycle, EventKind::Resume, None, String::new(), "resume");
            return CycleStart { outputs, reset_done };
        }
        let verdicts = self.guard.tick_counters(&mut self.ott, cycle);
        let outputs = self.isolate(verdicts, cycle);
        CycleStart { outputs, reset_done: false }
    }

    /// Observes the handshakes of the cycle. Returns the verdicts raised.
    pub fn observe(&mut self, s: &CycleSample) -> Vec<Verdict> {
        if !self.regs.enable || !self.fault.is_monitoring() {
            return Vec::new();
        }
        let cycle = s.cycle;
        for adm in self.guard.admit(&mut self.ott, s).into_iter().flatten() {
            if let Admission::Tracked(slot) = adm {
                let d = self.ott.get(slot).expect("just admitted").desc;
                self.stats.open(slot, d.dir, d.id.raw, d.burst_len, d.issue_cycle);
            }
        }
        let mut verdicts = Vec::new();
        let mut done = Vec::new();
        match self.guard.classify(&self.ott, s) {
            Ok(events) => {
                verdicts.extend(self.guard.step_write(&mut self.ott, events, s, &mut done));
                verdicts.extend(self.guard.step_read(&mut self.ott, events, s, &mut done));
            }
            Err(_) => verdicts.push(Verdict::Violation { slot: None, kind: ViolationKind::OrphanW }),
        }
        for (slot, e) in done {
            self.close_record(slot, &e, Outcome::Done, cycle);
        }
        self.isolate(verdicts.clone(), cycle);
        verdicts
    }

    fn close_record(&mut self, slot: SlotIdx, e: &LdEntry<SlotMonitor>, outcome: Outcome, cycle: Cycle) {
        if self.regs.variant == Variant::FullCounter {
            for sp in &e.monitor.spans {
                self.stats.record_phase(slot, sp.phase, sp.entry, sp.exit);
            }
        }
        self.stats.close(slot, outcome, cycle);
        let m = &mut self.regs.stats;
        match outcome {
            Outcome::Done => {
                m.done = m.done.saturating_add(1);
                let lat = u32::try_from(cycle - e.desc.issue_cycle).unwrap_or(u32::MAX);
                m.max_latency = m.max_latency.max(lat);
            }
            Outcome::Aborted => m.aborted = m.aborted.saturating_add(1),
        }
    }

    fn isolate(&mut self, verdicts: Vec<Verdict>, cycle: Cycle) -> RecoveryOutputs {
        for v in &verdicts {
            self.verdicts.push((cycle, *v));
            let kind = match v {
                Verdict::Timeout { .. } => EventKind::Timeout,
                Verdict::Violation { .. } => EventKind::Violation,
            };
            self.log(cycle, kind, v.slot(), v.label().to_string(), "detect");
        }
        let first = verdicts.first().copied();
        if first.is_some() && !self.fault.is_monitoring() {
            self.log(cycle, EventKind::Swallowed, first.and_then(|v| v.slot()), String::new(), "none");
        }
        if self.capture_dumps && first.is_some() && self.fault.is_monitoring() {
            self.dumps.push((cycle, self.ott.dump()));
        }
        let (outputs, aborted) = self.fault.on_verdict(first, cycle, &mut self.ott);
        if outputs.reset_req {
            self.guard.reset();
            let mut action = String::from("sever,abort,slverr,reset_req");
            if outputs.irq {
                action.push_str(",irq");
            }
            let slot = first.and_then(|v| v.slot());
            let detail = format!("aborted={}", aborted.len());
            self.log(cycle, EventKind::Isolate, slot, detail, &action);
            for (slot, e) in &aborted {
                self.close_record(*slot, e, Outcome::Aborted, cycle);
            }
            let m = &mut self.regs.stats;
            m.detections = m.detections.saturating_add(1);
            m.irq_count = u32::try_from(self.fault.irq_pulses()).unwrap_or(u32::MAX);
        }
        outputs
    }

    /// Direction of a live slot, for response routing.
    pub fn slot_dir(&self, slot: SlotIdx) -> Option<Direction> {
        self.ott.get(slot).map(|e| e.desc.dir)
    }
}
