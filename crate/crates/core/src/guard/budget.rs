// SPDX-License-Identifier: Apache-2.0

//! Adaptive time budgets.
//!
//! A budget has a queue-waiting part that grows with the traffic already
//! outstanding in the table, and a data-transfer part proportional to the
//! burst length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::counter::Prescaler;
use super::{Phase, ReadPhase, Variant, WritePhase};
use crate::axi::{Direction, TxnDescriptor, MAX_BURST_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Fixed per-phase write budgets, P1..P6. P2 and P4 are replaced by the
    /// adaptive terms when `adaptive` is set.
    pub write: [u32; 6],
    /// Fixed per-phase read budgets, R1..R5. R2 and R4 adapt like P2 and P4.
    pub read: [u32; 5],
    /// Fixed whole-transaction budget, used by the tiny-counter variant when
    /// `adaptive` is clear.
    pub tc_total: u32,
    pub adaptive: bool,
    pub unit_budget_per_beat: u32,
    pub queue_wait_base: u32,
    pub queue_wait_per_outstanding: u32,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            write: [16, 64, 16, 256, 16, 16],
            read: [16, 64, 16, 256, 16],
            tc_total: 512,
            adaptive: true,
            unit_budget_per_beat: 2,
            queue_wait_base: 32,
            queue_wait_per_outstanding: 32,
        }
    }
}

/// Budgets latched for one transaction at enqueue time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budgets {
    /// Indexed by phase ordinal; reads use the first five.
    pub phases: [u32; 6],
    pub total: u32,
}

impl Budgets {
    pub fn for_phase(&self, phase: Phase) -> u32 {
        match phase {
            Phase::Write(p) => self.phases[p as usize],
            Phase::Read(p) => self.phases[p as usize],
            Phase::Transaction => self.total,
        }
    }

    pub fn max(&self, variant: Variant) -> u32 {
        match variant {
            Variant::TinyCounter => self.total,
            Variant::FullCounter => self.phases.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BudgetError {
    #[error("{what} budget is zero; every budget must be at least one cycle")]
    Zero { what: String },
    #[error("{what} budget of {cycles} cycles exceeds the {bits}-bit counter range at prescaler step {step} ({max} cycles)")]
    Overflow { what: String, cycles: u64, bits: u32, step: u32, max: u64 },
}

/// Queue-waiting term for a transaction admitted with `occupancy` others in flight.
pub fn queue_wait(cfg: &BudgetConfig, occupancy: usize) -> u32 {
    let per = u64::from(cfg.queue_wait_per_outstanding) * occupancy as u64;
    (u64::from(cfg.queue_wait_base) + per).min(u64::from(u32::MAX)) as u32
}

pub fn data_transfer(cfg: &BudgetConfig, burst_len: u16) -> u32 {
    cfg.unit_budget_per_beat.saturating_mul(u32::from(burst_len))
}

pub fn compute_budget(desc: &TxnDescriptor, occupancy: usize, cfg: &BudgetConfig, variant: Variant) -> Budgets {
    debug_assert!(desc.burst_len >= 1);
    let qw = queue_wait(cfg, occupancy);
    let data = data_transfer(cfg, desc.burst_len);
    let mut phases = [0u32; 6];
    match desc.dir {
        Direction::Write => phases.copy_from_slice(&cfg.write),
        Direction::Read => phases[..5].copy_from_slice(&cfg.read),
    }
    let total = if cfg.adaptive {
        phases[WritePhase::DataPhaseEntry as usize] = qw;
        phases[WritePhase::BurstTransfer as usize] = data;
        qw.saturating_add(data)
    } else {
        cfg.tc_total
    };
    if variant == Variant::TinyCounter {
        // Only the whole-transaction counter exists.
        phases = [0; 6];
    }
    Budgets { phases, total }
}

/// Rejects configurations whose largest possible budget cannot be held by a
/// `counter_bits` counter at the given prescaler step.
pub fn check_fits(
    cfg: &BudgetConfig,
    variant: Variant,
    prescaler: Prescaler,
    counter_bits: u32,
    max_outstanding: usize,
) -> Result<(), BudgetError> {
    let max_cycles = prescaler.max_budget(counter_bits);
    let check = |what: String, cycles: u64| -> Result<(), BudgetError> {
        if cycles == 0 {
            return Err(BudgetError::Zero { what });
        }
        if cycles > max_cycles {
            return Err(BudgetError::Overflow {
                what,
                cycles,
                bits: counter_bits,
                step: prescaler.step(),
                max: max_cycles,
            });
        }
        Ok(())
    };
    let worst_qw = u64::from(cfg.queue_wait_base)
        + u64::from(cfg.queue_wait_per_outstanding) * max_outstanding.saturating_sub(1) as u64;
    let worst_data = u64::from(cfg.unit_budget_per_beat) * u64::from(MAX_BURST_LEN);
    match variant {
        Variant::TinyCounter => {
            let total = if cfg.adaptive {
                check("queue_wait_base".into(), u64::from(cfg.queue_wait_base).max(1))?;
                check("unit_budget_per_beat".into(), u64::from(cfg.unit_budget_per_beat))?;
                worst_qw + worst_data
            } else {
                u64::from(cfg.tc_total)
            };
            check("tc_total".into(), total)
        }
        Variant::FullCounter => {
            for (i, &b) in cfg.write.iter().enumerate() {
                let adaptive = cfg.adaptive && (i == 1 || i == 3);
                if !adaptive {
                    check(WritePhase::ALL[i].label().into(), u64::from(b))?;
                }
            }
            for (i, &b) in cfg.read.iter().enumerate() {
                let adaptive = cfg.adaptive && (i == 1 || i == 3);
                if !adaptive {
                    check(ReadPhase::ALL[i].label().into(), u64::from(b))?;
                }
            }
            if cfg.adaptive {
                // A zero base with an empty table would give a zero budget.
                check("queue_wait_base".into(), u64::from(cfg.queue_wait_base))?;
                check("queue_wait".into(), worst_qw)?;
                check("unit_budget_per_beat".into(), u64::from(cfg.unit_budget_per_beat))?;
                check("data_transfer".into(), worst_data)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axi::TxnId;

    fn write(len: u16) -> TxnDescriptor {
        TxnDescriptor { dir: Direction::Write, id: TxnId::raw(0), addr: 0, burst_len: len, issue_cycle: 0 }
    }

    fn ethernet() -> BudgetConfig {
        BudgetConfig {
            write: [10, 0, 10, 0, 10, 10],
            read: [10, 0, 10, 0, 10],
            tc_total: 320,
            adaptive: true,
            unit_budget_per_beat: 1,
            queue_wait_base: 70,
            queue_wait_per_outstanding: 0,
        }
    }

    #[test]
    fn tiny_counter_250_beats_gets_320() {
        let b = compute_budget(&write(250), 0, &ethernet(), Variant::TinyCounter);
        assert_eq!(b.total, 320);
        assert_eq!(b.phases, [0; 6]);
    }

    #[test]
    fn full_counter_phase_budgets() {
        let b = compute_budget(&write(250), 0, &ethernet(), Variant::FullCounter);
        assert_eq!(b.for_phase(Phase::Write(WritePhase::AddrHandshake)), 10);
        assert_eq!(b.for_phase(Phase::Write(WritePhase::BurstTransfer)), 250);
        assert_eq!(b.for_phase(Phase::Write(WritePhase::DataPhaseEntry)), 70);
    }

    #[test]
    fn minimal_burst() {
        let cfg = BudgetConfig { unit_budget_per_beat: 1, queue_wait_base: 0, queue_wait_per_outstanding: 0, ..ethernet() };
        let b = compute_budget(&write(1), 0, &cfg, Variant::FullCounter);
        assert_eq!(b.phases[WritePhase::BurstTransfer as usize], 1);
    }

    #[test]
    fn queue_wait_scales_with_occupancy() {
        let cfg = BudgetConfig { queue_wait_per_outstanding: 5, ..ethernet() };
        assert_eq!(compute_budget(&write(10), 4, &cfg, Variant::TinyCounter).total, 70 + 20 + 10);
    }

    #[test]
    fn fixed_budgets_when_not_adaptive() {
        let cfg = BudgetConfig { adaptive: false, write: [1, 2, 3, 4, 5, 6], ..ethernet() };
        assert_eq!(compute_budget(&write(250), 3, &cfg, Variant::FullCounter).phases, [1, 2, 3, 4, 5, 6]);
        assert_eq!(compute_budget(&write(250), 3, &cfg, Variant::TinyCounter).total, 320);
    }

    #[test]
    fn overflow_rejected() {
        let p1 = Prescaler::new(1).unwrap();
        // 320 cycles do not fit 8 bits without a prescaler.
        assert!(matches!(
            check_fits(&ethernet(), Variant::TinyCounter, p1, 8, 1),
            Err(BudgetError::Overflow { cycles: 326, .. })
        ));
        assert!(check_fits(&ethernet(), Variant::TinyCounter, p1, 9, 1).is_ok());
        // A step of 32 brings it into a 4-bit counter: ceil(326/32) = 11 < 16.
        assert!(check_fits(&ethernet(), Variant::TinyCounter, Prescaler::new(32).unwrap(), 4, 1).is_ok());
        let zero = BudgetConfig { write: [0, 0, 10, 0, 10, 10], ..ethernet() };
        assert!(matches!(check_fits(&zero, Variant::FullCounter, p1, 16, 1), Err(BudgetError::Zero { .. })));
    }
}
