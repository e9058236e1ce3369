// SPDX-License-Identifier: Apache-2.0

//! Software-visible register file.
//!
//! Registers sit at 4-byte strides from offset 0x00 in the order of
//! [`Reg::ALL`]. Config-file keys are the lower-case register names.
//!
//! | offset | name | access |
//! |--------|------|--------|
//! | 0x00 | enable | rw |
//! | 0x04 | variant (0 = tc, 1 = fc) | rw, idle only |
//! | 0x08 | prescaler_step | rw, idle only |
//! | 0x0c | irq_enable | rw |
//! | 0x10 | log_level (0 off, 1 errors, 2 full) | rw |
//! | 0x14 | adaptive_budget | rw |
//! | 0x18 | counter_bits | rw, idle only |
//! | 0x1c | queue_wait_base | rw |
//! | 0x20 | queue_wait_per_outstanding | rw |
//! | 0x24 | unit_budget_per_beat | rw |
//! | 0x28 | tc_budget | rw |
//! | 0x2c..0x40 | budget_p1..budget_p6 | rw |
//! | 0x44..0x54 | budget_r1..budget_r5 | rw |
//! | 0x58 | stat_done | ro |
//! | 0x5c | stat_aborted | ro |
//! | 0x60 | stat_irq_count | ro |
//! | 0x64 | stat_detections | ro |
//! | 0x68 | stat_max_latency | ro |

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::guard::{BudgetConfig, Prescaler, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogLevel {
    Off,
    Errors,
    #[default]
    Full,
}

impl LogLevel {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(LogLevel::Off),
            1 => Some(LogLevel::Errors),
            2 => Some(LogLevel::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reg {
    Enable,
    Variant,
    PrescalerStep,
    IrqEnable,
    LogLevel,
    AdaptiveBudget,
    CounterBits,
    QueueWaitBase,
    QueueWaitPerOutstanding,
    UnitBudgetPerBeat,
    TcBudget,
    BudgetP(u8),
    BudgetR(u8),
    StatDone,
    StatAborted,
    StatIrqCount,
    StatDetections,
    StatMaxLatency,
}

impl Reg {
    pub const ALL: [Reg; 27] = [
        Reg::Enable,
        Reg::Variant,
        Reg::PrescalerStep,
        Reg::IrqEnable,
        Reg::LogLevel,
        Reg::AdaptiveBudget,
        Reg::CounterBits,
        Reg::QueueWaitBase,
        Reg::QueueWaitPerOutstanding,
        Reg::UnitBudgetPerBeat,
        Reg::TcBudget,
        Reg::BudgetP(1),
        Reg::BudgetP(2),
        Reg::BudgetP(3),
        Reg::BudgetP(4),
        Reg::BudgetP(5),
        Reg::BudgetP(6),
        Reg::BudgetR(1),
        Reg::BudgetR(2),
        Reg::BudgetR(3),
        Reg::BudgetR(4),
        Reg::BudgetR(5),
        Reg::StatDone,
        Reg::StatAborted,
        Reg::StatIrqCount,
        Reg::StatDetections,
        Reg::StatMaxLatency,
    ];

    pub fn offset(self) -> u32 {
        Reg::ALL.iter().position(|&r| r == self).expect("register in map") as u32 * 4
    }

    pub fn at(offset: u32) -> Option<Reg> {
        if !offset.is_multiple_of(4) {
            return None;
        }
        Reg::ALL.get((offset / 4) as usize).copied()
    }

    pub fn name(self) -> String {
        match self {
            Reg::Enable => "enable".into(),
            Reg::Variant => "variant".into(),
            Reg::PrescalerStep => "prescaler_step".into(),
            Reg::IrqEnable => "irq_enable".into(),
            Reg::LogLevel => "log_level".into(),
            Reg::AdaptiveBudget => "adaptive_budget".into(),
            Reg::CounterBits => "counter_bits".into(),
            Reg::QueueWaitBase => "queue_wait_base".into(),
            Reg::QueueWaitPerOutstanding => "queue_wait_per_outstanding".into(),
            Reg::UnitBudgetPerBeat => "unit_budget_per_beat".into(),
            Reg::TcBudget => "tc_budget".into(),
            Reg::BudgetP(n) => format!("budget_p{n}"),
            Reg::BudgetR(n) => format!("budget_r{n}"),
            Reg::StatDone => "stat_done".into(),
            Reg::StatAborted => "stat_aborted".into(),
            Reg::StatIrqCount => "stat_irq_count".into(),
            Reg::StatDetections => "stat_detections".into(),
            Reg::StatMaxLatency => "stat_max_latency".into(),
        }
    }

    pub fn writable(self) -> bool {
        !matches!(
            self,
            Reg::StatDone | Reg::StatAborted | Reg::StatIrqCount | Reg::StatDetections | Reg::StatMaxLatency
        )
    }

    /// Registers that may only change while nothing is in flight.
    pub fn idle_only(self) -> bool {
        matches!(self, Reg::Variant | Reg::PrescalerStep | Reg::CounterBits)
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Reg {
    type Err = RegError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Reg::ALL.iter().copied().find(|r| r.name() == key).ok_or(RegError::UnknownName(key))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegError {
    #[error("no writable register at offset {0:#x}")]
    InvalidOffset(u32),
    #[error("register `{0}` cannot change while transactions are in flight")]
    InFlightRestriction(Reg),
    #[error("value {value} out of range for register `{reg}`")]
    RangeViolation { reg: Reg, value: u32 },
    #[error("unknown register `{0}`")]
    UnknownName(String),
}

/// Read-only statistics mirrored into the register file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatMirror {
    pub done: u32,
    pub aborted: u32,
    pub irq_count: u32,
    pub detections: u32,
    pub max_latency: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    pub enable: bool,
    pub variant: Variant,
    pub prescaler: Prescaler,
    pub irq_enable: bool,
    pub log_level: LogLevel,
    pub counter_bits: u32,
    pub budgets: BudgetConfig,
    pub stats: StatMirror,
}

impl Default for RegisterFile {
    fn default() -> Self {
        RegisterFile {
            enable: true,
            variant: Variant::FullCounter,
            prescaler: Prescaler::default(),
            irq_enable: true,
            log_level: LogLevel::default(),
            counter_bits: 16,
            budgets: BudgetConfig::default(),
            stats: StatMirror::default(),
        }
    }
}

impl RegisterFile {
    pub fn read(&self, reg: Reg) -> u32 {
        let b = &self.budgets;
        match reg {
            Reg::Enable => u32::from(self.enable),
            Reg::Variant => match self.variant {
                Variant::TinyCounter => 0,
                Variant::FullCounter => 1,
            },
            Reg::PrescalerStep => self.prescaler.step(),
            Reg::IrqEnable => u32::from(self.irq_enable),
            Reg::LogLevel => self.log_level as u32,
            Reg::AdaptiveBudget => u32::from(b.adaptive),
            Reg::CounterBits => self.counter_bits,
            Reg::QueueWaitBase => b.queue_wait_base,
            Reg::QueueWaitPerOutstanding => b.queue_wait_per_outstanding,
            Reg::UnitBudgetPerBeat => b.unit_budget_per_beat,
            Reg::TcBudget => b.tc_total,
            Reg::BudgetP(n) => b.write[n as usize - 1],
            Reg::BudgetR(n) => b.read[n as usize - 1],
            Reg::StatDone => self.stats.done,
            Reg::StatAborted => self.stats.aborted,
            Reg::StatIrqCount => self.stats.irq_count,
            Reg::StatDetections => self.stats.detections,
            Reg::StatMaxLatency => self.stats.max_latency,
        }
    }

    pub fn read_reg(&self, offset: u32) -> Result<u32, RegError> {
        Reg::at(offset).map(|r| self.read(r)).ok_or(RegError::InvalidOffset(offset))
    }

    /// Writes a register. `in_flight` tells whether the monitor currently
    /// tracks any transaction.
    pub fn write(&mut self, reg: Reg, value: u32, in_flight: bool) -> Result<(), RegError> {
        if !reg.writable() {
            return Err(RegError::InvalidOffset(reg.offset()));
        }
        if in_flight && reg.idle_only() && self.read(reg) != value {
            return Err(RegError::InFlightRestriction(reg));
        }
        let range = || RegError::RangeViolation { reg, value };
        let flag = |v: u32| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(range()),
        };
        let budget = |v: u32| if v == 0 { Err(range()) } else { Ok(v) };
        let b = &mut self.budgets;
        match reg {
            Reg::Enable => self.enable = flag(value)?,
            Reg::Variant => {
                self.variant = match value {
                    0 => Variant::TinyCounter,
                    1 => Variant::FullCounter,
                    _ => return Err(range()),
                }
            }
            Reg::PrescalerStep => self.prescaler = Prescaler::new(value).map_err(|_| range())?,
            Reg::IrqEnable => self.irq_enable = flag(value)?,
            Reg::LogLevel => self.log_level = LogLevel::from_u32(value).ok_or_else(range)?,
            Reg::AdaptiveBudget => b.adaptive = flag(value)?,
            Reg::CounterBits => {
                if !(1..=32).contains(&value) {
                    return Err(range());
                }
                self.counter_bits = value;
            }
            Reg::QueueWaitBase => b.queue_wait_base = value,
            Reg::QueueWaitPerOutstanding => b.queue_wait_per_outstanding = value,
            Reg::UnitBudgetPerBeat => b.unit_budget_per_beat = budget(value)?,
            Reg::TcBudget => b.tc_total = budget(value)?,
            Reg::BudgetP(n) => b.write[n as usize - 1] = budget(value)?,
            Reg::BudgetR(n) => b.read[n as usize - 1] = budget(value)?,
            _ => unreachable!("read-only registers rejected above"),
        }
        Ok(())
    }

    pub fn write_reg(&mut self, offset: u32, value: u32, in_flight: bool) -> Result<(), RegError> {
        let reg = Reg::at(offset).ok_or(RegError::InvalidOffset(offset))?;
        self.write(reg, value, in_flight)
    }

    /// Parses a textual value for `reg`, accepting names for enumerations.
    pub fn parse_value(reg: Reg, text: &str) -> Result<u32, String> {
        let t = text.trim();
        match reg {
            Reg::Variant => t.parse::<Variant>().map(|v| u32::from(v == Variant::FullCounter)),
            Reg::LogLevel => match t.to_ascii_lowercase().as_str() {
                "off" => Ok(0),
                "errors" => Ok(1),
                "full" => Ok(2),
                _ => t.parse().map_err(|e| format!("{reg}: {e}")),
            },
            Reg::Enable | Reg::IrqEnable | Reg::AdaptiveBudget => match t.to_ascii_lowercase().as_str() {
                "true" | "on" | "yes" => Ok(1),
                "false" | "off" | "no" => Ok(0),
                _ => t.parse().map_err(|e| format!("{reg}: {e}")),
            },
            _ => t.parse().map_err(|e| format!("{reg}: {e}")),
        }
    }
}
