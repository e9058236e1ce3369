// SPDX-License-Identifier: Apache-2.0

//! Run configuration and its flat `key = value` file format.
//!
//! Register names from [`crate::config::Reg`] are accepted as keys, plus the
//! harness keys listed in [`SimConfig::set`]. `fault` may repeat; each
//! occurrence appends one `kind,target_txn,trigger,seed` entry. A `preset`
//! line replaces everything set before it.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::axi::{Cycle, MAX_BURST_LEN};
use crate::config::{Reg, RegisterFile};
use crate::fault::ResetUnit;
use crate::guard::{BudgetConfig, Variant};
use crate::injector::{parse_campaign, FaultSpec, Trigger};
use crate::ott::Capacity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

/// Inclusive integer range drawn uniformly; `a` or `a-b` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
}

impl Span {
    pub fn fixed(v: u32) -> Self {
        Span { lo: v, hi: v }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("`{}`: {e}", t.trim()));
        let span = match s.split_once('-') {
            Some((a, b)) => Span { lo: num(a)?, hi: num(b)? },
            None => Span::fixed(num(s)?),
        };
        if span.lo > span.hi {
            return Err(format!("empty range `{s}`"));
        }
        Ok(span)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficSpec {
    pub n_txns: usize,
    pub burst_len: Span,
    /// Probability that a transaction is a read.
    pub read_ratio: f64,
    /// Idle cycles between one request being accepted and the next presented.
    pub gap: Span,
    /// Raw IDs are drawn uniformly from `0..n_ids`.
    pub n_ids: u32,
    /// Manager-side limit on transactions in flight.
    pub manager_outstanding: usize,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            n_txns: 32,
            burst_len: Span { lo: 1, hi: 16 },
            read_ratio: 0.5,
            gap: Span { lo: 0, hi: 4 },
            n_ids: 4,
            manager_outstanding: 128,
        }
    }
}

/// Fixed response latencies of the subordinate model, plus up to `jitter`
/// extra cycles drawn per request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubordinateSpec {
    pub aw_ready_delay: u32,
    /// Before the first beat of each burst.
    pub w_ready_delay: u32,
    /// From the last W beat to `b_valid`.
    pub b_delay: u32,
    pub ar_ready_delay: u32,
    /// From AR acceptance to the first `r_valid`.
    pub r_delay: u32,
    pub jitter: u32,
}

impl Default for SubordinateSpec {
    fn default() -> Self {
        SubordinateSpec { aw_ready_delay: 1, w_ready_delay: 1, b_delay: 2, ar_ready_delay: 1, r_delay: 2, jitter: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub regs: RegisterFile,
    pub max_uniq_ids: u16,
    /// Defaults to an even share of `max_outstanding`, or 8.
    pub txn_per_uniq_id: Option<u16>,
    /// Defaults to `max_uniq_ids * txn_per_uniq_id`.
    pub max_outstanding: Option<u16>,
    pub reset_latency: Cycle,
    /// Without a monitor the manager talks to the subordinate directly.
    pub attach: bool,
    pub traffic: TrafficSpec,
    pub subordinate: SubordinateSpec,
    pub faults: Vec<FaultSpec>,
    pub max_cycles: Cycle,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            regs: RegisterFile::default(),
            max_uniq_ids: 4,
            txn_per_uniq_id: None,
            max_outstanding: None,
            reset_latency: ResetUnit::DEFAULT_LATENCY,
            attach: true,
            traffic: TrafficSpec::default(),
            subordinate: SubordinateSpec::default(),
            faults: Vec::new(),
            max_cycles: 100_000,
            seed: 0,
        }
    }
}

/// Harness keys, in canonical order.
const HARNESS_KEYS: [&str; 20] = [
    "max_uniq_ids",
    "txn_per_uniq_id",
    "max_outstanding",
    "reset_latency",
    "attach",
    "n_txns",
    "burst_len",
    "read_ratio",
    "gap",
    "n_ids",
    "manager_outstanding",
    "aw_ready_delay",
    "w_ready_delay",
    "b_delay",
    "ar_ready_delay",
    "r_delay",
    "jitter",
    "max_cycles",
    "seed",
    "fault",
];

impl SimConfig {
    /// Single 250-beat write on an otherwise idle port with a 320-cycle
    /// transaction budget (70 cycles of queue wait plus one per beat) and
    /// 10-cycle handshake phases.
    pub fn ethernet250() -> Self {
        let mut c = SimConfig::default();
        c.regs.budgets = BudgetConfig {
            write: [10, 70, 10, 250, 10, 10],
            read: [10, 70, 10, 250, 10],
            tc_total: 320,
            adaptive: true,
            unit_budget_per_beat: 1,
            queue_wait_base: 70,
            queue_wait_per_outstanding: 0,
        };
        c.traffic = TrafficSpec {
            n_txns: 1,
            burst_len: Span::fixed(250),
            read_ratio: 0.0,
            gap: Span::fixed(0),
            n_ids: 1,
            manager_outstanding: 1,
        };
        c.subordinate = SubordinateSpec { aw_ready_delay: 0, w_ready_delay: 0, b_delay: 0, ar_ready_delay: 0, r_delay: 0, jitter: 0 };
        c.max_cycles = 2_000;
        c
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(SimConfig::default()),
            "ethernet250" => Some(SimConfig::ethernet250()),
            _ => None,
        }
    }

    pub fn capacity(&self) -> Capacity {
        let ids = self.max_uniq_ids;
        match (self.txn_per_uniq_id, self.max_outstanding) {
            (Some(per), Some(total)) => Capacity { max_uniq_ids: ids, txn_per_uniq_id: per, max_outstanding: total },
            (Some(per), None) => Capacity::product(ids, per),
            (None, Some(total)) => Capacity::with_total(ids, total),
            (None, None) => Capacity::product(ids, 8),
        }
    }

    pub fn variant(&self) -> Variant {
        self.regs.variant
    }

    /// Applies one `key = value` setting.
    ///
    /// Besides register names: the keys in `HARNESS_KEYS`, `preset`,
    /// `capacity` (total pool, shared evenly over the IDs), `prescaler`
    /// (alias of `prescaler_step`), `campaign` (path of a campaign file) and
    /// `fault_position` (moves every fault to `beat:N`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: String| ConfigError::Value { key: key.to_string(), msg };
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        fn flag(v: &str) -> Result<bool, String> {
            match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(format!("expected a boolean, got `{v}`")),
            }
        }
        let t = &mut self.traffic;
        let s = &mut self.subordinate;
        match key {
            "preset" => *self = SimConfig::preset(value).ok_or_else(|| bad(format!("unknown preset `{value}`")))?,
            "max_uniq_ids" => self.max_uniq_ids = num(value).map_err(bad)?,
            "txn_per_uniq_id" => self.txn_per_uniq_id = Some(num(value).map_err(bad)?),
            "max_outstanding" => self.max_outstanding = Some(num(value).map_err(bad)?),
            "capacity" => {
                self.max_outstanding = Some(num(value).map_err(bad)?);
                self.txn_per_uniq_id = None;
            }
            "reset_latency" => self.reset_latency = num(value).map_err(bad)?,
            "attach" => self.attach = flag(value).map_err(bad)?,
            "n_txns" => t.n_txns = num(value).map_err(bad)?,
            "burst_len" => {
                let span: Span = value.parse().map_err(bad)?;
                if span.lo == 0 || span.hi > u32::from(MAX_BURST_LEN) {
                    return Err(bad(format!("burst length must lie in 1..={MAX_BURST_LEN}")));
                }
                t.burst_len = span;
            }
            "read_ratio" => {
                let r: f64 = num(value).map_err(bad)?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(bad("must lie in [0, 1]".into()));
                }
                t.read_ratio = r;
            }
            "gap" => t.gap = value.parse().map_err(bad)?,
            "n_ids" => t.n_ids = num::<u32>(value).map_err(bad)?.max(1),
            "manager_outstanding" => t.manager_outstanding = num::<usize>(value).map_err(bad)?.max(1),
            "aw_ready_delay" => s.aw_ready_delay = num(value).map_err(bad)?,
            "w_ready_delay" => s.w_ready_delay = num(value).map_err(bad)?,
            "b_delay" => s.b_delay = num(value).map_err(bad)?,
            "ar_ready_delay" => s.ar_ready_delay = num(value).map_err(bad)?,
            "r_delay" => s.r_delay = num(value).map_err(bad)?,
            "jitter" => s.jitter = num(value).map_err(bad)?,
            "max_cycles" => self.max_cycles = num(value).map_err(bad)?,
            "seed" => self.seed = num(value).map_err(bad)?,
            "fault" => self.faults.push(value.parse().map_err(|e| bad(format!("{e}")))?),
            "campaign" => {
                let text = std::fs::read_to_string(value).map_err(|e| bad(e.to_string()))?;
                self.faults.extend(parse_campaign(&text).map_err(|e| bad(e.to_string()))?);
            }
            "fault_position" => {
                let beat: u16 = num(value).map_err(bad)?;
                self.faults.iter_mut().for_each(|f| f.trigger = Trigger::AtBeat(beat));
            }
            "prescaler" => return self.set("prescaler_step", value),
            _ => {
                let reg: Reg = key.parse().map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
                let v = RegisterFile::parse_value(reg, value).map_err(bad)?;
                self.regs.write(reg, v, false).map_err(|e| bad(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Parses a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            self.set(k, v).map_err(|e| ConfigError::Syntax { line: i + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = SimConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Canonical `key = value` listing of every setting. Parsing it back
    /// yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for reg in Reg::ALL.iter().filter(|r| r.writable()) {
            let v = self.regs.read(*reg);
            let shown = match reg {
                Reg::Variant => self.regs.variant.to_string(),
                _ => v.to_string(),
            };
            let _ = writeln!(out, "{} = {shown}", reg.name());
        }
        let cap = self.capacity();
        let t = &self.traffic;
        let s = &self.subordinate;
        for key in HARNESS_KEYS {
            let value = match key {
                "max_uniq_ids" => cap.max_uniq_ids.to_string(),
                "txn_per_uniq_id" => cap.txn_per_uniq_id.to_string(),
                "max_outstanding" => cap.max_outstanding.to_string(),
                "reset_latency" => self.reset_latency.to_string(),
                "attach" => self.attach.to_string(),
                "n_txns" => t.n_txns.to_string(),
                "burst_len" => t.burst_len.to_string(),
                "read_ratio" => t.read_ratio.to_string(),
                "gap" => t.gap.to_string(),
                "n_ids" => t.n_ids.to_string(),
                "manager_outstanding" => t.manager_outstanding.to_string(),
                "aw_ready_delay" => s.aw_ready_delay.to_string(),
                "w_ready_delay" => s.w_ready_delay.to_string(),
                "b_delay" => s.b_delay.to_string(),
                "ar_ready_delay" => s.ar_ready_delay.to_string(),
                "r_delay" => s.r_delay.to_string(),
                "jitter" => s.jitter.to_string(),
                "max_cycles" => self.max_cycles.to_string(),
                "seed" => self.seed.to_string(),
                "fault" => {
                    for f in &self.faults {
                        let _ = writeln!(out, "fault = {f}");
                    }
                    continue;
                }
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// SHA-256 of the canonical listing, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
