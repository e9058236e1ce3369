// SPDX-License-Identifier: Apache-2.0

//! Signal- and transaction-level AXI4 model shared by the monitor, the
//! endpoint models and the trace tooling.

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation clock index.
pub type Cycle = u64;

/// Longest burst an AXI4 INCR transaction may carry.
pub const MAX_BURST_LEN: u16 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    Aw,
    W,
    B,
    Ar,
    R,
}

impl ChannelId {
    pub const ALL: [ChannelId; 5] = [ChannelId::Aw, ChannelId::W, ChannelId::B, ChannelId::Ar, ChannelId::R];

    /// W and R carry data beats.
    pub fn carries_data(self) -> bool {
        matches!(self, ChannelId::W | ChannelId::R)
    }

    pub fn is_request(self) -> bool {
        matches!(self, ChannelId::Aw | ChannelId::W | ChannelId::Ar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Write,
    Read,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Write => "write",
            Direction::Read => "read",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RespCode {
    #[default]
    #[serde(rename = "OKAY")]
    Okay,
    #[serde(rename = "SLVERR")]
    SlvErr,
}

impl fmt::Display for RespCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RespCode::Okay => "OKAY",
            RespCode::SlvErr => "SLVERR",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown response code `{0}`")]
pub struct UnknownResp(pub String);

impl FromStr for RespCode {
    type Err = UnknownResp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "OKAY" | "0" => Ok(RespCode::Okay),
            "SLVERR" => Ok(RespCode::SlvErr),
            other => Err(UnknownResp(other.to_string())),
        }
    }
}

/// A manager-side transaction ID and, once remapped, its dense slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxnId {
    pub raw: u32,
    pub mapped: Option<u16>,
}

impl TxnId {
    pub fn raw(raw: u32) -> Self {
        TxnId { raw, mapped: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxnDescriptor {
    pub dir: Direction,
    pub id: TxnId,
    pub addr: u64,
    pub burst_len: u16,
    /// Cycle the AW/AR valid was first asserted.
    pub issue_cycle: Cycle,
}

/// Standard valid/ready rule: a transfer happens in the cycle both are high.
pub fn handshake_fired(valid: bool, ready: bool) -> bool {
    valid && ready
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AddrChannel {
    pub valid: bool,
    pub ready: bool,
    pub id: u32,
    pub addr: u64,
    /// Beats in the burst, 1..=256 (not the AXI `len - 1` encoding).
    pub len: u16,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WChannel {
    pub valid: bool,
    pub ready: bool,
    pub last: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BChannel {
    pub valid: bool,
    pub ready: bool,
    pub id: u32,
    pub resp: RespCode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RChannel {
    pub valid: bool,
    pub ready: bool,
    pub id: u32,
    pub last: bool,
    pub resp: RespCode,
}

macro_rules! impl_fired {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn fired(&self) -> bool {
                handshake_fired(self.valid, self.ready)
            }
        }
    )*};
}
impl_fired!(AddrChannel, WChannel, BChannel, RChannel);

/// One clock cycle of the five AXI4 channels as seen at the subordinate port.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CycleSample {
    pub cycle: Cycle,
    pub aw: AddrChannel,
    pub w: WChannel,
    pub b: BChannel,
    pub ar: AddrChannel,
    pub r: RChannel,
}

impl CycleSample {
    pub fn idle(cycle: Cycle) -> Self {
        CycleSample { cycle, ..Default::default() }
    }

    pub fn fired(&self, ch: ChannelId) -> bool {
        match ch {
            ChannelId::Aw => self.aw.fired(),
            ChannelId::W => self.w.fired(),
            ChannelId::B => self.b.fired(),
            ChannelId::Ar => self.ar.fired(),
            ChannelId::R => self.r.fired(),
        }
    }
}

bitflags! {
    /// Handshake-derived events observed in one cycle.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct BeatEvents: u16 {
        const AW_FIRE = 1 << 0;
        const W_FIRE = 1 << 1;
        const W_FIRST = 1 << 2;
        const W_LAST = 1 << 3;
        const B_FIRE = 1 << 4;
        const AR_FIRE = 1 << 5;
        const R_FIRE = 1 << 6;
        const R_FIRST = 1 << 7;
        const R_LAST = 1 << 8;
    }
}

/// What the beat classifier needs to know about open bursts.
pub trait OpenBursts {
    /// Beats already transferred by the write burst the next W beat belongs
    /// to, or `None` when no accepted write burst is waiting for data.
    fn open_write_beats(&self) -> Option<u16>;
    /// Beats already transferred by the oldest read with this raw ID.
    fn open_read_beats(&self, raw_id: u32) -> Option<u16>;
}

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("W beat fired with no open write burst")]
    OrphanW,
}

pub fn classify_beat(s: &CycleSample, open: &impl OpenBursts) -> Result<BeatEvents, ClassifyError> {
    let mut ev = BeatEvents::empty();
    if s.aw.fired() {
        ev |= BeatEvents::AW_FIRE;
    }
    if s.w.fired() {
        let beats = open.open_write_beats().ok_or(ClassifyError::OrphanW)?;
        ev |= BeatEvents::W_FIRE;
        if beats == 0 {
            ev |= BeatEvents::W_FIRST;
        }
        if s.w.last {
            ev |= BeatEvents::W_LAST;
        }
    }
    if s.b.fired() {
        ev |= BeatEvents::B_FIRE;
    }
    if s.ar.fired() {
        ev |= BeatEvents::AR_FIRE;
    }
    if s.r.fired() {
        ev |= BeatEvents::R_FIRE;
        if open.open_read_beats(s.r.id) == Some(0) {
            ev |= BeatEvents::R_FIRST;
        }
        if s.r.last {
            ev |= BeatEvents::R_LAST;
        }
    }
    Ok(ev)
}
