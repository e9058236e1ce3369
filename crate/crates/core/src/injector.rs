// SPDX-License-Identifier: Apache-2.0

//! Deterministic fault injection.
//!
//! A fault overrides one signal of one transaction from its trigger point
//! on: a ready or valid line is held low indefinitely, or a response ID is
//! corrupted. The models consult the injector each time they are about to
//! drive the affected signal for a transaction.
//!
//! Campaign files hold one fault per line, `kind,target_txn,trigger,seed`,
//! where `trigger` is `phase`, `beat:N` or `cycle:N`. Blank lines and `#`
//! comments are ignored.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::axi::{Cycle, Direction};

/// XOR mask applied to corrupted response IDs; yields an ID that is not
/// outstanding.
pub const ID_CORRUPTION_MASK: u32 = 0x8000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FaultKind {
    /// Subordinate never accepts the write address.
    AwReadyWithheld,
    /// Manager never presents write data.
    WValidWithheld,
    /// Subordinate stops accepting write data from a given beat.
    WReadyWithheld,
    /// Manager stops presenting write data between the first and last beat.
    MidBurstStall,
    /// Subordinate never raises the write response.
    BValidWithheld,
    /// Write response carries an ID that is not outstanding.
    BHandshakeOrIdError,
    ArReadyWithheld,
    /// Subordinate stops presenting read data from a given beat.
    RValidWithheld,
    /// Read data carries an ID that is not outstanding.
    RIdError,
}

/// Signal a fault overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    AwReady,
    WValid,
    WReady,
    BValid,
    BId,
    ArReady,
    RValid,
    RId,
}

impl FaultKind {
    pub const ALL: [FaultKind; 9] = [
        FaultKind::AwReadyWithheld,
        FaultKind::WValidWithheld,
        FaultKind::WReadyWithheld,
        FaultKind::MidBurstStall,
        FaultKind::BValidWithheld,
        FaultKind::BHandshakeOrIdError,
        FaultKind::ArReadyWithheld,
        FaultKind::RValidWithheld,
        FaultKind::RIdError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::AwReadyWithheld => "AwReadyWithheld",
            FaultKind::WValidWithheld => "WValidWithheld",
            FaultKind::WReadyWithheld => "WReadyWithheld",
            FaultKind::MidBurstStall => "MidBurstStall",
            FaultKind::BValidWithheld => "BValidWithheld",
            FaultKind::BHandshakeOrIdError => "BHandshakeOrIdError",
            FaultKind::ArReadyWithheld => "ArReadyWithheld",
            FaultKind::RValidWithheld => "RValidWithheld",
            FaultKind::RIdError => "RIdError",
        }
    }

    pub fn dir(self) -> Direction {
        match self {
            FaultKind::ArReadyWithheld | FaultKind::RValidWithheld | FaultKind::RIdError => Direction::Read,
            _ => Direction::Write,
        }
    }

    pub fn site(self) -> Site {
        match self {
            FaultKind::AwReadyWithheld => Site::AwReady,
            FaultKind::WValidWithheld | FaultKind::MidBurstStall => Site::WValid,
            FaultKind::WReadyWithheld => Site::WReady,
            FaultKind::BValidWithheld => Site::BValid,
            FaultKind::BHandshakeOrIdError => Site::BId,
            FaultKind::ArReadyWithheld => Site::ArReady,
            FaultKind::RValidWithheld => Site::RValid,
            FaultKind::RIdError => Site::RId,
        }
    }

    /// First affected beat when triggered at phase start.
    fn phase_start_beat(self) -> u16 {
        match self {
            FaultKind::MidBurstStall => 1,
            _ => 0,
        }
    }

    /// Whether the fault acts on individual data beats.
    pub fn is_beat_level(self) -> bool {
        matches!(self.site(), Site::WValid | Site::WReady | Site::RValid | Site::RId)
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultKind {
    type Err = InjectorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
        FaultKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == key)
            .ok_or_else(|| InjectorError::Parse(format!("unknown fault kind `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Trigger {
    AtPhaseStart,
    AtBeat(u16),
    AtCycle(Cycle),
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::AtPhaseStart => f.write_str("phase"),
            Trigger::AtBeat(n) => write!(f, "beat:{n}"),
            Trigger::AtCycle(c) => write!(f, "cycle:{c}"),
        }
    }
}

impl FromStr for Trigger {
    type Err = InjectorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let bad = || InjectorError::Parse(format!("bad trigger `{}`", s.trim()));
        match t.split_once(':') {
            None if t == "phase" => Ok(Trigger::AtPhaseStart),
            Some(("beat", n)) => n.trim().parse().map(Trigger::AtBeat).map_err(|_| bad()),
            Some(("cycle", n)) => n.trim().parse().map(Trigger::AtCycle).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    /// Ordinal of the target in the generated traffic.
    pub target_txn: usize,
    pub trigger: Trigger,
    pub seed: u64,
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.kind, self.target_txn, self.trigger, self.seed)
    }
}

impl FromStr for FaultSpec {
    type Err = InjectorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [kind, target, trigger, seed] = parts[..] else {
            return Err(InjectorError::Parse(format!("expected `kind,target_txn,trigger,seed`, got `{s}`")));
        };
        Ok(FaultSpec {
            kind: kind.parse()?,
            target_txn: target.parse().map_err(|_| InjectorError::Parse(format!("bad target `{target}`")))?,
            trigger: trigger.parse()?,
            seed: seed.parse().map_err(|_| InjectorError::Parse(format!("bad seed `{seed}`")))?,
        })
    }
}

impl FaultSpec {
    /// Picks a fault at random against a traffic plan, given the direction
    /// and burst length of each transaction. `None` if the plan is empty.
    pub fn random(rng: &mut impl Rng, plan: &[(Direction, u16)]) -> Option<FaultSpec> {
        let kind = *FaultKind::ALL.choose(rng)?;
        let candidates: Vec<usize> = plan
            .iter()
            .enumerate()
            .filter(|(_, (d, len))| *d == kind.dir() && (kind != FaultKind::MidBurstStall || *len >= 2))
            .map(|(i, _)| i)
            .collect();
        let target_txn = *candidates.choose(rng)?;
        let len = plan[target_txn].1;
        let trigger = match kind {
            FaultKind::MidBurstStall => Trigger::AtBeat(rng.gen_range(1..len)),
            k if k.is_beat_level() && rng.gen_bool(0.5) => Trigger::AtBeat(rng.gen_range(0..len)),
            _ => Trigger::AtPhaseStart,
        };
        Some(FaultSpec { kind, target_txn, trigger, seed: rng.gen() })
    }
}

pub fn parse_campaign(text: &str) -> Result<Vec<FaultSpec>, InjectorError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse().map_err(|e: InjectorError| InjectorError::Line(i + 1, e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectorError {
    #[error("{0}")]
    Parse(String),
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("fault {0} never triggered before the run ended")]
    TargetNotReached(FaultSpec),
}

#[derive(Debug, Clone)]
struct Armed {
    spec: FaultSpec,
    trigger_cycle: Option<Cycle>,
}

/// Faults armed for one run.
#[derive(Debug, Clone, Default)]
pub struct Injector {
    armed: Vec<Armed>,
}

impl Injector {
    pub fn new(specs: &[FaultSpec]) -> Self {
        Injector { armed: specs.iter().map(|&spec| Armed { spec, trigger_cycle: None }).collect() }
    }

    pub fn specs(&self) -> impl Iterator<Item = &FaultSpec> {
        self.armed.iter().map(|a| &a.spec)
    }

    /// Asks whether the model must override `site` for transaction `txn`,
    /// about to drive data beat `beat` (0 for address and response sites)
    /// in `cycle`. Once a fault triggers it stays active for that target.
    pub fn hit(&mut self, site: Site, txn: usize, beat: u16, cycle: Cycle) -> bool {
        let mut any = false;
        for a in self.armed.iter_mut().filter(|a| a.spec.kind.site() == site && a.spec.target_txn == txn) {
            let active = a.trigger_cycle.is_some()
                || match a.spec.trigger {
                    Trigger::AtPhaseStart => beat >= a.spec.kind.phase_start_beat(),
                    Trigger::AtBeat(n) => beat >= n,
                    Trigger::AtCycle(c) => cycle >= c,
                };
            if active {
                a.trigger_cycle.get_or_insert(cycle);
                any = true;
            }
        }
        any
    }

    /// Trigger cycle of each armed fault, in campaign order.
    pub fn triggers(&self) -> Vec<(FaultSpec, Option<Cycle>)> {
        self.armed.iter().map(|a| (a.spec, a.trigger_cycle)).collect()
    }

    pub fn unreached(&self) -> Vec<InjectorError> {
        self.armed
            .iter()
            .filter(|a| a.trigger_cycle.is_none())
            .map(|a| InjectorError::TargetNotReached(a.spec))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn campaign_round_trip() {
        let text = "# demo\nAwReadyWithheld,0,phase,1\nmid_burst_stall, 0, beat:125, 7\n\nRIdError,3,cycle:40,9 # trailing\n";
        let specs = parse_campaign(text).unwrap();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[1].kind, FaultKind::MidBurstStall);
        assert_eq!(specs[1].trigger, Trigger::AtBeat(125));
        assert_eq!(specs[2].trigger, Trigger::AtCycle(40));
        let again: Vec<FaultSpec> = specs.iter().map(|s| s.to_string().parse().unwrap()).collect();
        assert_eq!(again, specs);
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = parse_campaign("AwReadyWithheld,0,phase,1\nNope,0,phase,1").unwrap_err();
        assert!(matches!(err, InjectorError::Line(2, _)), "{err}");
        assert!("AwReadyWithheld,0,never,1".parse::<FaultSpec>().is_err());
        assert!("AwReadyWithheld,0,phase".parse::<FaultSpec>().is_err());
    }

    #[test]
    fn beat_trigger_latches() {
        let spec = FaultSpec { kind: FaultKind::MidBurstStall, target_txn: 2, trigger: Trigger::AtBeat(3), seed: 0 };
        let mut inj = Injector::new(&[spec]);
        assert!(!inj.hit(Site::WValid, 1, 5, 10));
        assert!(!inj.hit(Site::WReady, 2, 5, 10));
        assert!(!inj.hit(Site::WValid, 2, 2, 11));
        assert!(inj.hit(Site::WValid, 2, 3, 12));
        assert!(inj.hit(Site::WValid, 2, 3, 13));
        assert_eq!(inj.triggers()[0].1, Some(12));
        assert!(inj.unreached().is_empty());
    }

    #[test]
    fn phase_and_cycle_triggers() {
        let a = FaultSpec { kind: FaultKind::AwReadyWithheld, target_txn: 0, trigger: Trigger::AtPhaseStart, seed: 0 };
        let b = FaultSpec { kind: FaultKind::BValidWithheld, target_txn: 0, trigger: Trigger::AtCycle(50), seed: 0 };
        let mut inj = Injector::new(&[a, b]);
        assert!(inj.hit(Site::AwReady, 0, 0, 4));
        assert!(!inj.hit(Site::BValid, 0, 0, 49));
        assert!(inj.hit(Site::BValid, 0, 0, 50));
        let stall = FaultSpec { kind: FaultKind::MidBurstStall, target_txn: 0, trigger: Trigger::AtPhaseStart, seed: 0 };
        let mut inj = Injector::new(&[stall]);
        assert!(!inj.hit(Site::WValid, 0, 0, 1));
        assert!(inj.hit(Site::WValid, 0, 1, 2));
    }

    #[test]
    fn unreached_is_reported() {
        let spec = FaultSpec { kind: FaultKind::RIdError, target_txn: 9, trigger: Trigger::AtBeat(4), seed: 0 };
        let inj = Injector::new(&[spec]);
        assert_eq!(inj.unreached(), vec![InjectorError::TargetNotReached(spec)]);
    }

    #[test]
    fn random_specs_fit_the_plan() {
        let plan = vec![(Direction::Write, 8), (Direction::Read, 1), (Direction::Write, 1), (Direction::Read, 16)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let s = FaultSpec::random(&mut rng, &plan).unwrap();
            let (dir, len) = plan[s.target_txn];
            assert_eq!(dir, s.kind.dir());
            if let Trigger::AtBeat(n) = s.trigger {
                assert!(n < len);
                assert!(s.kind.is_beat_level());
            }
            if s.kind == FaultKind::MidBurstStall {
                assert!(matches!(s.trigger, Trigger::AtBeat(n) if n >= 1));
            }
        }
        assert_eq!(FaultSpec::random(&mut rng, &[]), None);
    }
}
