// SPDX-License-Identifier: Apache-2.0

//! Manager model: issues a planned request stream in order.
//!
//! One request is presented at a time, on AW or AR, and held until
//! accepted. Write data follows address acceptance, oldest burst first,
//! back to back. Responses are always accepted. An SLVERR response ends the
//! transaction and cancels whatever of it was still queued.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::setup::{Span, TrafficSpec};
use crate::axi::{AddrChannel, Cycle, Direction, RespCode, WChannel};
use crate::injector::{Injector, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TxnPlan {
    pub dir: Direction,
    pub id: u32,
    pub addr: u64,
    pub len: u16,
    /// Idle cycles before presenting, counted from the previous acceptance.
    pub gap: u32,
}

fn draw(rng: &mut ChaCha8Rng, span: Span) -> u32 {
    rng.gen_range(span.lo..=span.hi)
}

/// Deterministic request stream for a traffic description and seed.
pub fn generate(traffic: &TrafficSpec, seed: u64) -> Vec<TxnPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..traffic.n_txns)
        .map(|i| {
            let dir = if rng.gen_bool(traffic.read_ratio) { Direction::Read } else { Direction::Write };
            let len = draw(&mut rng, traffic.burst_len) as u16;
            TxnPlan {
                dir,
                id: rng.gen_range(0..traffic.n_ids),
                addr: 0x1000 * i as u64,
                len,
                gap: draw(&mut rng, traffic.gap),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TxnStatus {
    Pending,
    Presented,
    Accepted,
    Done,
    Aborted,
}

impl TxnStatus {
    pub fn finished(self) -> bool {
        matches!(self, TxnStatus::Done | TxnStatus::Aborted)
    }
}

/// What the manager drives in one cycle.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManagerOut {
    pub aw: AddrChannel,
    pub ar: AddrChannel,
    pub w: WChannel,
    /// Plan ordinal of the request on AW / AR and of the burst on W.
    pub aw_txn: Option<usize>,
    pub ar_txn: Option<usize>,
    pub w_txn: Option<usize>,
}

/// Handshakes as seen from the manager side.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManagerIn {
    pub aw_ready: bool,
    pub ar_ready: bool,
    pub w_ready: bool,
    pub b: Option<(u32, RespCode)>,
    /// (id, last, resp) of an R beat.
    pub r: Option<(u32, bool, RespCode)>,
}

#[derive(Debug, Clone)]
pub struct Manager {
    plan: Vec<TxnPlan>,
    status: Vec<TxnStatus>,
    issue: Vec<Option<Cycle>>,
    end: Vec<Option<Cycle>>,
    next: usize,
    ready_at: Cycle,
    presenting: Option<usize>,
    /// Accepted writes still owing data: (ordinal, beats sent).
    w_queue: VecDeque<(usize, u16)>,
    in_flight: usize,
    limit: usize,
    finished: usize,
}

impl Manager {
    pub fn new(plan: Vec<TxnPlan>, limit: usize) -> Self {
        let n = plan.len();
        let ready_at = plan.first().map_or(0, |p| Cycle::from(p.gap));
        Manager {
            plan,
            status: vec![TxnStatus::Pending; n],
            issue: vec![None; n],
            end: vec![None; n],
            next: 0,
            ready_at,
            presenting: None,
            w_queue: VecDeque::new(),
            in_flight: 0,
            limit: limit.max(1),
            finished: 0,
        }
    }

    pub fn plan(&self) -> &[TxnPlan] {
        &self.plan
    }

    pub fn status(&self) -> &[TxnStatus] {
        &self.status
    }

    pub fn issue_cycle(&self, txn: usize) -> Option<Cycle> {
        self.issue.get(txn).copied().flatten()
    }

    pub fn end_cycle(&self, txn: usize) -> Option<Cycle> {
        self.end.get(txn).copied().flatten()
    }

    pub fn all_finished(&self) -> bool {
        self.finished == self.plan.len()
    }

    pub fn drive(&mut self, cycle: Cycle, can_admit: impl Fn(u32) -> bool, inj: &mut Injector) -> ManagerOut {
        if self.presenting.is_none()
            && self.next < self.plan.len()
            && cycle >= self.ready_at
            && self.in_flight < self.limit
            && can_admit(self.plan[self.next].id)
        {
            let k = self.next;
            self.presenting = Some(k);
            self.status[k] = TxnStatus::Presented;
            self.issue[k] = Some(cycle);
            self.next += 1;
            self.in_flight += 1;
        }
        let mut out = ManagerOut::default();
        if let Some(k) = self.presenting {
            let p = self.plan[k];
            let ch = AddrChannel { valid: true, ready: false, id: p.id, addr: p.addr, len: p.len };
            match p.dir {
                Direction::Write => (out.aw, out.aw_txn) = (ch, Some(k)),
                Direction::Read => (out.ar, out.ar_txn) = (ch, Some(k)),
            }
        }
        if let Some(&(k, sent)) = self.w_queue.front() {
            if !inj.hit(Site::WValid, k, sent, cycle) {
                out.w = WChannel { valid: true, ready: false, last: sent + 1 == self.plan[k].len };
                out.w_txn = Some(k);
            }
        }
        out
    }

    pub fn commit(&mut self, cycle: Cycle, out: &ManagerOut, inp: &ManagerIn) {
        if let Some(k) = self.presenting {
            let fired = match self.plan[k].dir {
                Direction::Write => out.aw.valid && inp.aw_ready,
                Direction::Read => out.ar.valid && inp.ar_ready,
            };
            if fired {
                self.status[k] = TxnStatus::Accepted;
                if self.plan[k].dir == Direction::Write {
                    self.w_queue.push_back((k, 0));
                }
                self.presenting = None;
                self.ready_at = cycle + 1 + self.plan.get(self.next).map_or(0, |p| Cycle::from(p.gap));
            }
        }
        if out.w.valid && inp.w_ready {
            if let Some(front) = self.w_queue.front_mut() {
                front.1 += 1;
                if front.1 == self.plan[front.0].len {
                    self.w_queue.pop_front();
                }
            }
        }
        if let Some((id, resp)) = inp.b {
            self.respond(Direction::Write, id, resp, cycle);
        }
        if let Some((id, last, resp)) = inp.r {
            if last || resp == RespCode::SlvErr {
                self.respond(Direction::Read, id, resp, cycle);
            }
        }
    }

    /// Ends the oldest matching transaction. Responses with no matching
    /// transaction are ignored.
    fn respond(&mut self, dir: Direction, id: u32, resp: RespCode, cycle: Cycle) {
        let eligible = |s: TxnStatus| match resp {
            RespCode::Okay => s == TxnStatus::Accepted,
            RespCode::SlvErr => matches!(s, TxnStatus::Accepted | TxnStatus::Presented),
        };
        let Some(k) = (0..self.next).find(|&k| {
            let p = &self.plan[k];
            p.dir == dir && p.id == id && eligible(self.status[k])
        }) else {
            return;
        };
        self.status[k] = match resp {
            RespCode::Okay => TxnStatus::Done,
            RespCode::SlvErr => TxnStatus::Aborted,
        };
        self.end[k] = Some(cycle);
        self.w_queue.retain(|&(j, _)| j != k);
        if self.presenting == Some(k) {
            self.presenting = None;
            self.ready_at = cycle + 1;
        }
        self.in_flight -= 1;
        self.finished += 1;
    }
}
