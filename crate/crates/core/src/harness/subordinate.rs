// SPDX-License-Identifier: Apache-2.0

//! Subordinate model with fixed per-channel latencies and seeded jitter.
//!
//! Requests are served strictly in acceptance order per direction, one read
//! burst at a time, so responses are always in order.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::setup::SubordinateSpec;
use crate::axi::{BChannel, Cycle, RChannel, RespCode};
use crate::injector::{Injector, Site, ID_CORRUPTION_MASK};

/// Request-side signals as they reach the subordinate.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubIn {
    /// (ordinal, raw id, burst length) of a request presented on AW / AR.
    pub aw: Option<(usize, u32, u16)>,
    pub ar: Option<(usize, u32, u16)>,
    pub w_valid: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SubOut {
    pub aw_ready: bool,
    pub ar_ready: bool,
    pub w_ready: bool,
    pub b: BChannel,
    pub r: RChannel,
    pub b_txn: Option<usize>,
    pub r_txn: Option<usize>,
}

/// Handshakes that completed this cycle, from the subordinate's side.
#[derive(Debug, Clone, Copy, Default)]
pub struct SubFired {
    pub aw: bool,
    pub ar: bool,
    pub w: bool,
    pub b: bool,
    pub r: bool,
}

#[derive(Debug, Clone)]
struct Pending {
    txn: usize,
    id: u32,
    len: u16,
    beats: u16,
    ready_at: Cycle,
}

#[derive(Debug, Clone)]
pub struct Subordinate {
    spec: SubordinateSpec,
    rng: ChaCha8Rng,
    /// Ordinal and cycle from which the current AW / AR may be accepted.
    aw_wait: Option<(usize, Cycle)>,
    ar_wait: Option<(usize, Cycle)>,
    writes: VecDeque<Pending>,
    bq: VecDeque<Pending>,
    reads: VecDeque<Pending>,
}

impl Subordinate {
    pub fn new(spec: SubordinateSpec, seed: u64) -> Self {
        Subordinate {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5ab0_5ab0),
            aw_wait: None,
            ar_wait: None,
            writes: VecDeque::new(),
            bq: VecDeque::new(),
            reads: VecDeque::new(),
        }
    }

    fn delay(&mut self, base: u32) -> Cycle {
        let j = if self.spec.jitter == 0 { 0 } else { self.rng.gen_range(0..=self.spec.jitter) };
        Cycle::from(base + j)
    }

    /// Returns to the power-on state. The random stream carries on.
    pub fn reset(&mut self) {
        self.aw_wait = None;
        self.ar_wait = None;
        self.writes.clear();
        self.bq.clear();
        self.reads.clear();
    }

    pub fn idle(&self) -> bool {
        self.writes.is_empty() && self.bq.is_empty() && self.reads.is_empty()
    }

    pub fn drive(&mut self, cycle: Cycle, inp: &SubIn, inj: &mut Injector) -> SubOut {
        let mut out = SubOut::default();

        if let Some((txn, _, _)) = inp.aw {
            if self.aw_wait.map(|w| w.0) != Some(txn) {
                let d = self.delay(self.spec.aw_ready_delay);
                self.aw_wait = Some((txn, cycle + d));
            }
            let (_, at) = self.aw_wait.expect("set above");
            out.aw_ready = cycle >= at && !inj.hit(Site::AwReady, txn, 0, cycle);
        }
        if let Some((txn, _, _)) = inp.ar {
            if self.ar_wait.map(|w| w.0) != Some(txn) {
                let d = self.delay(self.spec.ar_ready_delay);
                self.ar_wait = Some((txn, cycle + d));
            }
            let (_, at) = self.ar_wait.expect("set above");
            out.ar_ready = cycle >= at && !inj.hit(Site::ArReady, txn, 0, cycle);
        }
        if inp.w_valid {
            if let Some(w) = self.writes.front() {
                out.w_ready = cycle >= w.ready_at && !inj.hit(Site::WReady, w.txn, w.beats, cycle);
            }
        }
        if let Some(b) = self.bq.front() {
            if cycle >= b.ready_at && !inj.hit(Site::BValid, b.txn, 0, cycle) {
                let id = if inj.hit(Site::BId, b.txn, 0, cycle) { b.id ^ ID_CORRUPTION_MASK } else { b.id };
                out.b = BChannel { valid: true, ready: false, id, resp: RespCode::Okay };
                out.b_txn = Some(b.txn);
            }
        }
        if let Some(r) = self.reads.front() {
            if cycle >= r.ready_at && !inj.hit(Site::RValid, r.txn, r.beats, cycle) {
                let id = if inj.hit(Site::RId, r.txn, r.beats, cycle) { r.id ^ ID_CORRUPTION_MASK } else { r.id };
                out.r = RChannel { valid: true, ready: false, id, last: r.beats + 1 == r.len, resp: RespCode::Okay };
                out.r_txn = Some(r.txn);
            }
        }
        out
    }

    pub fn commit(&mut self, cycle: Cycle, inp: &SubIn, fired: SubFired) {
        if fired.aw {
            let (txn, id, len) = inp.aw.expect("AW fired without a request");
            self.aw_wait = None;
            let ready_at = cycle + 1 + self.delay(self.spec.w_ready_delay);
            self.writes.push_back(Pending { txn, id, len, beats: 0, ready_at });
        }
        if fired.ar {
            let (txn, id, len) = inp.ar.expect("AR fired without a request");
            self.ar_wait = None;
            let ready_at = cycle + 1 + self.delay(self.spec.r_delay);
            self.reads.push_back(Pending { txn, id, len, beats: 0, ready_at });
        }
        if fired.w {
            if let Some(w) = self.writes.front_mut() {
                w.beats += 1;
                if w.beats == w.len {
                    let mut w = self.writes.pop_front().expect("front exists");
                    w.ready_at = cycle + 1 + self.delay(self.spec.b_delay);
                    self.bq.push_back(w);
                }
            }
        }
        if fired.b {
            self.bq.pop_front();
        }
        if fired.r {
            if let Some(r) = self.reads.front_mut() {
                r.beats += 1;
                if r.beats == r.len {
                    self.reads.pop_front();
                }
            }
        }
    }
}
