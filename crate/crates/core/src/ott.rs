// SPDX-License-Identifier: Apache-2.0

//! Outstanding Transaction Table.
//!
//! Three linked subtables over one slot pool:
//! - HT: per (direction, mapped ID) head/tail pointers into LD, giving a FIFO
//!   per ID so same-ID transactions complete in issue order;
//! - LD: one entry per in-flight transaction, chained through `next`;
//! - EI: issue order per direction. The write queue is normative (W beats
//!   belong to its front), the read queue is informational.
//!
//! The table owns the ID remapper so a slot's mapped-ID reference is taken on
//! enqueue and dropped on completion or abort.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::axi::{Cycle, Direction, TxnDescriptor};
use crate::remap::{MapOutcome, RemapTable};

pub type SlotIdx = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum TxnState {
    WaitAddrReady,
    WaitFirstData,
    WaitDataReady,
    Burst,
    /// Write only: data done, waiting for `b_valid`.
    WaitResp,
    /// `b_valid` seen (write) or last `r_valid` seen (read), waiting for ready.
    WaitRespReady,
    Done,
    Aborted,
}

impl TxnState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TxnState::Done | TxnState::Aborted)
    }

    pub fn name(self) -> &'static str {
        match self {
            TxnState::WaitAddrReady => "WaitAddrReady",
            TxnState::WaitFirstData => "WaitFirstData",
            TxnState::WaitDataReady => "WaitDataReady",
            TxnState::Burst => "Burst",
            TxnState::WaitResp => "WaitResp",
            TxnState::WaitRespReady => "WaitRespReady",
            TxnState::Done => "Done",
            TxnState::Aborted => "Aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HtEntry {
    pub head: Option<SlotIdx>,
    pub tail: Option<SlotIdx>,
}

#[derive(Debug, Clone)]
pub struct LdEntry<M> {
    pub desc: TxnDescriptor,
    pub mapped: u16,
    pub state: TxnState,
    pub beats_done: u16,
    pub next: Option<SlotIdx>,
    /// Monitoring state attached by the guard.
    pub monitor: M,
}

/// Counter fields shown in the table dump.
pub trait DumpFields {
    fn elapsed(&self) -> u64;
    fn budget(&self) -> u64;
    fn timeout_flag(&self) -> bool;
}

impl DumpFields for () {
    fn elapsed(&self) -> u64 {
        0
    }
    fn budget(&self) -> u64 {
        0
    }
    fn timeout_flag(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StallReason {
    /// Every remapper slot is held by another raw ID.
    IdSpace,
    /// The ID already has `txn_per_uniq_id` transactions in flight.
    PerIdLimit,
    /// No free LD slot.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OttError {
    #[error("slot {0} is not the head of its ID chain")]
    OutOfOrderComplete(SlotIdx),
    #[error("slot {0} completed in a non-terminal state")]
    NotTerminal(SlotIdx),
    #[error("slot {0} is not in use")]
    NotInUse(SlotIdx),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capacity {
    pub max_uniq_ids: u16,
    pub txn_per_uniq_id: u16,
    pub max_outstanding: u16,
}

impl Capacity {
    /// Full product capacity: every ID may use its whole allowance at once.
    pub fn product(max_uniq_ids: u16, txn_per_uniq_id: u16) -> Self {
        Capacity { max_uniq_ids, txn_per_uniq_id, max_outstanding: max_uniq_ids * txn_per_uniq_id }
    }

    /// Capacity with a total pool of `total` slots spread over `ids` IDs.
    pub fn with_total(ids: u16, total: u16) -> Self {
        Capacity { max_uniq_ids: ids, txn_per_uniq_id: total.div_ceil(ids).max(1), max_outstanding: total }
    }
}

#[derive(Debug, Clone)]
pub struct OutstandingTable<M = ()> {
    cap: Capacity,
    remap: RemapTable,
    ht: [Vec<HtEntry>; 2],
    ld: Vec<Option<LdEntry<M>>>,
    ei: [VecDeque<SlotIdx>; 2],
    free: Vec<SlotIdx>,
}

fn dir_ix(dir: Direction) -> usize {
    match dir {
        Direction::Write => 0,
        Direction::Read => 1,
    }
}

impl<M> OutstandingTable<M> {
    pub fn new(cap: Capacity) -> Self {
        assert!(cap.max_outstanding >= 1 && cap.txn_per_uniq_id >= 1);
        let n = cap.max_outstanding as usize;
        let ids = cap.max_uniq_ids as usize;
        OutstandingTable {
            cap,
            remap: RemapTable::new(cap.max_uniq_ids),
            ht: [vec![HtEntry::default(); ids], vec![HtEntry::default(); ids]],
            ld: (0..n).map(|_| None).collect(),
            ei: [VecDeque::with_capacity(n), VecDeque::with_capacity(n)],
            free: (0..n as SlotIdx).rev().collect(),
        }
    }

    pub fn capacity(&self) -> Capacity {
        self.cap
    }

    pub fn occupancy(&self) -> usize {
        self.ld.len() - self.free.len()
    }

    pub fn remap(&self) -> &RemapTable {
        &self.remap
    }

    /// Why a request with this raw ID would stall, if it would.
    pub fn admission(&self, raw_id: u32) -> Option<StallReason> {
        match self.remap.lookup(raw_id) {
            Some(m) if self.remap.active_count(m) >= u32::from(self.cap.txn_per_uniq_id) => {
                return Some(StallReason::PerIdLimit)
            }
            None if !self.remap.can_map(raw_id) => return Some(StallReason::IdSpace),
            _ => {}
        }
        if self.free.is_empty() {
            return Some(StallReason::Full);
        }
        None
    }

    /// Inserts a new transaction at the tail of its ID chain and the EI queue.
    pub fn enqueue(&mut self, mut desc: TxnDescriptor, monitor: M) -> Result<SlotIdx, StallReason> {
        if let Some(reason) = self.admission(desc.id.raw) {
            return Err(reason);
        }
        let mapped = match self.remap.map(desc.id.raw) {
            MapOutcome::Mapped(m) => m,
            MapOutcome::Stall => return Err(StallReason::IdSpace),
        };
        desc.id.mapped = Some(mapped);
        let slot = self.free.pop().expect("admission checked a free slot");
        let d = dir_ix(desc.dir);
        let ht = &mut self.ht[d][mapped as usize];
        match ht.tail {
            Some(tail) => {
                self.ld[tail as usize].as_mut().expect("tail is live").next = Some(slot);
            }
            None => ht.head = Some(slot),
        }
        ht.tail = Some(slot);
        self.ei[d].push_back(slot);
        self.ld[slot as usize] = Some(LdEntry {
            desc,
            mapped,
            state: TxnState::WaitAddrReady,
            beats_done: 0,
            next: None,
            monitor,
        });
        Ok(slot)
    }

    pub fn head_of(&self, dir: Direction, mapped: u16) -> Option<SlotIdx> {
        self.ht[dir_ix(dir)].get(mapped as usize).and_then(|h| h.head)
    }

    /// Head of the chain for a raw ID, if the ID is active in that direction.
    pub fn head_of_raw(&self, dir: Direction, raw_id: u32) -> Option<SlotIdx> {
        self.remap.lookup(raw_id).and_then(|m| self.head_of(dir, m))
    }

    pub fn ei_front(&self, dir: Direction) -> Option<SlotIdx> {
        self.ei[dir_ix(dir)].front().copied()
    }

    /// Drops the front of the write EI queue once its last W beat transferred.
    pub fn ei_retire_write(&mut self) -> Option<SlotIdx> {
        self.ei[0].pop_front()
    }

    pub fn ei_queue(&self, dir: Direction) -> impl Iterator<Item = SlotIdx> + '_ {
        self.ei[dir_ix(dir)].iter().copied()
    }

    pub fn get(&self, slot: SlotIdx) -> Option<&LdEntry<M>> {
        self.ld.get(slot as usize).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, slot: SlotIdx) -> Option<&mut LdEntry<M>> {
        self.ld.get_mut(slot as usize).and_then(Option::as_mut)
    }

    /// Live slots in ascending slot order.
    pub fn live(&self) -> impl Iterator<Item = (SlotIdx, &LdEntry<M>)> {
        self.ld.iter().enumerate().filter_map(|(i, e)| e.as_ref().map(|e| (i as SlotIdx, e)))
    }

    pub fn live_slots(&self) -> Vec<SlotIdx> {
        self.live().map(|(s, _)| s).collect()
    }

    /// Retires the head of an ID chain.
    pub fn complete(&mut self, slot: SlotIdx) -> Result<LdEntry<M>, OttError> {
        let entry = self.get(slot).ok_or(OttError::NotInUse(slot))?;
        if !entry.state.is_terminal() {
            return Err(OttError::NotTerminal(slot));
        }
        let d = dir_ix(entry.desc.dir);
        let mapped = entry.mapped;
        let next = entry.next;
        let ht = &mut self.ht[d][mapped as usize];
        if ht.head != Some(slot) {
            return Err(OttError::OutOfOrderComplete(slot));
        }
        ht.head = next;
        if next.is_none() {
            ht.tail = None;
        }
        self.ei[d].retain(|&s| s != slot);
        self.remap.release(mapped).expect("live slot holds a remap reference");
        let entry = self.ld[slot as usize].take().expect("checked live");
        self.free.push(slot);
        Ok(entry)
    }

    /// Aborts every live transaction, returning them in slot order.
    pub fn abort_all(&mut self) -> Vec<(SlotIdx, LdEntry<M>)> {
        let mut out = Vec::with_capacity(self.occupancy());
        for (i, e) in self.ld.iter_mut().enumerate() {
            if let Some(mut entry) = e.take() {
                if !entry.state.is_terminal() {
                    entry.state = TxnState::Aborted;
                }
                entry.next = None;
                out.push((i as SlotIdx, entry));
            }
        }
        for ht in self.ht.iter_mut() {
            ht.iter_mut().for_each(|h| *h = HtEntry::default());
        }
        self.ei.iter_mut().for_each(VecDeque::clear);
        self.free = (0..self.ld.len() as SlotIdx).rev().collect();
        self.remap.clear();
        out
    }

    /// Structural walk: every slot is on exactly one chain or the free list,
    /// and chains agree with the remapper counts.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.ld.len();
        let mut seen = vec![0u8; n];
        for &f in &self.free {
            seen[f as usize] += 1;
            if self.ld[f as usize].is_some() {
                return Err(format!("free slot {f} holds an entry"));
            }
        }
        for d in 0..2 {
            for (id, ht) in self.ht[d].iter().enumerate() {
                if ht.head.is_none() != ht.tail.is_none() {
                    return Err(format!("id {id}: head/tail disagree"));
                }
                let mut cur = ht.head;
                let mut last = None;
                let mut steps = 0;
                while let Some(s) = cur {
                    steps += 1;
                    if steps > n {
                        return Err(format!("id {id}: chain cycle"));
                    }
                    seen[s as usize] += 1;
                    let e = self.ld[s as usize].as_ref().ok_or(format!("chain reaches free slot {s}"))?;
                    if e.mapped as usize != id || dir_ix(e.desc.dir) != d {
                        return Err(format!("slot {s} on wrong chain"));
                    }
                    last = cur;
                    cur = e.next;
                }
                if last != ht.tail {
                    return Err(format!("id {id}: tail not reachable from head"));
                }
            }
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(format!("slot {i} referenced {} times", seen[i]));
        }
        for id in 0..self.cap.max_uniq_ids {
            let live = self.live().filter(|(_, e)| e.mapped == id).count() as u32;
            if live != self.remap.active_count(id) {
                return Err(format!("id {id}: {live} live slots, remap count {}", self.remap.active_count(id)));
            }
        }
        Ok(())
    }
}

impl<M: DumpFields> OutstandingTable<M> {
    /// One line per LD slot: `slot,state,tid,addr,elapsed,budget,timeout_flag,next`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.ld.iter().enumerate() {
            match e {
                Some(e) => {
                    let next = e.next.map_or_else(|| "-".to_string(), |n| n.to_string());
                    let _ = writeln!(
                        out,
                        "{i},{},{},{:#x},{},{},{},{next}",
                        e.state.name(),
                        e.mapped,
                        e.desc.addr,
                        e.monitor.elapsed(),
                        e.monitor.budget(),
                        u8::from(e.monitor.timeout_flag()),
                    );
                }
                None => {
                    let _ = writeln!(out, "{i},Free,-,-,0,0,0,-");
                }
            }
        }
        out
    }
}

/// Issue cycle of the oldest live transaction, if any.
pub fn oldest_issue<M>(ott: &OutstandingTable<M>) -> Option<Cycle> {
    ott.live().map(|(_, e)| e.desc.issue_cycle).min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axi::TxnId;

    fn desc(dir: Direction, raw: u32) -> TxnDescriptor {
        TxnDescriptor { dir, id: TxnId::raw(raw), addr: 0x1000, burst_len: 8, issue_cycle: 0 }
    }

    fn finish(t: &mut OutstandingTable, slot: SlotIdx) -> Result<LdEntry<()>, OttError> {
        t.get_mut(slot).unwrap().state = TxnState::Done;
        t.complete(slot)
    }

    #[test]
    fn first_insertion() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(4, 2));
        let s = t.enqueue(desc(Direction::Write, 5), ()).unwrap();
        assert_eq!(s, 0);
        assert_eq!(t.head_of(Direction::Write, 0), Some(0));
        assert_eq!(t.ei_front(Direction::Write), Some(0));
        assert_eq!(t.occupancy(), 1);
        t.check_invariants().unwrap();
    }

    #[test]
    fn second_same_id_links() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(4, 2));
        t.enqueue(desc(Direction::Write, 5), ()).unwrap();
        let s = t.enqueue(desc(Direction::Write, 5), ()).unwrap();
        assert_eq!(s, 1);
        assert_eq!(t.head_of(Direction::Write, 0), Some(0));
        assert_eq!(t.get(0).unwrap().next, Some(1));
        finish(&mut t, 0).unwrap();
        assert_eq!(t.head_of(Direction::Write, 0), Some(1));
        assert_eq!(t.head_of(Direction::Write, 1), None);
        t.check_invariants().unwrap();
    }

    #[test]
    fn saturation_stalls() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity { max_uniq_ids: 2, txn_per_uniq_id: 2, max_outstanding: 2 });
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        t.enqueue(desc(Direction::Read, 2), ()).unwrap();
        assert_eq!(t.enqueue(desc(Direction::Write, 1), ()), Err(StallReason::Full));
    }

    #[test]
    fn per_id_limit_checked_before_total() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(2, 1));
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        assert_eq!(t.enqueue(desc(Direction::Read, 1), ()), Err(StallReason::PerIdLimit));
        t.enqueue(desc(Direction::Write, 2), ()).unwrap();
        assert_eq!(t.enqueue(desc(Direction::Write, 3), ()), Err(StallReason::IdSpace));
        t.check_invariants().unwrap();
    }

    #[test]
    fn out_of_order_complete_rejected() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(1, 4));
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        assert_eq!(finish(&mut t, 1).unwrap_err(), OttError::OutOfOrderComplete(1));
        assert_eq!(t.complete(0).unwrap_err(), OttError::NotTerminal(0));
        assert_eq!(t.complete(3).unwrap_err(), OttError::NotInUse(3));
    }

    #[test]
    fn reads_and_writes_have_separate_chains() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(1, 4));
        let w = t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        let r = t.enqueue(desc(Direction::Read, 1), ()).unwrap();
        assert_eq!(t.head_of(Direction::Write, 0), Some(w));
        assert_eq!(t.head_of(Direction::Read, 0), Some(r));
        finish(&mut t, r).unwrap();
        t.check_invariants().unwrap();
    }

    #[test]
    fn ei_order() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(4, 2));
        assert_eq!(t.ei_front(Direction::Write), None);
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        t.enqueue(desc(Direction::Write, 2), ()).unwrap();
        assert_eq!(t.ei_front(Direction::Write), Some(0));
        assert_eq!(t.ei_retire_write(), Some(0));
        assert_eq!(t.ei_front(Direction::Write), Some(1));
    }

    #[test]
    fn abort_all_releases_everything() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(4, 2));
        assert!(t.abort_all().is_empty());
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        t.enqueue(desc(Direction::Read, 2), ()).unwrap();
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        let aborted = t.abort_all();
        assert_eq!(aborted.iter().map(|(s, _)| *s).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(aborted.iter().all(|(_, e)| e.state == TxnState::Aborted));
        assert_eq!(t.occupancy(), 0);
        assert!(t.remap().is_empty());
        assert_eq!(t.ei_front(Direction::Write), None);
        t.check_invariants().unwrap();
    }

    #[test]
    fn dump_format() {
        let mut t: OutstandingTable = OutstandingTable::new(Capacity::product(1, 2));
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        t.enqueue(desc(Direction::Write, 1), ()).unwrap();
        let d = t.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines, vec!["0,WaitAddrReady,0,0x1000,0,0,0,1", "1,WaitAddrReady,0,0x1000,0,0,0,-"]);
    }
}
