// SPDX-License-Identifier: Apache-2.0

//! Transaction records, the fault event log and the campaign report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::axi::{Cycle, Direction};
use crate::guard::{Phase, PhaseSpan, Variant};
use crate::ott::SlotIdx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Timeout,
    Violation,
    Isolate,
    Slverr,
    ResetDone,
    Resume,
    Swallowed,
    TargetNotReached,
    NonTermination,
}

/// One entry of the fault event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub cycle: Cycle,
    pub kind: EventKind,
    pub slot: Option<SlotIdx>,
    /// Phase label or violation kind.
    pub detail: String,
    pub action: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxnRecord {
    pub slot: SlotIdx,
    pub dir: Direction,
    pub raw_id: u32,
    pub burst_len: u16,
    pub issue_cycle: Cycle,
    pub end_cycle: Cycle,
    pub outcome: Outcome,
    /// Phase spans; empty for the tiny-counter variant.
    pub phases: Vec<PhaseSpan>,
}

impl TxnRecord {
    pub fn total_latency(&self) -> Cycle {
        self.end_cycle - self.issue_cycle
    }
}

/// Append-only collector used inside the cycle loop.
#[derive(Debug, Clone, Default)]
pub struct StatsCollector {
    open: BTreeMap<SlotIdx, TxnRecord>,
    records: Vec<TxnRecord>,
    events: Vec<Event>,
}

impl StatsCollector {
    pub fn open(&mut self, slot: SlotIdx, dir: Direction, raw_id: u32, burst_len: u16, issue_cycle: Cycle) {
        self.open.insert(
            slot,
            TxnRecord {
                slot,
                dir,
                raw_id,
                burst_len,
                issue_cycle,
                end_cycle: issue_cycle,
                outcome: Outcome::Done,
                phases: Vec::new(),
            },
        );
    }

    pub fn record_phase(&mut self, slot: SlotIdx, phase: Phase, entry: Cycle, exit: Cycle) {
        debug_assert!(exit >= entry);
        if let Some(r) = self.open.get_mut(&slot) {
            r.phases.push(PhaseSpan { phase, entry, exit });
        }
    }

    pub fn close(&mut self, slot: SlotIdx, outcome: Outcome, cycle: Cycle) {
        if let Some(mut r) = self.open.remove(&slot) {
            r.outcome = outcome;
            r.end_cycle = cycle;
            self.records.push(r);
        }
    }

    pub fn event(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn records(&self) -> &[TxnRecord] {
        &self.records
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_parts(self) -> (Vec<TxnRecord>, Vec<Event>) {
        (self.records, self.events)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Histogram {
    pub count: u64,
    pub min: u64,
    pub mean: f64,
    pub max: u64,
    pub p99: u64,
}

impl Histogram {
    pub fn from_samples(samples: &[u64]) -> Option<Histogram> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_unstable();
        let n = v.len();
        // Nearest rank.
        let rank = (0.99 * n as f64).ceil() as usize;
        Some(Histogram {
            count: n as u64,
            min: v[0],
            mean: v.iter().sum::<u64>() as f64 / n as f64,
            max: v[n - 1],
            p99: v[rank.clamp(1, n) - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyStats {
    pub total: Option<Histogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<BTreeMap<String, Histogram>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bottleneck: Option<String>,
}

/// Detection result for one injected fault.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Detection {
    pub fault: String,
    pub target_txn: usize,
    pub issue_cycle: Option<Cycle>,
    pub trigger_cycle: Option<Cycle>,
    pub detect_cycle: Option<Cycle>,
    pub verdict: Option<String>,
    pub latency_from_issue: Option<Cycle>,
    pub latency_from_trigger: Option<Cycle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub config_digest: String,
    pub variant: Variant,
    pub n_txns: usize,
    pub n_done: usize,
    pub n_aborted: usize,
    pub n_faults_injected: usize,
    pub n_detected: usize,
    pub detection_latencies: Vec<Detection>,
    pub latency_stats: LatencyStats,
    pub total_cycles: Cycle,
    pub total_beats: u64,
    pub throughput_beats_per_cycle: f64,
    pub events: Vec<Event>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Inputs to [`finalize`] that do not come from the record stream.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_digest: String,
    pub variant: Variant,
    pub total_cycles: Cycle,
    pub detections: Vec<Detection>,
}

pub fn finalize(records: &[TxnRecord], events: &[Event], summary: RunSummary) -> CampaignReport {
    let done: Vec<&TxnRecord> = records.iter().filter(|r| r.outcome == Outcome::Done).collect();
    let totals: Vec<u64> = done.iter().map(|r| r.total_latency()).collect();

    let (phases, bottleneck) = match summary.variant {
        Variant::TinyCounter => (None, None),
        Variant::FullCounter => {
            let mut per: BTreeMap<String, Vec<u64>> = BTreeMap::new();
            for r in &done {
                for s in &r.phases {
                    per.entry(s.phase.label().to_string()).or_default().push(s.exit - s.entry);
                }
            }
            let hists: BTreeMap<String, Histogram> = per
                .iter()
                .filter_map(|(k, v)| Histogram::from_samples(v).map(|h| (k.clone(), h)))
                .collect();
            let bottleneck = hists
                .iter()
                .fold(None::<(&String, f64)>, |best, (k, h)| match best {
                    Some((_, m)) if m >= h.mean => best,
                    _ => Some((k, h.mean)),
                })
                .map(|(k, _)| k.clone());
            (Some(hists), bottleneck)
        }
    };

    let total_beats: u64 = done.iter().map(|r| u64::from(r.burst_len)).sum();
    let throughput = if summary.total_cycles == 0 { 0.0 } else { total_beats as f64 / summary.total_cycles as f64 };
    let n_detected = summary.detections.iter().filter(|d| d.detect_cycle.is_some()).count();

    CampaignReport {
        config_digest: summary.config_digest,
        variant: summary.variant,
        n_txns: records.len(),
        n_done: done.len(),
        n_aborted: records.len() - done.len(),
        n_faults_injected: summary.detections.len(),
        n_detected,
        detection_latencies: summary.detections,
        latency_stats: LatencyStats { total: Histogram::from_samples(&totals), phases, bottleneck },
        total_cycles: summary.total_cycles,
        total_beats,
        throughput_beats_per_cycle: throughput,
        events: events.to_vec(),
    }
}
