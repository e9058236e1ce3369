// SPDX-License-Identifier: Apache-2.0

//! Cycle-driven simulation of manager, monitor and subordinate.
//!
//! Per cycle: the monitor runs its counters and recovery sequence, the
//! manager and subordinate drive their outputs through the (possibly
//! severed) monitor, the monitor observes the resulting handshakes, and
//! both models commit. The recorded trace is what the subordinate port sees.

pub mod manager;
pub mod setup;
pub mod subordinate;
pub mod sweep;

use serde::Serialize;
use thiserror::Error;

use crate::axi::{AddrChannel, BChannel, Cycle, CycleSample, Direction, RChannel, RespCode, WChannel};
use crate::guard::Verdict;
use crate::injector::{Injector, InjectorError};
use crate::stats::{finalize, CampaignReport, Detection, Event, EventKind, RunSummary, StatsCollector};
use crate::tmu::{Tmu, TmuError};

pub use manager::{generate, Manager, TxnPlan, TxnStatus};
pub use setup::{ConfigError, SimConfig, Span, SubordinateSpec, TrafficSpec};
pub use subordinate::Subordinate;
pub use sweep::{parse_grid, sweep, sweep_sequential, SweepPoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("configuration rejected: {0}")]
    ConfigRejected(#[from] TmuError),
}

/// Manager-side view of one planned transaction after the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TxnOutcome {
    pub plan: TxnPlan,
    pub status: TxnStatus,
    pub issue_cycle: Option<Cycle>,
    pub end_cycle: Option<Cycle>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<CycleSample>,
    pub events: Vec<Event>,
    pub report: CampaignReport,
    pub verdicts: Vec<(Cycle, Verdict)>,
    pub txns: Vec<TxnOutcome>,
    /// Table dumps taken just before each isolation.
    pub ott_dumps: Vec<(Cycle, String)>,
    pub irq_pulses: u64,
    /// Faults whose trigger never occurred; such a run is not valid.
    pub unreached: Vec<InjectorError>,
    /// Request handshakes that reached the subordinate while severed.
    pub leaked_requests: usize,
    pub terminated: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub capture_dumps: bool,
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput, RunError> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, opts: RunOptions) -> Result<RunOutput, RunError> {
    let mut tmu = if cfg.attach {
        let mut t = Tmu::new(cfg.regs.clone(), cfg.capacity(), cfg.reset_latency)?;
        t.set_capture_dumps(opts.capture_dumps);
        Some(t)
    } else {
        None
    };
    let plan = generate(&cfg.traffic, cfg.seed);
    let mut mgr = Manager::new(plan, cfg.traffic.manager_outstanding);
    let mut sub = Subordinate::new(cfg.subordinate, cfg.seed);
    let mut inj = Injector::new(&cfg.faults);
    let mut trace = Vec::new();
    let mut leaked_requests = 0;
    let mut terminated = false;
    let mut cycle: Cycle = 0;

    while cycle < cfg.max_cycles {
        let start = tmu.as_mut().map(|t| t.begin_cycle(cycle)).unwrap_or_default();
        if start.reset_done {
            sub.reset();
        }
        let severed = tmu.as_ref().is_some_and(Tmu::severed);

        let m = mgr.drive(cycle, |id| tmu.as_ref().is_none_or(|t| t.can_admit(id)), &mut inj);
        let pass = |v: bool| v && !severed;
        let sub_in = subordinate::SubIn {
            aw: m.aw_txn.filter(|_| pass(m.aw.valid)).map(|k| (k, m.aw.id, m.aw.len)),
            ar: m.ar_txn.filter(|_| pass(m.ar.valid)).map(|k| (k, m.ar.id, m.ar.len)),
            w_valid: pass(m.w.valid),
        };
        let so = sub.drive(cycle, &sub_in, &mut inj);

        let idle_addr = AddrChannel::default();
        let sample = CycleSample {
            cycle,
            aw: if sub_in.aw.is_some() { AddrChannel { ready: so.aw_ready, ..m.aw } } else { idle_addr },
            ar: if sub_in.ar.is_some() { AddrChannel { ready: so.ar_ready, ..m.ar } } else { idle_addr },
            w: WChannel { valid: sub_in.w_valid, ready: so.w_ready, last: sub_in.w_valid && m.w.last },
            b: BChannel { ready: so.b.valid && !severed, ..so.b },
            r: RChannel { ready: so.r.valid && !severed, ..so.r },
        };
        if severed && (sample.aw.fired() || sample.ar.fired() || sample.w.fired()) {
            leaked_requests += 1;
        }
        if let Some(t) = tmu.as_mut() {
            t.observe(&sample);
        }

        let synthetic = start.outputs.synthetic;
        let mgr_in = manager::ManagerIn {
            aw_ready: sample.aw.fired(),
            ar_ready: sample.ar.fired(),
            w_ready: if severed { true } else { sample.w.fired() },
            b: match synthetic {
                Some(r) if r.dir == Direction::Write => Some((r.raw_id, RespCode::SlvErr)),
                _ if sample.b.fired() => Some((sample.b.id, sample.b.resp)),
                _ => None,
            },
            r: match synthetic {
                Some(r) if r.dir == Direction::Read => Some((r.raw_id, true, RespCode::SlvErr)),
                _ if sample.r.fired() => Some((sample.r.id, sample.r.last, sample.r.resp)),
                _ => None,
            },
        };
        sub.commit(
            cycle,
            &sub_in,
            subordinate::SubFired {
                aw: sample.aw.fired(),
                ar: sample.ar.fired(),
                w: sample.w.fired(),
                b: sample.b.fired(),
                r: sample.r.fired(),
            },
        );
        mgr.commit(cycle, &m, &mgr_in);
        trace.push(sample);
        cycle += 1;

        let monitor_idle = tmu.as_ref().is_none_or(|t| !t.enabled() || t.state() == crate::fault::IsolationState::Monitoring);
        if mgr.all_finished() && monitor_idle {
            terminated = true;
            break;
        }
    }

    let total_cycles = cycle;
    let unreached = inj.unreached();
    let verdicts: Vec<(Cycle, Verdict)> = tmu.as_ref().map(|t| t.verdicts().to_vec()).unwrap_or_default();
    let detections: Vec<Detection> = inj
        .triggers()
        .into_iter()
        .map(|(spec, trigger)| {
            let issue = mgr.issue_cycle(spec.target_txn);
            let hit = trigger.and_then(|t| verdicts.iter().find(|(c, _)| *c >= t));
            let detect = hit.map(|(c, _)| *c);
            Detection {
                fault: spec.to_string(),
                target_txn: spec.target_txn,
                issue_cycle: issue,
                trigger_cycle: trigger,
                detect_cycle: detect,
                verdict: hit.map(|(_, v)| v.label().to_string()),
                latency_from_issue: detect.zip(issue).map(|(d, i)| d.saturating_sub(i)),
                latency_from_trigger: detect.zip(trigger).map(|(d, t)| d - t),
            }
        })
        .collect();

    let irq_pulses = tmu.as_ref().map_or(0, Tmu::irq_pulses);
    let ott_dumps = tmu.as_ref().map(|t| t.dumps().to_vec()).unwrap_or_default();
    let stats = tmu.map(Tmu::into_stats).unwrap_or_else(StatsCollector::default);
    let (records, mut events) = stats.into_parts();
    for e in &unreached {
        if let InjectorError::TargetNotReached(spec) = e {
            events.push(Event {
                cycle: total_cycles,
                kind: EventKind::TargetNotReached,
                slot: None,
                detail: spec.to_string(),
                action: "invalid_run".into(),
            });
        }
    }
    if !terminated {
        events.push(Event {
            cycle: total_cycles,
            kind: EventKind::NonTermination,
            slot: None,
            detail: format!("{} transactions unfinished", mgr.status().iter().filter(|s| !s.finished()).count()),
            action: "stop".into(),
        });
    }
    let report = finalize(
        &records,
        &events,
        RunSummary { config_digest: cfg.digest(), variant: cfg.variant(), total_cycles, detections },
    );
    let txns = mgr
        .plan()
        .iter()
        .enumerate()
        .map(|(k, p)| TxnOutcome {
            plan: *p,
            status: mgr.status()[k],
            issue_cycle: mgr.issue_cycle(k),
            end_cycle: mgr.end_cycle(k),
        })
        .collect();
    Ok(RunOutput {
        trace,
        events,
        report,
        verdicts,
        txns,
        ott_dumps,
        irq_pulses,
        unreached,
        leaked_requests,
        terminated,
    })
}
