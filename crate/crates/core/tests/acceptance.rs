// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Set `TMU_BLESS=1` to rewrite the golden log.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tmu::axi::{Cycle, CycleSample, Direction, TxnDescriptor, TxnId};
use tmu::guard::required_counter_bits;
use tmu::guard::{Prescaler, Variant};
use tmu::harness::{generate, run, RunOutput, SimConfig, TxnStatus};
use tmu::injector::{FaultKind, FaultSpec, Trigger, ID_CORRUPTION_MASK};
use tmu::ott::{Capacity, OttError, OutstandingTable, StallReason, TxnState};
use tmu::stats::EventKind;
use tmu::trace::trace_to_string;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_ok(cfg: &SimConfig) -> Result<RunOutput, String> {
    run(cfg).map_err(|e| e.to_string())
}

fn fault(kind: FaultKind, target: usize, trigger: Trigger) -> FaultSpec {
    FaultSpec { kind, target_txn: target, trigger, seed: 0 }
}

fn ethernet(variant: Variant, f: FaultSpec) -> SimConfig {
    let mut c = SimConfig::ethernet250();
    c.regs.variant = variant;
    c.faults = vec![f];
    c
}

fn first_cycle(trace: &[CycleSample], pred: impl Fn(&CycleSample) -> bool) -> Option<Cycle> {
    trace.iter().find(|s| pred(s)).map(|s| s.cycle)
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ethernet250.log")
}

fn render_golden(runs: &[(Variant, FaultSpec, RunOutput)]) -> String {
    let mut out = String::from("# variant fault detect_cycle verdict latency_from_issue\n");
    for (v, f, o) in runs {
        let d = &o.report.detection_latencies[0];
        let _ = writeln!(
            out,
            "{v} {f} {} {} {}",
            d.detect_cycle.map_or("-".into(), |c| c.to_string()),
            d.verdict.as_deref().unwrap_or("-"),
            d.latency_from_issue.map_or("-".into(), |c| c.to_string()),
        );
    }
    for (v, f, o) in runs {
        let _ = writeln!(out, "## events {v} {}", f.kind);
        for e in &o.events {
            let slot = e.slot.map_or("-".into(), |s| s.to_string());
            let kind = serde_json::to_value(e.kind).unwrap();
            let _ = writeln!(out, "{},{},{slot},{},{}", e.cycle, kind.as_str().unwrap(), e.detail, e.action);
        }
    }
    out
}

/// Single 250-beat write with three timeout faults under both variants.
fn criterion_1() -> Check {
    let started = Instant::now();
    let faults = [
        fault(FaultKind::AwReadyWithheld, 0, Trigger::AtPhaseStart),
        fault(FaultKind::MidBurstStall, 0, Trigger::AtBeat(125)),
        fault(FaultKind::BValidWithheld, 0, Trigger::AtPhaseStart),
    ];
    let mut runs = Vec::new();
    for v in [Variant::TinyCounter, Variant::FullCounter] {
        for f in faults {
            runs.push((v, f, run_ok(&ethernet(v, f))?));
        }
    }
    let elapsed = started.elapsed();

    let preset = SimConfig::ethernet250();
    let b = preset.regs.budgets;
    let tc_total = u64::from(b.queue_wait_base + b.unit_budget_per_beat * 250);
    ensure(tc_total == 320, || format!("preset transaction budget is {tc_total}"))?;

    let mut tc_at = HashMap::new();
    let mut summary = Vec::new();
    for (v, f, o) in &runs {
        let d = &o.report.detection_latencies[0];
        let issue = d.issue_cycle.ok_or("target never issued")?;
        let detect = d.detect_cycle.ok_or_else(|| format!("{v} {} not detected", f.kind))?;
        ensure(o.report.n_detected == 1, || format!("{v} {}: {} detections", f.kind, o.report.n_detected))?;
        let lat = detect - issue;
        match v {
            Variant::TinyCounter => {
                ensure(lat == tc_total, || format!("tc {} detected {lat} cycles after issue", f.kind))?;
                tc_at.insert(f.kind, detect);
            }
            Variant::FullCounter => {
                let tc = tc_at[&f.kind];
                let t = &o.trace;
                // Entry of the faulty phase and its budget, read off the trace.
                let (entry, budget) = match f.kind {
                    FaultKind::AwReadyWithheld => (first_cycle(t, |s| s.aw.valid).unwrap(), b.write[0]),
                    FaultKind::MidBurstStall => {
                        (first_cycle(t, |s| s.w.fired()).unwrap(), b.unit_budget_per_beat * 250)
                    }
                    _ => (first_cycle(t, |s| s.w.fired() && s.w.last).unwrap(), b.write[4]),
                };
                let expect = entry + u64::from(budget);
                ensure(detect == expect, || format!("fc {} detected at {detect}, phase expiry {expect}", f.kind))?;
                if f.kind == FaultKind::AwReadyWithheld {
                    ensure(lat <= 11, || format!("fc P1 fault latency {lat}"))?;
                } else {
                    let unconsumed = tc_total - (entry - issue) - u64::from(budget);
                    ensure(detect < tc && tc - detect == unconsumed, || {
                        format!("fc {} at {detect}, tc at {tc}, unconsumed {unconsumed}", f.kind)
                    })?;
                }
            }
        }
        summary.push(format!("{v}/{}={lat}", f.kind));
    }

    let text = render_golden(&runs);
    let path = golden_path();
    if std::env::var_os("TMU_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, &text).map_err(|e| e.to_string())?;
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure(golden == text, || "event log differs from the golden log".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} (golden match, {elapsed:.0?})", summary.join(" ")))
}

/// Corrupted write response ID is flagged within one cycle.
fn criterion_2() -> Check {
    let mut cases = vec![ethernet(Variant::FullCounter, fault(FaultKind::BHandshakeOrIdError, 0, Trigger::AtPhaseStart))];
    for seed in 0..20u64 {
        let mut c = SimConfig::default();
        c.seed = seed;
        c.traffic.n_txns = 24;
        let plan = generate(&c.traffic, seed);
        let Some(target) = plan.iter().position(|p| p.dir == Direction::Write) else { continue };
        c.faults = vec![fault(FaultKind::BHandshakeOrIdError, target, Trigger::AtPhaseStart)];
        cases.push(c);
    }
    let mut worst = 0;
    for c in &cases {
        let o = run_ok(c)?;
        let bad_b = first_cycle(&o.trace, |s| s.b.valid && s.b.id & ID_CORRUPTION_MASK != 0)
            .ok_or("corrupted response never appeared")?;
        let d = &o.report.detection_latencies[0];
        let detect = d.detect_cycle.ok_or("not detected")?;
        ensure(d.verdict.as_deref() == Some("BIdMismatch"), || format!("verdict {:?}", d.verdict))?;
        ensure(detect >= bad_b && detect - bad_b <= 1, || format!("b_valid at {bad_b}, detected at {detect}"))?;
        worst = worst.max(detect - bad_b);
    }
    Ok(format!("{} runs, worst latency {worst} cycle(s)", cases.len()))
}

fn random_campaign(seed: u64) -> SimConfig {
    let mut c = SimConfig::default();
    c.seed = seed;
    c.traffic.n_txns = 24;
    c.regs.variant = if seed % 2 == 0 { Variant::FullCounter } else { Variant::TinyCounter };
    let plan: Vec<(Direction, u16)> = generate(&c.traffic, seed).iter().map(|p| (p.dir, p.len)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    c.faults = FaultSpec::random(&mut rng, &plan).into_iter().collect();
    c
}

/// Prescaled detection matches the exact counter up to one prescaler step.
fn criterion_3() -> Check {
    let started = Instant::now();
    let steps: Vec<u32> = Prescaler::all().map(Prescaler::step).collect();
    let results: Vec<Result<Vec<u64>, String>> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let base = random_campaign(seed);
            let mut detect: Vec<Option<Cycle>> = Vec::new();
            for &p in &steps {
                let mut c = base.clone();
                c.set("prescaler_step", &p.to_string()).map_err(|e| e.to_string())?;
                let o = run_ok(&c)?;
                ensure(o.unreached.is_empty(), || format!("seed {seed}: fault not reached"))?;
                detect.push(o.report.detection_latencies.first().and_then(|d| d.detect_cycle));
            }
            let reference = detect[0];
            let mut deltas = Vec::new();
            for (i, &p) in steps.iter().enumerate() {
                match (reference, detect[i]) {
                    (Some(r), Some(d)) => {
                        ensure(d >= r && d - r < u64::from(p), || format!("seed {seed} P={p}: {d} vs {r}"))?;
                        deltas.push(d - r);
                    }
                    (None, None) => deltas.push(0),
                    _ => return Err(format!("seed {seed} P={p}: detected set differs")),
                }
            }
            Ok(deltas)
        })
        .collect();
    let elapsed = started.elapsed();
    let mut max_delta = vec![0u64; steps.len()];
    for r in results {
        for (m, d) in max_delta.iter_mut().zip(r?) {
            *m = (*m).max(d);
        }
    }
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("1600 runs, max delta per P {max_delta:?} ({elapsed:.1?})"))
}

/// Queue-per-ID reference for the transaction table.
struct Reference {
    cap: Capacity,
    queues: HashMap<(Direction, u32), VecDeque<u64>>,
    live: usize,
}

impl Reference {
    fn per_id(&self, id: u32) -> usize {
        self.queues.iter().filter(|((_, i), _)| *i == id).map(|(_, q)| q.len()).sum()
    }

    fn ids_in_use(&self) -> BTreeSet<u32> {
        self.queues.iter().filter(|(_, q)| !q.is_empty()).map(|((_, i), _)| *i).collect()
    }

    fn admit(&self, id: u32) -> Option<StallReason> {
        let n = self.per_id(id);
        if n >= usize::from(self.cap.txn_per_uniq_id) {
            return Some(StallReason::PerIdLimit);
        }
        if n == 0 && self.ids_in_use().len() >= usize::from(self.cap.max_uniq_ids) {
            return Some(StallReason::IdSpace);
        }
        if self.live >= usize::from(self.cap.max_outstanding) {
            return Some(StallReason::Full);
        }
        None
    }
}

fn ott_sequence(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = rng.gen_range(1..=4u16);
    let per = rng.gen_range(1..=4u16);
    let total = rng.gen_range(1..=(ids * per).min(8));
    let cap = Capacity { max_uniq_ids: ids, txn_per_uniq_id: per, max_outstanding: total };
    let mut ott: OutstandingTable = OutstandingTable::new(cap);
    let mut reference = Reference { cap, queues: HashMap::new(), live: 0 };
    let mut token = 0u64;
    let mut slot_of: HashMap<u64, u16> = HashMap::new();
    let ops = rng.gen_range(1..=64);
    for step in 0..ops {
        let ctx = |what: String| format!("seed {seed} step {step}: {what}");
        let roll = rng.gen_range(0..100);
        if roll < 55 {
            let dir = if rng.gen_bool(0.5) { Direction::Write } else { Direction::Read };
            let id = rng.gen_range(0..6u32);
            token += 1;
            let desc = TxnDescriptor { dir, id: TxnId::raw(id), addr: token, burst_len: 1, issue_cycle: 0 };
            let expect = reference.admit(id);
            match (ott.enqueue(desc, ()), expect) {
                (Ok(slot), None) => {
                    reference.queues.entry((dir, id)).or_default().push_back(token);
                    reference.live += 1;
                    slot_of.insert(token, slot);
                }
                (Err(got), Some(want)) if got == want => {}
                (got, want) => return Err(ctx(format!("enqueue {got:?}, reference {want:?}"))),
            }
        } else if roll < 95 {
            let live: Vec<(Direction, u32, u64)> = reference
                .queues
                .iter()
                .flat_map(|((d, i), q)| q.iter().map(move |t| (*d, *i, *t)))
                .collect();
            if live.is_empty() {
                continue;
            }
            let mut live = live;
            live.sort_by_key(|x| x.2);
            let (dir, id, t) = live[rng.gen_range(0..live.len())];
            let slot = slot_of[&t];
            ott.get_mut(slot).ok_or_else(|| ctx("live slot missing".into()))?.state = TxnState::Done;
            let q = reference.queues.get_mut(&(dir, id)).unwrap();
            let is_head = q.front() == Some(&t);
            match ott.complete(slot) {
                Ok(e) if is_head => {
                    ensure(e.desc.addr == t, || ctx("completed the wrong entry".into()))?;
                    q.pop_front();
                    reference.live -= 1;
                }
                Err(OttError::OutOfOrderComplete(s)) if !is_head && s == slot => {}
                other => return Err(ctx(format!("complete {:?}, reference head {is_head}", other.map(|e| e.desc.addr)))),
            }
        } else {
            let aborted = ott.abort_all();
            ensure(aborted.len() == reference.live, || ctx("abort count".into()))?;
            reference.queues.clear();
            reference.live = 0;
            ensure(ott.remap().is_empty(), || ctx("remapper not released".into()))?;
        }
        ensure(ott.occupancy() == reference.live, || ctx("occupancy".into()))?;
        for dir in [Direction::Write, Direction::Read] {
            for id in 0..6u32 {
                let head = ott.head_of_raw(dir, id).and_then(|s| ott.get(s)).map(|e| e.desc.addr);
                let want = reference.queues.get(&(dir, id)).and_then(|q| q.front().copied());
                ensure(head == want, || ctx(format!("head of {dir}/{id}: {head:?} vs {want:?}")))?;
            }
        }
        ott.check_invariants().map_err(ctx)?;
    }
    Ok(())
}

fn criterion_4() -> Check {
    (0..1000u64).into_par_iter().try_for_each(ott_sequence)?;
    Ok("1000 sequences match the queue-per-ID reference".into())
}

/// Disabled monitor leaves the port trace untouched.
fn criterion_5() -> Check {
    (0..50u64).into_par_iter().try_for_each(|seed| {
        let mut c = SimConfig::default();
        c.seed = seed;
        let mut detached = c.clone();
        detached.attach = false;
        let mut disabled = c.clone();
        disabled.set("enable", "0").map_err(|e| e.to_string())?;
        let a = run_ok(&detached)?;
        let b = run_ok(&disabled)?;
        ensure(trace_to_string(&a.trace) == trace_to_string(&b.trace), || format!("seed {seed}: traces differ"))?;
        ensure(b.verdicts.is_empty() && b.irq_pulses == 0, || format!("seed {seed}: disabled monitor acted"))
    })?;
    Ok("50 seeds, byte-identical traces".into())
}

fn criterion_6() -> Check {
    let widths: Vec<(u32, u32)> = Prescaler::all().map(|p| (p.step(), required_counter_bits(256, p.step()))).collect();
    for &(p, bits) in &widths {
        // Smallest width whose range holds ceil(256 / p).
        let steps = 256u64.div_ceil(u64::from(p));
        let mut w = 0;
        while (1u64 << w) - 1 < steps {
            w += 1;
        }
        ensure(bits == w, || format!("P={p}: {bits} bits, expected {w}"))?;
    }
    ensure(widths.windows(2).all(|w| w[1].1 <= w[0].1), || "width grows with P".into())?;
    ensure(widths[0].1 == 9 && widths[5] == (32, 4), || format!("{widths:?}"))?;
    Ok(format!("{widths:?}"))
}

/// Fault-free campaigns never raise a verdict.
fn criterion_7() -> Check {
    let started = Instant::now();
    let caps = [1u16, 16, 32, 128];
    (0..500u64).into_par_iter().try_for_each(|seed| {
        let mut c = SimConfig::default();
        c.seed = seed;
        c.traffic.n_txns = 48;
        c.max_uniq_ids = 4;
        c.traffic.n_ids = 4;
        c.regs.variant = if seed % 2 == 0 { Variant::FullCounter } else { Variant::TinyCounter };
        c.set("capacity", &caps[(seed as usize / 2) % 4].to_string()).map_err(|e| e.to_string())?;
        c.set("prescaler_step", &(1u32 << (seed % 8)).to_string()).map_err(|e| e.to_string())?;
        let o = run_ok(&c)?;
        ensure(o.verdicts.is_empty(), || format!("seed {seed}: {:?}", o.verdicts.first()))?;
        ensure(o.terminated && o.txns.iter().all(|t| t.status == TxnStatus::Done), || format!("seed {seed}: unfinished"))
    })?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("500 runs, zero verdicts ({elapsed:.1?})"))
}

/// Every fault is followed by a bounded return to monitoring and new traffic.
fn criterion_8() -> Check {
    let cases: Vec<(FaultKind, u64)> = FaultKind::ALL.iter().flat_map(|&k| (0..12u64).map(move |s| (k, s))).collect();
    let results: Vec<Result<u64, String>> = cases
        .par_iter()
        .map(|&(kind, seed)| {
            let mut c = SimConfig::default();
            c.seed = seed;
            c.traffic.n_txns = 60;
            c.traffic.gap = "2-6".parse().unwrap();
            c.regs.variant = if seed % 2 == 0 { Variant::FullCounter } else { Variant::TinyCounter };
            let plan = generate(&c.traffic, seed);
            let target = plan.iter().take(20).position(|p| p.dir == kind.dir() && (kind != FaultKind::MidBurstStall || p.len >= 2));
            let Some(target) = target else { return Ok(0) };
            let trigger = if kind == FaultKind::MidBurstStall { Trigger::AtBeat(1) } else { Trigger::AtPhaseStart };
            c.faults = vec![fault(kind, target, trigger)];
            let o = run_ok(&c)?;
            let ctx = |m: String| format!("{kind} seed {seed}: {m}");
            ensure(o.terminated, || ctx("did not terminate".into()))?;
            let isolations: Vec<_> = o.events.iter().filter(|e| e.kind == EventKind::Isolate).collect();
            ensure(isolations.len() == 1, || ctx(format!("{} isolations", isolations.len())))?;
            ensure(o.irq_pulses == 1, || ctx(format!("{} irq pulses", o.irq_pulses)))?;
            ensure(o.leaked_requests == 0, || ctx("request reached the subordinate while severed".into()))?;
            let iso = isolations[0];
            let occupancy: u64 = iso.detail.trim_start_matches("aborted=").parse().unwrap();
            let resume = o
                .events
                .iter()
                .find(|e| e.kind == EventKind::Resume && e.cycle > iso.cycle)
                .ok_or_else(|| ctx("never resumed".into()))?;
            let bound = c.reset_latency + occupancy + 2;
            ensure(resume.cycle - iso.cycle <= bound, || ctx(format!("resumed after {} > {bound}", resume.cycle - iso.cycle)))?;
            let slverrs = o.events.iter().filter(|e| e.kind == EventKind::Slverr).count() as u64;
            let aborted = o.txns.iter().filter(|t| t.status == TxnStatus::Aborted).count() as u64;
            ensure(slverrs == occupancy && aborted == occupancy, || {
                ctx(format!("{occupancy} aborted in table, {slverrs} SLVERR, {aborted} aborted at manager"))
            })?;
            let clean_after = o
                .txns
                .iter()
                .any(|t| t.status == TxnStatus::Done && t.issue_cycle.is_some_and(|i| i > resume.cycle));
            ensure(clean_after, || ctx("no transaction completed after resuming".into()))?;
            Ok(resume.cycle - iso.cycle)
        })
        .collect();
    let mut runs = 0;
    let mut worst = 0;
    for r in results {
        let d = r?;
        if d > 0 {
            runs += 1;
            worst = worst.max(d);
        }
    }
    ensure(runs >= FaultKind::ALL.len() * 6, || format!("only {runs} usable runs"))?;
    Ok(format!("{runs} faulted runs, worst isolation-to-monitoring {worst} cycles"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("ethernet250 detection cycles", criterion_1),
        ("protocol violation latency", criterion_2),
        ("prescaler soundness", criterion_3),
        ("table vs reference", criterion_4),
        ("transparency", criterion_5),
        ("counter width trend", criterion_6),
        ("no false positives", criterion_7),
        ("recovery liveness", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
