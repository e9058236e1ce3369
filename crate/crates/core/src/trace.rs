// SPDX-License-Identifier: Apache-2.0

//! Per-cycle CSV trace format.
//!
//! One row per cycle with a fixed header. Booleans are `0`/`1`, responses
//! are `OKAY`/`SLVERR`, fields of idle channels are written as `0`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axi::{AddrChannel, BChannel, CycleSample, RChannel, RespCode, WChannel};

pub const HEADER: [&str; 23] = [
    "cycle", "aw_valid", "aw_ready", "aw_id", "aw_addr", "aw_len", "w_valid", "w_ready", "w_last", "b_valid",
    "b_ready", "b_id", "b_resp", "ar_valid", "ar_ready", "ar_id", "ar_addr", "ar_len", "r_valid", "r_ready",
    "r_id", "r_last", "r_resp",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: burst length {len} outside 1..=256")]
    BurstLen { row: usize, len: u16 },
    #[error("row {row}: response `{value}` must be OKAY or SLVERR")]
    Resp { row: usize, value: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    cycle: u64,
    aw_valid: u8,
    aw_ready: u8,
    aw_id: u32,
    aw_addr: u64,
    aw_len: u16,
    w_valid: u8,
    w_ready: u8,
    w_last: u8,
    b_valid: u8,
    b_ready: u8,
    b_id: u32,
    b_resp: String,
    ar_valid: u8,
    ar_ready: u8,
    ar_id: u32,
    ar_addr: u64,
    ar_len: u16,
    r_valid: u8,
    r_ready: u8,
    r_id: u32,
    r_last: u8,
    r_resp: String,
}

fn bit(b: bool) -> u8 {
    u8::from(b)
}

impl From<&CycleSample> for Row {
    fn from(s: &CycleSample) -> Self {
        // Idle channels are written as zeros so that identical bus activity
        // always produces identical bytes.
        let aw = if s.aw.valid { s.aw } else { AddrChannel { ready: s.aw.ready, ..Default::default() } };
        let ar = if s.ar.valid { s.ar } else { AddrChannel { ready: s.ar.ready, ..Default::default() } };
        let b = if s.b.valid { s.b } else { BChannel { ready: s.b.ready, ..Default::default() } };
        let r = if s.r.valid { s.r } else { RChannel { ready: s.r.ready, ..Default::default() } };
        Row {
            cycle: s.cycle,
            aw_valid: bit(aw.valid),
            aw_ready: bit(aw.ready),
            aw_id: aw.id,
            aw_addr: aw.addr,
            aw_len: aw.len,
            w_valid: bit(s.w.valid),
            w_ready: bit(s.w.ready),
            w_last: bit(s.w.valid && s.w.last),
            b_valid: bit(b.valid),
            b_ready: bit(b.ready),
            b_id: b.id,
            b_resp: b.resp.to_string(),
            ar_valid: bit(ar.valid),
            ar_ready: bit(ar.ready),
            ar_id: ar.id,
            ar_addr: ar.addr,
            ar_len: ar.len,
            r_valid: bit(r.valid),
            r_ready: bit(r.ready),
            r_id: r.id,
            r_last: bit(r.last),
            r_resp: r.resp.to_string(),
        }
    }
}

impl Row {
    fn into_sample(self, row: usize) -> Result<CycleSample, TraceError> {
        let resp = |v: &str| v.parse::<RespCode>().map_err(|_| TraceError::Resp { row, value: v.to_string() });
        let len = |valid: u8, len: u16| {
            if valid != 0 && !(1..=crate::axi::MAX_BURST_LEN).contains(&len) {
                Err(TraceError::BurstLen { row, len })
            } else {
                Ok(len)
            }
        };
        Ok(CycleSample {
            cycle: self.cycle,
            aw: AddrChannel {
                valid: self.aw_valid != 0,
                ready: self.aw_ready != 0,
                id: self.aw_id,
                addr: self.aw_addr,
                len: len(self.aw_valid, self.aw_len)?,
            },
            w: WChannel { valid: self.w_valid != 0, ready: self.w_ready != 0, last: self.w_last != 0 },
            b: BChannel {
                valid: self.b_valid != 0,
                ready: self.b_ready != 0,
                id: self.b_id,
                resp: resp(&self.b_resp)?,
            },
            ar: AddrChannel {
                valid: self.ar_valid != 0,
                ready: self.ar_ready != 0,
                id: self.ar_id,
                addr: self.ar_addr,
                len: len(self.ar_valid, self.ar_len)?,
            },
            r: RChannel {
                valid: self.r_valid != 0,
                ready: self.r_ready != 0,
                id: self.r_id,
                last: self.r_last != 0,
                resp: resp(&self.r_resp)?,
            },
        })
    }
}

pub fn write_trace<W: Write>(out: W, samples: &[CycleSample]) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(out);
    for s in samples {
        wtr.serialize(Row::from(s))?;
    }
    if samples.is_empty() {
        wtr.write_record(HEADER)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn trace_to_string(samples: &[CycleSample]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, samples).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace is ASCII")
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<CycleSample>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != HEADER {
        return Err(TraceError::Header { expected: HEADER.join(","), found: found.join(",") });
    }
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| row.map_err(TraceError::from).and_then(|r| r.into_sample(i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_sample() -> impl Strategy<Value = CycleSample> {
        (
            any::<u32>(),
            (any::<bool>(), any::<bool>(), 0u32..16, 0u64..4096, 1u16..=256),
            (any::<bool>(), any::<bool>(), any::<bool>()),
            (any::<bool>(), any::<bool>(), 0u32..16, any::<bool>()),
            (any::<bool>(), any::<bool>(), 0u32..16, 0u64..4096, 1u16..=256),
            (any::<bool>(), any::<bool>(), 0u32..16, any::<bool>(), any::<bool>()),
        )
            .prop_map(|(cycle, aw, w, b, ar, r)| {
                let resp = |e: bool| if e { RespCode::SlvErr } else { RespCode::Okay };
                let mut s = CycleSample {
                    cycle: cycle as u64,
                    aw: AddrChannel { valid: aw.0, ready: aw.1, id: aw.2, addr: aw.3, len: aw.4 },
                    w: WChannel { valid: w.0, ready: w.1, last: w.2 && w.0 },
                    b: BChannel { valid: b.0, ready: b.1, id: b.2, resp: resp(b.3) },
                    ar: AddrChannel { valid: ar.0, ready: ar.1, id: ar.2, addr: ar.3, len: ar.4 },
                    r: RChannel { valid: r.0, ready: r.1, id: r.2, last: r.3, resp: resp(r.4) },
                };
                // Canonical form: idle channels carry zeros.
                if !s.aw.valid {
                    s.aw = AddrChannel { ready: s.aw.ready, ..Default::default() };
                }
                if !s.ar.valid {
                    s.ar = AddrChannel { ready: s.ar.ready, ..Default::default() };
                }
                if !s.b.valid {
                    s.b = BChannel { ready: s.b.ready, ..Default::default() };
                }
                if !s.r.valid {
                    s.r = RChannel { ready: s.r.ready, ..Default::default() };
                }
                s
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(samples in proptest::collection::vec(arb_sample(), 0..20)) {
            let text = trace_to_string(&samples);
            let back = read_trace(text.as_bytes()).unwrap();
            prop_assert_eq!(back, samples);
        }
    }

    #[test]
    fn header_is_exact() {
        let text = trace_to_string(&[CycleSample::idle(0)]);
        let first = text.lines().next().unwrap();
        assert_eq!(first, HEADER.join(","));
        assert_eq!(text.lines().nth(1).unwrap(), "0,0,0,0,0,0,0,0,0,0,0,0,OKAY,0,0,0,0,0,0,0,0,0,OKAY");
    }

    #[test]
    fn rejects_bad_header_and_len() {
        assert!(matches!(read_trace("cycle,foo\n1,2\n".as_bytes()), Err(TraceError::Header { .. })));
        let mut text = trace_to_string(&[CycleSample::idle(0)]);
        text = text.replacen("\n0,0,0,0,0,0", "\n0,1,0,0,0,0", 1);
        assert!(matches!(read_trace(text.as_bytes()), Err(TraceError::BurstLen { row: 1, len: 0 })));
    }
}
