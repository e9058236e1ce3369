// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::Command;

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tmu-sim"))
}

#[test]
fn run_lint_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eth.cfg");
    fs::write(&cfg, "preset = ethernet250\nvariant = fc\nfault = BValidWithheld,0,phase,0\n").unwrap();
    let trace = dir.path().join("t.csv");
    let report = dir.path().join("r.json");

    let st = sim()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--trace-out")
        .arg(&trace)
        .arg("--report-out")
        .arg(&report)
        .arg("--dump-ott")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(String::from_utf8_lossy(&st.stdout).contains("# table at cycle 260"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["detection_latencies"][0]["detect_cycle"], 260);
    assert_eq!(json["detection_latencies"][0]["verdict"], "P5");

    // The recorded trace replays to the same finding.
    let st = sim().args(["lint", "--config"]).arg(&cfg).arg("--trace").arg(&trace).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stdout).starts_with("260,P5,0"));

    let grid = dir.path().join("g.txt");
    fs::write(&grid, "variant = tc, fc\n").unwrap();
    let st = sim().args(["sweep", "--config"]).arg(&cfg).arg("--grid").arg(&grid).output().unwrap();
    assert!(st.status.success());
    let points: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(points.as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "prescaler_step = 3\n").unwrap();
    let st = sim().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(3));

    fs::write(&cfg, "n_txns = 4\nfault = RValidWithheld,99,phase,0\n").unwrap();
    let st = sim().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}
