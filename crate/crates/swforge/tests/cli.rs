//! Process-level checks of the swforge command line: exit codes, file
//! outputs and the documented output phrases.

use std::path::PathBuf;
use std::process::Command;

fn swforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swforge"))
}

fn tmp(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("swforge-cli-{}-{name}", std::process::id()));
    path
}

#[test]
fn run_named_scenario_succeeds_and_writes_outputs() {
    let trace = tmp("run.jsonl");
    let status = swforge()
        .args(["run", "3.1.1", "--trace"])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).expect("trace written");
    assert!(text.lines().count() > 20);
    let acct = trace.with_extension("jsonl.acct");
    let acct_text = std::fs::read_to_string(&acct).expect("accounting written");
    assert_eq!(acct_text.lines().count(), 2, "one start, one stop");
    let _ = std::fs::remove_file(&trace);
    let _ = std::fs::remove_file(&acct);
}

#[test]
fn run_from_scenario_file() {
    let trace = tmp("file.jsonl");
    let scenario = format!("{}/scenarios/3_2_2.toml", env!("CARGO_MANIFEST_DIR"));
    let status = swforge()
        .args(["run", &scenario, "--trace"])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(0));
    let _ = std::fs::remove_file(&trace);
    let _ = std::fs::remove_file(trace.with_extension("jsonl.acct"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let status = swforge()
        .args(["run", "9.9.9"])
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(2));
}

#[test]
fn validate_prints_the_table_verdicts() {
    let output = swforge()
        .args(["validate", "v6", "global", "ula"])
        .output()
        .expect("spawn swforge");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("Possible, but Not Recommended"));

    let output = swforge()
        .args(["validate", "v6", "link-local", "global"])
        .output()
        .expect("spawn swforge");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.trim() == "Possible");

    let output = swforge()
        .args(["validate", "v4", "private", "private"])
        .output()
        .expect("spawn swforge");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("Possible, but Not Recommended"));
    assert!(stdout.contains("nested-NAT"));
}

#[test]
fn validate_rejects_bad_scopes() {
    let status = swforge()
        .args(["validate", "v6", "banana", "ula"])
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(2));
}

#[test]
fn stats_and_routes_read_a_trace() {
    let trace = tmp("stats.jsonl");
    let status = swforge()
        .args(["run", "3.1.2", "--quiet", "--trace"])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(0));

    let output = swforge()
        .args(["stats", "--trace"])
        .arg(&trace)
        .output()
        .expect("spawn swforge");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("session up"));
    assert!(stdout.contains("tunnel down"));
    assert!(stdout.contains("v6"));

    let output = swforge()
        .args(["routes", "--trace"])
        .arg(&trace)
        .output()
        .expect("spawn swforge");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    // Router scenario: default route on the initiator, the delegated /48
    // routed back through the softwire on the concentrator.
    assert!(stdout.contains("::/0 via sc"));
    assert!(stdout.contains("2001:db8:100::/48 via si"));

    let _ = std::fs::remove_file(&trace);
    let _ = std::fs::remove_file(trace.with_extension("jsonl.acct"));
}

#[test]
fn stats_agree_with_the_accounting_stop_record() {
    // Two independent counters: the stats command re-sums the trace, the
    // accounting file snapshots the tunnel counters at teardown.
    let trace = tmp("xcheck.jsonl");
    let status = swforge()
        .args(["run", "3.1.1", "--quiet", "--trace"])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(status.code(), Some(0));

    let acct = std::fs::read_to_string(trace.with_extension("jsonl.acct")).unwrap();
    let stop: serde_json::Value = serde_json::from_str(acct.lines().nth(1).unwrap()).unwrap();
    let octets_in = stop["v6_octets_in"].as_u64().unwrap();
    assert!(octets_in > 0);

    let output = swforge()
        .args(["stats", "--trace"])
        .arg(&trace)
        .output()
        .expect("spawn swforge");
    let stdout = String::from_utf8_lossy(&output.stdout);
    let sc_in_line = stdout
        .lines()
        .find(|l| l.starts_with("sc") && l.contains(" in "))
        .expect("sc inbound line");
    let octets_from_stats: u64 = sc_in_line
        .split_whitespace()
        .last()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(octets_from_stats, octets_in);

    let _ = std::fs::remove_file(&trace);
    let _ = std::fs::remove_file(trace.with_extension("jsonl.acct"));
}

#[test]
fn nat_and_reply_overrides_change_the_outcome() {
    // Behind an address-and-port-dependent NAT the alternate reply source
    // must fail; from the original tuple it must succeed.
    let trace = tmp("nat.jsonl");
    let ok = swforge()
        .args(["run", "3.1.1", "--nat", "apdf", "--quiet", "--trace"])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(ok.code(), Some(0));

    let failed = swforge()
        .args([
            "run",
            "3.1.1",
            "--nat",
            "apdf",
            "--sc-reply",
            "alternate-address-port",
            "--quiet",
            "--trace",
        ])
        .arg(&trace)
        .status()
        .expect("spawn swforge");
    assert_eq!(failed.code(), Some(1));
    let _ = std::fs::remove_file(&trace);
    let _ = std::fs::remove_file(trace.with_extension("jsonl.acct"));
}

#[test]
fn embedded_scenarios_match_their_canonical_shapes() {
    use softwire::scenario::ScenarioConfig;
    let output = swforge().arg("scenarios").output().expect("spawn swforge");
    let stdout = String::from_utf8_lossy(&output.stdout);
    for id in ScenarioConfig::NAMED_IDS {
        assert!(stdout.contains(id), "{id} missing from listing");
    }
}

#[test]
fn scenario_files_agree_with_the_builtin_shapes() {
    use softwire::scenario::ScenarioConfig;
    for id in ScenarioConfig::NAMED_IDS {
        let path = format!(
            "{}/scenarios/{}.toml",
            env!("CARGO_MANIFEST_DIR"),
            id.replace('.', "_")
        );
        let text = std::fs::read_to_string(&path).expect("scenario file");
        let from_file: ScenarioConfig = toml::from_str(&text).expect("parses");
        let canonical = ScenarioConfig::named(id, from_file.seed).expect("known id");
        assert_eq!(from_file.id, canonical.id);
        assert_eq!(from_file.transport_af, canonical.transport_af);
        assert_eq!(from_file.payload_af, canonical.payload_af);
        assert_eq!(from_file.si_role, canonical.si_role);
        assert_eq!(
            from_file.network.nat.is_some(),
            canonical.network.nat.is_some(),
            "{id} NAT presence"
        );
    }
}
