use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epcert"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn epcert(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn epcert")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scenario(name: &str) -> String {
    scenarios().join(name).to_str().unwrap().to_string()
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key}"))
        .to_string()
}

#[test]
fn honest_p3_certifies_with_k_messages() {
    let out = stdout(&epcert(&["run", &scenario("p3_honest.toml"), "--trials", "1"]));
    assert_eq!(field(&out, "certified"), "1");
    assert_eq!(field(&out, "mean_endpoint_messages"), "10.0");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.toml"));
        let csv = dir.path().join(format!("r{i}.csv"));
        let o = epcert(&[
            "run",
            &scenario("p4_offline.toml"),
            "--seed",
            "77",
            "--out",
            out.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ]);
        stdout(&o);
        reports.push((fs::read(out).unwrap(), fs::read(csv).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let other = stdout(&epcert(&["run", &scenario("p4_offline.toml"), "--seed", "78"]));
    assert_ne!(other.as_bytes(), reports[0].0.as_slice());
}

#[test]
fn exact_and_float_agree_on_outcomes() {
    let f = stdout(&epcert(&["run", &scenario("p3_honest.toml")]));
    let x = stdout(&epcert(&["run", &scenario("p3_honest.toml"), "--exact"]));
    assert_eq!(field(&f, "certified"), field(&x, "certified"));
    assert_eq!(field(&f, "mean_endpoint_messages"), field(&x, "mean_endpoint_messages"));
}

#[test]
fn attack_outcomes_do_not_change_exit_status() {
    let out = stdout(&epcert(&["run", &scenario("p3_attack.toml"), "--trials", "50"]));
    let successes: u64 = field(&out, "attack_successes").parse().unwrap();
    assert!(successes > 0);
    assert!(out.contains("attack_probability"));
}

#[test]
fn dump_writes_chain_trace_and_registry() {
    let dir = tempfile::tempdir().unwrap();
    let o = epcert(&["run", &scenario("p3_honest.toml"), "--dump", dir.path().to_str().unwrap()]);
    stdout(&o);
    let chain = fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    assert!(chain.starts_with("height,"));
    assert!(chain.lines().count() > 1);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 10);
    let registry = fs::read_to_string(dir.path().join("registry.csv")).unwrap();
    assert_eq!(registry.lines().count(), 1 + 201);
}

#[test]
fn timing_sweep_reproduces_worked_example() {
    let out = stdout(&epcert(&["analyze", &scenario("sweep_timing.toml")]));
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row[col("latency_p3")], "17");
        assert_eq!(row[col("latency_p4")], "27");
        assert_eq!(row[col("decentralized_messages")], "3");
        assert_eq!(row[col("basic_messages")], row[col("verifiers")]);
    }
}

#[test]
fn security_sweep_is_monotone() {
    let out = stdout(&epcert(&["analyze", &scenario("sweep_security.toml"), "--trials", "0"]));
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let p = header.iter().position(|h| *h == "p_exact").unwrap();
    let col: Vec<f64> = lines.map(|l| l.split(',').nth(p).unwrap().parse().unwrap()).collect();
    assert_eq!(col.len(), 41);
    assert!(col.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(col[0], 0.0);
    assert_eq!(*col.last().unwrap(), 1.0);
}

#[test]
fn presets_lists_every_channel() {
    let out = stdout(&epcert(&["presets"]));
    assert!(out.starts_with("name,"));
    for name in ["phone_sms", "phone_ivr", "postal", "email", "ip", "web", "dns", "bank"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("{name},"))), "{name}");
    }
}

#[test]
fn invalid_config_names_the_field_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenarios().join("p3_honest.toml"))
        .unwrap()
        .replace("threshold = 6", "threshold = 11");
    fs::write(&bad, text).unwrap();
    let out = dir.path().join("out.toml");
    let o = epcert(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
    assert!(!out.exists());

    fs::write(&bad, "protocol = \"p3\"\npopulation = 10\ncommittee = 3\nthreshold = 2\ncolour = 1\n").unwrap();
    let o = epcert(&["run", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    fs::write(&bad, fs::read_to_string(scenarios().join("p3_honest.toml")).unwrap().replace("\"web\"", "\"pigeon\"")).unwrap();
    let o = epcert(&["run", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel.preset"));
}

#[test]
fn missing_file_fails_cleanly() {
    let o = epcert(&["run", "/nonexistent/scenario.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("reading"));
}
