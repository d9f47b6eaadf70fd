use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use moesi_sim::MetricsTable;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moesi-sim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hand_trace_summary() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.trace");
    fs::write(&t, "# two cores\nL 0 0x0\nL 1 0x0\nS 0 0x0\n").unwrap();
    let report = dir.path().join("r.csv");
    let o = bin(&["simulate", path(&t), "--scheme", "inv", "--cores", "2", "--report", path(&report), "--format", "csv"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("total=3 read_reqs=2 invalidates=1 updates=0 writebacks=0"), "{}", stdout(&o));
    let table = MetricsTable::parse_csv(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(table.total_transactions(), 3);

    let o = bin(&["simulate", path(&t), "--scheme", "upd", "--report", path(&report)]);
    assert!(stdout(&o).starts_with("total=3 read_reqs=2 invalidates=0 updates=1"));
    let (config, table) = MetricsTable::parse_json(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(config.num_cores, 2, "core count inferred from the trace");
    assert_eq!(table.totals().updates, 1);
}

#[test]
fn report_to_stdout_without_report_path() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.trace");
    fs::write(&t, "L 0 0x40\n").unwrap();
    let o = bin(&["simulate", path(&t), "--scheme", "adapted", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("core,loads,stores,read_reqs,invalidates,updates,writebacks\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("total=1"));
}

#[test]
fn generate_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("locks.trace");
    let o = bin(&["generate", "locks", "--cores", "4", "--refs", "2000", "--seed", "3", "--out", path(&t)]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&t).unwrap();
    assert!(text.starts_with('#'));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2000);

    let again = dir.path().join("again.trace");
    bin(&["generate", "locks", "--cores", "4", "--refs", "2000", "--seed", "3", "--out", path(&again)]);
    assert_eq!(fs::read(&t).unwrap(), fs::read(&again).unwrap());

    let o = bin(&["simulate", path(&t), "--scheme", "threshold:2", "--verify", "--report", path(&dir.path().join("r.json"))]);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.trace");
    assert_eq!(bin(&["generate", "locks", "--cores", "17", "--out", path(&out)]).status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(bin(&["generate", "server", "--cores", "1", "--refs", "10"]).status.code(), Some(3));

    let t = dir.path().join("t.trace");
    fs::write(&t, "L 0 0x0\n").unwrap();
    assert_eq!(bin(&["simulate", path(&t), "--scheme", "threshold:"]).status.code(), Some(2));
    assert_eq!(bin(&["simulate", path(&t), "--scheme", "inv:2"]).status.code(), Some(2));

    fs::write(&t, "L 0 0x0\nX 1 0x4\n").unwrap();
    let o = bin(&["simulate", path(&t), "--scheme", "inv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{o:?}");

    fs::write(&t, "L 3 0x0\n").unwrap();
    assert_eq!(bin(&["simulate", path(&t), "--scheme", "inv", "--cores", "2"]).status.code(), Some(3));
    assert_eq!(bin(&["simulate", path(&dir.path().join("missing")), "--scheme", "inv"]).status.code(), Some(3));
}

#[test]
fn sweep_writes_combined_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bin(&[
        "sweep", "--workloads", "locks,arrays", "--cores", "2,4", "--schemes", "inv,upd,sharers:*",
        "--refs", "3000", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("workload,cores,scheme,param,read_reqs,invalidates,updates,total"));
    // per workload: 2 cores → inv, upd, K=2; 4 cores → inv, upd, K=2..4
    assert_eq!(lines.count(), 2 * (3 + 5));

    let plan = dir.path().join("plan.conf");
    fs::write(&plan, "workloads = server\ncores = 2\nschemes = adapted\nrefs = 1000\n").unwrap();
    let o = bin(&["sweep", "--config", path(&plan)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 2);
}
