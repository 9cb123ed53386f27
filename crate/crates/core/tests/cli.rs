use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tuple_bubbles::synth;

fn tbq(args: &[&str], stdin: Option<&str>) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_tbq"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = child.stdin.take().unwrap();
    input.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(input);
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn dataset(dir: &Path) -> String {
    synth::write_dataset(
        &synth::orders_customers(),
        dir,
        &[
            ("theta", "3".into()),
            ("k", "2".into()),
            ("join_mode", "true".into()),
            ("k_mcv", "64".into()),
            ("model_dir", "model".into()),
        ],
    )
    .unwrap()
    .display()
    .to_string()
}

#[test]
fn build_query_stats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    let out = tbq(&["build", "--config", &config], None);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("built 5 bubbles (3 relation, 2 join)"));
    let model = dir.path().join("model");
    assert!(model.join("manifest.json").exists());
    assert!(model.join("bubbles/0000.net").exists());

    let model = model.display().to_string();
    let sql = "SELECT COUNT(*) FROM Orders o, Customer c WHERE o.c_key = c.c_key AND c.name = 'C4' AND o.date >= '01.03.2022'";
    let out = tbq(&["query", "--model", &model, sql], None);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("estimate: 2\n"));
    assert!(text(&out.stderr).contains("latency:"));

    let out = tbq(&["query", "--model", &model, "--join-estimation", "uniformity", sql], None);
    assert!(text(&out.stdout).starts_with("estimate: 1\n"));

    let out = tbq(&["query", "--model", &model, "--method", "ps", "--samples", "500", "--seed", "3", sql], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("ps(samples=500, seed=3)"));

    let out = tbq(&["stats", "--model", &model], None);
    assert_eq!(out.status.code(), Some(0));
    let stats = text(&out.stdout);
    assert!(stats.contains("bubble Orders#1+Customer#0: 3 rows"), "{stats}");
}

#[test]
fn repl_reads_queries_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    assert!(tbq(&["build", "--config", &config], None).status.success());
    let model = dir.path().join("model").display().to_string();
    let input = "SELECT COUNT(*) FROM Orders;\n\nSELECT MAX(price) FROM Orders\n";
    let out = tbq(&["query", "--model", &model, "--repl"], Some(input));
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.matches("estimate:").count(), 2);
    assert!(stdout.contains("estimate: 6\n"));
    assert!(stdout.contains("estimate: 40\n"));
}

#[test]
fn exit_codes_separate_user_and_environment_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    assert!(tbq(&["build", "--config", &config], None).status.success());
    let model = dir.path().join("model").display().to_string();

    let out = tbq(&["query", "--model", &model, "SELECT SUM(x FROM T"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("position 14"));

    let out = tbq(&["query", "--model", &model, "SELECT COUNT(*) FROM Nope"], None);
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("missing").display().to_string();
    assert_eq!(tbq(&["stats", "--model", &missing], None).status.code(), Some(2));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "theta = lots\n").unwrap();
    let out = tbq(&["build", "--config", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 1"));

    fs::write(dir.path().join("model/manifest.json"), "{\"format\": \"other/9\"}").unwrap();
    assert_eq!(tbq(&["stats", "--model", &model], None).status.code(), Some(2));
}

#[test]
fn parse_check_reports_each_line() {
    let out = tbq(
        &["parse", "--check"],
        Some("SELECT count(*) FROM T\n-- comment\nSELECT AVG(a) FROM T WHERE a BETWEEN 1 AND 2\n"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        text(&out.stdout),
        "ok 1: SELECT COUNT(*) FROM T\nok 2: SELECT AVG(a) FROM T WHERE a BETWEEN 1 AND 2\n"
    );
    let out = tbq(&["parse", "--check"], Some("SELECT COUNT(*) FROM T GROUP BY a\n"));
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).starts_with("error 1: unsupported construct: GROUP BY"));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dataset(dir.path());
    assert!(tbq(&["build", "--config", &config], None).status.success());
    let workload = dir.path().join("w.sql");
    fs::write(
        &workload,
        "SELECT COUNT(*) FROM Orders o, Customer c WHERE o.c_key = c.c_key AND c.name = 'C4'\n\
         SELECT SUM(price) FROM Orders WHERE price >= 20\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = tbq(
        &[
            "bench",
            "--config",
            &config,
            "--workload",
            workload.to_str().unwrap(),
            "--methods",
            "ve,uniformity",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);
    assert!(report.contains("model/ve,2,SELECT SUM(price) FROM Orders WHERE price >= 20,115,115,1,"));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("config,queries,failed,median,p95,max,mean,model_bytes\n"));
    assert!(out_dir.join("timing.csv").exists());
    assert!(text(&out.stdout).contains("model/uniformity"));
}
