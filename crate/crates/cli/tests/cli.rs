use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("scenarios").join(name).to_string_lossy().into_owned()
}

fn waiter(args: &[&str]) -> Output {
    waiter_with_stdin(args, "")
}

fn waiter_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_waiter"))
        .args(args)
        .env_remove("RUST_LOG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Temp paths vary per run; goldens see a fixed placeholder instead.
fn scrub(text: &str, dir: &Path) -> String {
    text.replace(&dir.to_string_lossy().into_owned(), "<tmp>")
}

fn golden(name: &str, got: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(got, want, "golden {name} differs");
}

fn ok(o: &Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    stdout(o)
}

fn build_layers(dir: &Path) -> (String, PathBuf) {
    let out = dir.join("layers.json");
    let o = waiter(&[
        "map",
        "build",
        "--grid",
        &fixture("restaurant.grid"),
        "--detections",
        &fixture("restaurant_detections.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    (ok(&o), out)
}

#[test]
fn map_build_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let (text, out) = build_layers(dir.path());
    golden("map_build.txt", &scrub(&text, dir.path()));
    let layers = out.to_str().unwrap();
    let dump = ok(&waiter(&["map", "dump", "--layers", layers]));
    golden("map_dump.txt", &dump);
    assert!(text.starts_with(&dump));
    let json = ok(&waiter(&["map", "dump", "--layers", layers, "--json"]));
    assert_eq!(json, std::fs::read_to_string(&out).unwrap());
}

#[test]
fn nav_goal_output() {
    let dir = tempfile::tempdir().unwrap();
    let (_, layers) = build_layers(dir.path());
    let mut text = String::new();
    for (table, robot) in [("table_3", "1,1,0"), ("table_0", "8.5,0.5,3.14"), ("table_4", "-0.0,0,-1.5")] {
        let o = waiter(&[
            "nav-goal",
            "--map",
            &fixture("restaurant.grid"),
            "--layers",
            layers.to_str().unwrap(),
            "--furniture",
            table,
            "--robot",
            robot,
        ]);
        text.push_str(&format!("# {table} from {robot}\n{}", ok(&o)));
    }
    golden("nav_goal.txt", &text);
}

#[test]
fn nav_goal_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (_, layers) = build_layers(dir.path());
    let base = ["nav-goal", "--map", &fixture("restaurant.grid"), "--layers", layers.to_str().unwrap()];
    let missing = waiter(&[&base[..], &["--furniture", "table_9", "--robot", "1,1,0"]].concat());
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("table_9"));
    let bad_pose = waiter(&[&base[..], &["--furniture", "table_1", "--robot", "1,1"]].concat());
    assert_eq!(bad_pose.status.code(), Some(2));
}

#[test]
fn place_output() {
    let cloud = fixture("tabletop.xyz");
    let text = ok(&waiter(&["place", "--cloud", &cloud, "--radius", "0.05"]));
    golden("place.txt", &text);
    let point = text.lines().find(|l| l.starts_with("point:")).unwrap();
    let coords: Vec<f64> = point
        .split_whitespace()
        .skip(1)
        .map(|kv| kv.split_once('=').unwrap().1.parse().unwrap())
        .collect();
    // on the bare top, away from the plate (west) and the cup (north-east)
    assert!((0.0..=0.79).contains(&coords[0]) && (0.0..=0.59).contains(&coords[1]), "{point}");
    assert!((coords[2] - 0.74).abs() < 0.01);
    let too_big = waiter(&["place", "--cloud", &cloud, "--radius", "0.5"]);
    assert_eq!(too_big.status.code(), Some(1));
    assert!(stderr(&too_big).contains("no placement space"));
    let not_a_cloud = waiter(&["place", "--cloud", &fixture("restaurant.grid"), "--radius", "0.05"]);
    assert_eq!(not_a_cloud.status.code(), Some(2));
    assert!(stderr(&not_a_cloud).contains("line 1"));
}

#[test]
fn run_writes_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (log, metrics) = (dir.path().join("run.jsonl"), dir.path().join("m.json"));
    let o = waiter(&[
        "run",
        "--scenario",
        &fixture("restaurant_41.json"),
        "--log",
        log.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    golden("run_restaurant.txt", &ok(&o));
    let doc = std::fs::read_to_string(&metrics).unwrap();
    assert!(doc.contains("\"accuracy_exact\": \"37/41\""));
    let lines = std::fs::read_to_string(&log).unwrap();
    assert!(lines.lines().count() > 100);
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v.get("t").is_some());
    }

    let seq_log = dir.path().join("seq.jsonl");
    let seq = waiter(&[
        "run",
        "--scenario",
        &fixture("restaurant_41.json"),
        "--mode",
        "sequential",
        "--log",
        seq_log.to_str().unwrap(),
    ]);
    assert_eq!(ok(&seq), ok(&o));
    assert_eq!(std::fs::read_to_string(&seq_log).unwrap(), lines);
}

#[test]
fn run_bypass_and_registry_override() {
    let text = ok(&waiter(&["run", "--scenario", &fixture("bypass_detect.json")]));
    golden("run_bypass.txt", &text);
    let custom = ok(&waiter(&[
        "run",
        "--scenario",
        &fixture("restaurant_41.json"),
        "--registry",
        &fixture("registry_announce.json"),
    ]));
    assert!(custom.contains("accuracy: 37/41"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("r.json");
    std::fs::write(&bad, r#"{"representations": []}"#).unwrap();
    let o = waiter(&["run", "--scenario", &fixture("bypass_detect.json"), "--registry", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("casual_chat"));
}

#[test]
fn metrics_diff_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    ok(&waiter(&["run", "--scenario", &fixture("restaurant_41.json"), "--metrics", a.to_str().unwrap()]));
    let same = waiter(&["metrics", "diff", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(ok(&same), "metrics identical\n");

    let b = dir.path().join("b.json");
    ok(&waiter(&["run", "--scenario", &fixture("bypass_detect.json"), "--metrics", b.to_str().unwrap()]));
    let differ = waiter(&["metrics", "diff", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(differ.status.code(), Some(1));
    golden("metrics_diff.txt", &stdout(&differ));

    let garbage = dir.path().join("g.json");
    std::fs::write(&garbage, "{").unwrap();
    let o = waiter(&["metrics", "diff", a.to_str().unwrap(), garbage.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repl_transcript() {
    let input = "Could you bring me a cola?\n\nWhat is on the menu?\nhello there\n:quit\nnever read\n";
    let o = waiter_with_stdin(&["repl", "--scenario", &fixture("restaurant_41.json"), "--table", "table_2"], input);
    let text = ok(&o);
    golden("repl.txt", &text);
    assert!(!text.contains("never read"));

    let custom = waiter_with_stdin(
        &[
            "repl",
            "--scenario",
            &fixture("restaurant_41.json"),
            "--registry",
            &fixture("registry_announce.json"),
            "--mode",
            "sequential",
        ],
        "Can I have a green tea?\n",
    );
    let text = ok(&custom);
    assert!(text.contains("table_1> "), "default table is the first customer table");
    assert!(text.contains("speak(I am fetching the green tea now.) OK\nnavigate(table_0) OK"));
}

#[test]
fn repl_unknown_table() {
    let o = waiter_with_stdin(&["repl", "--scenario", &fixture("restaurant_41.json"), "--table", "bar"], ":quit\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bar"));
}

#[test]
fn backend_selection() {
    let scenario = fixture("bypass_detect.json");
    // a stub with no script falls back to the rules, so the outcome matches
    let stub = ok(&waiter(&["--backend", "stub", "run", "--scenario", &scenario]));
    let rules = ok(&waiter(&["run", "--scenario", &scenario]));
    assert_eq!(stub, rules);

    let remote_no_endpoint = waiter(&["--backend", "remote", "run", "--scenario", &scenario]);
    assert_eq!(remote_no_endpoint.status.code(), Some(2));
    assert!(stderr(&remote_no_endpoint).contains("endpoint"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("backend.json");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    std::fs::write(
        &cfg,
        format!(r#"{{"mode": "remote", "endpoint": "http://127.0.0.1:{port}", "model": "m", "max_retries": 0, "timeout_secs": 2}}"#),
    )
    .unwrap();
    // nothing listens there: every call falls back to the rules
    let remote = ok(&waiter(&["--config", cfg.to_str().unwrap(), "run", "--scenario", &scenario]));
    assert_eq!(remote, rules);
    let overridden = ok(&waiter(&["--config", cfg.to_str().unwrap(), "--backend", "rules", "run", "--scenario", &scenario]));
    assert_eq!(overridden, rules);

    std::fs::write(&cfg, r#"{"mode": "rules", "temperature": 9}"#).unwrap();
    let bad = waiter(&["--config", cfg.to_str().unwrap(), "run", "--scenario", &scenario]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["run"][..],
        &["run", "--scenario", "/nonexistent/s.json"][..],
        &["place", "--cloud", "x", "--radius", "wide"][..],
        &["run", "--scenario", "x", "--mode", "sideways"][..],
    ] {
        let o = waiter(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let help = waiter(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for cmd in ["map", "nav-goal", "place", "run", "repl", "metrics"] {
        assert!(stdout(&help).contains(cmd));
    }
}

#[test]
fn repl_replays_scenario_faults() {
    let ask = "Could you bring me an orange juice?\n";
    let o = waiter_with_stdin(&["repl", "--scenario", &fixture("bypass_detect.json"), "--table", "table_3"], &ask.repeat(2));
    let text = ok(&o);
    golden("repl_bypass.txt", &text);
    assert_eq!(text.matches("COMPLETED_WITH_ASSIST").count(), 1);
}
