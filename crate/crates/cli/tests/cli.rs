use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn axmc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_axmc"));
    c.env_remove("AXMC_SEED");
    c
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A small synthetic task in a fresh directory.
fn task() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("income.csv");
    ok(axmc()
        .args(["synth", "--rows", "800", "--seed", "5", "--out"])
        .arg(&csv)
        .output()
        .unwrap());
    let schema = dir.path().join("income.schema.json");
    assert!(schema.exists());
    (dir, csv, schema)
}

fn run_args(csv: &Path, schema: &Path, out: &Path, budget: &str) -> Vec<String> {
    [
        "run",
        "--data",
        csv.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--measures",
        "mmce,f1_gap",
        "--budget",
        budget,
        "--seed",
        "1",
        "--m",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn snapshot(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("session.json")).unwrap()).unwrap()
}

/// Drop wall-clock fields, which legitimately differ between runs.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for k in ["wall_time", "seconds_used", "seconds_allowed"] {
                m.remove(k);
            }
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn staged_run_continue_and_export() {
    let (dir, csv, schema) = task();
    let s1 = dir.path().join("s1");
    let out = ok(axmc()
        .args(run_args(&csv, &schema, &s1, "2"))
        .output()
        .unwrap());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mmce"));
    for f in ["session.json", "front.csv", "iterations.jsonl"] {
        assert!(s1.join(f).exists(), "{f} missing");
    }
    let snap = snapshot(&s1);
    assert_eq!(snap["format"], "axmc-session-v1");
    assert_eq!(snap["budget"]["iterations_done"], 2);
    let log = std::fs::read_to_string(s1.join("iterations.jsonl")).unwrap();
    assert_eq!(
        log.lines().count(),
        snap["archive"]["records"].as_array().unwrap().len()
    );

    // Same flags reproduce the same front.
    let s2 = dir.path().join("s2");
    ok(axmc()
        .args(run_args(&csv, &schema, &s2, "2"))
        .output()
        .unwrap());
    assert_eq!(
        std::fs::read_to_string(s1.join("front.csv")).unwrap(),
        std::fs::read_to_string(s2.join("front.csv")).unwrap()
    );

    ok(axmc()
        .args([
            "continue",
            "--budget",
            "1",
            "--wmin",
            "0.1",
            "--wmax",
            "0.9",
            "--session",
        ])
        .arg(&s1)
        .output()
        .unwrap());
    let snap = snapshot(&s1);
    assert_eq!(snap["budget"]["iterations_done"], 3);
    assert_eq!(
        snap["weight_box"],
        serde_json::json!([[0.1, 0.9], [0.0, 1.0]])
    );

    let out = ok(axmc()
        .args(["front", "--split", "test", "--format", "csv", "--session"])
        .arg(&s1)
        .output()
        .unwrap());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "index,eta,max_depth,min_child_weight,subsample,colsample,lambda,gamma,nrounds,thr,mmce,f1_gap,provenance,iteration"
    );
    let target = dir.path().join("front.json");
    ok(axmc()
        .args(["front", "--format", "json", "--session"])
        .arg(&s1)
        .arg("--out")
        .arg(&target)
        .output()
        .unwrap());
    let table: Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(table["split"], "valid");

    // A second `run` into the same directory refuses to clobber it.
    let out = axmc()
        .args(run_args(&csv, &schema, &s1, "1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let (dir, csv, schema) = task();
    let out_dir = dir.path().join("x");
    let base = run_args(&csv, &schema, &out_dir, "0");

    let mut no_measures = base.clone();
    let i = no_measures.iter().position(|a| a == "--measures").unwrap();
    no_measures.drain(i..i + 2);
    assert_eq!(
        axmc().args(&no_measures).output().unwrap().status.code(),
        Some(2)
    );

    let mut bad_measure = base.clone();
    bad_measure[i + 1] = "mmce,accuracy".into();
    assert_eq!(
        axmc().args(&bad_measure).output().unwrap().status.code(),
        Some(2)
    );

    let mut three = base.clone();
    three[i + 1] = "mmce,f1_gap,sparsity".into();
    three.extend(["--wmin", "0.1", "--wmax", "0.9"].map(String::from));
    assert_eq!(axmc().args(&three).output().unwrap().status.code(), Some(2));

    let mut infeasible = base.clone();
    infeasible.extend(["--wmin", "0.9", "--wmax", "0.1"].map(String::from));
    let out = axmc().args(&infeasible).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weight box"));
    assert!(
        !out_dir.join("session.json").exists(),
        "nothing runs before validation"
    );

    let mut missing_data = base.clone();
    missing_data[2] = dir.path().join("nope.csv").to_string_lossy().into();
    assert_eq!(
        axmc().args(&missing_data).output().unwrap().status.code(),
        Some(1)
    );

    let bad_seed = axmc()
        .args(&base)
        .env("AXMC_SEED", "minus-one")
        .output()
        .unwrap();
    assert_eq!(bad_seed.status.code(), Some(2));

    let corrupt = dir.path().join("corrupt");
    std::fs::create_dir_all(&corrupt).unwrap();
    std::fs::write(
        corrupt.join("session.json"),
        "{\"format\":\"axmc-session-v1\"",
    )
    .unwrap();
    let out = axmc()
        .args(["continue", "--budget", "1", "--session"])
        .arg(&corrupt)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = axmc()
        .args(["front", "--session"])
        .arg(&corrupt)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn environment_seed_and_flag_schema() {
    let (dir, csv, _) = task();
    let out_dir = dir.path().join("flags");
    ok(axmc()
        .args([
            "run",
            "--target",
            "income",
            "--protected",
            "sex",
            "--categorical",
            "workclass,marital,occupation",
        ])
        .args([
            "--measures",
            "mmce,tpr_gap",
            "--budget",
            "0",
            "--seed",
            "1",
            "--m",
            "4",
        ])
        .arg("--data")
        .arg(&csv)
        .arg("--out")
        .arg(&out_dir)
        .env("AXMC_SEED", "7")
        .output()
        .unwrap());
    let snap = snapshot(&out_dir);
    assert_eq!(snap["id"], "session-7");
    assert_eq!(snap["config"]["seed"], 7);
    assert_eq!(snap["schema"]["protected"], "sex");
    assert_eq!(snap["budget"]["iterations_done"], 0);
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    write!(
        s,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let code = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = resp.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
    (code, body)
}

#[test]
fn serve_answers_and_reports_port_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = axmc()
        .args(["serve", "--port", "0", "--sessions"])
        .arg(dir.path())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .expect(&line)
        .to_string();
    let (code, body) = http_get(&addr, "/sessions");
    assert!(started.elapsed() < Duration::from_secs(5));
    assert_eq!((code, body.trim_end()), (200, "[]"));

    let port = addr.rsplit(':').next().unwrap();
    let clash = axmc()
        .args(["serve", "--port", port, "--sessions"])
        .arg(dir.path())
        .output()
        .unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(clash.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&clash.stderr).contains("binding"));
}

#[tokio::test(flavor = "multi_thread")]
async fn cli_and_service_produce_the_same_snapshot() {
    use axum::body::Body;
    use axum::http::{Method, Request};
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let (dir, csv, schema) = task();
    let s1 = dir.path().join("cli");
    ok(axmc()
        .args(run_args(&csv, &schema, &s1, "2"))
        .output()
        .unwrap());

    let sessions = dir.path().join("served");
    let app = axmc_service::router(axmc_service::AppState::open(&sessions, None).unwrap());
    let call = |method: Method, uri: String, body: Value| {
        let app = app.clone();
        async move {
            let req = Request::builder()
                .method(method)
                .uri(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap();
            let resp = app.oneshot(req).await.unwrap();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            serde_json::from_slice::<Value>(&bytes).unwrap()
        }
    };
    let schema_json: Value =
        serde_json::from_str(&std::fs::read_to_string(&schema).unwrap()).unwrap();
    let created = call(
        Method::POST,
        "/sessions".into(),
        serde_json::json!({
            "data": {"path": std::fs::canonicalize(&csv).unwrap()},
            "schema": schema_json,
            "measures": ["mmce", "f1_gap"],
            "seed": 1,
            "m": 4,
        }),
    )
    .await;
    let id = created["id"].as_str().unwrap().to_string();
    call(
        Method::POST,
        format!("/sessions/{id}/run"),
        serde_json::json!({"iterations": 2}),
    )
    .await;
    let start = Instant::now();
    loop {
        let st = call(Method::GET, format!("/sessions/{id}"), Value::Null).await;
        if st["status"] == "done" {
            break;
        }
        assert!(start.elapsed() < Duration::from_secs(120));
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    let mut served: Value = serde_json::from_str(
        &std::fs::read_to_string(sessions.join(format!("{id}.json"))).unwrap(),
    )
    .unwrap();
    let mut cli = snapshot(&s1);
    strip_timing(&mut served);
    strip_timing(&mut cli);
    assert_eq!(served, cli);
}
