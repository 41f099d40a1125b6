//! Acceptance gate: one PASS/FAIL line per primary criterion.
//!
//! Run with `cargo test -p glassbox-cli --test acceptance -- --nocapture`.

#[path = "../../core/tests/criteria/mod.rs"]
mod criteria;
mod common;
#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

use criteria::Check;

fn run(store: &Path, args: &[&str]) -> Result<Value, String> {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_glassbox"))
        .arg("--store")
        .arg(store)
        .arg("--json")
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    let value: Value = serde_json::from_slice(&out.stdout)
        .map_err(|e| format!("{args:?}: {e}; stderr {}", String::from_utf8_lossy(&out.stderr)))?;
    if out.status.success() {
        Ok(value)
    } else {
        Err(format!("{args:?} exited {:?}: {value}", out.status.code()))
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Result<(u16, Value), String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).map_err(|e| e.to_string())?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").map_err(|e| e.to_string())?;
    let mut raw = String::new();
    s.read_to_string(&mut raw).map_err(|e| e.to_string())?;
    let (head, body) = raw.split_once("\r\n\r\n").ok_or("malformed response")?;
    let status: u16 = head.split_whitespace().nth(1).and_then(|c| c.parse().ok()).ok_or("no status")?;
    let body = if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        dechunk(body)
    } else {
        body.to_string()
    };
    Ok((status, serde_json::from_str(&body).map_err(|e| format!("{e}: {body}"))?))
}

fn dechunk(mut body: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = body.split_once("\r\n") {
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        out.push_str(&rest[..n]);
        body = &rest[n..].trim_start_matches("\r\n");
    }
    out
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(store: &Path, port: u16) -> Result<Server, String> {
    let child = Command::new(env!("CARGO_BIN_EXE_glassbox"))
        .arg("--store")
        .arg(store)
        .args(["serve", "--port", &port.to_string()])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let server = Server(child);
    let start = Instant::now();
    while start.elapsed() < Duration::from_secs(20) {
        if http_get(port, "/health").is_ok() {
            return Ok(server);
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    Err("server did not come up".into())
}

fn ready_ids(port: u16) -> Result<Vec<(String, String)>, String> {
    let (status, list) = http_get(port, "/pipelines")?;
    if status != 200 {
        return Err(format!("GET /pipelines -> {status}"));
    }
    let mut out: Vec<(String, String)> = list
        .as_array()
        .ok_or("pipeline list is not an array")?
        .iter()
        .filter(|p| p["status"] == "ready")
        .map(|p| (p["id"].as_str().unwrap_or_default().to_string(), p["name"].as_str().unwrap_or_default().to_string()))
        .collect();
    out.sort();
    Ok(out)
}

/// Nine pipelines over three synthetic datasets, chart export, a verdict,
/// and a server restart.
fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path();
    let datasets: [(&str, &[&str]); 3] = [
        ("BGS", &["--shape", "balanced", "--seed", "1"]),
        ("GS", &["--shape", "gold-like", "--seed", "2"]),
        ("BGSC", &["--shape", "balanced", "--confound", "0.6", "--seed", "3"]),
    ];
    for (name, extra) in datasets {
        let mut args = vec!["synth", "--name", name];
        args.extend_from_slice(extra);
        run(store, &args)?;
    }
    run(store, &["synth", "--name", "NRC", "--shape", "unlabeled-like", "--seed", "4", "--unlabeled"])?;

    let reps: [(&str, &str); 3] = [("tfidf", "svc-linear:1"), ("tfidf-swr", "svc-linear:1"), ("numeric", "rf:50:5")];
    let mut ids = Vec::new();
    for (name, _) in datasets {
        for (repr, model) in reps {
            let rec = run(store, &["train", "--dataset", name, "--repr", repr, "--model", model])?;
            if rec["status"] != "ready" {
                return Err(format!("{name} {repr}: {rec}"));
            }
            ids.push(rec["id"].as_str().unwrap_or_default().to_string());
        }
    }
    if ids.len() != 9 {
        return Err(format!("{} pipelines", ids.len()));
    }

    let out: PathBuf = store.join("charts");
    let files = run(
        store,
        &[
            "export-charts",
            "--out",
            out.to_str().unwrap(),
            "--hypothesis-pipeline",
            &ids[3],
            "--hypothesis-dataset",
            "NRC",
            "--spec",
            "Report:increase:1965:1985",
            "--spec",
            "Review:increase:1965:1985",
        ],
    )?;
    let files: Vec<String> = files
        .as_array()
        .ok_or("export returned no file list")?
        .iter()
        .filter_map(|f| f.as_str().map(String::from))
        .collect();
    let mut kinds = std::collections::BTreeMap::new();
    for f in &files {
        let v: Value = serde_json::from_slice(&std::fs::read(f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let chart = v["chart"].as_str().ok_or(format!("{f}: no chart tag"))?.to_string();
        let bad = common::violations(&glassbox::schemas::chart_schema_name(&chart), &v);
        if !bad.is_empty() {
            return Err(format!("{f}: {}", bad.join("; ")));
        }
        *kinds.entry(chart).or_insert(0usize) += 1;
    }
    for (kind, min) in [
        ("accuracy-bars", 1),
        ("confusion-heatmap", 18),
        ("pair-ranking", 6 * 28),
        ("importance-bars", 3),
        ("label-distribution", 4),
    ] {
        if kinds.get(kind).copied().unwrap_or(0) < min {
            return Err(format!("expected at least {min} {kind} charts, got {kinds:?}"));
        }
    }

    let verdict = run(store, &["hypothesis", "--pipeline", &ids[3], "--dataset", "NRC", "--spec", "Report:increase:1965:1985"])?;
    let bad = common::violations("hypothesis-outcome", &verdict);
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    let outcome = verdict["verdicts"][0]["reestimated"]["outcome"].as_str().unwrap_or("?").to_string();

    let port = free_port();
    let before = {
        let _server = serve(store, port)?;
        ready_ids(port)?
    };
    let port = free_port();
    let after = {
        let _server = serve(store, port)?;
        let ids = ready_ids(port)?;
        let (status, report) = http_get(port, &format!("/pipelines/{}/report", ids[0].0))?;
        if status != 200 || !common::violations("evaluation-report", &report).is_empty() {
            return Err(format!("report after restart: {status}"));
        }
        ids
    };
    if before.len() != 9 || before != after {
        return Err(format!("{} pipelines before restart, {} after", before.len(), after.len()));
    }
    Ok(format!(
        "9 pipelines, {} chart files valid {:?}, GS re-estimated Report verdict {outcome}, restart kept 9",
        files.len(),
        kinds
    ))
}

#[test]
fn primary_criteria() {
    let checks: Vec<(&str, fn() -> Check)> = vec![
        ("re-estimation recovers gold counts", criteria::reestimation_recovery),
        ("metric identities", criteria::metric_identities),
        ("tf-idf oracle equivalence", criteria::tfidf_oracle),
        ("naive bayes brute force", criteria::nb_enumeration),
        ("linear and rbf svc", criteria::svc_checks),
        ("random forest determinism and purity", criteria::rf_checks),
        ("synthetic eight-genre workflow", criteria::synthetic_workflow),
        ("lime consistency", criteria::lime_consistency),
        ("agreement views vs grouping oracle", criteria::views_oracle),
        ("end-to-end cli, charts, verdict, restart", end_to_end),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
