#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn send(app: &Router, method: &str, path: &str, body: Option<String>) -> Reply {
    let req = Request::builder()
        .method(Method::from_bytes(method.as_bytes()).unwrap())
        .uri(path)
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        bytes,
    }
}

/// `expected` holds a subset of `actual`: objects may omit keys, arrays and
/// scalars must match exactly.
pub fn contains(actual: &Value, expected: &Value) -> Result<(), String> {
    match (actual, expected) {
        (Value::Object(a), Value::Object(e)) => {
            for (k, ev) in e {
                let av = a.get(k).ok_or_else(|| format!("missing key {k:?}"))?;
                contains(av, ev).map_err(|m| format!("{k}: {m}"))?;
            }
            Ok(())
        }
        (Value::Array(a), Value::Array(e)) => {
            if a.len() != e.len() {
                return Err(format!("array length {} != {}", a.len(), e.len()));
            }
            for (i, (av, ev)) in a.iter().zip(e).enumerate() {
                contains(av, ev).map_err(|m| format!("[{i}]: {m}"))?;
            }
            Ok(())
        }
        (Value::Number(a), Value::Number(e)) => {
            if a.as_f64() == e.as_f64() {
                Ok(())
            } else {
                Err(format!("{a} != {e}"))
            }
        }
        (a, e) if a == e => Ok(()),
        (a, e) => Err(format!("{a} != {e}")),
    }
}

pub struct GoldenOutcome {
    pub name: String,
    pub failure: Option<String>,
}

/// Runs every pair in order against one fresh service whose session is
/// persisted under `store`.
pub async fn run_golden(pairs: &[Value], store: &std::path::Path) -> Vec<GoldenOutcome> {
    let state = metricscope::AppState::open(42, Some(store.to_path_buf())).unwrap();
    let app = metricscope::router(state);
    let mut out = Vec::new();
    for pair in pairs {
        let name = pair["name"].as_str().unwrap().to_string();
        if pair.get("break_storage").and_then(Value::as_bool) == Some(true) {
            std::fs::remove_dir_all(store).unwrap();
            std::fs::write(store, "not a directory").unwrap();
        }
        let body = match &pair["body"] {
            Value::Null => None,
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        };
        let reply = send(
            &app,
            pair["method"].as_str().unwrap(),
            pair["path"].as_str().unwrap(),
            body,
        )
        .await;
        let want_status = pair["status"].as_u64().unwrap() as u16;
        let failure = if reply.status.as_u16() != want_status {
            Some(format!(
                "status {} != {want_status}: {}",
                reply.status,
                String::from_utf8_lossy(&reply.bytes)
            ))
        } else if pair["response"].is_null() {
            (!reply.bytes.is_empty()).then(|| "expected an empty body".to_string())
        } else {
            let actual = reply.json();
            let mut problem = contains(&actual, &pair["response"]).err();
            if problem.is_none() && reply.status.as_u16() >= 400 {
                let well_formed = actual["code"].is_string()
                    && actual["message"].as_str().is_some_and(|m| !m.is_empty());
                if !well_formed {
                    problem = Some("error body is not an ApiError".into());
                }
            }
            problem.map(|p| format!("{p}\nbody: {actual}"))
        };
        out.push(GoldenOutcome { name, failure });
    }
    out
}

pub fn golden_pairs() -> Vec<Value> {
    let text = include_str!("golden/pairs.json");
    serde_json::from_str(text).unwrap()
}

pub fn cars_csv() -> String {
    metricscope_core::synthetic::cars().to_csv_string()
}

pub struct Cli {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Cli {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_metricscope"))
        .args(args)
        .env_remove("METRICSCOPE_SEED")
        .output()
        .expect("binary runs");
    Cli {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Parses `cod,v1,v2,...` lines.
pub fn csv_lines(text: &str) -> Vec<(i64, Vec<f64>)> {
    text.lines()
        .map(|l| {
            let mut f = l.split(',');
            let cod = f.next().unwrap().parse().unwrap();
            (cod, f.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

/// Runs the same cars query through HTTP and the CLI and compares result
/// entries and projection coordinates bit for bit. Returns the number of
/// values compared.
pub async fn parity_check(dir: &std::path::Path) -> Result<usize, String> {
    let cars = dir.join("cars.csv");
    std::fs::write(&cars, cars_csv()).unwrap();
    let app = metricscope::router(metricscope::AppState::new(
        metricscope_core::workspace::Session::new(42),
        None,
    ));
    send(&app, "POST", "/datasets", Some(cars_csv())).await;
    let mut compared = 0;
    let cases: [(&str, &[&str], serde_json::Value); 3] = [
        (
            r#"{"name": "euclidean"}"#,
            &["--metric", "euclidean"],
            serde_json::json!({"knn": {"k": 51}}),
        ),
        (
            r#"{"name": "weighted_minkowski", "p": 4, "weights": [1, 0, 1, 1, 1, 0, 1, 1]}"#,
            &["--metric", "weighted_minkowski", "--p", "4", "--weights", "1,0,1,1,1,0,1,1"],
            serde_json::json!({"knn": {"neighbors": 40}}),
        ),
        (
            r#"{"name": "city_block"}"#,
            &["--metric", "city_block"],
            serde_json::json!({"range": {"radius": 400}}),
        ),
    ];
    for (i, (metric_json, metric_flags, kind)) in cases.iter().enumerate() {
        let mut body: serde_json::Value = serde_json::json!({
            "dataset": "ds-1",
            "metric": serde_json::from_str::<serde_json::Value>(metric_json).unwrap(),
            "center": {"cod": 4},
        });
        for (k, v) in kind.as_object().unwrap() {
            body[k] = v.clone();
        }
        let reply = send(&app, "POST", "/queries", Some(body.to_string())).await;
        if reply.status.as_u16() != 201 {
            return Err(format!("case {i}: HTTP {}", reply.status));
        }
        let reply = reply.json();
        let ws = reply["workspace_id"].as_str().unwrap().to_string();
        let seed = reply["seed"].as_u64().unwrap().to_string();

        let result_file = dir.join(format!("r{i}.csv"));
        let mut args = vec!["query", "--dataset", cars.to_str().unwrap(), "--center-cod", "4"];
        args.extend_from_slice(metric_flags);
        let kind_value;
        let (flag, value) = match kind.as_object().unwrap().iter().next().unwrap() {
            (k, v) if k == "knn" => match v.as_object().unwrap().iter().next().unwrap() {
                (name, n) => {
                    kind_value = n.to_string();
                    (if name == "k" { "--k" } else { "--neighbors" }, kind_value.as_str())
                }
            },
            (_, v) => {
                kind_value = v["radius"].to_string();
                ("--radius", kind_value.as_str())
            }
        };
        args.extend_from_slice(&[flag, value, "--out", result_file.to_str().unwrap()]);
        let run = cli(&args);
        if run.code != 0 {
            return Err(format!("case {i}: cli query failed: {}", run.stderr));
        }
        let lines = csv_lines(&std::fs::read_to_string(&result_file).unwrap());
        let entries = reply["result"]["entries"].as_array().unwrap();
        if lines.len() != entries.len() {
            return Err(format!("case {i}: {} CLI rows vs {} HTTP entries", lines.len(), entries.len()));
        }
        for ((cod, d), e) in lines.iter().zip(entries) {
            if *cod != e["cod"].as_i64().unwrap() || d[0].to_bits() != e["distance"].as_f64().unwrap().to_bits() {
                return Err(format!("case {i}: entry mismatch at cod {cod}"));
            }
            compared += 2;
        }

        let proj_file = dir.join(format!("p{i}.csv"));
        let mut args = vec![
            "project",
            "--dataset",
            cars.to_str().unwrap(),
            "--cods",
            result_file.to_str().unwrap(),
            "--seed",
            &seed,
            "--out",
            proj_file.to_str().unwrap(),
        ];
        args.extend_from_slice(metric_flags);
        let run = cli(&args);
        if run.code != 0 {
            return Err(format!("case {i}: cli project failed: {}", run.stderr));
        }
        let coords = csv_lines(&std::fs::read_to_string(&proj_file).unwrap());
        let http = send(&app, "GET", &format!("/workspaces/{ws}/projection"), None).await.json();
        let http_coords = http["coords"].as_array().unwrap();
        if coords.len() != http_coords.len() {
            return Err(format!("case {i}: projection sizes differ"));
        }
        for ((cod, xyz), p) in coords.iter().zip(http_coords) {
            let want = [p["x"].as_f64().unwrap(), p["y"].as_f64().unwrap(), p["z"].as_f64().unwrap()];
            if *cod != p["cod"].as_i64().unwrap() || xyz.iter().zip(want).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return Err(format!("case {i}: projection mismatch at cod {cod}"));
            }
            compared += 4;
        }
    }
    Ok(compared)
}
