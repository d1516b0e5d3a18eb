//! Shared fixtures and process helpers for the CLI integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::Output;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use qdaps::types::{Candidate, CandidateSet, Mode};

/// 20-candidate worked example: (answer, plausibility, popularity,
/// published debiased score, published normalized share).
pub const BEHAVIORISM_TABLE: [(&str, f64, f64, f64, f64); 20] = [
    ("Sigmund Freud", 10.0, 1.000, 5.000, 0.009),
    ("Neal Miller", 20.0, 0.029, 19.710, 0.037),
    ("Jean Piaget", 5.0, 0.785, 3.038, 0.006),
    ("Ernst Hilgard", 25.0, 0.176, 22.800, 0.043),
    ("Ivan Pavlov", 20.0, 0.637, 13.630, 0.026),
    ("Carl Rogers", 10.0, 0.462, 7.690, 0.014),
    ("Lev Vygotsky", 5.0, 0.444, 3.890, 0.007),
    ("Albert Bandura", 70.0, 0.373, 56.945, 0.107),
    ("Harry Harlow", 25.0, 0.275, 21.563, 0.040),
    ("Edward Thorndike", 60.0, 0.198, 54.060, 0.101),
    ("Konrad Lorenz", 30.0, 0.180, 27.300, 0.051),
    ("B.F. Skinner", 80.0, 0.890, 44.400, 0.083),
    ("Gordon Allport", 15.0, 0.134, 13.995, 0.026),
    ("Walter Mischel", 35.0, 0.062, 33.915, 0.064),
    ("Edward Tolman", 40.0, 0.056, 38.880, 0.073),
    ("Clark Hull", 50.0, 0.050, 48.750, 0.092),
    ("Julian Rotter", 45.0, 0.030, 44.325, 0.083),
    ("Abraham Maslow", 5.0, 0.730, 3.175, 0.006),
    ("O. Hobart Mowrer", 30.0, 0.014, 29.790, 0.056),
    ("Kenneth Spence", 40.0, 0.007, 39.860, 0.075),
];

pub fn behaviorism_set() -> CandidateSet {
    CandidateSet {
        question_id: "behaviorism".into(),
        candidates: BEHAVIORISM_TABLE
            .iter()
            .enumerate()
            .map(|(i, &(answer, pls, pop, _, _))| {
                let mut c = Candidate::new(answer, i + 1, pls);
                c.popularity = pop;
                c
            })
            .collect(),
        mode: Mode::Listwise,
        gold_provided: true,
        model_id: "mock".into(),
        final_temperature: 0.0,
        attempts: 1,
    }
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs expected {expected} (tol {tol})"
    );
}

pub fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut command = std::process::Command::new(env!("CARGO_BIN_EXE_qdaps"));
    command.args(args);
    command.env_remove("QDAPS_LLM_BASE_URL");
    command.env_remove("QDAPS_PAGEVIEWS_BASE_URL");
    for (key, value) in envs {
        command.env(key, value);
    }
    command.output().expect("command runs")
}

pub fn assert_exit(output: &Output, code: i32, what: &str) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "{what}: stdout={} stderr={}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

pub fn read_manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Scripted pageview server: each known title gets 120 months of constant
/// views; unknown titles 404. Returns (base_url, hit counter).
pub fn spawn_pageview_server(known: Vec<(String, u64)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let title = path
                .split("/user/")
                .nth(1)
                .and_then(|rest| rest.split('/').next())
                .unwrap_or("")
                .to_string();
            let response = match known.iter().find(|(t, _)| *t == title) {
                Some((title, views)) => {
                    let items: Vec<serde_json::Value> = qdaps::popularity::window_months()
                        .into_iter()
                        .map(|m| {
                            serde_json::json!({
                                "article": title,
                                "timestamp": format!("{m}0100"),
                                "views": views,
                            })
                        })
                        .collect();
                    let body = serde_json::json!({ "items": items }).to_string();
                    format!(
                        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    )
                }
                None => "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
                    .to_string(),
            };
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), hits)
}

/// Ten models' correctness on five easy and five hard questions; easy
/// accuracies follow the published table (including the printed 0.8 for the
/// fourth model, whose cell marking disagrees with its row accuracy).
pub const QA_MODELS: [&str; 10] = [
    "llama-3.2-3b",
    "llama-3.1-8b",
    "mistral-7b",
    "qwen-2.5-7b",
    "llama-3.1-70b",
    "qwen-2.5-72b",
    "gemma-2-27b",
    "mistral-24b",
    "gemma-3-4b",
    "gpt-4",
];

pub const EASY_CORRECT: [[bool; 5]; 10] = [
    [true, true, true, true, false],
    [true, true, true, true, true],
    [false, true, true, true, false],
    [true, true, true, true, false],
    [true, true, true, true, true],
    [true, true, true, true, true],
    [true, true, true, true, true],
    [true, true, true, true, true],
    [true, true, false, false, false],
    [true, true, true, true, true],
];

pub const HARD_CORRECT: [[bool; 5]; 10] = [
    [true, false, false, true, false],
    [false, false, false, true, false],
    [true, false, false, false, false],
    [false, false, false, false, false],
    [false, false, true, true, false],
    [false, false, false, false, false],
    [false, false, false, true, false],
    [false, false, false, false, false],
    [false, false, false, false, true],
    [false, false, true, true, false],
];

pub const SPLIT_SCORES: [(&str, f64); 10] = [
    ("q1", 0.2),
    ("q2", 0.12),
    ("q3", 0.15),
    ("q4", 0.19),
    ("q5", 0.43),
    ("q6", 0.97),
    ("q7", 0.99),
    ("q8", 0.98),
    ("q9", 0.95),
    ("q10", 0.99),
];

