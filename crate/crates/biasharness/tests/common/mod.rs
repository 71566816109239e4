//! Shared fixtures for integration tests: synthetic datasets, scripted
//! responses and a minimal HTTP server with canned replies.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use biasharness::{Dataset, GoldLabel, MockBackend, Provenance, Sentence};

/// Build a synthetic cleaned dataset; `biased` lists the ids that carry a
/// Biased gold label.
pub fn synthetic_dataset(total: usize, biased: &[usize], tag: &str) -> Dataset {
    let sentences: Vec<Sentence> = (0..total)
        .map(|id| Sentence {
            id,
            text: format!("Synthetic statement {id} about the council budget."),
            gold: if biased.contains(&id) {
                GoldLabel::Biased
            } else {
                GoldLabel::NonBiased
            },
            outlet: None,
            topic: None,
        })
        .collect();
    Dataset::from_sentences(sentences, Provenance::synthetic(tag)).unwrap()
}

/// JSON finding array flagging the given sentences of a dataset.
pub fn findings_for(dataset: &Dataset, flag_ids: &[usize], score: f64) -> String {
    let findings: Vec<serde_json::Value> = dataset
        .sentences
        .iter()
        .filter(|s| flag_ids.contains(&s.id))
        .map(|s| {
            serde_json::json!({
                "sentence": s.text,
                "bias_type": "political bias",
                "bias_score": score,
                "bias_description": "scripted test finding",
            })
        })
        .collect();
    serde_json::to_string(&findings).unwrap()
}

/// The units (id lists plus joined text) a mode produces for a dataset.
pub fn units_for(dataset: &Dataset, mode: &biasharness::EvaluationMode) -> Vec<(Vec<usize>, String)> {
    match mode {
        biasharness::EvaluationMode::Blocks { size } => biasharness::make_blocks(dataset, *size)
            .unwrap()
            .into_iter()
            .map(|block| (block.sentence_ids, block.text))
            .collect(),
        biasharness::EvaluationMode::Individual => dataset
            .sentences
            .iter()
            .map(|s| (vec![s.id], s.text.clone()))
            .collect(),
    }
}

/// Keyed mock backend that flags `flag_ids` for every unit of a dataset in
/// the given mode, keyed on the exact user message the given prompt spec
/// renders for each unit.
pub fn keyed_backend_for_spec(
    dataset: &Dataset,
    mode: &biasharness::EvaluationMode,
    spec: &biasharness::PromptSpec,
    flag_ids: &[usize],
    score: f64,
) -> MockBackend {
    let bundle =
        biasharness::build_prompt(spec, &biasharness::TemplateSet::builtin()).unwrap();
    let mut entries: HashMap<String, String> = HashMap::new();
    for (ids, text) in units_for(dataset, mode) {
        let messages = biasharness::render_messages(&bundle, &text).unwrap();
        let key = messages.last().unwrap().content.clone();
        let flagged: Vec<usize> = ids.iter().copied().filter(|id| flag_ids.contains(id)).collect();
        entries.insert(key, findings_for(dataset, &flagged, score));
    }
    MockBackend::keyed_by_content(entries)
}

/// Keyed mock for the base prompt spec: the user message then equals the
/// unit text.
pub fn keyed_backend_flagging(
    dataset: &Dataset,
    mode: &biasharness::EvaluationMode,
    flag_ids: &[usize],
    score: f64,
) -> MockBackend {
    keyed_backend_for_spec(dataset, mode, &biasharness::PromptSpec::base(), flag_ids, score)
}

/// One canned HTTP response.
#[derive(Clone)]
pub struct CannedResponse {
    pub status: u16,
    pub body: String,
}

impl CannedResponse {
    pub fn ok_completion(text: &str) -> Self {
        CannedResponse {
            status: 200,
            body: serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": text}}]
            })
            .to_string(),
        }
    }

    pub fn status(status: u16) -> Self {
        CannedResponse {
            status,
            body: "{}".into(),
        }
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        401 => "Unauthorized",
        403 => "Forbidden",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

/// A single-threaded HTTP server that replays canned responses in order.
/// Each connection serves one request and closes.
pub struct FakeServer {
    pub base_url: String,
    requests_seen: Arc<Mutex<Vec<String>>>,
    // The serving thread detaches when the server is dropped; it exits once
    // its canned responses are consumed or the process ends.
    _handle: std::thread::JoinHandle<()>,
}

impl FakeServer {
    pub fn start(responses: Vec<CannedResponse>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind localhost");
        let addr = listener.local_addr().unwrap();
        let requests_seen = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests_seen);
        let handle = std::thread::spawn(move || {
            for response in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut buffer = Vec::new();
                let mut chunk = [0u8; 4096];
                // read headers
                let header_end = loop {
                    match stream.read(&mut chunk) {
                        Ok(0) => break None,
                        Ok(n) => {
                            buffer.extend_from_slice(&chunk[..n]);
                            if let Some(pos) = find_subsequence(&buffer, b"\r\n\r\n") {
                                break Some(pos + 4);
                            }
                        }
                        Err(_) => break None,
                    }
                };
                let Some(header_end) = header_end else { continue };
                let headers = String::from_utf8_lossy(&buffer[..header_end]).to_string();
                let content_length = headers
                    .lines()
                    .find_map(|line| {
                        let (name, value) = line.split_once(':')?;
                        name.eq_ignore_ascii_case("content-length")
                            .then(|| value.trim().parse::<usize>().ok())?
                    })
                    .unwrap_or(0);
                while buffer.len() < header_end + content_length {
                    match stream.read(&mut chunk) {
                        Ok(0) => break,
                        Ok(n) => buffer.extend_from_slice(&chunk[..n]),
                        Err(_) => break,
                    }
                }
                let body =
                    String::from_utf8_lossy(&buffer[header_end..header_end + content_length.min(buffer.len() - header_end)])
                        .to_string();
                seen.lock().unwrap().push(format!("{headers}{body}"));

                let reply = format!(
                    "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    response.status,
                    reason(response.status),
                    response.body.len(),
                    response.body
                );
                let _ = stream.write_all(reply.as_bytes());
                let _ = stream.flush();
            }
        });
        FakeServer {
            base_url: format!("http://{addr}"),
            requests_seen,
            _handle: handle,
        }
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests_seen.lock().unwrap().clone()
    }
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}
