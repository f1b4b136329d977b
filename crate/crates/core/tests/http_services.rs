//! Remote embedder and extractor against an in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, Once};

use serde_json::{json, Value};

use guidecqr::corpus::Document;
use guidecqr::embedding::{build_embedder, Embedder, EmbedderSpec, HttpEmbedder, API_KEY_ENV};
use guidecqr::enrichment::{extract_answer, AnswerExtractor, ExtractorSpec};
use guidecqr::guided::ConversationTurn;
use guidecqr::Error;

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: Value,
}

type Handler = dyn Fn(usize, &Seen) -> (u16, String) + Send + Sync;

struct MockServer {
    endpoint: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    fn start(handler: impl Fn(usize, &Seen) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let handler: Arc<Handler> = Arc::new(handler);
        let counter = Arc::new(AtomicUsize::new(0));
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let (handler, log, counter) = (handler.clone(), log.clone(), counter.clone());
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut request_line = String::new();
                    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
                        return;
                    }
                    let path = request_line
                        .split_whitespace()
                        .nth(1)
                        .unwrap_or("")
                        .to_string();
                    let mut length = 0;
                    let mut authorization = None;
                    loop {
                        let mut line = String::new();
                        reader.read_line(&mut line).unwrap();
                        let line = line.trim_end();
                        if line.is_empty() {
                            break;
                        }
                        let (name, value) = line.split_once(':').unwrap();
                        match name.to_ascii_lowercase().as_str() {
                            "content-length" => length = value.trim().parse().unwrap(),
                            "authorization" => authorization = Some(value.trim().to_string()),
                            _ => {}
                        }
                    }
                    let mut body = vec![0; length];
                    reader.read_exact(&mut body).unwrap();
                    let seen = Seen {
                        path,
                        authorization,
                        body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                    };
                    let n = counter.fetch_add(1, Ordering::SeqCst);
                    let (status, reply) = handler(n, &seen);
                    log.lock().unwrap().push(seen);
                    let response = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                        reply.len()
                    );
                    let _ = stream.write_all(response.as_bytes());
                });
            }
        });
        Self { endpoint, seen }
    }

    fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn set_key() {
    static KEY: Once = Once::new();
    KEY.call_once(|| std::env::set_var(API_KEY_ENV, "test-key"));
}

/// Answers every text with an 8-dimensional vector derived from its length.
fn echo_vectors(_: usize, seen: &Seen) -> (u16, String) {
    let texts = seen.body["texts"].as_array().unwrap();
    let vectors: Vec<Vec<f64>> = texts
        .iter()
        .map(|t| {
            let n = t.as_str().unwrap().len() as f64;
            (0..8).map(|i| n + i as f64).collect()
        })
        .collect();
    (200, json!({ "vectors": vectors }).to_string())
}

fn spec(server: &MockServer) -> EmbedderSpec {
    let mut spec = EmbedderSpec::http(server.endpoint.clone(), Some("mini".into()));
    spec.backoff_ms = 1;
    spec
}

#[test]
fn embeds_in_batches_with_bearer_token() {
    set_key();
    let server = MockServer::start(echo_vectors);
    let mut spec = spec(&server);
    spec.batch_size = 2;
    let embedder = HttpEmbedder::new(&spec).unwrap();
    let vectors = embedder
        .embed(&["a", "bb", "ccc", "dddd", "eeeee"])
        .unwrap();
    assert_eq!(vectors.len(), 5);
    for (i, v) in vectors.iter().enumerate() {
        assert_eq!(v.values[0], (i + 1) as f64, "order preserved");
        assert_eq!(v.dimension(), 8);
    }
    let requests = server.requests();
    assert_eq!(requests.len(), 3);
    for r in &requests {
        assert_eq!(r.path, "/embed");
        assert_eq!(r.authorization.as_deref(), Some("Bearer test-key"));
        assert_eq!(r.body["model"], "mini");
    }
}

#[test]
fn retries_server_errors_then_succeeds() {
    set_key();
    let server = MockServer::start(|n, seen| {
        if n < 2 {
            (503, "{}".into())
        } else {
            echo_vectors(n, seen)
        }
    });
    let embedder = HttpEmbedder::new(&spec(&server)).unwrap();
    assert_eq!(embedder.embed(&["text"]).unwrap().len(), 1);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    set_key();
    let server = MockServer::start(|_, _| (429, "{}".into()));
    let mut spec = spec(&server);
    spec.max_retries = 2;
    let err = HttpEmbedder::new(&spec)
        .unwrap()
        .embed(&["text"])
        .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Http {
                status: Some(429),
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    set_key();
    let server = MockServer::start(|_, _| (400, "{}".into()));
    let err = HttpEmbedder::new(&spec(&server))
        .unwrap()
        .embed(&["text"])
        .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Http {
                status: Some(400),
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn vector_count_mismatch_is_protocol_error() {
    set_key();
    let server = MockServer::start(|_, _| (200, json!({"vectors": [vec![1.0; 8]]}).to_string()));
    let err = HttpEmbedder::new(&spec(&server))
        .unwrap()
        .embed(&["a", "b"])
        .unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }), "{err}");
}

#[test]
fn dimension_mismatch_is_protocol_error() {
    set_key();
    let server = MockServer::start(|_, _| {
        (
            200,
            json!({"vectors": [vec![1.0; 8], vec![1.0; 9]]}).to_string(),
        )
    });
    let err = HttpEmbedder::new(&spec(&server))
        .unwrap()
        .embed(&["a", "b"])
        .unwrap_err();
    assert!(matches!(err, Error::Protocol { .. }), "{err}");
}

#[test]
fn unreachable_endpoint_is_http_error() {
    let mut spec = EmbedderSpec::http("http://127.0.0.1:9", None);
    spec.max_retries = 0;
    let err = HttpEmbedder::new(&spec).unwrap().embed(&["a"]).unwrap_err();
    assert!(matches!(err, Error::Http { status: None, .. }), "{err}");
}

#[test]
fn memoized_provider_calls_once_per_text() {
    set_key();
    let server = MockServer::start(echo_vectors);
    let embedder = build_embedder(&spec(&server)).unwrap();
    embedder.embed(&["one", "two"]).unwrap();
    embedder.embed(&["two", "one"]).unwrap();
    embedder.embed_one("one").unwrap();
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn http_extractor_posts_question_and_context() {
    let server = MockServer::start(|_, seen| {
        assert_eq!(seen.path, "/extract");
        let context = seen.body["context"].as_str().unwrap();
        let answer = context.split('.').next().unwrap();
        (200, json!({"answer": answer, "score": 0.75}).to_string())
    });
    let spec = ExtractorSpec::Http {
        endpoint: server.endpoint.clone(),
        timeout_secs: 5,
        max_retries: 0,
    };
    let unused = build_embedder(&EmbedderSpec::deterministic(16, 0)).unwrap();
    let extractor = AnswerExtractor::new(&spec, unused);
    let turn = ConversationTurn {
        conversation_id: "1".into(),
        turn_id: 1,
        raw_query: "is it curable?".into(),
        baseline_query: "is throat cancer curable?".into(),
        history: vec![],
    };
    let doc = Document::new(
        "d1",
        "Most early throat cancers are curable. Treatment varies.",
    );
    let span = extract_answer(&turn, &doc, &extractor).unwrap();
    assert_eq!(span.text, "Most early throat cancers are curable");
    assert_eq!(span.score, 0.75);
    assert_eq!(span.source_doc, "d1");
    assert_eq!(
        server.requests()[0].body["question"],
        "is throat cancer curable?"
    );
}
