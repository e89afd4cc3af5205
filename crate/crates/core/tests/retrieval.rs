mod common;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::*;
use topicsig::querygen::{BooleanQuery, QueryNode};
use topicsig::retrieval::{
    fetch_queries, load_collection, save_collection, search, store_roundtrip, Document, DocumentCollection,
    LocalCorpus, RemoteClient, SourceConfig,
};
use topicsig::signature::tokenize;

fn query(root: QueryNode) -> BooleanQuery {
    BooleanQuery {
        target: sense("q", 1),
        root,
    }
}

#[test]
fn local_search_matches_scan_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(11);
    let mut texts = Vec::new();
    for i in 0..60 {
        let text = random_doc(&mut r, 20).join(" ");
        let name = if i % 5 == 0 { format!("sub/d{i}.html") } else { format!("d{i}.txt") };
        let body = if i % 5 == 0 { format!("<p>{text}</p>") } else { text.clone() };
        let path = dir.path().join(&name);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, body).unwrap();
        texts.push((name, text));
    }
    let corpus = LocalCorpus::load(dir.path()).unwrap();
    assert_eq!(corpus.len(), 60);
    for _ in 0..100 {
        let q = query(random_query_node(&mut r, 3));
        let got: BTreeSet<String> = corpus.search(&q, 1000).into_iter().map(|d| d.uri).collect();
        let want: BTreeSet<String> = texts
            .iter()
            .filter(|(_, t)| scan_eval(&q.root, &tokenize(t)))
            .map(|(n, _)| n.clone())
            .collect();
        assert_eq!(got, want);
        let capped = corpus.search(&q, 3);
        assert_eq!(capped.len(), want.len().min(3));
    }
}

#[test]
fn store_round_trip_keeps_every_document() {
    let dir = tempfile::tempdir().unwrap();
    let c = DocumentCollection {
        sense: sense("store", 2),
        documents: (0..100)
            .map(|i| Document::local(format!("doc{i:03}"), format!("src/{i}.txt"), format!("body {i}\nwith ünïcode")))
            .collect(),
        query_rendered: "(store AND (x))".into(),
    };
    assert_eq!(store_roundtrip(&c, dir.path()).unwrap(), c);
}

#[test]
fn tampered_body_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let c = DocumentCollection {
        sense: sense("tamper", 1),
        documents: vec![Document::local("a", "a.txt", "original")],
        query_rendered: String::new(),
    };
    let stored = save_collection(&c, dir.path()).unwrap();
    std::fs::write(stored.join("a.txt"), "changed").unwrap();
    let err = load_collection(dir.path(), &c.sense).unwrap_err();
    assert_eq!(err.exit_code(), 5);
}

/// Minimal HTTP/1.1 server: `/search` lists `/doc/<i>` URLs, each document
/// fails with 500 for its first `failures` requests and otherwise answers
/// after a short delay. Tracks the peak number of requests in flight.
struct MockServer {
    base: String,
    peak: Arc<AtomicUsize>,
    requests: Arc<AtomicUsize>,
    auth_seen: Arc<AtomicUsize>,
}

fn respond(mut stream: TcpStream, status: &str, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn start_server(n_docs: usize, failures: usize) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let peak = Arc::new(AtomicUsize::new(0));
    let requests = Arc::new(AtomicUsize::new(0));
    let auth_seen = Arc::new(AtomicUsize::new(0));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let attempts: Arc<Vec<AtomicUsize>> = Arc::new((0..n_docs).map(|_| AtomicUsize::new(0)).collect());
    let server = MockServer {
        base: base.clone(),
        peak: peak.clone(),
        requests: requests.clone(),
        auth_seen: auth_seen.clone(),
    };
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (base, peak, requests, auth_seen, in_flight, attempts) =
                (base.clone(), peak.clone(), requests.clone(), auth_seen.clone(), in_flight.clone(), attempts.clone());
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if line.to_ascii_lowercase().starts_with("authorization: bearer secret") {
                        auth_seen.fetch_add(1, Ordering::SeqCst);
                    }
                }
                requests.fetch_add(1, Ordering::SeqCst);
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                if path.starts_with("/search") {
                    let urls: Vec<String> = (0..n_docs).map(|i| format!("{base}/doc/{i}")).collect();
                    respond(stream, "200 OK", &serde_json::to_string(&urls).unwrap());
                    return;
                }
                let i: usize = path.trim_start_matches("/doc/").parse().unwrap();
                if attempts[i].fetch_add(1, Ordering::SeqCst) < failures {
                    respond(stream, "500 Internal Server Error", "down");
                    return;
                }
                let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                thread::sleep(Duration::from_millis(40));
                in_flight.fetch_sub(1, Ordering::SeqCst);
                respond(stream, "200 OK", &format!("<html><body>document {i} &amp; more</body></html>"));
            });
        }
    });
    server
}

fn remote(server: &MockServer, concurrency: usize, retries: u32) -> SourceConfig {
    SourceConfig {
        concurrency,
        retries,
        timeout: 5.0,
        ..SourceConfig::remote(format!("{}/search", server.base))
    }
}

fn cue_query() -> BooleanQuery {
    query(QueryNode::And(vec![
        QueryNode::phrase("crane").unwrap(),
        QueryNode::Or(vec![QueryNode::phrase("bird").unwrap()]),
    ]))
}

#[test]
fn remote_fetch_respects_concurrency_bound() {
    let server = start_server(8, 0);
    let c = search(&remote(&server, 2, 0), &cue_query()).unwrap();
    assert_eq!(c.documents.len(), 8);
    assert_eq!(c.documents[3].text.trim(), "document 3 & more");
    assert_eq!(c.documents[3].uri, format!("{}/doc/3", server.base));
    let peak = server.peak.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak in-flight {peak}");
}

#[test]
fn max_docs_caps_result_list() {
    let server = start_server(8, 0);
    let src = SourceConfig {
        max_docs: 3,
        ..remote(&server, 4, 0)
    };
    assert_eq!(RemoteClient::new(&src).unwrap().result_urls("x").unwrap().len(), 3);
}

#[test]
fn transient_failures_are_retried() {
    let server = start_server(3, 1);
    let c = search(&remote(&server, 3, 1), &cue_query()).unwrap();
    assert_eq!(c.documents.len(), 3);
    // one search request, then two attempts per document
    assert_eq!(server.requests.load(Ordering::SeqCst), 1 + 3 * 2);
}

#[test]
fn exhausted_retries_skip_the_sense() {
    let server = start_server(2, 5);
    let err = search(&remote(&server, 2, 1), &cue_query()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let outcome = fetch_queries(&[cue_query()], &remote(&server, 2, 0)).unwrap();
    assert!(outcome.collections.is_empty());
    assert_eq!(outcome.skipped.len(), 1);
}

#[test]
fn api_key_is_sent_and_required() {
    let server = start_server(1, 0);
    let var = "TOPICSIG_TEST_KEY_PRESENT";
    std::env::set_var(var, "secret");
    let src = SourceConfig {
        api_key_env: Some(var.into()),
        ..remote(&server, 1, 0)
    };
    RemoteClient::new(&src).unwrap().result_urls("x").unwrap();
    assert_eq!(server.auth_seen.load(Ordering::SeqCst), 1);

    let missing = SourceConfig {
        api_key_env: Some("TOPICSIG_TEST_KEY_NEVER_SET".into()),
        ..src
    };
    let err = RemoteClient::new(&missing).err().expect("missing key must fail");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn invalid_source_settings_are_config_errors() {
    for src in [
        SourceConfig {
            max_docs: 0,
            ..SourceConfig::default()
        },
        SourceConfig {
            concurrency: 0,
            ..SourceConfig::default()
        },
        SourceConfig {
            timeout: 0.0,
            ..SourceConfig::default()
        },
    ] {
        assert_eq!(src.validate().unwrap_err().exit_code(), 3);
    }
    let missing = SourceConfig::local("/definitely/not/here");
    assert_eq!(search(&missing, &cue_query()).unwrap_err().exit_code(), 3);
}
