use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use codhy_core::ingestion::{EutilsClient, EutilsConfig, LiteratureClient, LiteratureError};

/// Serves the scripted `(status, body)` list, one connection each, and counts requests.
fn serve(script: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = hits.clone();
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).is_ok_and(|n| n > 0) {
                if line == "\r\n" {
                    break;
                }
                line.clear();
            }
            seen.fetch_add(1, Ordering::SeqCst);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

fn client(base: String, retries: u32) -> EutilsClient {
    EutilsClient::new(EutilsConfig {
        base_url: base,
        api_key: None,
        requests_per_second: 100.0,
        max_retries: retries,
        backoff: Duration::from_millis(10),
        timeout: Duration::from_secs(5),
    })
    .unwrap()
}

const IDS: &str = r#"{"esearchresult":{"idlist":["2","1"]}}"#;

#[test]
fn transient_errors_are_retried() {
    let (base, hits) = serve(vec![(503, ""), (429, ""), (200, IDS)]);
    let ids = client(base, 3).search("\"EGFR\"", 5).unwrap();
    assert_eq!(ids, ["2", "1"]);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded() {
    let (base, hits) = serve(vec![(500, ""), (500, ""), (500, "")]);
    let err = client(base, 2).search("x", 5).unwrap_err();
    assert!(err.is_retryable());
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, hits) = serve(vec![(400, ""), (200, IDS)]);
    let err = client(base, 3).search("x", 5).unwrap_err();
    assert!(matches!(err, LiteratureError::Transport { retryable: false, .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_body_is_a_parse_error() {
    let (base, _) = serve(vec![(200, "{\"nope\":1}")]);
    assert!(matches!(
        client(base, 0).search("x", 5),
        Err(LiteratureError::Parse { .. })
    ));
}
