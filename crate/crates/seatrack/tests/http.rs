use std::io::{Read, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

use seatrack::api::router;
use seatrack::demo::demo_spec;
use seatrack::format::{record_to_line, session_to_string, SessionDocument};
use seatrack::live::{follow, LiveFeed};
use seatrack::store::{SessionStore, SESSION_SUFFIX};
use seatrack_core::simulator::generate;
use seatrack_core::{analyze, ClassSession, SeatId};

fn demo_session() -> ClassSession {
    let spec = demo_spec();
    let (frames, _) = generate(&spec, spec.seed).unwrap();
    analyze(spec.config(), "demo", frames).unwrap()
}

fn store_with_demo() -> (Arc<SessionStore>, ClassSession) {
    let store = Arc::new(SessionStore::new());
    let s = demo_session();
    store.insert("demo", s.clone());
    (store, s)
}

async fn get(store: &Arc<SessionStore>, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = router(store.clone())
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, body.to_vec())
}

async fn get_json(store: &Arc<SessionStore>, uri: &str) -> (StatusCode, Value) {
    let (status, body) = get(store, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn lists_and_describes_sessions() {
    let (store, s) = store_with_demo();
    let (code, v) = get_json(&store, "/sessions").await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v, json!({ "sessions": ["demo"] }));

    let (code, v) = get_json(&store, "/sessions/demo/meta").await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["duration_s"], json!(600.0));
    assert_eq!(v["config"]["rows"], json!(5));
    assert_eq!(v["occupancy"].as_array().unwrap().len(), 44);
    assert!(!v["occupancy"].as_array().unwrap().contains(&json!("R5C1")));
    assert_eq!(s.occupied_seats().len(), 44);
}

#[tokio::test]
async fn grid_matches_session_document() {
    let (store, s) = store_with_demo();
    let (code, v) = get_json(&store, "/sessions/demo/grid").await;
    assert_eq!(code, StatusCode::OK);
    let doc = SessionDocument::from_session(&s);
    let seats = v["seats"].as_array().unwrap();
    assert_eq!(seats.len(), 45);
    assert_eq!(v["categories"], json!(["hand_raising", "standing", "sleeping", "yawning", "smiling"]));
    for cell in seats {
        let seat: SeatId = cell["seat"].as_str().unwrap().parse().unwrap();
        let mut want = [0usize; 5];
        for e in doc.events.iter().filter(|e| e.seat == Some(seat)) {
            want[e.category.behavior_index().unwrap()] += 1;
        }
        assert_eq!(cell["counts"], json!(want), "{seat}");
    }
    assert_eq!(seats[0]["seat"], json!("R1C1"));
    assert_eq!(seats[9]["seat"], json!("R2C1"));
}

#[tokio::test]
async fn heatmap_at_start_is_neutral() {
    let (store, _) = store_with_demo();
    let (code, v) = get_json(&store, "/sessions/demo/heatmap?t=0").await;
    assert_eq!(code, StatusCode::OK);
    let rows = v["scores"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for (r, row) in rows.iter().enumerate() {
        for (c, score) in row.as_array().unwrap().iter().enumerate() {
            if (r, c) == (4, 0) {
                assert!(score.is_null());
            } else {
                assert_eq!(score.as_f64(), Some(0.5), "R{}C{}", r + 1, c + 1);
            }
        }
    }
    let (_, end) = get_json(&store, "/sessions/demo/heatmap?t=600").await;
    assert!(end["scores"][1][6].as_f64().unwrap() > 0.5);
}

#[tokio::test]
async fn featured_seat_sequences() {
    let (store, _) = store_with_demo();
    let (code, v) = get_json(&store, "/sessions/demo/seats/R2C7/sequence").await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["events"], json!([{ "t": 30.0, "category": "hand_raising" }]));
    let (_, v) = get_json(&store, "/sessions/demo/seats/R4C9/sequence").await;
    assert_eq!(v["events"], json!([{ "t": 60.0, "category": "smiling" }]));
    let (_, v) = get_json(&store, "/sessions/demo/seats/R5C1/sequence").await;
    assert_eq!(v["events"], json!([]));
}

#[tokio::test]
async fn flow_and_version() {
    let (store, s) = store_with_demo();
    let (code, v) = get_json(&store, "/sessions/demo/flow").await;
    assert_eq!(code, StatusCode::OK);
    let samples = v["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 200);
    assert_eq!(v["samples"], json!(s.flow()));
    // the R2C7 hand raise starts at t = 30, sample 10
    assert!(samples[10][0].as_u64().unwrap() >= 1);
    let (_, v) = get_json(&store, "/sessions/demo/version").await;
    assert_eq!(v, json!({ "version": 0 }));
}

#[tokio::test]
async fn errors_and_idempotence() {
    let (store, _) = store_with_demo();
    for (uri, code) in [
        ("/sessions/nope/grid", StatusCode::NOT_FOUND),
        ("/sessions/nope/heatmap?t=0", StatusCode::NOT_FOUND),
        ("/sessions/demo/heatmap", StatusCode::BAD_REQUEST),
        ("/sessions/demo/heatmap?t=abc", StatusCode::BAD_REQUEST),
        ("/sessions/demo/heatmap?t=-1", StatusCode::BAD_REQUEST),
        ("/sessions/demo/heatmap?t=NaN", StatusCode::BAD_REQUEST),
        ("/sessions/demo/heatmap?t=601", StatusCode::BAD_REQUEST),
        ("/sessions/demo/seats/R2X7/sequence", StatusCode::BAD_REQUEST),
        ("/sessions/demo/seats/R9C9/sequence", StatusCode::NOT_FOUND),
    ] {
        let (got, body) = get_json(&store, uri).await;
        assert_eq!(got, code, "{uri}");
        assert!(body["error"].is_string());
    }
    for uri in ["/sessions/demo/grid", "/sessions/demo/heatmap?t=300", "/sessions/demo/flow", "/sessions/demo/meta"] {
        assert_eq!(get(&store, uri).await, get(&store, uri).await);
    }
}

#[tokio::test]
async fn store_loads_directory() {
    let dir = tempfile::tempdir().unwrap();
    let s = demo_session();
    std::fs::write(dir.path().join(format!("room-a{SESSION_SUFFIX}")), session_to_string(&s)).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let store = Arc::new(SessionStore::open_dir(dir.path()).unwrap());
    assert_eq!(store.ids(), vec!["room-a".to_string()]);
    assert_eq!(*store.get("room-a").unwrap(), s);
}

fn grid_counts(s: &ClassSession) -> Vec<[usize; 5]> {
    s.tracklets().iter().map(|t| t.counts()).collect()
}

#[test]
fn live_snapshots_are_monotone() {
    let spec = demo_spec();
    let (frames, _) = generate(&spec, spec.seed).unwrap();
    let store = Arc::new(SessionStore::new());
    let mut feed = LiveFeed::new("live", spec.config(), store.clone()).unwrap();
    let mut prev: Option<(u64, Vec<[usize; 5]>, usize)> = None;
    for f in frames {
        let v = feed.push(f).unwrap().expect("one snapshot per sample");
        let snap = store.get("live").unwrap();
        assert_eq!(snap.meta.version, v);
        let counts = grid_counts(&snap);
        let unassigned = snap.unassigned().len();
        if let Some((pv, pc, pu)) = &prev {
            assert_eq!(v, pv + 1);
            assert!(counts.iter().zip(pc).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x >= y)));
            assert!(unassigned >= *pu);
        }
        prev = Some((v, counts, unassigned));
    }
    let last = feed.finish().unwrap();
    let fin = store.get("live").unwrap();
    assert_eq!(fin.meta.version, last);
    assert_eq!(fin.totals(), demo_session().totals());
}

#[test]
fn follow_tails_a_growing_file() {
    let spec = demo_spec();
    let (frames, _) = generate(&spec, spec.seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("live.jsonl");
    let store = Arc::new(SessionStore::new());
    let feed = LiveFeed::new("live", spec.config(), store.clone()).unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let handle = {
        let (path, stop) = (path.clone(), stop.clone());
        std::thread::spawn(move || follow(&path, feed, Duration::from_millis(5), stop))
    };
    std::thread::sleep(Duration::from_millis(30));
    let mut out = std::fs::File::create(&path).unwrap();
    for (i, f) in frames.iter().enumerate() {
        let line = record_to_line(f);
        if i == 20 {
            // a line written in two pieces
            let (a, b) = line.split_at(line.len() / 2);
            out.write_all(a.as_bytes()).unwrap();
            out.flush().unwrap();
            std::thread::sleep(Duration::from_millis(20));
            writeln!(out, "{b}").unwrap();
        } else {
            writeln!(out, "{line}").unwrap();
        }
        if i == 50 {
            out.flush().unwrap();
            let deadline = std::time::Instant::now() + Duration::from_secs(5);
            while store.get("live").is_none_or(|s| s.meta.version < 51) {
                assert!(std::time::Instant::now() < deadline, "live snapshot never arrived");
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    }
    out.flush().unwrap();
    stop.store(true, Ordering::Release);
    let version = handle.join().unwrap().unwrap();
    assert_eq!(version, frames.len() as u64 + 1);
    assert_eq!(store.get("live").unwrap().totals(), demo_session().totals());
}

#[tokio::test]
async fn serves_over_tcp() {
    let (store, _) = store_with_demo();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(store)).await.unwrap() });
    let body = tokio::task::spawn_blocking(move || {
        let mut conn = std::net::TcpStream::connect(addr).unwrap();
        conn.write_all(b"GET /sessions/demo/version HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
        let mut text = String::new();
        conn.read_to_string(&mut text).unwrap();
        text
    })
    .await
    .unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.ends_with("{\"version\":0}"), "{body}");
}
