mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use common::{echo_p_sota, spawn_stub, StubReply};
use navfuse::remote::{RemoteBackend, RemoteClient, RemoteConfig, RemoteError};
use navfuse_core::backend::{BackendError, PolicyBackend};
use navfuse_core::gridworld::{generate_episode, generate_map, observe, ActionDistribution, GoalCategory, MapGenConfig};
use navfuse_core::histpolicy::{forward_step, HistConfig, PolicyParams, RecurrentState};
use navfuse_core::promptfmt::serialize_distribution;

const EXAMPLE_REPLY: &str = "Stop with probability 0.03, move forward with probability 0.55, turn left with probability 0.38, turn right with probability 0.00, look up with probability 0.03, and look down with probability 0.01";

fn client(url: &str, timeout_s: f64) -> RemoteClient {
    RemoteClient::new(RemoteConfig {
        endpoint: url.to_string(),
        timeout_s,
        ..RemoteConfig::default()
    })
    .unwrap()
}

fn p_sota() -> ActionDistribution {
    ActionDistribution::new([0.03, 0.44, 0.28, 0.21, 0.03, 0.01]).unwrap()
}

#[test]
fn echo_returns_the_suggestion() {
    let stub = spawn_stub(|_| StubReply::text(&serialize_distribution(&p_sota())));
    let reply = client(&stub.url, 5.0).complete("ignored", &ActionDistribution::uniform()).unwrap();
    assert_eq!(reply.fallback_reason, None);
    for (a, b) in reply.distribution.probs().iter().zip(p_sota().probs()) {
        assert!((a - b).abs() <= 0.01);
    }
}

#[test]
fn example_reply_sentence_parses() {
    let stub = spawn_stub(|_| StubReply::text(EXAMPLE_REPLY));
    let reply = client(&stub.url, 5.0).complete("x", &ActionDistribution::uniform()).unwrap();
    let want = [0.03, 0.55, 0.38, 0.00, 0.03, 0.01];
    for (a, b) in reply.distribution.probs().iter().zip(want) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn garbage_three_times_falls_back() {
    let stub = spawn_stub(|_| StubReply::text("I would rather not say"));
    let fallback = p_sota();
    let reply = client(&stub.url, 5.0).complete("x", &fallback).unwrap();
    assert_eq!(reply.distribution, fallback);
    assert_eq!(reply.attempts, 3);
    assert!(reply.fallback_reason.unwrap().contains("unparseable"));
    assert_eq!(stub.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn reply_without_text_field_is_retried() {
    let stub = spawn_stub(|_| StubReply::raw(200, "{\"completion\": \"hi\"}"));
    let reply = client(&stub.url, 5.0).complete("x", &p_sota()).unwrap();
    assert!(reply.fallback_reason.is_some());
}

#[test]
fn timeouts_fall_back() {
    let stub = spawn_stub(|_| StubReply {
        delay: Duration::from_millis(600),
        ..StubReply::text(EXAMPLE_REPLY)
    });
    let reply = client(&stub.url, 0.2).complete("x", &p_sota()).unwrap();
    assert_eq!(reply.distribution, p_sota());
    assert!(reply.fallback_reason.unwrap().contains("timed out"));
}

#[test]
fn http_errors_are_not_retried() {
    let stub = spawn_stub(|_| StubReply::raw(503, "model overloaded, try later"));
    let err = client(&stub.url, 5.0).complete("x", &p_sota()).unwrap_err();
    match err {
        RemoteError::Status { status, excerpt, .. } => {
            assert_eq!(status, 503);
            assert!(excerpt.contains("overloaded"));
        }
        e => panic!("unexpected {e:?}"),
    }
    assert_eq!(stub.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_is_an_error() {
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}/"), 2.0)
        .complete("x", &p_sota())
        .unwrap_err();
    assert!(matches!(err, RemoteError::Network { attempts: 3, .. }), "{err:?}");
}

#[test]
fn config_is_validated() {
    let bad = |cfg: RemoteConfig| RemoteClient::new(cfg).err().unwrap();
    assert!(matches!(bad(RemoteConfig::default()), RemoteError::Config(_)));
    let ok = RemoteConfig {
        endpoint: "http://127.0.0.1:1/".into(),
        ..RemoteConfig::default()
    };
    assert!(matches!(bad(RemoteConfig { timeout_s: 0.0, ..ok.clone() }), RemoteError::Config(_)));
    assert!(matches!(bad(RemoteConfig { variant: 99, ..ok.clone() }), RemoteError::Config(_)));
    assert!(RemoteClient::new(ok).is_ok());
}

#[test]
fn backend_threads_state_and_counts_fallbacks() {
    let grid = generate_map(&MapGenConfig { width: 16, height: 16, ..MapGenConfig::default() }, 4).unwrap();
    let cat = GoalCategory::ALL.into_iter().find(|c| !grid.goals(*c).is_empty()).unwrap();
    let ep = generate_episode(&grid, "m", "m-0", cat, 1, 1.0, 6.0).unwrap();
    let hist = PolicyParams::random(HistConfig::default(), 2, 0.5);
    let obs = observe(&grid, &ep.start, &ep, None, false);

    let stub = spawn_stub(echo_p_sota);
    let mut backend = RemoteBackend::new(client(&stub.url, 5.0), &hist);
    assert_eq!(backend.act(&obs, &ep.start), Err(BackendError::NotReset));
    backend.reset(&ep, &grid).unwrap();
    let d = backend.act(&obs, &ep.start).unwrap();
    let (p, _) = forward_step(&hist, &RecurrentState::for_params(&hist), &obs);
    for (a, b) in d.probs().iter().zip(p.probs()) {
        assert!((a - b).abs() <= 0.01);
    }
    assert_eq!(backend.fallback_count(), 0);

    let garbage = spawn_stub(|_| StubReply::text("???"));
    let mut backend = RemoteBackend::new(client(&garbage.url, 5.0), &hist);
    backend.reset(&ep, &grid).unwrap();
    assert_eq!(backend.act(&obs, &ep.start).unwrap(), p);
    assert_eq!(backend.fallback_count(), 1);
    assert_eq!(backend.warnings().len(), 1);
}
