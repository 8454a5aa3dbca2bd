mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use intent_collections::cli::serve::{router, Health, Hit, ServeState};
use intent_collections::cli::{cmd_build_dataset, cmd_gen_corpus, cmd_index, cmd_train, Layout};
use intent_collections::retrieval::EmbeddingIndex;
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    index: EmbeddingIndex,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config(dir.path());
    cmd_gen_corpus(&cfg).unwrap();
    cmd_build_dataset(&cfg).unwrap();
    cmd_train(&cfg).unwrap();
    let index = cmd_index(&cfg).unwrap();
    let layout = Layout::new(dir.path());
    let state = ServeState::load(&layout.index(), &layout.checkpoint(), &layout.vocab()).unwrap();
    Fixture { _dir: dir, app: router(Arc::new(state)), index }
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

#[tokio::test]
async fn endpoints_follow_the_contract() {
    let f = fixture();

    let (status, body) = get(&f.app, "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    let health: Health = serde_json::from_slice(&body).unwrap();
    assert_eq!((health.n_products, health.d, health.checkpoint_step), (300, 64, 200));

    let (status, body) = get(&f.app, "/retrieve?query=cute%20pastel%20skirts&k=3").await;
    assert_eq!(status, StatusCode::OK);
    let hits: Vec<Hit> = serde_json::from_slice(&body).unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    // same ranking as the library call
    let (again, body2) = get(&f.app, "/retrieve?query=cute%20pastel%20skirts&k=3").await;
    assert_eq!((again, &body2), (StatusCode::OK, &body));

    let (_, body) = get(&f.app, "/retrieve?query=bright%20looks&k=20&category=pants").await;
    let hits: Vec<Hit> = serde_json::from_slice(&body).unwrap();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|h| f.index.category(&h.product_id) == Some("pants")));

    let (_, body) = get(&f.app, "/retrieve?query=skirts&k=1000").await;
    assert_eq!(serde_json::from_slice::<Vec<Hit>>(&body).unwrap().len(), 300);
}

#[tokio::test]
async fn bad_requests_are_400() {
    let f = fixture();
    for uri in ["/retrieve?k=3", "/retrieve?query=%20&k=3", "/retrieve?query=x&k=0", "/retrieve?query=x&k=-2", "/retrieve?query=x&k=abc"] {
        let (status, body) = get(&f.app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(serde_json::from_slice::<serde_json::Value>(&body).unwrap()["error"].is_string());
    }
}
