//! Build artifacts with a short run and query the HTTP service in-process.
//! `intentcol serve --out <dir> --port 8080` serves the same router over TCP.

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::Request;
use intent_collections::cli::serve::{router, ServeState};
use intent_collections::cli::{cmd_run, Layout, RunConfig};
use tower::ServiceExt;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::from_preset("hard40", 7)?;
    cfg.out = dir.path().to_path_buf();
    cfg.train.max_steps = 1000;
    cmd_run(&cfg)?;

    let layout = Layout::new(&cfg.out);
    let app = router(Arc::new(ServeState::load(&layout.index(), &layout.checkpoint(), &layout.vocab())?));
    for uri in ["/healthz", "/retrieve?query=pretty%20skirts&k=3", "/retrieve?query=skirts&k=3&category=pants", "/retrieve?query=x&k=0"] {
        let resp = app.clone().oneshot(Request::get(uri).body(Body::empty())?).await?;
        let status = resp.status();
        let body = to_bytes(resp.into_body(), usize::MAX).await?;
        println!("GET {uri}\n  {status} {}", String::from_utf8_lossy(&body));
    }
    Ok(())
}
