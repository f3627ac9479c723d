//! HTTP front end: every request is forwarded to [`Api::handle`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::IntoResponse;
use axum::Router;

use crate::api::Api;

/// Listen address variable; defaults to [`DEFAULT_ADDR`].
pub const ADDR_ENV: &str = "KBPLAN_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

pub fn router(api: Arc<Api>) -> Router {
    Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
        let api = api.clone();
        async move {
            let path = uri.path().to_string();
            let handled = tokio::task::spawn_blocking(move || api.handle(method.as_str(), &path, &body)).await;
            match handled {
                Ok(r) => {
                    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
                    (status, [(header::CONTENT_TYPE, r.content_type)], r.body).into_response()
                }
                Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
            }
        }
    })
}

pub fn listen_addr() -> Result<SocketAddr, String> {
    let text = std::env::var(ADDR_ENV).unwrap_or_else(|_| DEFAULT_ADDR.to_string());
    text.parse().map_err(|e| format!("{ADDR_ENV}=`{text}`: {e}"))
}

pub async fn serve(api: Arc<Api>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(api)).await
}
