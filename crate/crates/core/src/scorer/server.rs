//! Minimal HTTP server exposing any backend over the remote protocol.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use super::remote::{Health, ScoreRequest, ScoreResponse, ScoreResult};
use super::Backend;
use crate::error::{Error, Result};

/// Serves a backend until dropped.
pub struct LoopbackServer {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl LoopbackServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(backend: Arc<dyn Backend>, addr: &str) -> Result<Self> {
        let server = Server::http(addr).map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Config(format!("{addr} is not an IP address")))?;
        let server = Arc::new(server);
        let s = Arc::clone(&server);
        let worker = std::thread::spawn(move || {
            for req in s.incoming_requests() {
                handle(req, backend.as_ref());
            }
        });
        Ok(LoopbackServer {
            server,
            addr,
            worker: Some(worker),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the serving thread exits.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for LoopbackServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error_body(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn handle(mut req: Request, backend: &dyn Backend) {
    let (status, body) = match (req.method(), req.url()) {
        (Method::Get, "/v1/health") => {
            let h = Health {
                status: "ok".into(),
                model: backend.describe(),
            };
            (200, serde_json::to_string(&h).expect("serializable"))
        }
        (Method::Post, "/v1/score") => {
            let mut raw = String::new();
            match req.as_reader().read_to_string(&mut raw) {
                Ok(_) => score(&raw, backend),
                Err(e) => (400, error_body(&e.to_string())),
            }
        }
        _ => (404, error_body("not found")),
    };
    let _ = req.respond(json_response(status, body));
}

fn score(raw: &str, backend: &dyn Backend) -> (u16, String) {
    let parsed: ScoreRequest = match serde_json::from_str(raw) {
        Ok(p) => p,
        Err(e) => return (400, error_body(&format!("malformed request: {e}"))),
    };
    match backend.score_batch(&parsed.prompt, &parsed.completions) {
        Ok(batch) => {
            let results = parsed
                .completions
                .into_iter()
                .zip(batch)
                .map(|(completion, token_logprobs)| ScoreResult {
                    completion,
                    token_logprobs,
                })
                .collect();
            (
                200,
                serde_json::to_string(&ScoreResponse { results }).expect("serializable"),
            )
        }
        Err(e @ Error::Tokenization(_)) => (400, error_body(&e.to_string())),
        Err(e) => (500, error_body(&e.to_string())),
    }
}
