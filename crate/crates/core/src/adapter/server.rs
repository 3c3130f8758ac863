//! Mock adapter service: serves any [`AdapterBackend`] over the wire protocol.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use super::remote::WireErrorBody;
use super::{call_adapter, AdapterBackend, AdapterError, AdapterRequest, ADAPTER_PATH};

pub struct MockServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts `workers`
    /// threads answering requests against `backend`. When `log_requests` is
    /// set, one JSON line per handled request goes to stderr.
    pub fn start(
        backend: Arc<dyn AdapterBackend>,
        addr: &str,
        workers: usize,
        log_requests: bool,
    ) -> Result<Self, AdapterError> {
        let server = Arc::new(
            tiny_http::Server::http(addr)
                .map_err(|e| AdapterError::Transport(format!("binding {addr}: {e}")))?,
        );
        let bound = match server.server_addr() {
            tiny_http::ListenAddr::IP(ip) => ip,
            other => {
                return Err(AdapterError::Transport(format!(
                    "unsupported listen address {other:?}"
                )))
            }
        };
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let backend = Arc::clone(&backend);
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle_request(request, backend.as_ref(), log_requests);
                    }
                })
            })
            .collect();
        Ok(Self {
            server,
            workers,
            addr: bound,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Unblocks the accept loop and joins the worker threads.
    pub fn shutdown(self) {
        // one wake-up token per worker; tiny_http unblocks a single thread per call
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers {
            let _ = worker.join();
        }
    }

    /// Blocks the calling thread until the server is unblocked.
    pub fn join(self) {
        for worker in self.workers {
            let _ = worker.join();
        }
    }
}

/// Convenience for long-running use: serves until the process is killed.
pub fn serve_forever(
    backend: Arc<dyn AdapterBackend>,
    addr: &str,
    workers: usize,
    log_requests: bool,
) -> Result<MockServer, AdapterError> {
    MockServer::start(backend, addr, workers, log_requests)
}

fn handle_request(mut request: tiny_http::Request, backend: &dyn AdapterBackend, log: bool) {
    let outcome = process(&mut request, backend);
    let (status, body) = match &outcome {
        Ok(resp) => (200, serde_json::to_string(resp).expect("response serializes")),
        Err(err) => {
            let status = match err {
                AdapterError::Protocol(_) | AdapterError::Parse(_) | AdapterError::Geometry(_) => {
                    400
                }
                AdapterError::UnsupportedQuestion(_) => 422,
                AdapterError::Backend(_) | AdapterError::Transport(_) => 500,
            };
            let body = serde_json::to_string(&WireErrorBody::from_adapter_error(err))
                .expect("error envelope serializes");
            (status, body)
        }
    };
    if log {
        let line = serde_json::json!({
            "method": request.method().as_str(),
            "path": request.url(),
            "status": status,
        });
        eprintln!("{line}");
    }
    let response = tiny_http::Response::from_string(body)
        .with_status_code(status)
        .with_header(
            tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        );
    if let Err(e) = request.respond(response) {
        tracing::warn!("failed to write response: {e}");
    }
}

fn process(
    request: &mut tiny_http::Request,
    backend: &dyn AdapterBackend,
) -> Result<super::AdapterResponse, AdapterError> {
    if request.method() != &tiny_http::Method::Post {
        return Err(AdapterError::Protocol(format!(
            "method {} not supported, POST only",
            request.method()
        )));
    }
    if request.url() != ADAPTER_PATH {
        return Err(AdapterError::Protocol(format!(
            "unknown path {:?}, expected {ADAPTER_PATH}",
            request.url()
        )));
    }
    let mut body = String::new();
    request
        .as_reader()
        .read_to_string(&mut body)
        .map_err(|e| AdapterError::Protocol(format!("reading request body: {e}")))?;
    let req: AdapterRequest = serde_json::from_str(&body)
        .map_err(|e| AdapterError::Protocol(format!("malformed adapter request: {e}")))?;
    call_adapter(backend, &req)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{
        AdapterResponse, AdapterRole, FixtureBackend, RemoteBackend, RemoteConfig,
    };
    use crate::model::Query;

    fn fixture() -> Arc<FixtureBackend> {
        let json = r#"{
            "img1\u0000What color is the bus?": {
                "role": "switch", "raw_text": "A red bus.", "latency_ms": 2.5
            }
        }"#;
        Arc::new(FixtureBackend::from_json(json).unwrap())
    }

    fn client(url: &str) -> RemoteBackend {
        RemoteBackend::new(RemoteConfig {
            endpoint: url.to_string(),
            timeout: std::time::Duration::from_secs(2),
            retries: 0,
            backoff_base: std::time::Duration::from_millis(1),
        })
    }

    #[test]
    fn round_trip_over_the_wire() {
        let server = MockServer::start(fixture(), "127.0.0.1:0", 2, false).unwrap();
        let backend = client(&server.url());
        let req = AdapterRequest::switch(
            Query::new("img1", "What color is the bus?", "q1").unwrap(),
        );
        let resp: AdapterResponse = call_adapter(&backend, &req).unwrap();
        assert_eq!(resp.role, AdapterRole::Switch);
        assert_eq!(resp.raw_text, "A red bus.");
        assert_eq!(resp.latency_ms, 2.5); // canned latency passes through untouched
        server.shutdown();
    }

    #[test]
    fn backend_failure_maps_to_backend_error() {
        let server = MockServer::start(fixture(), "127.0.0.1:0", 1, false).unwrap();
        let backend = client(&server.url());
        let req = AdapterRequest::switch(Query::new("imgX", "Unknown?", "q1").unwrap());
        let err = backend.call(&req).unwrap_err();
        assert!(matches!(err, AdapterError::Backend(_)), "{err}");
        server.shutdown();
    }

    #[test]
    fn invalid_request_maps_to_protocol_error() {
        let server = MockServer::start(fixture(), "127.0.0.1:0", 1, false).unwrap();
        let backend = client(&server.url());
        // segment with neither boxes nor region: invalid per protocol
        let req = AdapterRequest::segment(
            Query::new("img1", "What color is the bus?", "q1").unwrap(),
            vec![crate::model::MissingObject::new("bus").unwrap()],
            vec![],
            None,
        );
        let err = backend.call(&req).unwrap_err();
        assert!(matches!(err, AdapterError::Protocol(_)), "{err}");
        server.shutdown();
    }
}
