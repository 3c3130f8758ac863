//! HTTP client for adapter services speaking the wire protocol.
//!
//! One POST per call to `/v1/adapter`. Transport failures are retried with
//! exponential backoff; protocol and backend errors never are.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AdapterBackend, AdapterError, AdapterRequest, AdapterResponse, ADAPTER_PATH};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL of the service, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Retries after the first attempt, transport failures only.
    pub retries: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_base: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff_base: Duration::from_millis(100),
        }
    }
}

/// Structured error envelope returned by the wire server on failures, so the
/// client can reconstruct the same error the backend produced in process.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireErrorBody {
    pub error: WireError,
}

impl WireErrorBody {
    pub fn from_adapter_error(err: &AdapterError) -> Self {
        let kind = match err {
            AdapterError::Protocol(_) => "protocol",
            AdapterError::Backend(_) => "backend",
            AdapterError::UnsupportedQuestion(_) => "unsupported_question",
            AdapterError::Parse(_) => "parse",
            AdapterError::Geometry(_) => "geometry",
            AdapterError::Transport(_) => "transport",
        };
        let message = match err {
            AdapterError::Transport(m)
            | AdapterError::Protocol(m)
            | AdapterError::Backend(m)
            | AdapterError::UnsupportedQuestion(m)
            | AdapterError::Parse(m)
            | AdapterError::Geometry(m) => m.clone(),
        };
        Self {
            error: WireError {
                kind: kind.into(),
                message,
            },
        }
    }

    pub fn into_adapter_error(self) -> AdapterError {
        match self.error.kind.as_str() {
            "protocol" => AdapterError::Protocol(self.error.message),
            "backend" => AdapterError::Backend(self.error.message),
            "unsupported_question" => AdapterError::UnsupportedQuestion(self.error.message),
            "parse" => AdapterError::Parse(self.error.message),
            "geometry" => AdapterError::Geometry(self.error.message),
            other => AdapterError::Protocol(format!(
                "unknown wire error kind {other:?}: {}",
                self.error.message
            )),
        }
    }
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    config: RemoteConfig,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build();
        let url = format!(
            "{}{ADAPTER_PATH}",
            config.endpoint.trim_end_matches('/')
        );
        Self {
            agent: ureq::Agent::new_with_config(agent_config),
            url,
            config,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    fn attempt(&self, body: &str) -> Result<AdapterResponse, AdapterError> {
        let mut response = self
            .agent
            .post(&self.url)
            .content_type("application/json")
            .send(body)
            .map_err(|e| AdapterError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AdapterError::Transport(format!("reading response body: {e}")))?;
        if status == 200 {
            return serde_json::from_str::<AdapterResponse>(&text).map_err(|e| {
                AdapterError::Protocol(format!("malformed adapter response: {e}"))
            });
        }
        match serde_json::from_str::<WireErrorBody>(&text) {
            Ok(body) => Err(body.into_adapter_error()),
            Err(_) => Err(AdapterError::Protocol(format!(
                "unexpected status {status}: {text}"
            ))),
        }
    }
}

impl AdapterBackend for RemoteBackend {
    fn call(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let body = serde_json::to_string(req)
            .map_err(|e| AdapterError::Protocol(format!("serializing request: {e}")))?;
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let delay = self.config.backoff_base * 2u32.pow(attempt - 1);
                std::thread::sleep(delay);
                tracing::debug!(attempt, url = %self.url, "retrying adapter call");
            }
            match self.attempt(&body) {
                Ok(resp) => return Ok(resp),
                Err(err) if err.is_retryable() => last = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last.expect("at least one attempt was made"))
    }

    fn name(&self) -> &str {
        "remote"
    }
}
