//! HTTP client for the remote log-probability protocol.
//!
//! `GET /v1/health` must answer `{"status":"ok","model":...}`;
//! `POST /v1/score` takes `{"prompt","completions"}` and answers
//! `{"results":[{"completion","token_logprobs"}]}` in request order.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::Backend;
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub completions: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResult {
    pub completion: String,
    pub token_logprobs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub results: Vec<ScoreResult>,
}

pub struct RemoteBackend {
    base: String,
    model: String,
    agent: Agent,
}

impl RemoteBackend {
    pub fn connect(url: &str) -> Result<Self> {
        Self::connect_with_timeout(url, DEFAULT_TIMEOUT)
    }

    /// Connects and performs the health handshake.
    pub fn connect_with_timeout(url: &str, timeout: Duration) -> Result<Self> {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let base = url.trim_end_matches('/').to_string();
        let unavailable = |msg: String| Error::BackendUnavailable(format!("{base}: {msg}"));
        let mut resp = agent
            .get(format!("{base}/v1/health"))
            .call()
            .map_err(|e| unavailable(e.to_string()))?;
        if resp.status() != 200 {
            return Err(unavailable(format!("health check returned {}", resp.status())));
        }
        let health: Health = resp
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(format!("malformed health response: {e}")))?;
        if health.status != "ok" {
            return Err(unavailable(format!("server status `{}`", health.status)));
        }
        Ok(RemoteBackend {
            base,
            model: health.model,
            agent,
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }
}

impl Backend for RemoteBackend {
    fn describe(&self) -> String {
        format!("remote({}, model={})", self.base, self.model)
    }

    fn token_logprobs(&self, prompt: &str, completion: &str) -> Result<Vec<f64>> {
        let mut out = self.score_batch(prompt, &[completion.to_string()])?;
        Ok(out.remove(0))
    }

    fn score_batch(&self, prompt: &str, completions: &[String]) -> Result<Vec<Vec<f64>>> {
        let unavailable = |msg: String| Error::BackendUnavailable(format!("{}: {msg}", self.base));
        let req = ScoreRequest {
            prompt: prompt.to_string(),
            completions: completions.to_vec(),
        };
        let mut resp = self
            .agent
            .post(format!("{}/v1/score", self.base))
            .send_json(&req)
            .map_err(|e| unavailable(e.to_string()))?;
        if resp.status() != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(unavailable(format!("score request returned {}: {body}", resp.status())));
        }
        let parsed: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(format!("malformed score response: {e}")))?;
        if parsed.results.len() != completions.len() {
            return Err(unavailable(format!(
                "{} results for {} completions",
                parsed.results.len(),
                completions.len()
            )));
        }
        parsed
            .results
            .into_iter()
            .zip(completions)
            .map(|(r, c)| {
                if &r.completion != c {
                    return Err(unavailable(format!(
                        "result for `{}` where `{c}` was expected",
                        r.completion
                    )));
                }
                Ok(r.token_logprobs)
            })
            .collect()
    }
}
