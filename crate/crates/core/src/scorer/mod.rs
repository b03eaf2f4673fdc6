//! Token-probability backends behind one scoring interface.
//!
//! Every backend returns natural-log probabilities, one per completion token,
//! each conditioned on the prompt plus the preceding completion tokens.

pub mod ngram;
pub mod remote;
pub mod server;
pub mod stub;
pub mod tokenize;

use std::sync::Arc;

use crate::error::{Error, Result};

pub use ngram::NgramModel;
pub use remote::RemoteBackend;
pub use server::LoopbackServer;
pub use stub::{OracleStubContext, StubBackend};

/// Environment variable consulted when a `remote:` spec has no URL.
pub const SCORER_URL_ENV: &str = "GG_SCORER_URL";

pub trait Backend: Send + Sync {
    fn describe(&self) -> String;

    /// `log p(token_j | prompt + completion tokens before j)` for each token.
    fn token_logprobs(&self, prompt: &str, completion: &str) -> Result<Vec<f64>>;

    /// Scores several completions of one prompt, in input order.
    fn score_batch(&self, prompt: &str, completions: &[String]) -> Result<Vec<Vec<f64>>> {
        completions.iter().map(|c| self.token_logprobs(prompt, c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionScore {
    pub completion: String,
    pub token_logprobs: Vec<f64>,
    pub total_logprob: f64,
}

impl CompletionScore {
    pub fn new(completion: String, token_logprobs: Vec<f64>) -> Self {
        let total_logprob = token_logprobs.iter().sum();
        CompletionScore {
            completion,
            token_logprobs,
            total_logprob,
        }
    }

    /// Product of the token probabilities.
    pub fn probability(&self) -> f64 {
        self.total_logprob.exp()
    }

    /// Geometric mean of the token probabilities.
    pub fn per_token_probability(&self) -> f64 {
        (self.total_logprob / self.token_logprobs.len() as f64).exp()
    }
}

/// Scores every completion as a continuation of `prompt`.
pub fn score_completions(prompt: &str, completions: &[String], backend: &dyn Backend) -> Result<Vec<CompletionScore>> {
    if completions.is_empty() {
        return Err(Error::Tokenization("completion set is empty".into()));
    }
    for c in completions {
        if tokenize::tokenize(c).is_empty() {
            return Err(Error::Tokenization(format!("completion `{c}` has no tokens")));
        }
    }
    let batch = backend.score_batch(prompt, completions)?;
    if batch.len() != completions.len() {
        return Err(Error::BackendUnavailable(format!(
            "{} returned {} results for {} completions",
            backend.describe(),
            batch.len(),
            completions.len()
        )));
    }
    completions
        .iter()
        .zip(batch)
        .map(|(c, lps)| {
            if lps.is_empty() || lps.iter().any(|lp| lp.is_nan() || *lp > 0.0) {
                return Err(Error::BackendUnavailable(format!(
                    "{} returned invalid log-probabilities for `{c}`: {lps:?}",
                    backend.describe()
                )));
            }
            Ok(CompletionScore::new(c.clone(), lps))
        })
        .collect()
}

/// Extra inputs some backend specs need at construction time.
#[derive(Default)]
pub struct BackendContext<'a> {
    /// Required by `stub:oracle-next-room`.
    pub oracle: Option<OracleStubContext<'a>>,
}

/// Builds a backend from a spec string:
///
/// * `stub:uniform`, `stub:oracle-next-room`, or `stub:<table.json>`
/// * `ngram:<corpus-path>,<order>` (order defaults to 2)
/// * `remote:<url>`, or bare `remote:` to use `GG_SCORER_URL`
pub fn make_backend(spec: &str, ctx: &BackendContext<'_>) -> Result<Arc<dyn Backend>> {
    let bad = |reason: &str| Error::BackendSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (scheme, arg) = spec
        .split_once(':')
        .ok_or_else(|| bad("expected `<scheme>:<argument>`"))?;
    match scheme {
        "stub" => match arg {
            "uniform" => Ok(Arc::new(StubBackend::constant(1.0))),
            "oracle-next-room" => {
                let oc = ctx.oracle.as_ref().ok_or_else(|| bad("needs a map and human trace"))?;
                Ok(Arc::new(StubBackend::oracle_next_room(oc)?))
            }
            "" => Err(bad("missing stub fixture")),
            path => Ok(Arc::new(StubBackend::from_file(path)?)),
        },
        "ngram" => {
            let (path, order) = match arg.rsplit_once(',') {
                Some((p, o)) => (
                    p,
                    o.trim().parse::<usize>().map_err(|_| bad("order must be an integer"))?,
                ),
                None => (arg, 2),
            };
            if path.is_empty() {
                return Err(bad("missing corpus path"));
            }
            Ok(Arc::new(NgramModel::from_file(path, order)?))
        }
        "remote" => {
            let url = if arg.is_empty() {
                std::env::var(SCORER_URL_ENV).map_err(|_| bad("no URL given and GG_SCORER_URL is not set"))?
            } else {
                arg.to_string()
            };
            Ok(Arc::new(RemoteBackend::connect(&url)?))
        }
        other => Err(bad(&format!("unknown scheme `{other}`"))),
    }
}
