//! Clients for the optional model services: toxicity scores and token or
//! sentence embeddings over JSON-over-HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analysis::textmetrics::{EmbeddingError, TokenEmbeddings};
use crate::analysis::toxicity::{ScorerError, ToxicityScorer};

pub const SERVICES_ENV: &str = "MODEL_SERVICES_URL";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
    #[error("{url}: malformed response: {message}")]
    Response { url: String, message: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into()
}

fn post_json<B: Serialize, T: for<'de> Deserialize<'de>>(agent: &ureq::Agent, url: &str, body: &B) -> Result<T, ServiceError> {
    agent
        .post(url)
        .send_json(body)
        .map_err(|e| ServiceError::Transport { url: url.to_string(), message: e.to_string() })?
        .body_mut()
        .read_json()
        .map_err(|e| ServiceError::Response { url: url.to_string(), message: e.to_string() })
}

/// Joins a base service URL and a route.
pub fn endpoint(base: &str, route: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), route.trim_start_matches('/'))
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct ScoresResponse {
    scores: Vec<f64>,
}

/// `POST {texts}` answered by `{scores}`, one score per text.
pub struct HttpToxicityScorer {
    agent: ureq::Agent,
    url: String,
}

impl HttpToxicityScorer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self { agent: agent(timeout), url: url.into() }
    }
}

impl ToxicityScorer for HttpToxicityScorer {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let r: ScoresResponse = post_json(&self.agent, &self.url, &TextsRequest { texts }).map_err(|e| ScorerError(e.to_string()))?;
        if r.scores.len() != texts.len() {
            return Err(ScorerError(format!("{} scores for {} texts", r.scores.len(), texts.len())));
        }
        if r.scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(ScorerError("score outside [0, 1]".into()));
        }
        Ok(r.scores)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
    mode: &'a str,
}

#[derive(Deserialize)]
struct TokenResponse {
    #[allow(dead_code)]
    dim: usize,
    embeddings: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    #[allow(dead_code)]
    token_counts: Vec<usize>,
}

#[derive(Deserialize)]
struct SentenceResponse {
    #[allow(dead_code)]
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

/// `POST {texts, mode}` where mode is `token` or `sentence`.
pub struct EmbedClient {
    agent: ureq::Agent,
    url: String,
    batch: usize,
}

impl EmbedClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self { agent: agent(timeout), url: url.into(), batch: 16 }
    }

    fn check_len(&self, got: usize, want: usize) -> Result<(), ServiceError> {
        if got == want {
            Ok(())
        } else {
            Err(ServiceError::Response { url: self.url.clone(), message: format!("{got} embeddings for {want} texts") })
        }
    }

    pub fn token_embeddings(&self, texts: &[String]) -> Result<Vec<TokenEmbeddings>, ServiceError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch) {
            let r: TokenResponse = post_json(&self.agent, &self.url, &EmbedRequest { texts: chunk, mode: "token" })?;
            self.check_len(r.embeddings.len(), chunk.len())?;
            for m in r.embeddings {
                out.push(TokenEmbeddings::new(m)?);
            }
        }
        Ok(out)
    }

    pub fn sentence_embeddings(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ServiceError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch) {
            let r: SentenceResponse = post_json(&self.agent, &self.url, &EmbedRequest { texts: chunk, mode: "sentence" })?;
            self.check_len(r.embeddings.len(), chunk.len())?;
            out.extend(r.embeddings);
        }
        Ok(out)
    }
}
