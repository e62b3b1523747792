//! Text generation backends: a deterministic stub and an HTTP completion client.

use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::AgentId;
use crate::gen::prompt::PromptKind;
use crate::personas::ToxicityPropensity;
use crate::scheduler::Action;
use crate::topic::Topic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { max_tokens: 256, temperature: 0.8 }
    }
}

/// Structured context the stub uses in place of reading the prompt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubHints {
    pub topics: Vec<Topic>,
    pub parent_author: Option<String>,
    pub article_title: Option<String>,
    pub toxicity: Option<ToxicityPropensity>,
    pub menu: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRequest {
    pub prompt: String,
    pub kind: PromptKind,
    pub agent: AgentId,
    pub round: u32,
    pub params: GenParams,
    pub hints: StubHints,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("generation request timed out")]
    Timeout,
    #[error("generation endpoint unreachable: {0}")]
    Network(String),
    #[error("generation endpoint returned an unusable response: {0}")]
    BadResponse(String),
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GenRequest) -> Result<String, GenError>;
}

/// FNV-1a, used to derive stable stub seeds across platforms and toolchains.
fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so ("ab","c") and ("a","bc") differ
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic template generator. Output is a pure function of the seed,
/// agent, round, prompt kind, and a hash of the prompt text.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    seed: u64,
    mention_prob: f64,
    follow_prob: f64,
}

impl StubGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed, mention_prob: 0.5, follow_prob: 0.2 }
    }

    fn rng_for(&self, request: &GenRequest) -> ChaCha8Rng {
        let context = fnv1a(&[request.prompt.as_bytes()]);
        let seed = fnv1a(&[
            &self.seed.to_le_bytes(),
            &request.agent.0.to_le_bytes(),
            &request.round.to_le_bytes(),
            request.kind.tag().as_bytes(),
            &context.to_le_bytes(),
        ]);
        ChaCha8Rng::seed_from_u64(seed)
    }
}

const OPENERS: &[&str] = &[
    "Honestly,",
    "Not surprised.",
    "Here we go again.",
    "Called it.",
    "Read the article before commenting.",
    "Interesting take, but",
    "This is the part nobody talks about:",
];

const CLAIMS: &[&str] = &[
    "{k} keeps getting worse every year",
    "nobody asked for more {k}",
    "the real story is who profits from {k}",
    "{k} is overhyped and everyone knows it",
    "we should have seen this coming with {k}",
    "{k} will matter more than people think",
    "the people running {k} don't care about users",
];

const CLOSERS: &[&str] = &[
    "Change my mind.",
    "Same as it ever was.",
    "Wake up.",
    "Just my two cents.",
    "Time will tell.",
    "Follow the money.",
];

const INSULTS: &[&str] = &["clowns", "idiots", "morons", "shills", "pathetic"];

impl StubGenerator {
    fn sentence(rng: &mut ChaCha8Rng, topics: &[Topic]) -> String {
        let topic = topics.choose(rng).copied().unwrap_or(Topic::BigTech);
        let keyword = topic.keywords().choose(rng).copied().unwrap_or("tech");
        let claim = CLAIMS.choose(rng).copied().unwrap_or(CLAIMS[0]);
        claim.replace("{k}", keyword)
    }

    fn body(rng: &mut ChaCha8Rng, hints: &StubHints) -> String {
        let mut parts = vec![OPENERS.choose(rng).copied().unwrap_or("").to_string()];
        let n = rng.random_range(1..=2);
        for _ in 0..n {
            parts.push(format!("{}.", Self::sentence(rng, &hints.topics)));
        }
        let insults = match hints.toxicity {
            Some(ToxicityPropensity::Extremely) => 2,
            Some(ToxicityPropensity::Moderately) => usize::from(rng.random_bool(0.5)),
            _ => 0,
        };
        for _ in 0..insults {
            let word = INSULTS.choose(rng).copied().unwrap_or("clowns");
            parts.push(format!("Only {word} would defend this."));
        }
        parts.push(CLOSERS.choose(rng).copied().unwrap_or("").to_string());
        parts.retain(|p| !p.is_empty());
        parts.join(" ")
    }
}

impl TextGenerator for StubGenerator {
    fn generate(&self, request: &GenRequest) -> Result<String, GenError> {
        let mut rng = self.rng_for(request);
        let hints = &request.hints;
        let text = match request.kind {
            PromptKind::Post | PromptKind::ShareLinkFrame => {
                let title = match &hints.article_title {
                    Some(t) => t.clone(),
                    None => {
                        let s = Self::sentence(&mut rng, &hints.topics);
                        let mut c = s.chars();
                        c.next().map_or(s.clone(), |f| f.to_uppercase().chain(c).collect())
                    }
                };
                format!("TITLE: {title}\n{}", Self::body(&mut rng, hints))
            }
            PromptKind::Comment | PromptKind::MentionReply => {
                let body = Self::body(&mut rng, hints);
                match &hints.parent_author {
                    Some(name) if rng.random_bool(self.mention_prob) => format!("@{name} {body}"),
                    _ => body,
                }
            }
            PromptKind::FollowDecision => {
                if rng.random_bool(self.follow_prob) { "YES" } else { "NO" }.to_string()
            }
            PromptKind::ActionChoice => hints
                .menu
                .choose(&mut rng)
                .map_or("NONE", |a| a.menu_label())
                .to_string(),
        };
        Ok(text)
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    model: &'a str,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Client for an endpoint taking `{prompt, max_tokens, temperature, model}`
/// and answering `{text}`.
pub struct HttpGenerator {
    agent: ureq::Agent,
    url: String,
    model: String,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent, url: url.into(), model: model.into() }
    }
}

pub(crate) fn map_ureq_error(e: ureq::Error) -> GenError {
    match e {
        ureq::Error::Timeout(_) => GenError::Timeout,
        ureq::Error::StatusCode(code) => GenError::BadResponse(format!("HTTP {code}")),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => GenError::Timeout,
        other => GenError::Network(other.to_string()),
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, request: &GenRequest) -> Result<String, GenError> {
        let body = CompletionRequest {
            prompt: &request.prompt,
            max_tokens: request.params.max_tokens,
            temperature: request.params.temperature,
            model: &self.model,
        };
        let response: CompletionResponse = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(map_ureq_error)?
            .body_mut()
            .read_json()
            .map_err(|e| GenError::BadResponse(e.to_string()))?;
        if response.text.trim().is_empty() {
            return Err(GenError::BadResponse("empty text".into()));
        }
        Ok(response.text)
    }
}
