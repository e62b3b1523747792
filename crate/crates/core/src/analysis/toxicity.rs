//! Toxicity summaries stratified by content layer.

use serde::Serialize;

use crate::events::{EventKind, EventRecord};

pub const BATCH_SIZE: usize = 32;
pub const LOW_THRESHOLD: f64 = 0.25;
pub const HIGH_THRESHOLD: f64 = 0.50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Posts,
    Comments,
    All,
}

impl Layer {
    pub fn key(self) -> &'static str {
        match self {
            Layer::Posts => "posts",
            Layer::Comments => "comments",
            Layer::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("toxicity scorer failed: {0}")]
pub struct ScorerError(pub String);

/// Maps texts to probabilities of toxicity, one per text, in order.
pub trait ToxicityScorer: Send + Sync {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToxicityReport {
    pub layer: Layer,
    pub mean: f64,
    pub share_above_025: f64,
    pub share_above_050: f64,
    pub n: usize,
    /// Set when the scorer failed before every text was scored; `n` counts
    /// the texts that were.
    pub partial: bool,
}

impl ToxicityReport {
    /// Summary of a score multiset; thresholds are inclusive.
    pub fn from_scores(layer: Layer, scores: &[f64]) -> Self {
        let n = scores.len();
        if n == 0 {
            return Self { layer, mean: 0.0, share_above_025: 0.0, share_above_050: 0.0, n, partial: false };
        }
        let share = |t: f64| scores.iter().filter(|&&s| s >= t).count() as f64 / n as f64;
        Self {
            layer,
            mean: scores.iter().sum::<f64>() / n as f64,
            share_above_025: share(LOW_THRESHOLD),
            share_above_050: share(HIGH_THRESHOLD),
            n,
            partial: false,
        }
    }
}

/// Drops URLs and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .filter(|w| !(w.starts_with("http://") || w.starts_with("https://") || w.starts_with("www.")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Root-post texts (title and body) and comment texts, normalized.
pub fn layer_texts(events: &[EventRecord]) -> (Vec<String>, Vec<String>) {
    let mut posts = Vec::new();
    let mut comments = Vec::new();
    for e in events {
        let text = e.text.as_deref().unwrap_or("");
        if e.kind == EventKind::Post {
            let title = e.title.as_deref().unwrap_or("");
            posts.push(normalize_text(&format!("{title} {text}")));
        } else if e.kind.is_comment() {
            comments.push(normalize_text(text));
        }
    }
    (posts, comments)
}

fn score_batched(texts: &[String], scorer: &dyn ToxicityScorer) -> (Vec<f64>, bool) {
    let mut scores = Vec::with_capacity(texts.len());
    for batch in texts.chunks(BATCH_SIZE) {
        match scorer.score(batch) {
            Ok(s) if s.len() == batch.len() => scores.extend(s.into_iter().map(|x| x.clamp(0.0, 1.0))),
            _ => return (scores, true),
        }
    }
    (scores, false)
}

/// Reports for posts, comments, and both combined. Texts are scored in
/// batches of 32; a failing batch stops scoring for that layer.
pub fn toxicity_report(posts: &[String], comments: &[String], scorer: &dyn ToxicityScorer) -> Vec<ToxicityReport> {
    let (post_scores, post_partial) = score_batched(posts, scorer);
    let (comment_scores, comment_partial) = score_batched(comments, scorer);
    let all: Vec<f64> = post_scores.iter().chain(&comment_scores).copied().collect();
    let mut out = vec![
        ToxicityReport::from_scores(Layer::Posts, &post_scores),
        ToxicityReport::from_scores(Layer::Comments, &comment_scores),
        ToxicityReport::from_scores(Layer::All, &all),
    ];
    out[0].partial = post_partial;
    out[1].partial = comment_partial;
    out[2].partial = post_partial || comment_partial;
    out
}

const LEXICON: &[&str] = &[
    "idiot", "idiots", "moron", "morons", "clown", "clowns", "stupid", "pathetic", "shill", "shills",
    "trash", "garbage", "dumb", "loser", "losers", "scum",
];

/// Deterministic offline scorer: `1 - 0.6^hits` over a small insult lexicon.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexiconScorer;

impl LexiconScorer {
    pub fn score_one(text: &str) -> f64 {
        let hits = text
            .split(|c: char| !c.is_ascii_alphabetic())
            .filter(|w| !w.is_empty())
            .filter(|w| LEXICON.contains(&w.to_ascii_lowercase().as_str()))
            .count();
        1.0 - 0.6f64.powi(hits as i32)
    }
}

impl ToxicityScorer for LexiconScorer {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        Ok(texts.iter().map(|t| Self::score_one(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture() {
        let r = ToxicityReport::from_scores(Layer::All, &[0.1, 0.3, 0.6]);
        assert!((r.mean - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.share_above_025 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.share_above_050 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zeros_and_boundaries() {
        let r = ToxicityReport::from_scores(Layer::Posts, &[0.0; 4]);
        assert_eq!((r.mean, r.share_above_025, r.share_above_050), (0.0, 0.0, 0.0));
        let r = ToxicityReport::from_scores(Layer::Posts, &[0.25, 0.5]);
        assert_eq!((r.share_above_025, r.share_above_050), (1.0, 0.5));
    }

    struct FailAfter(usize);
    impl ToxicityScorer for FailAfter {
        fn score(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
            if texts.len() < self.0 {
                Err(ScorerError("boom".into()))
            } else {
                Ok(vec![0.5; texts.len()])
            }
        }
    }

    #[test]
    fn failure_marks_partial() {
        let posts: Vec<String> = (0..40).map(|i| format!("p{i}")).collect();
        let reports = toxicity_report(&posts, &[], &FailAfter(32));
        assert!(reports[0].partial);
        assert_eq!(reports[0].n, 32);
        assert!(!reports[1].partial);
        assert!(reports[2].partial);
    }

    #[test]
    fn lexicon_scores() {
        assert_eq!(LexiconScorer::score_one("a calm remark"), 0.0);
        assert!((LexiconScorer::score_one("Only clowns would defend this.") - 0.4).abs() < 1e-12);
        assert!(LexiconScorer::score_one("idiots and morons") > 0.5);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("see  https://x.org/a \n now"), "see now");
    }
}
