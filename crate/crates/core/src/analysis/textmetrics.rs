//! Reply-chain extraction, convergence entropy between turns, and
//! nearest-neighbor similarity of sentence embeddings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::Serialize;

use crate::events::{AgentId, EventKind, EventRecord, ItemId};

pub const MAX_TOKENS: usize = 256;
pub const MAX_LAG: usize = 10;
pub const MIN_CHAIN_LEN: usize = 3;

/// One post or comment in a reply forest; posts have no parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplyNode {
    pub id: ItemId,
    pub parent: Option<ItemId>,
    pub author: AgentId,
}

pub fn reply_nodes(events: &[EventRecord]) -> Vec<ReplyNode> {
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Post => Some(ReplyNode { id: e.post_id?, parent: None, author: e.agent }),
            k if k.is_comment() => Some(ReplyNode { id: e.comment_id?, parent: e.parent_id, author: e.agent }),
            _ => None,
        })
        .collect()
}

/// Texts by item: posts as `title\nbody`, comments as their body.
pub fn item_texts(events: &[EventRecord]) -> HashMap<ItemId, String> {
    let mut out = HashMap::new();
    for e in events {
        match e.kind {
            EventKind::Post => {
                if let Some(id) = e.post_id {
                    let title = e.title.as_deref().unwrap_or("");
                    let body = e.text.as_deref().unwrap_or("");
                    out.insert(id, if body.is_empty() { title.to_string() } else { format!("{title}\n{body}") });
                }
            }
            k if k.is_comment() => {
                if let Some(id) = e.comment_id {
                    out.insert(id, e.text.clone().unwrap_or_default());
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain {
    pub items: Vec<ItemId>,
    pub speakers: Vec<AgentId>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Length of the longest strictly alternating two-speaker run starting at
/// `start`.
fn alternating_run(speakers: &[AgentId], start: usize) -> usize {
    let mut end = start + 1;
    while end < speakers.len() {
        let ok = speakers[end] != speakers[end - 1] && (end < start + 2 || speakers[end] == speakers[end - 2]);
        if !ok {
            break;
        }
        end += 1;
    }
    end - start
}

/// Every root-to-leaf path is cut into maximal alternating runs, each new
/// run starting where the previous one broke. Runs of at least three turns
/// are kept, once per distinct item sequence, in depth-first order.
pub fn extract_chains(nodes: &[ReplyNode]) -> Vec<Chain> {
    let known: HashSet<ItemId> = nodes.iter().map(|n| n.id).collect();
    let mut children: BTreeMap<ItemId, Vec<ItemId>> = BTreeMap::new();
    let mut roots = Vec::new();
    let author: HashMap<ItemId, AgentId> = nodes.iter().map(|n| (n.id, n.author)).collect();
    for n in nodes {
        match n.parent {
            Some(p) if known.contains(&p) => children.entry(p).or_default().push(n.id),
            _ => roots.push(n.id),
        }
    }
    for c in children.values_mut() {
        c.sort_unstable();
    }
    roots.sort_unstable();

    let mut seen: HashSet<Vec<ItemId>> = HashSet::new();
    let mut chains = Vec::new();
    let mut path: Vec<ItemId> = Vec::new();
    // iterative DFS: (node, depth)
    let mut stack: Vec<(ItemId, usize)> = roots.iter().rev().map(|&r| (r, 0)).collect();
    while let Some((node, depth)) = stack.pop() {
        path.truncate(depth);
        path.push(node);
        match children.get(&node) {
            Some(kids) if !kids.is_empty() => {
                for &k in kids.iter().rev() {
                    stack.push((k, depth + 1));
                }
            }
            _ => {
                let speakers: Vec<AgentId> = path.iter().map(|i| author[i]).collect();
                let mut start = 0;
                while start < path.len() {
                    let len = alternating_run(&speakers, start);
                    if len >= MIN_CHAIN_LEN {
                        let items = path[start..start + len].to_vec();
                        if seen.insert(items.clone()) {
                            chains.push(Chain { items, speakers: speakers[start..start + len].to_vec() });
                        }
                    }
                    start += len;
                }
            }
        }
    }
    chains
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairType {
    Interpersonal,
    Intrapersonal,
}

impl PairType {
    pub fn from_lag(lag: usize) -> Self {
        if lag % 2 == 1 {
            PairType::Interpersonal
        } else {
            PairType::Intrapersonal
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            PairType::Interpersonal => "interpersonal",
            PairType::Intrapersonal => "intrapersonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TurnPair {
    pub i: usize,
    pub j: usize,
    pub lag: usize,
    pub pair_type: PairType,
}

/// All `(i, j)` with `i < j` and `j - i <= max_lag`, ordered by `i` then `j`.
pub fn enumerate_pairs(chain_len: usize, max_lag: usize) -> Vec<TurnPair> {
    let mut out = Vec::new();
    for i in 0..chain_len {
        for j in i + 1..chain_len.min(i + max_lag + 1) {
            let lag = j - i;
            out.push(TurnPair { i, j, lag, pair_type: PairType::from_lag(lag) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding matrix has no tokens")]
    Empty,
    #[error("token vectors have inconsistent dimensions")]
    Ragged,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("reading embeddings: {0}")]
    Io(String),
}

/// Per-token vectors for one text, special tokens excluded. Inputs longer
/// than 256 tokens are truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    rows: Vec<Vec<f64>>,
}

impl TokenEmbeddings {
    pub fn new(mut rows: Vec<Vec<f64>>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().ok_or(EmbeddingError::Empty)?.len();
        if dim == 0 {
            return Err(EmbeddingError::Empty);
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EmbeddingError::Ragged);
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        rows.truncate(MAX_TOKENS);
        Ok(Self { rows })
    }

    pub fn tokens(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    pub sigma: f64,
    pub center: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { sigma: 0.3, center: 1.0 }
    }
}

impl KernelParams {
    /// `ℓ(m)`: the Normal log-density at `1 + m`.
    pub fn log_density(&self, m: f64) -> f64 {
        let z = (1.0 + m - self.center) / self.sigma;
        -0.5 * z * z - (self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    /// A token's contribution `-exp(ℓ) ℓ` to the entropy.
    pub fn contribution(&self, m: f64) -> f64 {
        let l = self.log_density(m);
        -l.exp() * l
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Entropy {
    pub h: f64,
    pub tokens: usize,
    /// Zero-norm tokens of `x` that were left out.
    pub skipped: usize,
}

/// Entropy of the later turn `x` against the earlier turn `y`: each token of
/// `x` is matched to its most similar token of `y` by cosine similarity.
pub fn convergence_entropy(x: &TokenEmbeddings, y: &TokenEmbeddings, kernel: &KernelParams) -> Entropy {
    let ys: Vec<(&[f64], f64)> = y
        .rows()
        .iter()
        .map(|r| (r.as_slice(), norm(r)))
        .filter(|(_, n)| *n > 0.0)
        .collect();
    let mut h = 0.0;
    let mut tokens = 0;
    let mut skipped = 0;
    for row in x.rows() {
        let nx = norm(row);
        if nx == 0.0 || ys.is_empty() {
            skipped += 1;
            continue;
        }
        let m = ys
            .iter()
            .map(|(r, ny)| dot(row, r) / (nx * ny))
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(-1.0, 1.0);
        h += kernel.contribution(m);
        tokens += 1;
    }
    Entropy { h, tokens, skipped }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub chain: usize,
    pub pair: TurnPair,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { n: 0, mean: 0.0, median: 0.0 };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Self { n, mean: v.iter().sum::<f64>() / n as f64, median }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySummary {
    pub overall: Summary,
    pub by_lag: Vec<(usize, Summary)>,
    pub by_type: Vec<(PairType, Summary)>,
}

pub fn entropy_by_lag(pairs: &[ScoredPair]) -> EntropySummary {
    let mut lags: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut types: BTreeMap<PairType, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        lags.entry(p.pair.lag).or_default().push(p.h);
        types.entry(p.pair.pair_type).or_default().push(p.h);
    }
    let all: Vec<f64> = pairs.iter().map(|p| p.h).collect();
    EntropySummary {
        overall: Summary::of(&all),
        by_lag: lags.into_iter().map(|(k, v)| (k, Summary::of(&v))).collect(),
        by_type: types.into_iter().map(|(k, v)| (k, Summary::of(&v))).collect(),
    }
}

/// Scores every pair of every chain whose two turns have embeddings.
pub fn score_chains(
    chains: &[Chain],
    embeddings: &HashMap<ItemId, TokenEmbeddings>,
    kernel: &KernelParams,
) -> Vec<ScoredPair> {
    let mut out = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        for pair in enumerate_pairs(chain.len(), MAX_LAG) {
            let (Some(y), Some(x)) = (embeddings.get(&chain.items[pair.i]), embeddings.get(&chain.items[pair.j])) else {
                continue;
            };
            let e = convergence_entropy(x, y, kernel);
            if e.tokens > 0 {
                out.push(ScoredPair { chain: c, pair, h: e.h });
            }
        }
    }
    out
}

pub const NN_THRESHOLDS: (f64, f64) = (0.60, 0.80);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NnStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub share_above_060: f64,
    pub share_above_080: f64,
}

/// Best cosine similarity of each query among the references.
pub fn best_similarities(queries: &[Vec<f64>], references: &[Vec<f64>]) -> Vec<f64> {
    let refs: Vec<(&Vec<f64>, f64)> = references.iter().map(|r| (r, norm(r))).filter(|(_, n)| *n > 0.0).collect();
    queries
        .iter()
        .filter(|q| norm(q) > 0.0)
        .map(|q| {
            let nq = norm(q);
            refs.iter().map(|(r, nr)| dot(q, r) / (nq * nr)).fold(f64::NEG_INFINITY, f64::max)
        })
        .filter(|s| s.is_finite())
        .collect()
}

pub fn nearest_neighbor_similarity(queries: &[Vec<f64>], references: &[Vec<f64>], thresholds: (f64, f64)) -> NnStats {
    let best = best_similarities(queries, references);
    let s = Summary::of(&best);
    let share = |t: f64| {
        if best.is_empty() {
            0.0
        } else {
            // tolerance so a vector matched to itself counts at 1.0
            best.iter().filter(|&&x| x >= t - 1e-12).count() as f64 / best.len() as f64
        }
    };
    NnStats {
        n: s.n,
        mean: s.mean,
        median: s.median,
        share_above_060: share(thresholds.0),
        share_above_080: share(thresholds.1),
    }
}

/// Matrices read from a precomputed embedding file. Each block is a header
/// line `id<TAB>T<TAB>dim` followed by `T` lines of `dim` numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingFile {
    pub entries: BTreeMap<String, Vec<Vec<f64>>>,
}

impl EmbeddingFile {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut entries = BTreeMap::new();
        let mut lines = reader.lines().enumerate();
        let fmt = |line: usize, message: &str| EmbeddingError::Format { line: line + 1, message: message.to_string() };
        while let Some((n, line)) = lines.next() {
            let line = line.map_err(|e| EmbeddingError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [id, t, dim] = parts[..] else {
                return Err(fmt(n, "expected header id<TAB>T<TAB>dim"));
            };
            let t: usize = t.trim().parse().map_err(|_| fmt(n, "bad token count"))?;
            let dim: usize = dim.trim().parse().map_err(|_| fmt(n, "bad dimension"))?;
            let mut rows = Vec::with_capacity(t);
            for _ in 0..t {
                let (m, row) = lines.next().ok_or_else(|| fmt(n, "truncated block"))?;
                let row = row.map_err(|e| EmbeddingError::Io(e.to_string()))?;
                let v: Vec<f64> = row
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| fmt(m, "bad number"))?;
                if v.len() != dim {
                    return Err(fmt(m, "vector length does not match header"));
                }
                rows.push(v);
            }
            entries.insert(id.to_string(), rows);
        }
        Ok(Self { entries })
    }

    /// Token matrices keyed by numeric item id.
    pub fn token_embeddings(&self) -> Result<HashMap<ItemId, TokenEmbeddings>, EmbeddingError> {
        let mut out = HashMap::new();
        for (id, rows) in &self.entries {
            if let Ok(n) = id.parse::<u64>() {
                out.insert(ItemId(n), TokenEmbeddings::new(rows.clone())?);
            }
        }
        Ok(out)
    }

    /// First row of every entry whose id starts with `prefix`, in id order.
    pub fn vectors_with_prefix(&self, prefix: &str) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .filter(|(id, rows)| id.starts_with(prefix) && !rows.is_empty())
            .map(|(_, rows)| rows[0].clone())
            .collect()
    }
}
