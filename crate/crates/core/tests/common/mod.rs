//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use forumsim::analysis::network::InteractionGraph;
use forumsim::analysis::textmetrics::ReplyNode;
use forumsim::events::{AgentId, ItemId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k^-2.5 / Z` for k in 1..=10, with Z summed directly.
pub fn zipf_pmf() -> Vec<f64> {
    let raw: Vec<f64> = (1..=10).map(|k| (k as f64).powf(-2.5)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// P(read appears in a two-draw menu), enumerating every ordered pair of
/// draws without replacement.
pub fn read_inclusion_prob(weights: &[f64; 5], read: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut prob = 0.0;
    for a in 0..5 {
        for b in 0..5 {
            if a != b && (a == read || b == read) {
                prob += p[a] * p[b] / (1.0 - p[a]);
            }
        }
    }
    prob
}

/// Dense brute-force graph statistics.
#[derive(Debug, Clone)]
pub struct DenseGraph {
    pub n: usize,
    pub w: Vec<Vec<u64>>,
    max: f64,
}

impl DenseGraph {
    pub fn from_graph(g: &InteractionGraph) -> Self {
        let n = g.node_count();
        let mut w = vec![vec![0; n]; n];
        for (i, row) in w.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = g.raw_weight(i, j);
            }
        }
        let max = w.iter().flatten().copied().max().unwrap_or(0) as f64;
        Self { n, w, max }
    }

    pub fn norm(&self, i: usize, j: usize) -> f64 {
        if self.w[i][j] == 0 { 0.0 } else { self.w[i][j] as f64 / self.max }
    }

    pub fn edges(&self) -> usize {
        let mut e = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.w[i][j] > 0 {
                    e += 1;
                }
            }
        }
        e
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.w[i][j] > 0).count()
    }

    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let possible = self.n * (self.n - 1) / 2;
        self.edges() as f64 / possible as f64
    }

    pub fn avg_degree(&self) -> f64 {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() as f64 / self.n as f64
    }

    pub fn weighted_avg_degree(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.norm(i, j);
            }
        }
        s / self.n as f64
    }

    pub fn clustering(&self, u: usize) -> f64 {
        let k = self.degree(u);
        if k < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for v in 0..self.n {
            for w in 0..self.n {
                if v != w && v != u && w != u {
                    let t = self.norm(u, v) * self.norm(u, w) * self.norm(v, w);
                    s += t.powf(1.0 / 3.0);
                }
            }
        }
        s / (k * (k - 1)) as f64
    }

    pub fn avg_clustering(&self) -> f64 {
        (0..self.n).map(|u| self.clustering(u)).sum::<f64>() / self.n as f64
    }

    /// Size of the largest connected component, by repeated label spreading.
    pub fn lcc(&self) -> usize {
        let mut label: Vec<usize> = (0..self.n).collect();
        loop {
            let mut changed = false;
            for i in 0..self.n {
                for j in 0..self.n {
                    if self.w[i][j] > 0 && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut sizes = BTreeMap::new();
        for l in label {
            *sizes.entry(l).or_insert(0) += 1;
        }
        sizes.values().copied().max().unwrap_or(0)
    }
}

/// Random simple graph on `n` nodes with integer weights in 1..=3.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> InteractionGraph {
    let mut edges = Vec::new();
    for i in 0..n as u64 {
        for j in i + 1..n as u64 {
            if rng.random::<f64>() < p {
                edges.push((AgentId(i), AgentId(j), rng.random_range(1..=3)));
            }
        }
    }
    InteractionGraph::from_edges((0..n as u64).map(AgentId), edges)
}

/// Random reply forest: item `i` replies to a random earlier item or starts
/// a new thread, written by one of `speakers` agents.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, speakers: u64) -> Vec<ReplyNode> {
    (0..n)
        .map(|i| {
            let parent = if i == 0 || rng.random::<f64>() < 0.05 {
                None
            } else {
                Some(ItemId(rng.random_range(0..i) as u64))
            };
            ReplyNode { id: ItemId(i as u64), parent, author: AgentId(rng.random_range(0..speakers)) }
        })
        .collect()
}

fn two_speaker_alternation(speakers: &[AgentId]) -> bool {
    let distinct: BTreeSet<_> = speakers.iter().collect();
    distinct.len() <= 2 && speakers.windows(2).all(|w| w[0] != w[1])
}

/// Every root-to-leaf path cut greedily into the longest two-speaker
/// alternating segments, checked segment by segment; segments of three or
/// more turns, as a set of item sequences.
pub fn brute_force_chains(nodes: &[ReplyNode]) -> BTreeSet<Vec<ItemId>> {
    let ids: BTreeSet<ItemId> = nodes.iter().map(|n| n.id).collect();
    let author: BTreeMap<ItemId, AgentId> = nodes.iter().map(|n| (n.id, n.author)).collect();
    let parent: BTreeMap<ItemId, ItemId> =
        nodes.iter().filter_map(|n| n.parent.filter(|p| ids.contains(p)).map(|p| (n.id, p))).collect();
    let has_child: BTreeSet<ItemId> = parent.values().copied().collect();
    let mut out = BTreeSet::new();
    for &leaf in ids.iter().filter(|i| !has_child.contains(i)) {
        let mut path = vec![leaf];
        while let Some(&p) = parent.get(path.last().unwrap()) {
            path.push(p);
        }
        path.reverse();
        let speakers: Vec<AgentId> = path.iter().map(|i| author[i]).collect();
        let mut start = 0;
        while start < path.len() {
            let len = (1..=path.len() - start)
                .rev()
                .find(|&l| two_speaker_alternation(&speakers[start..start + l]))
                .unwrap();
            if len >= 3 {
                out.insert(path[start..start + len].to_vec());
            }
            start += len;
        }
    }
    out
}

/// Planted core–periphery graph: nodes `0..core` form the core.
pub fn planted_graph(seed: u64, n: usize, core: usize, p_cc: f64, p_cp: f64, p_pp: f64) -> InteractionGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = match (i < core, j < core) {
                (true, true) => p_cc,
                (false, false) => p_pp,
                _ => p_cp,
            };
            if r.random::<f64>() < p {
                edges.push((AgentId(i as u64), AgentId(j as u64), 1));
            }
        }
    }
    InteractionGraph::from_edges((0..n as u64).map(AgentId), edges)
}

/// Counts-only model of the default stub simulation: population turnover,
/// activation, budgets, menus, the stub chooser, empty-slate comments and
/// the mention-reply loop. No text, no interests, no follows.
pub struct ActivityOracle {
    pub days: u32,
    pub starting_agents: usize,
    pub activation: f64,
    pub churn: f64,
    pub growth: f64,
    pub window: u32,
    pub slate_limit: usize,
}

impl Default for ActivityOracle {
    fn default() -> Self {
        Self {
            days: 30,
            starting_agents: 50,
            activation: 0.043,
            churn: 0.9,
            growth: 0.3,
            window: 180,
            slate_limit: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleCounts {
    pub posts: usize,
    pub comments: usize,
    pub unique_users: usize,
    pub final_population: usize,
}

struct OAgent {
    budget: usize,
    joined_day: u32,
    last_active: Option<u32>,
    member: bool,
    pending: Vec<usize>,
    wrote: bool,
}

struct OItem {
    author: usize,
    round: u32,
    root: usize,
}

const WEIGHTS: [f64; 5] = [0.005, 0.06, 0.06, 0.40, 0.10];
const POST: usize = 0;
const SHARE: usize = 1;
const COMMENT: usize = 2;

fn weighted_index<R: Rng>(rng: &mut R, w: &[(usize, f64)]) -> usize {
    let total: f64 = w.iter().map(|x| x.1).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(i, wi) in w {
        acc += wi;
        if u < acc {
            return i;
        }
    }
    w[w.len() - 1].0
}

impl ActivityOracle {
    pub fn run(&self, seed: u64) -> OracleCounts {
        let mut r = rng(seed);
        let pmf = zipf_pmf();
        let budget = |r: &mut ChaCha8Rng| {
            let u = r.random::<f64>();
            let mut acc = 0.0;
            for (k, p) in pmf.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k + 1;
                }
            }
            10
        };
        let mut agents: Vec<OAgent> = Vec::new();
        for _ in 0..self.starting_agents {
            let b = budget(&mut r);
            agents.push(OAgent { budget: b, joined_day: 0, last_active: None, member: true, pending: vec![], wrote: false });
        }
        let mut items: Vec<OItem> = Vec::new();
        let mut posts: Vec<usize> = Vec::new();
        let mut threads: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut counts = OracleCounts::default();

        let add_comment = |agents: &mut Vec<OAgent>,
                           items: &mut Vec<OItem>,
                           threads: &mut BTreeMap<usize, Vec<usize>>,
                           r: &mut ChaCha8Rng,
                           agent: usize,
                           parent: usize,
                           round: u32| {
            let root = items[parent].root;
            let id = items.len();
            items.push(OItem { author: agent, round, root });
            threads.entry(root).or_default().push(id);
            agents[agent].pending.retain(|&m| m != parent);
            agents[agent].wrote = true;
            let target = items[parent].author;
            if r.random::<f64>() < 0.5 && target != agent && agents[target].member {
                agents[target].pending.push(id);
            }
        };

        for day in 0..self.days {
            for hour in 0..24 {
                let round = day * 24 + hour;
                let members: Vec<usize> = (0..agents.len()).filter(|&i| agents[i].member).collect();
                let active: Vec<usize> = members.into_iter().filter(|_| r.random::<f64>() < self.activation).collect();
                for a in active {
                    agents[a].last_active = Some(round);
                    if let Some(m) = agents[a].pending.pop() {
                        add_comment(&mut agents, &mut items, &mut threads, &mut r, a, m, round);
                        counts.comments += 1;
                    }
                    for _ in 0..agents[a].budget {
                        let mut pool: Vec<(usize, f64)> = WEIGHTS.iter().copied().enumerate().collect();
                        let first = weighted_index(&mut r, &pool);
                        pool.retain(|p| p.0 != first);
                        let second = weighted_index(&mut r, &pool);
                        if r.random::<f64>() < 0.15 {
                            continue;
                        }
                        let action = weighted_index(&mut r, &[(first, WEIGHTS[first]), (second, WEIGHTS[second])]);
                        match action {
                            POST | SHARE => {
                                items.push(OItem { author: a, round, root: items.len() });
                                posts.push(items.len() - 1);
                                agents[a].wrote = true;
                                counts.posts += 1;
                            }
                            COMMENT => {
                                let mut slate: Vec<usize> = posts
                                    .iter()
                                    .copied()
                                    .filter(|&p| items[p].author != a && round - items[p].round <= self.window)
                                    .collect();
                                slate.sort_by(|x, y| items[*y].round.cmp(&items[*x].round).then(y.cmp(x)));
                                slate.truncate(self.slate_limit);
                                if slate.is_empty() {
                                    continue;
                                }
                                let post = slate[r.random_range(0..slate.len())];
                                let thread = std::iter::once(post).chain(threads.get(&post).into_iter().flatten().copied());
                                let parent = thread.filter(|&i| items[i].author != a).last().unwrap_or(post);
                                add_comment(&mut agents, &mut items, &mut threads, &mut r, a, parent, round);
                                counts.comments += 1;
                            }
                            _ => {}
                        }
                    }
                }
            }
            let day_start = day * 24;
            let n_pre = agents.iter().filter(|a| a.member).count();
            let mut inactive: Vec<(usize, u32)> = (0..agents.len())
                .filter(|&i| agents[i].member && agents[i].last_active.is_none_or(|r| r < day_start))
                .map(|i| (i, day - agents[i].last_active.map_or(agents[i].joined_day, |r| r / 24)))
                .collect();
            let remove = (self.churn * inactive.len() as f64 + 1e-9).floor() as usize;
            inactive.shuffle(&mut r);
            inactive.sort_by(|x, y| y.1.cmp(&x.1));
            for &(i, _) in inactive.iter().take(remove) {
                agents[i].member = false;
                agents[i].pending.clear();
            }
            let add = (self.growth * n_pre as f64 + 1e-9).floor() as usize;
            for _ in 0..add {
                let b = budget(&mut r);
                agents.push(OAgent { budget: b, joined_day: day, last_active: None, member: true, pending: vec![], wrote: false });
            }
        }
        counts.unique_users = agents.iter().filter(|a| a.wrote).count();
        counts.final_population = agents.iter().filter(|a| a.member).count();
        counts
    }

    pub fn mean(&self, seeds: std::ops::Range<u64>) -> (f64, f64, f64) {
        let n = (seeds.end - seeds.start) as f64;
        let mut acc = (0.0, 0.0, 0.0);
        for s in seeds {
            let c = self.run(s);
            acc.0 += c.posts as f64;
            acc.1 += c.comments as f64;
            acc.2 += c.unique_users as f64;
        }
        (acc.0 / n, acc.1 / n, acc.2 / n)
    }
}

/// A throwaway JSON-over-HTTP server: every POST body is handed to
/// `handler` and its value is returned with status 200.
pub fn mock_server<F>(handler: F) -> String
where
    F: Fn(&str, serde_json::Value) -> serde_json::Value + Send + Sync + 'static,
{
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handler = Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    return;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                let response = handler(&path, request).to_string();
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    response.len(),
                    response
                );
            });
        }
    });
    format!("http://{addr}")
}

/// Deterministic bag-of-bytes embedding used by the mock embedding service.
pub fn word_vector(word: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[word.bytes().map(usize::from).sum::<usize>() % dim] = 1.0;
    v
}

pub fn sentence_vector(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for w in text.split_whitespace() {
        for (a, b) in v.iter_mut().zip(word_vector(w, dim)) {
            *a += b;
        }
    }
    v
}

/// Handler for `/embed` (token and sentence modes) and `/toxicity`
/// (`0.1 * words`, capped at 1).
pub fn services_handler(path: &str, request: serde_json::Value) -> serde_json::Value {
    const DIM: usize = 8;
    let texts: Vec<String> = request["texts"]
        .as_array()
        .map(|a| a.iter().map(|t| t.as_str().unwrap_or("").to_string()).collect())
        .unwrap_or_default();
    if path.ends_with("toxicity") {
        let scores: Vec<f64> = texts.iter().map(|t| (0.1 * t.split_whitespace().count() as f64).min(1.0)).collect();
        return serde_json::json!({ "scores": scores });
    }
    if request["mode"] == "sentence" {
        let v: Vec<Vec<f64>> = texts.iter().map(|t| sentence_vector(t, DIM)).collect();
        return serde_json::json!({ "dim": DIM, "embeddings": v });
    }
    let m: Vec<Vec<Vec<f64>>> = texts
        .iter()
        .map(|t| {
            let rows: Vec<Vec<f64>> = t.split_whitespace().map(|w| word_vector(w, DIM)).collect();
            if rows.is_empty() { vec![vec![0.0; DIM]] } else { rows }
        })
        .collect();
    let counts: Vec<usize> = m.iter().map(Vec::len).collect();
    serde_json::json!({ "dim": DIM, "embeddings": m, "token_counts": counts })
}
