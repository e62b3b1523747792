//! Two-block hub-and-spoke stochastic block model fitted by collapsed Gibbs
//! sampling, with partition scoring and ranking.
//!
//! Inference uses the binary adjacency only. Edge weights enter through
//! modularity and weighted degree.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::ln_beta;

use crate::analysis::network::InteractionGraph;
use crate::events::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeWeights {
    pub core_density: f64,
    pub cp_coupling: f64,
    pub modularity: f64,
    pub mdl_norm: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self { core_density: 0.3, cp_coupling: 0.3, modularity: 0.2, mdl_norm: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CPParams {
    pub n_gibbs: usize,
    /// Burn-in single-site updates per node.
    pub burnin_per_node: usize,
    pub n_runs: usize,
    pub window_size: usize,
    pub n_windows: usize,
    pub consensus_size: usize,
    /// Random labelings drawn for the description-length null diagnostic.
    pub mdl_samples: usize,
    /// Fraction of highest-degree nodes that start in the core.
    pub init_core_fraction: f64,
    pub weights: CompositeWeights,
    pub seed: u64,
}

impl Default for CPParams {
    fn default() -> Self {
        Self {
            n_gibbs: 100,
            burnin_per_node: 10,
            n_runs: 5,
            window_size: 25,
            n_windows: 4,
            consensus_size: 50,
            mdl_samples: 10_000,
            init_core_fraction: 0.10,
            weights: CompositeWeights::default(),
            seed: 0x5eed_c0de,
        }
    }
}

impl CPParams {
    pub fn validate(&self) -> Result<(), CpError> {
        if self.window_size * self.n_windows != self.n_gibbs {
            return Err(CpError::Params("window_size * n_windows must equal n_gibbs".into()));
        }
        if self.consensus_size == 0 || self.consensus_size > self.n_gibbs {
            return Err(CpError::Params("consensus_size must lie in 1..=n_gibbs".into()));
        }
        if self.n_runs == 0 {
            return Err(CpError::Params("n_runs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Core,
    Periphery,
}

impl Label {
    pub fn flipped(self) -> Self {
        match self {
            Label::Core => Label::Periphery,
            Label::Periphery => Label::Core,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Label::Core => "core",
            Label::Periphery => "periphery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CpError {
    #[error("graph is not connected; fit the largest component instead")]
    Disconnected,
    #[error("graph has {0} nodes; at least 3 are needed")]
    TooSmall(usize),
    #[error("both blocks must be non-empty")]
    EmptyBlock,
    #[error("label vector has {got} entries for {expected} nodes")]
    LabelCount { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityMetrics {
    pub core_density: f64,
    pub periphery_density: f64,
    pub cp_density: f64,
    pub modularity: f64,
    /// NaN when the label mixing is degenerate.
    pub assortativity: f64,
    pub mdl: f64,
    pub composite: f64,
}

impl QualityMetrics {
    pub fn ordered(&self) -> bool {
        self.core_density >= self.cp_density && self.cp_density >= self.periphery_density
    }
}

/// Edge and dyad counts per block pair, binary adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockCounts {
    n_core: usize,
    n_per: usize,
    e_cc: usize,
    e_cp: usize,
    e_pp: usize,
}

impl BlockCounts {
    fn of(g: &InteractionGraph, labels: &[Label]) -> Self {
        let n_core = labels.iter().filter(|&&l| l == Label::Core).count();
        let mut c = BlockCounts { n_core, n_per: labels.len() - n_core, e_cc: 0, e_cp: 0, e_pp: 0 };
        for i in 0..g.node_count() {
            for j in g.neighbors(i).filter(|&j| j > i) {
                match (labels[i], labels[j]) {
                    (Label::Core, Label::Core) => c.e_cc += 1,
                    (Label::Periphery, Label::Periphery) => c.e_pp += 1,
                    _ => c.e_cp += 1,
                }
            }
        }
        c
    }

    fn dyads(&self) -> (usize, usize, usize) {
        let pairs = |n: usize| n * n.saturating_sub(1) / 2;
        (pairs(self.n_core), self.n_core * self.n_per, pairs(self.n_per))
    }

    /// Log marginal likelihood under independent Beta(1,1) priors.
    fn log_marginal(&self) -> f64 {
        let (d_cc, d_cp, d_pp) = self.dyads();
        let term = |e: usize, d: usize| ln_beta(e as f64 + 1.0, (d - e) as f64 + 1.0);
        term(self.e_cc, d_cc) + term(self.e_cp, d_cp) + term(self.e_pp, d_pp)
    }
}

fn density(e: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        e as f64 / d as f64
    }
}

fn check_labels(g: &InteractionGraph, labels: &[Label]) -> Result<(), CpError> {
    if labels.len() != g.node_count() {
        return Err(CpError::LabelCount { expected: g.node_count(), got: labels.len() });
    }
    if !labels.contains(&Label::Core) || !labels.contains(&Label::Periphery) {
        return Err(CpError::EmptyBlock);
    }
    Ok(())
}

/// Resamples one node's label from its collapsed conditional. A move that
/// would empty a block is not taken.
fn update_node<R: Rng + ?Sized>(g: &InteractionGraph, labels: &mut [Label], counts: &mut BlockCounts, i: usize, rng: &mut R) {
    let current = labels[i];
    let (k_core, k_per) = g.neighbors(i).fold((0, 0), |(c, p), j| match labels[j] {
        Label::Core => (c + 1, p),
        Label::Periphery => (c, p + 1),
    });
    let mut base = *counts;
    match current {
        Label::Core => {
            if base.n_core == 1 {
                return;
            }
            base.n_core -= 1;
            base.e_cc -= k_core;
            base.e_cp -= k_per;
        }
        Label::Periphery => {
            if base.n_per == 1 {
                return;
            }
            base.n_per -= 1;
            base.e_cp -= k_core;
            base.e_pp -= k_per;
        }
    }
    let as_core = BlockCounts { n_core: base.n_core + 1, e_cc: base.e_cc + k_core, e_cp: base.e_cp + k_per, ..base };
    let as_per = BlockCounts { n_per: base.n_per + 1, e_cp: base.e_cp + k_core, e_pp: base.e_pp + k_per, ..base };
    let (lc, lp) = (as_core.log_marginal(), as_per.log_marginal());
    let p_core = 1.0 / (1.0 + (lp - lc).exp());
    if rng.random::<f64>() < p_core {
        labels[i] = Label::Core;
        *counts = as_core;
    } else {
        labels[i] = Label::Periphery;
        *counts = as_per;
    }
}

/// One sweep: every node once, in a fresh random order.
pub fn gibbs_sweep<R: Rng + ?Sized>(labels: &mut [Label], g: &InteractionGraph, rng: &mut R) -> Result<(), CpError> {
    check_labels(g, labels)?;
    let mut counts = BlockCounts::of(g, labels);
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.shuffle(rng);
    for i in order {
        update_node(g, labels, &mut counts, i, rng);
    }
    Ok(())
}

/// Description length in bits: block-model likelihood at the MLE densities
/// plus one bit per node label.
pub fn mdl_hubspoke(g: &InteractionGraph, labels: &[Label]) -> Result<f64, CpError> {
    check_labels(g, labels)?;
    Ok(mdl_from_counts(&BlockCounts::of(g, labels)))
}

fn mdl_from_counts(c: &BlockCounts) -> f64 {
    let (d_cc, d_cp, d_pp) = c.dyads();
    let bits = |e: usize, d: usize| {
        if d == 0 || e == 0 || e == d {
            return 0.0;
        }
        let p = e as f64 / d as f64;
        -(e as f64 * p.log2() + (d - e) as f64 * (1.0 - p).log2())
    };
    bits(c.e_cc, d_cc) + bits(c.e_cp, d_cp) + bits(c.e_pp, d_pp) + (c.n_core + c.n_per) as f64
}

/// Weighted Newman modularity of the two-block split.
pub fn modularity(g: &InteractionGraph, labels: &[Label]) -> f64 {
    let mut total = 0.0;
    let mut inside = [0.0; 2];
    let mut strength = [0.0; 2];
    let block = |l: Label| usize::from(l == Label::Periphery);
    for i in 0..g.node_count() {
        strength[block(labels[i])] += g.weighted_degree(i);
        for j in g.neighbors(i).filter(|&j| j > i) {
            let w = g.weight(i, j);
            total += w;
            if labels[i] == labels[j] {
                inside[block(labels[i])] += w;
            }
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    (0..2)
        .map(|b| inside[b] / total - (strength[b] / (2.0 * total)).powi(2))
        .sum()
}

/// Categorical assortativity of the labels over unweighted edges.
pub fn assortativity(g: &InteractionGraph, labels: &[Label]) -> f64 {
    let mut mix = [[0.0f64; 2]; 2];
    let block = |l: Label| usize::from(l == Label::Periphery);
    for i in 0..g.node_count() {
        for j in g.neighbors(i) {
            mix[block(labels[i])][block(labels[j])] += 1.0;
        }
    }
    let total: f64 = mix.iter().flatten().sum();
    if total == 0.0 {
        return f64::NAN;
    }
    let e = mix.map(|row| row.map(|x| x / total));
    let a = [e[0][0] + e[0][1], e[1][0] + e[1][1]];
    let b = [e[0][0] + e[1][0], e[0][1] + e[1][1]];
    let ab = a[0] * b[0] + a[1] * b[1];
    if (1.0 - ab).abs() < 1e-15 {
        return f64::NAN;
    }
    (e[0][0] + e[1][1] - ab) / (1.0 - ab)
}

/// `mdl_norm = (mdl_max - mdl) / (mdl_max - mdl_min)`, 0.5 on a degenerate range.
pub fn mdl_norm(mdl: f64, mdl_min: f64, mdl_max: f64) -> f64 {
    if mdl_max > mdl_min {
        (mdl_max - mdl) / (mdl_max - mdl_min)
    } else {
        0.5
    }
}

pub fn composite_from_parts(core_density: f64, cp_density: f64, modularity: f64, mdl_norm: f64, w: &CompositeWeights) -> f64 {
    w.core_density * core_density + w.cp_coupling * cp_density + w.modularity * modularity + w.mdl_norm * mdl_norm
}

pub fn composite_score(q: &QualityMetrics, mdl_min: f64, mdl_max: f64, w: &CompositeWeights) -> f64 {
    composite_from_parts(q.core_density, q.cp_density, q.modularity, mdl_norm(q.mdl, mdl_min, mdl_max), w)
}

/// Scores one labeling. The composite uses a neutral `mdl_norm` of 0.5
/// until it is rescored against a candidate set.
pub fn partition_quality(g: &InteractionGraph, labels: &[Label]) -> Result<QualityMetrics, CpError> {
    check_labels(g, labels)?;
    let c = BlockCounts::of(g, labels);
    let (d_cc, d_cp, d_pp) = c.dyads();
    let mut q = QualityMetrics {
        core_density: density(c.e_cc, d_cc),
        periphery_density: density(c.e_pp, d_pp),
        cp_density: density(c.e_cp, d_cp),
        modularity: modularity(g, labels),
        assortativity: assortativity(g, labels),
        mdl: mdl_from_counts(&c),
        composite: 0.0,
    };
    q.composite = composite_from_parts(q.core_density, q.cp_density, q.modularity, 0.5, &CompositeWeights::default());
    Ok(q)
}

/// Core members by descending degree, then weighted degree, then id.
pub fn rank_core_members(g: &InteractionGraph, labels: &[Label]) -> Vec<AgentId> {
    let mut core: Vec<usize> = (0..g.node_count()).filter(|&i| labels[i] == Label::Core).collect();
    core.sort_by(|&a, &b| {
        g.degree(b)
            .cmp(&g.degree(a))
            .then(g.weighted_degree(b).total_cmp(&g.weighted_degree(a)))
            .then(g.nodes()[a].cmp(&g.nodes()[b]))
    });
    core.into_iter().map(|i| g.nodes()[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSample {
    pub chain: usize,
    pub sweep: usize,
    pub window: usize,
    pub labels: Vec<Label>,
    pub core_size: usize,
    pub quality: QualityMetrics,
    /// False when neither orientation satisfies the density ordering.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainResult {
    pub samples: Vec<PartitionSample>,
    pub consensus: Vec<Label>,
    pub consensus_quality: QualityMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSummary {
    pub chain: usize,
    pub window: usize,
    pub mean_core_size: f64,
    pub sd_core_size: f64,
    pub valid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdlNull {
    pub mean: f64,
    pub sd: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorePeripheryFit {
    pub chains: Vec<ChainResult>,
    pub windows: Vec<WindowSummary>,
    /// SD of core size across all valid samples.
    pub core_size_sd: f64,
    /// `(chain, sample index)` of the top composite among valid samples.
    pub best: Option<(usize, usize)>,
    /// Description length of random labelings with the best core size.
    pub mdl_null: Option<MdlNull>,
}

impl CorePeripheryFit {
    pub fn best_sample(&self) -> Option<&PartitionSample> {
        self.best.map(|(c, s)| &self.chains[c].samples[s])
    }

    pub fn valid_samples(&self) -> impl Iterator<Item = &PartitionSample> {
        self.chains.iter().flat_map(|c| c.samples.iter()).filter(|s| s.valid)
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores a labeling, swapping block names if that restores the density
/// ordering.
fn canonical_sample(g: &InteractionGraph, mut labels: Vec<Label>) -> (Vec<Label>, QualityMetrics, bool) {
    let q = partition_quality(g, &labels).expect("chain states keep both blocks");
    if q.ordered() {
        return (labels, q, true);
    }
    let swapped: Vec<Label> = labels.iter().map(|l| l.flipped()).collect();
    let qs = partition_quality(g, &swapped).expect("chain states keep both blocks");
    if qs.ordered() {
        return (swapped, qs, true);
    }
    labels.shrink_to_fit();
    (labels, q, false)
}

fn initial_labels(g: &InteractionGraph, fraction: f64) -> Vec<Label> {
    let n = g.node_count();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by(|&a, &b| g.degree(b).cmp(&g.degree(a)).then(a.cmp(&b)));
    let mut labels = vec![Label::Periphery; n];
    for &i in &by_degree[..k] {
        labels[i] = Label::Core;
    }
    labels
}

fn run_chain(g: &InteractionGraph, params: &CPParams, chain: usize) -> ChainResult {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(chain as u64);
    let n = g.node_count();
    let mut labels = initial_labels(g, params.init_core_fraction);
    let mut counts = BlockCounts::of(g, &labels);
    for _ in 0..params.burnin_per_node * n {
        let i = rng.random_range(0..n);
        update_node(g, &mut labels, &mut counts, i, &mut rng);
    }
    let mut raw = Vec::with_capacity(params.n_gibbs);
    for _ in 0..params.n_gibbs {
        gibbs_sweep(&mut labels, g, &mut rng).expect("chain states keep both blocks");
        raw.push(labels.clone());
    }
    let samples: Vec<PartitionSample> = raw
        .into_par_iter()
        .enumerate()
        .map(|(sweep, labels)| {
            let (labels, quality, valid) = canonical_sample(g, labels);
            PartitionSample {
                chain,
                sweep,
                window: sweep / params.window_size,
                core_size: labels.iter().filter(|&&l| l == Label::Core).count(),
                labels,
                quality,
                valid,
            }
        })
        .collect();

    let tail = &samples[samples.len() - params.consensus_size..];
    let pool: Vec<&PartitionSample> = if tail.iter().any(|s| s.valid) {
        tail.iter().filter(|s| s.valid).collect()
    } else {
        tail.iter().collect()
    };
    let mut consensus: Vec<Label> = (0..n)
        .map(|i| {
            let core_votes = pool.iter().filter(|s| s.labels[i] == Label::Core).count();
            if 2 * core_votes > pool.len() { Label::Core } else { Label::Periphery }
        })
        .collect();
    if !consensus.contains(&Label::Core) || !consensus.contains(&Label::Periphery) {
        consensus = pool.last().map(|s| s.labels.clone()).unwrap_or(consensus);
    }
    let consensus_quality = partition_quality(g, &consensus).expect("consensus keeps both blocks");
    ChainResult { samples, consensus, consensus_quality }
}

/// Random labelings with a fixed core size, as a reference scale for a
/// fitted description length.
pub fn mdl_null_diagnostic<R: Rng + ?Sized>(g: &InteractionGraph, core_size: usize, samples: usize, rng: &mut R) -> MdlNull {
    let n = g.node_count();
    let mut labels = vec![Label::Periphery; n];
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        labels.fill(Label::Periphery);
        for i in rand::seq::index::sample(rng, n, core_size) {
            labels[i] = Label::Core;
        }
        values.push(mdl_from_counts(&BlockCounts::of(g, &labels)));
    }
    let (mean, sd) = mean_sd(&values);
    MdlNull { mean, sd, samples }
}

/// Runs independent chains in parallel and ranks every valid sample by the
/// composite score, with MDL normalized over the valid set.
pub fn fit_core_periphery(g: &InteractionGraph, params: &CPParams) -> Result<CorePeripheryFit, CpError> {
    params.validate()?;
    if g.node_count() < 3 {
        return Err(CpError::TooSmall(g.node_count()));
    }
    if !g.is_connected() {
        return Err(CpError::Disconnected);
    }
    let mut chains: Vec<ChainResult> = (0..params.n_runs).into_par_iter().map(|c| run_chain(g, params, c)).collect();

    let valid_mdl: Vec<f64> = chains.iter().flat_map(|c| &c.samples).filter(|s| s.valid).map(|s| s.quality.mdl).collect();
    let mdl_min = valid_mdl.iter().copied().fold(f64::INFINITY, f64::min);
    let mdl_max = valid_mdl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<(usize, usize, f64)> = None;
    for (ci, chain) in chains.iter_mut().enumerate() {
        for (si, s) in chain.samples.iter_mut().enumerate() {
            s.quality.composite = composite_score(&s.quality, mdl_min, mdl_max, &params.weights);
            if s.valid && best.is_none_or(|(_, _, b)| s.quality.composite > b) {
                best = Some((ci, si, s.quality.composite));
            }
        }
        let q = &mut chain.consensus_quality;
        q.composite = composite_score(q, mdl_min, mdl_max, &params.weights);
    }

    let mut windows = Vec::new();
    for (ci, chain) in chains.iter().enumerate() {
        for w in 0..params.n_windows {
            let sizes: Vec<f64> = chain
                .samples
                .iter()
                .filter(|s| s.window == w && s.valid)
                .map(|s| s.core_size as f64)
                .collect();
            let (mean, sd) = mean_sd(&sizes);
            windows.push(WindowSummary { chain: ci, window: w, mean_core_size: mean, sd_core_size: sd, valid: sizes.len() });
        }
    }
    let sizes: Vec<f64> = chains
        .iter()
        .flat_map(|c| &c.samples)
        .filter(|s| s.valid)
        .map(|s| s.core_size as f64)
        .collect();
    let core_size_sd = mean_sd(&sizes).1;

    let best = best.map(|(c, s, _)| (c, s));
    let mdl_null = best.filter(|_| params.mdl_samples > 0).map(|(c, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(params.n_runs as u64);
        mdl_null_diagnostic(g, chains[c].samples[s].core_size, params.mdl_samples, &mut rng)
    });
    Ok(CorePeripheryFit { chains, windows, core_size_sd, best, mdl_null })
}
