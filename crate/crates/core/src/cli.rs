//! The `forumsim` command line: `run`, `analyze`, and `report`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 missing
//! artifact.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::activity::{daily_activity, posts_per_user, run_summary};
use crate::analysis::coreperiphery::{fit_core_periphery, rank_core_members, CPParams, CorePeripheryFit};
use crate::analysis::network::{build_reply_graph, degree_histogram, descriptors, largest_component, InteractionGraph};
use crate::analysis::textmetrics::{
    entropy_by_lag, extract_chains, item_texts, nearest_neighbor_similarity, reply_nodes, score_chains, EmbeddingFile,
    KernelParams, TokenEmbeddings, NN_THRESHOLDS,
};
use crate::analysis::toxicity::{layer_texts, toxicity_report, ToxicityScorer};
use crate::config::SimConfig;
use crate::events::{read_events, write_events, EventKind, EventRecord, ItemId};
use crate::gen::catalog::{bundled_catalog, load_link_catalog};
use crate::platform::{Platform, PlatformConfig};
use crate::scheduler::Simulation;
use crate::services::{endpoint, EmbedClient, HttpToxicityScorer, SERVICES_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MISSING: i32 = 4;

pub const REFERENCE_TARGETS: &str = include_str!("../data/reference_targets.toml");
const SERVICE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Parser)]
#[command(name = "forumsim", version, about = "Persona-driven forum simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write its event log.
    Run(RunArgs),
    /// Compute activity, network, toxicity, and text metrics from an event log.
    Analyze(AnalyzeArgs),
    /// Consolidate an analysis directory into one report.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, env = "SIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, env = "SIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed token and sentence embeddings.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub tox_endpoint: Option<String>,
    #[arg(long)]
    pub embed_endpoint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub analysis: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("missing artifacts: {}", .0.join(", "))]
    Missing(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Missing(_) => EXIT_MISSING,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses arguments and runs a command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a CSV that has a header even when there are no rows.
fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    seed: u64,
    catalog: String,
    catalog_records: usize,
    events: usize,
    config: &'a SimConfig,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => SimConfig::load(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => SimConfig::default(),
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let seed = config
        .seed
        .ok_or_else(|| CliError::Config("a seed is required (--seed, SIM_SEED, or seed in the config)".into()))?;
    let (catalog, catalog_name) = match &config.catalog_path {
        Some(path) => (
            load_link_catalog(path).map_err(|e| CliError::Config(format!("catalog {}: {e}", path.display())))?,
            path.display().to_string(),
        ),
        None => (bundled_catalog(), "bundled".to_string()),
    };
    let sim = Simulation::with_configured_generator(config.clone(), catalog.records.clone())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let platform = sim.run().map_err(|e| CliError::Data(e.to_string()))?;

    create_dir(&args.out)?;
    let events_path = args.out.join("events.jsonl");
    let file = File::create(&events_path).map_err(|e| io_err(&events_path, e))?;
    write_events(BufWriter::new(file), platform.events()).map_err(|e| io_err(&events_path, e))?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        catalog: catalog_name,
        catalog_records: catalog.records.len(),
        events: platform.events().len(),
        config: &config,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&args.out.join("manifest.json"), format!("{json}\n").as_bytes())?;
    write_file(&args.out.join("summary.txt"), run_text_summary(&platform).as_bytes())?;
    Ok(())
}

fn run_text_summary(platform: &Platform) -> String {
    let s = run_summary(platform.events());
    let joined = platform.events().iter().filter(|e| e.kind == EventKind::Join).count();
    let degraded = platform.events().iter().filter(|e| e.kind == EventKind::Degraded).count();
    format!(
        "days: {}\nevents: {}\nagents joined: {joined}\nfinal population: {}\nposts: {}\ncomments: {}\n\
         unique authors: {}\navg thread length: {:.3}\ndegraded actions: {degraded}\n",
        platform.events().last().map_or(0, |e| e.day + 1),
        platform.events().len(),
        platform.population(),
        s.posts,
        s.comments,
        s.unique_users,
        s.avg_thread_length,
    )
}

/// Reads and replays a log, so semantic corruption is caught as well as
/// malformed lines.
pub fn load_event_log(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    let file = File::open(path).map_err(|_| CliError::Missing(vec![path.display().to_string()]))?;
    let events = read_events(BufReader::new(file)).map_err(|e| {
        let seq = e.expected_seq().map_or(String::new(), |s| format!(" (seq {s})"));
        CliError::Data(format!("{}{seq}: {e}", path.display()))
    })?;
    Platform::replay(PlatformConfig::default(), &events)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(events)
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let events = load_event_log(&args.events)?;
    let embedding_file = match &args.embeddings {
        Some(path) => {
            let f = File::open(path).map_err(|_| CliError::Missing(vec![path.display().to_string()]))?;
            Some(EmbeddingFile::parse(BufReader::new(f)).map_err(|e| io_err(path, e))?)
        }
        None => None,
    };
    let out = &args.out;
    create_dir(out)?;

    write_csv(&out.join("daily.csv"), &daily_activity(&events))?;
    let s = run_summary(&events);
    write_table(
        &out.join("summary.csv"),
        &["posts", "comments", "unique_users", "avg_thread_length", "thread_length_defined", "comments_per_post"],
        &[vec![
            s.posts.to_string(),
            s.comments.to_string(),
            s.unique_users.to_string(),
            fmt_f(s.avg_thread_length),
            s.thread_length_defined.to_string(),
            fmt_f(s.comments_per_post),
        ]],
    )?;
    let ppu = posts_per_user(&events);
    let rows: Vec<Vec<String>> = ppu
        .counts
        .iter()
        .map(|(a, &c)| vec![a.0.to_string(), c.to_string(), fmt_f((c as f64).ln_1p())])
        .collect();
    write_table(&out.join("posts_per_user.csv"), &["agent", "posts", "log_posts_plus_one"], &rows)?;

    let graph = build_reply_graph(&events);
    let mut edges = String::new();
    for e in graph.edges() {
        edges.push_str(&format!("{}\t{}\t{}\t{}\n", e.u.0, e.v.0, e.raw_weight, e.weight));
    }
    write_file(&out.join("graph.edges"), edges.as_bytes())?;
    let hist: Vec<Vec<String>> = degree_histogram(&graph).iter().map(|(d, c)| vec![d.to_string(), c.to_string()]).collect();
    write_table(&out.join("degree_histogram.csv"), &["degree", "count"], &hist)?;
    write_csv(&out.join("descriptors.csv"), &[descriptors(&graph)])?;
    write_core_periphery(out, &graph)?;

    analyze_toxicity(args, out, &events)?;
    analyze_text(args, out, &events, embedding_file.as_ref())?;
    write_file(&out.join("reference_targets.toml"), REFERENCE_TARGETS.as_bytes())?;
    Ok(())
}

const CP_HEADER: &[&str] = &[
    "kind", "chain", "window", "sweep", "core_size", "valid", "core_density", "periphery_density", "cp_density",
    "modularity", "assortativity", "mdl", "composite",
];

fn write_core_periphery(out: &Path, graph: &InteractionGraph) -> Result<(), CliError> {
    let (lcc, _) = largest_component(graph);
    let fit = match fit_core_periphery(&lcc, &CPParams::default()) {
        Ok(fit) => Some(fit),
        Err(e) => {
            eprintln!("notice: core-periphery skipped: {e}");
            None
        }
    };
    let mut rows = Vec::new();
    let mut partition = String::new();
    let mut members = Vec::new();
    if let Some(fit) = &fit {
        rows = cp_rows(fit);
        if let Some(best) = fit.best_sample() {
            for (i, label) in best.labels.iter().enumerate() {
                partition.push_str(&format!("{}\t{}\n", lcc.nodes()[i].0, label.key()));
            }
            for (rank, agent) in rank_core_members(&lcc, &best.labels).iter().enumerate() {
                let i = lcc.index_of(*agent).expect("ranked nodes belong to the component");
                members.push(vec![
                    (rank + 1).to_string(),
                    agent.0.to_string(),
                    lcc.degree(i).to_string(),
                    fmt_f(lcc.weighted_degree(i)),
                ]);
            }
        }
    }
    write_table(&out.join("coreperiphery.csv"), CP_HEADER, &rows)?;
    write_file(&out.join("partitions.txt"), partition.as_bytes())?;
    write_table(&out.join("core_members.csv"), &["rank", "agent", "degree", "weighted_degree"], &members)
}

fn cp_rows(fit: &CorePeripheryFit) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (c, chain) in fit.chains.iter().enumerate() {
        for s in &chain.samples {
            let q = &s.quality;
            rows.push(vec![
                "sample".into(),
                c.to_string(),
                s.window.to_string(),
                s.sweep.to_string(),
                s.core_size.to_string(),
                s.valid.to_string(),
                fmt_f(q.core_density),
                fmt_f(q.periphery_density),
                fmt_f(q.cp_density),
                fmt_f(q.modularity),
                fmt_f(q.assortativity),
                fmt_f(q.mdl),
                fmt_f(q.composite),
            ]);
        }
        let q = &chain.consensus_quality;
        let core = chain.consensus.iter().filter(|l| **l == crate::analysis::coreperiphery::Label::Core).count();
        rows.push(vec![
            "consensus".into(),
            c.to_string(),
            String::new(),
            String::new(),
            core.to_string(),
            q.ordered().to_string(),
            fmt_f(q.core_density),
            fmt_f(q.periphery_density),
            fmt_f(q.cp_density),
            fmt_f(q.modularity),
            fmt_f(q.assortativity),
            fmt_f(q.mdl),
            fmt_f(q.composite),
        ]);
    }
    rows
}

fn services_base() -> Option<String> {
    std::env::var(SERVICES_ENV).ok().filter(|s| !s.trim().is_empty())
}

fn analyze_toxicity(args: &AnalyzeArgs, out: &Path, events: &[EventRecord]) -> Result<(), CliError> {
    let url = args.tox_endpoint.clone().or_else(|| services_base().map(|b| endpoint(&b, "toxicity")));
    let Some(url) = url else {
        eprintln!("notice: toxicity skipped (no scorer endpoint)");
        return Ok(());
    };
    let scorer = HttpToxicityScorer::new(url, SERVICE_TIMEOUT);
    write_toxicity(out, events, &scorer)
}

pub fn write_toxicity(out: &Path, events: &[EventRecord], scorer: &dyn ToxicityScorer) -> Result<(), CliError> {
    let (posts, comments) = layer_texts(events);
    let reports = toxicity_report(&posts, &comments, scorer);
    if reports.iter().any(|r| r.partial) {
        eprintln!("notice: toxicity scorer failed; report is partial");
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.layer.key().to_string(),
                fmt_f(r.mean),
                fmt_f(r.share_above_025),
                fmt_f(r.share_above_050),
                r.n.to_string(),
                r.partial.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("toxicity.csv"),
        &["layer", "mean", "share_above_025", "share_above_050", "n", "partial"],
        &rows,
    )
}

fn analyze_text(
    args: &AnalyzeArgs,
    out: &Path,
    events: &[EventRecord],
    file: Option<&EmbeddingFile>,
) -> Result<(), CliError> {
    let chains = extract_chains(&reply_nodes(events));
    let texts = item_texts(events);
    let embed_url = args.embed_endpoint.clone().or_else(|| services_base().map(|b| endpoint(&b, "embed")));
    let client = embed_url.map(|u| EmbedClient::new(u, SERVICE_TIMEOUT));

    let mut tokens: HashMap<ItemId, TokenEmbeddings> = HashMap::new();
    if let Some(f) = file {
        tokens = f.token_embeddings().map_err(|e| CliError::Data(format!("embeddings: {e}")))?;
    } else if let Some(client) = &client {
        let mut ids: Vec<ItemId> = chains.iter().flat_map(|c| c.items.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        let batch: Vec<String> = ids.iter().map(|i| texts.get(i).cloned().unwrap_or_default()).collect();
        match client.token_embeddings(&batch) {
            Ok(m) => tokens = ids.into_iter().zip(m).collect(),
            Err(e) => eprintln!("notice: token embeddings unavailable: {e}"),
        }
    }
    if tokens.is_empty() {
        eprintln!("notice: entropy skipped (no token embeddings)");
    } else {
        let scored = score_chains(&chains, &tokens, &KernelParams::default());
        let rows: Vec<Vec<String>> = scored
            .iter()
            .map(|p| {
                vec![
                    p.chain.to_string(),
                    p.pair.i.to_string(),
                    p.pair.j.to_string(),
                    p.pair.lag.to_string(),
                    p.pair.pair_type.key().to_string(),
                    fmt_f(p.h),
                ]
            })
            .collect();
        write_table(&out.join("entropy.csv"), &["chain_id", "i", "j", "lag", "pair_type", "H"], &rows)?;
        let summary = entropy_by_lag(&scored);
        let mut rows = vec![summary_row("overall", &summary.overall)];
        for (t, s) in &summary.by_type {
            rows.push(summary_row(t.key(), s));
        }
        for (lag, s) in &summary.by_lag {
            rows.push(summary_row(&format!("lag_{lag}"), s));
        }
        write_table(&out.join("entropy_summary.csv"), &["group", "n", "mean", "median"], &rows)?;
    }

    let Some(f) = file else {
        eprintln!("notice: nearest-neighbor similarity skipped (no sentence vectors)");
        return Ok(());
    };
    let post_ids: std::collections::HashSet<ItemId> = events.iter().filter_map(|e| (e.kind == EventKind::Post).then_some(e.post_id).flatten()).collect();
    let mut queries: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for (id, rows) in &f.entries {
        let Some(n) = id.strip_prefix("sent/").and_then(|n| n.parse::<u64>().ok()) else {
            continue;
        };
        let set = if post_ids.contains(&ItemId(n)) { "posts" } else { "comments" };
        if let Some(v) = rows.first() {
            queries.entry(set).or_default().push(v.clone());
        }
    }
    let mut rows = Vec::new();
    for set in ["posts", "comments"] {
        let refs = f.vectors_with_prefix(&format!("ref/{}/", &set[..set.len() - 1]));
        let Some(q) = queries.get(set) else { continue };
        if refs.is_empty() {
            continue;
        }
        let s = nearest_neighbor_similarity(q, &refs, NN_THRESHOLDS);
        rows.push(vec![
            set.to_string(),
            s.n.to_string(),
            fmt_f(s.mean),
            fmt_f(s.median),
            fmt_f(s.share_above_060),
            fmt_f(s.share_above_080),
        ]);
    }
    if rows.is_empty() {
        eprintln!("notice: nearest-neighbor similarity skipped (no query/reference pairs)");
        return Ok(());
    }
    write_table(
        &out.join("nn_similarity.csv"),
        &["set", "n", "mean", "median", "share_above_060", "share_above_080"],
        &rows,
    )
}

fn summary_row(group: &str, s: &crate::analysis::textmetrics::Summary) -> Vec<String> {
    vec![group.to_string(), s.n.to_string(), fmt_f(s.mean), fmt_f(s.median)]
}

/// One consolidated report row. Comparison rows carry the reference value
/// and its expected range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub section: String,
    pub metric: String,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub range_low: Option<f64>,
    pub range_high: Option<f64>,
    pub within_range: Option<bool>,
}

impl ReportRow {
    fn metric(section: &str, metric: &str, value: f64) -> Self {
        Self {
            section: section.into(),
            metric: metric.into(),
            value: Some(value),
            reference: None,
            range_low: None,
            range_high: None,
            within_range: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceTarget {
    pub metric: String,
    pub reference: f64,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceTargets {
    #[serde(rename = "target", default)]
    pub targets: Vec<ReferenceTarget>,
}

type Table = Vec<HashMap<String, String>>;

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = r.headers().map_err(|e| io_err(path, e))?.clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        out.push(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(out)
}

fn num(row: &HashMap<String, String>, key: &str) -> Option<f64> {
    row.get(key).and_then(|v| v.parse().ok())
}

fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub const REQUIRED_ANALYSIS_FILES: &[&str] = &["daily.csv", "summary.csv", "descriptors.csv", "coreperiphery.csv"];

/// Collects the metrics of an analysis directory, followed by the reference
/// comparison when a targets file is present.
pub fn build_report(dir: &Path) -> Result<Vec<ReportRow>, CliError> {
    let missing: Vec<String> = REQUIRED_ANALYSIS_FILES
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| dir.join(f).display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }
    let mut rows = Vec::new();
    let summary = read_table(&dir.join("summary.csv"))?;
    if let Some(s) = summary.first() {
        for key in ["posts", "comments", "unique_users", "avg_thread_length", "comments_per_post"] {
            if let Some(v) = num(s, key) {
                rows.push(ReportRow::metric("summary", key, v));
            }
        }
    }
    let daily = read_table(&dir.join("daily.csv"))?;
    let col = |k: &str| daily.iter().filter_map(|r| num(r, k)).collect::<Vec<f64>>();
    rows.push(ReportRow::metric("daily", "days", daily.len() as f64));
    rows.push(ReportRow::metric("daily", "mean_unique_active_users", mean_of(&col("unique_active_users"))));
    rows.push(ReportRow::metric("daily", "mean_interactions_per_active_user", mean_of(&col("interactions_per_active_user"))));
    let desc = read_table(&dir.join("descriptors.csv"))?;
    if let Some(d) = desc.first() {
        for key in [
            "nodes", "edges", "density", "avg_degree", "weighted_avg_degree", "avg_weighted_clustering", "lcc_nodes", "lcc_share",
        ] {
            if let Some(v) = num(d, key) {
                rows.push(ReportRow::metric("network", key, v));
            }
        }
    }
    let cp = read_table(&dir.join("coreperiphery.csv"))?;
    let valid: Vec<&HashMap<String, String>> = cp
        .iter()
        .filter(|r| r.get("kind").map(String::as_str) == Some("sample") && r.get("valid").map(String::as_str) == Some("true"))
        .collect();
    if let Some(best) = valid
        .iter()
        .max_by(|a, b| num(a, "composite").unwrap_or(f64::MIN).total_cmp(&num(b, "composite").unwrap_or(f64::MIN)))
    {
        for key in ["core_size", "core_density", "cp_density", "periphery_density", "modularity", "composite"] {
            if let Some(v) = num(best, key) {
                rows.push(ReportRow::metric("coreperiphery", &format!("best_{key}"), v));
            }
        }
        let sizes: Vec<f64> = valid.iter().filter_map(|r| num(r, "core_size")).collect();
        let m = mean_of(&sizes);
        let sd = (sizes.iter().map(|x| (x - m).powi(2)).sum::<f64>() / sizes.len() as f64).sqrt();
        rows.push(ReportRow::metric("coreperiphery", "core_size_sd", sd));
    }
    if dir.join("toxicity.csv").is_file() {
        for r in read_table(&dir.join("toxicity.csv"))? {
            let layer = r.get("layer").cloned().unwrap_or_default();
            for key in ["mean", "share_above_025", "share_above_050"] {
                if let Some(v) = num(&r, key) {
                    rows.push(ReportRow::metric("toxicity", &format!("{layer}_{key}"), v));
                }
            }
        }
    }
    if dir.join("entropy_summary.csv").is_file() {
        for r in read_table(&dir.join("entropy_summary.csv"))? {
            let group = r.get("group").cloned().unwrap_or_default();
            for key in ["n", "mean", "median"] {
                if let Some(v) = num(&r, key) {
                    rows.push(ReportRow::metric("entropy", &format!("{group}_{key}"), v));
                }
            }
        }
    }
    if dir.join("nn_similarity.csv").is_file() {
        for r in read_table(&dir.join("nn_similarity.csv"))? {
            let set = r.get("set").cloned().unwrap_or_default();
            for key in ["mean", "median", "share_above_060", "share_above_080"] {
                if let Some(v) = num(&r, key) {
                    rows.push(ReportRow::metric("nn_similarity", &format!("{set}_{key}"), v));
                }
            }
        }
    }

    let targets_path = dir.join("reference_targets.toml");
    if targets_path.is_file() {
        let text = fs::read_to_string(&targets_path).map_err(|e| io_err(&targets_path, e))?;
        let targets: ReferenceTargets = toml::from_str(&text).map_err(|e| io_err(&targets_path, e.message()))?;
        let values: HashMap<String, f64> = rows
            .iter()
            .filter_map(|r| r.value.map(|v| (format!("{}.{}", r.section, r.metric), v)))
            .collect();
        for t in targets.targets {
            let value = values.get(&t.metric).copied();
            rows.push(ReportRow {
                section: "comparison".into(),
                metric: t.metric,
                value,
                reference: Some(t.reference),
                range_low: Some(t.low),
                range_high: Some(t.high),
                within_range: value.map(|v| (t.low..=t.high).contains(&v)),
            });
        }
    }
    Ok(rows)
}

pub fn render_report(rows: &[ReportRow], format: Format) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(rows).expect("report serializes")),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
    }
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let rows = build_report(&args.analysis)?;
    let (name, text) = match args.format {
        Format::Csv => ("report.csv", render_report(&rows, Format::Csv)),
        Format::Json => ("report.json", render_report(&rows, Format::Json)),
    };
    write_file(&args.analysis.join(name), text.as_bytes())?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
    Ok(())
}
