//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use forumsim::analysis::activity::{avg_thread_length, run_summary};
use forumsim::analysis::coreperiphery::{composite_from_parts, fit_core_periphery, CPParams, CompositeWeights, Label};
use forumsim::analysis::network::{build_reply_graph, descriptors, largest_component, InteractionGraph};
use forumsim::analysis::textmetrics::{
    convergence_entropy, enumerate_pairs, extract_chains, KernelParams, PairType, TokenEmbeddings, MAX_LAG,
};
use forumsim::analysis::toxicity::{layer_texts, toxicity_report, Layer, ScorerError, ToxicityReport, ToxicityScorer};
use forumsim::config::{EngagementWeights, SimConfig};
use forumsim::events::{write_events, AgentId, EventKind, EventRecord, ItemId};
use forumsim::gen::catalog::bundled_catalog;
use forumsim::personas::{sample_persona, BudgetDistribution, PersonaSampler};
use forumsim::platform::Platform;
use forumsim::scheduler::{apply_churn_growth, build_menu, Action, Simulation};
use forumsim::topic::Topic;
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::Rng;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

use common::{rng, ActivityOracle, DenseGraph};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zipf_budgets() -> Check {
    let oracle = common::zipf_pmf();
    let z_oracle: f64 = (1..=10).map(|k| (k as f64).powf(-2.5)).sum();
    let dist = BudgetDistribution::default();
    let mut r = rng(20_240_501);
    let n = 1_000_000;
    let start = Instant::now();
    let mut counts = [0usize; 10];
    for _ in 0..n {
        counts[dist.sample(&mut r) as usize - 1] += 1;
    }
    let elapsed = start.elapsed();
    let linf = counts
        .iter()
        .zip(&oracle)
        .map(|(&c, p)| (c as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max);
    let z_err = (dist.normalizer() - z_oracle).abs();
    ensure(
        linf <= 0.005 && elapsed < Duration::from_secs(5) && z_err < 1e-12,
        format!("L_inf {linf:.5} (<= 0.005), Z {:.6} vs oracle {z_oracle:.6}, {elapsed:.2?} (< 5 s)", dist.normalizer()),
    )
}

fn menus() -> Check {
    let w = EngagementWeights::default();
    let arr = [w.post, w.share_link, w.comment, w.read, w.search];
    let oracle = common::read_inclusion_prob(&arr, 3);
    let mut r = rng(7);
    let n = 1_000_000;
    let mut with_read = 0usize;
    let mut invalid = 0usize;
    for _ in 0..n {
        let m = build_menu(&mut r, &w);
        let o = m.options();
        if o[0] != Action::None || o[1] == o[2] || o[1] == Action::None || o[2] == Action::None {
            invalid += 1;
        }
        if m.contains(Action::Read) {
            with_read += 1;
        }
    }
    let p = with_read as f64 / n as f64;
    ensure(
        invalid == 0 && (p - oracle).abs() <= 0.005,
        format!("{invalid} invalid menus, P(read) {p:.4} vs oracle {oracle:.4} (tol 0.005)"),
    )
}

fn churn_growth() -> Check {
    // 65 members at day 5: 42 active today, 3 last seen yesterday, 20 last
    // seen on day 1.
    let mut r = rng(11);
    let mut p = Platform::default();
    let ids: Vec<AgentId> = (0..65).map(|_| p.register_agent(sample_persona(&mut r)).unwrap()).collect();
    let (long_idle, short_idle, active) = (&ids[..20], &ids[20..23], &ids[23..]);
    p.set_clock(1, 24).unwrap();
    for &a in long_idle {
        p.record_activation(a).unwrap();
    }
    p.set_clock(4, 96).unwrap();
    for &a in short_idle {
        p.record_activation(a).unwrap();
    }
    p.set_clock(5, 120).unwrap();
    for &a in active {
        p.record_activation(a).unwrap();
    }
    let change = apply_churn_growth(&mut p, 0.9, 0.3, &PersonaSampler::default(), &mut r).unwrap();
    let removed: BTreeSet<AgentId> =
        ids.iter().copied().filter(|&a| p.agent(a).is_some_and(|x| x.churned_day.is_some())).collect();
    let longest: BTreeSet<AgentId> = long_idle.iter().copied().collect();
    let fixture_ok = change.removed == 20 && change.added == 19 && removed == longest && p.population() == 64;

    // ten equally idle members, one removal per seed
    let mut base = Platform::default();
    let mut r = rng(12);
    let ten: Vec<AgentId> = (0..10).map(|_| base.register_agent(sample_persona(&mut r)).unwrap()).collect();
    base.set_clock(3, 72).unwrap();
    let seeds = 10_000u64;
    let mut hits = [0u64; 10];
    for seed in 0..seeds {
        let mut p = base.clone();
        apply_churn_growth(&mut p, 0.1, 0.0, &PersonaSampler::default(), &mut rng(seed)).unwrap();
        for (i, &a) in ten.iter().enumerate() {
            if p.agent(a).unwrap().churned_day.is_some() {
                hits[i] += 1;
            }
        }
    }
    let expected = seeds as f64 / 10.0;
    let stat: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    let pval = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
    ensure(
        fixture_ok && hits.iter().sum::<u64>() == seeds && pval > 0.01,
        format!(
            "fixture (remove {}, add {}, longest idle removed: {}), chi2 {stat:.2} p={pval:.3} (> 0.01)",
            change.removed,
            change.added,
            removed == longest
        ),
    )
}

fn feed_window() -> Check {
    let mut runner = TestRunner::new(PtConfig { cases: 10_000, failure_persistence: None, ..PtConfig::default() });
    let strategy = (
        1usize..6,
        prop::collection::vec((0usize..6, 0u32..60), 0..40),
        0usize..6,
        0u32..400,
        1usize..15,
    );
    let result = runner.run(&strategy, |(n_agents, posts, who, extra, limit)| {
        let mut r = rng(1);
        let mut p = Platform::default();
        let agents: Vec<AgentId> = (0..n_agents).map(|_| p.register_agent(sample_persona(&mut r)).unwrap()).collect();
        let mut round = 0;
        let mut made = Vec::new();
        for (author, delta) in posts {
            round += delta;
            p.set_clock(round / 24, round).unwrap();
            let a = agents[author % n_agents];
            let id = p.submit_post(a, "t", "b", None, &[Topic::OpenSource]).unwrap();
            made.push((id, a, round));
        }
        let now = round + extra;
        let viewer = agents[who % n_agents];
        let slate = p.feed_slate(viewer, now, limit);
        let mut prev: Option<(u32, ItemId)> = None;
        for id in &slate {
            let post = p.post(*id).unwrap();
            prop_assert!(now - post.round <= 180, "age {} over window", now - post.round);
            prop_assert!(post.author != viewer, "own post in slate");
            if let Some(prev) = prev {
                prop_assert!(prev.0 >= post.round, "slate not newest first");
            }
            prev = Some((post.round, *id));
        }
        let mut eligible: Vec<(u32, ItemId)> =
            made.iter().filter(|(_, a, t)| *a != viewer && now - t <= 180).map(|(id, _, t)| (*t, *id)).collect();
        eligible.sort_by(|x, y| y.cmp(x));
        let want: Vec<ItemId> = eligible.into_iter().take(limit).map(|x| x.1).collect();
        prop_assert_eq!(slate, want);
        Ok(())
    });
    match result {
        Ok(()) => Ok("10000 random logs: ages <= 180, newest first, no own posts".into()),
        Err(e) => Err(format!("{e}")),
    }
}

fn stub_run(seed: u64) -> Vec<EventRecord> {
    let config = SimConfig { seed: Some(seed), ..SimConfig::default() };
    Simulation::with_configured_generator(config, bundled_catalog().records)
        .unwrap()
        .run()
        .unwrap()
        .into_events()
}

fn replay_determinism() -> Check {
    let start = Instant::now();
    let a = stub_run(42);
    let elapsed = start.elapsed();
    let b = stub_run(42);
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    write_events(&mut ba, &a).unwrap();
    write_events(&mut bb, &b).unwrap();
    let identical = ba == bb;
    let replayed = Platform::replay(Default::default(), &a).map(|p| p.events() == a.as_slice()).unwrap_or(false);
    let s42 = run_summary(&a);

    let seeds = 1..21u64;
    let n = (seeds.end - seeds.start) as f64;
    let (mut posts, mut comments) = (0.0, 0.0);
    for s in seeds {
        let sum = run_summary(&stub_run(s));
        posts += sum.posts as f64 / n;
        comments += sum.comments as f64 / n;
    }
    let (o_posts, o_comments, _) = ActivityOracle::default().mean(1000..1400);
    let rel = |x: f64, o: f64| (x - o).abs() / o;
    ensure(
        identical && replayed && elapsed < Duration::from_secs(60) && rel(posts, o_posts) <= 0.25 && rel(comments, o_comments) <= 0.25,
        format!(
            "byte-identical {identical}, replay {replayed}, 30 days in {elapsed:.2?} (< 60 s); mean posts {posts:.1} vs oracle {o_posts:.1} ({:+.1}%), comments {comments:.1} vs {o_comments:.1} ({:+.1}%); seed 42: {} posts, {} comments",
            100.0 * (posts / o_posts - 1.0),
            100.0 * (comments / o_comments - 1.0),
            s42.posts,
            s42.comments
        ),
    )
}

/// Four users, two posts, six replies (one a self-reply).
fn reply_fixture() -> (Vec<EventRecord>, [AgentId; 4]) {
    let mut r = rng(3);
    let mut p = Platform::default();
    let [a, b, c, d] = [0; 4].map(|_| p.register_agent(sample_persona(&mut r)).unwrap());
    let p1 = p.submit_post(a, "one", "", None, &[]).unwrap();
    let p2 = p.submit_post(b, "two", "", None, &[]).unwrap();
    let c1 = p.submit_comment(b, p1, "x", &[]).unwrap();
    p.submit_comment(c, p1, "x", &[]).unwrap();
    let c3 = p.submit_comment(a, c1, "x", &[]).unwrap();
    p.submit_comment(b, p2, "x", &[]).unwrap();
    p.submit_comment(d, p2, "x", &[]).unwrap();
    p.submit_comment(b, c3, "x", &[]).unwrap();
    (p.into_events(), [a, b, c, d])
}

fn descriptors_match(g: &InteractionGraph) -> Result<(), String> {
    let d = descriptors(g);
    let o = DenseGraph::from_graph(g);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9;
    let lcc = o.lcc();
    let checks = [
        ("nodes", d.nodes == o.n),
        ("edges", d.edges == o.edges()),
        ("density", close(d.density, o.density())),
        ("avg_degree", close(d.avg_degree, o.avg_degree())),
        ("weighted_avg_degree", close(d.weighted_avg_degree, o.weighted_avg_degree())),
        ("avg_weighted_clustering", close(d.avg_weighted_clustering, o.avg_clustering())),
        ("lcc_nodes", d.lcc_nodes == lcc),
        ("lcc_share", close(d.lcc_share, lcc as f64 / o.n as f64)),
        ("avg_degree = 2E/N", close(d.avg_degree, 2.0 * d.edges as f64 / d.nodes as f64)),
        (
            "density = 2E/(N(N-1))",
            close(d.density, 2.0 * d.edges as f64 / (d.nodes as f64 * (d.nodes as f64 - 1.0))),
        ),
    ];
    match checks.iter().find(|c| !c.1) {
        Some((name, _)) => Err(format!("{name} mismatch on {} nodes", d.nodes)),
        None => Ok(()),
    }
}

fn reply_graph() -> Check {
    let (events, [a, b, c, d]) = reply_fixture();
    let g = build_reply_graph(&events);
    let mut expected: BTreeMap<(AgentId, AgentId), (u64, f64)> = BTreeMap::new();
    for (u, v, raw, w) in [(a, b, 3, 1.0), (a, c, 1, 1.0 / 3.0), (b, d, 1, 1.0 / 3.0)] {
        expected.insert((u.min(v), u.max(v)), (raw, w));
    }
    let got: BTreeMap<(AgentId, AgentId), (u64, f64)> = g.edges().iter().map(|e| ((e.u, e.v), (e.raw_weight, e.weight))).collect();
    let fixture_ok = events.len() == 12
        && g.node_count() == 4
        && got == expected
        && (0..4).all(|i| (0..4).all(|j| g.raw_weight(i, j) == g.raw_weight(j, i)));
    if !fixture_ok {
        return Err(format!("fixture adjacency {got:?}, expected {expected:?}"));
    }
    descriptors_match(&g)?;
    let mut r = rng(99);
    for k in 0..100 {
        let n = r.random_range(2..40);
        let p = r.random_range(0.02..0.5);
        let g = common::random_graph(&mut r, n, p);
        descriptors_match(&g).map_err(|e| format!("random graph {k}: {e}"))?;
    }
    Ok("12-event fixture exact (raw 3/1/1, normalized 1, 1/3, 1/3); descriptors match brute force on fixture and 100 random graphs".into())
}

fn core_periphery() -> Check {
    let composite = composite_from_parts(0.5, 0.2, 0.3, 0.8, &CompositeWeights::default());
    let full = common::planted_graph(2024, 200, 12, 0.6, 0.25, 0.01);
    let (g, share) = largest_component(&full);
    let planted: BTreeSet<usize> = (0..12u64).filter_map(|i| g.index_of(AgentId(i))).collect();
    let start = Instant::now();
    let fit = fit_core_periphery(&g, &CPParams::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let recoveries: Vec<f64> = fit
        .chains
        .iter()
        .map(|c| planted.iter().filter(|&&i| c.consensus[i] == Label::Core).count() as f64 / planted.len() as f64)
        .collect();
    let good = recoveries.iter().filter(|&&x| x >= 0.9).count();
    let samples: Vec<_> = fit.chains.iter().flat_map(|c| &c.samples).collect();
    let unordered = samples.iter().filter(|s| !s.quality.ordered()).count();
    let recs: Vec<String> = recoveries.iter().map(|x| format!("{x:.2}")).collect();
    ensure(
        good >= 4 && elapsed < Duration::from_secs(60) && unordered == 0 && (composite - 0.43).abs() < 1e-12,
        format!(
            "recovery [{}] ({good}/5 >= 0.90), {elapsed:.2?} (< 60 s), {unordered} of {} samples violate rho_cc >= rho_cp >= rho_pp, composite {composite:.4}; graph {} nodes ({:.1}% of planted)",
            recs.join(", "),
            samples.len(),
            g.node_count(),
            100.0 * share
        ),
    )
}

fn basis(dim: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[k] = 1.0;
    v
}

fn convergence_entropy_checks() -> Check {
    let kernel = KernelParams::default();
    let normal = Normal::new(1.0, 0.3).unwrap();
    let oracle = |m: f64| {
        let p = normal.pdf(1.0 + m);
        -p * p.ln()
    };
    let y = TokenEmbeddings::new(vec![basis(4, 0), basis(4, 1)]).unwrap();
    let matched = TokenEmbeddings::new(vec![basis(4, 0), basis(4, 1), basis(4, 0)]).unwrap();
    let orthogonal = TokenEmbeddings::new(vec![basis(4, 2), basis(4, 3)]).unwrap();
    let hm = convergence_entropy(&matched, &y, &kernel);
    let ho = convergence_entropy(&orthogonal, &y, &kernel);
    let per_m = hm.h / hm.tokens as f64;
    let per_o = ho.h / ho.tokens as f64;
    let closed = (per_m - oracle(1.0)).abs() <= 1e-6 && (per_o - oracle(0.0)).abs() <= 1e-6;

    let grid: Vec<f64> = (5..=10).map(|i| i as f64 / 10.0).collect();
    let monotone = grid.windows(2).all(|w| kernel.contribution(w[1]) < kernel.contribution(w[0]));

    let mut r = rng(500);
    let mut chain_mismatch = None;
    let mut pair_mismatch = 0;
    let mut total_chains = 0;
    for t in 0..500 {
        let n = r.random_range(1..=30);
        let speakers = r.random_range(2..=4);
        let nodes = common::random_tree(&mut r, n, speakers);
        let chains = extract_chains(&nodes);
        let got: Vec<Vec<ItemId>> = chains.iter().map(|c| c.items.clone()).collect();
        let got_set: BTreeSet<Vec<ItemId>> = got.iter().cloned().collect();
        let author: HashMap<ItemId, AgentId> = nodes.iter().map(|n| (n.id, n.author)).collect();
        let speakers_ok = chains.iter().all(|c| c.items.iter().map(|i| author[i]).eq(c.speakers.iter().copied()));
        if got.len() != got_set.len() || got_set != common::brute_force_chains(&nodes) || !speakers_ok {
            chain_mismatch.get_or_insert(t);
        }
        total_chains += chains.len();
        for c in &chains {
            let l = c.len();
            let pairs = enumerate_pairs(l, MAX_LAG);
            for lag in 1..=MAX_LAG {
                let want = l.saturating_sub(lag);
                let have = pairs.iter().filter(|p| p.lag == lag).count();
                let typed = pairs
                    .iter()
                    .filter(|p| p.lag == lag)
                    .all(|p| p.j == p.i + lag && p.pair_type == if lag % 2 == 1 { PairType::Interpersonal } else { PairType::Intrapersonal });
                if have != want || !typed {
                    pair_mismatch += 1;
                }
            }
        }
    }
    ensure(
        closed && monotone && chain_mismatch.is_none() && pair_mismatch == 0,
        format!(
            "matched {per_m:.8} vs Normal-pdf {:.8}, orthogonal {per_o:.8} vs {:.8} (tol 1e-6); monotone on 0.5..1.0: {monotone}; chains vs brute force on 500 trees ({total_chains} chains): {}; per-lag pair count mismatches {pair_mismatch}",
            oracle(1.0),
            oracle(0.0),
            chain_mismatch.map_or("exact".to_string(), |t| format!("first mismatch tree {t}"))
        ),
    )
}

/// Reads the score from the last word of each text.
struct TrailingScore;

impl ToxicityScorer for TrailingScore {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        texts
            .iter()
            .map(|t| t.split_whitespace().last().and_then(|w| w.parse().ok()).ok_or_else(|| ScorerError(t.clone())))
            .collect()
    }
}

fn toxicity() -> Check {
    let mut r = rng(5);
    let mut p = Platform::default();
    let a = p.register_agent(sample_persona(&mut r)).unwrap();
    let b = p.register_agent(sample_persona(&mut r)).unwrap();
    let mut roots = Vec::new();
    for s in ["0.125", "0.25", "0.5", "0.875"] {
        roots.push(p.submit_post(a, "headline", &format!("see https://example.com {s}"), None, &[]).unwrap());
    }
    for s in ["0.0", "0.375", "0.625"] {
        p.submit_comment(b, roots[0], s, &[]).unwrap();
    }
    let (posts, comments) = layer_texts(p.events());
    let reports = toxicity_report(&posts, &comments, &TrailingScore);
    let want = [
        (Layer::Posts, 1.75 / 4.0, 3.0 / 4.0, 2.0 / 4.0, 4),
        (Layer::Comments, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 3),
        (Layer::All, 2.75 / 7.0, 5.0 / 7.0, 3.0 / 7.0, 7),
    ];
    let fixture_ok = reports.len() == 3
        && reports.iter().zip(want).all(|(rep, (layer, mean, s25, s50, n))| {
            rep.layer == layer && rep.mean == mean && rep.share_above_025 == s25 && rep.share_above_050 == s50 && rep.n == n && !rep.partial
        });

    let mut r = rng(6);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..60);
        let scores: Vec<f64> = (0..n)
            .map(|_| if r.random_bool(0.2) { [0.25, 0.5][r.random_range(0..2)] } else { r.random::<f64>() })
            .collect();
        let rep = ToxicityReport::from_scores(Layer::All, &scores);
        if rep.share_above_050 > rep.share_above_025 || rep.share_above_025 > 1.0 || rep.share_above_050 < 0.0 {
            violations += 1;
        }
    }
    ensure(
        fixture_ok && violations == 0,
        format!("fixture means/shares exact: {fixture_ok}; share monotonicity violations on 1000 random sets: {violations}"),
    )
}

fn thread_length() -> Check {
    let mut events = Vec::new();
    let mut seq = 1;
    for i in 0..754u64 {
        let mut e = EventRecord::new(seq, 0, 0, EventKind::Post, AgentId(i));
        e.post_id = Some(ItemId(i));
        events.push(e);
        seq += 1;
    }
    for i in 0..802u64 {
        let mut e = EventRecord::new(seq, 0, 0, EventKind::Comment, AgentId(i % 754));
        e.comment_id = Some(ItemId(1000 + i));
        e.parent_id = Some(ItemId(i % 754));
        events.push(e);
        seq += 1;
    }
    let s = run_summary(&events);
    let direct = avg_thread_length(754, 802).unwrap_or(f64::NAN);
    ensure(
        s.posts == 754 && s.comments == 802 && (s.avg_thread_length - 2.06).abs() <= 0.005 && (direct - 2.06).abs() <= 0.005,
        format!("avg thread length {:.4} (2.06 +/- 0.005)", s.avg_thread_length),
    )
}

fn main() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("zipf budgets", zipf_budgets),
        ("action menus", menus),
        ("churn and growth", churn_growth),
        ("feed window", feed_window),
        ("replay determinism", replay_determinism),
        ("reply graph", reply_graph),
        ("core-periphery", core_periphery),
        ("convergence entropy", convergence_entropy_checks),
        ("toxicity report", toxicity),
        ("thread length", thread_length),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{:.2?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
