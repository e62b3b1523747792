//! The simulation clock: activations, action menus, dispatch, and end-of-day
//! churn and growth.
//!
//! One iteration is one simulated day of 24 rounds. Round numbers are global
//! hours since the start of the run, so `round = day * 24 + hour`.

use std::time::Duration;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EngagementWeights, GeneratorMode, SimConfig};
use crate::events::{AgentId, EventRecord, ItemId};
use crate::gen::backend::{GenError, GenParams, GenRequest, HttpGenerator, StubGenerator, StubHints, TextGenerator};
use crate::gen::catalog::{sample_link, LinkRecord};
use crate::gen::parse::{extract_mentions, parse_action_choice, parse_post_output, parse_yes_no};
use crate::gen::prompt::{build_prompt, ArticleRef, PersonaSummary, PromptContext, PromptKind, PromptSpec, ThreadLine};
use crate::personas::PersonaSampler;
use crate::platform::{Platform, PlatformConfig, PlatformError};
use crate::topic::Topic;

pub const ROUNDS_PER_DAY: u32 = 24;
/// Probability that the stub chooser declines both offered actions.
pub const STUB_NONE_PROB: f64 = 0.15;
/// Probability that reading a post pulls its topics into the reader's interests.
pub const READ_INTEREST_PROB: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    None,
    Post,
    ShareLink,
    Comment,
    Read,
    Search,
}

impl Action {
    pub const PRIMITIVES: [Action; 5] = [
        Action::Post,
        Action::ShareLink,
        Action::Comment,
        Action::Read,
        Action::Search,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Action::None => "none",
            Action::Post => "post",
            Action::ShareLink => "share_link",
            Action::Comment => "comment",
            Action::Read => "read",
            Action::Search => "search",
        }
    }

    pub fn menu_label(self) -> &'static str {
        match self {
            Action::None => "NONE",
            Action::Post => "POST",
            Action::ShareLink => "SHARE_LINK",
            Action::Comment => "COMMENT",
            Action::Read => "READ",
            Action::Search => "SEARCH",
        }
    }
}

/// `[NONE, a1, a2]` with two distinct primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionMenu {
    options: [Action; 3],
}

impl ActionMenu {
    pub fn new(first: Action, second: Action) -> Option<Self> {
        if first == second || first == Action::None || second == Action::None {
            return None;
        }
        Some(Self { options: [Action::None, first, second] })
    }

    pub fn options(&self) -> [Action; 3] {
        self.options
    }

    pub fn contains(&self, action: Action) -> bool {
        self.options.contains(&action)
    }

    pub fn first(&self) -> Action {
        self.options[1]
    }

    pub fn second(&self) -> Action {
        self.options[2]
    }
}

fn draw_weighted<R: Rng + ?Sized>(rng: &mut R, candidates: &[(Action, f64)]) -> Action {
    let total: f64 = candidates.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(action, w) in candidates {
        if u < w {
            return action;
        }
        u -= w;
    }
    candidates[candidates.len() - 1].0
}

/// Draws two distinct primitives without replacement, each draw proportional
/// to the engagement weights of what remains.
pub fn build_menu<R: Rng + ?Sized>(rng: &mut R, weights: &EngagementWeights) -> ActionMenu {
    let mut pool: Vec<(Action, f64)> = Action::PRIMITIVES.iter().map(|&a| (a, weights.weight(a))).collect();
    let first = draw_weighted(rng, &pool);
    pool.retain(|(a, _)| *a != first);
    let second = draw_weighted(rng, &pool);
    ActionMenu::new(first, second).expect("draws without replacement are distinct")
}

/// Stand-in for the model's choice: `NONE` with probability 0.15, otherwise
/// one of the two primitives in proportion to their weights.
pub fn stub_choose<R: Rng + ?Sized>(menu: &ActionMenu, weights: &EngagementWeights, rng: &mut R) -> Action {
    if rng.random::<f64>() < STUB_NONE_PROB {
        return Action::None;
    }
    draw_weighted(
        rng,
        &[
            (menu.first(), weights.weight(menu.first())),
            (menu.second(), weights.weight(menu.second())),
        ],
    )
}

/// Each member independently with probability `prob`, in id order.
pub fn sample_activations<R: Rng + ?Sized>(members: &[AgentId], prob: f64, rng: &mut R) -> Vec<AgentId> {
    members.iter().copied().filter(|_| rng.random::<f64>() < prob).collect()
}

/// `floor(rate * n)`, tolerant of representation error such as `0.3 * 10`.
pub fn rate_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationChange {
    pub removed: usize,
    pub added: usize,
}

/// End-of-day turnover. Churn removes `floor(churn_rate * I)` of the `I`
/// members with no action today, longest inactivity first (ties uniform);
/// growth adds `floor(growth_rate * N)` fresh agents, `N` counted before churn.
pub fn apply_churn_growth<R: Rng + ?Sized>(
    platform: &mut Platform,
    churn_rate: f64,
    growth_rate: f64,
    sampler: &PersonaSampler,
    rng: &mut R,
) -> Result<PopulationChange, PlatformError> {
    let day = platform.day();
    let day_start = day * ROUNDS_PER_DAY;
    let n_pre = platform.population();
    let mut inactive: Vec<(AgentId, u32)> = platform
        .members()
        .filter(|a| a.last_active_round.is_none_or(|r| r < day_start))
        .map(|a| {
            let reference = a.last_active_round.map_or(a.joined_day, |r| r / ROUNDS_PER_DAY);
            (a.id, day.saturating_sub(reference))
        })
        .collect();
    let removed = rate_count(churn_rate, inactive.len());
    inactive.shuffle(rng);
    // stable sort keeps the shuffled order within equal streaks
    inactive.sort_by(|a, b| b.1.cmp(&a.1));
    for &(id, _) in inactive.iter().take(removed) {
        platform.churn(id)?;
    }
    let added = rate_count(growth_rate, n_pre);
    for _ in 0..added {
        platform.register_agent(sampler.sample(rng))?;
    }
    Ok(PopulationChange { removed, added })
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("a seed is required to run a simulation")]
    MissingSeed,
    #[error("the link catalog is empty")]
    EmptyCatalog,
}

/// What one activation did, for diagnostics and tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivationReport {
    pub mention_reply: Option<ItemId>,
    pub menus: Vec<ActionMenu>,
    pub choices: Vec<Action>,
}

/// A generator failure or unusable output; the action is skipped.
#[derive(Debug)]
struct Skip(String);

impl From<GenError> for Skip {
    fn from(e: GenError) -> Self {
        Skip(e.to_string())
    }
}

pub struct Simulation {
    config: SimConfig,
    platform: Platform,
    generator: Box<dyn TextGenerator>,
    catalog: Vec<LinkRecord>,
    sampler: PersonaSampler,
    rng: ChaCha8Rng,
    params: GenParams,
}

impl Simulation {
    pub fn new(
        config: SimConfig,
        generator: Box<dyn TextGenerator>,
        catalog: Vec<LinkRecord>,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let seed = config.seed.ok_or(SimError::MissingSeed)?;
        if catalog.is_empty() {
            return Err(SimError::EmptyCatalog);
        }
        let platform = Platform::new(PlatformConfig {
            visibility_window: config.visibility_window_rounds,
            ..PlatformConfig::default()
        });
        Ok(Self {
            config,
            platform,
            generator,
            catalog,
            sampler: PersonaSampler::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: GenParams::default(),
        })
    }

    /// Builds the generator named by `config.generator`.
    pub fn with_configured_generator(config: SimConfig, catalog: Vec<LinkRecord>) -> Result<Self, SimError> {
        let seed = config.seed.ok_or(SimError::MissingSeed)?;
        let generator: Box<dyn TextGenerator> = match config.generator.mode {
            GeneratorMode::Stub => Box::new(StubGenerator::new(seed)),
            GeneratorMode::Http => Box::new(HttpGenerator::new(
                config.generator.url.clone().unwrap_or_default(),
                config.generator.model.clone(),
                Duration::from_secs(120),
            )),
        };
        Self::new(config, generator, catalog)
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }

    pub fn platform_mut(&mut self) -> &mut Platform {
        &mut self.platform
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Registers the starting population at day 0.
    pub fn seed_population(&mut self) -> Result<(), SimError> {
        for _ in 0..self.config.starting_agents {
            let persona = self.sampler.sample(&mut self.rng);
            self.platform.register_agent(persona)?;
        }
        Ok(())
    }

    /// Runs all rounds of one day, then churn and growth.
    pub fn run_day(&mut self, day: u32) -> Result<PopulationChange, SimError> {
        for hour in 0..ROUNDS_PER_DAY {
            let round = day * ROUNDS_PER_DAY + hour;
            self.platform.set_clock(day, round)?;
            let members = self.platform.member_ids();
            let prob = self.config.activation_prob(hour);
            for agent in sample_activations(&members, prob, &mut self.rng) {
                self.platform.record_activation(agent)?;
                self.run_activation(agent)?;
            }
        }
        let change = apply_churn_growth(
            &mut self.platform,
            self.config.churn_rate,
            self.config.growth_rate,
            &self.sampler,
            &mut self.rng,
        )?;
        Ok(change)
    }

    pub fn run(mut self) -> Result<Platform, SimError> {
        self.seed_population()?;
        for day in 0..self.config.days {
            self.run_day(day)?;
        }
        Ok(self.platform)
    }

    /// One free mention reply, then exactly `budget` menu-driven turns.
    pub fn run_activation(&mut self, agent: AgentId) -> Result<ActivationReport, SimError> {
        let mut report = ActivationReport::default();
        if let Some(mention) = self.platform.pop_mention(agent) {
            report.mention_reply = self.reply_to_mention(agent, mention)?;
        }
        let budget = self.platform.agent(agent).map_or(0, |a| a.persona.budget);
        for _ in 0..budget {
            let menu = build_menu(&mut self.rng, &self.config.engagement_weights);
            let action = match self.choose(agent, &menu) {
                Ok(a) => a,
                Err(Skip(reason)) => {
                    self.platform.record_degraded(agent, &reason, None)?;
                    Action::None
                }
            };
            report.menus.push(menu);
            report.choices.push(action);
            self.execute_action(agent, action)?;
        }
        Ok(report)
    }

    fn choose(&mut self, agent: AgentId, menu: &ActionMenu) -> Result<Action, Skip> {
        if self.config.generator.mode == GeneratorMode::Stub {
            return Ok(stub_choose(menu, &self.config.engagement_weights, &mut self.rng));
        }
        let options = menu.options().to_vec();
        let hints = StubHints { menu: options.clone(), ..StubHints::default() };
        let text = self.generate(agent, PromptKind::ActionChoice, PromptContext::Menu(options), hints)?;
        Ok(parse_action_choice(&text, &menu.options()))
    }

    /// Dispatches one chosen action through its platform pathway.
    pub fn execute_action(&mut self, agent: AgentId, action: Action) -> Result<(), SimError> {
        let outcome = match action {
            Action::None => Ok(()),
            Action::Post => self.do_post(agent),
            Action::ShareLink => self.do_share_link(agent),
            Action::Comment => self.do_comment(agent),
            Action::Read => {
                let slate = self.slate(agent);
                self.do_read(agent, slate.first().copied())
            }
            Action::Search => self.do_search(agent),
        };
        match outcome {
            Ok(()) => Ok(()),
            Err(ActionError::Skip(Skip(reason))) => {
                self.platform.record_degraded(agent, &reason, None)?;
                Ok(())
            }
            Err(ActionError::Platform(e)) => Err(e.into()),
        }
    }

    fn slate(&self, agent: AgentId) -> Vec<ItemId> {
        self.platform
            .feed_slate(agent, self.platform.round(), self.config.slate_limit)
    }

    fn summary(&self, agent: AgentId) -> PersonaSummary {
        let record = self.platform.agent(agent).expect("scheduler only acts for known agents");
        PersonaSummary::from_persona(&record.persona, &record.interests)
    }

    fn generate(
        &self,
        agent: AgentId,
        kind: PromptKind,
        context: PromptContext,
        mut hints: StubHints,
    ) -> Result<String, Skip> {
        let persona = self.summary(agent);
        hints.toxicity = Some(persona.toxicity);
        let spec = PromptSpec { kind, persona, context };
        let request = GenRequest {
            prompt: build_prompt(&spec),
            kind,
            agent,
            round: self.platform.round(),
            params: self.params,
            hints,
        };
        Ok(self.generator.generate(&request)?)
    }

    fn thread_lines(&self, item: ItemId) -> Vec<ThreadLine> {
        self.platform
            .thread_context(item, self.config.thread_read_depth)
            .into_iter()
            .map(|c| ThreadLine { author: c.author_name, text: c.text })
            .collect()
    }

    fn resolve_mentions(&self, agent: AgentId, text: &str) -> Vec<AgentId> {
        extract_mentions(text)
            .iter()
            .filter_map(|name| self.platform.resolve_name(name))
            .filter(|&id| id != agent)
            .collect()
    }

    fn reply_to_mention(&mut self, agent: AgentId, mention: ItemId) -> Result<Option<ItemId>, SimError> {
        let parent_author = self.platform.author_of(mention).map(|a| self.platform.name_of(a));
        let hints = StubHints {
            topics: self.root_topics(mention),
            parent_author,
            ..StubHints::default()
        };
        let context = PromptContext::Thread(self.thread_lines(mention));
        match self.generate(agent, PromptKind::MentionReply, context, hints) {
            Ok(text) if !text.trim().is_empty() => {
                let mentions = self.resolve_mentions(agent, &text);
                let id = self
                    .platform
                    .submit_mention_reply(agent, mention, text.trim(), &mentions)?;
                Ok(Some(id))
            }
            Ok(_) => {
                self.platform.record_degraded(agent, "empty mention reply", Some(mention))?;
                Ok(None)
            }
            Err(Skip(reason)) => {
                self.platform.record_degraded(agent, &reason, Some(mention))?;
                Ok(None)
            }
        }
    }

    fn root_topics(&self, item: ItemId) -> Vec<Topic> {
        self.platform
            .root_of(item)
            .and_then(|r| self.platform.post(r))
            .map(|p| p.topics.clone())
            .unwrap_or_default()
    }

    fn do_post(&mut self, agent: AgentId) -> Result<(), ActionError> {
        let interests = self.platform.agent(agent).map(|a| a.interests.clone()).unwrap_or_default();
        let topics: Vec<Topic> = interests.choose_multiple(&mut self.rng, 2).copied().collect();
        let hints = StubHints { topics: topics.clone(), ..StubHints::default() };
        let text = self.generate(agent, PromptKind::Post, PromptContext::Topics(topics.clone()), hints)?;
        let post = parse_post_output(&text).map_err(|e| Skip(e.to_string()))?;
        self.platform
            .submit_post(agent, &post.title, &post.body, None, &topics)?;
        Ok(())
    }

    fn do_share_link(&mut self, agent: AgentId) -> Result<(), ActionError> {
        let interests = self.platform.agent(agent).map(|a| a.interests.clone()).unwrap_or_default();
        let link = sample_link(&mut self.rng, &interests, &self.catalog)
            .cloned()
            .ok_or_else(|| Skip("empty catalog".into()))?;
        let hints = StubHints {
            topics: if link.topics.is_empty() { interests } else { link.topics.clone() },
            article_title: Some(link.title.clone()),
            ..StubHints::default()
        };
        let context = PromptContext::Article(ArticleRef { title: link.title.clone(), url: link.url.clone() });
        let text = self.generate(agent, PromptKind::ShareLinkFrame, context, hints)?;
        let post = parse_post_output(&text).map_err(|e| Skip(e.to_string()))?;
        self.platform
            .submit_post(agent, &post.title, &post.body, Some(&link.url), &link.topics)?;
        Ok(())
    }

    /// Picks a slate post uniformly and replies to the newest item in its
    /// thread that the agent did not write.
    fn do_comment(&mut self, agent: AgentId) -> Result<(), ActionError> {
        let slate = self.slate(agent);
        let Some(&post) = slate.choose(&mut self.rng) else {
            self.platform.record_read(agent, None)?;
            return Ok(());
        };
        let thread = self.platform.thread_context(post, usize::MAX);
        let parent = thread
            .iter()
            .rev()
            .find(|item| item.author != agent)
            .map_or(post, |item| item.item);
        let parent_author = self.platform.author_of(parent).map(|a| self.platform.name_of(a));
        let topics = self.root_topics(post);
        let hints = StubHints { topics: topics.clone(), parent_author, ..StubHints::default() };
        let context = PromptContext::Thread(self.thread_lines(parent));
        let text = self.generate(agent, PromptKind::Comment, context, hints)?;
        if text.trim().is_empty() {
            return Err(Skip("empty comment".into()).into());
        }
        let mentions = self.resolve_mentions(agent, &text);
        self.platform.submit_comment(agent, parent, text.trim(), &mentions)?;

        let post_record = self.platform.post(post).expect("slate items exist");
        let (author, post_text) = (post_record.author, post_record.title.clone());
        let follow_ctx = PromptContext::Author { name: self.platform.name_of(author), text: post_text };
        match self.generate(agent, PromptKind::FollowDecision, follow_ctx, StubHints::default()) {
            Ok(answer) if parse_yes_no(&answer) && author != agent => {
                self.platform.follow(agent, author)?;
            }
            Ok(_) => {}
            Err(Skip(reason)) => self.platform.record_degraded(agent, &reason, None)?,
        }
        self.platform.update_interests(agent, &topics)?;
        Ok(())
    }

    fn do_read(&mut self, agent: AgentId, post: Option<ItemId>) -> Result<(), ActionError> {
        self.platform.record_read(agent, post)?;
        if let Some(post) = post {
            if self.rng.random::<f64>() < READ_INTEREST_PROB {
                let topics = self.root_topics(post);
                self.platform.update_interests(agent, &topics)?;
            }
        }
        Ok(())
    }

    fn do_search(&mut self, agent: AgentId) -> Result<(), ActionError> {
        let results = self.platform.search_content(agent, self.config.slate_limit);
        let top = results.first().copied();
        self.platform.record_search(agent, top)?;
        if top.is_some() {
            self.do_read(agent, top)?;
        }
        Ok(())
    }
}

enum ActionError {
    Skip(Skip),
    Platform(PlatformError),
}

impl From<Skip> for ActionError {
    fn from(s: Skip) -> Self {
        ActionError::Skip(s)
    }
}

impl From<PlatformError> for ActionError {
    fn from(e: PlatformError) -> Self {
        ActionError::Platform(e)
    }
}

/// Runs a full simulation and returns its event log.
pub fn run_simulation(
    config: SimConfig,
    generator: Box<dyn TextGenerator>,
    catalog: Vec<LinkRecord>,
) -> Result<Vec<EventRecord>, SimError> {
    Ok(Simulation::new(config, generator, catalog)?.run()?.into_events())
}
