//! Authoritative platform state.
//!
//! Every mutation is expressed as an [`EventRecord`], applied, and appended to
//! the log, so replaying a log through [`Platform::replay`] rebuilds the exact
//! same state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::events::{AgentId, EventKind, EventRecord, ItemId};
use crate::personas::{Persona, PersonaError};
use crate::topic::Topic;

pub const DEFAULT_VISIBILITY_WINDOW: u32 = 180;
pub const DEFAULT_INTEREST_CAP: usize = 10;
pub const DEFAULT_THREAD_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlatformConfig {
    /// Maximum post age, in rounds, that still appears in feed slates.
    pub visibility_window: u32,
    pub interest_cap: usize,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            visibility_window: DEFAULT_VISIBILITY_WINDOW,
            interest_cap: DEFAULT_INTEREST_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRecord {
    pub id: AgentId,
    pub persona: Persona,
    /// Insertion ordered; the front is the oldest interest.
    pub interests: Vec<Topic>,
    pub joined_day: u32,
    pub last_active_round: Option<u32>,
    pub pending_mentions: Vec<ItemId>,
    pub churned_day: Option<u32>,
}

impl AgentRecord {
    pub fn is_active_member(&self) -> bool {
        self.churned_day.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    Text,
    Link,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostRecord {
    pub id: ItemId,
    pub author: AgentId,
    pub round: u32,
    pub title: String,
    pub body: String,
    pub url: Option<String>,
    pub topics: Vec<Topic>,
    pub kind: PostKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentRecord {
    pub id: ItemId,
    pub author: AgentId,
    pub parent: ItemId,
    pub root: ItemId,
    pub round: u32,
    pub body: String,
    pub mentions: Vec<AgentId>,
}

/// One entry of a thread as passed to a generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextItem {
    pub item: ItemId,
    pub author: AgentId,
    pub author_name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("unknown agent {0} (scheduler bug)")]
    UnknownAgent(AgentId),
    #[error("agent {0} has churned and cannot act")]
    ChurnedAgent(AgentId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("post title must not be empty")]
    EmptyTitle,
    #[error("agent {0} cannot follow itself")]
    SelfFollow(AgentId),
    #[error("invalid persona: {0}")]
    Persona(#[from] PersonaError),
    #[error("clock cannot move backwards from ({day}, {round})")]
    ClockBackwards { day: u32, round: u32 },
    #[error("event {seq}: {message}")]
    Replay { seq: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Clock {
    day: u32,
    round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Platform {
    config: PlatformConfig,
    clock: Clock,
    agents: BTreeMap<AgentId, AgentRecord>,
    names: BTreeMap<String, AgentId>,
    posts: BTreeMap<ItemId, PostRecord>,
    comments: BTreeMap<ItemId, CommentRecord>,
    /// Root post to its comments, in creation order.
    threads: BTreeMap<ItemId, Vec<ItemId>>,
    follows: BTreeSet<(AgentId, AgentId)>,
    next_agent: u64,
    next_item: u64,
    log: Vec<EventRecord>,
}

impl Default for Platform {
    fn default() -> Self {
        Self::new(PlatformConfig::default())
    }
}

impl Platform {
    pub fn new(config: PlatformConfig) -> Self {
        Self {
            config,
            clock: Clock::default(),
            agents: BTreeMap::new(),
            names: BTreeMap::new(),
            posts: BTreeMap::new(),
            comments: BTreeMap::new(),
            threads: BTreeMap::new(),
            follows: BTreeSet::new(),
            next_agent: 0,
            next_item: 0,
            log: Vec::new(),
        }
    }

    /// Rebuilds state by applying every event in order.
    pub fn replay(config: PlatformConfig, events: &[EventRecord]) -> Result<Self, PlatformError> {
        let mut platform = Self::new(config);
        for event in events {
            if let Some(last) = platform.log.last() {
                if event.seq <= last.seq {
                    return Err(PlatformError::Replay {
                        seq: event.seq,
                        message: "sequence numbers must increase".into(),
                    });
                }
            }
            platform.clock = Clock { day: event.day, round: event.round };
            platform.apply(event)?;
            platform.log.push(event.clone());
        }
        Ok(platform)
    }

    pub fn config(&self) -> PlatformConfig {
        self.config
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn into_events(self) -> Vec<EventRecord> {
        self.log
    }

    pub fn day(&self) -> u32 {
        self.clock.day
    }

    pub fn round(&self) -> u32 {
        self.clock.round
    }

    pub fn set_clock(&mut self, day: u32, round: u32) -> Result<(), PlatformError> {
        if (day, round) < (self.clock.day, self.clock.round) {
            return Err(PlatformError::ClockBackwards {
                day: self.clock.day,
                round: self.clock.round,
            });
        }
        self.clock = Clock { day, round };
        Ok(())
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentRecord> {
        self.agents.get(&id)
    }

    /// Agents that have joined and not churned, ascending by id.
    pub fn members(&self) -> impl Iterator<Item = &AgentRecord> {
        self.agents.values().filter(|a| a.is_active_member())
    }

    pub fn member_ids(&self) -> Vec<AgentId> {
        self.members().map(|a| a.id).collect()
    }

    pub fn population(&self) -> usize {
        self.members().count()
    }

    pub fn post(&self, id: ItemId) -> Option<&PostRecord> {
        self.posts.get(&id)
    }

    pub fn comment(&self, id: ItemId) -> Option<&CommentRecord> {
        self.comments.get(&id)
    }

    pub fn posts(&self) -> impl Iterator<Item = &PostRecord> {
        self.posts.values()
    }

    pub fn comments(&self) -> impl Iterator<Item = &CommentRecord> {
        self.comments.values()
    }

    pub fn follows(&self, follower: AgentId, followee: AgentId) -> bool {
        self.follows.contains(&(follower, followee))
    }

    pub fn follow_edges(&self) -> impl Iterator<Item = &(AgentId, AgentId)> {
        self.follows.iter()
    }

    /// The author of a post or comment.
    pub fn author_of(&self, item: ItemId) -> Option<AgentId> {
        self.posts
            .get(&item)
            .map(|p| p.author)
            .or_else(|| self.comments.get(&item).map(|c| c.author))
    }

    /// The post an item belongs to (a post is its own root).
    pub fn root_of(&self, item: ItemId) -> Option<ItemId> {
        if self.posts.contains_key(&item) {
            Some(item)
        } else {
            self.comments.get(&item).map(|c| c.root)
        }
    }

    /// Number of items (root plus comments) in the thread.
    pub fn thread_size(&self, root: ItemId) -> usize {
        self.threads.get(&root).map_or(0, |c| c.len() + 1)
    }

    /// Looks up a current member by display name.
    pub fn resolve_name(&self, name: &str) -> Option<AgentId> {
        self.names
            .get(name)
            .copied()
            .filter(|id| self.agents[id].is_active_member())
    }

    pub fn register_agent(&mut self, persona: Persona) -> Result<AgentId, PlatformError> {
        persona.validate()?;
        let mut persona = persona;
        persona.name = self.unique_name(&persona.name);
        let id = AgentId(self.next_agent);
        let mut e = self.event(EventKind::Join, id);
        e.persona = Some(persona);
        self.commit(e)?;
        Ok(id)
    }

    fn unique_name(&self, base: &str) -> String {
        if !self.names.contains_key(base) {
            return base.to_string();
        }
        (2..)
            .map(|n| format!("{base}{n}"))
            .find(|candidate| !self.names.contains_key(candidate))
            .expect("unbounded suffix search")
    }

    pub fn submit_post(
        &mut self,
        author: AgentId,
        title: &str,
        body: &str,
        url: Option<&str>,
        topics: &[Topic],
    ) -> Result<ItemId, PlatformError> {
        self.require_member(author)?;
        if title.trim().is_empty() {
            return Err(PlatformError::EmptyTitle);
        }
        let id = ItemId(self.next_item);
        let mut e = self.event(EventKind::Post, author);
        e.post_id = Some(id);
        e.title = Some(title.to_string());
        e.text = Some(body.to_string());
        e.url = url.map(str::to_string);
        e.topics = dedup_topics(topics);
        self.commit(e)?;
        Ok(id)
    }

    pub fn submit_comment(
        &mut self,
        author: AgentId,
        parent: ItemId,
        body: &str,
        mentions: &[AgentId],
    ) -> Result<ItemId, PlatformError> {
        self.comment_event(EventKind::Comment, author, parent, body, mentions)
    }

    /// A comment written in answer to a pending mention.
    pub fn submit_mention_reply(
        &mut self,
        author: AgentId,
        parent: ItemId,
        body: &str,
        mentions: &[AgentId],
    ) -> Result<ItemId, PlatformError> {
        self.comment_event(EventKind::MentionReply, author, parent, body, mentions)
    }

    fn comment_event(
        &mut self,
        kind: EventKind,
        author: AgentId,
        parent: ItemId,
        body: &str,
        mentions: &[AgentId],
    ) -> Result<ItemId, PlatformError> {
        self.require_member(author)?;
        let root = self.root_of(parent).ok_or(PlatformError::UnknownItem(parent))?;
        let mut clean = Vec::new();
        for &m in mentions {
            if !self.agents.contains_key(&m) {
                return Err(PlatformError::UnknownAgent(m));
            }
            if m != author && !clean.contains(&m) {
                clean.push(m);
            }
        }
        let id = ItemId(self.next_item);
        let mut e = self.event(kind, author);
        e.comment_id = Some(id);
        e.parent_id = Some(parent);
        e.root_id = Some(root);
        e.text = Some(body.to_string());
        e.mentions = clean;
        self.commit(e)?;
        Ok(id)
    }

    /// Removes and returns the newest unanswered mention.
    ///
    /// Not logged by itself: the reply (or degraded event) that follows
    /// carries the comment id, and applying it clears the queue entry.
    pub fn pop_mention(&mut self, agent: AgentId) -> Option<ItemId> {
        self.agents.get_mut(&agent)?.pending_mentions.pop()
    }

    /// Records a follow edge. Returns `false` when it already existed.
    pub fn follow(&mut self, agent: AgentId, author: AgentId) -> Result<bool, PlatformError> {
        if agent == author {
            return Err(PlatformError::SelfFollow(agent));
        }
        self.require_member(agent)?;
        if !self.agents.contains_key(&author) {
            return Err(PlatformError::UnknownAgent(author));
        }
        if self.follows.contains(&(agent, author)) {
            return Ok(false);
        }
        let mut e = self.event(EventKind::Follow, agent);
        e.followee = Some(author);
        self.commit(e)?;
        Ok(true)
    }

    /// Merges topics into the agent's interests, evicting the oldest past the cap.
    pub fn update_interests(&mut self, agent: AgentId, topics: &[Topic]) -> Result<(), PlatformError> {
        let record = self.agents.get(&agent).ok_or(PlatformError::UnknownAgent(agent))?;
        let mut preview = record.interests.clone();
        merge_interests(&mut preview, topics, self.config.interest_cap);
        if preview == record.interests {
            return Ok(());
        }
        let mut e = self.event(EventKind::Interest, agent);
        e.topics = dedup_topics(topics);
        self.commit(e)
    }

    pub fn record_activation(&mut self, agent: AgentId) -> Result<(), PlatformError> {
        self.require_member(agent)?;
        let e = self.event(EventKind::Activate, agent);
        self.commit(e)
    }

    pub fn record_read(&mut self, agent: AgentId, post: Option<ItemId>) -> Result<(), PlatformError> {
        self.require_member(agent)?;
        let mut e = self.event(EventKind::Read, agent);
        e.post_id = post;
        self.commit(e)
    }

    pub fn record_search(&mut self, agent: AgentId, top: Option<ItemId>) -> Result<(), PlatformError> {
        self.require_member(agent)?;
        let mut e = self.event(EventKind::Search, agent);
        e.post_id = top;
        self.commit(e)
    }

    /// Logs a skipped action. `mention` clears that comment from the queue.
    pub fn record_degraded(
        &mut self,
        agent: AgentId,
        reason: &str,
        mention: Option<ItemId>,
    ) -> Result<(), PlatformError> {
        let mut e = self.event(EventKind::Degraded, agent);
        e.text = Some(reason.to_string());
        e.comment_id = mention;
        self.commit(e)
    }

    pub fn churn(&mut self, agent: AgentId) -> Result<(), PlatformError> {
        self.require_member(agent)?;
        let e = self.event(EventKind::Churn, agent);
        self.commit(e)
    }

    /// Reverse-chronological slate of other agents' posts within the
    /// visibility window of `round`.
    pub fn feed_slate(&self, agent: AgentId, round: u32, limit: usize) -> Vec<ItemId> {
        let window = self.config.visibility_window;
        let mut slate: Vec<&PostRecord> = self
            .posts
            .values()
            .filter(|p| p.author != agent && p.round <= round && round - p.round <= window)
            .collect();
        sort_newest_first(&mut slate);
        slate.into_iter().take(limit).map(|p| p.id).collect()
    }

    /// Posts sharing a topic with the agent's interests, over the whole store.
    pub fn search_content(&self, agent: AgentId, limit: usize) -> Vec<ItemId> {
        let Some(record) = self.agents.get(&agent) else {
            return Vec::new();
        };
        let mut hits: Vec<&PostRecord> = self
            .posts
            .values()
            .filter(|p| p.author != agent && p.topics.iter().any(|t| record.interests.contains(t)))
            .collect();
        sort_newest_first(&mut hits);
        hits.into_iter().take(limit).map(|p| p.id).collect()
    }

    /// The `k` most recent items of the thread containing `item`, oldest first.
    pub fn thread_context(&self, item: ItemId, k: usize) -> Vec<ContextItem> {
        let Some(root) = self.root_of(item) else {
            return Vec::new();
        };
        let post = &self.posts[&root];
        let mut items = vec![ContextItem {
            item: root,
            author: post.author,
            author_name: self.name_of(post.author),
            text: if post.body.is_empty() {
                post.title.clone()
            } else {
                format!("{}\n{}", post.title, post.body)
            },
        }];
        for cid in self.threads.get(&root).into_iter().flatten() {
            let c = &self.comments[cid];
            items.push(ContextItem {
                item: c.id,
                author: c.author,
                author_name: self.name_of(c.author),
                text: c.body.clone(),
            });
        }
        let skip = items.len().saturating_sub(k);
        items.split_off(skip)
    }

    pub fn name_of(&self, agent: AgentId) -> String {
        self.agents
            .get(&agent)
            .map_or_else(|| format!("user{agent}"), |a| a.persona.name.clone())
    }

    fn require_member(&self, agent: AgentId) -> Result<(), PlatformError> {
        match self.agents.get(&agent) {
            None => Err(PlatformError::UnknownAgent(agent)),
            Some(a) if !a.is_active_member() => Err(PlatformError::ChurnedAgent(agent)),
            Some(_) => Ok(()),
        }
    }

    fn event(&self, kind: EventKind, agent: AgentId) -> EventRecord {
        let seq = self.log.last().map_or(1, |e| e.seq + 1);
        EventRecord::new(seq, self.clock.day, self.clock.round, kind, agent)
    }

    fn commit(&mut self, event: EventRecord) -> Result<(), PlatformError> {
        self.apply(&event)?;
        self.log.push(event);
        Ok(())
    }

    fn apply(&mut self, e: &EventRecord) -> Result<(), PlatformError> {
        let bad = |message: &str| PlatformError::Replay {
            seq: e.seq,
            message: message.to_string(),
        };
        match e.kind {
            EventKind::Join => {
                let persona = e.persona.clone().ok_or_else(|| bad("join without persona"))?;
                if e.agent.0 != self.next_agent {
                    return Err(bad("agent ids must be assigned consecutively"));
                }
                self.next_agent += 1;
                self.names.insert(persona.name.clone(), e.agent);
                self.agents.insert(
                    e.agent,
                    AgentRecord {
                        id: e.agent,
                        interests: persona.interests.clone(),
                        persona,
                        joined_day: e.day,
                        last_active_round: None,
                        pending_mentions: Vec::new(),
                        churned_day: None,
                    },
                );
            }
            EventKind::Churn => {
                let a = self.member_mut(e)?;
                a.churned_day = Some(e.day);
                a.pending_mentions.clear();
            }
            EventKind::Activate => {
                // showing up counts as activity for churn ordering
                self.touch(e)?;
            }
            EventKind::Post => {
                let id = e.post_id.ok_or_else(|| bad("post without post_id"))?;
                let title = e.title.clone().ok_or_else(|| bad("post without title"))?;
                if id.0 != self.next_item {
                    return Err(bad("item ids must be assigned consecutively"));
                }
                self.touch(e)?;
                self.next_item += 1;
                self.posts.insert(
                    id,
                    PostRecord {
                        id,
                        author: e.agent,
                        round: e.round,
                        title,
                        body: e.text.clone().unwrap_or_default(),
                        url: e.url.clone(),
                        topics: e.topics.clone(),
                        kind: if e.url.is_some() { PostKind::Link } else { PostKind::Text },
                    },
                );
                self.threads.insert(id, Vec::new());
            }
            EventKind::Comment | EventKind::MentionReply => {
                let id = e.comment_id.ok_or_else(|| bad("comment without comment_id"))?;
                let parent = e.parent_id.ok_or_else(|| bad("comment without parent_id"))?;
                let root = self.root_of(parent).ok_or(PlatformError::UnknownItem(parent))?;
                if e.root_id.is_some_and(|r| r != root) {
                    return Err(bad("root_id does not match parent chain"));
                }
                if id.0 != self.next_item {
                    return Err(bad("item ids must be assigned consecutively"));
                }
                self.touch(e)?;
                self.next_item += 1;
                self.comments.insert(
                    id,
                    CommentRecord {
                        id,
                        author: e.agent,
                        parent,
                        root,
                        round: e.round,
                        body: e.text.clone().unwrap_or_default(),
                        mentions: e.mentions.clone(),
                    },
                );
                self.threads.entry(root).or_default().push(id);
                // replying to a mention answers it
                if let Some(a) = self.agents.get_mut(&e.agent) {
                    a.pending_mentions.retain(|&m| m != parent);
                }
                for m in &e.mentions {
                    match self.agents.get_mut(m) {
                        Some(a) if a.is_active_member() => a.pending_mentions.push(id),
                        Some(_) => {}
                        None => return Err(PlatformError::UnknownAgent(*m)),
                    }
                }
            }
            EventKind::Read | EventKind::Search => {
                if let Some(p) = e.post_id {
                    if !self.posts.contains_key(&p) {
                        return Err(PlatformError::UnknownItem(p));
                    }
                }
                self.touch(e)?;
            }
            EventKind::Follow => {
                let followee = e.followee.ok_or_else(|| bad("follow without followee"))?;
                if followee == e.agent {
                    return Err(PlatformError::SelfFollow(e.agent));
                }
                if !self.agents.contains_key(&followee) {
                    return Err(PlatformError::UnknownAgent(followee));
                }
                self.member_mut(e)?;
                self.follows.insert((e.agent, followee));
            }
            EventKind::Interest => {
                let cap = self.config.interest_cap;
                let a = self
                    .agents
                    .get_mut(&e.agent)
                    .ok_or(PlatformError::UnknownAgent(e.agent))?;
                merge_interests(&mut a.interests, &e.topics, cap);
            }
            EventKind::Degraded => {
                let a = self
                    .agents
                    .get_mut(&e.agent)
                    .ok_or(PlatformError::UnknownAgent(e.agent))?;
                if let Some(c) = e.comment_id {
                    a.pending_mentions.retain(|&m| m != c);
                }
            }
        }
        Ok(())
    }

    fn member_mut(&mut self, e: &EventRecord) -> Result<&mut AgentRecord, PlatformError> {
        match self.agents.get_mut(&e.agent) {
            None => Err(PlatformError::UnknownAgent(e.agent)),
            Some(a) if !a.is_active_member() => Err(PlatformError::ChurnedAgent(e.agent)),
            Some(a) => Ok(a),
        }
    }

    fn touch(&mut self, e: &EventRecord) -> Result<(), PlatformError> {
        let round = e.round;
        let a = self.member_mut(e)?;
        a.last_active_round = Some(a.last_active_round.map_or(round, |r| r.max(round)));
        Ok(())
    }
}

fn sort_newest_first(posts: &mut [&PostRecord]) {
    posts.sort_by(|a, b| b.round.cmp(&a.round).then(b.id.cmp(&a.id)));
}

fn dedup_topics(topics: &[Topic]) -> Vec<Topic> {
    let mut out = Vec::with_capacity(topics.len());
    for &t in topics {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn merge_interests(interests: &mut Vec<Topic>, topics: &[Topic], cap: usize) {
    for &t in topics {
        if !interests.contains(&t) {
            interests.push(t);
        }
    }
    if interests.len() > cap {
        let excess = interests.len() - cap;
        interests.drain(..excess);
    }
}
