//! Daily activity, run totals, and posts-per-user distributions.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::events::{AgentId, EventKind, EventRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyMetrics {
    pub day: u32,
    pub posts: usize,
    pub comments: usize,
    pub unique_active_users: usize,
    pub interactions_per_active_user: f64,
    pub new_users: usize,
    pub churned_users: usize,
}

/// Per-day counts from day 0 through the last day present in the log.
/// A user is active on a day with at least one post, comment, read, or search.
pub fn daily_activity(events: &[EventRecord]) -> Vec<DailyMetrics> {
    let Some(last) = events.iter().map(|e| e.day).max() else {
        return Vec::new();
    };
    let mut days: Vec<DailyMetrics> = (0..=last)
        .map(|day| DailyMetrics {
            day,
            posts: 0,
            comments: 0,
            unique_active_users: 0,
            interactions_per_active_user: 0.0,
            new_users: 0,
            churned_users: 0,
        })
        .collect();
    let mut actives: Vec<BTreeSet<AgentId>> = vec![BTreeSet::new(); days.len()];
    for e in events {
        let d = &mut days[e.day as usize];
        match e.kind {
            EventKind::Post => d.posts += 1,
            k if k.is_comment() => d.comments += 1,
            EventKind::Join => d.new_users += 1,
            EventKind::Churn => d.churned_users += 1,
            _ => {}
        }
        if e.kind.is_action() {
            actives[e.day as usize].insert(e.agent);
        }
    }
    for (d, active) in days.iter_mut().zip(&actives) {
        d.unique_active_users = active.len();
        if !active.is_empty() {
            d.interactions_per_active_user = (d.posts + d.comments) as f64 / active.len() as f64;
        }
    }
    days
}

/// `1 + comments / posts`, or `None` without posts.
pub fn avg_thread_length(posts: usize, comments: usize) -> Option<f64> {
    (posts > 0).then(|| 1.0 + comments as f64 / posts as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub posts: usize,
    pub comments: usize,
    /// Distinct authors of at least one post or comment.
    pub unique_users: usize,
    /// 0 when there are no posts; see `thread_length_defined`.
    pub avg_thread_length: f64,
    pub thread_length_defined: bool,
    pub comments_per_post: f64,
    /// `(posts written, number of users)` over every user who ever joined.
    pub posts_per_user: Vec<(usize, usize)>,
}

pub fn run_summary(events: &[EventRecord]) -> RunSummary {
    let mut posts = 0;
    let mut comments = 0;
    let mut authors = BTreeSet::new();
    for e in events {
        if e.kind == EventKind::Post {
            posts += 1;
            authors.insert(e.agent);
        } else if e.kind.is_comment() {
            comments += 1;
            authors.insert(e.agent);
        }
    }
    let thread = avg_thread_length(posts, comments);
    RunSummary {
        posts,
        comments,
        unique_users: authors.len(),
        avg_thread_length: thread.unwrap_or(0.0),
        thread_length_defined: thread.is_some(),
        comments_per_post: if posts > 0 { comments as f64 / posts as f64 } else { 0.0 },
        posts_per_user: posts_per_user(events).histogram(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostsPerUser {
    /// Every user that joined, including those who never posted.
    pub counts: BTreeMap<AgentId, usize>,
}

impl PostsPerUser {
    /// `ln(count + 1)` per user, in id order.
    pub fn log_values(&self) -> Vec<f64> {
        self.counts.values().map(|&c| (c as f64).ln_1p()).collect()
    }

    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut h = BTreeMap::new();
        for &c in self.counts.values() {
            *h.entry(c).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    /// The most prolific poster; the lowest id wins ties.
    pub fn top_poster(&self) -> Option<(AgentId, usize)> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&a, &c)| (a, c))
    }
}

pub fn posts_per_user(events: &[EventRecord]) -> PostsPerUser {
    let mut counts = BTreeMap::new();
    for e in events {
        match e.kind {
            EventKind::Join => {
                counts.entry(e.agent).or_insert(0);
            }
            EventKind::Post => *counts.entry(e.agent).or_insert(0) += 1,
            _ => {}
        }
    }
    PostsPerUser { counts }
}
