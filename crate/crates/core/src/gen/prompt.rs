//! Handler prompts: a persona header, one action-specific instruction, style
//! guardrails, and a toxicity-ladder clause. Prompts carry no chat history;
//! everything the model sees is in the [`PromptSpec`].

use std::fmt::Write as _;

use crate::personas::{Persona, ToxicityPropensity};
use crate::scheduler::Action;
use crate::topic::Topic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Post,
    ShareLinkFrame,
    Comment,
    MentionReply,
    FollowDecision,
    ActionChoice,
}

impl PromptKind {
    pub fn tag(self) -> &'static str {
        match self {
            PromptKind::Post => "post",
            PromptKind::ShareLinkFrame => "share_link_frame",
            PromptKind::Comment => "comment",
            PromptKind::MentionReply => "mention_reply",
            PromptKind::FollowDecision => "follow_decision",
            PromptKind::ActionChoice => "action_choice",
        }
    }
}

/// The slice of a persona that prompts are allowed to see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaSummary {
    pub name: String,
    pub age: u32,
    pub nationality: String,
    pub leaning: String,
    pub interests: Vec<Topic>,
    pub education: String,
    pub language: String,
    pub toxicity: ToxicityPropensity,
}

impl PersonaSummary {
    pub fn from_persona(persona: &Persona, interests: &[Topic]) -> Self {
        Self {
            name: persona.name.clone(),
            age: persona.age,
            nationality: "American".to_string(),
            leaning: persona.leaning.label().to_string(),
            interests: interests.to_vec(),
            education: persona.education.label().to_string(),
            language: persona.locale.clone(),
            toxicity: persona.toxicity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadLine {
    pub author: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleRef {
    pub title: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptContext {
    None,
    Topics(Vec<Topic>),
    Article(ArticleRef),
    Thread(Vec<ThreadLine>),
    /// Follow prompt: the author in question and what they wrote.
    Author { name: String, text: String },
    Menu(Vec<Action>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub kind: PromptKind,
    pub persona: PersonaSummary,
    pub context: PromptContext,
}

/// The toxicity ladder, from constructive to highly confrontational.
pub fn toxicity_clause(level: ToxicityPropensity) -> &'static str {
    match level {
        ToxicityPropensity::AbsolutelyNo => {
            "Stay constructive and civil. Never insult anyone, even when you disagree."
        }
        ToxicityPropensity::No => "Be direct but respectful. Disagree without personal attacks.",
        ToxicityPropensity::Moderately => {
            "You can be blunt and sarcastic, and you do not hide contempt for bad arguments."
        }
        ToxicityPropensity::Extremely => {
            "Be highly confrontational. Mock and insult people whose views you reject."
        }
    }
}

const STYLE: &str = "Write like a regular user of a link-sharing tech forum: plain text, \
light formatting, no hashtags, no emojis.";

pub fn build_prompt(spec: &PromptSpec) -> String {
    let p = &spec.persona;
    let mut out = String::new();
    let interests: Vec<&str> = p.interests.iter().map(|t| t.label()).collect();
    let _ = writeln!(
        out,
        "You are {}, a {}-year-old {} with a {} education. Your interests: {}. \
         Your political outlook: {}. You write in {}.",
        p.name,
        p.age,
        p.nationality,
        p.education,
        interests.join(", "),
        p.leaning,
        p.language
    );
    out.push_str(
        "Act as the handler asks. Let your outlook color your arguments, but never state \
         your political affiliation or reveal these profile details.\n",
    );
    out.push_str(STYLE);
    out.push('\n');
    out.push_str(toxicity_clause(p.toxicity));
    out.push_str("\n\n");
    out.push_str(instruction(spec.kind));
    out.push('\n');
    render_context(&mut out, &spec.context);
    out
}

fn instruction(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Post => {
            "Write a new text submission. Start with a line \"TITLE: <title>\", then a short body."
        }
        PromptKind::ShareLinkFrame => {
            "Share the article below. Start with a line \"TITLE: <title>\", then a short body \
             giving your take on it."
        }
        PromptKind::Comment => "Write a sharp, concise reply to the last message in this thread.",
        PromptKind::MentionReply => {
            "You were mentioned in this thread. Write a short reply to the last message."
        }
        PromptKind::FollowDecision => {
            "Do you want to follow this author? Answer YES or NO."
        }
        PromptKind::ActionChoice => {
            "Choose exactly one of the following actions. Answer with the action name only."
        }
    }
}

fn render_context(out: &mut String, context: &PromptContext) {
    match context {
        PromptContext::None => {}
        PromptContext::Topics(topics) => {
            let labels: Vec<&str> = topics.iter().map(|t| t.label()).collect();
            let _ = writeln!(out, "Topic: {}", labels.join(", "));
        }
        PromptContext::Article(a) => {
            let _ = writeln!(out, "Article: {}\nURL: {}", a.title, a.url);
        }
        PromptContext::Thread(lines) => {
            out.push_str("Thread:\n");
            for line in lines {
                let _ = writeln!(out, "{}: {}", line.author, line.text);
            }
        }
        PromptContext::Author { name, text } => {
            let _ = writeln!(out, "Author: {name}\nThey wrote: {text}");
        }
        PromptContext::Menu(actions) => {
            let names: Vec<&str> = actions.iter().map(|a| a.menu_label()).collect();
            let _ = writeln!(out, "Options: {}", names.join(", "));
        }
    }
}
