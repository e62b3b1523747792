//! Prompt construction, pluggable text generation, output parsing, and the
//! link catalog.

pub mod backend;
pub mod catalog;
pub mod parse;
pub mod prompt;

pub use backend::{GenError, GenParams, GenRequest, HttpGenerator, StubGenerator, StubHints, TextGenerator};
pub use catalog::{canonicalize_url, load_link_catalog, sample_link, CanonicalUrl, LinkCatalog, LinkRecord};
pub use parse::{extract_mentions, parse_action_choice, parse_post_output, parse_yes_no, GeneratedPost};
pub use prompt::{build_prompt, PersonaSummary, PromptContext, PromptKind, PromptSpec};
