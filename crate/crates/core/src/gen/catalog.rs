//! URL canonicalization and the fixed link catalog sampled by share actions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;
use url::Url;

use crate::topic::Topic;

/// Query keys starting with any of these are dropped.
pub const TRACKING_PREFIXES: [&str; 4] = ["utm_", "fbclid", "gclid", "ref"];

/// Public suffixes made of two labels that we recognise when trimming a
/// host down to its registrable domain.
const TWO_LABEL_SUFFIXES: [&str; 8] = [
    "co.uk", "org.uk", "ac.uk", "gov.uk", "com.au", "net.au", "co.jp", "co.nz",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot canonicalize {input:?}: {reason}")]
pub struct UrlError {
    pub input: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalUrl {
    pub url: String,
    pub domain: String,
}

pub fn canonicalize_url(input: &str) -> Result<CanonicalUrl, UrlError> {
    let fail = |reason: &str| UrlError {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let parsed = Url::parse(input.trim()).map_err(|e| fail(&e.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(fail("only http and https URLs are catalogued"));
    }
    let host = parsed.host_str().ok_or_else(|| fail("missing host"))?;
    let host = host.strip_prefix("www.").unwrap_or(host).to_string();
    if host.is_empty() {
        return Err(fail("empty host"));
    }

    let mut out = format!("{}://{}", parsed.scheme(), host);
    if let Some(port) = parsed.port() {
        out.push_str(&format!(":{port}"));
    }
    let path = parsed.path().trim_end_matches('/');
    out.push_str(path);
    if let Some(query) = parsed.query() {
        let kept: Vec<&str> = query
            .split('&')
            .filter(|pair| !pair.is_empty())
            .filter(|pair| {
                let key = pair.split('=').next().unwrap_or("").to_ascii_lowercase();
                !TRACKING_PREFIXES.iter().any(|p| key.starts_with(p))
            })
            .collect();
        if !kept.is_empty() {
            out.push('?');
            out.push_str(&kept.join("&"));
        }
    }
    let domain = registrable_domain(&host);
    Ok(CanonicalUrl { url: out, domain })
}

fn registrable_domain(host: &str) -> String {
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host.to_string();
    }
    let labels: Vec<&str> = host.split('.').collect();
    let keep = if labels.len() >= 3 && TWO_LABEL_SUFFIXES.contains(&labels[labels.len() - 2..].join(".").as_str()) {
        3
    } else {
        2
    };
    labels[labels.len().saturating_sub(keep)..].join(".")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkRecord {
    pub url: String,
    pub domain: String,
    pub title: String,
    pub topics: Vec<Topic>,
}

#[derive(Debug, Clone, Default)]
pub struct LinkCatalog {
    pub records: Vec<LinkRecord>,
    /// Deduplicated records per registrable domain.
    pub domain_counts: BTreeMap<String, usize>,
    /// Input lines that could not be canonicalized, with the reason.
    pub rejected: Vec<(usize, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("domain-topic map line {line}: {message}")]
    TopicMap { line: usize, message: String },
    #[error("link catalog is empty")]
    Empty,
}

/// Parses `domain<TAB>tag[,tag]` lines.
pub fn parse_domain_topics(text: &str) -> Result<BTreeMap<String, Vec<Topic>>, CatalogError> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CatalogError::TopicMap { line: idx + 1, message };
        let (domain, tags) = line
            .split_once('\t')
            .ok_or_else(|| err("expected domain<TAB>tags".into()))?;
        let topics = tags
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.parse::<Topic>().map_err(|e| err(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        map.insert(domain.trim().to_ascii_lowercase(), topics);
    }
    Ok(map)
}

/// Parses catalog lines (`url[<TAB>title]`), canonicalizing and collapsing
/// duplicates. The first title seen for a URL wins.
pub fn parse_link_catalog(
    text: &str,
    domain_topics: &BTreeMap<String, Vec<Topic>>,
) -> Result<LinkCatalog, CatalogError> {
    let mut catalog = LinkCatalog::default();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (raw, title) = match line.split_once('\t') {
            Some((u, t)) => (u, t.trim()),
            None => (line, ""),
        };
        let canonical = match canonicalize_url(raw) {
            Ok(c) => c,
            Err(e) => {
                catalog.rejected.push((idx + 1, e.reason));
                continue;
            }
        };
        if !seen.insert(canonical.url.clone()) {
            continue;
        }
        *catalog.domain_counts.entry(canonical.domain.clone()).or_default() += 1;
        let topics = domain_topics.get(&canonical.domain).cloned().unwrap_or_default();
        let title = if title.is_empty() {
            canonical.url.clone()
        } else {
            title.to_string()
        };
        catalog.records.push(LinkRecord {
            url: canonical.url,
            domain: canonical.domain,
            title,
            topics,
        });
    }
    if catalog.records.is_empty() {
        return Err(CatalogError::Empty);
    }
    Ok(catalog)
}

pub const BUNDLED_CATALOG: &str = include_str!("../../data/catalog.tsv");
pub const BUNDLED_DOMAIN_TOPICS: &str = include_str!("../../data/domain_topics.tsv");
pub const DOMAIN_TOPICS_FILE: &str = "domain_topics.tsv";

/// Loads a catalog file. The domain-topic map is read from
/// `domain_topics.tsv` next to it when present, else the bundled map is used.
pub fn load_link_catalog(path: &Path) -> Result<LinkCatalog, CatalogError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| CatalogError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let text = read(path)?;
    let sibling = path.with_file_name(DOMAIN_TOPICS_FILE);
    let map_text = if sibling.is_file() {
        read(&sibling)?
    } else {
        BUNDLED_DOMAIN_TOPICS.to_string()
    };
    parse_link_catalog(&text, &parse_domain_topics(&map_text)?)
}

pub fn bundled_catalog() -> LinkCatalog {
    let map = parse_domain_topics(BUNDLED_DOMAIN_TOPICS).expect("bundled domain map parses");
    parse_link_catalog(BUNDLED_CATALOG, &map).expect("bundled catalog parses")
}

/// Uniform over records sharing a topic with `interests`, or over the whole
/// catalog when nothing matches.
pub fn sample_link<'a, R: Rng + ?Sized>(
    rng: &mut R,
    interests: &[Topic],
    catalog: &'a [LinkRecord],
) -> Option<&'a LinkRecord> {
    let matching: Vec<&LinkRecord> = catalog
        .iter()
        .filter(|r| r.topics.iter().any(|t| interests.contains(t)))
        .collect();
    if matching.is_empty() {
        catalog.choose(rng)
    } else {
        matching.choose(rng).copied()
    }
}
