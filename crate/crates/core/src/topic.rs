//! The fixed ten-tag interest catalog shared by personas, posts, and links.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Topic {
    SocialMedia,
    InternetPolicy,
    ArtificialIntelligence,
    ElectricVehicles,
    SoftwareDevelopment,
    CleanEnergy,
    Cybersecurity,
    BigTech,
    SpaceTechnology,
    OpenSource,
}

impl Topic {
    pub const ALL: [Topic; 10] = [
        Topic::SocialMedia,
        Topic::InternetPolicy,
        Topic::ArtificialIntelligence,
        Topic::ElectricVehicles,
        Topic::SoftwareDevelopment,
        Topic::CleanEnergy,
        Topic::Cybersecurity,
        Topic::BigTech,
        Topic::SpaceTechnology,
        Topic::OpenSource,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Topic::SocialMedia => "Social Media & Online Platforms",
            Topic::InternetPolicy => "Internet Policy & Regulation",
            Topic::ArtificialIntelligence => "Artificial Intelligence",
            Topic::ElectricVehicles => "Electric Vehicles & Transportation",
            Topic::SoftwareDevelopment => "Software Development",
            Topic::CleanEnergy => "Clean Energy & Sustainability",
            Topic::Cybersecurity => "Cybersecurity & Privacy",
            Topic::BigTech => "Big Tech",
            Topic::SpaceTechnology => "Space Technology",
            Topic::OpenSource => "Open Source Projects",
        }
    }

    /// A few words a stub generator can weave into text about this topic.
    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            Topic::SocialMedia => &["platforms", "moderation", "feeds", "censorship"],
            Topic::InternetPolicy => &["regulation", "net neutrality", "lawmakers", "the FCC"],
            Topic::ArtificialIntelligence => &["AI", "language models", "automation", "robots"],
            Topic::ElectricVehicles => &["EVs", "Tesla", "batteries", "self-driving cars"],
            Topic::SoftwareDevelopment => &["code", "developers", "Rust", "bloated frameworks"],
            Topic::CleanEnergy => &["solar", "grid storage", "nuclear", "subsidies"],
            Topic::Cybersecurity => &["privacy", "encryption", "backdoors", "tracking"],
            Topic::BigTech => &["Google", "Microsoft", "Apple", "Facebook"],
            Topic::SpaceTechnology => &["SpaceX", "NASA", "satellites", "rockets"],
            Topic::OpenSource => &["FOSS", "Linux", "GitHub", "maintainers"],
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown topic tag {0:?}")]
pub struct UnknownTopic(pub String);

impl FromStr for Topic {
    type Err = UnknownTopic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Topic::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownTopic(s.to_string()))
    }
}

impl Serialize for Topic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Topic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
