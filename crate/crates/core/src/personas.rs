//! Persona sampling and the truncated Zipf action budget.
//!
//! Every attribute except political leaning and the action budget is drawn
//! uniformly from its domain. Leaning uses fixed weights; the budget follows
//! `Pr(B = k) ∝ k^(-s)` on `1..=10`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::topic::Topic;

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 60;
pub const MIN_INTERESTS: usize = 2;
pub const MAX_INTERESTS: usize = 5;
pub const BUDGET_MAX: u32 = 10;
pub const DEFAULT_BUDGET_EXPONENT: f64 = 2.5;
pub const LOCALE: &str = "English (American)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Education {
    HighSchool,
    Bachelor,
    Master,
    Phd,
}

impl Education {
    pub const ALL: [Education; 4] = [
        Education::HighSchool,
        Education::Bachelor,
        Education::Master,
        Education::Phd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Education::HighSchool => "high school",
            Education::Bachelor => "bachelor",
            Education::Master => "master",
            Education::Phd => "phd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leaning {
    ReligiousPatriot,
    ProBusinessEstablishment,
    AntiElitePopulist,
    SociallyModerateRight,
}

impl Leaning {
    pub const ALL: [Leaning; 4] = [
        Leaning::ReligiousPatriot,
        Leaning::ProBusinessEstablishment,
        Leaning::AntiElitePopulist,
        Leaning::SociallyModerateRight,
    ];

    /// Sampling weights, aligned with [`Leaning::ALL`].
    pub const WEIGHTS: [f64; 4] = [0.37, 0.11, 0.43, 0.09];

    pub fn label(self) -> &'static str {
        match self {
            Leaning::ReligiousPatriot => "Religious-Patriot Conservative",
            Leaning::ProBusinessEstablishment => "Pro-Business Establishment Right",
            Leaning::AntiElitePopulist => "Anti-Elite Populist Right",
            Leaning::SociallyModerateRight => "Socially Moderate Right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToxicityPropensity {
    AbsolutelyNo,
    No,
    Moderately,
    Extremely,
}

impl ToxicityPropensity {
    pub const ALL: [ToxicityPropensity; 4] = [
        ToxicityPropensity::AbsolutelyNo,
        ToxicityPropensity::No,
        ToxicityPropensity::Moderately,
        ToxicityPropensity::Extremely,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub age: u32,
    pub education: Education,
    pub leaning: Leaning,
    pub interests: Vec<Topic>,
    pub toxicity: ToxicityPropensity,
    pub budget: u32,
    pub locale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersonaError {
    #[error("age {0} outside {MIN_AGE}..={MAX_AGE}")]
    Age(u32),
    #[error("persona needs {MIN_INTERESTS}..={MAX_INTERESTS} interests, got {0}")]
    InterestCount(usize),
    #[error("interest {0} listed twice")]
    DuplicateInterest(Topic),
    #[error("budget {0} outside 1..={BUDGET_MAX}")]
    Budget(u32),
    #[error("display name is empty")]
    EmptyName,
}

impl Persona {
    pub fn validate(&self) -> Result<(), PersonaError> {
        if !(MIN_AGE..=MAX_AGE).contains(&self.age) {
            return Err(PersonaError::Age(self.age));
        }
        if !(MIN_INTERESTS..=MAX_INTERESTS).contains(&self.interests.len()) {
            return Err(PersonaError::InterestCount(self.interests.len()));
        }
        for (i, t) in self.interests.iter().enumerate() {
            if self.interests[..i].contains(t) {
                return Err(PersonaError::DuplicateInterest(*t));
            }
        }
        if !(1..=BUDGET_MAX).contains(&self.budget) {
            return Err(PersonaError::Budget(self.budget));
        }
        if self.name.is_empty() {
            return Err(PersonaError::EmptyName);
        }
        Ok(())
    }
}

/// Truncated Zipf law over `1..=10`.
#[derive(Debug, Clone)]
pub struct BudgetDistribution {
    exponent: f64,
    normalizer: f64,
    index: WeightedIndex<f64>,
}

impl BudgetDistribution {
    pub fn new(exponent: f64) -> Self {
        let masses: Vec<f64> = (1..=BUDGET_MAX).map(|k| (k as f64).powf(-exponent)).collect();
        let normalizer = masses.iter().sum();
        let index = WeightedIndex::new(&masses).expect("Zipf masses are positive and finite");
        Self { exponent, normalizer, index }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `Z = Σ_{k=1..10} k^(-s)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn pmf(&self, k: u32) -> f64 {
        if (1..=BUDGET_MAX).contains(&k) {
            (k as f64).powf(-self.exponent) / self.normalizer
        } else {
            0.0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.index.sample(rng) as u32 + 1
    }
}

impl Default for BudgetDistribution {
    fn default() -> Self {
        Self::new(DEFAULT_BUDGET_EXPONENT)
    }
}

pub fn sample_budget<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    BudgetDistribution::default().sample(rng)
}

const FIRST_NAMES: &[&str] = &[
    "Katie", "Pamela", "James", "Robert", "Linda", "Michael", "Karen", "David", "Susan", "Brian",
    "Jessica", "Kevin", "Amanda", "Jason", "Melissa", "Eric", "Rachel", "Travis", "Heather",
    "Dustin", "Amber", "Cody", "Brandy", "Wesley", "Tammy", "Derek", "Crystal", "Randy", "Misty",
    "Chad", "Tiffany", "Gary", "Donna", "Scott", "Sharon", "Troy", "Brenda", "Kyle", "Denise",
    "Shane",
];

const LAST_NAMES: &[&str] = &[
    "West", "Kelly", "Miller", "Turner", "Hayes", "Brooks", "Carter", "Reed", "Parker", "Hughes",
    "Foster", "Bennett", "Wood", "Barnes", "Ross", "Henderson", "Coleman", "Jenkins", "Perry",
    "Powell", "Long", "Patterson", "Flores", "Butler", "Simmons", "Bryant", "Alexander", "Russell",
    "Griffin", "Hayden", "Wallace", "Cole", "Myers", "Ford", "Graham", "Sullivan", "Wells",
    "Stone", "Dean", "Boyd",
];

/// Draws a persona-style display name such as `KatieWest`.
pub fn sample_name<R: Rng + ?Sized>(rng: &mut R) -> String {
    let first = FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())];
    let last = LAST_NAMES[rng.random_range(0..LAST_NAMES.len())];
    format!("{first}{last}")
}

/// Samples personas with a reusable budget distribution and leaning table.
#[derive(Debug, Clone)]
pub struct PersonaSampler {
    budget: BudgetDistribution,
    leaning: WeightedIndex<f64>,
}

impl PersonaSampler {
    pub fn new(budget: BudgetDistribution) -> Self {
        let leaning = WeightedIndex::new(Leaning::WEIGHTS).expect("leaning weights are positive");
        Self { budget, leaning }
    }

    pub fn budget(&self) -> &BudgetDistribution {
        &self.budget
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Persona {
        let name = sample_name(rng);
        let age = rng.random_range(MIN_AGE..=MAX_AGE);
        let education = Education::ALL[rng.random_range(0..Education::ALL.len())];
        let leaning = Leaning::ALL[self.leaning.sample(rng)];
        let count = rng.random_range(MIN_INTERESTS..=MAX_INTERESTS);
        let interests = index::sample(rng, Topic::ALL.len(), count)
            .into_iter()
            .map(|i| Topic::ALL[i])
            .collect();
        let toxicity = ToxicityPropensity::ALL[rng.random_range(0..ToxicityPropensity::ALL.len())];
        let budget = self.budget.sample(rng);
        Persona {
            name,
            age,
            education,
            leaning,
            interests,
            toxicity,
            budget,
            locale: LOCALE.to_string(),
        }
    }
}

impl Default for PersonaSampler {
    fn default() -> Self {
        Self::new(BudgetDistribution::default())
    }
}

pub fn sample_persona<R: Rng + ?Sized>(rng: &mut R) -> Persona {
    PersonaSampler::default().sample(rng)
}
