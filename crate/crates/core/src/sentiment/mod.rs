//! Sentiment scores from heterogeneous providers.
//!
//! Three provider shapes are supported: a prompted LLM returning a
//! GOOD / NOT SURE / BAD verdict, a binary classifier returning the
//! probability that the text is positive, and a three-class classifier
//! returning Positive / Neutral / Negative. All of them land in
//! [`SentimentScore`], either on the signed scale `[-1, 1]` or the unit
//! scale `[0, 1]`.

mod parser;
mod provider;
mod remote;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::NewsDataset;

pub use parser::{parse_prompt_response, ResponseParser};
pub use provider::{OracleProvider, PrecomputedProvider, ScoreProvider};
pub use remote::{CannedTransport, RemoteConfig, RemoteProvider, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SentimentError {
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("score {value} outside the {scale} interval")]
    OutOfRange { value: f64, scale: Scale },
    #[error("unknown provider kind {0:?}")]
    UnknownProvider(String),
    #[error("invalid label {label:?} for provider {provider}")]
    InvalidLabel { label: String, provider: ProviderKind },
    #[error("no score for news item {news_id}")]
    MissingScore { news_id: String },
    #[error("news item {news_id} was scored by {found}, expected {expected}")]
    MixedProviders {
        news_id: String,
        expected: ProviderKind,
        found: ProviderKind,
    },
    #[error("news item {news_id} has no text to send to the remote provider")]
    MissingText { news_id: String },
    #[error("remote provider failed for {news_id} after {attempts} attempt(s): {message}")]
    Transport {
        news_id: String,
        attempts: u32,
        message: String,
    },
    #[error("oracle file line {line}: {message}")]
    OracleRow { line: u64, message: String },
    #[error("oracle file: {0}")]
    OracleIo(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Prompted LLM verdict: GOOD NEWS / NOT SURE / BAD NEWS.
    DiscreteThreeClass,
    /// Classifier probability that the text is positive.
    ContinuousPositiveProb,
    /// Three-class classifier: Positive / Neutral / Negative.
    DiscreteClassifier,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 3] = [
        ProviderKind::DiscreteThreeClass,
        ProviderKind::ContinuousPositiveProb,
        ProviderKind::DiscreteClassifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::DiscreteThreeClass => "discrete_three_class",
            ProviderKind::ContinuousPositiveProb => "continuous_positive_prob",
            ProviderKind::DiscreteClassifier => "discrete_classifier",
        }
    }

    /// Scale the provider reports on before any transform.
    pub fn native_scale(self) -> Scale {
        match self {
            ProviderKind::ContinuousPositiveProb => Scale::Unit,
            _ => Scale::Signed,
        }
    }
}

impl FromStr for ProviderKind {
    type Err = SentimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "discrete_three_class" | "chatgpt" | "gpt" => Ok(ProviderKind::DiscreteThreeClass),
            "continuous_positive_prob" | "erlangshen" => Ok(ProviderKind::ContinuousPositiveProb),
            "discrete_classifier" | "finbert" => Ok(ProviderKind::DiscreteClassifier),
            _ => Err(SentimentError::UnknownProvider(s.to_string())),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `[-1, 1]`
    Signed,
    /// `[0, 1]`
    Unit,
}

impl Scale {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Scale::Signed => (-1.0, 1.0),
            Scale::Unit => (0.0, 1.0),
        }
    }

    pub fn contains(self, value: f64) -> bool {
        let (lo, hi) = self.bounds();
        value.is_finite() && (lo..=hi).contains(&value)
    }

    /// Maps a value on this scale onto the signed scale.
    pub fn to_signed_value(self, value: f64) -> f64 {
        match self {
            Scale::Signed => value,
            Scale::Unit => 2.0 * value - 1.0,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Signed => "signed",
            Scale::Unit => "unit",
        })
    }
}

/// A provider output normalised onto one of the two scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    value: f64,
    scale: Scale,
    provider: ProviderKind,
}

impl SentimentScore {
    pub fn new(value: f64, scale: Scale, provider: ProviderKind) -> Result<Self, SentimentError> {
        if !scale.contains(value) {
            return Err(SentimentError::OutOfRange { value, scale });
        }
        Ok(SentimentScore { value, scale, provider })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn provider(&self) -> ProviderKind {
        self.provider
    }
}

/// Verdicts from either discrete alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscreteLabel {
    Good,
    NotSure,
    Bad,
    Positive,
    Neutral,
    Negative,
}

impl DiscreteLabel {
    pub fn provider(self) -> ProviderKind {
        match self {
            DiscreteLabel::Good | DiscreteLabel::NotSure | DiscreteLabel::Bad => ProviderKind::DiscreteThreeClass,
            _ => ProviderKind::DiscreteClassifier,
        }
    }

    /// Parses a classifier class name (case-insensitive).
    pub fn parse_class(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "+1" => Some(DiscreteLabel::Positive),
            "neutral" | "neu" => Some(DiscreteLabel::Neutral),
            "negative" | "neg" => Some(DiscreteLabel::Negative),
            _ => None,
        }
    }
}

/// GOOD/Positive -> +1, NOT SURE/Neutral -> 0, BAD/Negative -> -1.
pub fn map_discrete(label: DiscreteLabel) -> SentimentScore {
    let value = match label {
        DiscreteLabel::Good | DiscreteLabel::Positive => 1.0,
        DiscreteLabel::NotSure | DiscreteLabel::Neutral => 0.0,
        DiscreteLabel::Bad | DiscreteLabel::Negative => -1.0,
    };
    SentimentScore {
        value,
        scale: Scale::Signed,
        provider: label.provider(),
    }
}

/// Wraps a positive-class probability as a unit-scale score.
pub fn wrap_continuous(p_positive: f64) -> Result<SentimentScore, SentimentError> {
    if !Scale::Unit.contains(p_positive) {
        return Err(SentimentError::InvalidProbability(p_positive));
    }
    Ok(SentimentScore {
        value: p_positive,
        scale: Scale::Unit,
        provider: ProviderKind::ContinuousPositiveProb,
    })
}

/// Moves a score onto the signed scale with `v -> 2v - 1`; signed scores pass through.
pub fn to_signed(score: SentimentScore) -> SentimentScore {
    SentimentScore {
        value: score.scale.to_signed_value(score.value),
        scale: Scale::Signed,
        provider: score.provider,
    }
}

/// Scores every record, in input order.
///
/// Records are scored in parallel; when several fail, the error reported is
/// the one for the earliest record.
pub fn score_news<P>(ds: &NewsDataset, provider: &P) -> Result<Vec<(String, SentimentScore)>, SentimentError>
where
    P: ScoreProvider + ?Sized,
{
    let results: Vec<Result<SentimentScore, SentimentError>> =
        ds.records().par_iter().map(|rec| provider.score(rec)).collect();
    ds.records()
        .iter()
        .zip(results)
        .map(|(rec, res)| res.map(|s| (rec.news_id.clone(), s)))
        .collect()
}
