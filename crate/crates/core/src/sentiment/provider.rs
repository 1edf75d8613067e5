use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{map_discrete, wrap_continuous, DiscreteLabel, ProviderKind, ResponseParser, SentimentError, SentimentScore};
use crate::model::{NewsPayload, NewsRecord};

/// Anything that can turn a news record into a score.
///
/// Implementations must be shareable across threads; `score_news` calls
/// them from a worker pool.
pub trait ScoreProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn score(&self, record: &NewsRecord) -> Result<SentimentScore, SentimentError>;
}

/// Interprets one raw provider output for `kind`.
///
/// Discrete kinds take `-1`/`0`/`1` or a label; free-text verdicts go
/// through `parser`. The continuous kind takes a probability.
pub(crate) fn interpret(
    kind: ProviderKind,
    raw: &str,
    parser: &ResponseParser,
) -> Result<SentimentScore, SentimentError> {
    let invalid = || SentimentError::InvalidLabel {
        label: raw.to_string(),
        provider: kind,
    };
    let numeric = raw.trim().parse::<f64>().ok();
    match kind {
        ProviderKind::ContinuousPositiveProb => {
            let p = numeric.ok_or_else(invalid)?;
            wrap_continuous(p)
        }
        ProviderKind::DiscreteThreeClass | ProviderKind::DiscreteClassifier => {
            if let Some(v) = numeric {
                return discrete_from_value(kind, v).ok_or_else(invalid);
            }
            let label = if kind == ProviderKind::DiscreteThreeClass {
                parser.parse(raw)
            } else {
                DiscreteLabel::parse_class(raw).ok_or_else(invalid)?
            };
            Ok(map_discrete(label))
        }
    }
}

fn discrete_from_value(kind: ProviderKind, v: f64) -> Option<SentimentScore> {
    let (good, neutral, bad) = match kind {
        ProviderKind::DiscreteThreeClass => (DiscreteLabel::Good, DiscreteLabel::NotSure, DiscreteLabel::Bad),
        _ => (DiscreteLabel::Positive, DiscreteLabel::Neutral, DiscreteLabel::Negative),
    };
    let label = if v == 1.0 {
        good
    } else if v == 0.0 {
        neutral
    } else if v == -1.0 {
        bad
    } else {
        return None;
    };
    Some(map_discrete(label))
}

/// File-backed provider: a lookup table from news id to provider output.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    kind: ProviderKind,
    scores: HashMap<String, SentimentScore>,
    unmatched_responses: u64,
}

#[derive(Deserialize)]
struct OracleRow {
    news_id: String,
    label_or_score: String,
    provider_kind: String,
}

impl OracleProvider {
    /// Builds from `(news_id, raw output)` pairs for a single provider kind.
    pub fn from_entries<I, K, V>(kind: ProviderKind, entries: I) -> Result<Self, SentimentError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: AsRef<str>,
    {
        let parser = ResponseParser::default();
        let mut scores = HashMap::new();
        for (id, raw) in entries {
            scores.insert(id.into(), interpret(kind, raw.as_ref(), &parser)?);
        }
        Ok(OracleProvider {
            kind,
            scores,
            unmatched_responses: parser.unmatched(),
        })
    }

    /// Loads `news_id,label_or_score,provider_kind` rows. Every row must
    /// name the same provider kind.
    pub fn load(path: &Path, parser: &ResponseParser) -> Result<Self, SentimentError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| SentimentError::OracleIo(format!("{}: {e}", path.display())))?;
        let before = parser.unmatched();
        let mut kind: Option<ProviderKind> = None;
        let mut scores = HashMap::new();
        for (i, row) in reader.deserialize::<OracleRow>().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| SentimentError::OracleRow {
                line,
                message: e.to_string(),
            })?;
            let row_kind: ProviderKind = row.provider_kind.parse().map_err(|e: SentimentError| SentimentError::OracleRow {
                line,
                message: e.to_string(),
            })?;
            match kind {
                None => kind = Some(row_kind),
                Some(k) if k != row_kind => {
                    return Err(SentimentError::MixedProviders {
                        news_id: row.news_id,
                        expected: k,
                        found: row_kind,
                    })
                }
                _ => {}
            }
            let score = interpret(row_kind, &row.label_or_score, parser).map_err(|e| SentimentError::OracleRow {
                line,
                message: e.to_string(),
            })?;
            if scores.insert(row.news_id.clone(), score).is_some() {
                return Err(SentimentError::OracleRow {
                    line,
                    message: format!("duplicate news_id {}", row.news_id),
                });
            }
        }
        let kind = kind.ok_or_else(|| SentimentError::OracleIo(format!("{}: no rows", path.display())))?;
        Ok(OracleProvider {
            kind,
            scores,
            unmatched_responses: parser.unmatched() - before,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Free-text verdicts in the oracle that matched no keyword.
    pub fn unmatched_responses(&self) -> u64 {
        self.unmatched_responses
    }
}

impl ScoreProvider for OracleProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn score(&self, record: &NewsRecord) -> Result<SentimentScore, SentimentError> {
        self.scores
            .get(&record.news_id)
            .copied()
            .ok_or_else(|| SentimentError::MissingScore {
                news_id: record.news_id.clone(),
            })
    }
}

/// Uses scores already stored in the news file.
#[derive(Debug, Clone, Copy)]
pub struct PrecomputedProvider {
    kind: ProviderKind,
}

impl PrecomputedProvider {
    pub fn new(kind: ProviderKind) -> Self {
        PrecomputedProvider { kind }
    }
}

impl ScoreProvider for PrecomputedProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn score(&self, record: &NewsRecord) -> Result<SentimentScore, SentimentError> {
        let NewsPayload::Score { value, provider } = &record.payload else {
            return Err(SentimentError::MissingScore {
                news_id: record.news_id.clone(),
            });
        };
        if let Some(found) = provider {
            if *found != self.kind {
                return Err(SentimentError::MixedProviders {
                    news_id: record.news_id.clone(),
                    expected: self.kind,
                    found: *found,
                });
            }
        }
        match self.kind {
            ProviderKind::ContinuousPositiveProb => wrap_continuous(*value),
            kind => discrete_from_value(kind, *value).ok_or_else(|| SentimentError::InvalidLabel {
                label: value.to_string(),
                provider: kind,
            }),
        }
    }
}
