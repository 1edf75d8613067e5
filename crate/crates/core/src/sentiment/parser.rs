use std::sync::atomic::{AtomicU64, Ordering};

use super::DiscreteLabel;

/// Maps free-text LLM verdicts onto [`DiscreteLabel`]s.
///
/// Matching is case-insensitive substring search over configured keyword
/// lists; the keyword occurring earliest in the response wins. Responses
/// with no keyword become `NotSure` and bump the unmatched tally.
#[derive(Debug)]
pub struct ResponseParser {
    good: Vec<String>,
    bad: Vec<String>,
    not_sure: Vec<String>,
    unmatched: AtomicU64,
}

impl Default for ResponseParser {
    fn default() -> Self {
        ResponseParser::new(&["GOOD NEWS"], &["BAD NEWS"], &["NOT SURE"])
    }
}

impl Clone for ResponseParser {
    fn clone(&self) -> Self {
        ResponseParser {
            good: self.good.clone(),
            bad: self.bad.clone(),
            not_sure: self.not_sure.clone(),
            unmatched: AtomicU64::new(self.unmatched()),
        }
    }
}

impl ResponseParser {
    pub fn new(good: &[&str], bad: &[&str], not_sure: &[&str]) -> Self {
        let norm = |list: &[&str]| -> Vec<String> {
            list.iter()
                .map(|k| k.trim().to_uppercase())
                .filter(|k| !k.is_empty())
                .collect()
        };
        ResponseParser {
            good: norm(good),
            bad: norm(bad),
            not_sure: norm(not_sure),
            unmatched: AtomicU64::new(0),
        }
    }

    /// Returns the verdict, or `None` when no keyword matched. Does not
    /// touch the tally.
    pub fn classify(&self, raw: &str) -> Option<DiscreteLabel> {
        let text = raw.to_uppercase();
        let mut best: Option<(usize, std::cmp::Reverse<usize>, DiscreteLabel)> = None;
        let lists = [
            (&self.not_sure, DiscreteLabel::NotSure),
            (&self.good, DiscreteLabel::Good),
            (&self.bad, DiscreteLabel::Bad),
        ];
        for (keywords, label) in lists {
            for kw in keywords {
                if let Some(pos) = text.find(kw.as_str()) {
                    // Earliest match wins; at equal position the longer keyword.
                    let key = (pos, std::cmp::Reverse(kw.len()), label);
                    if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                        best = Some(key);
                    }
                }
            }
        }
        best.map(|b| b.2)
    }

    pub fn parse(&self, raw: &str) -> DiscreteLabel {
        match self.classify(raw) {
            Some(label) => label,
            None => {
                self.unmatched.fetch_add(1, Ordering::Relaxed);
                DiscreteLabel::NotSure
            }
        }
    }

    /// Responses that matched no keyword so far.
    pub fn unmatched(&self) -> u64 {
        self.unmatched.load(Ordering::Relaxed)
    }
}

/// Parses with the default GOOD NEWS / BAD NEWS / NOT SURE keywords.
pub fn parse_prompt_response(raw: &str) -> DiscreteLabel {
    ResponseParser::default().classify(raw).unwrap_or(DiscreteLabel::NotSure)
}
