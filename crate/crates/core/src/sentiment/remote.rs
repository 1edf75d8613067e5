//! Remote model client, independent of any particular transport.
//!
//! The crate ships no network transport. Callers plug one in through
//! [`Transport`]; tests use [`CannedTransport`].

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::provider::{interpret, ScoreProvider};
use super::{ProviderKind, ResponseParser, SentimentError, SentimentScore};
use crate::model::{NewsPayload, NewsRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retriable: bool,
}

impl TransportError {
    pub fn retriable(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retriable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retriable: false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, endpoint: &str, prompt: &str, timeout: Duration) -> Result<String, TransportError>;
}

/// Sends each news text to a remote model and parses the reply.
pub struct RemoteProvider<T> {
    kind: ProviderKind,
    config: RemoteConfig,
    transport: T,
    parser: ResponseParser,
}

impl<T: Transport> RemoteProvider<T> {
    pub fn new(kind: ProviderKind, config: RemoteConfig, transport: T) -> Self {
        RemoteProvider {
            kind,
            config,
            transport,
            parser: ResponseParser::default(),
        }
    }

    pub fn with_parser(mut self, parser: ResponseParser) -> Self {
        self.parser = parser;
        self
    }

    pub fn parser(&self) -> &ResponseParser {
        &self.parser
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn prompt(&self, record: &NewsRecord, text: &str) -> String {
        match self.kind {
            ProviderKind::DiscreteThreeClass => format!(
                "Read the news summary about {} below. Reply GOOD NEWS, BAD NEWS or NOT SURE \
                 for the company's stock, then give a short reason.\n\n{}",
                record.stock, text
            ),
            ProviderKind::DiscreteClassifier => text.to_string(),
            ProviderKind::ContinuousPositiveProb => text.to_string(),
        }
    }
}

impl<T: Transport> ScoreProvider for RemoteProvider<T> {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn score(&self, record: &NewsRecord) -> Result<SentimentScore, SentimentError> {
        let NewsPayload::Text(text) = &record.payload else {
            return Err(SentimentError::MissingText {
                news_id: record.news_id.clone(),
            });
        };
        let prompt = self.prompt(record, text);
        let timeout = Duration::from_secs(self.config.timeout_secs);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.transport.complete(&self.config.endpoint, &prompt, timeout) {
                Ok(reply) => return interpret(self.kind, &reply, &self.parser),
                Err(e) if e.retriable && attempts <= self.config.max_retries => continue,
                Err(e) => {
                    return Err(SentimentError::Transport {
                        news_id: record.news_id.clone(),
                        attempts,
                        message: e.message,
                    })
                }
            }
        }
    }
}

/// Test double replaying queued replies in order.
#[derive(Debug, Default)]
pub struct CannedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    prompts: Mutex<Vec<String>>,
}

impl CannedTransport {
    pub fn new<I>(replies: I) -> Self
    where
        I: IntoIterator<Item = Result<String, TransportError>>,
    {
        CannedTransport {
            replies: Mutex::new(replies.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Prompts received so far.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("poisoned").clone()
    }
}

impl Transport for CannedTransport {
    fn complete(&self, _endpoint: &str, prompt: &str, _timeout: Duration) -> Result<String, TransportError> {
        self.prompts.lock().expect("poisoned").push(prompt.to_string());
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::fatal("no canned reply left")))
    }
}
