//! Back-testing toolkit for news sentiment factors on A-share equities.
//!
//! The pipeline runs in stages, each in its own module:
//! [`ingest`] loads news, prices and the benchmark; [`sentiment`] turns each
//! news item into a normalized score; [`factor`] averages scores into a daily
//! per-stock factor and ranks it; [`engine`] simulates the long-only
//! portfolio; [`metrics`] and [`report`] summarize the result.
//! [`pipeline`] ties the stages together behind a config file and
//! [`fixture`] generates synthetic datasets with a planted signal.

pub mod engine;
pub mod factor;
pub mod fixture;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod sentiment;
