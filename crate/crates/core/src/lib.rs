//! Allocation-only core of a cohort-aware reply-network analytics engine.
//!
//! Everything here is a pure function of in-memory data: event schema and
//! month bucketing, cohort labels, monthly reply graphs and their structural
//! metrics, dynamic reputation, toxicity and series aggregation, single-break
//! segmented regression with a residual bootstrap, and a seeded scenario
//! generator. Parsing, file formats and orchestration live in the
//! `cohortnet` crate.

#![no_std]

extern crate alloc;

pub mod breakpoints;
pub mod cohorts;
pub mod events;
pub mod graphs;
pub mod netmetrics;
pub mod reputation;
pub mod series;
pub mod stats;
pub mod synth;

pub use events::{CommunityRef, EventKind, InteractionEvent, MonthKey, Platform};
