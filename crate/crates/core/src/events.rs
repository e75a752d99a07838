//! Interaction events, calendar months and ingestion bookkeeping.
//!
//! Parsing of concrete encodings (JSONL, CSV) lives in the std companion
//! crate; this module owns the schema, its invariants and the reason codes
//! a row can be rejected with.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate};

/// Seconds in one UTC day.
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Which side of a migration a community lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Platform {
    Source,
    Receiver,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Source => "source",
            Platform::Receiver => "receiver",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = RejectReason;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source" => Ok(Platform::Source),
            "receiver" => Ok(Platform::Receiver),
            _ => Err(RejectReason::BadPlatform),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EventKind {
    Post,
    Comment,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Post => "post",
            EventKind::Comment => "comment",
        }
    }
}

impl FromStr for EventKind {
    type Err = RejectReason;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "post" => Ok(EventKind::Post),
            "comment" => Ok(EventKind::Comment),
            _ => Err(RejectReason::BadKind),
        }
    }
}

/// A community on one platform. Identical community ids on different
/// platforms are distinct communities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommunityRef {
    pub platform: Platform,
    pub community_id: String,
}

impl CommunityRef {
    pub fn new(platform: Platform, community_id: impl Into<String>) -> Self {
        Self {
            platform,
            community_id: community_id.into(),
        }
    }
}

impl fmt::Display for CommunityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.platform, self.community_id)
    }
}

/// One post or comment.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub event_id: String,
    pub user_id: String,
    pub community_id: String,
    pub platform: Platform,
    pub kind: EventKind,
    /// Required for comments, absent for posts.
    pub parent_post_id: Option<String>,
    /// UTC epoch seconds.
    pub timestamp: i64,
    /// Precomputed classifier probability in `[0, 1]`; `None` means unscored.
    pub toxicity: Option<f64>,
    /// Carried through untouched, `[-1, 1]`.
    pub sentiment: Option<f64>,
}

impl InteractionEvent {
    /// Checks the schema invariants, returning the first violated one.
    pub fn check(&self) -> Result<(), RejectReason> {
        if self.event_id.is_empty() || self.user_id.is_empty() || self.community_id.is_empty() {
            return Err(RejectReason::MissingField);
        }
        match (self.kind, &self.parent_post_id) {
            (EventKind::Comment, None) => return Err(RejectReason::MissingParent),
            (EventKind::Comment, Some(p)) if p.is_empty() => return Err(RejectReason::MissingParent),
            (EventKind::Post, Some(_)) => return Err(RejectReason::UnexpectedParent),
            _ => {}
        }
        if DateTime::from_timestamp(self.timestamp, 0).is_none() {
            return Err(RejectReason::BadTimestamp);
        }
        if let Some(t) = self.toxicity {
            if !(0.0..=1.0).contains(&t) {
                return Err(RejectReason::ToxicityOutOfRange);
            }
        }
        if let Some(s) = self.sentiment {
            if !(-1.0..=1.0).contains(&s) {
                return Err(RejectReason::SentimentOutOfRange);
            }
        }
        Ok(())
    }

    pub fn community(&self) -> CommunityRef {
        CommunityRef::new(self.platform, self.community_id.clone())
    }

    pub fn in_community(&self, community: &CommunityRef) -> bool {
        self.platform == community.platform && self.community_id == community.community_id
    }

    pub fn month(&self) -> MonthKey {
        month_of(self.timestamp)
    }
}

/// A UTC calendar month. Ordering follows the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthKey {
    year: i32,
    month: u8,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self, MonthError> {
        if !(1..=12).contains(&month) {
            return Err(MonthError::MonthOutOfRange(month));
        }
        Ok(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        u32::from(self.month)
    }

    /// Months since year 0, January; consecutive months differ by one.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    pub fn succ(self) -> Self {
        self.offset(1)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: MonthKey) -> i64 {
        self.ordinal() - earlier.ordinal()
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month(), 1).expect("valid month")
    }

    /// Epoch seconds of the first instant of the month.
    pub fn start_timestamp(self) -> i64 {
        self.first_day().and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp()
    }

    /// First UTC day index (days since the epoch) of this month.
    pub fn first_day_index(self) -> i64 {
        self.start_timestamp().div_euclid(SECONDS_PER_DAY)
    }

    pub fn days(self) -> i64 {
        self.succ().first_day_index() - self.first_day_index()
    }

    /// Inclusive month range `[from, to]`.
    pub fn range_inclusive(from: MonthKey, to: MonthKey) -> impl Iterator<Item = MonthKey> {
        (from.ordinal()..=to.ordinal()).map(MonthKey::from_ordinal)
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = MonthError;

    /// Parses `YYYY-MM`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or(MonthError::Syntax)?;
        let year: i32 = y.trim().parse().map_err(|_| MonthError::Syntax)?;
        let month: u32 = m.trim().parse().map_err(|_| MonthError::Syntax)?;
        MonthKey::new(year, month)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for MonthKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for MonthKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonthError {
    #[error("month {0} outside 1..=12")]
    MonthOutOfRange(u32),
    #[error("expected YYYY-MM")]
    Syntax,
}

/// UTC calendar month containing the instant `timestamp` (epoch seconds).
pub fn month_of(timestamp: i64) -> MonthKey {
    let dt = DateTime::from_timestamp(timestamp, 0).expect("timestamp within chrono range");
    MonthKey {
        year: dt.year(),
        month: dt.month() as u8,
    }
}

/// UTC day index (days since 1970-01-01) containing `timestamp`.
pub fn day_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

/// Why an input row was not accepted. Every rejected row carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, thiserror::Error)]
pub enum RejectReason {
    #[error("row is not a well-formed record")]
    Malformed,
    #[error("required field missing or empty")]
    MissingField,
    #[error("comment without parent_post_id")]
    MissingParent,
    #[error("post with parent_post_id")]
    UnexpectedParent,
    #[error("timestamp does not parse to a UTC instant")]
    BadTimestamp,
    #[error("toxicity outside [0, 1]")]
    ToxicityOutOfRange,
    #[error("sentiment outside [-1, 1]")]
    SentimentOutOfRange,
    #[error("unknown platform")]
    BadPlatform,
    #[error("unknown kind")]
    BadKind,
    #[error("numeric field does not parse")]
    BadNumber,
    #[error("event_id seen earlier in the input")]
    DuplicateId,
}

impl RejectReason {
    /// Stable reason code used in reports.
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::MissingField => "missing_field",
            RejectReason::MissingParent => "missing_parent",
            RejectReason::UnexpectedParent => "unexpected_parent",
            RejectReason::BadTimestamp => "bad_timestamp",
            RejectReason::ToxicityOutOfRange => "toxicity_out_of_range",
            RejectReason::SentimentOutOfRange => "sentiment_out_of_range",
            RejectReason::BadPlatform => "bad_platform",
            RejectReason::BadKind => "bad_kind",
            RejectReason::BadNumber => "bad_number",
            RejectReason::DuplicateId => "duplicate_id",
        }
    }
}

/// One rejected row, 1-based data row number.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Rejection {
    pub row: usize,
    pub reason: &'static str,
}

/// Row accounting for one ingestion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValidationReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    /// Reason code -> count.
    pub rejection_reasons: BTreeMap<&'static str, usize>,
    /// Individual rejections in row order.
    pub rejections: Vec<Rejection>,
}

impl ValidationReport {
    pub fn accept(&mut self) {
        self.rows_read += 1;
        self.rows_accepted += 1;
    }

    pub fn reject(&mut self, row: usize, reason: RejectReason) {
        self.rows_read += 1;
        self.rows_rejected += 1;
        *self.rejection_reasons.entry(reason.code()).or_insert(0) += 1;
        self.rejections.push(Rejection {
            row,
            reason: reason.code(),
        });
    }

    /// Folds another file's report into this one.
    pub fn merge(&mut self, other: ValidationReport) {
        self.rows_read += other.rows_read;
        self.rows_accepted += other.rows_accepted;
        self.rows_rejected += other.rows_rejected;
        for (code, n) in other.rejection_reasons {
            *self.rejection_reasons.entry(code).or_insert(0) += n;
        }
        self.rejections.extend(other.rejections);
    }

    pub fn is_clean(&self) -> bool {
        self.rows_rejected == 0
    }
}

/// Streaming acceptance gate: schema check followed by first-wins dedup.
#[derive(Debug, Default)]
pub struct EventGate {
    seen: alloc::collections::BTreeSet<String>,
    report: ValidationReport,
}

impl EventGate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Offers a parsed row (or its parse failure). Returns the event when it
    /// is accepted.
    pub fn offer(
        &mut self,
        row: usize,
        parsed: Result<InteractionEvent, RejectReason>,
    ) -> Result<InteractionEvent, RejectReason> {
        let outcome = parsed.and_then(|ev| {
            ev.check()?;
            if self.seen.contains(&ev.event_id) {
                return Err(RejectReason::DuplicateId);
            }
            self.seen.insert(ev.event_id.clone());
            Ok(ev)
        });
        match &outcome {
            Ok(_) => self.report.accept(),
            Err(reason) => self.report.reject(row, *reason),
        }
        outcome
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn into_report(self) -> ValidationReport {
        self.report
    }
}
