//! Newcomer / existing cohort labels.
//!
//! Two schemes: retrospective labeling against a calendar of ban events,
//! and rolling tenure measured in whole calendar months.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::events::{month_of, CommunityRef, InteractionEvent, MonthKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohortError {
    #[error("ban calendar dates must be strictly increasing")]
    UnorderedCalendar,
    #[error("unknown user")]
    UnknownUser,
    #[error("user first seen after the labeled month")]
    NotYetSeen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BanEvent {
    pub label: String,
    pub date: NaiveDate,
}

impl BanEvent {
    pub fn new(label: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            label: label.into(),
            date,
        }
    }

    /// First instant of the ban day, UTC epoch seconds.
    pub fn start_timestamp(&self) -> i64 {
        self.date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp()
    }

    pub fn month(&self) -> MonthKey {
        month_of(self.start_timestamp())
    }
}

/// Ordered ban events; dates strictly increasing. An empty calendar is
/// allowed and leaves every retrospective label undefined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BanCalendar {
    entries: Vec<BanEvent>,
}

impl BanCalendar {
    pub fn new(entries: Vec<BanEvent>) -> Result<Self, CohortError> {
        if entries.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(CohortError::UnorderedCalendar);
        }
        Ok(Self { entries })
    }

    /// The four Reddit bans that drove migration waves to Voat.
    pub fn reddit_voat() -> Self {
        let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).expect("valid date");
        Self {
            entries: alloc::vec![
                BanEvent::new("FPH", d(2015, 6, 10)),
                BanEvent::new("PG", d(2016, 11, 23)),
                BanEvent::new("GA", d(2018, 9, 12)),
                BanEvent::new("TD", d(2020, 6, 29)),
            ],
        }
    }

    pub fn entries(&self) -> &[BanEvent] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The most recent ban whose calendar month is not after `month`.
    /// The ban month belongs to the period the ban opens.
    pub fn governing_ban(&self, month: MonthKey) -> Option<&BanEvent> {
        self.entries.iter().rev().find(|b| b.month() <= month)
    }
}

/// Retrospective or rolling-tenure labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CohortLabel {
    Newcomer,
    Existing,
}

/// First-activity timestamp per (community, user).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FirstSeenIndex {
    first: BTreeMap<CommunityRef, BTreeMap<String, i64>>,
}

impl FirstSeenIndex {
    pub fn get(&self, community: &CommunityRef, user: &str) -> Option<i64> {
        self.first.get(community)?.get(user).copied()
    }

    /// All users of one community.
    pub fn community(&self, community: &CommunityRef) -> Option<&BTreeMap<String, i64>> {
        self.first.get(community)
    }

    pub fn len(&self) -> usize {
        self.first.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn observe(&mut self, community: &CommunityRef, user: &str, timestamp: i64) {
        let users = match self.first.get_mut(community) {
            Some(users) => users,
            None => self.first.entry(community.clone()).or_default(),
        };
        match users.get_mut(user) {
            Some(t) => *t = (*t).min(timestamp),
            None => {
                users.insert(String::from(user), timestamp);
            }
        }
    }

    /// Merges another partial index (min per key).
    pub fn merge(&mut self, other: FirstSeenIndex) {
        for (c, users) in other.first {
            for (u, t) in users {
                self.observe(&c, &u, t);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CommunityRef, &str, i64)> {
        self.first
            .iter()
            .flat_map(|(c, users)| users.iter().map(move |(u, t)| (c, u.as_str(), *t)))
    }
}

pub fn build_first_seen<'a>(events: impl IntoIterator<Item = &'a InteractionEvent>) -> FirstSeenIndex {
    let mut index = FirstSeenIndex::default();
    for ev in events {
        let community = CommunityRef::new(ev.platform, ev.community_id.as_str());
        index.observe(&community, &ev.user_id, ev.timestamp);
    }
    index
}

/// Retrospective label of `user` in `month`.
///
/// `Ok(None)` for months before the first calendar entry: cohorts are only
/// defined relative to a ban.
pub fn label_retrospective(
    user: &str,
    community: &CommunityRef,
    month: MonthKey,
    calendar: &BanCalendar,
    index: &FirstSeenIndex,
) -> Result<Option<CohortLabel>, CohortError> {
    let first = index.get(community, user).ok_or(CohortError::UnknownUser)?;
    label_retrospective_at(first, month, calendar)
}

/// Same as [`label_retrospective`] with the first-seen timestamp in hand.
pub fn label_retrospective_at(
    first_seen: i64,
    month: MonthKey,
    calendar: &BanCalendar,
) -> Result<Option<CohortLabel>, CohortError> {
    if first_seen >= month.succ().start_timestamp() {
        return Err(CohortError::NotYetSeen);
    }
    let Some(ban) = calendar.governing_ban(month) else {
        return Ok(None);
    };
    Ok(Some(if first_seen >= ban.start_timestamp() {
        CohortLabel::Newcomer
    } else {
        CohortLabel::Existing
    }))
}

pub const DEFAULT_TENURE_MONTHS: u32 = 6;

/// Rolling-tenure label: newcomer while fewer than `window_months` whole
/// calendar months have passed since the first-seen month.
pub fn label_rolling(
    user: &str,
    community: &CommunityRef,
    month: MonthKey,
    index: &FirstSeenIndex,
    window_months: u32,
) -> Result<CohortLabel, CohortError> {
    let first = index.get(community, user).ok_or(CohortError::UnknownUser)?;
    label_rolling_at(first, month, window_months)
}

pub fn label_rolling_at(first_seen: i64, month: MonthKey, window_months: u32) -> Result<CohortLabel, CohortError> {
    let tenure = month.months_since(month_of(first_seen));
    if tenure < 0 {
        return Err(CohortError::NotYetSeen);
    }
    Ok(if tenure < i64::from(window_months) {
        CohortLabel::Newcomer
    } else {
        CohortLabel::Existing
    })
}

/// Labeling scheme selected for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CohortScheme {
    Retrospective(BanCalendar),
    Rolling { window_months: u32 },
}

impl CohortScheme {
    pub fn label_at(&self, first_seen: i64, month: MonthKey) -> Result<Option<CohortLabel>, CohortError> {
        match self {
            CohortScheme::Retrospective(cal) => label_retrospective_at(first_seen, month, cal),
            CohortScheme::Rolling { window_months } => label_rolling_at(first_seen, month, *window_months).map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{EventKind, Platform};
    use alloc::string::ToString;

    fn ts(y: i32, m: u32, d: u32) -> i64 {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(12, 0, 0).unwrap().and_utc().timestamp()
    }

    fn mk(y: i32, m: u32) -> MonthKey {
        MonthKey::new(y, m).unwrap()
    }

    fn fph_pg() -> BanCalendar {
        BanCalendar::new(alloc::vec![
            BanEvent::new("FPH", NaiveDate::from_ymd_opt(2015, 6, 10).unwrap()),
            BanEvent::new("PG", NaiveDate::from_ymd_opt(2016, 11, 23).unwrap()),
        ])
        .unwrap()
    }

    fn ev(user: &str, community: &str, t: i64) -> InteractionEvent {
        InteractionEvent {
            event_id: alloc::format!("{user}-{community}-{t}"),
            user_id: user.to_string(),
            community_id: community.to_string(),
            platform: Platform::Receiver,
            kind: EventKind::Post,
            parent_post_id: None,
            timestamp: t,
            toxicity: None,
            sentiment: None,
        }
    }

    #[test]
    fn first_seen_is_minimum_per_community() {
        let events = [ev("u", "c", 100), ev("u", "c", 50), ev("u", "d", 70)];
        let index = build_first_seen(&events);
        assert_eq!(index.len(), 2);
        assert_eq!(index.get(&CommunityRef::new(Platform::Receiver, "c"), "u"), Some(50));
        assert_eq!(index.get(&CommunityRef::new(Platform::Receiver, "d"), "u"), Some(70));
        assert!(build_first_seen(&[]).is_empty());
    }

    #[test]
    fn retrospective_worked_examples() {
        let cal = fph_pg();
        let aug15 = ts(2015, 8, 15);
        assert_eq!(label_retrospective_at(aug15, mk(2016, 9), &cal), Ok(Some(CohortLabel::Newcomer)));
        assert_eq!(label_retrospective_at(aug15, mk(2017, 1), &cal), Ok(Some(CohortLabel::Existing)));
        assert_eq!(
            label_retrospective_at(ts(2015, 1, 5), mk(2015, 9), &cal),
            Ok(Some(CohortLabel::Existing))
        );
        assert_eq!(label_retrospective_at(ts(2015, 1, 5), mk(2015, 3), &cal), Ok(None));
    }

    #[test]
    fn ban_month_splits_on_ban_date() {
        let cal = fph_pg();
        // Within June 2015: before the ban day is existing, on/after is newcomer.
        assert_eq!(
            label_retrospective_at(ts(2015, 6, 9), mk(2015, 6), &cal),
            Ok(Some(CohortLabel::Existing))
        );
        assert_eq!(
            label_retrospective_at(ts(2015, 6, 10), mk(2015, 6), &cal),
            Ok(Some(CohortLabel::Newcomer))
        );
        assert_eq!(label_retrospective_at(ts(2015, 7, 2), mk(2015, 6), &cal), Err(CohortError::NotYetSeen));
    }

    #[test]
    fn retrospective_unknown_user() {
        let index = FirstSeenIndex::default();
        let c = CommunityRef::new(Platform::Receiver, "c");
        assert_eq!(
            label_retrospective("ghost", &c, mk(2016, 1), &fph_pg(), &index),
            Err(CohortError::UnknownUser)
        );
        assert_eq!(label_rolling("ghost", &c, mk(2016, 1), &index, 6), Err(CohortError::UnknownUser));
    }

    #[test]
    fn rolling_tenure_boundaries() {
        let jan18 = ts(2018, 1, 20);
        assert_eq!(label_rolling_at(jan18, mk(2018, 4), 6), Ok(CohortLabel::Newcomer));
        assert_eq!(label_rolling_at(jan18, mk(2018, 7), 6), Ok(CohortLabel::Existing));
        assert_eq!(label_rolling_at(jan18, mk(2018, 1), 6), Ok(CohortLabel::Newcomer));
        assert_eq!(label_rolling_at(jan18, mk(2017, 12), 6), Err(CohortError::NotYetSeen));
    }

    #[test]
    fn calendar_must_increase() {
        let d = NaiveDate::from_ymd_opt(2015, 6, 10).unwrap();
        assert_eq!(
            BanCalendar::new(alloc::vec![BanEvent::new("a", d), BanEvent::new("b", d)]),
            Err(CohortError::UnorderedCalendar)
        );
        assert_eq!(BanCalendar::reddit_voat().entries().len(), 4);
    }

    #[test]
    fn retrospective_labels_are_monotone() {
        let cal = BanCalendar::reddit_voat();
        for first in [ts(2014, 3, 1), ts(2015, 6, 10), ts(2016, 12, 1), ts(2018, 9, 30), ts(2020, 7, 1)] {
            let mut existing = false;
            let mut newcomer_periods = alloc::collections::BTreeSet::new();
            for m in MonthKey::range_inclusive(month_of(first), mk(2020, 12)) {
                let label = label_retrospective_at(first, m, &cal).unwrap();
                if existing {
                    assert_eq!(label, Some(CohortLabel::Existing));
                }
                match label {
                    Some(CohortLabel::Existing) => existing = true,
                    Some(CohortLabel::Newcomer) => {
                        newcomer_periods.insert(cal.governing_ban(m).unwrap().label.clone());
                    }
                    None => {}
                }
            }
            assert!(newcomer_periods.len() <= 1);
        }
    }
}
