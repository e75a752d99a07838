//! Dynamic interaction-based reputation.
//!
//! Each interaction adds a streak-dependent increment
//! `I(A) = I_b + I_b * alpha * (1 - 1 / (A + 1))` on top of the previous
//! value decayed by `beta` per elapsed decay unit. `A` counts consecutive
//! interactions since the last inactivity gap.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::events::{day_of, month_of, MonthKey, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReputationError {
    #[error("non-chronological user stream: {at} after {last}")]
    OutOfOrder { last: i64, at: i64 },
    #[error("invalid reputation parameters: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReputationParams {
    /// `I_b`
    pub base_increment: f64,
    /// `alpha`
    pub streak_gain: f64,
    /// `beta`, per decay unit.
    pub forgetting: f64,
    /// Gaps longer than this (seconds) reset the streak.
    pub gap_threshold_secs: i64,
    /// Length of one decay step in seconds.
    pub decay_unit_secs: i64,
}

impl Default for ReputationParams {
    fn default() -> Self {
        Self {
            base_increment: 1.0,
            streak_gain: 2.0,
            forgetting: 0.96,
            gap_threshold_secs: SECONDS_PER_DAY,
            decay_unit_secs: SECONDS_PER_DAY,
        }
    }
}

impl ReputationParams {
    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ReputationError> {
        if !(self.base_increment > 0.0) {
            return Err(ReputationError::BadParams("base_increment must be > 0"));
        }
        if !(self.streak_gain >= 0.0) {
            return Err(ReputationError::BadParams("streak_gain must be >= 0"));
        }
        if !(self.forgetting > 0.0 && self.forgetting < 1.0) {
            return Err(ReputationError::BadParams("forgetting must lie in (0, 1)"));
        }
        if self.gap_threshold_secs < 0 {
            return Err(ReputationError::BadParams("gap_threshold must be >= 0"));
        }
        if self.decay_unit_secs <= 0 {
            return Err(ReputationError::BadParams("decay_unit must be > 0"));
        }
        Ok(())
    }

    /// Least upper bound of [`increment`], `I_b * (1 + alpha)`.
    pub fn increment_supremum(&self) -> f64 {
        self.base_increment * (1.0 + self.streak_gain)
    }

    fn decay(&self, units: i64) -> f64 {
        libm::pow(self.forgetting, units as f64)
    }
}

/// Streak-dependent increment for streak length `streak`.
pub fn increment(streak: u64, params: &ReputationParams) -> f64 {
    let ib = params.base_increment;
    ib + ib * params.streak_gain * (1.0 - 1.0 / (streak as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReputationState {
    pub value: f64,
    pub streak: u64,
    pub last_time: Option<i64>,
}

/// Applies one interaction at time `t`.
pub fn update(state: &ReputationState, t: i64, params: &ReputationParams) -> Result<ReputationState, ReputationError> {
    let (elapsed, streak) = match state.last_time {
        None => (0, 0),
        Some(last) if t < last => return Err(ReputationError::OutOfOrder { last, at: t }),
        Some(last) => {
            let delta = t - last;
            let streak = if delta <= params.gap_threshold_secs { state.streak + 1 } else { 0 };
            (delta, streak)
        }
    };
    let decayed = state.value * params.decay(elapsed.div_euclid(params.decay_unit_secs));
    Ok(ReputationState {
        value: decayed + increment(streak, params),
        streak,
        last_time: Some(t),
    })
}

/// Day-by-day reputation readout of one user's stream.
///
/// The reported value on a day is the state after that day's interactions,
/// decayed by the whole decay units between the last interaction day and
/// the reported day. Days before the first interaction read 0.
#[derive(Debug, Clone)]
pub struct DailyTrack<'a> {
    timestamps: &'a [i64],
    next: usize,
    state: ReputationState,
    last_event_day: Option<i64>,
    params: ReputationParams,
    cursor: Option<i64>,
}

impl<'a> DailyTrack<'a> {
    pub fn new(timestamps: &'a [i64], params: ReputationParams) -> Result<Self, ReputationError> {
        if let Some(w) = timestamps.windows(2).find(|w| w[1] < w[0]) {
            return Err(ReputationError::OutOfOrder { last: w[0], at: w[1] });
        }
        Ok(Self {
            timestamps,
            next: 0,
            state: ReputationState::default(),
            last_event_day: None,
            params,
            cursor: None,
        })
    }

    /// Value at the end of `day`. Days must be requested in non-decreasing
    /// order.
    pub fn value_on(&mut self, day: i64) -> f64 {
        debug_assert!(self.cursor.is_none_or(|c| day >= c), "days must not go backwards");
        self.cursor = Some(day);
        while let Some(&t) = self.timestamps.get(self.next) {
            if day_of(t) > day {
                break;
            }
            self.state = update(&self.state, t, &self.params).expect("stream checked sorted");
            self.last_event_day = Some(day_of(t));
            self.next += 1;
        }
        match self.last_event_day {
            None => 0.0,
            Some(last_day) => {
                let units = ((day - last_day) * SECONDS_PER_DAY).div_euclid(self.params.decay_unit_secs);
                self.state.value * self.params.decay(units)
            }
        }
    }

    pub fn first_event_day(&self) -> Option<i64> {
        self.timestamps.first().map(|&t| day_of(t))
    }

    /// Day of the next interaction not yet folded into the state.
    pub fn next_event_day(&self) -> Option<i64> {
        self.timestamps.get(self.next).map(|&t| day_of(t))
    }

    pub fn state(&self) -> &ReputationState {
        &self.state
    }
}

/// Daily readout over the inclusive day range `[first_day, last_day]`.
pub fn daily_reputation(
    timestamps: &[i64],
    params: &ReputationParams,
    first_day: i64,
    last_day: i64,
) -> Result<Vec<f64>, ReputationError> {
    params.validate()?;
    let mut track = DailyTrack::new(timestamps, *params)?;
    Ok((first_day..=last_day).map(|d| track.value_on(d)).collect())
}

/// Mean over days of the mean over users whose value that day is at least
/// `activity_floor`. Each inner slice holds one user's values for the same
/// days. Days without a qualifying user are skipped; `None` if none qualify.
pub fn community_monthly_mean(per_user_daily: &[&[f64]], activity_floor: f64) -> Option<f64> {
    let days = per_user_daily.iter().map(|v| v.len()).max().unwrap_or(0);
    let mut sum_of_means = 0.0;
    let mut counted_days = 0usize;
    for d in 0..days {
        let (s, n) = per_user_daily
            .iter()
            .filter_map(|v| v.get(d).copied())
            .filter(|&v| v >= activity_floor)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n > 0 {
            sum_of_means += s / n as f64;
            counted_days += 1;
        }
    }
    (counted_days > 0).then(|| sum_of_means / counted_days as f64)
}

/// Thresholds applied when summarising a community month.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReputationThresholds {
    /// Daily values at or above this count toward the daily mean.
    pub activity_floor: f64,
    /// Active users whose mean monthly value strictly exceeds this are
    /// counted as reputation-active.
    pub active_above: f64,
}

impl Default for ReputationThresholds {
    fn default() -> Self {
        Self {
            activity_floor: 1.0,
            active_above: 1.0,
        }
    }
}

/// Monthly reputation summary of one community.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyReputation {
    pub month: MonthKey,
    /// Mean of daily means over qualifying users.
    pub mean: Option<f64>,
    /// Active users whose mean monthly value is `>= activity_floor`.
    pub qualifying_active_users: usize,
    /// Active users whose mean monthly value is `> active_above`.
    pub reputation_active_users: usize,
}

/// One day of the community's qualifying-user readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyMean {
    pub day: i64,
    pub mean: f64,
    pub qualifying_users: usize,
}

/// Streams users of one community into per-day qualifying sums and
/// per-month activity counts.
#[derive(Debug, Clone)]
pub struct CommunityReputation {
    params: ReputationParams,
    thresholds: ReputationThresholds,
    last_day: i64,
    daily: BTreeMap<i64, (f64, usize)>,
    qualifying: BTreeMap<MonthKey, usize>,
    above: BTreeMap<MonthKey, usize>,
}

impl CommunityReputation {
    /// Tracks users up to and including `last_day`.
    pub fn new(params: ReputationParams, thresholds: ReputationThresholds, last_day: i64) -> Result<Self, ReputationError> {
        params.validate()?;
        Ok(Self {
            params,
            thresholds,
            last_day,
            daily: BTreeMap::new(),
            qualifying: BTreeMap::new(),
            above: BTreeMap::new(),
        })
    }

    /// Adds one user's sorted interaction timestamps.
    pub fn add_user(&mut self, timestamps: &[i64]) -> Result<(), ReputationError> {
        let mut track = DailyTrack::new(timestamps, self.params)?;
        let Some(first_day) = track.first_event_day() else {
            return Ok(());
        };
        let active: BTreeSet<MonthKey> = timestamps.iter().map(|&t| month_of(t)).collect();
        let floor = self.thresholds.activity_floor;
        let mut day = first_day;
        let mut month = month_of(day * SECONDS_PER_DAY);
        let mut month_sum = 0.0;
        while day <= self.last_day {
            let value = track.value_on(day);
            if value >= floor {
                let slot = self.daily.entry(day).or_insert((0.0, 0));
                slot.0 += value;
                slot.1 += 1;
            }
            let in_active_month = active.contains(&month);
            if in_active_month {
                month_sum += value;
            }
            let next = day + 1;
            let next_month = month_of(next * SECONDS_PER_DAY);
            if next_month != month {
                if in_active_month {
                    self.close_month(month, month_sum / month.days() as f64);
                }
                month_sum = 0.0;
                month = next_month;
            }
            day = next;
            // Below the floor and outside active months nothing is recorded
            // until the next interaction's month.
            if value < floor && !active.contains(&month) {
                match track.next_event_day() {
                    Some(next_event) => {
                        let target = month_of(next_event * SECONDS_PER_DAY);
                        if target > month {
                            month = target;
                            day = target.first_day_index();
                        }
                    }
                    None => break,
                }
            }
        }
        // A month cut short by `last_day` is closed on the days it had.
        if day > self.last_day && active.contains(&month) && month.first_day_index() <= self.last_day {
            let covered = self.last_day - month.first_day_index() + 1;
            if covered < month.days() {
                self.close_month(month, month_sum / covered as f64);
            }
        }
        Ok(())
    }

    fn close_month(&mut self, month: MonthKey, user_mean: f64) {
        if user_mean >= self.thresholds.activity_floor {
            *self.qualifying.entry(month).or_insert(0) += 1;
        }
        if user_mean > self.thresholds.active_above {
            *self.above.entry(month).or_insert(0) += 1;
        }
    }

    pub fn daily_means(&self) -> Vec<DailyMean> {
        self.daily
            .iter()
            .map(|(&day, &(s, n))| DailyMean {
                day,
                mean: s / n as f64,
                qualifying_users: n,
            })
            .collect()
    }

    pub fn monthly(&self, month: MonthKey) -> MonthlyReputation {
        let lo = month.first_day_index();
        let hi = month.succ().first_day_index();
        let (sum, days) = self
            .daily
            .range(lo..hi)
            .fold((0.0, 0usize), |(s, d), (_, &(v, n))| (s + v / n as f64, d + 1));
        MonthlyReputation {
            month,
            mean: (days > 0).then(|| sum / days as f64),
            qualifying_active_users: self.qualifying.get(&month).copied().unwrap_or(0),
            reputation_active_users: self.above.get(&month).copied().unwrap_or(0),
        }
    }
}
