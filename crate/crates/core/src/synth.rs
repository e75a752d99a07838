//! Synthetic corpora with planted cohort-mixing regimes.
//!
//! One community is simulated month by month. An existing pool arrives in
//! the first month; each regime opens with a ban on day 1 of its month and
//! a newcomer wave that arrives during that month. Under retrospective
//! labeling the current wave is the newcomer cohort and everyone who
//! arrived earlier is existing, which is exactly how the generator assigns
//! cohorts when it draws comment targets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Beta, Distribution, Poisson};

use crate::cohorts::{BanCalendar, BanEvent, CohortLabel};
use crate::events::{EventKind, InteractionEvent, MonthKey, Platform};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

/// Toxicity distribution given by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaParams {
    pub mean: f64,
    pub sd: f64,
}

impl BetaParams {
    pub fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    fn sampler(&self, what: &str) -> Result<ToxicityDraw, SynthError> {
        let (m, s) = (self.mean, self.sd);
        if !(0.0..=1.0).contains(&m) || !s.is_finite() || s < 0.0 {
            return Err(SynthError::Invalid(format!("{what}: mean must be in [0,1] and sd >= 0")));
        }
        if s == 0.0 {
            return Ok(ToxicityDraw::Constant(m));
        }
        let var = s * s;
        if var >= m * (1.0 - m) {
            return Err(SynthError::Invalid(format!("{what}: sd {s} too large for mean {m}")));
        }
        let kappa = m * (1.0 - m) / var - 1.0;
        let beta = Beta::new(m * kappa, (1.0 - m) * kappa)
            .map_err(|e| SynthError::Invalid(format!("{what}: {e}")))?;
        Ok(ToxicityDraw::Beta(beta))
    }
}

#[derive(Debug, Clone, Copy)]
enum ToxicityDraw {
    Constant(f64),
    Beta(Beta<f64>),
}

impl ToxicityDraw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ToxicityDraw::Constant(v) => *v,
            ToxicityDraw::Beta(b) => b.sample(rng).clamp(0.0, 1.0),
        }
    }
}

/// One ban period.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Regime {
    pub ban_month: MonthKey,
    /// Probability that a reply crosses cohorts.
    pub p_cross: f64,
    pub newcomer_toxicity: BetaParams,
    pub existing_toxicity: BetaParams,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub community_id: String,
    pub platform: Platform,
    pub start: MonthKey,
    pub months: usize,
    pub existing_pool: usize,
    pub newcomer_wave_size: usize,
    pub posts_per_month: usize,
    pub comments_per_post: f64,
    /// Toxicity before the first ban.
    pub baseline_toxicity: BetaParams,
    pub regimes: Vec<Regime>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn last_month(&self) -> MonthKey {
        self.start.offset(self.months as i64 - 1)
    }

    pub fn ban_months(&self) -> Vec<MonthKey> {
        self.regimes.iter().map(|r| r.ban_month).collect()
    }

    /// Ban calendar matching the planted regimes (bans on day 1).
    pub fn calendar(&self) -> BanCalendar {
        let bans = self
            .regimes
            .iter()
            .enumerate()
            .map(|(i, r)| BanEvent::new(format!("ban{}", i + 1), r.ban_month.first_day()))
            .collect();
        BanCalendar::new(bans).expect("validated regimes are increasing")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: &str| Err(SynthError::Invalid(m.into()));
        if self.months == 0 {
            return invalid("months must be positive");
        }
        if self.existing_pool < 2 {
            return invalid("existing_pool must be at least 2");
        }
        if self.posts_per_month < 4 {
            return invalid("posts_per_month must be at least 4");
        }
        if !self.comments_per_post.is_finite() || self.comments_per_post < 0.0 {
            return invalid("comments_per_post must be a non-negative rate");
        }
        self.baseline_toxicity.sampler("baseline_toxicity")?;
        let mut prev = self.start;
        for (i, r) in self.regimes.iter().enumerate() {
            if r.ban_month <= prev || r.ban_month > self.last_month() {
                return Err(SynthError::Invalid(format!(
                    "regime {} ban month {} must be after {} and within the scenario",
                    i + 1,
                    r.ban_month,
                    prev
                )));
            }
            prev = r.ban_month;
            if !(0.0..=1.0).contains(&r.p_cross) {
                return Err(SynthError::Invalid(format!("regime {} p_cross outside [0,1]", i + 1)));
            }
            r.newcomer_toxicity.sampler("newcomer_toxicity")?;
            r.existing_toxicity.sampler("existing_toxicity")?;
            if self.newcomer_wave_size == 0 && r.p_cross > 0.0 {
                return Err(SynthError::Infeasible(format!(
                    "regime {} has p_cross {} but no newcomer cohort",
                    i + 1,
                    r.p_cross
                )));
            }
        }
        if self.newcomer_wave_size == 1 && !self.regimes.is_empty() {
            return Err(SynthError::Infeasible(
                "within-cohort replies need at least two newcomers per wave".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeTruth {
    pub ban_month: MonthKey,
    pub p_cross: f64,
    pub expected_ei: f64,
    pub expected_toxicity: f64,
}

/// Cohort sizes of everyone who has arrived by `month`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RosterMonth {
    pub month: MonthKey,
    /// 0 before the first ban.
    pub regime: usize,
    pub newcomers: usize,
    pub existing: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    /// Start of the second regime, when there is one.
    pub planted_break: Option<MonthKey>,
    pub regimes: Vec<RegimeTruth>,
    pub roster: Vec<RosterMonth>,
}

impl GroundTruth {
    pub fn expected_ei(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.expected_ei).collect()
    }

    pub fn expected_toxicity(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.expected_toxicity).collect()
    }

    /// Expected E-I in `month`; `None` before the first ban.
    pub fn expected_ei_at(&self, month: MonthKey) -> Option<f64> {
        self.regimes.iter().rev().find(|r| r.ban_month <= month).map(|r| r.expected_ei)
    }
}

fn existing_id(i: usize) -> String {
    format!("u{i:05}")
}

fn wave_id(wave: usize, i: usize) -> String {
    format!("w{wave}u{i:05}")
}

/// Index of the regime governing `month` (0 = pre-ban).
fn regime_of(config: &ScenarioConfig, month: MonthKey) -> usize {
    config.regimes.iter().take_while(|r| r.ban_month <= month).count()
}

/// Users present in a month, split by the cohort they hold under
/// retrospective labeling.
struct Roster {
    newcomers: Vec<String>,
    existing: Vec<String>,
}

impl Roster {
    fn at(config: &ScenarioConfig, regime: usize) -> Self {
        let mut existing: Vec<String> = (0..config.existing_pool).map(existing_id).collect();
        let mut newcomers = Vec::new();
        for wave in 1..=regime {
            let ids = (0..config.newcomer_wave_size).map(|i| wave_id(wave, i));
            if wave == regime {
                newcomers.extend(ids);
            } else {
                existing.extend(ids);
            }
        }
        Self { newcomers, existing }
    }

    fn len(&self) -> usize {
        self.newcomers.len() + self.existing.len()
    }

    fn get(&self, i: usize) -> (&str, CohortLabel) {
        if i < self.existing.len() {
            (&self.existing[i], CohortLabel::Existing)
        } else {
            (&self.newcomers[i - self.existing.len()], CohortLabel::Newcomer)
        }
    }
}

/// Runs the full scenario.
pub fn generate(config: &ScenarioConfig) -> Result<(Vec<InteractionEvent>, GroundTruth), SynthError> {
    config.validate()?;
    let mut events = Vec::new();
    for m in 0..config.months {
        events.extend(generate_month(config, m)?);
    }
    sort_events(&mut events);
    Ok((events, ground_truth(config)))
}

/// Canonical corpus order: timestamp, then event id.
pub fn sort_events(events: &mut [InteractionEvent]) {
    events.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
}

/// Expected values and cohort roster implied by the configuration.
pub fn ground_truth(config: &ScenarioConfig) -> GroundTruth {
    let regimes = config
        .regimes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let roster = Roster::at(config, i + 1);
            let (n, e) = (roster.newcomers.len() as f64, roster.existing.len() as f64);
            RegimeTruth {
                ban_month: r.ban_month,
                p_cross: r.p_cross,
                expected_ei: 2.0 * r.p_cross - 1.0,
                expected_toxicity: (n * r.newcomer_toxicity.mean + e * r.existing_toxicity.mean) / (n + e),
            }
        })
        .collect();
    let roster = (0..config.months)
        .map(|m| {
            let month = config.start.offset(m as i64);
            let regime = regime_of(config, month);
            let r = Roster::at(config, regime);
            RosterMonth { month, regime, newcomers: r.newcomers.len(), existing: r.existing.len() }
        })
        .collect();
    GroundTruth {
        planted_break: config.regimes.get(1).map(|r| r.ban_month),
        regimes,
        roster,
    }
}

/// Random stream for month index `m`; months are independent of each other.
fn month_rng(seed: u64, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m as u64);
    rng
}

type Emit<'a> = dyn FnMut(&mut ChaCha8Rng, String, usize, Option<String>) + 'a;

struct Post {
    id: String,
    author: usize,
}

/// Events of month index `m`, unsorted. Independent of every other month.
pub fn generate_month(config: &ScenarioConfig, m: usize) -> Result<Vec<InteractionEvent>, SynthError> {
    let month = config.start.offset(m as i64);
    let regime = regime_of(config, month);
    let roster = Roster::at(config, regime);
    let mut rng = month_rng(config.seed, m);

    let (new_tox, old_tox, p_cross) = match regime {
        0 => {
            let base = config.baseline_toxicity.sampler("baseline_toxicity")?;
            (base, base, 0.0)
        }
        r => {
            let reg = &config.regimes[r - 1];
            (
                reg.newcomer_toxicity.sampler("newcomer_toxicity")?,
                reg.existing_toxicity.sampler("existing_toxicity")?,
                reg.p_cross,
            )
        }
    };

    let start = month.start_timestamp();
    let span = month.succ().start_timestamp() - start;
    let tag = format!("{month}");
    let mut events = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng, id: String, user: usize, parent: Option<String>| {
        let (name, label) = roster.get(user);
        let tox = match label {
            CohortLabel::Newcomer => &new_tox,
            CohortLabel::Existing => &old_tox,
        };
        events.push(InteractionEvent {
            event_id: id,
            user_id: name.into(),
            community_id: config.community_id.clone(),
            platform: config.platform,
            kind: if parent.is_some() { EventKind::Comment } else { EventKind::Post },
            parent_post_id: parent,
            timestamp: start + rng.gen_range(0..span),
            toxicity: Some(tox.draw(rng)),
            sentiment: None,
        });
    };

    let n_existing = roster.existing.len();
    let n_new = roster.newcomers.len();
    let mut existing_posts: Vec<Post> = Vec::new();
    let mut newcomer_posts: Vec<Post> = Vec::new();
    let mut post = |rng: &mut ChaCha8Rng, emit: &mut Emit, author: usize| {
        let id = format!("{tag}-p{:06}", existing_posts.len() + newcomer_posts.len());
        emit(rng, id.clone(), author, None);
        let p = Post { id, author };
        if author < n_existing {
            existing_posts.push(p);
        } else {
            newcomer_posts.push(p);
        }
    };

    // Arrivals: the pool in the first month, each wave in its ban month.
    if m == 0 {
        for u in 0..n_existing {
            post(&mut rng, &mut emit, u);
        }
    }
    if regime > 0 && config.regimes[regime - 1].ban_month == month {
        for u in n_existing..n_existing + n_new {
            post(&mut rng, &mut emit, u);
        }
    }

    // Regular posts, stratified by cohort share with two distinct authors
    // per present cohort so within-cohort targets always exist.
    let total = config.posts_per_month;
    let new_count = if n_new == 0 {
        0
    } else {
        let share = libm::round(total as f64 * n_new as f64 / roster.len() as f64) as usize;
        share.clamp(2, total - 2)
    };
    for (count, base, size) in [(total - new_count, 0, n_existing), (new_count, n_existing, n_new)] {
        if count == 0 {
            continue;
        }
        let first = rng.gen_range(0..size);
        let mut second = rng.gen_range(0..size - 1);
        if second >= first {
            second += 1;
        }
        post(&mut rng, &mut emit, base + first);
        post(&mut rng, &mut emit, base + second);
        for _ in 2..count {
            let a = rng.gen_range(0..size);
            post(&mut rng, &mut emit, base + a);
        }
    }

    let lambda = total as f64 * config.comments_per_post;
    let n_comments = if lambda > 0.0 {
        let draw: f64 = Poisson::new(lambda)
            .map_err(|e| SynthError::Invalid(format!("comment rate: {e}")))?
            .sample(&mut rng);
        draw as usize
    } else {
        0
    };
    for c in 0..n_comments {
        let commenter = rng.gen_range(0..roster.len());
        let is_new = commenter >= n_existing;
        let cross = n_new > 0 && rng.gen_bool(p_cross);
        let pool = if is_new != cross { &newcomer_posts } else { &existing_posts };
        // Rejection keeps the draw uniform over the commenter's eligible posts.
        let target = loop {
            let p = &pool[rng.gen_range(0..pool.len())];
            if p.author != commenter {
                break p.id.clone();
            }
        };
        emit(&mut rng, format!("{tag}-c{c:07}"), commenter, Some(target));
    }
    Ok(events)
}
