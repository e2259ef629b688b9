//! Mobility indicators: navigated miles, activity counts, average speed and
//! the growth-based forecast.
//!
//! All bucketing is by UTC calendar day. A tracklet is attributed entirely
//! to the day of its start fix; tracklets are not split at midnight, so a
//! day boundary can shift at most one tracklet per vessel into the
//! neighbouring bucket.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geo::great_circle_nmi;
use crate::registry::{Category, FleetRegistry, VesselProfile};
use crate::tracks::{Activity, LabeledTrack};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("forecast needs at least two history values, got {0}")]
    ShortHistory(usize),
    #[error("forecast value must be positive, got {0}")]
    NonPositiveForecast(f64),
    #[error("bad group {0:?}")]
    BadGroup(String),
}

pub fn epoch_to_date(epoch: i64) -> NaiveDate {
    DateTime::from_timestamp(epoch, 0).expect("epoch within chrono range").date_naive()
}

pub fn day_start(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp()
}

fn month_start(date: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(date.year(), date.month(), 1).expect("first of month exists")
}

/// Aggregation group: everything, one category, or one size class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Total,
    Category(Category),
    SizeClass(Category, String),
}

impl GroupKey {
    pub fn contains(&self, profile: &VesselProfile) -> bool {
        match self {
            Self::Total => Category::TRACKED.contains(&profile.category),
            Self::Category(c) => profile.category == *c,
            Self::SizeClass(c, name) => profile.category == *c && profile.size_class.as_deref() == Some(name),
        }
    }

    /// Every group a profile contributes to.
    pub fn memberships(profile: &VesselProfile) -> Vec<GroupKey> {
        if !Category::TRACKED.contains(&profile.category) {
            return Vec::new();
        }
        let mut keys = vec![Self::Total, Self::Category(profile.category)];
        if let Some(class) = &profile.size_class {
            keys.push(Self::SizeClass(profile.category, class.clone()));
        }
        keys
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Total => f.write_str("total"),
            Self::Category(c) => write!(f, "{c}"),
            Self::SizeClass(c, name) => write!(f, "{c}/{name}"),
        }
    }
}

impl FromStr for GroupKey {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetricsError::BadGroup(s.to_string());
        if s.trim().eq_ignore_ascii_case("total") {
            return Ok(Self::Total);
        }
        match s.split_once('/') {
            Some((c, name)) => Ok(Self::SizeClass(c.parse().map_err(|_| bad())?, name.to_string())),
            None => Ok(Self::Category(s.parse().map_err(|_| bad())?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Monthly,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Daily => "daily",
            Self::Monthly => "monthly",
        }
    }

    pub fn format_date(self, date: NaiveDate) -> String {
        match self {
            Self::Daily => date.format("%Y-%m-%d").to_string(),
            Self::Monthly => date.format("%Y-%m").to_string(),
        }
    }
}

/// What one vessel did on one UTC day.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VesselDay {
    pub cnm_nmi: f64,
    /// Σ sog·duration over active tracklets with a reported speed.
    pub speed_weighted: f64,
    pub speed_weight_s: f64,
    pub active_s: i64,
    pub idle_s: i64,
    pub unknown_s: i64,
    /// Zero-length episodes (single-fix tracks) by status.
    pub instants: [u32; 3],
}

impl VesselDay {
    fn merge(&mut self, o: &VesselDay) {
        self.cnm_nmi += o.cnm_nmi;
        self.speed_weighted += o.speed_weighted;
        self.speed_weight_s += o.speed_weight_s;
        self.active_s += o.active_s;
        self.idle_s += o.idle_s;
        self.unknown_s += o.unknown_s;
        for i in 0..3 {
            self.instants[i] += o.instants[i];
        }
    }

    /// Majority-of-observed-time status; unknown when nothing was observed
    /// or no status holds a strict majority.
    pub fn status(&self) -> Activity {
        let observed = self.active_s + self.idle_s + self.unknown_s;
        let (a, i, total) = if observed > 0 {
            (self.active_s, self.idle_s, observed)
        } else {
            let [a, i, u] = self.instants.map(i64::from);
            (a, i, a + i + u)
        };
        if total == 0 {
            Activity::Unknown
        } else if 2 * a > total {
            Activity::Active
        } else if 2 * i > total {
            Activity::Idle
        } else {
            Activity::Unknown
        }
    }
}

fn slot(a: Activity) -> usize {
    match a {
        Activity::Active => 0,
        Activity::Idle => 1,
        Activity::Unknown => 2,
    }
}

/// Per-vessel, per-day contributions. Merging partial tables built from
/// any partition of the tracks gives the same table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VesselDays {
    days: BTreeMap<u32, BTreeMap<NaiveDate, VesselDay>>,
}

impl VesselDays {
    pub fn from_tracks(tracks: &[LabeledTrack]) -> Self {
        let mut vd = Self::default();
        for t in tracks {
            vd.add_track(t);
        }
        vd
    }

    pub fn add_track(&mut self, lt: &LabeledTrack) {
        let vessel = self.days.entry(lt.track.mmsi).or_default();
        for (tl, status) in lt.labeled_tracklets() {
            if status != Activity::Active {
                continue;
            }
            let day = vessel.entry(epoch_to_date(tl.start_epoch)).or_default();
            day.cnm_nmi += tl.length_nmi;
            if let Some(sog) = tl.start_sog {
                let dt = tl.duration_s() as f64;
                day.speed_weighted += sog * dt;
                day.speed_weight_s += dt;
            }
        }
        for ep in &lt.episodes {
            if ep.start_epoch == ep.end_epoch {
                vessel.entry(epoch_to_date(ep.start_epoch)).or_default().instants[slot(ep.status)] += 1;
                continue;
            }
            let mut t = ep.start_epoch;
            while t < ep.end_epoch {
                let date = epoch_to_date(t);
                let next = day_start(date + chrono::Days::new(1)).min(ep.end_epoch);
                let day = vessel.entry(date).or_default();
                match ep.status {
                    Activity::Active => day.active_s += next - t,
                    Activity::Idle => day.idle_s += next - t,
                    Activity::Unknown => day.unknown_s += next - t,
                }
                t = next;
            }
        }
    }

    pub fn merge(&mut self, other: &VesselDays) {
        for (mmsi, days) in &other.days {
            let mine = self.days.entry(*mmsi).or_default();
            for (date, d) in days {
                mine.entry(*date).or_default().merge(d);
            }
        }
    }

    pub fn vessels(&self) -> impl Iterator<Item = u32> + '_ {
        self.days.keys().copied()
    }

    pub fn get(&self, mmsi: u32, date: NaiveDate) -> Option<&VesselDay> {
        self.days.get(&mmsi)?.get(&date)
    }

    /// First and last day with any observation.
    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let firsts = self.days.values().filter_map(|d| d.keys().next());
        let lasts = self.days.values().filter_map(|d| d.keys().next_back());
        Some((*firsts.min()?, *lasts.max()?))
    }
}

/// Inclusive range of UTC days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateRange {
    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        self.first.iter_days().take_while({
            let last = self.last;
            move |d| *d <= last
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityCounts {
    pub active: f64,
    pub idle: f64,
    pub unknown: f64,
}

fn group_members(vd: &VesselDays, registry: &FleetRegistry, group: &GroupKey) -> Vec<u32> {
    vd.vessels().filter(|m| registry.included(*m).is_some_and(|p| group.contains(p))).collect()
}

fn resolve_range(vd: &VesselDays, range: Option<DateRange>) -> Option<DateRange> {
    range.or_else(|| vd.date_span().map(|(first, last)| DateRange { first, last }))
}

/// Daily navigated miles of a group's active vessels.
pub fn cnm(tracks: &[LabeledTrack], registry: &FleetRegistry, group: &GroupKey) -> BTreeMap<NaiveDate, f64> {
    let vd = VesselDays::from_tracks(tracks);
    let mut out = BTreeMap::new();
    for mmsi in group_members(&vd, registry, group) {
        for (date, day) in &vd.days[&mmsi] {
            *out.entry(*date).or_insert(0.0) += day.cnm_nmi;
        }
    }
    out
}

/// Daily number of active, idle and unknown vessels in a group. Vessels of
/// the group with no observation on a day count as unknown.
pub fn activity_counts(
    tracks: &[LabeledTrack],
    registry: &FleetRegistry,
    group: &GroupKey,
    range: Option<DateRange>,
) -> BTreeMap<NaiveDate, ActivityCounts> {
    let vd = VesselDays::from_tracks(tracks);
    let series = indicator_series(&vd, registry, group, Granularity::Daily, range);
    series
        .points
        .into_iter()
        .map(|p| (p.date, ActivityCounts { active: p.n_active, idle: p.n_idle, unknown: p.n_unknown }))
        .collect()
}

/// Daily time-weighted mean reported speed over active tracklets; days
/// without active movement have no entry.
pub fn mean_speed(tracks: &[LabeledTrack], registry: &FleetRegistry, group: &GroupKey) -> BTreeMap<NaiveDate, f64> {
    let vd = VesselDays::from_tracks(tracks);
    let mut acc: BTreeMap<NaiveDate, (f64, f64)> = BTreeMap::new();
    for mmsi in group_members(&vd, registry, group) {
        for (date, day) in &vd.days[&mmsi] {
            let e = acc.entry(*date).or_default();
            e.0 += day.speed_weighted;
            e.1 += day.speed_weight_s;
        }
    }
    acc.into_iter().filter(|(_, (_, w))| *w > 0.0).map(|(d, (s, w))| (d, s / w)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPoint {
    /// Day, or first day of the month for monthly series.
    pub date: NaiveDate,
    pub cnm_nmi: f64,
    pub n_active: f64,
    pub n_idle: f64,
    pub n_unknown: f64,
    pub mean_speed_knots: Option<f64>,
    speed_weighted: f64,
    speed_weight_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub group: GroupKey,
    pub granularity: Granularity,
    pub points: Vec<IndicatorPoint>,
}

/// All indicators for one group. Monthly points aggregate their daily
/// points: miles are summed, counts averaged, speed re-weighted.
pub fn indicator_series(
    vd: &VesselDays,
    registry: &FleetRegistry,
    group: &GroupKey,
    granularity: Granularity,
    range: Option<DateRange>,
) -> IndicatorSeries {
    let members = group_members(vd, registry, group);
    let mut daily = Vec::new();
    if let Some(range) = resolve_range(vd, range) {
        for date in range.days() {
            let mut p = IndicatorPoint {
                date,
                cnm_nmi: 0.0,
                n_active: 0.0,
                n_idle: 0.0,
                n_unknown: 0.0,
                mean_speed_knots: None,
                speed_weighted: 0.0,
                speed_weight_s: 0.0,
            };
            for mmsi in &members {
                let day = vd.get(*mmsi, date).copied().unwrap_or_default();
                p.cnm_nmi += day.cnm_nmi;
                p.speed_weighted += day.speed_weighted;
                p.speed_weight_s += day.speed_weight_s;
                match day.status() {
                    Activity::Active => p.n_active += 1.0,
                    Activity::Idle => p.n_idle += 1.0,
                    Activity::Unknown => p.n_unknown += 1.0,
                }
            }
            p.mean_speed_knots = (p.speed_weight_s > 0.0).then(|| p.speed_weighted / p.speed_weight_s);
            daily.push(p);
        }
    }
    let points = match granularity {
        Granularity::Daily => daily,
        Granularity::Monthly => monthly_from_daily(&daily),
    };
    IndicatorSeries { group: group.clone(), granularity, points }
}

fn monthly_from_daily(daily: &[IndicatorPoint]) -> Vec<IndicatorPoint> {
    let mut months: BTreeMap<NaiveDate, Vec<&IndicatorPoint>> = BTreeMap::new();
    for p in daily {
        months.entry(month_start(p.date)).or_default().push(p);
    }
    months
        .into_iter()
        .map(|(date, days)| {
            let n = days.len() as f64;
            let sw: f64 = days.iter().map(|d| d.speed_weighted).sum();
            let w: f64 = days.iter().map(|d| d.speed_weight_s).sum();
            IndicatorPoint {
                date,
                cnm_nmi: days.iter().map(|d| d.cnm_nmi).sum(),
                n_active: days.iter().map(|d| d.n_active).sum::<f64>() / n,
                n_idle: days.iter().map(|d| d.n_idle).sum::<f64>() / n,
                n_unknown: days.iter().map(|d| d.n_unknown).sum::<f64>() / n,
                mean_speed_knots: (w > 0.0).then(|| sw / w),
                speed_weighted: sw,
                speed_weight_s: w,
            }
        })
        .collect()
}

/// Groups present in the registry: total, each tracked category and each
/// size class with at least one included vessel.
pub fn registry_groups(registry: &FleetRegistry) -> Vec<GroupKey> {
    let mut groups: BTreeSet<GroupKey> = BTreeSet::new();
    groups.insert(GroupKey::Total);
    for c in Category::TRACKED {
        groups.insert(GroupKey::Category(c));
    }
    for p in registry.profiles().filter(|p| p.included) {
        groups.extend(GroupKey::memberships(p));
    }
    groups.into_iter().collect()
}

/// Forecast the next value as the last value plus the mean year-over-year
/// increment: `y_n + (y_n - y_1) / (n - 1)`.
pub fn forecast(history: &[f64]) -> Result<f64, MetricsError> {
    let n = history.len();
    if n < 2 {
        return Err(MetricsError::ShortHistory(n));
    }
    let increments: f64 = history.windows(2).map(|w| w[1] - w[0]).sum();
    Ok(history[n - 1] + increments / (n - 1) as f64)
}

/// Percentage deviation of `actual` from `forecast_value`.
pub fn delta_pct(forecast_value: f64, actual: f64) -> Result<f64, MetricsError> {
    if forecast_value.is_nan() || forecast_value <= 0.0 {
        return Err(MetricsError::NonPositiveForecast(forecast_value));
    }
    Ok(100.0 * (actual - forecast_value) / forecast_value)
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// One monthly observation of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyValue {
    pub group: String,
    pub year: i32,
    pub month: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub group: String,
    pub year: i32,
    pub month: u32,
    pub history: Vec<f64>,
    pub forecast: f64,
    pub actual: Option<f64>,
    pub delta_pct: Option<f64>,
}

/// Forecast `target_year` for every (group, month) with at least two
/// earlier years. History years are taken in ascending order and assumed
/// consecutive.
pub fn forecast_table(values: &[MonthlyValue], target_year: i32) -> Vec<ForecastPoint> {
    let mut cells: BTreeMap<(String, u32), BTreeMap<i32, f64>> = BTreeMap::new();
    for v in values {
        cells.entry((v.group.clone(), v.month)).or_default().insert(v.year, v.value);
    }
    cells
        .into_iter()
        .filter_map(|((group, month), years)| {
            let history: Vec<f64> = years.range(..target_year).map(|(_, v)| *v).collect();
            let f = forecast(&history).ok()?;
            let actual = years.get(&target_year).copied();
            Some(ForecastPoint {
                group,
                year: target_year,
                month,
                history,
                forecast: f,
                actual,
                delta_pct: actual.and_then(|a| delta_pct(f, a).ok()),
            })
        })
        .collect()
}
