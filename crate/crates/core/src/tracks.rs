//! Fix cleaning, per-vessel track assembly and active/idle labelling.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::PositionFix;
use crate::geo::{great_circle_nmi, LatLon};
use crate::registry::FleetRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// Longest silence, in seconds, inside one track.
    pub gap_s: i64,
    /// Implied speed above which a fix is treated as erroneous.
    pub speed_gate_knots: f64,
    /// Reported speed below which a vessel is idle.
    pub idle_speed_knots: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { gap_s: 24 * 3600, speed_gate_knots: 50.0, idle_speed_knots: 2.0 }
    }
}

/// Per-reason drop counters. `input == retained + dropped()` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub input: u64,
    pub retained: u64,
    pub invalid_mmsi: u64,
    pub untimed: u64,
    pub no_position: u64,
    pub unregistered: u64,
    pub excluded_vessel: u64,
    pub duplicate: u64,
    pub speed_gate: u64,
}

impl CleaningStats {
    pub fn dropped(&self) -> u64 {
        self.invalid_mmsi
            + self.untimed
            + self.no_position
            + self.unregistered
            + self.excluded_vessel
            + self.duplicate
            + self.speed_gate
    }

    pub fn merge(&mut self, other: &CleaningStats) {
        self.input += other.input;
        self.retained += other.retained;
        self.invalid_mmsi += other.invalid_mmsi;
        self.untimed += other.untimed;
        self.no_position += other.no_position;
        self.unregistered += other.unregistered;
        self.excluded_vessel += other.excluded_vessel;
        self.duplicate += other.duplicate;
        self.speed_gate += other.speed_gate;
    }
}

/// Whether the registry admits a vessel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Included,
    Excluded,
    Unknown,
}

/// Total order on fixes: vessel, time, then every payload field.
fn fix_order(a: &PositionFix, b: &PositionFix) -> Ordering {
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    };
    a.mmsi
        .cmp(&b.mmsi)
        .then(a.epoch.cmp(&b.epoch))
        .then_with(|| opt(a.lat, b.lat))
        .then_with(|| opt(a.lon, b.lon))
        .then_with(|| opt(a.sog_knots, b.sog_knots))
        .then_with(|| opt(a.cog_deg, b.cog_deg))
        .then(a.heading_deg.cmp(&b.heading_deg))
        .then(a.nav_status.cmp(&b.nav_status))
        .then(a.msg_type.cmp(&b.msg_type))
        .then(a.utc_second.cmp(&b.utc_second))
}

/// Remove erroneous and redundant fixes against a fleet registry.
pub fn clean(
    fixes: impl IntoIterator<Item = PositionFix>,
    registry: &FleetRegistry,
    cfg: &TrackConfig,
) -> (Vec<PositionFix>, CleaningStats) {
    clean_with(
        fixes,
        |mmsi| match registry.lookup(mmsi) {
            Some(p) if p.included => Admission::Included,
            Some(_) => Admission::Excluded,
            None => Admission::Unknown,
        },
        cfg,
    )
}

/// [`clean`] with an arbitrary admission rule. Output is sorted by
/// (mmsi, epoch).
pub fn clean_with(
    fixes: impl IntoIterator<Item = PositionFix>,
    admit: impl Fn(u32) -> Admission,
    cfg: &TrackConfig,
) -> (Vec<PositionFix>, CleaningStats) {
    let mut stats = CleaningStats::default();
    let mut candidates = Vec::new();
    for fix in fixes {
        stats.input += 1;
        if !fix.has_valid_mmsi() {
            stats.invalid_mmsi += 1;
        } else if fix.epoch.is_none() {
            stats.untimed += 1;
        } else if !fix.position().is_some_and(|p| p.is_valid()) {
            stats.no_position += 1;
        } else {
            match admit(fix.mmsi) {
                Admission::Included => candidates.push(fix),
                Admission::Excluded => stats.excluded_vessel += 1,
                Admission::Unknown => stats.unregistered += 1,
            }
        }
    }
    candidates.sort_by(fix_order);

    let mut retained: Vec<PositionFix> = Vec::with_capacity(candidates.len());
    for fix in candidates {
        if let Some(prev) = retained.last().filter(|p| p.mmsi == fix.mmsi) {
            let (t0, t1) = (prev.epoch.unwrap_or_default(), fix.epoch.unwrap_or_default());
            if t0 == t1 {
                stats.duplicate += 1;
                continue;
            }
            let dt = t1 - t0;
            if dt <= cfg.gap_s {
                let (Some(p0), Some(p1)) = (prev.position(), fix.position()) else { unreachable!() };
                let knots = great_circle_nmi(p0, p1) / (dt as f64 / 3600.0);
                if knots > cfg.speed_gate_knots {
                    stats.speed_gate += 1;
                    continue;
                }
            }
        }
        retained.push(fix);
    }
    stats.retained = retained.len() as u64;
    (retained, stats)
}

/// Time-ordered fixes of one vessel without internal gaps above the
/// configured threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub mmsi: u32,
    /// Index of this track among the vessel's tracks, in time order.
    pub track_id: u32,
    pub fixes: Vec<PositionFix>,
}

/// Segment between two consecutive fixes of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracklet {
    pub mmsi: u32,
    pub start_epoch: i64,
    pub end_epoch: i64,
    pub start: LatLon,
    pub end: LatLon,
    /// Reported speed at the start fix.
    pub start_sog: Option<f64>,
    pub length_nmi: f64,
}

impl Tracklet {
    pub fn duration_s(&self) -> i64 {
        self.end_epoch - self.start_epoch
    }

    pub fn implied_speed_knots(&self) -> f64 {
        self.length_nmi / (self.duration_s() as f64 / 3600.0)
    }
}

fn epoch(f: &PositionFix) -> i64 {
    f.epoch.expect("track fixes carry an epoch")
}

fn pos(f: &PositionFix) -> LatLon {
    f.position().expect("track fixes carry a position")
}

impl Track {
    pub fn start_epoch(&self) -> i64 {
        epoch(&self.fixes[0])
    }

    pub fn end_epoch(&self) -> i64 {
        epoch(&self.fixes[self.fixes.len() - 1])
    }

    pub fn epoch_at(&self, i: usize) -> i64 {
        epoch(&self.fixes[i])
    }

    pub fn position_at(&self, i: usize) -> LatLon {
        pos(&self.fixes[i])
    }

    /// Tracklet `i` runs from fix `i` to fix `i + 1`.
    pub fn tracklet(&self, i: usize) -> Tracklet {
        let (a, b) = (&self.fixes[i], &self.fixes[i + 1]);
        Tracklet {
            mmsi: self.mmsi,
            start_epoch: epoch(a),
            end_epoch: epoch(b),
            start: pos(a),
            end: pos(b),
            start_sog: a.sog_knots,
            length_nmi: great_circle_nmi(pos(a), pos(b)),
        }
    }

    pub fn tracklets(&self) -> impl Iterator<Item = Tracklet> + '_ {
        (0..self.fixes.len().saturating_sub(1)).map(|i| self.tracklet(i))
    }

    pub fn length_nmi(&self) -> f64 {
        self.tracklets().map(|t| t.length_nmi).sum()
    }
}

/// Split fixes into per-vessel tracks at silences longer than `gap_s`.
/// Fixes without an epoch or position are ignored.
pub fn build_tracks(fixes: impl IntoIterator<Item = PositionFix>, cfg: &TrackConfig) -> Vec<Track> {
    let mut by_vessel: BTreeMap<u32, Vec<PositionFix>> = BTreeMap::new();
    for f in fixes {
        if f.epoch.is_some() && f.position().is_some() {
            by_vessel.entry(f.mmsi).or_default().push(f);
        }
    }
    let mut tracks = Vec::new();
    for (mmsi, mut fixes) in by_vessel {
        fixes.sort_by(fix_order);
        fixes.dedup_by(|b, a| a.epoch == b.epoch);
        let mut current: Vec<PositionFix> = Vec::new();
        let mut track_id = 0;
        for f in fixes {
            if let Some(last) = current.last() {
                if epoch(&f) - epoch(last) > cfg.gap_s {
                    tracks.push(Track { mmsi, track_id, fixes: std::mem::take(&mut current) });
                    track_id += 1;
                }
            }
            current.push(f);
        }
        if !current.is_empty() {
            tracks.push(Track { mmsi, track_id, fixes: current });
        }
    }
    tracks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Active,
    Idle,
    Unknown,
}

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Active => "active",
            Self::Idle => "idle",
            Self::Unknown => "unknown",
        }
    }
}

/// Vote of a single fix. A stationary navigational status wins over speed.
pub fn fix_activity(fix: &PositionFix, idle_speed_knots: f64) -> Activity {
    if fix.nav_status.is_stationary() {
        return Activity::Idle;
    }
    match fix.sog_knots {
        Some(s) if s < idle_speed_knots => Activity::Idle,
        Some(_) => Activity::Active,
        None if fix.nav_status.is_available() => Activity::Active,
        None => Activity::Unknown,
    }
}

/// Maximal run of fixes sharing one activity vote.
///
/// An episode spans from its first fix to the first fix of the next episode
/// (or the last fix of the track), so a track's episodes tile its time span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEpisode {
    pub mmsi: u32,
    pub track_id: u32,
    pub status: Activity,
    pub start_epoch: i64,
    pub end_epoch: i64,
    /// Index range `[first_fix, last_fix]` into the track's fixes.
    pub first_fix: usize,
    pub last_fix: usize,
}

impl ActivityEpisode {
    pub fn duration_s(&self) -> i64 {
        self.end_epoch - self.start_epoch
    }
}

pub fn label_activity(track: &Track, cfg: &TrackConfig) -> Vec<ActivityEpisode> {
    let mut episodes: Vec<ActivityEpisode> = Vec::new();
    for (i, fix) in track.fixes.iter().enumerate() {
        let vote = fix_activity(fix, cfg.idle_speed_knots);
        let t = epoch(fix);
        match episodes.last_mut() {
            Some(ep) if ep.status == vote => {
                ep.last_fix = i;
                ep.end_epoch = t;
            }
            _ => {
                if let Some(ep) = episodes.last_mut() {
                    ep.end_epoch = t;
                }
                episodes.push(ActivityEpisode {
                    mmsi: track.mmsi,
                    track_id: track.track_id,
                    status: vote,
                    start_epoch: t,
                    end_epoch: t,
                    first_fix: i,
                    last_fix: i,
                });
            }
        }
    }
    episodes
}

/// A track together with its activity episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrack {
    pub track: Track,
    pub episodes: Vec<ActivityEpisode>,
}

impl LabeledTrack {
    pub fn new(track: Track, cfg: &TrackConfig) -> Self {
        let episodes = label_activity(&track, cfg);
        Self { track, episodes }
    }

    /// Activity of the episode containing fix `i`.
    pub fn status_of_fix(&self, i: usize) -> Activity {
        let k = self.episodes.partition_point(|e| e.last_fix < i);
        self.episodes.get(k).map_or(Activity::Unknown, |e| e.status)
    }

    /// Tracklets paired with the activity of their start fix.
    pub fn labeled_tracklets(&self) -> impl Iterator<Item = (Tracklet, Activity)> + '_ {
        let mut ep = 0;
        (0..self.track.fixes.len().saturating_sub(1)).map(move |i| {
            while self.episodes[ep].last_fix < i {
                ep += 1;
            }
            (self.track.tracklet(i), self.episodes[ep].status)
        })
    }
}

/// Clean, split and label in one call, sharded by vessel.
pub fn reconstruct(
    fixes: impl IntoIterator<Item = PositionFix>,
    registry: &FleetRegistry,
    cfg: &TrackConfig,
) -> (Vec<LabeledTrack>, CleaningStats) {
    use rayon::prelude::*;
    let (cleaned, stats) = clean(fixes, registry, cfg);
    let tracks = build_tracks(cleaned, cfg);
    let labeled = tracks.into_par_iter().map(|t| LabeledTrack::new(t, cfg)).collect();
    (labeled, stats)
}
