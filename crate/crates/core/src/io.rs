//! File formats: decoded-fix CSV, NMEA feeds and the tabular outputs.
//!
//! Times are written as ISO-8601 UTC (`2020-03-01T12:00:00Z`); readers also
//! accept bare dates and integer Unix seconds.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::codec::{DecodeStats, Decoded, Decoder, NavStatus, PositionFix, StaticReport};
use crate::metrics::{ForecastPoint, IndicatorSeries};
use crate::tracks::LabeledTrack;

pub fn iso(epoch: i64) -> String {
    DateTime::from_timestamp(epoch, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| epoch.to_string())
}

/// Parse RFC 3339, `YYYY-MM-DD` (midnight UTC) or integer seconds.
pub fn parse_time(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Some(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    let d: NaiveDate = s.parse().ok()?;
    Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp())
}

/// Write `path` through a temporary sibling renamed into place on success.
pub fn atomic_write<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

/// Serialize rows as CSV into `path`, atomically.
pub fn write_csv_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> io::Result<()> {
    atomic_write(path, |out| {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(header).map_err(csv_io)?;
        for row in rows {
            w.serialize(row).map_err(csv_io)?;
        }
        w.flush()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Nmea,
    Csv,
}

/// Guess the format from the first non-blank line.
pub fn detect_format(first_line: &str) -> InputFormat {
    let body = first_line.rsplit('\t').next().unwrap_or(first_line).trim_start();
    if body.starts_with('!') || body.starts_with('$') {
        InputFormat::Nmea
    } else {
        InputFormat::Csv
    }
}

pub const FIX_HEADER: [&str; 9] = ["mmsi", "time", "lat", "lon", "sog", "cog", "heading", "nav_status", "msg_type"];

/// One decoded-fix CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixRow {
    pub mmsi: u32,
    pub time: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub sog: Option<f64>,
    pub cog: Option<f64>,
    pub heading: Option<u16>,
    pub nav_status: u8,
    pub msg_type: u8,
}

impl From<&PositionFix> for FixRow {
    fn from(f: &PositionFix) -> Self {
        Self {
            mmsi: f.mmsi,
            time: f.epoch.map(iso).unwrap_or_default(),
            lat: f.lat,
            lon: f.lon,
            sog: f.sog_knots,
            cog: f.cog_deg,
            heading: f.heading_deg,
            nav_status: f.nav_status.code(),
            msg_type: f.msg_type,
        }
    }
}

impl FixRow {
    pub fn to_fix(&self) -> PositionFix {
        let epoch = parse_time(&self.time);
        PositionFix {
            mmsi: self.mmsi,
            msg_type: self.msg_type,
            nav_status: NavStatus::from_code(self.nav_status),
            sog_knots: self.sog,
            lat: self.lat,
            lon: self.lon,
            cog_deg: self.cog,
            heading_deg: self.heading,
            utc_second: epoch.map_or(60, |t| t.rem_euclid(60) as u8),
            epoch,
        }
    }
}

/// Counts for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub files: u64,
    pub blank_lines: u64,
    pub decode: DecodeStats,
    pub csv_rows: u64,
    pub csv_errors: u64,
}

impl IngestStats {
    pub fn merge(&mut self, o: &IngestStats) {
        self.files += o.files;
        self.blank_lines += o.blank_lines;
        self.decode.merge(&o.decode);
        self.csv_rows += o.csv_rows;
        self.csv_errors += o.csv_errors;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub fixes: Vec<PositionFix>,
    pub statics: Vec<StaticReport>,
    pub stats: IngestStats,
}

/// Decode a feed of AIVDM lines, one decoder per call.
pub fn read_nmea<R: BufRead>(input: R) -> io::Result<Ingested> {
    let mut out = Ingested::default();
    let mut decoder = Decoder::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            out.stats.blank_lines += 1;
            continue;
        }
        match decoder.decode_line(line.trim_end()) {
            Ok(Decoded::Position(fix)) => out.fixes.push(fix),
            Ok(Decoded::Static(report)) => out.statics.push(report),
            _ => {}
        }
    }
    out.stats.decode = decoder.stats().clone();
    Ok(out)
}

/// Read decoded-fix CSV; malformed rows are counted and skipped.
pub fn read_fix_csv<R: BufRead>(input: R) -> io::Result<Ingested> {
    let mut out = Ingested::default();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    for row in rdr.deserialize::<FixRow>() {
        out.stats.csv_rows += 1;
        match row {
            Ok(r) => out.fixes.push(r.to_fix()),
            Err(e) if e.is_io_error() => return Err(csv_io(e)),
            Err(_) => out.stats.csv_errors += 1,
        }
    }
    Ok(out)
}

/// Read one input, choosing the parser from its first non-blank line.
pub fn read_input<R: BufRead>(mut input: R) -> io::Result<Ingested> {
    let mut head = Vec::new();
    let mut blank = 0;
    loop {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            let mut out = Ingested::default();
            out.stats.files = 1;
            out.stats.blank_lines = blank;
            return Ok(out);
        }
        let is_blank = line.trim().is_empty();
        head.push(line);
        if is_blank {
            blank += 1;
        } else {
            break;
        }
    }
    let format = detect_format(head.last().unwrap());
    let replay = io::Cursor::new(head.concat().into_bytes()).chain(input);
    let mut out = match format {
        InputFormat::Nmea => read_nmea(replay)?,
        InputFormat::Csv => read_fix_csv(replay)?,
    };
    out.stats.files = 1;
    if format == InputFormat::Csv {
        out.stats.blank_lines += blank;
    }
    Ok(out)
}

pub fn read_input_path(path: &Path) -> io::Result<Ingested> {
    read_input(BufReader::new(File::open(path)?))
}

pub fn write_fixes(path: &Path, fixes: &[PositionFix]) -> io::Result<()> {
    write_csv_rows(path, &FIX_HEADER, fixes.iter().map(FixRow::from))
}

pub fn write_nmea(path: &Path, lines: &[String]) -> io::Result<()> {
    atomic_write(path, |out| {
        for l in lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct TrackRow {
    mmsi: u32,
    track_id: u32,
    start: String,
    end: String,
    n_fixes: usize,
    length_nmi: f64,
}

pub fn write_tracks(path: &Path, tracks: &[LabeledTrack]) -> io::Result<()> {
    let rows = tracks.iter().map(|lt| TrackRow {
        mmsi: lt.track.mmsi,
        track_id: lt.track.track_id,
        start: iso(lt.track.start_epoch()),
        end: iso(lt.track.end_epoch()),
        n_fixes: lt.track.fixes.len(),
        length_nmi: lt.track.length_nmi(),
    });
    write_csv_rows(path, &["mmsi", "track_id", "start", "end", "n_fixes", "length_nmi"], rows)
}

#[derive(Debug, Serialize)]
struct EpisodeRow {
    mmsi: u32,
    track_id: u32,
    status: &'static str,
    start: String,
    end: String,
}

pub fn write_episodes(path: &Path, tracks: &[LabeledTrack]) -> io::Result<()> {
    let rows = tracks.iter().flat_map(|lt| &lt.episodes).map(|e| EpisodeRow {
        mmsi: e.mmsi,
        track_id: e.track_id,
        status: e.status.as_str(),
        start: iso(e.start_epoch),
        end: iso(e.end_epoch),
    });
    write_csv_rows(path, &["mmsi", "track_id", "status", "start", "end"], rows)
}

#[derive(Debug, Serialize)]
struct IndicatorRow {
    group: String,
    granularity: &'static str,
    date: String,
    cnm_nmi: f64,
    n_active: f64,
    n_idle: f64,
    n_unknown: f64,
    mean_speed_knots: Option<f64>,
}

pub const INDICATOR_HEADER: [&str; 8] =
    ["group", "granularity", "date", "cnm_nmi", "n_active", "n_idle", "n_unknown", "mean_speed_knots"];

pub fn write_indicators(path: &Path, series: &[IndicatorSeries]) -> io::Result<()> {
    let rows = series.iter().flat_map(|s| {
        s.points.iter().map(move |p| IndicatorRow {
            group: s.group.to_string(),
            granularity: s.granularity.as_str(),
            date: s.granularity.format_date(p.date),
            cnm_nmi: p.cnm_nmi,
            n_active: p.n_active,
            n_idle: p.n_idle,
            n_unknown: p.n_unknown,
            mean_speed_knots: p.mean_speed_knots,
        })
    });
    write_csv_rows(path, &INDICATOR_HEADER, rows)
}

#[derive(Debug, Serialize)]
struct ForecastRow {
    group: String,
    month: String,
    forecast: f64,
    actual: Option<f64>,
    delta_pct: Option<f64>,
}

pub fn write_forecast(path: &Path, points: &[ForecastPoint]) -> io::Result<()> {
    let rows = points.iter().map(|p| ForecastRow {
        group: p.group.clone(),
        month: format!("{:04}-{:02}", p.year, p.month),
        forecast: p.forecast,
        actual: p.actual,
        delta_pct: p.delta_pct,
    });
    write_csv_rows(path, &["group", "month", "forecast", "actual", "delta_pct"], rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    atomic_write(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
        writeln!(out)
    })
}
