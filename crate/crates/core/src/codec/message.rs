//! Typed reports and their ITU-R M.1371 bit layouts.
//!
//! Position report, message types 1/2/3 (168 bits):
//!
//! | field        | offset | width | notes                              |
//! |--------------|--------|-------|------------------------------------|
//! | type         | 0      | 6     |                                    |
//! | repeat       | 6      | 2     | written as 0                       |
//! | mmsi         | 8      | 30    |                                    |
//! | nav status   | 38     | 4     |                                    |
//! | rate of turn | 42     | 8     | signed, written as -128 (n/a)      |
//! | sog          | 50     | 10    | 0.1 kn, 1023 = n/a                 |
//! | accuracy     | 60     | 1     |                                    |
//! | lon          | 61     | 28    | signed 1/10000 min, 181° = n/a     |
//! | lat          | 89     | 27    | signed 1/10000 min, 91° = n/a      |
//! | cog          | 116    | 12    | 0.1°, 3600 = n/a                   |
//! | heading      | 128    | 9     | 511 = n/a                          |
//! | second       | 137    | 6     |                                    |
//! | maneuver     | 143    | 2     |                                    |
//! | spare        | 145    | 3     |                                    |
//! | raim         | 148    | 1     |                                    |
//! | radio        | 149    | 19    |                                    |
//!
//! Static and voyage data, message type 5 (424 bits):
//!
//! | field        | offset | width |
//! |--------------|--------|-------|
//! | type         | 0      | 6     |
//! | repeat       | 6      | 2     |
//! | mmsi         | 8      | 30    |
//! | ais version  | 38     | 2     |
//! | imo          | 40     | 30    |
//! | call sign    | 70     | 42    |
//! | name         | 112    | 120   |
//! | ship type    | 232    | 8     |
//! | to bow       | 240    | 9     |
//! | to stern     | 249    | 9     |
//! | to port      | 258    | 6     |
//! | to starboard | 264    | 6     |
//! | epfd         | 270    | 4     |
//! | eta month    | 274    | 4     |
//! | eta day      | 278    | 5     |
//! | eta hour     | 283    | 5     |
//! | eta minute   | 288    | 6     |
//! | draught      | 294    | 8     |
//! | destination  | 302    | 120   |
//! | dte          | 422    | 1     |
//! | spare        | 423    | 1     |

use serde::{Deserialize, Serialize};

use super::bits::BitBuf;
use super::CodecError;
use crate::geo::LatLon;

pub const POSITION_BITS: usize = 168;
pub const STATIC_BITS: usize = 424;
/// Shortest type-5 payload accepted (zero-filled up to [`STATIC_BITS`]).
pub const STATIC_MIN_BITS: usize = 422;

const LON_NA: i64 = 181 * 600_000;
const LAT_NA: i64 = 91 * 600_000;
const SOG_NA: u64 = 1023;
const COG_NA: u64 = 3600;
const HEADING_NA: u64 = 511;
const MAX_MMSI: u32 = 999_999_999;

/// Navigational status as broadcast in dynamic reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NavStatus {
    UnderWayUsingEngine,
    AtAnchor,
    NotUnderCommand,
    RestrictedManoeuvrability,
    ConstrainedByDraught,
    Moored,
    Aground,
    EngagedInFishing,
    UnderWaySailing,
    Reserved(u8),
    AisSartActive,
    NotDefined,
}

impl NavStatus {
    pub fn from_code(code: u8) -> Self {
        match code & 0x0f {
            0 => Self::UnderWayUsingEngine,
            1 => Self::AtAnchor,
            2 => Self::NotUnderCommand,
            3 => Self::RestrictedManoeuvrability,
            4 => Self::ConstrainedByDraught,
            5 => Self::Moored,
            6 => Self::Aground,
            7 => Self::EngagedInFishing,
            8 => Self::UnderWaySailing,
            14 => Self::AisSartActive,
            15 => Self::NotDefined,
            n => Self::Reserved(n),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::UnderWayUsingEngine => 0,
            Self::AtAnchor => 1,
            Self::NotUnderCommand => 2,
            Self::RestrictedManoeuvrability => 3,
            Self::ConstrainedByDraught => 4,
            Self::Moored => 5,
            Self::Aground => 6,
            Self::EngagedInFishing => 7,
            Self::UnderWaySailing => 8,
            Self::Reserved(n) => n,
            Self::AisSartActive => 14,
            Self::NotDefined => 15,
        }
    }

    /// Statuses that mark a vessel as idle regardless of speed.
    pub fn is_stationary(self) -> bool {
        matches!(self, Self::AtAnchor | Self::NotUnderCommand | Self::Moored | Self::Aground)
    }

    pub fn is_available(self) -> bool {
        self != Self::NotDefined
    }
}

/// One decoded dynamic report (message types 1, 2 and 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionFix {
    pub mmsi: u32,
    pub msg_type: u8,
    pub nav_status: NavStatus,
    pub sog_knots: Option<f64>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub cog_deg: Option<f64>,
    pub heading_deg: Option<u16>,
    /// Seconds-of-minute field as transmitted (60..=63 are special values).
    pub utc_second: u8,
    /// Absolute time in seconds since the Unix epoch, from the feed.
    pub epoch: Option<i64>,
}

impl PositionFix {
    /// A type-1 report with every optional field unavailable.
    pub fn new(mmsi: u32, epoch: i64, lat: f64, lon: f64) -> Self {
        Self {
            mmsi,
            msg_type: 1,
            nav_status: NavStatus::NotDefined,
            sog_knots: None,
            lat: Some(lat),
            lon: Some(lon),
            cog_deg: None,
            heading_deg: None,
            utc_second: (epoch.rem_euclid(60)) as u8,
            epoch: Some(epoch),
        }
    }

    pub fn with_motion(mut self, nav_status: NavStatus, sog_knots: Option<f64>) -> Self {
        self.nav_status = nav_status;
        self.sog_knots = sog_knots;
        self
    }

    pub fn position(&self) -> Option<LatLon> {
        Some(LatLon::new(self.lat?, self.lon?))
    }

    pub fn has_valid_mmsi(&self) -> bool {
        (1..=MAX_MMSI).contains(&self.mmsi)
    }

    /// Continuous fields rounded to wire resolution; what a decode of the
    /// encoded report yields.
    pub fn quantized(&self) -> Self {
        let mut q = self.clone();
        q.lat = self.lat.map(|v| (v * 600_000.0).round() / 600_000.0);
        q.lon = self.lon.map(|v| (v * 600_000.0).round() / 600_000.0);
        q.sog_knots = self.sog_knots.map(|v| (v * 10.0).round() / 10.0);
        q.cog_deg = self.cog_deg.map(|v| (v * 10.0).round() / 10.0);
        q
    }

    pub(crate) fn from_bits(bits: &BitBuf, epoch: Option<i64>) -> Self {
        let lon_raw = bits.int(61, 28);
        let lat_raw = bits.int(89, 27);
        let sog_raw = bits.uint(50, 10);
        let cog_raw = bits.uint(116, 12);
        let heading_raw = bits.uint(128, 9);
        let in_range = |raw: i64, limit: i64| raw.abs() <= limit;
        Self {
            mmsi: bits.uint(8, 30) as u32,
            msg_type: bits.uint(0, 6) as u8,
            nav_status: NavStatus::from_code(bits.uint(38, 4) as u8),
            sog_knots: (sog_raw != SOG_NA).then(|| sog_raw as f64 / 10.0),
            lon: (lon_raw != LON_NA && in_range(lon_raw, 180 * 600_000)).then(|| lon_raw as f64 / 600_000.0),
            lat: (lat_raw != LAT_NA && in_range(lat_raw, 90 * 600_000)).then(|| lat_raw as f64 / 600_000.0),
            cog_deg: (cog_raw < COG_NA).then(|| cog_raw as f64 / 10.0),
            heading_deg: (heading_raw < 360).then_some(heading_raw as u16),
            utc_second: bits.uint(137, 6) as u8,
            epoch,
        }
    }

    pub(crate) fn to_bits(&self) -> Result<BitBuf, CodecError> {
        if !matches!(self.msg_type, 1..=3) {
            return Err(CodecError::OutOfRange(format!("message type {} is not a position report", self.msg_type)));
        }
        if !self.has_valid_mmsi() {
            return Err(CodecError::OutOfRange(format!("mmsi {}", self.mmsi)));
        }
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(CodecError::OutOfRange(what.to_string())) };
        if let Some(lat) = self.lat {
            check((-90.0..=90.0).contains(&lat), "latitude")?;
        }
        if let Some(lon) = self.lon {
            check((-180.0..=180.0).contains(&lon), "longitude")?;
        }
        if let Some(sog) = self.sog_knots {
            check((0.0..=102.2).contains(&sog), "speed over ground")?;
        }
        if let Some(cog) = self.cog_deg {
            check((0.0..359.95).contains(&cog), "course over ground")?;
        }
        if let Some(h) = self.heading_deg {
            check(h < 360, "heading")?;
        }
        check(self.utc_second < 64, "utc second")?;

        let mut b = BitBuf::new();
        b.push_uint(self.msg_type as u64, 6);
        b.push_uint(0, 2);
        b.push_uint(self.mmsi as u64, 30);
        b.push_uint(self.nav_status.code() as u64, 4);
        b.push_int(-128, 8);
        b.push_uint(self.sog_knots.map_or(SOG_NA, |v| (v * 10.0).round() as u64), 10);
        b.push_uint(0, 1);
        b.push_int(self.lon.map_or(LON_NA, |v| (v * 600_000.0).round() as i64), 28);
        b.push_int(self.lat.map_or(LAT_NA, |v| (v * 600_000.0).round() as i64), 27);
        b.push_uint(self.cog_deg.map_or(COG_NA, |v| (v * 10.0).round() as u64), 12);
        b.push_uint(self.heading_deg.map_or(HEADING_NA, u64::from), 9);
        b.push_uint(self.utc_second as u64, 6);
        b.push_uint(0, 2);
        b.push_uint(0, 3);
        b.push_uint(0, 1);
        b.push_uint(0, 19);
        debug_assert_eq!(b.len(), POSITION_BITS);
        Ok(b)
    }
}

/// Static and voyage-related data (message type 5).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticReport {
    pub mmsi: u32,
    pub imo_number: u32,
    pub callsign: String,
    pub name: String,
    pub ship_type_code: u8,
    pub to_bow_m: u16,
    pub to_stern_m: u16,
    pub to_port_m: u8,
    pub to_starboard_m: u8,
    pub draught_dm: u8,
    pub destination: String,
}

impl StaticReport {
    /// Text fields with the trailing padding the wire cannot carry removed.
    pub fn quantized(&self) -> Self {
        let trim = |s: &str| s.trim_end_matches(['@', ' ']).to_string();
        Self {
            callsign: trim(&self.callsign),
            name: trim(&self.name),
            destination: trim(&self.destination),
            ..self.clone()
        }
    }

    pub(crate) fn from_bits(bits: &BitBuf) -> Self {
        Self {
            mmsi: bits.uint(8, 30) as u32,
            imo_number: bits.uint(40, 30) as u32,
            callsign: bits.text(70, 7),
            name: bits.text(112, 20),
            ship_type_code: bits.uint(232, 8) as u8,
            to_bow_m: bits.uint(240, 9) as u16,
            to_stern_m: bits.uint(249, 9) as u16,
            to_port_m: bits.uint(258, 6) as u8,
            to_starboard_m: bits.uint(264, 6) as u8,
            draught_dm: bits.uint(294, 8) as u8,
            destination: bits.text(302, 20),
        }
    }

    pub(crate) fn to_bits(&self) -> Result<BitBuf, CodecError> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(CodecError::OutOfRange(what.to_string())) };
        check((1..=MAX_MMSI).contains(&self.mmsi), "mmsi")?;
        check(self.imo_number < (1 << 30), "imo number")?;
        check(self.ship_type_code <= 99, "ship type code")?;
        check(self.to_bow_m < 512 && self.to_stern_m < 512, "bow/stern dimension")?;
        check(self.to_port_m < 64 && self.to_starboard_m < 64, "port/starboard dimension")?;

        let mut b = BitBuf::new();
        b.push_uint(5, 6);
        b.push_uint(0, 2);
        b.push_uint(self.mmsi as u64, 30);
        b.push_uint(0, 2);
        b.push_uint(self.imo_number as u64, 30);
        b.push_text(&self.callsign, 7)?;
        b.push_text(&self.name, 20)?;
        b.push_uint(self.ship_type_code as u64, 8);
        b.push_uint(self.to_bow_m as u64, 9);
        b.push_uint(self.to_stern_m as u64, 9);
        b.push_uint(self.to_port_m as u64, 6);
        b.push_uint(self.to_starboard_m as u64, 6);
        b.push_uint(1, 4);
        b.push_uint(0, 4);
        b.push_uint(0, 5);
        b.push_uint(24, 5);
        b.push_uint(60, 6);
        b.push_uint(self.draught_dm as u64, 8);
        b.push_text(&self.destination, 20)?;
        b.push_uint(0, 1);
        b.push_uint(0, 1);
        debug_assert_eq!(b.len(), STATIC_BITS);
        Ok(b)
    }
}
