//! Vessel profiles, traffic categories and size classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("fleet file: {0}")]
    Csv(#[from] csv::Error),
    #[error("fleet file line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("size-class scheme: {0}")]
    Scheme(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Container,
    DryBulk,
    WetBulk,
    Passenger,
    Other,
}

impl Category {
    /// The four categories that enter the indicators.
    pub const TRACKED: [Category; 4] = [Self::Container, Self::DryBulk, Self::WetBulk, Self::Passenger];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Container => "container",
            Self::DryBulk => "dry_bulk",
            Self::WetBulk => "wet_bulk",
            Self::Passenger => "passenger",
            Self::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Ok(match norm.as_str() {
            "container" | "containers" => Self::Container,
            "dry_bulk" | "bulk" | "bulk_carrier" => Self::DryBulk,
            "wet_bulk" | "tanker" => Self::WetBulk,
            "passenger" => Self::Passenger,
            "other" => Self::Other,
            _ => return Err(format!("unknown category {s:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeUnit {
    Teu,
    Dwt,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeClass {
    pub name: String,
    pub lower: f64,
    /// `None` for the open-ended top class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBins {
    pub unit: SizeUnit,
    /// Bins are `(lower, upper]` when set, `[lower, upper)` otherwise.
    #[serde(default)]
    pub upper_inclusive: bool,
    pub classes: Vec<SizeClass>,
}

impl CategoryBins {
    fn new(unit: SizeUnit, upper_inclusive: bool, bins: &[(&str, f64, Option<f64>)]) -> Self {
        Self {
            unit,
            upper_inclusive,
            classes: bins
                .iter()
                .map(|(name, lower, upper)| SizeClass { name: name.to_string(), lower: *lower, upper: *upper })
                .collect(),
        }
    }

    fn validate(&self, label: &str) -> Result<(), RegistryError> {
        let err = |msg: String| Err(RegistryError::Scheme(format!("{label}: {msg}")));
        if self.classes.is_empty() {
            return err("no classes".into());
        }
        for (i, c) in self.classes.iter().enumerate() {
            let last = i + 1 == self.classes.len();
            match c.upper {
                Some(u) if u <= c.lower => return err(format!("class {:?} has upper <= lower", c.name)),
                None if !last => return err(format!("class {:?} is open-ended but not last", c.name)),
                _ => {}
            }
            if let Some(next) = self.classes.get(i + 1) {
                if c.upper != Some(next.lower) {
                    return err(format!("classes {:?} and {:?} are not contiguous", c.name, next.name));
                }
            }
        }
        Ok(())
    }

    pub fn class_of(&self, value: f64) -> Option<&str> {
        if !value.is_finite() {
            return None;
        }
        self.classes
            .iter()
            .enumerate()
            .find(|(i, c)| {
                // the first bin also owns its lower edge
                let above = if self.upper_inclusive && *i > 0 { value > c.lower } else { value >= c.lower };
                let below = match c.upper {
                    None => true,
                    Some(u) if self.upper_inclusive => value <= u,
                    Some(u) => value < u,
                };
                above && below
            })
            .map(|(_, c)| c.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionRule {
    pub cargo_min_dwt: f64,
    pub passenger_min_dwt: f64,
}

impl Default for InclusionRule {
    fn default() -> Self {
        Self { cargo_min_dwt: 10_000.0, passenger_min_dwt: 1_000.0 }
    }
}

/// Size bins per category plus the DWT inclusion thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeClassScheme {
    #[serde(default)]
    pub inclusion: InclusionRule,
    pub container: CategoryBins,
    pub dry_bulk: CategoryBins,
    pub wet_bulk: CategoryBins,
    pub passenger: CategoryBins,
}

impl Default for SizeClassScheme {
    fn default() -> Self {
        Self {
            inclusion: InclusionRule::default(),
            container: CategoryBins::new(
                SizeUnit::Teu,
                false,
                &[
                    ("Small feeder", 0.0, Some(1_000.0)),
                    ("Feeder", 1_000.0, Some(2_000.0)),
                    ("Feedermax", 2_000.0, Some(3_000.0)),
                    ("Panamax", 3_000.0, Some(5_100.0)),
                    ("Post-Panamax", 5_100.0, Some(10_000.0)),
                    ("New Panamax", 10_000.0, Some(14_500.0)),
                    ("ULCV", 14_500.0, None),
                ],
            ),
            dry_bulk: CategoryBins::new(
                SizeUnit::Dwt,
                false,
                &[
                    ("Handysize", 0.0, Some(40_000.0)),
                    ("Handymax", 40_000.0, Some(65_000.0)),
                    ("Panamax", 65_000.0, Some(85_000.0)),
                    ("Post-Panamax", 85_000.0, Some(120_000.0)),
                    ("VLBC", 120_000.0, Some(200_000.0)),
                    ("Capesize", 200_000.0, None),
                ],
            ),
            wet_bulk: CategoryBins::new(
                SizeUnit::Dwt,
                false,
                &[
                    ("Handysize", 0.0, Some(35_000.0)),
                    ("Handymax", 35_000.0, Some(55_000.0)),
                    ("Panamax", 55_000.0, Some(80_000.0)),
                    ("Aframax", 80_000.0, Some(120_000.0)),
                    ("Suezmax", 120_000.0, Some(200_000.0)),
                    ("VLCC", 200_000.0, None),
                ],
            ),
            passenger: CategoryBins::new(
                SizeUnit::Gt,
                true,
                &[
                    ("GT <= 10K", 0.0, Some(10_000.0)),
                    ("10K < GT <= 60K", 10_000.0, Some(60_000.0)),
                    ("60K < GT <= 100K", 60_000.0, Some(100_000.0)),
                    ("GT > 100K", 100_000.0, None),
                ],
            ),
        }
    }
}

impl SizeClassScheme {
    pub fn from_toml_str(text: &str) -> Result<Self, RegistryError> {
        let scheme: Self = toml::from_str(text).map_err(|e| RegistryError::Scheme(e.to_string()))?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scheme serializes")
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        self.container.validate("container")?;
        self.dry_bulk.validate("dry_bulk")?;
        self.wet_bulk.validate("wet_bulk")?;
        self.passenger.validate("passenger")
    }

    pub fn bins(&self, category: Category) -> Option<&CategoryBins> {
        match category {
            Category::Container => Some(&self.container),
            Category::DryBulk => Some(&self.dry_bulk),
            Category::WetBulk => Some(&self.wet_bulk),
            Category::Passenger => Some(&self.passenger),
            Category::Other => None,
        }
    }
}

/// Raw registry columns for one vessel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VesselInputs {
    pub mmsi: u32,
    #[serde(default)]
    pub imo: Option<u32>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub type_code: Option<u8>,
    #[serde(default)]
    pub category_hint: Option<String>,
    #[serde(default)]
    pub dwt: Option<f64>,
    #[serde(default)]
    pub gt: Option<f64>,
    #[serde(default)]
    pub teu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselProfile {
    pub mmsi: u32,
    pub imo: Option<u32>,
    pub name: String,
    pub category: Category,
    pub dwt_tons: Option<f64>,
    pub gt: Option<f64>,
    pub teu: Option<f64>,
    pub size_class: Option<String>,
    pub included: bool,
}

fn category_from_type_code(code: Option<u8>, hint: Option<&str>) -> Category {
    match code {
        Some(60..=69) => Category::Passenger,
        Some(80..=89) => Category::WetBulk,
        Some(70..=79) => match hint.map(str::parse::<Category>) {
            Some(Ok(c @ (Category::Container | Category::DryBulk | Category::WetBulk))) => c,
            _ => Category::Other,
        },
        _ => Category::Other,
    }
}

/// Assign category, size class and the inclusion flag.
pub fn classify(inputs: &VesselInputs, scheme: &SizeClassScheme) -> VesselProfile {
    let category = category_from_type_code(inputs.type_code, inputs.category_hint.as_deref());
    let non_negative = |v: Option<f64>| v.filter(|x| x.is_finite() && *x >= 0.0);
    let (dwt, gt, teu) = (non_negative(inputs.dwt), non_negative(inputs.gt), non_negative(inputs.teu));

    let size_class = scheme.bins(category).and_then(|bins| {
        let measure = match bins.unit {
            SizeUnit::Teu => teu,
            SizeUnit::Dwt => dwt,
            SizeUnit::Gt => gt,
        }?;
        bins.class_of(measure).map(str::to_string)
    });
    let min_dwt = match category {
        Category::Passenger => Some(scheme.inclusion.passenger_min_dwt),
        Category::Container | Category::DryBulk | Category::WetBulk => Some(scheme.inclusion.cargo_min_dwt),
        Category::Other => None,
    };
    let meets_dwt = matches!((min_dwt, dwt), (Some(min), Some(d)) if d >= min);
    VesselProfile {
        mmsi: inputs.mmsi,
        imo: inputs.imo,
        name: inputs.name.clone(),
        category,
        dwt_tons: dwt,
        gt,
        teu,
        included: meets_dwt && size_class.is_some() && (1..=999_999_999).contains(&inputs.mmsi),
        size_class,
    }
}

/// Immutable vessel registry keyed by MMSI.
#[derive(Debug, Default)]
pub struct FleetRegistry {
    profiles: BTreeMap<u32, VesselProfile>,
    unknown: Mutex<BTreeSet<u32>>,
}

impl Clone for FleetRegistry {
    fn clone(&self) -> Self {
        Self::from_profiles(self.profiles.values().cloned())
    }
}

impl FleetRegistry {
    pub fn from_profiles(profiles: impl IntoIterator<Item = VesselProfile>) -> Self {
        Self { profiles: profiles.into_iter().map(|p| (p.mmsi, p)).collect(), unknown: Mutex::new(BTreeSet::new()) }
    }

    pub fn from_inputs<'a>(inputs: impl IntoIterator<Item = &'a VesselInputs>, scheme: &SizeClassScheme) -> Self {
        Self::from_profiles(inputs.into_iter().map(|i| classify(i, scheme)))
    }

    /// Read the fleet CSV (`mmsi,imo,name,type_code,category_hint,dwt,gt,teu`).
    pub fn read_csv<R: Read>(reader: R, scheme: &SizeClassScheme) -> Result<Self, RegistryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut inputs = Vec::new();
        for (i, row) in rdr.deserialize::<VesselInputs>().enumerate() {
            let row = row.map_err(|e| RegistryError::Row { line: i as u64 + 2, msg: e.to_string() })?;
            inputs.push(row);
        }
        Ok(Self::from_inputs(&inputs, scheme))
    }

    pub fn load(path: &Path, scheme: &SizeClassScheme) -> Result<Self, RegistryError> {
        Self::read_csv(std::fs::File::open(path)?, scheme)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> impl Iterator<Item = &VesselProfile> {
        self.profiles.values()
    }

    /// Profile for `mmsi`; unknown identifiers are logged once.
    pub fn lookup(&self, mmsi: u32) -> Option<&VesselProfile> {
        let found = self.profiles.get(&mmsi);
        if found.is_none() {
            let mut unknown = self.unknown.lock().unwrap_or_else(|e| e.into_inner());
            if unknown.insert(mmsi) {
                warn!(mmsi, "vessel not in registry");
            }
        }
        found
    }

    /// Included profile for `mmsi`, if any.
    pub fn included(&self, mmsi: u32) -> Option<&VesselProfile> {
        self.profiles.get(&mmsi).filter(|p| p.included)
    }

    pub fn unknown_mmsis(&self) -> Vec<u32> {
        self.unknown.lock().unwrap_or_else(|e| e.into_inner()).iter().copied().collect()
    }

    pub fn included_count(&self) -> usize {
        self.profiles.values().filter(|p| p.included).count()
    }
}
