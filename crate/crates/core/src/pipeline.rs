//! Run configuration and the stage functions shared by the command line.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::PositionFix;
use crate::density::{
    accumulate, region_speed_delta, window_tracklets, DensityGrid, GridSpec, Subdivision, TimeWindow,
};
use crate::geo::Polygon;
use crate::io::{parse_time, read_input_path, IngestStats, Ingested};
use crate::metrics::{
    epoch_to_date, forecast_table, indicator_series, registry_groups, DateRange, ForecastPoint, Granularity, GroupKey,
    IndicatorSeries, MonthlyValue, VesselDays,
};
use crate::ports::{detect_visits, read_ports, Port, PortGraph, Visit, VisitConfig};
use crate::registry::{FleetRegistry, RegistryError, SizeClassScheme};
use crate::tracks::{reconstruct, CleaningStats, LabeledTrack, TrackConfig};
use chrono::Datelike;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Contract(String),
}

impl PipelineError {
    /// Process exit status: 1 usage, 2 I/O, 3 data-contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Io { .. } => 2,
            Self::Contract(_) => 3,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn contract(what: impl std::fmt::Display) -> Self {
        Self::Contract(what.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn registry_error(path: &Path, e: RegistryError) -> PipelineError {
    match e {
        RegistryError::Io(source) => PipelineError::io(path, source),
        other => PipelineError::contract(format!("{}: {other}", path.display())),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// NMEA feeds or decoded-fix CSV files.
    pub fixes: Vec<PathBuf>,
    pub fleet: Option<PathBuf>,
    pub ports: Option<PathBuf>,
    pub size_classes: Option<PathBuf>,
    /// Monthly values (`group,year,month,value`) for forecasting.
    pub history: Option<PathBuf>,
    /// GeoJSON polygon for the regional speed comparison.
    pub region: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub gap_hours: f64,
    pub speed_gate_knots: f64,
    pub idle_speed_knots: f64,
    pub min_dwell_hours: f64,
    pub cargo_min_dwt: Option<f64>,
    pub passenger_min_dwt: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            gap_hours: 24.0,
            speed_gate_knots: 50.0,
            idle_speed_knots: 2.0,
            min_dwell_hours: 1.0,
            cargo_min_dwt: None,
            passenger_min_dwt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub cell_size_deg: f64,
    /// Subdivision step; a quarter cell when absent.
    pub step_deg: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            lat_min: g.lat_min,
            lat_max: g.lat_max,
            lon_min: g.lon_min,
            lon_max: g.lon_max,
            cell_size_deg: g.cell_size_deg,
            step_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub start: String,
    pub end: String,
}

impl WindowSpec {
    pub fn resolve(&self) -> Result<TimeWindow> {
        let parse = |s: &str| parse_time(s).ok_or_else(|| PipelineError::Usage(format!("bad time {s:?}")));
        let w = TimeWindow::new(parse(&self.start)?, parse(&self.end)?);
        if w.start >= w.end {
            return Err(PipelineError::Usage(format!("window {} .. {} is empty", self.start, self.end)));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    /// Date range of the indicator series.
    pub indicators: Option<WindowSpec>,
    /// Window of the density grid and the "after" side of speed deltas.
    pub density: Option<WindowSpec>,
    /// Baseline window for the regional speed comparison.
    pub baseline: Option<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Groups {
    /// Group keys such as `total`, `container` or `wet_bulk/VLCC`; empty
    /// means every group present in the registry.
    pub include: Vec<String>,
    pub granularity: Vec<Granularity>,
}

impl Default for Groups {
    fn default() -> Self {
        Self { include: Vec::new(), granularity: vec![Granularity::Daily, Granularity::Monthly] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Year to forecast; the latest year in the data when absent.
    pub target_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub inputs: Inputs,
    pub thresholds: Thresholds,
    pub grid: GridConfig,
    pub windows: Windows,
    pub groups: Groups,
    pub forecast: ForecastConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            inputs: Inputs::default(),
            thresholds: Thresholds::default(),
            grid: GridConfig::default(),
            windows: Windows::default(),
            groups: Groups::default(),
            forecast: ForecastConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Usage(format!("config: {e}")))
    }

    /// Load a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.inputs.fixes.iter_mut().for_each(fix);
        for p in [
            &mut self.inputs.fleet,
            &mut self.inputs.ports,
            &mut self.inputs.size_classes,
            &mut self.inputs.history,
            &mut self.inputs.region,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Thresholds positive, windows well ordered, grid valid and every
    /// referenced file present.
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        for (name, v) in [
            ("gap_hours", t.gap_hours),
            ("speed_gate_knots", t.speed_gate_knots),
            ("idle_speed_knots", t.idle_speed_knots),
            ("min_dwell_hours", t.min_dwell_hours),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::Usage(format!("threshold {name} must be positive")));
            }
        }
        for v in [t.cargo_min_dwt, t.passenger_min_dwt].into_iter().flatten() {
            if v.is_nan() || v < 0.0 {
                return Err(PipelineError::Usage("DWT thresholds must be non-negative".into()));
            }
        }
        self.grid_spec()?;
        if let Some(step) = self.grid.step_deg {
            if step.is_nan() || step <= 0.0 {
                return Err(PipelineError::Usage("step_deg must be positive".into()));
            }
        }
        for w in [&self.windows.indicators, &self.windows.density, &self.windows.baseline].into_iter().flatten() {
            w.resolve()?;
        }
        for g in &self.groups.include {
            g.parse::<GroupKey>().map_err(|e| PipelineError::Usage(e.to_string()))?;
        }
        let files = self.inputs.fixes.iter().chain(
            [
                &self.inputs.fleet,
                &self.inputs.ports,
                &self.inputs.size_classes,
                &self.inputs.history,
                &self.inputs.region,
            ]
            .into_iter()
            .flatten(),
        );
        for f in files {
            if !f.is_file() {
                return Err(PipelineError::io(f, io::Error::new(io::ErrorKind::NotFound, "no such file")));
            }
        }
        Ok(())
    }

    pub fn track_config(&self) -> TrackConfig {
        TrackConfig {
            gap_s: (self.thresholds.gap_hours * 3600.0).round() as i64,
            speed_gate_knots: self.thresholds.speed_gate_knots,
            idle_speed_knots: self.thresholds.idle_speed_knots,
        }
    }

    pub fn visit_config(&self) -> VisitConfig {
        VisitConfig { min_dwell_s: (self.thresholds.min_dwell_hours * 3600.0).round() as i64 }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        GridSpec::new(g.lat_min, g.lat_max, g.lon_min, g.lon_max, g.cell_size_deg)
            .map_err(|e| PipelineError::Usage(e.to_string()))
    }

    pub fn subdivision(&self) -> Subdivision {
        Subdivision { step_deg: self.grid.step_deg }
    }

    pub fn scheme(&self) -> Result<SizeClassScheme> {
        let mut scheme = match &self.inputs.size_classes {
            Some(p) => SizeClassScheme::load(p).map_err(|e| registry_error(p, e))?,
            None => SizeClassScheme::default(),
        };
        if let Some(v) = self.thresholds.cargo_min_dwt {
            scheme.inclusion.cargo_min_dwt = v;
        }
        if let Some(v) = self.thresholds.passenger_min_dwt {
            scheme.inclusion.passenger_min_dwt = v;
        }
        Ok(scheme)
    }

    pub fn registry(&self) -> Result<FleetRegistry> {
        let path = self.inputs.fleet.as_ref().ok_or_else(|| PipelineError::Usage("a fleet file is required".into()))?;
        FleetRegistry::load(path, &self.scheme()?).map_err(|e| registry_error(path, e))
    }

    pub fn ports(&self) -> Result<Vec<Port>> {
        let path = self.inputs.ports.as_ref().ok_or_else(|| PipelineError::Usage("a ports file is required".into()))?;
        let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
        read_ports(file).map_err(|e| PipelineError::contract(format!("{}: {e}", path.display())))
    }

    pub fn groups(&self, registry: &FleetRegistry) -> Result<Vec<GroupKey>> {
        if self.groups.include.is_empty() {
            return Ok(registry_groups(registry));
        }
        let mut keys = BTreeSet::new();
        for g in &self.groups.include {
            keys.insert(g.parse::<GroupKey>().map_err(|e| PipelineError::Usage(e.to_string()))?);
        }
        Ok(keys.into_iter().collect())
    }
}

/// Read every input file in order.
pub fn ingest(paths: &[PathBuf]) -> Result<Ingested> {
    let mut all = Ingested::default();
    for p in paths {
        let part = read_input_path(p).map_err(|e| PipelineError::io(p, e))?;
        all.fixes.extend(part.fixes);
        all.statics.extend(part.statics);
        all.stats.merge(&part.stats);
    }
    Ok(all)
}

/// Counts written to `stats.json` by every run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub ingest: IngestStats,
    pub fixes: u64,
    pub cleaning: CleaningStats,
    pub vessels_registered: u64,
    pub vessels_included: u64,
    pub vessels_excluded: u64,
    pub unknown_mmsis: u64,
    pub tracks: u64,
    pub episodes: u64,
}

impl RunStats {
    /// Decoded lines, fixes and cleaning outcomes add up.
    pub fn reconciles(&self) -> bool {
        self.ingest.decode.reconciles()
            && self.fixes == self.ingest.decode.positions + self.ingest.csv_rows - self.ingest.csv_errors
            && self.cleaning.input == self.fixes
            && self.cleaning.retained + self.cleaning.dropped() == self.cleaning.input
    }
}

/// Everything downstream stages need.
#[derive(Debug, Clone)]
pub struct Reconstructed {
    pub registry: FleetRegistry,
    pub tracks: Vec<LabeledTrack>,
    pub stats: RunStats,
}

/// Ingest, clean, split and label.
pub fn reconstruct_tracks(cfg: &RunConfig) -> Result<Reconstructed> {
    let registry = cfg.registry()?;
    let ingested = ingest(&cfg.inputs.fixes)?;
    Ok(reconstruct_from(ingested.fixes, ingested.stats, registry, &cfg.track_config()))
}

pub fn reconstruct_from(
    fixes: Vec<PositionFix>,
    ingest: IngestStats,
    registry: FleetRegistry,
    track_cfg: &TrackConfig,
) -> Reconstructed {
    let n = fixes.len() as u64;
    let (tracks, cleaning) = reconstruct(fixes, &registry, track_cfg);
    let stats = RunStats {
        ingest,
        fixes: n,
        cleaning,
        vessels_registered: registry.len() as u64,
        vessels_included: registry.included_count() as u64,
        vessels_excluded: (registry.len() - registry.included_count()) as u64,
        unknown_mmsis: registry.unknown_mmsis().len() as u64,
        tracks: tracks.len() as u64,
        episodes: tracks.iter().map(|t| t.episodes.len() as u64).sum(),
    };
    Reconstructed { registry, tracks, stats }
}

fn date_range(w: &TimeWindow) -> DateRange {
    DateRange { first: epoch_to_date(w.start), last: epoch_to_date(w.end - 1) }
}

/// Indicator series for every configured group and granularity.
pub fn indicators(cfg: &RunConfig, rec: &Reconstructed) -> Result<Vec<IndicatorSeries>> {
    let range = cfg.windows.indicators.as_ref().map(WindowSpec::resolve).transpose()?.map(|w| date_range(&w));
    let vd = VesselDays::from_tracks(&rec.tracks);
    let mut out = Vec::new();
    for group in cfg.groups(&rec.registry)? {
        for g in &cfg.groups.granularity {
            out.push(indicator_series(&vd, &rec.registry, &group, *g, range));
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct HistoryRow {
    group: String,
    year: i32,
    month: u32,
    value: f64,
    #[serde(default)]
    kind: Option<String>,
}

/// Read monthly values. A `kind` column, when present, marks printed
/// forecasts (`forecast`) that are not observations and are skipped.
pub fn read_history(path: &Path) -> Result<Vec<MonthlyValue>> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<HistoryRow>().enumerate() {
        let row = row.map_err(|e| PipelineError::contract(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if row.kind.as_deref() == Some("forecast") {
            continue;
        }
        out.push(MonthlyValue { group: row.group, year: row.year, month: row.month, value: row.value });
    }
    Ok(out)
}

/// Monthly values of the monthly indicator series.
pub fn monthly_values(series: &[IndicatorSeries]) -> Vec<MonthlyValue> {
    series
        .iter()
        .filter(|s| s.granularity == Granularity::Monthly)
        .flat_map(|s| {
            s.points.iter().map(move |p| MonthlyValue {
                group: s.group.to_string(),
                year: p.date.year(),
                month: p.date.month(),
                value: p.cnm_nmi,
            })
        })
        .collect()
}

pub fn forecast_rows(cfg: &RunConfig, values: &[MonthlyValue]) -> Vec<ForecastPoint> {
    let Some(target) = cfg.forecast.target_year.or_else(|| values.iter().map(|v| v.year).max()) else {
        return Vec::new();
    };
    forecast_table(values, target)
}

pub fn density(cfg: &RunConfig, rec: &Reconstructed) -> Result<DensityGrid> {
    let spec = cfg.grid_spec()?;
    let window = cfg
        .windows
        .density
        .as_ref()
        .ok_or_else(|| PipelineError::Usage("density needs windows.density".into()))?
        .resolve()?;
    Ok(accumulate(&window_tracklets(&rec.tracks, &window), &spec, cfg.subdivision()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpeed {
    pub window: TimeWindow,
    pub baseline: TimeWindow,
    pub delta_pct: Option<f64>,
}

/// Regional speed change when a region and both windows are configured.
pub fn region_speed(cfg: &RunConfig, rec: &Reconstructed) -> Result<Option<RegionSpeed>> {
    let (Some(path), Some(w), Some(b)) = (&cfg.inputs.region, &cfg.windows.density, &cfg.windows.baseline) else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PipelineError::contract(format!("{}: {e}", path.display())))?;
    let polygon = Polygon::from_geojson(&json)
        .ok_or_else(|| PipelineError::contract(format!("{}: no polygon", path.display())))?;
    let (window, baseline) = (w.resolve()?, b.resolve()?);
    if window.overlaps(&baseline) {
        return Err(PipelineError::Usage("density and baseline windows overlap".into()));
    }
    let fixes: Vec<PositionFix> = rec.tracks.iter().flat_map(|t| t.track.fixes.iter().cloned()).collect();
    let delta = region_speed_delta(&fixes, &polygon, &window, &baseline, cfg.thresholds.idle_speed_knots).ok();
    Ok(Some(RegionSpeed { window, baseline, delta_pct: delta }))
}

pub fn port_calls(cfg: &RunConfig, rec: &Reconstructed) -> Result<(Vec<Port>, Vec<Visit>, PortGraph)> {
    let ports = cfg.ports()?;
    let visits = detect_visits(&rec.tracks, &ports, &cfg.visit_config());
    let graph = PortGraph::from_visits(ports.iter().cloned(), &visits);
    Ok((ports, visits, graph))
}
