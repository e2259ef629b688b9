//! Navigated-length density on an equal-angle lat/lon grid.
//!
//! A tracklet's length is apportioned to cells by cutting it into equal
//! great-circle sub-segments no longer than the subdivision step and
//! crediting each sub-segment to the cell holding its midpoint. Length is
//! conserved exactly: what does not land in the grid goes to `spill_nmi`.

use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::PositionFix;
use crate::geo::{central_angle, interpolate, wrap_lon_delta, LatLon, Polygon, EARTH_RADIUS_NMI};
use crate::tracks::{fix_activity, Activity, LabeledTrack, Tracklet};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("invalid grid spec: {0}")]
    BadSpec(String),
    #[error("grid specs differ")]
    SpecMismatch,
    #[error("no active fixes in region for window {0}")]
    NoData(&'static str),
    #[error("grid csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("grid csv row {row},{col} outside the grid")]
    CellOutOfRange { row: usize, col: usize },
}

/// Half-open epoch interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, epoch: i64) -> bool {
        (self.start..self.end).contains(&epoch)
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Grid over `[lat_min, lat_max] × [lon_min, lon_max]`. The last row and
/// column are clipped to the bbox when the cell size does not divide it.
/// Row 0 is the southernmost row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    #[serde(default = "GridSpec::default_cell")]
    pub cell_size_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lat_min: -90.0, lat_max: 90.0, lon_min: -180.0, lon_max: 180.0, cell_size_deg: Self::default_cell() }
    }
}

impl GridSpec {
    fn default_cell() -> f64 {
        0.1
    }

    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        cell_size_deg: f64,
    ) -> Result<Self, DensityError> {
        let spec = Self { lat_min, lat_max, lon_min, lon_max, cell_size_deg };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let bad = |m: &str| Err(DensityError::BadSpec(m.to_string()));
        let all = [self.lat_min, self.lat_max, self.lon_min, self.lon_max, self.cell_size_deg];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite bound");
        }
        if !(-90.0..=90.0).contains(&self.lat_min) || !(-90.0..=90.0).contains(&self.lat_max) {
            return bad("latitude outside [-90, 90]");
        }
        if !(-180.0..=180.0).contains(&self.lon_min) || !(-180.0..=180.0).contains(&self.lon_max) {
            return bad("longitude outside [-180, 180]");
        }
        if self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return bad("degenerate bbox");
        }
        if self.cell_size_deg <= 0.0 {
            return bad("cell size must be positive");
        }
        Ok(())
    }

    fn count(extent: f64, cell: f64) -> usize {
        // a remainder under half a millionth of a cell is float noise
        ((extent / cell) - 5e-7).ceil().max(1.0) as usize
    }

    pub fn rows(&self) -> usize {
        Self::count(self.lat_max - self.lat_min, self.cell_size_deg)
    }

    pub fn cols(&self) -> usize {
        Self::count(self.lon_max - self.lon_min, self.cell_size_deg)
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same bbox at half the cell size.
    pub fn refined(&self) -> Self {
        Self { cell_size_deg: self.cell_size_deg / 2.0, ..*self }
    }

    /// Latitude bounds (south, north) of a row.
    pub fn row_bounds(&self, row: usize) -> (f64, f64) {
        let s = self.lat_min + row as f64 * self.cell_size_deg;
        (s, (s + self.cell_size_deg).min(self.lat_max))
    }

    /// Longitude bounds (west, east) of a column.
    pub fn col_bounds(&self, col: usize) -> (f64, f64) {
        let w = self.lon_min + col as f64 * self.cell_size_deg;
        (w, (w + self.cell_size_deg).min(self.lon_max))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> LatLon {
        let (s, n) = self.row_bounds(row);
        let (w, e) = self.col_bounds(col);
        LatLon::new((s + n) / 2.0, (w + e) / 2.0)
    }

    /// Cell holding a point; points on the north or east bbox edge belong
    /// to the last row or column.
    pub fn cell_of(&self, p: LatLon) -> Option<(usize, usize)> {
        let lon = if p.lon < self.lon_min {
            p.lon + 360.0
        } else if p.lon > self.lon_max {
            p.lon - 360.0
        } else {
            p.lon
        };
        if !(self.lat_min..=self.lat_max).contains(&p.lat) || !(self.lon_min..=self.lon_max).contains(&lon) {
            return None;
        }
        let row = (((p.lat - self.lat_min) / self.cell_size_deg) as usize).min(self.rows() - 1);
        let col = (((lon - self.lon_min) / self.cell_size_deg) as usize).min(self.cols() - 1);
        Some((row, col))
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    /// Spherical area of a cell in nmi².
    pub fn cell_area_nmi2(&self, row: usize, col: usize) -> f64 {
        let (s, n) = self.row_bounds(row);
        let (w, e) = self.col_bounds(col);
        zone_area_nmi2(s, n, e - w)
    }
}

/// Area of the lat/lon rectangle between latitudes `south` and `north`
/// spanning `dlon_deg` degrees of longitude.
pub fn zone_area_nmi2(south: f64, north: f64, dlon_deg: f64) -> f64 {
    EARTH_RADIUS_NMI.powi(2) * dlon_deg.to_radians() * (north.to_radians().sin() - south.to_radians().sin())
}

/// Area of a full-width cell in `row`.
pub fn cell_area_nmi2(spec: &GridSpec, row: usize) -> f64 {
    let (s, n) = spec.row_bounds(row);
    zone_area_nmi2(s, n, spec.cell_size_deg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    /// Row-major, row 0 south; nmi of track per nmi² of cell.
    pub values: Vec<f64>,
    /// Length that fell outside the bbox.
    pub spill_nmi: f64,
}

impl DensityGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { values: vec![0.0; spec.len()], spec, spill_nmi: 0.0 }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[self.spec.index(row, col)]
    }

    /// Σ value·area, i.e. the in-grid navigated length.
    pub fn integral_nmi(&self) -> f64 {
        self.cells().map(|(r, c, v)| v * self.spec.cell_area_nmi2(r, c)).sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.spec.cols();
        self.values.iter().enumerate().map(move |(i, v)| (i / cols, i % cols, *v))
    }

    /// Sum of value·area over each 2×2 block of a grid built on the
    /// refined spec, expressed as densities of this (coarse) spec.
    pub fn coarsen(&self, coarse: &GridSpec) -> Result<DensityGrid, DensityError> {
        if coarse.refined() != self.spec {
            return Err(DensityError::SpecMismatch);
        }
        let mut lengths = vec![0.0; coarse.len()];
        for (r, c, v) in self.cells() {
            lengths[coarse.index(r / 2, c / 2)] += v * self.spec.cell_area_nmi2(r, c);
        }
        Ok(from_lengths(*coarse, lengths, self.spill_nmi))
    }

    /// Grid CSV `row,col,lat_center,lon_center,value`, row-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DensityError> {
        write_grid_csv(&self.spec, &self.values, out)
    }

    /// Read values written by [`DensityGrid::write_csv`] for a known spec.
    pub fn read_csv<R: Read>(spec: GridSpec, spill_nmi: f64, input: R) -> Result<Self, DensityError> {
        let mut grid = Self::zeros(spec);
        grid.spill_nmi = spill_nmi;
        let mut rdr = csv::Reader::from_reader(input);
        for rec in rdr.deserialize::<GridRow>() {
            let rec = rec?;
            if rec.row >= spec.rows() || rec.col >= spec.cols() {
                return Err(DensityError::CellOutOfRange { row: rec.row, col: rec.col });
            }
            grid.values[spec.index(rec.row, rec.col)] = rec.value;
        }
        Ok(grid)
    }

    pub fn write_geojson<W: Write>(&self, out: W) -> io::Result<()> {
        write_grid_geojson(&self.spec, &self.values, out)
    }

    /// 8-bit grayscale raster, north up, linear in value up to the maximum.
    pub fn write_pgm<W: Write>(&self, out: W) -> io::Result<()> {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        write_pgm(&self.spec, out, |v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 }, &self.values)
    }
}

fn from_lengths(spec: GridSpec, lengths: Vec<f64>, spill_nmi: f64) -> DensityGrid {
    let cols = spec.cols();
    let values = lengths
        .into_iter()
        .enumerate()
        .map(|(i, len)| if len == 0.0 { 0.0 } else { len / spec.cell_area_nmi2(i / cols, i % cols) })
        .collect();
    DensityGrid { spec, values, spill_nmi }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    row: usize,
    col: usize,
    lat_center: f64,
    lon_center: f64,
    value: f64,
}

fn write_grid_csv<W: Write>(spec: &GridSpec, values: &[f64], out: W) -> Result<(), DensityError> {
    let mut w = csv::Writer::from_writer(out);
    let cols = spec.cols();
    for (i, v) in values.iter().enumerate() {
        let (row, col) = (i / cols, i % cols);
        let c = spec.cell_center(row, col);
        w.serialize(GridRow { row, col, lat_center: c.lat, lon_center: c.lon, value: *v })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_grid_geojson<W: Write>(spec: &GridSpec, values: &[f64], mut out: W) -> io::Result<()> {
    let cols = spec.cols();
    let features: Vec<serde_json::Value> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| {
            let (row, col) = (i / cols, i % cols);
            let (s, n) = spec.row_bounds(row);
            let (w, e) = spec.col_bounds(col);
            serde_json::json!({
                "type": "Feature",
                "properties": { "row": row, "col": col, "value": v },
                "geometry": { "type": "Polygon", "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]] }
            })
        })
        .collect();
    let fc = serde_json::json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_writer(&mut out, &fc)?;
    out.write_all(b"\n")
}

fn write_pgm<W: Write>(spec: &GridSpec, mut out: W, shade: impl Fn(f64) -> u8, values: &[f64]) -> io::Result<()> {
    let (rows, cols) = (spec.rows(), spec.cols());
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    for row in (0..rows).rev() {
        let line: Vec<u8> = values[row * cols..(row + 1) * cols].iter().map(|v| shade(*v)).collect();
        out.write_all(&line)?;
    }
    Ok(())
}

/// Subdivision used by [`accumulate`]; `None` means a quarter cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Subdivision {
    pub step_deg: Option<f64>,
}

impl Subdivision {
    pub fn step(step_deg: f64) -> Self {
        Self { step_deg: Some(step_deg) }
    }

    fn resolve(&self, spec: &GridSpec) -> f64 {
        self.step_deg.unwrap_or(spec.cell_size_deg / 4.0)
    }
}

/// Number of equal pieces so that no piece spans more than `step_deg` of
/// arc, latitude or longitude.
pub fn pieces(a: LatLon, b: LatLon, step_deg: f64) -> usize {
    let span = central_angle(a, b).to_degrees().max((b.lat - a.lat).abs()).max(wrap_lon_delta(b.lon - a.lon).abs());
    ((span / step_deg).ceil() as usize).max(1)
}

/// Credit one tracklet's length to `(cell index, nmi)` pairs; the second
/// value is the spilled length.
fn apportion(t: &Tracklet, spec: &GridSpec, step_deg: f64, out: &mut Vec<(usize, f64)>) -> f64 {
    if t.length_nmi == 0.0 {
        return 0.0;
    }
    let n = pieces(t.start, t.end, step_deg);
    let piece = t.length_nmi / n as f64;
    let mut spill = 0.0;
    for k in 0..n {
        let mid = interpolate(t.start, t.end, (k as f64 + 0.5) / n as f64);
        match spec.cell_of(mid) {
            Some((r, c)) => out.push((spec.index(r, c), piece)),
            None => spill += piece,
        }
    }
    spill
}

const CHUNK: usize = 512;

/// Density of the given tracklets. Deterministic: tracklets are processed
/// in fixed chunks whose partial sums are merged in input order.
pub fn accumulate(tracklets: &[Tracklet], spec: &GridSpec, sub: Subdivision) -> DensityGrid {
    let step = sub.resolve(spec);
    let partials: Vec<(Vec<(usize, f64)>, f64)> = tracklets
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut credits = Vec::new();
            let mut spill = 0.0;
            for t in chunk {
                spill += apportion(t, spec, step, &mut credits);
            }
            (credits, spill)
        })
        .collect();
    let mut lengths = vec![0.0; spec.len()];
    let mut spill = 0.0;
    for (credits, s) in partials {
        for (i, len) in credits {
            lengths[i] += len;
        }
        spill += s;
    }
    from_lengths(*spec, lengths, spill)
}

/// Active tracklets whose start falls in `window`.
pub fn window_tracklets(tracks: &[LabeledTrack], window: &TimeWindow) -> Vec<Tracklet> {
    tracks
        .iter()
        .flat_map(|lt| lt.labeled_tracklets())
        .filter(|(t, a)| *a == Activity::Active && window.contains(t.start_epoch))
        .map(|(t, _)| t)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl DiffGrid {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[self.spec.index(row, col)]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DensityError> {
        write_grid_csv(&self.spec, &self.values, out)
    }

    pub fn write_geojson<W: Write>(&self, out: W) -> io::Result<()> {
        write_grid_geojson(&self.spec, &self.values, out)
    }

    /// Raster with zero at mid-gray, scaled by the largest magnitude.
    pub fn write_pgm<W: Write>(&self, out: W) -> io::Result<()> {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let shade = |v: f64| if max > 0.0 { (127.5 + 127.5 * v / max).round().clamp(0.0, 255.0) as u8 } else { 128 };
        write_pgm(&self.spec, out, shade, &self.values)
    }
}

/// Cellwise `b − a`.
pub fn diff(b: &DensityGrid, a: &DensityGrid) -> Result<DiffGrid, DensityError> {
    if b.spec != a.spec {
        return Err(DensityError::SpecMismatch);
    }
    Ok(DiffGrid { spec: b.spec, values: b.values.iter().zip(&a.values).map(|(x, y)| x - y).collect() })
}

fn mean_active_sog(
    fixes: &[PositionFix],
    polygon: &Polygon,
    window: &TimeWindow,
    idle_speed_knots: f64,
) -> Option<f64> {
    let (sum, n) = fixes
        .iter()
        .filter(|f| f.epoch.is_some_and(|t| window.contains(t)))
        .filter(|f| fix_activity(f, idle_speed_knots) == Activity::Active)
        .filter_map(|f| Some((f.sog_knots?, f.position()?)))
        .filter(|(_, p)| polygon.contains(*p))
        .fold((0.0, 0usize), |(s, n), (sog, _)| (s + sog, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Percent change of the mean active speed inside `polygon` from
/// `window_a` to `window_b`.
pub fn region_speed_delta(
    fixes: &[PositionFix],
    polygon: &Polygon,
    window_b: &TimeWindow,
    window_a: &TimeWindow,
    idle_speed_knots: f64,
) -> Result<f64, DensityError> {
    let b = mean_active_sog(fixes, polygon, window_b, idle_speed_knots).ok_or(DensityError::NoData("b"))?;
    let a = mean_active_sog(fixes, polygon, window_a, idle_speed_knots).ok_or(DensityError::NoData("a"))?;
    if a <= 0.0 {
        return Err(DensityError::NoData("a"));
    }
    Ok(100.0 * (b - a) / a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::NavStatus;
    use crate::geo::great_circle_nmi;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tracklet(a: LatLon, b: LatLon) -> Tracklet {
        Tracklet {
            mmsi: 1,
            start_epoch: 0,
            end_epoch: 3600,
            start: a,
            end: b,
            start_sog: Some(10.0),
            length_nmi: great_circle_nmi(a, b),
        }
    }

    /// Midpoint-rule quadrature of cos(lat) over the cell.
    fn area_by_quadrature(s: f64, n: f64, dlon: f64) -> f64 {
        let steps = 20_000;
        let h = (n - s).to_radians() / steps as f64;
        let integral: f64 = (0..steps).map(|i| (s.to_radians() + (i as f64 + 0.5) * h).cos() * h).sum();
        EARTH_RADIUS_NMI * EARTH_RADIUS_NMI * dlon.to_radians() * integral
    }

    #[test]
    fn cell_area_matches_quadrature() {
        let spec = GridSpec::new(0.0, 61.0, 0.0, 1.0, 1.0).unwrap();
        let eq = cell_area_nmi2(&spec, 0);
        assert!((eq - area_by_quadrature(0.0, 1.0, 1.0)).abs() < 1e-6);
        assert!((eq - 3604.6).abs() < 0.1, "{eq}");
        let north = cell_area_nmi2(&spec, 60);
        assert!((north - area_by_quadrature(60.0, 61.0, 1.0)).abs() < 1e-6);
        let ratio = (61f64.to_radians().sin() - 60f64.to_radians().sin()) / 1f64.to_radians().sin();
        assert!((north / eq - ratio).abs() < 1e-12);
        assert!(zone_area_nmi2(0.0, 1.0, 1e-12) < 1e-6);
    }

    #[test]
    fn rows_and_cols_clip() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.05, 0.1).unwrap();
        assert_eq!(spec.rows(), 10);
        assert_eq!(spec.cols(), 11);
        let (w, e) = spec.col_bounds(10);
        assert!((e - w - 0.05).abs() < 1e-12);
        assert_eq!(spec.cell_of(LatLon::new(1.0, 1.05)), Some((9, 10)));
        assert_eq!(spec.cell_of(LatLon::new(1.01, 0.5)), None);
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 0.1).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_cell_tracklet() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let a = LatLon::new(0.1, 0.1);
        let b = LatLon::new(0.1 + 5.0 / 60.04, 0.1);
        let grid = accumulate(&[tracklet(a, b)], &spec, Subdivision::default());
        let len = great_circle_nmi(a, b);
        assert!((grid.value(0, 0) - len / spec.cell_area_nmi2(0, 0)).abs() < 1e-15);
        assert_eq!(grid.values.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(grid.spill_nmi, 0.0);
    }

    #[test]
    fn empty_input_is_zero_grid() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.1).unwrap();
        let grid = accumulate(&[], &spec, Subdivision::default());
        assert!(grid.values.iter().all(|v| *v == 0.0));
        assert_eq!(grid, DensityGrid::zeros(spec));
    }

    #[test]
    fn diff_semantics() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let mut a = DensityGrid::zeros(spec);
        let mut b = DensityGrid::zeros(spec);
        a.values[0] = 0.6;
        b.values[0] = 0.4;
        assert!((diff(&b, &a).unwrap().value(0, 0) + 0.2).abs() < 1e-12);
        assert!(diff(&a, &a).unwrap().values.iter().all(|v| *v == 0.0));
        let ab = diff(&a, &b).unwrap();
        let ba = diff(&b, &a).unwrap();
        assert!(ab.values.iter().zip(&ba.values).all(|(x, y)| *x == -*y));
        let other = DensityGrid::zeros(GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap());
        assert!(matches!(diff(&a, &other), Err(DensityError::SpecMismatch)));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let spec = GridSpec::new(10.0, 11.0, 20.0, 21.0, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut grid = DensityGrid::zeros(spec);
        for v in grid.values.iter_mut() {
            *v = rng.gen::<f64>() / 3.0;
        }
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("row,col,lat_center,lon_center,value\n"));
        assert_eq!(DensityGrid::read_csv(spec, 0.0, buf.as_slice()).unwrap(), grid);
    }

    #[test]
    fn pgm_header_and_size() {
        let spec = GridSpec::new(0.0, 1.0, 0.0, 2.0, 0.5).unwrap();
        let mut grid = DensityGrid::zeros(spec);
        grid.values[0] = 1.0;
        let mut buf = Vec::new();
        grid.write_pgm(&mut buf).unwrap();
        let header = b"P5\n4 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 8);
        // row 0 is south, so it is the last raster line
        assert_eq!(buf[header.len() + 4], 255);
    }

    fn moving(t: i64, lat: f64, lon: f64, sog: f64) -> PositionFix {
        PositionFix::new(1, t, lat, lon).with_motion(NavStatus::UnderWayUsingEngine, Some(sog))
    }

    #[test]
    fn region_speed_examples() {
        let poly = Polygon::new(vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(1.0, 1.0),
            LatLon::new(1.0, 0.0),
        ]);
        let wa = TimeWindow::new(0, 100);
        let wb = TimeWindow::new(100, 200);
        let mut fixes = Vec::new();
        for (i, sog) in [10.0, 12.0, 14.0].iter().enumerate() {
            fixes.push(moving(i as i64, 0.5, 0.5, *sog));
            fixes.push(moving(100 + i as i64, 0.5, 0.5, 0.9 * sog));
        }
        // outside the polygon and idle fixes are ignored
        fixes.push(moving(150, 5.0, 5.0, 30.0));
        fixes.push(moving(150, 0.5, 0.5, 1.0));
        let d = region_speed_delta(&fixes, &poly, &wb, &wa, 2.0).unwrap();
        assert!((d + 10.0).abs() < 1e-9, "{d}");
        assert!(region_speed_delta(&fixes, &poly, &wa, &wa, 2.0).unwrap().abs() < 1e-12);
        assert!(matches!(
            region_speed_delta(&fixes, &poly, &TimeWindow::new(500, 600), &wa, 2.0),
            Err(DensityError::NoData(_))
        ));
    }

    /// Even-odd ray casting, written independently of the winding rule.
    fn ray_cast(ring: &[LatLon], p: LatLon) -> bool {
        let mut inside = false;
        let mut j = ring.len() - 1;
        for i in 0..ring.len() {
            let (yi, xi, yj, xj) = (ring[i].lat, ring[i].lon, ring[j].lat, ring[j].lon);
            if (yi > p.lat) != (yj > p.lat) && p.lon < (xj - xi) * (p.lat - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    #[test]
    fn polygon_membership_matches_ray_casting() {
        let ring = vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 10.0),
            LatLon::new(6.0, 10.0),
            LatLon::new(3.0, 5.0),
            LatLon::new(8.0, 2.0),
            LatLon::new(4.0, -1.0),
        ];
        let poly = Polygon::new(ring.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = LatLon::new(rng.gen_range(-2.0..10.0), rng.gen_range(-3.0..12.0));
            assert_eq!(poly.contains(p), ray_cast(&ring, p), "{p:?}");
        }
    }

    fn random_tracklets(seed: u64, n: usize) -> Vec<Tracklet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a = LatLon::new(rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..3.0));
                let b = LatLon::new(a.lat + rng.gen_range(-0.7..0.7), a.lon + rng.gen_range(-0.7..0.7));
                tracklet(a, b)
            })
            .collect()
    }

    #[test]
    fn integral_identity_is_exact() {
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.1).unwrap();
        let ts = random_tracklets(3, 2000);
        let total: f64 = ts.iter().map(|t| t.length_nmi).sum();
        let grid = accumulate(&ts, &spec, Subdivision::default());
        assert!(grid.values.iter().all(|v| *v >= 0.0));
        assert!(((grid.integral_nmi() + grid.spill_nmi) - total).abs() / total < 1e-9);
        assert!(grid.spill_nmi > 0.0);
    }

    #[test]
    fn refinement_reaggregates_exactly() {
        let coarse = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.2).unwrap();
        let ts = random_tracklets(5, 500);
        let step = Subdivision::step(0.02);
        let a = accumulate(&ts, &coarse, step);
        let b = accumulate(&ts, &coarse.refined(), step).coarsen(&coarse).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12), "{x} {y}");
        }
        assert_eq!(a.spill_nmi, b.spill_nmi);
    }

    proptest! {
        #[test]
        fn order_independent(seed in 0u64..1000) {
            let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.25).unwrap();
            let ts = random_tracklets(seed, 40);
            let mut rev = ts.clone();
            rev.reverse();
            let a = accumulate(&ts, &spec, Subdivision::default());
            let b = accumulate(&rev, &spec, Subdivision::default());
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12));
            }
        }
    }
}
