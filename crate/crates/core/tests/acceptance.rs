//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seamiles::codec::{
    encode_position, encode_static, Decoded, Decoder, NavStatus, PositionFix, RawSentence, StaticReport,
};
use seamiles::density::{accumulate, GridSpec, Subdivision};
use seamiles::geo::LatLon;
use seamiles::metrics::{delta_pct, forecast, indicator_series, Granularity, GroupKey, VesselDays};
use seamiles::ports::{detect_visits, linear_fit, simulate, Scenario, SimOutput, VisitConfig};
use seamiles::registry::{FleetRegistry, SizeClassScheme};
use seamiles::tracks::{build_tracks, clean_with, reconstruct, Admission, TrackConfig, Tracklet};

const CATEGORIES: [&str; 4] = ["container", "dry_bulk", "wet_bulk", "passenger"];
const EARTH_RADIUS_NMI: f64 = 6_371_008.8 / 1852.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

/// (group, year, month, kind) -> value from the published monthly table.
fn monthly_table() -> BTreeMap<(String, i32, u32, String), f64> {
    let mut rdr = csv::Reader::from_path(repo_path("tests/data/monthly_cnm.csv")).expect("table present");
    rdr.records()
        .map(|r| {
            let r = r.expect("well-formed row");
            let key = (r[0].to_string(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].to_string());
            (key, r[4].parse().unwrap())
        })
        .collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn forecast_reproduction() -> Outcome {
    let t = monthly_table();
    let mut worst = (0.0f64, String::new());
    let mut n = 0;
    for group in CATEGORIES {
        for month in 1..=6 {
            let history: Vec<f64> =
                (2016..=2019).map(|y| t[&(group.to_string(), y, month, "history".to_string())]).collect();
            let f = forecast(&history).map_err(|e| e.to_string())?;
            let printed = t[&(group.to_string(), 2020, month, "forecast".to_string())];
            let err = (f - printed).abs();
            if err >= worst.0 {
                worst = (err, format!("{group} month {month}: {f:.4} vs {printed}"));
            }
            n += 1;
        }
    }
    check(worst.0 <= 0.02 + 1e-9, format!("{n} forecasts, worst |err| {:.4} ({})", worst.0, worst.1))
}

fn delta_reproduction() -> Outcome {
    let t = monthly_table();
    let cases = [
        ("container", 6, -13.77),
        ("passenger", 5, -45.3),
        ("wet_bulk", 2, 5.17),
        ("dry_bulk", 2, 1.11),
        ("dry_bulk", 6, -3.32),
    ];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (group, month, published) in cases {
        let f = t[&(group.to_string(), 2020, month, "forecast".to_string())];
        let a = t[&(group.to_string(), 2020, month, "actual".to_string())];
        let d = delta_pct(f, a).map_err(|e| e.to_string())?;
        worst = worst.max((d - published).abs());
        lines.push(format!("{group}/{month} {d:+.2}"));
    }
    check(worst <= 0.05 + 1e-9, format!("{}; worst |err| {worst:.3} pp", lines.join(", ")))
}

fn category_sums() -> Outcome {
    let t = monthly_table();
    let mut worst = 0.0f64;
    let mut rows = 0;
    for ((group, year, month, kind), total) in &t {
        if group != "total" {
            continue;
        }
        let sum: f64 = CATEGORIES.iter().map(|c| t[&(c.to_string(), *year, *month, kind.clone())]).sum();
        worst = worst.max((sum - total).abs());
        rows += 1;
    }
    check(rows == 36 && worst <= 0.03 + 1e-9, format!("{rows} rows, worst |sum - total| {worst:.3}"))
}

fn load_scenario(name: &str) -> Scenario {
    let text = fs::read_to_string(repo_path(&format!("../../scenarios/{name}"))).expect("scenario present");
    Scenario::from_toml_str(&text).expect("valid scenario")
}

fn end_to_end_oracle() -> Outcome {
    let started = Instant::now();
    let scn = load_scenario("three_port.toml");
    if scn.ports.len() != 3 || scn.vessel_count() != 20 || scn.days != 60 {
        return Err("scenario is not 3 ports / 20 vessels / 60 days".into());
    }
    let sim = simulate(&scn).map_err(|e| e.to_string())?;
    let feed = sim.to_nmea(scn.start_epoch().unwrap()).map_err(|e| e.to_string())?.join("\n");
    let ingested = seamiles::io::read_nmea(Cursor::new(feed)).map_err(|e| e.to_string())?;
    if ingested.stats.decode.errors() > 0 || ingested.statics.len() != sim.statics.len() {
        return Err(format!("decode lost data: {:?}", ingested.stats.decode));
    }
    let registry = FleetRegistry::from_inputs(&sim.fleet, &SizeClassScheme::default());
    let cfg = TrackConfig::default();
    let (tracks, cleaning) = reconstruct(ingested.fixes, &registry, &cfg);
    let series =
        indicator_series(&VesselDays::from_tracks(&tracks), &registry, &GroupKey::Total, Granularity::Daily, None);
    let cnm: f64 = series.points.iter().map(|p| p.cnm_nmi).sum();
    let visits = detect_visits(&tracks, &scn.ports, &VisitConfig::default());
    let elapsed = started.elapsed().as_secs_f64();

    let truth = sim.total_cnm_nmi();
    let rel = (cnm - truth).abs() / truth;
    let key = |v: &seamiles::Visit| (v.mmsi, v.port.clone(), v.arrival, v.departure, v.previous_port.clone());
    let got: Vec<_> = visits.iter().map(key).collect();
    let want: Vec<_> = sim.itinerary.iter().map(key).collect();
    let detail = format!(
        "CNM {cnm:.1} vs truth {truth:.1} (rel {rel:.2e}), {} visits vs {} scheduled, {} fixes dropped, {elapsed:.1}s",
        got.len(),
        want.len(),
        cleaning.input - cleaning.retained
    );
    check(rel <= 0.01 && got == want && elapsed < 60.0, detail)
}

fn route_length_invariance() -> Outcome {
    let suez_scn = load_scenario("singapore_rotterdam_suez.toml");
    let cape_scn = load_scenario("singapore_rotterdam_cape.toml");
    let run = |s: &Scenario| -> Result<SimOutput, String> { simulate(s).map_err(|e| e.to_string()) };
    let (suez, cape) = (run(&suez_scn)?, run(&cape_scn)?);
    let ds = suez_scn.leg("SGSIN", "NLRTM").unwrap().length_nmi();
    let dc = cape_scn.leg("SGSIN", "NLRTM").unwrap().length_nmi();
    if suez.pv_series != cape.pv_series {
        return Err("PV series differ".into());
    }
    let mut worst = 0.0f64;
    for (s, c) in suez.cnm_series.iter().zip(&cape.cnm_series) {
        let expected = s.visits as f64 * (dc - ds);
        worst = worst.max((c.cnm_nmi - s.cnm_nmi - expected).abs() / expected.abs().max(1.0));
    }
    let mut slope_err = 0.0f64;
    for (out, d) in [(&suez, ds), (&cape, dc)] {
        let xs: Vec<f64> = out.cnm_series.iter().map(|p| p.visits as f64).collect();
        let ys: Vec<f64> = out.cnm_series.iter().map(|p| p.cnm_nmi).collect();
        let (slope, _) = linear_fit(&xs, &ys).ok_or("no spread in per-period visits")?;
        slope_err = slope_err.max(((slope - d) / d).abs());
    }
    check(
        worst <= 1e-9 && slope_err <= 1e-9,
        format!(
            "Suez {ds:.1} nmi, Cape {dc:.1} nmi, {} journeys; CNM gap rel err {worst:.1e}, slope rel err {slope_err:.1e}",
            suez.graph.total_visits()
        ),
    )
}

fn random_tracklets(rng: &mut ChaCha8Rng, n: usize) -> Vec<Tracklet> {
    (0..n)
        .map(|i| {
            let a = LatLon::new(rng.gen_range(-0.5..2.5), rng.gen_range(-0.5..2.5));
            let b = LatLon::new(a.lat + rng.gen_range(-0.6..0.6), a.lon + rng.gen_range(-0.6..0.6));
            Tracklet {
                mmsi: 1 + i as u32,
                start_epoch: 0,
                end_epoch: 3600,
                start: a,
                end: b,
                start_sog: Some(10.0),
                length_nmi: arc_nmi(a, b),
            }
        })
        .collect()
}

fn unit(p: LatLon) -> [f64; 3] {
    let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

fn arc_nmi(a: LatLon, b: LatLon) -> f64 {
    let (u, v) = (unit(a), unit(b));
    let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    cross.iter().map(|c| c * c).sum::<f64>().sqrt().atan2(dot) * EARTH_RADIUS_NMI
}

/// Length per cell by dense sampling along the great circle.
fn sampled_lengths(ts: &[Tracklet], spec: &GridSpec, spacing_deg: f64) -> Vec<f64> {
    let mut out = vec![0.0; spec.len()];
    for t in ts {
        let (u, v) = (unit(t.start), unit(t.end));
        let omega = (t.length_nmi / EARTH_RADIUS_NMI).max(1e-15);
        let n = ((omega.to_degrees() / spacing_deg).ceil() as usize).max(1);
        for k in 0..n {
            let f = (k as f64 + 0.5) / n as f64;
            let (wa, wb) = (((1.0 - f) * omega).sin() / omega.sin(), (f * omega).sin() / omega.sin());
            let p = [0, 1, 2].map(|i| wa * u[i] + wb * v[i]);
            let ll = LatLon::new(p[2].atan2(p[0].hypot(p[1])).to_degrees(), p[1].atan2(p[0]).to_degrees());
            if let Some((r, c)) = spec.cell_of(ll) {
                out[spec.index(r, c)] += t.length_nmi / n as f64;
            }
        }
    }
    out
}

fn density_integral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.1).unwrap();
    let ts = random_tracklets(&mut rng, 400);
    let total: f64 = ts.iter().map(|t| t.length_nmi).sum();
    let oracle = sampled_lengths(&ts, &spec, 2e-5);
    let steps = [spec.cell_size_deg / 4.0, spec.cell_size_deg / 8.0, spec.cell_size_deg / 16.0];
    let mut identity = Vec::new();
    let mut l1 = Vec::new();
    for step in steps {
        let grid = accumulate(&ts, &spec, Subdivision::step(step));
        identity.push(((grid.integral_nmi() + grid.spill_nmi) - total).abs() / total);
        let err: f64 =
            grid.cells().map(|(r, c, v)| (v * spec.cell_area_nmi2(r, c) - oracle[spec.index(r, c)]).abs()).sum();
        l1.push(err / total);
    }
    let decreasing = l1.windows(2).all(|w| w[1] < w[0]);
    check(
        identity[0] <= 0.005 && identity.iter().all(|e| *e <= 1e-9) && decreasing,
        format!(
            "identity rel err {:.1e}; per-cell L1 rel err at steps cell/4, /8, /16: {:.2e}, {:.2e}, {:.2e}",
            identity[0], l1[0], l1[1], l1[2]
        ),
    )
}

fn fuzzed_fixes(rng: &mut ChaCha8Rng, n: usize) -> Vec<PositionFix> {
    let mut t = 1_577_836_800i64;
    let mut out = Vec::with_capacity(n);
    let mut pos: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for _ in 0..n {
        let mmsi = [0, 211_000_001, 211_000_002, 211_000_003, 999_999_999, 1_234_567_890][rng.gen_range(0..6)];
        t += rng.gen_range(0..1200);
        if rng.gen_bool(0.01) {
            t += 25 * 3600;
        }
        let (lat, lon) = pos.entry(mmsi).or_insert((rng.gen_range(-60.0..60.0), rng.gen_range(-170.0..170.0)));
        if rng.gen_bool(0.05) {
            (*lat, *lon) = (rng.gen_range(-90.0..90.0), rng.gen_range(-180.0..180.0));
        } else {
            *lat = (*lat + rng.gen_range(-0.05..0.05)).clamp(-89.0, 89.0);
            *lon = (*lon + rng.gen_range(-0.05..0.05)).clamp(-179.0, 179.0);
        }
        let mut f = PositionFix::new(mmsi, t - rng.gen_range(0..300), *lat, *lon).with_motion(
            NavStatus::from_code(rng.gen_range(0..16)),
            rng.gen_bool(0.9).then(|| rng.gen_range(0.0..30.0)),
        );
        match rng.gen_range(0..40) {
            0 => f.epoch = None,
            1 => f.lat = None,
            2 => f.lon = Some(181.0),
            _ => {}
        }
        if rng.gen_bool(0.05) {
            out.push(f.clone());
        }
        out.push(f);
    }
    out
}

fn cleaning_contract() -> Outcome {
    let cfg = TrackConfig::default();
    let admit = |m: u32| match m {
        211_000_001 | 211_000_002 => Admission::Included,
        211_000_003 => Admission::Excluded,
        _ => Admission::Unknown,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut streams, mut max_speed, mut tracklets) = (0, 0.0f64, 0usize);
    for _ in 0..300 {
        let n = rng.gen_range(0..2000);
        let fixes = fuzzed_fixes(&mut rng, n);
        let (cleaned, stats) = clean_with(fixes.clone(), admit, &cfg);
        if stats.input != fixes.len() as u64 || stats.retained + stats.dropped() != stats.input {
            return Err(format!("counts do not reconcile: {stats:?}"));
        }
        let (again, stats2) = clean_with(cleaned.clone(), admit, &cfg);
        if again != cleaned || stats2.dropped() != 0 {
            return Err("cleaning is not idempotent".into());
        }
        for track in build_tracks(cleaned, &cfg) {
            for t in track.tracklets() {
                if t.duration_s() > cfg.gap_s {
                    return Err(format!("tracklet spans a {} s gap", t.duration_s()));
                }
                max_speed = max_speed.max(t.implied_speed_knots());
                tracklets += 1;
            }
        }
        streams += 1;
    }
    // Regular 10-minute reporting broken by one injected 25 h silence.
    let mut split_ok = true;
    for k in 0..200 {
        let cut = rng.gen_range(1..100);
        let fixes: Vec<PositionFix> = (0..100)
            .map(|i| {
                let t = i64::from(i) * 600 + if i >= cut { 25 * 3600 } else { 0 };
                PositionFix::new(
                    211_000_001,
                    t + 1_577_836_800,
                    10.0 + 0.02 * f64::from(i),
                    20.0 + f64::from(k) * 0.001,
                )
                .with_motion(NavStatus::UnderWayUsingEngine, Some(12.0))
            })
            .collect();
        let (cleaned, _) = clean_with(fixes, admit, &cfg);
        let tracks = build_tracks(cleaned, &cfg);
        split_ok &= tracks.len() == 2 && tracks[0].fixes.len() == cut as usize;
    }
    check(
        max_speed <= cfg.speed_gate_knots && split_ok,
        format!("{streams} fuzzed streams, {tracklets} tracklets, max implied speed {max_speed:.2} kn, 200/200 gaps split: {split_ok}"),
    )
}

const SIXBIT_TEXT: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -./";

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| SIXBIT_TEXT[rng.gen_range(0..SIXBIT_TEXT.len())] as char).collect()
}

fn random_fix(rng: &mut ChaCha8Rng) -> PositionFix {
    let epoch = rng.gen_range(1_500_000_000..1_700_000_000);
    let mut f = PositionFix::new(
        rng.gen_range(1..=999_999_999),
        epoch,
        rng.gen_range(-90.0..=90.0),
        rng.gen_range(-180.0..=180.0),
    )
    .with_motion(NavStatus::from_code(rng.gen_range(0..16)), rng.gen_bool(0.9).then(|| rng.gen_range(0.0..=102.2)));
    f.msg_type = rng.gen_range(1..=3);
    f.cog_deg = rng.gen_bool(0.9).then(|| rng.gen_range(0.0..359.94));
    f.heading_deg = rng.gen_bool(0.9).then(|| rng.gen_range(0..360));
    f.utc_second = rng.gen_range(0..64);
    f
}

fn random_static(rng: &mut ChaCha8Rng) -> StaticReport {
    StaticReport {
        mmsi: rng.gen_range(1..=999_999_999),
        imo_number: rng.gen_range(0..1 << 30),
        callsign: random_text(rng, 7),
        name: random_text(rng, 20),
        ship_type_code: rng.gen_range(0..100),
        to_bow_m: rng.gen_range(0..512),
        to_stern_m: rng.gen_range(0..512),
        to_port_m: rng.gen_range(0..64),
        to_starboard_m: rng.gen_range(0..64),
        draught_dm: rng.gen(),
        destination: random_text(rng, 20),
    }
}

fn mutate(rng: &mut ChaCha8Rng, line: &str) -> String {
    let mut bytes = line.as_bytes().to_vec();
    match rng.gen_range(0..6) {
        0 => {
            let i = rng.gen_range(0..bytes.len());
            bytes[i] = rng.gen();
        }
        1 => bytes.truncate(rng.gen_range(0..bytes.len())),
        2 => {
            let i = rng.gen_range(0..=bytes.len());
            bytes.splice(i..i, (0..rng.gen_range(1..8)).map(|_| rng.gen_range(32..127u8)));
        }
        3 => bytes = (0..rng.gen_range(0..90)).map(|_| rng.gen()).collect(),
        4 => {
            let (i, j) = (rng.gen_range(0..bytes.len()), rng.gen_range(0..bytes.len()));
            bytes.swap(i, j);
        }
        _ => {}
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn codec_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut decoder, mut static_decoder) = (Decoder::new(), Decoder::new());
    let n = 100_000;
    for i in 0..n {
        let fix = random_fix(&mut rng);
        let raw = encode_position(&fix, 'A').map_err(|e| e.to_string())?;
        match decoder.decode(&raw) {
            Ok(Decoded::Position(got)) if got == fix.quantized() => {}
            other => return Err(format!("position {i} {fix:?} decoded as {other:?}")),
        }
        let st = random_static(&mut rng);
        let parts =
            encode_static(&st, 'B', (i % 10) as u8, Some(1_600_000_000 + i64::from(i))).map_err(|e| e.to_string())?;
        let mut last = None;
        for p in &parts {
            last = Some(static_decoder.decode(p));
        }
        match last {
            Some(Ok(Decoded::Static(got))) if got == st.quantized() => {}
            other => return Err(format!("static {i} {st:?} decoded as {other:?}")),
        }
    }

    let mut seeds = Vec::new();
    for _ in 0..200 {
        let fix = random_fix(&mut rng);
        seeds.push(encode_position(&fix, 'A').unwrap().line);
        let parts = encode_static(&random_static(&mut rng), 'A', rng.gen_range(0..10), None).unwrap();
        seeds.extend(parts.into_iter().map(|p| p.line));
    }
    let mut fuzz = Decoder::new();
    let lines = 1_000_000;
    let mut feed = Vec::with_capacity(64);
    for k in 0..lines {
        let base = &seeds[rng.gen_range(0..seeds.len())];
        let line = mutate(&mut rng, base);
        feed.clear();
        feed.push(RawSentence::new(line, rng.gen_bool(0.8).then_some(1_600_000_000 + k as i64)));
        let _ = fuzz.decode(&feed[0]);
    }
    let stats = fuzz.stats();
    check(
        stats.lines == lines && stats.reconciles(),
        format!(
            "{n} positions + {n} statics round-trip; {lines} fuzzed lines: {} positions, {} statics, {} errors",
            stats.positions,
            stats.statics,
            stats.errors()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("forecast reproduction", forecast_reproduction),
        ("delta reproduction", delta_reproduction),
        ("category-sum identity", category_sums),
        ("end-to-end oracle equivalence", end_to_end_oracle),
        ("route-length invariance", route_length_invariance),
        ("density integral", density_integral),
        ("cleaning contract", cleaning_contract),
        ("codec round-trip", codec_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {}: PASS {name} [{secs:.2}s] {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{secs:.2}s] {d}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
