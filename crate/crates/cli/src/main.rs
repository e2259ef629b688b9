use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tracing::info;

use seamiles::density::{diff, DensityGrid, GridSpec, TimeWindow};
use seamiles::io::{self as sio, iso, write_csv_rows, write_json};
use seamiles::metrics::Granularity;
use seamiles::pipeline::{self, PipelineError, Reconstructed, Result, RunConfig, WindowSpec};
use seamiles::ports::{self, cnm_from_graph, ego_network, port_visits, PortGraph, Scenario};

/// Maritime mobility indicators from AIS position reports.
#[derive(Debug, Parser)]
#[command(name = "seamiles", version)]
struct Cli {
    /// Run configuration (TOML); command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode NMEA feeds into the fix CSV.
    Decode(Common),
    /// Clean fixes and write tracks and activity episodes.
    Tracks(Common),
    /// Navigated miles, activity counts and speed per group.
    Indicators(Common),
    /// Growth forecast from monthly history.
    Forecast(Common),
    /// Navigated-length density grid over a window.
    Density(Common),
    /// Cellwise difference of two density runs (B minus A).
    DiffDensity(DiffArgs),
    /// Port calls and the port-connection graph.
    Ports(Common),
    /// Ports within k hops of a focal port.
    Ego(EgoArgs),
    /// Run a traffic scenario and write ground truth plus a synthetic feed.
    Simulate(SimArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// Input NMEA or decoded-fix CSV files.
    #[arg(short, long = "input")]
    inputs: Vec<PathBuf>,
    /// Fleet registry CSV (`mmsi,imo,name,type_code,category_hint,dwt,gt,teu`).
    #[arg(long)]
    fleet: Option<PathBuf>,
    /// Port list CSV (`id,name,country,lat,lon,radius_nmi`).
    #[arg(long)]
    ports: Option<PathBuf>,
    /// Size-class scheme (TOML) replacing the built-in bins.
    #[arg(long)]
    size_classes: Option<PathBuf>,
    /// Monthly history CSV (`group,year,month,value`).
    #[arg(long)]
    history: Option<PathBuf>,
    /// GeoJSON polygon for the regional speed comparison.
    #[arg(long)]
    region: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Silence that splits a track [default: 24].
    #[arg(long)]
    gap_hours: Option<f64>,
    /// Implied speed above which a fix is dropped [default: 50].
    #[arg(long)]
    speed_gate_knots: Option<f64>,
    /// Reported speed below which a vessel is idle [default: 2].
    #[arg(long)]
    idle_speed_knots: Option<f64>,
    /// Shortest idle stay counted as a port call [default: 1].
    #[arg(long)]
    min_dwell_hours: Option<f64>,
    /// Grid bounds as `lat_min,lat_max,lon_min,lon_max`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bbox: Option<Vec<f64>>,
    /// Grid cell size in degrees [default: 0.1].
    #[arg(long)]
    cell_size: Option<f64>,
    /// Subdivision step in degrees for apportioning tracklets [default: cell size / 4].
    #[arg(long)]
    step: Option<f64>,
    /// Window start (RFC 3339 or YYYY-MM-DD) for density and speed.
    #[arg(long)]
    start: Option<String>,
    /// Window end (exclusive).
    #[arg(long)]
    end: Option<String>,
    /// Baseline window for the regional speed comparison.
    #[arg(long)]
    baseline_start: Option<String>,
    #[arg(long)]
    baseline_end: Option<String>,
    /// First day of the indicator series.
    #[arg(long)]
    from: Option<String>,
    /// End (exclusive) of the indicator series.
    #[arg(long)]
    to: Option<String>,
    /// Group keys such as `total`, `container` or `wet_bulk/VLCC`.
    #[arg(long = "group")]
    groups: Vec<String>,
    /// Indicator granularity; repeatable [default: daily and monthly].
    #[arg(long, value_enum)]
    granularity: Vec<GranularityArg>,
    /// Year to forecast [default: latest year with data].
    #[arg(long)]
    target_year: Option<i32>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum GranularityArg {
    Daily,
    Monthly,
}

#[derive(Debug, Args)]
struct DiffArgs {
    /// Output directory of the later density run.
    run_b: PathBuf,
    /// Output directory of the baseline density run.
    run_a: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EgoArgs {
    #[command(flatten)]
    common: Common,
    /// Focal port id.
    #[arg(long)]
    port: String,
    /// Maximum hops.
    #[arg(short, long, default_value_t = 1)]
    k: usize,
    /// Follow edges in both directions.
    #[arg(long)]
    undirected: bool,
    /// Existing edge list instead of recomputing port calls.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn run_config(global: Option<&Path>, c: &Common) -> Result<RunConfig> {
    let mut cfg = match global {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !c.inputs.is_empty() {
        cfg.inputs.fixes = c.inputs.clone();
    }
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            *slot = v.clone();
        }
    };
    set(&mut cfg.inputs.fleet, &c.fleet);
    set(&mut cfg.inputs.ports, &c.ports);
    set(&mut cfg.inputs.size_classes, &c.size_classes);
    set(&mut cfg.inputs.history, &c.history);
    set(&mut cfg.inputs.region, &c.region);
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    let t = &mut cfg.thresholds;
    for (slot, v) in [
        (&mut t.gap_hours, c.gap_hours),
        (&mut t.speed_gate_knots, c.speed_gate_knots),
        (&mut t.idle_speed_knots, c.idle_speed_knots),
        (&mut t.min_dwell_hours, c.min_dwell_hours),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(b) = &c.bbox {
        if b.len() != 4 {
            return Err(PipelineError::Usage("--bbox takes lat_min,lat_max,lon_min,lon_max".into()));
        }
        (cfg.grid.lat_min, cfg.grid.lat_max, cfg.grid.lon_min, cfg.grid.lon_max) = (b[0], b[1], b[2], b[3]);
    }
    if let Some(v) = c.cell_size {
        cfg.grid.cell_size_deg = v;
    }
    if c.step.is_some() {
        cfg.grid.step_deg = c.step;
    }
    let window = |start: &Option<String>, end: &Option<String>, slot: &mut Option<WindowSpec>| -> Result<()> {
        match (start, end) {
            (Some(s), Some(e)) => *slot = Some(WindowSpec { start: s.clone(), end: e.clone() }),
            (None, None) => {}
            _ => return Err(PipelineError::Usage("window needs both a start and an end".into())),
        }
        Ok(())
    };
    window(&c.start, &c.end, &mut cfg.windows.density)?;
    window(&c.baseline_start, &c.baseline_end, &mut cfg.windows.baseline)?;
    window(&c.from, &c.to, &mut cfg.windows.indicators)?;
    if !c.groups.is_empty() {
        cfg.groups.include = c.groups.clone();
    }
    if !c.granularity.is_empty() {
        cfg.groups.granularity = c
            .granularity
            .iter()
            .map(|g| match g {
                GranularityArg::Daily => Granularity::Daily,
                GranularityArg::Monthly => Granularity::Monthly,
            })
            .collect();
    }
    if c.target_year.is_some() {
        cfg.forecast.target_year = c.target_year;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    Ok(dir)
}

fn io_at<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| PipelineError::io(path, e))
}

fn require_inputs(cfg: &RunConfig) -> Result<()> {
    if cfg.inputs.fixes.is_empty() {
        return Err(PipelineError::Usage("no input files given".into()));
    }
    Ok(())
}

fn write_stats(dir: &Path, rec: &Reconstructed) -> Result<()> {
    let path = dir.join("stats.json");
    io_at(&path, write_json(&path, &rec.stats))
}

fn cmd_decode(cfg: &RunConfig) -> Result<()> {
    require_inputs(cfg)?;
    let dir = out_dir(&cfg.output_dir)?;
    let ingested = pipeline::ingest(&cfg.inputs.fixes)?;
    let path = dir.join("fixes.csv");
    io_at(&path, sio::write_fixes(&path, &ingested.fixes))?;
    let stats = dir.join("decode_stats.json");
    io_at(&stats, write_json(&stats, &ingested.stats))?;
    info!(fixes = ingested.fixes.len(), errors = ingested.stats.decode.errors(), "decoded");
    Ok(())
}

fn reconstruct(cfg: &RunConfig) -> Result<Reconstructed> {
    require_inputs(cfg)?;
    let rec = pipeline::reconstruct_tracks(cfg)?;
    info!(tracks = rec.tracks.len(), retained = rec.stats.cleaning.retained, "tracks built");
    Ok(rec)
}

fn cmd_tracks(cfg: &RunConfig) -> Result<()> {
    let rec = reconstruct(cfg)?;
    let dir = out_dir(&cfg.output_dir)?;
    let p = dir.join("tracks.csv");
    io_at(&p, sio::write_tracks(&p, &rec.tracks))?;
    let p = dir.join("episodes.csv");
    io_at(&p, sio::write_episodes(&p, &rec.tracks))?;
    write_stats(dir, &rec)
}

fn cmd_indicators(cfg: &RunConfig) -> Result<()> {
    let rec = reconstruct(cfg)?;
    let dir = out_dir(&cfg.output_dir)?;
    let series = pipeline::indicators(cfg, &rec)?;
    let p = dir.join("indicators.csv");
    io_at(&p, sio::write_indicators(&p, &series))?;
    let mut values = pipeline::monthly_values(&series);
    if let Some(h) = &cfg.inputs.history {
        values.extend(pipeline::read_history(h)?);
    }
    let rows = pipeline::forecast_rows(cfg, &values);
    let p = dir.join("forecast.csv");
    io_at(&p, sio::write_forecast(&p, &rows))?;
    write_stats(dir, &rec)
}

fn cmd_forecast(cfg: &RunConfig) -> Result<()> {
    let mut values = Vec::new();
    if let Some(h) = &cfg.inputs.history {
        values.extend(pipeline::read_history(h)?);
    }
    if !cfg.inputs.fixes.is_empty() {
        let rec = reconstruct(cfg)?;
        let mut monthly = cfg.clone();
        monthly.groups.granularity = vec![Granularity::Monthly];
        values.extend(pipeline::monthly_values(&pipeline::indicators(&monthly, &rec)?));
    }
    if values.is_empty() {
        return Err(PipelineError::Usage("forecast needs --history or input files".into()));
    }
    let dir = out_dir(&cfg.output_dir)?;
    let rows = pipeline::forecast_rows(cfg, &values);
    let p = dir.join("forecast.csv");
    io_at(&p, sio::write_forecast(&p, &rows))
}

/// Sidecar describing a density run, read back by `diff-density`.
#[derive(Debug, Serialize, Deserialize)]
struct DensityMeta {
    spec: GridSpec,
    window_start: String,
    window_end: String,
    spill_nmi: f64,
    integral_nmi: f64,
}

fn write_grid_files(
    dir: &Path,
    stem: &str,
    csv: impl FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
) -> Result<()> {
    let p = dir.join(format!("{stem}.csv"));
    io_at(&p, sio::atomic_write(&p, csv))
}

fn cmd_density(cfg: &RunConfig) -> Result<()> {
    let rec = reconstruct(cfg)?;
    let grid = pipeline::density(cfg, &rec)?;
    let dir = out_dir(&cfg.output_dir)?;
    let window = cfg.windows.density.as_ref().expect("checked by density()").resolve()?;
    let TimeWindow { start, end } = window;
    let meta = DensityMeta {
        spec: grid.spec,
        window_start: iso(start),
        window_end: iso(end),
        spill_nmi: grid.spill_nmi,
        integral_nmi: grid.integral_nmi(),
    };
    write_grid_files(dir, "density", |w| grid.write_csv(w).map_err(std::io::Error::other))?;
    let p = dir.join("density.json");
    io_at(&p, write_json(&p, &meta))?;
    let p = dir.join("density.geojson");
    io_at(&p, sio::atomic_write(&p, |w| grid.write_geojson(w)))?;
    let p = dir.join("density.pgm");
    io_at(&p, sio::atomic_write(&p, |w| grid.write_pgm(w)))?;
    if let Some(rs) = pipeline::region_speed(cfg, &rec)? {
        let p = dir.join("region_speed.json");
        io_at(&p, write_json(&p, &rs))?;
    }
    write_stats(dir, &rec)
}

fn load_density(run: &Path) -> Result<DensityGrid> {
    let meta_path = run.join("density.json");
    let text = io_at(&meta_path, fs::read_to_string(&meta_path))?;
    let meta: DensityMeta =
        serde_json::from_str(&text).map_err(|e| PipelineError::contract(format!("{}: {e}", meta_path.display())))?;
    let csv_path = run.join("density.csv");
    let file = io_at(&csv_path, fs::File::open(&csv_path))?;
    DensityGrid::read_csv(meta.spec, meta.spill_nmi, file)
        .map_err(|e| PipelineError::contract(format!("{}: {e}", csv_path.display())))
}

fn cmd_diff_density(args: &DiffArgs, global: Option<&Path>) -> Result<()> {
    let b = load_density(&args.run_b)?;
    let a = load_density(&args.run_a)?;
    let d = diff(&b, &a).map_err(PipelineError::contract)?;
    let out = match (&args.out, global) {
        (Some(o), _) => o.clone(),
        (None, Some(cfg)) => RunConfig::load(cfg)?.output_dir,
        (None, None) => PathBuf::from("out"),
    };
    let dir = out_dir(&out)?;
    write_grid_files(dir, "diff", |w| d.write_csv(w).map_err(std::io::Error::other))?;
    let p = dir.join("diff.geojson");
    io_at(&p, sio::atomic_write(&p, |w| d.write_geojson(w)))?;
    let p = dir.join("diff.pgm");
    io_at(&p, sio::atomic_write(&p, |w| d.write_pgm(w)))
}

#[derive(Debug, Serialize)]
struct PortVisitsRow {
    port: String,
    visits: u64,
}

#[derive(Debug, Serialize)]
struct GraphSummary {
    ports: usize,
    edges: usize,
    visits: u64,
    cnm_nmi: f64,
}

fn write_graph(dir: &Path, stem: &str, g: &PortGraph) -> Result<()> {
    let p = dir.join(format!("{stem}.csv"));
    io_at(&p, sio::atomic_write(&p, |w| g.write_edges(w).map_err(std::io::Error::other)))
}

fn cmd_ports(cfg: &RunConfig) -> Result<()> {
    let rec = reconstruct(cfg)?;
    let (ports, visits, graph) = pipeline::port_calls(cfg, &rec)?;
    let dir = out_dir(&cfg.output_dir)?;
    let p = dir.join("visits.csv");
    io_at(&p, sio::atomic_write(&p, |w| ports::write_visits(&visits, w).map_err(std::io::Error::other)))?;
    write_graph(dir, "edges", &graph)?;
    let rows: Vec<PortVisitsRow> = ports
        .iter()
        .map(|p| PortVisitsRow { port: p.id.clone(), visits: port_visits(&graph, &p.id).expect("port in graph") })
        .collect();
    let p = dir.join("port_visits.csv");
    io_at(&p, write_csv_rows(&p, &["port", "visits"], rows))?;
    let summary = GraphSummary {
        ports: graph.ports.len(),
        edges: graph.edges.len(),
        visits: graph.total_visits(),
        cnm_nmi: cnm_from_graph(&graph),
    };
    let p = dir.join("graph.json");
    io_at(&p, write_json(&p, &summary))?;
    write_stats(dir, &rec)
}

fn cmd_ego(args: &EgoArgs, cfg: &RunConfig) -> Result<()> {
    let graph = match &args.edges {
        Some(edges) => {
            let file = io_at(edges, fs::File::open(edges))?;
            PortGraph::read_edges(cfg.ports()?, file).map_err(PipelineError::contract)?
        }
        None => pipeline::port_calls(cfg, &reconstruct(cfg)?)?.2,
    };
    let ego = ego_network(&graph, &args.port, args.k, args.undirected).map_err(PipelineError::contract)?;
    let dir = out_dir(&cfg.output_dir)?;
    write_graph(dir, "ego_edges", &ego)?;
    let p = dir.join("ego_ports.csv");
    let ports: Vec<_> = ego.ports.values().cloned().collect();
    io_at(&p, sio::atomic_write(&p, |w| ports::write_ports(&ports, w).map_err(std::io::Error::other)))
}

#[derive(Debug, Serialize)]
struct PvRow {
    period_start: String,
    port: String,
    visits: u64,
}

#[derive(Debug, Serialize)]
struct CnmRow {
    period_start: String,
    visits: u64,
    cnm_nmi: f64,
}

#[derive(Debug, Serialize)]
struct VisitRow {
    mmsi: u32,
    port: String,
    arrival: String,
    departure: String,
    previous_port: Option<String>,
    distance_nmi: Option<f64>,
}

fn cmd_simulate(args: &SimArgs, global: Option<&Path>) -> Result<()> {
    let text = io_at(&args.scenario, fs::read_to_string(&args.scenario))?;
    let mut scenario = Scenario::from_toml_str(&text).map_err(|e| match e {
        ports::SimError::Toml(_) | ports::SimError::Invalid(_) => PipelineError::Usage(e.to_string()),
        other => PipelineError::contract(other),
    })?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let sim = ports::simulate(&scenario).map_err(PipelineError::contract)?;
    let out = match (&args.out, global) {
        (Some(o), _) => o.clone(),
        (None, Some(cfg)) => RunConfig::load(cfg)?.output_dir,
        (None, None) => PathBuf::from("out"),
    };
    let dir = out_dir(&out)?;
    let start = scenario.start_epoch().map_err(PipelineError::contract)?;

    let p = dir.join("feed.nmea");
    let lines = sim.to_nmea(start).map_err(PipelineError::contract)?;
    io_at(&p, sio::write_nmea(&p, &lines))?;
    let p = dir.join("fleet.csv");
    io_at(
        &p,
        write_csv_rows(&p, &["mmsi", "imo", "name", "type_code", "category_hint", "dwt", "gt", "teu"], &sim.fleet),
    )?;
    let p = dir.join("ports.csv");
    io_at(&p, sio::atomic_write(&p, |w| ports::write_ports(&scenario.ports, w).map_err(std::io::Error::other)))?;
    let p = dir.join("itinerary.csv");
    let rows = sim.itinerary.iter().map(|v| VisitRow {
        mmsi: v.mmsi,
        port: v.port.clone(),
        arrival: iso(v.arrival),
        departure: iso(v.departure),
        previous_port: v.previous_port.clone(),
        distance_nmi: v.distance_nmi,
    });
    io_at(&p, write_csv_rows(&p, &["mmsi", "port", "arrival", "departure", "previous_port", "distance_nmi"], rows))?;
    let p = dir.join("pv_series.csv");
    let rows = sim.pv_series.iter().map(|r| PvRow {
        period_start: iso(r.period_start),
        port: r.port.clone(),
        visits: r.visits,
    });
    io_at(&p, write_csv_rows(&p, &["period_start", "port", "visits"], rows))?;
    let p = dir.join("cnm_series.csv");
    let rows = sim.cnm_series.iter().map(|r| CnmRow {
        period_start: iso(r.period_start),
        visits: r.visits,
        cnm_nmi: r.cnm_nmi,
    });
    io_at(&p, write_csv_rows(&p, &["period_start", "visits", "cnm_nmi"], rows))?;
    write_graph(dir, "edges", &sim.graph)?;
    let summary = GraphSummary {
        ports: sim.graph.ports.len(),
        edges: sim.graph.edges.len(),
        visits: sim.graph.total_visits(),
        cnm_nmi: sim.total_cnm_nmi(),
    };
    let p = dir.join("graph.json");
    io_at(&p, write_json(&p, &summary))?;
    info!(fixes = sim.fixes.len(), visits = summary.visits, "simulated");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let global = cli.config.as_deref();
    match &cli.command {
        Command::Decode(c) => cmd_decode(&run_config(global, c)?),
        Command::Tracks(c) => cmd_tracks(&run_config(global, c)?),
        Command::Indicators(c) => cmd_indicators(&run_config(global, c)?),
        Command::Forecast(c) => cmd_forecast(&run_config(global, c)?),
        Command::Density(c) => cmd_density(&run_config(global, c)?),
        Command::DiffDensity(a) => cmd_diff_density(a, global),
        Command::Ports(c) => cmd_ports(&run_config(global, c)?),
        Command::Ego(a) => cmd_ego(a, &run_config(global, &a.common)?),
        Command::Simulate(a) => cmd_simulate(a, global),
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| default.into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
