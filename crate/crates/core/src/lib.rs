//! AIS decoding, trajectory reconstruction and maritime mobility
//! indicators: navigated miles, active/idle fleet counts, mean speed,
//! growth forecasts, density grids and port-call graphs.

pub mod codec;
pub mod density;
pub mod geo;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod ports;
pub mod registry;
pub mod tracks;

pub use codec::{CodecError, DecodeStats, Decoded, Decoder, NavStatus, PositionFix, RawSentence, StaticReport};
pub use density::{DensityGrid, DiffGrid, GridSpec, Subdivision, TimeWindow};
pub use geo::{great_circle_nmi, LatLon, Polygon};
pub use metrics::{delta_pct, forecast, ForecastPoint, Granularity, GroupKey, IndicatorSeries, MonthlyValue};
pub use pipeline::{PipelineError, RunConfig, RunStats};
pub use ports::{Port, PortGraph, Scenario, SimOutput, Visit};
pub use registry::{Category, FleetRegistry, SizeClassScheme, VesselInputs, VesselProfile};
pub use tracks::{Activity, ActivityEpisode, CleaningStats, LabeledTrack, Track, TrackConfig, Tracklet};
