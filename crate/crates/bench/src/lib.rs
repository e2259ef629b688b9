//! Shared fixtures for the benchmarks, built from a deterministic
//! simulated scenario so no external data is needed.

use seamiles::codec::PositionFix;
use seamiles::ports::{simulate, Scenario, SimOutput};
use seamiles::registry::{FleetRegistry, SizeClassScheme};
use seamiles::tracks::{reconstruct, LabeledTrack, TrackConfig};

const SCENARIO: &str = r#"
name = "bench"
seed = 42
days = 30
cadence_s = 300

[[ports]]
id = "NLRTM"
lat = 51.95
lon = 4.05

[[ports]]
id = "GBFXT"
lat = 51.95
lon = 1.32

[[ports]]
id = "DEHAM"
lat = 53.9
lon = 8.7

[[routes]]
from = "NLRTM"
to = "GBFXT"
hours = 10

[[routes]]
from = "NLRTM"
to = "DEHAM"
hours = 20
waypoints = [[53.4, 5.0]]

[[routes]]
from = "GBFXT"
to = "DEHAM"
hours = 24
waypoints = [[53.2, 3.0]]

[[fleet]]
rotation = ["NLRTM", "GBFXT", "DEHAM"]
vessels = 40
category = "container"
dwt = 90000
teu = 8000
"#;

pub struct Fixture {
    pub scenario: Scenario,
    pub sim: SimOutput,
    /// Feed lines, `epoch<TAB>!AIVDM...`.
    pub lines: Vec<String>,
    pub registry: FleetRegistry,
}

impl Fixture {
    pub fn new() -> Self {
        let scenario = Scenario::from_toml_str(SCENARIO).expect("bench scenario is valid");
        let sim = simulate(&scenario).expect("bench scenario simulates");
        let lines = sim.to_nmea(scenario.start_epoch().unwrap()).expect("encodable");
        let registry = FleetRegistry::from_inputs(&sim.fleet, &SizeClassScheme::default());
        Self { scenario, sim, lines, registry }
    }

    pub fn fixes(&self) -> Vec<PositionFix> {
        self.sim.fixes.iter().map(PositionFix::quantized).collect()
    }

    pub fn tracks(&self) -> Vec<LabeledTrack> {
        reconstruct(self.fixes(), &self.registry, &TrackConfig::default()).0
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}
