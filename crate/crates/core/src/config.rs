//! Scenario parameters, identifiers, and derived quantities shared by the
//! whole toolkit. Internal units are meters, seconds, bytes and bits/second;
//! config-file speeds are km/h and converted by the accessors.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{CoreError, Result};

pub const KMH_TO_MS: f64 = 1.0 / 3.6;
pub const METERS_PER_MILE: f64 = 1609.344;

/// One generated situational-awareness message. Messages sharing a
/// `cluster_id` are semantically redundant; `msg_id` is globally unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub msg_id: u64,
    pub cluster_id: u64,
    pub owner: usize,
    pub created_at: f64,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Person,
    Vehicle,
    Gateway,
}

/// Per-node radio and storage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub node_id: usize,
    pub role: NodeRole,
    pub radio_range: f64,
    pub link_rate: f64,
    pub buffer_capacity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferMode {
    Formula,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OwnerMode {
    /// Redundant copies are assigned to a uniform-random person.
    Random,
    /// Redundant copies stay with the seed message's owner.
    SameAsSeed,
}

/// Every scenario parameter. Immutable after validation; safe to share
/// read-only across parallel runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Total simulated time T, seconds.
    pub duration_t: f64,
    /// Message generation interval G, seconds.
    pub gen_interval_g: f64,
    /// Target workload redundancy R_sim, fraction in [0,1).
    pub target_redundancy_rsim: f64,
    /// Temporal-locality window W for redundant copies, seconds.
    pub window_w: f64,
    pub n_people: usize,
    /// Probability the vehicle's next destination is inside the disaster region.
    pub pr_disaster: f64,
    /// Pedestrian speed range, km/h.
    pub pedestrian_speed_kmh: [f64; 2],
    /// Pause at each pedestrian destination, seconds.
    pub pedestrian_pause: f64,
    /// Vehicle speed range, km/h.
    pub vehicle_speed_kmh: [f64; 2],
    /// Vehicle wait range at disaster destinations, seconds.
    pub vehicle_wait: [f64; 2],
    /// Vehicle dwell at the gateway, seconds.
    pub gateway_dwell: f64,
    pub detector_fp: f64,
    pub detector_fn: f64,
    pub buffer_mode: BufferMode,
    /// Person buffer size when `buffer_mode = explicit`, bytes.
    pub people_buffer: u64,
    /// Vehicle buffer size, bytes.
    pub rescue_buffer: u64,
    /// Message payload size, bytes.
    pub message_size: u64,
    pub owner_mode: OwnerMode,
    pub rng_seed: u64,
    /// Road map: path to a map file, or empty to generate a grid.
    pub map_file: String,
    /// Grid spacing for the generated map, meters.
    pub grid_spacing_m: f64,
    /// Disaster rectangle [min_x, min_y, max_x, max_y], meters.
    pub disaster_region: [f64; 4],
    /// Gateway coordinates, meters.
    pub gateway_position: [f64; 2],
    pub person_radio_range: f64,
    pub person_link_rate: f64,
    pub vehicle_radio_range: f64,
    pub vehicle_link_rate: f64,
    pub gateway_radio_range: f64,
    pub gateway_link_rate: f64,
    /// Engine time step, seconds.
    pub dt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration_t: 18_000.0,
            gen_interval_g: 30.0,
            target_redundancy_rsim: 0.3,
            window_w: 20.0,
            n_people: 50,
            pr_disaster: 0.2,
            pedestrian_speed_kmh: [3.0, 7.0],
            pedestrian_pause: 300.0,
            vehicle_speed_kmh: [25.0, 54.0],
            vehicle_wait: [300.0, 600.0],
            gateway_dwell: 300.0,
            detector_fp: 0.0,
            detector_fn: 0.0,
            buffer_mode: BufferMode::Formula,
            people_buffer: 0,
            rescue_buffer: 1_000_000_000,
            message_size: 300_000,
            owner_mode: OwnerMode::Random,
            rng_seed: 1,
            map_file: String::new(),
            grid_spacing_m: 1_000.0,
            disaster_region: [0.0, 0.0, 16_000.0, 13_000.0],
            gateway_position: [25_600.0, 6_000.0],
            person_radio_range: 2_000.0,
            person_link_rate: 10_000_000.0,
            vehicle_radio_range: 300.0,
            vehicle_link_rate: 100_000_000.0,
            gateway_radio_range: 300.0,
            gateway_link_rate: 200_000.0,
            dt: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn pedestrian_speed_ms(&self) -> [f64; 2] {
        [self.pedestrian_speed_kmh[0] * KMH_TO_MS, self.pedestrian_speed_kmh[1] * KMH_TO_MS]
    }

    pub fn vehicle_speed_ms(&self) -> [f64; 2] {
        [self.vehicle_speed_kmh[0] * KMH_TO_MS, self.vehicle_speed_kmh[1] * KMH_TO_MS]
    }

    /// Number of generated messages, floor(T/G).
    pub fn message_count(&self) -> u64 {
        (self.duration_t / self.gen_interval_g).floor() as u64
    }

    /// Node ids: people are 0..n_people, then the vehicle, then the gateway.
    pub fn vehicle_id(&self) -> usize {
        self.n_people
    }

    pub fn gateway_id(&self) -> usize {
        self.n_people + 1
    }

    pub fn in_disaster_region(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.disaster_region;
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Person buffer actually in effect for a run.
    pub fn people_buffer_bytes(&self) -> Result<u64> {
        match self.buffer_mode {
            BufferMode::Formula => derive_people_buffer(self),
            BufferMode::Explicit => Ok(self.people_buffer),
        }
    }

    /// Node specs for a simulation run, in node-id order.
    pub fn node_specs(&self) -> Result<Vec<NodeSpec>> {
        let people_buffer = self.people_buffer_bytes()?;
        let mut specs = Vec::with_capacity(self.n_people + 2);
        for id in 0..self.n_people {
            specs.push(NodeSpec {
                node_id: id,
                role: NodeRole::Person,
                radio_range: self.person_radio_range,
                link_rate: self.person_link_rate,
                buffer_capacity: people_buffer,
            });
        }
        specs.push(NodeSpec {
            node_id: self.vehicle_id(),
            role: NodeRole::Vehicle,
            radio_range: self.vehicle_radio_range,
            link_rate: self.vehicle_link_rate,
            buffer_capacity: self.rescue_buffer,
        });
        specs.push(NodeSpec {
            node_id: self.gateway_id(),
            role: NodeRole::Gateway,
            radio_range: self.gateway_radio_range,
            link_rate: self.gateway_link_rate,
            buffer_capacity: u64::MAX,
        });
        Ok(specs)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialized form; equal configs serialize byte-identically.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply `--set path=value` overrides onto this config.
    pub fn with_overrides(&self, pairs: &[(String, String)]) -> Result<Self> {
        let mut value = toml::Value::try_from(self).map_err(|e| CoreError::Config(e.to_string()))?;
        for (path, raw) in pairs {
            let table = value
                .as_table_mut()
                .ok_or_else(|| CoreError::Config("config root is not a table".into()))?;
            if !table.contains_key(path.as_str()) {
                return Err(CoreError::Config(format!("unknown config field `{path}`")));
            }
            table.insert(path.clone(), parse_override(raw));
        }
        let cfg: ScenarioConfig =
            value.try_into().map_err(|e| CoreError::Config(format!("--set {e}")))?;
        Ok(cfg)
    }
}

fn parse_override(raw: &str) -> toml::Value {
    if raw.contains(',') {
        let items: Vec<toml::Value> = raw.split(',').map(parse_override).collect();
        return toml::Value::Array(items);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}

/// B_people = message_size * (1 - R_sim) * floor(T/G), rounded.
pub fn derive_people_buffer(cfg: &ScenarioConfig) -> Result<u64> {
    let n = cfg.message_count();
    if n == 0 {
        return Err(CoreError::Config(
            "duration_t / gen_interval_g yields zero messages".into(),
        ));
    }
    if cfg.target_redundancy_rsim >= 1.0 {
        return Err(CoreError::Config("target_redundancy_rsim must be < 1".into()));
    }
    let bytes = cfg.message_size as f64 * (1.0 - cfg.target_redundancy_rsim) * n as f64;
    Ok(bytes.round() as u64)
}

/// Every violated invariant, with a field path. Empty means valid.
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<String> {
    let mut errs = Vec::new();
    let prob = |errs: &mut Vec<String>, name: &str, v: f64| {
        if !(0.0..=1.0).contains(&v) {
            errs.push(format!("{name}: probability {v} outside [0,1]"));
        }
    };
    prob(&mut errs, "pr_disaster", cfg.pr_disaster);
    prob(&mut errs, "detector_fp", cfg.detector_fp);
    prob(&mut errs, "detector_fn", cfg.detector_fn);
    if !(0.0..1.0).contains(&cfg.target_redundancy_rsim) {
        errs.push(format!(
            "target_redundancy_rsim: {} outside [0,1)",
            cfg.target_redundancy_rsim
        ));
    }
    let range = |errs: &mut Vec<String>, name: &str, r: [f64; 2]| {
        if r[0] > r[1] || r[0] <= 0.0 {
            errs.push(format!("{name}: empty or nonpositive range [{}, {}]", r[0], r[1]));
        }
    };
    range(&mut errs, "pedestrian_speed_kmh", cfg.pedestrian_speed_kmh);
    range(&mut errs, "vehicle_speed_kmh", cfg.vehicle_speed_kmh);
    range(&mut errs, "vehicle_wait", cfg.vehicle_wait);
    if cfg.duration_t <= 0.0 {
        errs.push(format!("duration_t: {} must be positive", cfg.duration_t));
    }
    if cfg.gen_interval_g <= 0.0 {
        errs.push(format!("gen_interval_g: {} must be positive", cfg.gen_interval_g));
    } else if cfg.duration_t > 0.0 && cfg.message_count() == 0 {
        errs.push("gen_interval_g: G does not divide into T at least once".into());
    }
    if cfg.message_size == 0 {
        errs.push("message_size: must be positive".into());
    }
    if cfg.n_people == 0 {
        errs.push("n_people: must be positive".into());
    }
    if cfg.dt <= 0.0 {
        errs.push(format!("dt: {} must be positive", cfg.dt));
    }
    if cfg.window_w < 0.0 {
        errs.push(format!("window_w: {} must be nonnegative", cfg.window_w));
    }
    if cfg.grid_spacing_m <= 0.0 {
        errs.push(format!("grid_spacing_m: {} must be positive", cfg.grid_spacing_m));
    }
    let [x0, y0, x1, y1] = cfg.disaster_region;
    if x0 >= x1 || y0 >= y1 {
        errs.push("disaster_region: degenerate rectangle".into());
    }
    if cfg.buffer_mode == BufferMode::Explicit && cfg.people_buffer == 0 {
        errs.push("people_buffer: explicit buffer mode requires a positive size".into());
    }
    for (name, v) in [
        ("person_radio_range", cfg.person_radio_range),
        ("person_link_rate", cfg.person_link_rate),
        ("vehicle_radio_range", cfg.vehicle_radio_range),
        ("vehicle_link_rate", cfg.vehicle_link_rate),
        ("gateway_radio_range", cfg.gateway_radio_range),
        ("gateway_link_rate", cfg.gateway_link_rate),
    ] {
        if v <= 0.0 {
            errs.push(format!("{name}: {v} must be positive"));
        }
    }
    errs
}
