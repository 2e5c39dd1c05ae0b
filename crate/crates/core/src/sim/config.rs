use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{default_hom_set, default_ttt_set};
use crate::error::{Error, Result};
use crate::handover::HoConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    /// Required throughput in Mbit/s.
    pub throughput_req: f64,
    /// Required latency in ms.
    pub latency_req: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Playground,
    Circle { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserGroupSpec {
    pub size: usize,
    pub slice: usize,
    /// Offered rate in Mbit/s while active.
    pub expected_rate: f64,
    /// km/h
    pub speed: f64,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathlossConfig {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
    pub shadow_sigma_db: f64,
    pub decorrelation_m: f64,
    /// Per-tick measurement fluctuation on top of shadowing.
    pub fast_fading_sigma_db: f64,
    pub min_distance_m: f64,
}

impl Default for PathlossConfig {
    fn default() -> Self {
        PathlossConfig {
            pl0_db: 40.0,
            d0_m: 10.0,
            exponent: 3.5,
            shadow_sigma_db: 6.0,
            decorrelation_m: 25.0,
            fast_fading_sigma_db: 2.0,
            min_distance_m: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AntennaConfig {
    pub max_gain_dbi: f64,
    pub beamwidth_deg: f64,
    pub max_attenuation_db: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        AntennaConfig {
            max_gain_dbi: 14.0,
            beamwidth_deg: 65.0,
            max_attenuation_db: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub min_on: f64,
    pub max_on: f64,
    /// Length of one simulated day in seconds.
    pub day_s: f64,
    /// Mean time between activity redraws, seconds.
    pub mean_hold_s: f64,
    /// Time of day at t = 0, as a fraction of a day.
    pub phase: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            min_on: 0.3,
            max_on: 1.0,
            day_s: 86_400.0,
            mean_hold_s: 30.0,
            phase: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyConfig {
    pub queue_ms: f64,
    pub eps: f64,
    pub packet_kbit: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            queue_ms: 0.2,
            eps: 0.01,
            packet_kbit: 12.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub hom_db: Vec<f64>,
    pub ttt_ms: Vec<f64>,
    pub default_hom_db: f64,
    pub default_ttt_ms: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            hom_db: default_hom_set(),
            ttt_ms: default_ttt_set(),
            default_hom_db: 0.0,
            default_ttt_ms: 512.0,
        }
    }
}

/// Scenario description. Every field has a default, so a configuration file
/// only needs the keys it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_cells: usize,
    pub n_slices: usize,
    pub site_positions: Vec<[f64; 2]>,
    pub sectors_per_site: usize,
    /// Boresight of each sector, degrees counter-clockwise from east.
    pub sector_azimuths_deg: Vec<f64>,
    /// Distance from the site to the nominal cell center along boresight.
    pub cell_center_offset_m: f64,
    /// Cells of different sites are neighbors when their centers are closer than this.
    pub neighbor_distance_m: f64,
    /// `[x_min, y_min, x_max, y_max]`
    pub playground: [f64; 4],
    pub carrier_freq_ghz: f64,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub max_spectral_eff: f64,
    pub radio_tick_s: f64,
    pub ticks_per_agent_step: usize,
    pub rng_seed: u64,
    pub slice_specs: Vec<SliceSpec>,
    pub user_groups: Vec<UserGroupSpec>,
    pub pathloss: PathlossConfig,
    pub antenna: AntennaConfig,
    pub traffic: TrafficConfig,
    pub latency: LatencyConfig,
    pub handover: HoConfig,
    pub grid: GridConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let wide = |size, slice, rate, speed| UserGroupSpec {
            size,
            slice,
            expected_rate: rate,
            speed,
            region: Region::Playground,
        };
        let hotspot = |center: [f64; 2]| UserGroupSpec {
            size: 8,
            slice: 0,
            expected_rate: 5.0,
            speed: 3.0,
            region: Region::Circle {
                center,
                radius: 60.0,
            },
        };
        ScenarioConfig {
            n_cells: 9,
            n_slices: 2,
            site_positions: vec![[0.0, 0.0], [600.0, 60.0], [260.0, 500.0]],
            sectors_per_site: 3,
            sector_azimuths_deg: vec![30.0, 150.0, 270.0],
            cell_center_offset_m: 150.0,
            neighbor_distance_m: 530.0,
            playground: [-250.0, -250.0, 850.0, 750.0],
            carrier_freq_ghz: 2.4,
            bandwidth_mhz: 10.0,
            tx_power_dbm: 46.0,
            noise_floor_dbm: -95.0,
            max_spectral_eff: 6.0,
            radio_tick_s: 0.1,
            ticks_per_agent_step: 9000,
            rng_seed: 1,
            slice_specs: vec![
                SliceSpec {
                    throughput_req: 5.0,
                    latency_req: 1.0,
                },
                SliceSpec {
                    throughput_req: 3.0,
                    latency_req: 1.0,
                },
            ],
            user_groups: vec![
                wide(25, 0, 5.0, 6.0),
                wide(25, 1, 3.0, 3.0),
                hotspot([400.0, 200.0]),
                hotspot([-120.0, 100.0]),
            ],
            pathloss: PathlossConfig::default(),
            antenna: AntennaConfig::default(),
            traffic: TrafficConfig::default(),
            latency: LatencyConfig::default(),
            handover: HoConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Full-scale timing: 900 s agent steps.
    pub fn paper() -> Self {
        ScenarioConfig::default()
    }

    /// Desk-scale timing: 60 s agent steps; the traffic day still spans 96 steps.
    pub fn desk() -> Self {
        let mut c = ScenarioConfig {
            ticks_per_agent_step: 600,
            ..ScenarioConfig::default()
        };
        c.traffic.day_s = 96.0 * 60.0;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn tick_ms(&self) -> u64 {
        (self.radio_tick_s * 1000.0).round() as u64
    }

    pub fn agent_step_s(&self) -> f64 {
        self.radio_tick_s * self.ticks_per_agent_step as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sectors_per_site == 0 || self.site_positions.is_empty() {
            return fail("need at least one site and one sector".into());
        }
        if self.n_cells != self.site_positions.len() * self.sectors_per_site {
            return fail(format!(
                "n_cells = {} but {} sites x {} sectors",
                self.n_cells,
                self.site_positions.len(),
                self.sectors_per_site
            ));
        }
        if self.sector_azimuths_deg.len() != self.sectors_per_site {
            return fail("one azimuth per sector required".into());
        }
        if self.n_slices == 0 || self.slice_specs.len() != self.n_slices {
            return fail(format!(
                "n_slices = {} but {} slice specs",
                self.n_slices,
                self.slice_specs.len()
            ));
        }
        for (s, spec) in self.slice_specs.iter().enumerate() {
            if !(spec.throughput_req > 0.0 && spec.latency_req > 0.0) {
                return fail(format!("slice {s}: requirements must be positive"));
            }
        }
        for (g, group) in self.user_groups.iter().enumerate() {
            if group.slice >= self.n_slices {
                return fail(format!("user group {g} references slice {}", group.slice));
            }
            if !(group.speed >= 0.0) || !(group.expected_rate > 0.0) {
                return fail(format!("user group {g}: invalid speed or rate"));
            }
            if let Region::Circle { radius, .. } = group.region {
                if !(radius > 0.0) {
                    return fail(format!("user group {g}: radius must be positive"));
                }
            }
        }
        let [x0, y0, x1, y1] = self.playground;
        if !(x1 > x0 && y1 > y0) {
            return fail("empty playground".into());
        }
        if !(self.radio_tick_s > 0.0) || self.tick_ms() == 0 {
            return fail("radio tick must be at least 1 ms".into());
        }
        if self.ticks_per_agent_step == 0 {
            return fail("ticks_per_agent_step must be positive".into());
        }
        if !(self.bandwidth_mhz > 0.0 && self.max_spectral_eff > 0.0) {
            return fail("bandwidth and spectral efficiency cap must be positive".into());
        }
        let p = &self.pathloss;
        if !(p.d0_m > 0.0 && p.decorrelation_m > 0.0 && p.min_distance_m > 0.0) {
            return fail("path-loss distances must be positive".into());
        }
        if !(p.shadow_sigma_db >= 0.0 && p.fast_fading_sigma_db >= 0.0) {
            return fail("fading deviations must be non-negative".into());
        }
        let t = &self.traffic;
        if !(0.0 <= t.min_on && t.min_on <= t.max_on && t.max_on <= 1.0) || !(t.day_s > 0.0) {
            return fail("traffic profile out of range".into());
        }
        if !(t.mean_hold_s > 0.0) {
            return fail("traffic hold time must be positive".into());
        }
        if !(self.latency.packet_kbit > 0.0 && self.latency.eps > 0.0) {
            return fail("latency model parameters must be positive".into());
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.user_groups.iter().map(|g| g.size).sum()
    }
}
