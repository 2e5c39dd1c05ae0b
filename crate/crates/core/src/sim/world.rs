use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::alloc::{allocate_resources, UserDemand, UserService};
use super::config::{Region, ScenarioConfig};
use super::radio::{antenna_gain_db, compute_sinr, pathloss, shadow_correlation};
use crate::action::argmax_first;
use crate::error::Result;
use crate::handover::{
    process_user_tick, BoundarySet, HoCounterBook, HoParamTable, TickEnv, TraceRow, UserHoContext,
};
use crate::mdp::{self, KpiAggregate, SliceMetrics, StateLayout};

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub site: usize,
    pub position: [f64; 2],
    pub azimuth_deg: f64,
    /// Nominal cell center used for neighbor-list construction.
    pub center: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct User {
    pub group: usize,
    pub slice: usize,
    pub position: [f64; 2],
    pub waypoint: [f64; 2],
    pub speed_mps: f64,
    pub demand_mbps: f64,
    pub active: bool,
    pub rsrp_dbm: Vec<f64>,
    pub sinr_db: f64,
    pub service: Option<UserService>,
    pub ho: UserHoContext,
    shadow_db: Vec<f64>,
}

/// Per-step sums of the per-(cell, slice) measures, one entry per tick.
#[derive(Clone, Debug, PartialEq)]
struct StepAccumulator {
    sums: Vec<[f64; 4]>,
    ticks: usize,
}

/// What one agent step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Time-averaged cell measures and summed HO counts.
    pub kpi: KpiAggregate,
    pub book: HoCounterBook,
    pub metrics: Vec<SliceMetrics>,
}

impl StepReport {
    pub fn state(&self) -> Vec<f64> {
        mdp::assemble_state(&self.kpi).expect("layout is consistent by construction")
    }

    /// Metrics with all slices merged into one.
    pub fn aggregated_metrics(&self) -> SliceMetrics {
        let merged = self.book.aggregate_slices();
        let kpi = self.kpi.aggregate_slices();
        slice_metrics(&kpi, &merged).remove(0)
    }
}

fn slice_metrics(kpi: &KpiAggregate, book: &HoCounterBook) -> Vec<SliceMetrics> {
    let l = kpi.layout;
    (0..l.n_slices)
        .map(|s| {
            let (mut tsl, mut lsl, mut users) = (0.0, 0.0, 0.0);
            for n in 0..l.n_cells {
                let c = kpi.cell(n, s);
                users += c[1];
                tsl += c[2];
                lsl += c[3];
            }
            SliceMetrics {
                hfr: mdp::hfr(book, s),
                ppr: mdp::ppr(book, s),
                tsl: mdp::slice_service_level(&[tsl], &[users]),
                lsl: mdp::slice_service_level(&[lsl], &[users]),
            }
        })
        .collect()
}

pub struct World {
    config: ScenarioConfig,
    cells: Vec<Cell>,
    boundaries: BoundarySet,
    layout: StateLayout,
    users: Vec<User>,
    /// Total utilization per cell from the last tick; interferer activity.
    cell_load: Vec<f64>,
    /// Per (cell, slice) load from the last tick.
    slice_load: Vec<f64>,
    tick: u64,
    rng: ChaCha8Rng,
    book: HoCounterBook,
    trace: Option<Vec<TraceRow>>,
}

/// Cells sorted by site then sector; boresight from `sector_azimuths_deg`.
pub fn build_cells(config: &ScenarioConfig) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(config.n_cells);
    for (site, &position) in config.site_positions.iter().enumerate() {
        for &az in &config.sector_azimuths_deg {
            let r = az.to_radians();
            cells.push(Cell {
                site,
                position,
                azimuth_deg: az,
                center: [
                    position[0] + config.cell_center_offset_m * r.cos(),
                    position[1] + config.cell_center_offset_m * r.sin(),
                ],
            });
        }
    }
    cells
}

/// Neighbor relations: sectors of the same site, plus cells of different
/// sites whose nominal centers lie within `neighbor_distance_m`.
pub fn build_boundaries(config: &ScenarioConfig) -> Result<BoundarySet> {
    let cells = build_cells(config);
    let mut pairs = Vec::new();
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            let same_site = cells[a].site == cells[b].site;
            let d = distance(cells[a].center, cells[b].center);
            if same_site || d < config.neighbor_distance_m {
                pairs.push((a, b));
            }
        }
    }
    BoundarySet::from_pairs(cells.len(), pairs)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sample_region<R: Rng>(region: &Region, playground: &[f64; 4], rng: &mut R) -> [f64; 2] {
    match *region {
        Region::Playground => [
            rng.random_range(playground[0]..=playground[2]),
            rng.random_range(playground[1]..=playground[3]),
        ],
        Region::Circle { center, radius } => {
            let r = radius * rng.random::<f64>().sqrt();
            let t = 2.0 * PI * rng.random::<f64>();
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        }
    }
}

impl World {
    /// Places users uniformly in their regions and attaches each to the
    /// strongest cell. Deterministic in `config.rng_seed`.
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let cells = build_cells(&config);
        let boundaries = build_boundaries(&config)?;
        let layout = StateLayout::for_boundaries(&boundaries, config.n_slices);
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let p_on = on_probability(&config, 0.0);
        let mut users = Vec::with_capacity(config.n_users());
        for (g, group) in config.user_groups.iter().enumerate() {
            for _ in 0..group.size {
                let position = sample_region(&group.region, &config.playground, &mut rng);
                let waypoint = sample_region(&group.region, &config.playground, &mut rng);
                let shadow_db: Vec<f64> = (0..cells.len())
                    .map(|_| config.pathloss.shadow_sigma_db * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let active = rng.random::<f64>() < p_on;
                let mut user = User {
                    group: g,
                    slice: group.slice,
                    position,
                    waypoint,
                    speed_mps: group.speed / 3.6,
                    demand_mbps: group.expected_rate,
                    active,
                    rsrp_dbm: vec![0.0; cells.len()],
                    sinr_db: 0.0,
                    service: None,
                    ho: UserHoContext::new(0, cells.len(), &config.handover),
                    shadow_db,
                };
                for (n, cell) in cells.iter().enumerate() {
                    user.rsrp_dbm[n] = rsrp(&config, cell, user.position, user.shadow_db[n]);
                }
                let serving = argmax_first(&user.rsrp_dbm);
                user.ho = UserHoContext::new(serving, cells.len(), &config.handover);
                users.push(user);
            }
        }
        let book = HoCounterBook::new(boundaries.len(), config.n_slices);
        Ok(World {
            cell_load: vec![0.0; cells.len()],
            slice_load: vec![0.0; cells.len() * config.n_slices],
            config,
            cells,
            boundaries,
            layout,
            users,
            tick: 0,
            rng,
            book,
            trace: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn boundaries(&self) -> &BoundarySet {
        &self.boundaries
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn users_mut(&mut self) -> &mut [User] {
        &mut self.users
    }

    pub fn clock_ms(&self) -> u64 {
        self.tick * self.config.tick_ms()
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn cell_load(&self) -> &[f64] {
        &self.cell_load
    }

    pub fn slice_load(&self, cell: usize, slice: usize) -> f64 {
        self.slice_load[cell * self.config.n_slices + slice]
    }

    pub fn counters(&self) -> &HoCounterBook {
        &self.book
    }

    /// Starts recording handover events.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn now_s(&self) -> f64 {
        self.tick as f64 * self.config.radio_tick_s
    }

    /// Advances one radio tick.
    pub fn tick(&mut self, params: &HoParamTable) {
        self.tick_inner(params, None);
    }

    fn tick_inner(&mut self, params: &HoParamTable, acc: Option<&mut StepAccumulator>) {
        self.tick += 1;
        let cfg = &self.config;
        let dt = cfg.radio_tick_s;
        let now_ms = self.tick * cfg.tick_ms();
        let p_on = on_probability(cfg, self.tick as f64 * dt);
        let redraw = (dt / cfg.traffic.mean_hold_s).min(1.0);
        let rng = &mut self.rng;

        for user in &mut self.users {
            // Mobility: random waypoint inside the group's region.
            let region = &cfg.user_groups[user.group].region;
            let mut step = user.speed_mps * dt;
            let mut moved = 0.0;
            while step > 0.0 {
                let to_go = distance(user.position, user.waypoint);
                if to_go <= step {
                    user.position = user.waypoint;
                    user.waypoint = sample_region(region, &cfg.playground, rng);
                    step -= to_go;
                    moved += to_go;
                    if to_go == 0.0 {
                        break;
                    }
                } else {
                    let f = step / to_go;
                    user.position[0] += f * (user.waypoint[0] - user.position[0]);
                    user.position[1] += f * (user.waypoint[1] - user.position[1]);
                    moved += step;
                    step = 0.0;
                }
            }
            // Traffic activity.
            let toggle: f64 = rng.random();
            let on: f64 = rng.random();
            if toggle < redraw {
                user.active = on < p_on;
            }
            // Radio measurements.
            let rho = shadow_correlation(moved, cfg.pathloss.decorrelation_m);
            let innovation = cfg.pathloss.shadow_sigma_db * (1.0 - rho * rho).max(0.0).sqrt();
            for (n, cell) in self.cells.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                let ff: f64 = rng.sample(StandardNormal);
                user.shadow_db[n] = rho * user.shadow_db[n] + innovation * z;
                user.rsrp_dbm[n] = rsrp(cfg, cell, user.position, user.shadow_db[n])
                    + cfg.pathloss.fast_fading_sigma_db * ff;
            }
        }

        // Handover and RLF processing against last tick's interference.
        let mut trace = self.trace.as_mut();
        for (k, user) in self.users.iter_mut().enumerate() {
            if let Some(serving) = user.ho.serving() {
                user.sinr_db = sinr(cfg, &self.cell_load, &user.rsrp_dbm, serving);
            }
            let env = TickEnv {
                now_ms,
                tick_ms: cfg.tick_ms(),
                user: k,
                slice: user.slice,
                boundaries: &self.boundaries,
                params,
                config: &cfg.handover,
            };
            process_user_tick(
                &mut user.ho,
                &user.rsrp_dbm,
                user.sinr_db,
                &env,
                &mut self.book,
                trace.as_deref_mut(),
            );
        }

        // Resource allocation on the post-handover association.
        let n_slices = cfg.n_slices;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.cells.len()];
        for (k, user) in self.users.iter_mut().enumerate() {
            user.service = None;
            if let Some(serving) = user.ho.serving() {
                user.sinr_db = sinr(cfg, &self.cell_load, &user.rsrp_dbm, serving);
                if user.active {
                    members[serving].push(k);
                }
            }
        }
        let mut new_load = vec![0.0; self.cells.len()];
        let mut acc = acc;
        for (n, ks) in members.iter().enumerate() {
            let demands: Vec<UserDemand> = ks
                .iter()
                .map(|&k| UserDemand {
                    slice: self.users[k].slice,
                    demand_mbps: self.users[k].demand_mbps,
                    sinr_db: self.users[k].sinr_db,
                })
                .collect();
            let alloc = allocate_resources(
                &demands,
                n_slices,
                cfg.bandwidth_mhz,
                cfg.max_spectral_eff,
                &cfg.latency,
            );
            new_load[n] = alloc.utilization;
            for s in 0..n_slices {
                self.slice_load[n * n_slices + s] = alloc.slice_load[s];
            }
            for (&k, service) in ks.iter().zip(&alloc.services) {
                self.users[k].service = Some(*service);
            }
            if let Some(acc) = acc.as_deref_mut() {
                for s in 0..n_slices {
                    acc.sums[n * n_slices + s][0] += alloc.slice_load[s];
                }
                for (&k, service) in ks.iter().zip(&alloc.services) {
                    let s = self.users[k].slice;
                    let spec = &cfg.slice_specs[s];
                    let (tsl, lsl) = mdp::user_service_levels(
                        service.rate_mbps,
                        service.latency_ms,
                        spec.throughput_req,
                        spec.latency_req,
                    )
                    .expect("latency is positive by construction");
                    let row = &mut acc.sums[n * n_slices + s];
                    row[1] += 1.0;
                    row[2] += tsl;
                    row[3] += lsl;
                }
            }
        }
        if let Some(acc) = acc {
            acc.ticks += 1;
        }
        self.cell_load = new_load;
    }

    /// Runs one agent step with fixed handover parameters: counters are reset,
    /// cell measures are averaged over the step's ticks and HO counts summed.
    pub fn run_agent_step(&mut self, params: &HoParamTable) -> StepReport {
        self.book.reset();
        let mut acc = StepAccumulator {
            sums: vec![[0.0; 4]; self.cells.len() * self.config.n_slices],
            ticks: 0,
        };
        for _ in 0..self.config.ticks_per_agent_step {
            self.tick_inner(params, Some(&mut acc));
        }
        let mut kpi = KpiAggregate::zeros(self.layout);
        let inv = 1.0 / acc.ticks as f64;
        for (dst, src) in kpi.cells.iter_mut().zip(&acc.sums) {
            for f in 0..4 {
                dst[f] = src[f] * inv;
            }
        }
        kpi.set_counts(&self.boundaries, &self.book)
            .expect("layout is consistent by construction");
        let metrics = slice_metrics(&kpi, &self.book);
        StepReport {
            kpi,
            book: self.book.clone(),
            metrics,
        }
    }

    /// One CSV row per user at the current instant.
    pub fn write_snapshot<W: Write>(&self, writer: &mut csv::Writer<W>) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            time_ms: u64,
            user: usize,
            group: usize,
            slice: usize,
            x: f64,
            y: f64,
            active: bool,
            serving: Option<usize>,
            sinr_db: f64,
            rate_mbps: Option<f64>,
            latency_ms: Option<f64>,
        }
        for (k, u) in self.users.iter().enumerate() {
            writer.serialize(Row {
                time_ms: self.clock_ms(),
                user: k,
                group: u.group,
                slice: u.slice,
                x: u.position[0],
                y: u.position[1],
                active: u.active,
                serving: u.ho.serving(),
                sinr_db: u.sinr_db,
                rate_mbps: u.service.map(|s| s.rate_mbps),
                latency_ms: u.service.map(|s| s.latency_ms),
            })?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Current time of day as used by the traffic profile.
    pub fn on_probability(&self) -> f64 {
        on_probability(&self.config, self.now_s())
    }
}

fn rsrp(cfg: &ScenarioConfig, cell: &Cell, at: [f64; 2], shadow_db: f64) -> f64 {
    cfg.tx_power_dbm + antenna_gain_db(cell.position, cell.azimuth_deg, at, &cfg.antenna)
        - pathloss(cell.position, at, shadow_db, &cfg.pathloss)
}

fn sinr(cfg: &ScenarioConfig, load: &[f64], rsrp_dbm: &[f64], serving: usize) -> f64 {
    let interferers = rsrp_dbm
        .iter()
        .zip(load)
        .enumerate()
        .filter(|&(m, _)| m != serving)
        .map(|(_, (&p, &l))| (p, l));
    compute_sinr(rsrp_dbm[serving], interferers, cfg.noise_floor_dbm)
}

/// Sinusoidal daily on-probability between `min_on` and `max_on`.
pub fn on_probability(cfg: &ScenarioConfig, t_s: f64) -> f64 {
    let t = &cfg.traffic;
    let x = 2.0 * PI * (t_s / t.day_s + t.phase);
    t.min_on + (t.max_on - t.min_on) * 0.5 * (1.0 - x.cos())
}
