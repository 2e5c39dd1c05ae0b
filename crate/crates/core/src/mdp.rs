//! State vector, handover and service metrics, and the scaled reward.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::handover::{BoundarySet, HoCounterBook};

pub const CELL_FEATURES: [&str; 4] = ["load", "users", "tsl", "lsl"];
pub const PAIR_FEATURES: [&str; 4] = ["hoa", "hos", "hol", "hopp"];

/// Handover failure ratio of one slice over all boundaries; 0 without attempts.
pub fn hfr(book: &HoCounterBook, slice: usize) -> f64 {
    let t = book.slice_total(slice);
    if t.attempts == 0 {
        0.0
    } else {
        t.failures() as f64 / t.attempts as f64
    }
}

/// Ping-pong ratio of one slice over all boundaries; 0 without successes.
pub fn ppr(book: &HoCounterBook, slice: usize) -> f64 {
    let t = book.slice_total(slice);
    if t.successes == 0 {
        0.0
    } else {
        t.ping_pong as f64 / t.successes as f64
    }
}

/// Throughput and latency service levels of a single user.
pub fn user_service_levels(
    rate_mbps: f64,
    latency_ms: f64,
    throughput_req: f64,
    latency_req: f64,
) -> Result<(f64, f64)> {
    if !(latency_ms > 0.0) {
        return Err(Error::Domain(format!(
            "latency must be positive, got {latency_ms}"
        )));
    }
    if !(throughput_req > 0.0) || !(latency_req > 0.0) {
        return Err(Error::Domain(
            "service requirements must be positive".into(),
        ));
    }
    Ok((
        (rate_mbps / throughput_req).min(1.0),
        (latency_req / latency_ms).min(1.0),
    ))
}

/// Ratio of summed per-cell service levels to summed per-cell user counts.
pub fn slice_service_level(sums: &[f64], counts: &[f64]) -> f64 {
    let users: f64 = counts.iter().sum();
    if users <= 0.0 {
        0.0
    } else {
        sums.iter().sum::<f64>() / users
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub hfr: f64,
    pub ppr: f64,
    pub tsl: f64,
    pub lsl: f64,
}

impl SliceMetrics {
    pub fn in_unit_range(&self) -> bool {
        [self.hfr, self.ppr, self.tsl, self.lsl]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub w_throughput: Vec<f64>,
    pub w_latency: Vec<f64>,
    pub w_failure: Vec<f64>,
    pub w_ping_pong: Vec<f64>,
    pub scale: f64,
    pub normalize_by_slices: bool,
}

impl RewardConfig {
    /// Same weights for every slice.
    pub fn uniform(n_slices: usize, weights: [f64; 4], scale: f64) -> Self {
        RewardConfig {
            w_throughput: vec![weights[0]; n_slices],
            w_latency: vec![weights[1]; n_slices],
            w_failure: vec![weights[2]; n_slices],
            w_ping_pong: vec![weights[3]; n_slices],
            scale,
            normalize_by_slices: true,
        }
    }

    /// Weights (1, 1, 1, 0.3) and scale 5.
    pub fn standard(n_slices: usize) -> Self {
        Self::uniform(n_slices, [1.0, 1.0, 1.0, 0.3], 5.0)
    }

    pub fn n_slices(&self) -> usize {
        self.w_throughput.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_slices();
        if s == 0 {
            return Err(Error::Config(
                "reward config needs at least one slice".into(),
            ));
        }
        for w in [&self.w_latency, &self.w_failure, &self.w_ping_pong] {
            check_dim("reward weights", s, w.len())?;
        }
        let all = [
            &self.w_throughput,
            &self.w_latency,
            &self.w_failure,
            &self.w_ping_pong,
        ];
        if all.iter().any(|w| w.iter().any(|x| !(*x >= 0.0))) {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::Config("reward scale must be positive".into()));
        }
        Ok(())
    }

    /// Reward bounds implied by the weights for metrics in [0, 1].
    pub fn range(&self) -> (f64, f64) {
        let norm = self.norm();
        let hi: f64 = (0..self.n_slices())
            .map(|s| self.w_throughput[s] + self.w_latency[s])
            .sum();
        let lo: f64 = (0..self.n_slices())
            .map(|s| -self.w_failure[s] - self.w_ping_pong[s])
            .sum();
        (norm * lo, norm * hi)
    }

    fn norm(&self) -> f64 {
        if self.normalize_by_slices {
            self.scale / self.n_slices() as f64
        } else {
            self.scale
        }
    }
}

pub fn reward(metrics: &[SliceMetrics], cfg: &RewardConfig) -> Result<f64> {
    check_dim("slice metrics", cfg.n_slices(), metrics.len())?;
    let total: f64 = metrics
        .iter()
        .enumerate()
        .map(|(s, m)| {
            cfg.w_throughput[s] * m.tsl + cfg.w_latency[s] * m.lsl
                - cfg.w_failure[s] * m.hfr
                - cfg.w_ping_pong[s] * m.ppr
        })
        .sum();
    Ok(cfg.norm() * total)
}

/// Dimensions of the state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub n_cells: usize,
    pub n_pairs: usize,
    pub n_slices: usize,
}

impl StateLayout {
    pub fn new(n_cells: usize, n_boundaries: usize, n_slices: usize) -> Self {
        StateLayout {
            n_cells,
            n_pairs: n_boundaries / 2,
            n_slices,
        }
    }

    pub fn for_boundaries(boundaries: &BoundarySet, n_slices: usize) -> Self {
        Self::new(boundaries.n_cells(), boundaries.len(), n_slices)
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_cells + self.n_pairs) * self.n_slices
    }

    pub fn cell_offset(&self, cell: usize, slice: usize) -> usize {
        (cell * self.n_slices + slice) * 4
    }

    pub fn pair_offset(&self, pair: usize, slice: usize) -> usize {
        4 * self.n_cells * self.n_slices + (pair * self.n_slices + slice) * 4
    }

    /// The same layout with all slices merged into one.
    pub fn aggregated(&self) -> Self {
        StateLayout {
            n_slices: 1,
            ..*self
        }
    }

    /// CSV column names in canonical order, e.g. `c3_s1_tsl` or `p0-4_s0_hopp`.
    pub fn column_names(&self, pairs: &[(usize, usize)], prefix: &str) -> Result<Vec<String>> {
        check_dim("pair list", self.n_pairs, pairs.len())?;
        let mut names = Vec::with_capacity(self.dim());
        for n in 0..self.n_cells {
            for s in 0..self.n_slices {
                for f in CELL_FEATURES {
                    names.push(format!("{prefix}c{n}_s{s}_{f}"));
                }
            }
        }
        for (a, b) in pairs {
            for s in 0..self.n_slices {
                for f in PAIR_FEATURES {
                    names.push(format!("{prefix}p{a}-{b}_s{s}_{f}"));
                }
            }
        }
        Ok(names)
    }
}

/// Raw per-step measures from which the state is assembled.
#[derive(Clone, Debug, PartialEq)]
pub struct KpiAggregate {
    pub layout: StateLayout,
    /// Per (cell, slice): `[load, users, tsl_sum, lsl_sum]`.
    pub cells: Vec<[f64; 4]>,
    /// Per (pair, slice): `[hoa, hos, hol, hopp]` summed over both directions.
    pub pairs: Vec<[f64; 4]>,
}

impl KpiAggregate {
    pub fn zeros(layout: StateLayout) -> Self {
        KpiAggregate {
            layout,
            cells: vec![[0.0; 4]; layout.n_cells * layout.n_slices],
            pairs: vec![[0.0; 4]; layout.n_pairs * layout.n_slices],
        }
    }

    pub fn cell(&self, cell: usize, slice: usize) -> &[f64; 4] {
        &self.cells[cell * self.layout.n_slices + slice]
    }

    pub fn cell_mut(&mut self, cell: usize, slice: usize) -> &mut [f64; 4] {
        &mut self.cells[cell * self.layout.n_slices + slice]
    }

    pub fn pair(&self, pair: usize, slice: usize) -> &[f64; 4] {
        &self.pairs[pair * self.layout.n_slices + slice]
    }

    /// Fills the pair block from a counter book.
    pub fn set_counts(&mut self, boundaries: &BoundarySet, book: &HoCounterBook) -> Result<()> {
        check_dim("counter book slices", self.layout.n_slices, book.n_slices())?;
        check_dim(
            "counter book pairs",
            self.layout.n_pairs,
            boundaries.n_pairs(),
        )?;
        for p in 0..boundaries.n_pairs() {
            for s in 0..self.layout.n_slices {
                let c = book.pair_total(boundaries, p, s);
                self.pairs[p * self.layout.n_slices + s] = [
                    c.attempts as f64,
                    c.successes as f64,
                    c.too_late as f64,
                    c.ping_pong as f64,
                ];
            }
        }
        Ok(())
    }

    /// Merges slices: loads, user counts, level sums and HO counts all add.
    pub fn aggregate_slices(&self) -> KpiAggregate {
        let layout = self.layout.aggregated();
        let s = self.layout.n_slices;
        let merge = |rows: &[[f64; 4]]| -> Vec<[f64; 4]> {
            rows.chunks(s)
                .map(|chunk| {
                    let mut out = [0.0; 4];
                    for row in chunk {
                        for f in 0..4 {
                            out[f] += row[f];
                        }
                    }
                    out
                })
                .collect()
        };
        KpiAggregate {
            layout,
            cells: merge(&self.cells),
            pairs: merge(&self.pairs),
        }
    }

    pub fn from_state(layout: StateLayout, state: &[f64]) -> Result<Self> {
        check_dim("state vector", layout.dim(), state.len())?;
        let split = 4 * layout.n_cells * layout.n_slices;
        let rows = |xs: &[f64]| -> Vec<[f64; 4]> {
            xs.chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect()
        };
        Ok(KpiAggregate {
            layout,
            cells: rows(&state[..split]),
            pairs: rows(&state[split..]),
        })
    }
}

pub fn assemble_state(kpi: &KpiAggregate) -> Result<Vec<f64>> {
    let l = kpi.layout;
    check_dim("cell measures", l.n_cells * l.n_slices, kpi.cells.len())?;
    check_dim("pair measures", l.n_pairs * l.n_slices, kpi.pairs.len())?;
    let mut out = Vec::with_capacity(l.dim());
    for row in kpi.cells.iter().chain(&kpi.pairs) {
        out.extend_from_slice(row);
    }
    Ok(out)
}

/// Rescales a raw state for network input: every count-like entry is divided
/// by `count_cap`, loads pass through.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub count_cap: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        FeatureScaling { count_cap: 50.0 }
    }
}

impl FeatureScaling {
    pub fn apply(&self, layout: &StateLayout, state: &[f64]) -> Result<Vec<f64>> {
        check_dim("state vector", layout.dim(), state.len())?;
        let split = 4 * layout.n_cells * layout.n_slices;
        Ok(state
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if i < split && i % 4 == 0 {
                    x
                } else {
                    x / self.count_cap
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handover::HoOutcome;
    use proptest::prelude::*;

    fn metrics(hfr: f64, ppr: f64, tsl: f64, lsl: f64) -> SliceMetrics {
        SliceMetrics { hfr, ppr, tsl, lsl }
    }

    #[test]
    fn hfr_and_ppr_examples() {
        let mut book = HoCounterBook::new(2, 1);
        book.record(0, 0, HoOutcome::TooLate);
        book.record(1, 0, HoOutcome::TooEarly);
        book.record(0, 0, HoOutcome::WrongCell);
        for i in 0..7 {
            book.record(i % 2, 0, HoOutcome::Success { ping_pong: i < 2 });
        }
        assert!((hfr(&book, 0) - 0.3).abs() < 1e-15);
        assert!((ppr(&book, 0) - 2.0 / 7.0).abs() < 1e-15);

        let mut pp = HoCounterBook::new(1, 1);
        for i in 0..8 {
            pp.record(0, 0, HoOutcome::Success { ping_pong: i < 2 });
        }
        assert_eq!(ppr(&pp, 0), 0.25);
        assert_eq!(hfr(&pp, 0), 0.0);

        let empty = HoCounterBook::new(3, 2);
        assert_eq!(hfr(&empty, 1), 0.0);
        assert_eq!(ppr(&empty, 1), 0.0);
    }

    #[test]
    fn service_level_examples() {
        assert_eq!(user_service_levels(2.5, 1.0, 5.0, 1.0).unwrap(), (0.5, 1.0));
        assert_eq!(user_service_levels(6.0, 2.0, 5.0, 1.0).unwrap(), (1.0, 0.5));
        assert!(user_service_levels(1.0, 0.0, 5.0, 1.0).is_err());
        assert!((slice_service_level(&[0.5, 1.5], &[1.0, 2.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(slice_service_level(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn reward_endpoints() {
        let cfg = RewardConfig::standard(2);
        let best = [metrics(0.0, 0.0, 1.0, 1.0); 2];
        let worst = [metrics(1.0, 1.0, 0.0, 0.0); 2];
        assert_eq!(reward(&best, &cfg).unwrap(), 10.0);
        assert_eq!(reward(&worst, &cfg).unwrap(), -6.5);
        assert_eq!(reward(&[SliceMetrics::default(); 2], &cfg).unwrap(), 0.0);
        assert_eq!(cfg.range(), (-6.5, 10.0));
    }

    #[test]
    fn layout_dimensions() {
        assert_eq!(StateLayout::new(9, 34, 2).dim(), 208);
        assert_eq!(StateLayout::new(2, 2, 1).dim(), 12);
        assert_eq!(StateLayout::new(9, 34, 1).dim(), 104);
    }

    #[test]
    fn zero_aggregate_gives_zero_vector() {
        let kpi = KpiAggregate::zeros(StateLayout::new(3, 6, 2));
        assert!(assemble_state(&kpi).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn counts_sum_both_directions() {
        let boundaries = BoundarySet::from_pairs(3, [(0, 1), (1, 2)]).unwrap();
        let mut book = HoCounterBook::new(boundaries.len(), 1);
        book.record(
            boundaries.index_of(0, 1).unwrap(),
            0,
            HoOutcome::Success { ping_pong: true },
        );
        book.record(boundaries.index_of(1, 0).unwrap(), 0, HoOutcome::TooLate);
        let mut kpi = KpiAggregate::zeros(StateLayout::for_boundaries(&boundaries, 1));
        kpi.set_counts(&boundaries, &book).unwrap();
        let p = boundaries.pair_index_of(0, 1).unwrap();
        assert_eq!(kpi.pair(p, 0), &[2.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn column_names_follow_layout() {
        let layout = StateLayout::new(2, 2, 1);
        let names = layout.column_names(&[(0, 1)], "").unwrap();
        assert_eq!(names.len(), 12);
        assert_eq!(names[0], "c0_s0_load");
        assert_eq!(names[11], "p0-1_s0_hopp");
    }

    proptest! {
        #[test]
        fn reward_is_bounded_and_monotone(
            m in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 2),
            bump in 0.0f64..0.5,
        ) {
            let cfg = RewardConfig::standard(2);
            let ms: Vec<_> = m.iter().map(|&(a, b, c, d)| metrics(a, b, c, d)).collect();
            let r = reward(&ms, &cfg).unwrap();
            prop_assert!((-6.5..=10.0).contains(&r));
            let mut better = ms.clone();
            better[0].tsl = (better[0].tsl + bump).min(1.0);
            better[1].hfr = (better[1].hfr - bump).max(0.0);
            prop_assert!(reward(&better, &cfg).unwrap() >= r);
        }

        #[test]
        fn state_round_trip(
            n_cells in 1usize..5,
            n_pairs in 0usize..5,
            n_slices in 1usize..4,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let layout = StateLayout { n_cells, n_pairs, n_slices };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..layout.dim()).map(|_| rng.random_range(0.0..10.0)).collect();
            let kpi = KpiAggregate::from_state(layout, &v).unwrap();
            prop_assert_eq!(assemble_state(&kpi).unwrap(), v);
        }
    }
}
