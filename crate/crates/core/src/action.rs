//! Gridded handover-parameter action space.
//!
//! An action assigns a margin (dB) and a time-to-trigger (ms) to every
//! directional boundary and slice. Dimension `j` is laid out as
//! `((boundary · S) + slice) · 2 + {0: margin, 1: ttt}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Distance below which a proto value counts as sitting exactly on a grid point.
pub const GRID_HIT_EPS: f64 = 1e-9;

pub fn default_hom_set() -> Vec<f64> {
    (-5..=5).map(f64::from).collect()
}

pub fn default_ttt_set() -> Vec<f64> {
    vec![
        40.0, 64.0, 80.0, 100.0, 128.0, 160.0, 256.0, 320.0, 480.0, 512.0, 640.0, 1024.0, 1280.0,
        2560.0, 5120.0,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Margin,
    TimeToTrigger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionForm {
    /// Continuous actor output, clipped to the per-dimension box.
    Proto,
    /// Every entry lies on its governing grid.
    Operating,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceActionVector {
    pub values: Vec<f64>,
    pub form: ActionForm,
}

impl SliceActionVector {
    pub fn proto(values: Vec<f64>) -> Self {
        SliceActionVector {
            values,
            form: ActionForm::Proto,
        }
    }

    pub fn operating(values: Vec<f64>) -> Self {
        SliceActionVector {
            values,
            form: ActionForm::Operating,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The discrete margin and time-to-trigger sets and the action layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    hom_db: Vec<f64>,
    ttt_ms: Vec<f64>,
    n_boundaries: usize,
    n_slices: usize,
}

fn check_set(name: &str, set: &[f64]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Config(format!("{name} set is empty")));
    }
    if set.iter().any(|v| !v.is_finite()) || set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "{name} set must be finite and strictly ascending: {set:?}"
        )));
    }
    Ok(())
}

impl ActionGrid {
    pub fn new(
        hom_db: Vec<f64>,
        ttt_ms: Vec<f64>,
        n_boundaries: usize,
        n_slices: usize,
    ) -> Result<Self> {
        check_set("HOM", &hom_db)?;
        check_set("TTT", &ttt_ms)?;
        if n_slices == 0 {
            return Err(Error::Config("action grid needs at least one slice".into()));
        }
        Ok(ActionGrid {
            hom_db,
            ttt_ms,
            n_boundaries,
            n_slices,
        })
    }

    pub fn with_defaults(n_boundaries: usize, n_slices: usize) -> Self {
        ActionGrid::new(default_hom_set(), default_ttt_set(), n_boundaries, n_slices)
            .expect("default sets are valid")
    }

    /// Same value sets, different layout (used by the slice-agnostic baseline).
    pub fn with_layout(&self, n_boundaries: usize, n_slices: usize) -> Result<Self> {
        ActionGrid::new(
            self.hom_db.clone(),
            self.ttt_ms.clone(),
            n_boundaries,
            n_slices,
        )
    }

    pub fn dim(&self) -> usize {
        2 * self.n_boundaries * self.n_slices
    }

    pub fn n_boundaries(&self) -> usize {
        self.n_boundaries
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn hom_set(&self) -> &[f64] {
        &self.hom_db
    }

    pub fn ttt_set(&self) -> &[f64] {
        &self.ttt_ms
    }

    pub fn index(&self, boundary: usize, slice: usize, kind: ParamKind) -> usize {
        let base = (boundary * self.n_slices + slice) * 2;
        match kind {
            ParamKind::Margin => base,
            ParamKind::TimeToTrigger => base + 1,
        }
    }

    pub fn kind(&self, dim: usize) -> ParamKind {
        if dim % 2 == 0 {
            ParamKind::Margin
        } else {
            ParamKind::TimeToTrigger
        }
    }

    pub fn values(&self, dim: usize) -> &[f64] {
        match self.kind(dim) {
            ParamKind::Margin => &self.hom_db,
            ParamKind::TimeToTrigger => &self.ttt_ms,
        }
    }

    pub fn bounds(&self, dim: usize) -> (f64, f64) {
        let v = self.values(dim);
        (v[0], v[v.len() - 1])
    }

    /// Constant action with the given margin and time-to-trigger everywhere.
    pub fn uniform(&self, hom_db: f64, ttt_ms: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|j| match self.kind(j) {
                ParamKind::Margin => hom_db,
                ParamKind::TimeToTrigger => ttt_ms,
            })
            .collect()
    }

    pub fn is_operating(&self, action: &[f64]) -> bool {
        action.len() == self.dim()
            && action
                .iter()
                .enumerate()
                .all(|(j, a)| self.values(j).contains(a))
    }

    /// Per-dimension affine map `[a_L, a_H] → [−1, 1]`.
    pub fn normalize(&self, action: &[f64]) -> Result<Vec<f64>> {
        check_dim("action", self.dim(), action.len())?;
        Ok(action
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let (lo, hi) = self.bounds(j);
                if hi > lo {
                    2.0 * (a - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn denormalize(&self, unit: &[f64]) -> Result<Vec<f64>> {
        check_dim("action", self.dim(), unit.len())?;
        Ok(unit
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let (lo, hi) = self.bounds(j);
                lo + (u + 1.0) * 0.5 * (hi - lo)
            })
            .collect())
    }

    pub fn clip(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let (lo, hi) = self.bounds(j);
                a.clamp(lo, hi)
            })
            .collect()
    }

    /// Nearest grid value per dimension; exact midpoints go to the smaller value.
    pub fn snap_nearest(&self, proto: &[f64]) -> Result<Vec<f64>> {
        check_dim("action", self.dim(), proto.len())?;
        Ok(proto
            .iter()
            .enumerate()
            .map(|(j, &a)| snap_value(self.values(j), a))
            .collect())
    }

    /// Samples `k` neighbours of `proto` on the grid, one independent draw per
    /// dimension per neighbour: each coordinate picks the grid value just above
    /// or just below with probability proportional to the reciprocal distance.
    /// Coordinates outside the grid range clamp to the nearest endpoint.
    /// Duplicates are kept.
    pub fn k_neighbors<R: Rng + ?Sized>(
        &self,
        proto: &[f64],
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        check_dim("action", self.dim(), proto.len())?;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let brackets: Vec<Bracket> = proto
            .iter()
            .enumerate()
            .map(|(j, &a)| Bracket::new(self.values(j), a))
            .collect();
        Ok((0..k)
            .map(|_| brackets.iter().map(|b| b.sample(rng)).collect())
            .collect())
    }

    /// Samples `k` neighbours and keeps the one with the highest Q estimate
    /// (lowest candidate index on ties). Returns the chosen action and the full
    /// candidate list.
    pub fn project<R, Q>(
        &self,
        state: &[f64],
        proto: &[f64],
        k: usize,
        rng: &mut R,
        q: &Q,
    ) -> Result<Projection>
    where
        R: Rng + ?Sized,
        Q: QEvaluator + ?Sized,
    {
        let candidates = self.k_neighbors(proto, k, rng)?;
        let scores = q.q_values(state, &candidates)?;
        check_dim("q evaluations", candidates.len(), scores.len())?;
        let best = argmax_first(&scores);
        Ok(Projection {
            action: candidates[best].clone(),
            chosen: best,
            candidates,
            scores,
        })
    }

    /// Inverse of snapping: `k` continuous actions drawn uniformly from the
    /// snapping cell of each coordinate, so every sample snaps back to `operating`.
    pub fn augment_continuous<R: Rng + ?Sized>(
        &self,
        operating: &[f64],
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        check_dim("action", self.dim(), operating.len())?;
        let cells: Vec<(f64, f64)> = operating
            .iter()
            .enumerate()
            .map(|(j, &a)| snapping_cell(self.values(j), a))
            .collect::<Result<_>>()?;
        Ok((0..k)
            .map(|_| {
                cells
                    .iter()
                    .map(|&(lo, hi)| {
                        if hi > lo {
                            // (lo, hi]: the lower midpoint snaps downward.
                            hi - rng.random::<f64>() * (hi - lo)
                        } else {
                            hi
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

/// Result of [`ActionGrid::project`].
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub action: Vec<f64>,
    pub chosen: usize,
    pub candidates: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

/// Scores operating actions for a state.
pub trait QEvaluator {
    fn q_values(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl<F> QEvaluator for F
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    fn q_values(&self, state: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(actions.iter().map(|a| self(state, a)).collect())
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn snap_value(set: &[f64], a: f64) -> f64 {
    let hi = set.partition_point(|&v| v < a);
    if hi == 0 {
        return set[0];
    }
    if hi == set.len() {
        return set[set.len() - 1];
    }
    let (below, above) = (set[hi - 1], set[hi]);
    if above - a < a - below {
        above
    } else {
        below
    }
}

fn snapping_cell(set: &[f64], a: f64) -> Result<(f64, f64)> {
    let i = set
        .iter()
        .position(|&v| v == a)
        .ok_or_else(|| Error::Domain(format!("{a} is not a grid value")))?;
    let lo = if i == 0 {
        set[0]
    } else {
        0.5 * (set[i - 1] + set[i])
    };
    let hi = if i + 1 == set.len() {
        set[i]
    } else {
        0.5 * (set[i] + set[i + 1])
    };
    Ok((lo, hi))
}

/// Per-dimension sampling rule of the neighbour selection.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Bracket {
    Fixed(f64),
    Between {
        below: f64,
        above: f64,
        p_above: f64,
    },
}

impl Bracket {
    fn new(set: &[f64], a: f64) -> Self {
        let (min, max) = (set[0], set[set.len() - 1]);
        if a <= min {
            return Bracket::Fixed(min);
        }
        if a >= max {
            return Bracket::Fixed(max);
        }
        let hi = set.partition_point(|&v| v < a);
        let (below, above) = (set[hi - 1], set[hi]);
        let (d_above, d_below) = (above - a, a - below);
        if d_above < GRID_HIT_EPS {
            return Bracket::Fixed(above);
        }
        if d_below < GRID_HIT_EPS {
            return Bracket::Fixed(below);
        }
        let (nu_above, nu_below) = (1.0 / d_above, 1.0 / d_below);
        Bracket::Between {
            below,
            above,
            p_above: nu_above / (nu_above + nu_below),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Bracket::Fixed(v) => v,
            Bracket::Between {
                below,
                above,
                p_above,
            } => {
                if rng.random::<f64>() < p_above {
                    above
                } else {
                    below
                }
            }
        }
    }
}

/// Distribution of one neighbour coordinate as `(grid value, probability)` pairs.
pub fn neighbor_distribution(set: &[f64], a: f64) -> Vec<(f64, f64)> {
    match Bracket::new(set, a) {
        Bracket::Fixed(v) => vec![(v, 1.0)],
        Bracket::Between {
            below,
            above,
            p_above,
        } => vec![(below, 1.0 - p_above), (above, p_above)],
    }
}
