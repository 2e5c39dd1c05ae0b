use super::boundaries::BoundarySet;

/// Handover event counts for one boundary and slice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HoCounts {
    pub attempts: u64,
    pub successes: u64,
    pub too_late: u64,
    pub too_early: u64,
    pub wrong_cell: u64,
    pub ping_pong: u64,
}

impl HoCounts {
    pub fn failures(&self) -> u64 {
        self.too_late + self.too_early + self.wrong_cell
    }

    /// `attempts = successes + failures` and `ping_pong ≤ successes`.
    pub fn is_consistent(&self) -> bool {
        self.attempts == self.successes + self.failures() && self.ping_pong <= self.successes
    }

    pub fn add(&mut self, other: &HoCounts) {
        self.attempts += other.attempts;
        self.successes += other.successes;
        self.too_late += other.too_late;
        self.too_early += other.too_early;
        self.wrong_cell += other.wrong_cell;
        self.ping_pong += other.ping_pong;
    }
}

/// Final classification of one handover attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HoOutcome {
    Success { ping_pong: bool },
    TooLate,
    TooEarly,
    WrongCell,
}

/// Per-boundary, per-slice counters for one reporting period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoCounterBook {
    n_boundaries: usize,
    n_slices: usize,
    counts: Vec<HoCounts>,
    unattributed_rlf: u64,
}

impl HoCounterBook {
    pub fn new(n_boundaries: usize, n_slices: usize) -> Self {
        HoCounterBook {
            n_boundaries,
            n_slices,
            counts: vec![HoCounts::default(); n_boundaries * n_slices],
            unattributed_rlf: 0,
        }
    }

    pub fn n_boundaries(&self) -> usize {
        self.n_boundaries
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn get(&self, boundary: usize, slice: usize) -> &HoCounts {
        &self.counts[boundary * self.n_slices + slice]
    }

    pub fn get_mut(&mut self, boundary: usize, slice: usize) -> &mut HoCounts {
        &mut self.counts[boundary * self.n_slices + slice]
    }

    /// Records one resolved attempt: the attempt and its class are counted together.
    pub fn record(&mut self, boundary: usize, slice: usize, outcome: HoOutcome) {
        let c = self.get_mut(boundary, slice);
        c.attempts += 1;
        match outcome {
            HoOutcome::Success { ping_pong } => {
                c.successes += 1;
                if ping_pong {
                    c.ping_pong += 1;
                }
            }
            HoOutcome::TooLate => c.too_late += 1,
            HoOutcome::TooEarly => c.too_early += 1,
            HoOutcome::WrongCell => c.wrong_cell += 1,
        }
    }

    /// RLFs that cannot be charged to a boundary (re-establishment in the same
    /// cell, or in a cell outside the neighbour list).
    pub fn record_unattributed_rlf(&mut self) {
        self.unattributed_rlf += 1;
    }

    pub fn unattributed_rlf(&self) -> u64 {
        self.unattributed_rlf
    }

    pub fn reset(&mut self) {
        self.counts.fill(HoCounts::default());
        self.unattributed_rlf = 0;
    }

    /// Sum over all boundaries for one slice.
    pub fn slice_total(&self, slice: usize) -> HoCounts {
        let mut total = HoCounts::default();
        for b in 0..self.n_boundaries {
            total.add(self.get(b, slice));
        }
        total
    }

    pub fn total(&self) -> HoCounts {
        let mut total = HoCounts::default();
        for c in &self.counts {
            total.add(c);
        }
        total
    }

    /// Sum of both directions of an unordered pair for one slice.
    pub fn pair_total(&self, boundaries: &BoundarySet, pair: usize, slice: usize) -> HoCounts {
        let (n, m) = boundaries.pairs()[pair];
        let mut total = HoCounts::default();
        for b in [boundaries.index_of(n, m), boundaries.index_of(m, n)]
            .into_iter()
            .flatten()
        {
            total.add(self.get(b, slice));
        }
        total
    }

    /// Collapses slices into a single-slice book.
    pub fn aggregate_slices(&self) -> HoCounterBook {
        let mut out = HoCounterBook::new(self.n_boundaries, 1);
        for b in 0..self.n_boundaries {
            for s in 0..self.n_slices {
                out.counts[b].add(self.get(b, s));
            }
        }
        out.unattributed_rlf = self.unattributed_rlf;
        out
    }

    pub fn is_consistent(&self) -> bool {
        self.counts.iter().all(HoCounts::is_consistent) && self.total().is_consistent()
    }

    pub fn merge(&mut self, other: &HoCounterBook) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.add(b);
        }
        self.unattributed_rlf += other.unattributed_rlf;
    }
}
