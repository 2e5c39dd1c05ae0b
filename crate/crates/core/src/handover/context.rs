use serde::{Deserialize, Serialize};

use super::boundaries::BoundarySet;
use super::classify::{ClassifierWindows, HoClassifier, HoEvent, Verdict};
use super::counters::HoCounterBook;
use super::criterion::required_samples;
use crate::error::{check_dim, Result};

/// Radio-link-failure and classification thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoConfig {
    pub q_out_db: f64,
    pub t_rlf_ms: u64,
    pub t_crit_ms: u64,
    pub t_pp_ms: u64,
    pub exec_delay_ms: u64,
    pub reest_delay_ms: u64,
}

impl Default for HoConfig {
    fn default() -> Self {
        HoConfig {
            q_out_db: -8.0,
            t_rlf_ms: 1000,
            t_crit_ms: 1000,
            t_pp_ms: 2000,
            exec_delay_ms: 50,
            reest_delay_ms: 200,
        }
    }
}

impl HoConfig {
    pub fn windows(&self) -> ClassifierWindows {
        ClassifierWindows {
            t_crit_ms: self.t_crit_ms,
            t_pp_ms: self.t_pp_ms,
        }
    }
}

/// Operating handover parameters indexed by (directional boundary, slice).
#[derive(Clone, Debug, PartialEq)]
pub struct HoParamTable {
    values: Vec<f64>,
    n_boundaries: usize,
    n_slices: usize,
}

impl HoParamTable {
    /// `values` uses the action layout: `((b·S)+s)·2 + {0: margin, 1: ttt}`.
    pub fn new(values: Vec<f64>, n_boundaries: usize, n_slices: usize) -> Result<Self> {
        check_dim(
            "handover parameters",
            2 * n_boundaries * n_slices,
            values.len(),
        )?;
        Ok(HoParamTable {
            values,
            n_boundaries,
            n_slices,
        })
    }

    pub fn uniform(margin_db: f64, ttt_ms: f64, n_boundaries: usize, n_slices: usize) -> Self {
        let mut values = Vec::with_capacity(2 * n_boundaries * n_slices);
        for _ in 0..n_boundaries * n_slices {
            values.push(margin_db);
            values.push(ttt_ms);
        }
        HoParamTable {
            values,
            n_boundaries,
            n_slices,
        }
    }

    pub fn margin_db(&self, boundary: usize, slice: usize) -> f64 {
        self.values[(boundary * self.n_slices + slice) * 2]
    }

    pub fn ttt_ms(&self, boundary: usize, slice: usize) -> f64 {
        self.values[(boundary * self.n_slices + slice) * 2 + 1]
    }

    pub fn n_boundaries(&self) -> usize {
        self.n_boundaries
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkState {
    Connected { serving: usize },
    Reestablishing { until_ms: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingExecution {
    pub source: usize,
    pub target: usize,
    pub done_at_ms: u64,
}

/// One row of an exported event trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub time_ms: u64,
    pub user: usize,
    pub slice: usize,
    pub event: HoEvent,
}

/// Per-user handover state.
#[derive(Clone, Debug, PartialEq)]
pub struct UserHoContext {
    pub link: LinkState,
    hold: Vec<u32>,
    below_ms: u64,
    pending: Option<PendingExecution>,
    classifier: HoClassifier,
    verdicts: Vec<Verdict>,
}

/// Everything `process_user_tick` needs besides the user's own state.
pub struct TickEnv<'a> {
    pub now_ms: u64,
    pub tick_ms: u64,
    pub user: usize,
    pub slice: usize,
    pub boundaries: &'a BoundarySet,
    pub params: &'a HoParamTable,
    pub config: &'a HoConfig,
}

impl UserHoContext {
    pub fn new(serving: usize, n_cells: usize, config: &HoConfig) -> Self {
        UserHoContext {
            link: LinkState::Connected { serving },
            hold: vec![0; n_cells],
            below_ms: 0,
            pending: None,
            classifier: HoClassifier::new(config.windows()),
            verdicts: Vec::new(),
        }
    }

    pub fn serving(&self) -> Option<usize> {
        match self.link {
            LinkState::Connected { serving } => Some(serving),
            LinkState::Reestablishing { .. } => None,
        }
    }

    pub fn pending(&self) -> Option<PendingExecution> {
        self.pending
    }

    fn emit(
        &mut self,
        env: &TickEnv<'_>,
        event: HoEvent,
        book: &mut HoCounterBook,
        trace: &mut Option<&mut Vec<TraceRow>>,
    ) {
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                time_ms: env.now_ms,
                user: env.user,
                slice: env.slice,
                event,
            });
        }
        self.classifier
            .on_event(env.now_ms, event, &mut self.verdicts);
        self.flush(env, book);
    }

    fn flush(&mut self, env: &TickEnv<'_>, book: &mut HoCounterBook) {
        for v in self.verdicts.drain(..) {
            apply_verdict(book, env.boundaries, env.slice, v);
        }
    }

    fn reset_holds(&mut self) {
        self.hold.fill(0);
    }
}

/// Charges a verdict to the counter book. Boundaries outside the neighbour
/// list cannot be created on the fly; such failures are tallied as unattributed.
pub fn apply_verdict(
    book: &mut HoCounterBook,
    boundaries: &BoundarySet,
    slice: usize,
    verdict: Verdict,
) {
    match verdict {
        Verdict::Outcome {
            source,
            target,
            outcome,
        } => match boundaries.index_of(source, target) {
            Some(b) => book.record(b, slice, outcome),
            None => book.record_unattributed_rlf(),
        },
        Verdict::UnattributedRlf => book.record_unattributed_rlf(),
    }
}

/// Advances one user by one radio tick: RLF detection, handover completion,
/// trigger evaluation, re-establishment. Counters receive every resolved attempt.
pub fn process_user_tick(
    ctx: &mut UserHoContext,
    rsrp_dbm: &[f64],
    sinr_db: f64,
    env: &TickEnv<'_>,
    book: &mut HoCounterBook,
    mut trace: Option<&mut Vec<TraceRow>>,
) {
    ctx.classifier.advance(env.now_ms, &mut ctx.verdicts);
    ctx.flush(env, book);

    let serving = match ctx.link {
        LinkState::Reestablishing { until_ms } => {
            if env.now_ms >= until_ms {
                let cell = strongest(rsrp_dbm);
                ctx.link = LinkState::Connected { serving: cell };
                ctx.below_ms = 0;
                ctx.reset_holds();
                ctx.emit(env, HoEvent::Reestablish { cell }, book, &mut trace);
            }
            return;
        }
        LinkState::Connected { serving } => serving,
    };

    if sinr_db < env.config.q_out_db {
        ctx.below_ms += env.tick_ms;
    } else {
        ctx.below_ms = 0;
    }
    if ctx.below_ms >= env.config.t_rlf_ms {
        ctx.pending = None;
        ctx.below_ms = 0;
        ctx.reset_holds();
        ctx.link = LinkState::Reestablishing {
            until_ms: env.now_ms + env.config.reest_delay_ms,
        };
        ctx.emit(env, HoEvent::Rlf { serving }, book, &mut trace);
        return;
    }

    if let Some(p) = ctx.pending {
        if env.now_ms >= p.done_at_ms {
            ctx.pending = None;
            ctx.link = LinkState::Connected { serving: p.target };
            ctx.reset_holds();
            ctx.emit(
                env,
                HoEvent::Complete {
                    source: p.source,
                    target: p.target,
                },
                book,
                &mut trace,
            );
        }
        return;
    }

    let mut best: Option<usize> = None;
    for &target in env.boundaries.neighbors(serving) {
        let b = env
            .boundaries
            .index_of(serving, target)
            .expect("neighbour implies boundary");
        let margin = env.params.margin_db(b, env.slice);
        if rsrp_dbm[target] > rsrp_dbm[serving] + margin {
            ctx.hold[target] += 1;
        } else {
            ctx.hold[target] = 0;
        }
        let need = required_samples(env.params.ttt_ms(b, env.slice), env.tick_ms as f64);
        if ctx.hold[target] as usize >= need && best.is_none_or(|c| rsrp_dbm[target] > rsrp_dbm[c])
        {
            best = Some(target);
        }
    }
    if let Some(target) = best {
        ctx.pending = Some(PendingExecution {
            source: serving,
            target,
            done_at_ms: env.now_ms + env.config.exec_delay_ms,
        });
        ctx.reset_holds();
        ctx.emit(
            env,
            HoEvent::Trigger {
                source: serving,
                target,
            },
            book,
            &mut trace,
        );
    }
}

fn strongest(rsrp_dbm: &[f64]) -> usize {
    crate::action::argmax_first(rsrp_dbm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handover::criterion::evaluate_criterion;
    use proptest::prelude::*;

    struct Rig {
        boundaries: BoundarySet,
        params: HoParamTable,
        config: HoConfig,
        book: HoCounterBook,
        now: u64,
    }

    impl Rig {
        fn new(margin: f64, ttt: f64) -> Self {
            let boundaries = BoundarySet::from_pairs(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
            let params = HoParamTable::uniform(margin, ttt, boundaries.len(), 1);
            let book = HoCounterBook::new(boundaries.len(), 1);
            Rig {
                boundaries,
                params,
                config: HoConfig::default(),
                book,
                now: 0,
            }
        }

        fn tick(&mut self, ctx: &mut UserHoContext, user: usize, rsrp: &[f64], sinr: f64) {
            self.now += 100;
            let env = TickEnv {
                now_ms: self.now,
                tick_ms: 100,
                user,
                slice: 0,
                boundaries: &self.boundaries,
                params: &self.params,
                config: &self.config,
            };
            process_user_tick(ctx, rsrp, sinr, &env, &mut self.book, None);
        }
    }

    #[test]
    fn clean_handover_counts_one_success() {
        let mut rig = Rig::new(2.0, 320.0);
        let mut ctx = UserHoContext::new(0, 3, &rig.config);
        for _ in 0..5 {
            rig.tick(&mut ctx, 0, &[-80.0, -77.0, -100.0], 5.0);
        }
        assert_eq!(ctx.serving(), Some(1));
        for _ in 0..30 {
            rig.tick(&mut ctx, 0, &[-80.0, -77.0, -100.0], 5.0);
        }
        let b = rig.boundaries.index_of(0, 1).unwrap();
        assert_eq!(rig.book.get(b, 0).attempts, 1);
        assert_eq!(rig.book.get(b, 0).successes, 1);
        assert!(rig.book.is_consistent());
    }

    #[test]
    fn rlf_during_execution_counts_too_late() {
        let mut rig = Rig::new(0.0, 40.0);
        let mut ctx = UserHoContext::new(0, 3, &rig.config);
        // Eight bad ticks, then the trigger fires on the ninth while SINR keeps failing.
        for _ in 0..8 {
            rig.tick(&mut ctx, 0, &[-80.0, -85.0, -100.0], -12.0);
        }
        rig.tick(&mut ctx, 0, &[-80.0, -79.0, -100.0], -12.0);
        assert!(ctx.pending().is_some());
        rig.tick(&mut ctx, 0, &[-80.0, -79.0, -100.0], -12.0);
        let b = rig.boundaries.index_of(0, 1).unwrap();
        assert_eq!(rig.book.get(b, 0).attempts, 1);
        assert_eq!(rig.book.get(b, 0).too_late, 1);
        assert!(matches!(ctx.link, LinkState::Reestablishing { .. }));
        for _ in 0..3 {
            rig.tick(&mut ctx, 0, &[-80.0, -79.0, -100.0], 0.0);
        }
        assert_eq!(ctx.serving(), Some(1));
        assert_eq!(rig.book.total().attempts, 1);
    }

    #[test]
    fn users_on_disjoint_boundaries_do_not_interact() {
        let mut rig = Rig::new(1.0, 100.0);
        let mut a = UserHoContext::new(0, 3, &rig.config);
        let mut b = UserHoContext::new(2, 3, &rig.config);
        for _ in 0..40 {
            rig.tick(&mut a, 0, &[-80.0, -70.0, -120.0], 5.0);
        }
        let solo = rig.book.clone();
        rig.book.reset();
        rig.now = 0;
        let mut a2 = UserHoContext::new(0, 3, &rig.config);
        for _ in 0..40 {
            rig.tick(&mut a2, 0, &[-80.0, -70.0, -120.0], 5.0);
            rig.now -= 100;
            rig.tick(&mut b, 1, &[-120.0, -120.0, -60.0], 5.0);
        }
        assert_eq!(rig.book, solo);
        assert_eq!(b.serving(), Some(2));
        assert_eq!(
            rig.book
                .get(rig.boundaries.index_of(0, 1).unwrap(), 0)
                .successes,
            1
        );
    }

    #[test]
    fn too_early_via_tick_processing() {
        let mut rig = Rig::new(0.0, 100.0);
        let mut ctx = UserHoContext::new(0, 3, &rig.config);
        rig.tick(&mut ctx, 0, &[-80.0, -78.0, -100.0], 3.0); // trigger
        rig.tick(&mut ctx, 0, &[-80.0, -78.0, -100.0], 3.0); // complete to 1
        assert_eq!(ctx.serving(), Some(1));
        for _ in 0..10 {
            rig.tick(&mut ctx, 0, &[-80.0, -78.0, -100.0], -15.0);
        }
        for _ in 0..3 {
            rig.tick(&mut ctx, 0, &[-70.0, -90.0, -100.0], 5.0);
        }
        assert_eq!(ctx.serving(), Some(0));
        let b = rig.boundaries.index_of(0, 1).unwrap();
        assert_eq!(rig.book.get(b, 0).too_early, 1);
        assert_eq!(rig.book.get(b, 0).attempts, 1);
    }

    proptest! {
        /// The incremental hold counters agree with the window check on the
        /// full history while the serving cell is unchanged.
        #[test]
        fn hold_counter_matches_window_check(
            diffs in prop::collection::vec(-4.0f64..4.0, 1..60),
            margin in -3.0f64..3.0,
            ttt in prop::sample::select(vec![40.0, 100.0, 256.0, 512.0, 1280.0]),
        ) {
            let mut rig = Rig::new(margin, ttt);
            let mut ctx = UserHoContext::new(0, 3, &rig.config);
            let mut history = Vec::new();
            for d in diffs {
                let rsrp = vec![-80.0, -80.0 + d, -150.0];
                history.push(rsrp.clone());
                let expected = evaluate_criterion(&history, 100.0, 0, 1, margin, ttt);
                rig.tick(&mut ctx, 0, &rsrp, 10.0);
                prop_assert_eq!(ctx.pending().is_some(), expected);
                if expected {
                    break;
                }
            }
        }
    }
}
