//! Online classification of one user's handover events.
//!
//! Each attempt is counted once, when its outcome is known:
//!
//! * RLF while the handover is executing: too late, on the attempted boundary.
//! * RLF with no completed handover in the last `t_crit`: too late, charged to
//!   (serving, re-establishment cell) when that is a neighbour boundary.
//! * RLF within `t_crit` of a completed `n→m`: too early if the user
//!   re-establishes in `n`, wrong cell if in a third cell. Re-establishing in
//!   `m` leaves the handover successful and the RLF unattributed.
//! * A completed `n→m` followed by a trigger `m→n` within `t_pp`: success
//!   marked ping-pong.
//! * Otherwise the completed handover becomes a success once another trigger
//!   or a late RLF supersedes it, or once `t_pp` has elapsed.

use super::counters::HoOutcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierWindows {
    pub t_crit_ms: u64,
    pub t_pp_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HoEvent {
    Trigger { source: usize, target: usize },
    Complete { source: usize, target: usize },
    Rlf { serving: usize },
    Reestablish { cell: usize },
}

impl HoEvent {
    pub fn name(&self) -> &'static str {
        match self {
            HoEvent::Trigger { .. } => "trigger",
            HoEvent::Complete { .. } => "complete",
            HoEvent::Rlf { .. } => "rlf",
            HoEvent::Reestablish { .. } => "reestablish",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Outcome {
        source: usize,
        target: usize,
        outcome: HoOutcome,
    },
    UnattributedRlf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Completed {
    source: usize,
    target: usize,
    at_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PendingRlf {
    /// Charged already (RLF during execution); nothing left to decide.
    Settled,
    AfterHandover(Completed),
    NoRecentHandover {
        serving: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoClassifier {
    windows: ClassifierWindows,
    executing: Option<(usize, usize)>,
    last_complete: Option<Completed>,
    pending_rlf: Option<PendingRlf>,
}

impl HoClassifier {
    pub fn new(windows: ClassifierWindows) -> Self {
        HoClassifier {
            windows,
            executing: None,
            last_complete: None,
            pending_rlf: None,
        }
    }

    fn success(c: Completed, ping_pong: bool) -> Verdict {
        Verdict::Outcome {
            source: c.source,
            target: c.target,
            outcome: HoOutcome::Success { ping_pong },
        }
    }

    /// Resolves a completed handover whose ping-pong window has closed.
    pub fn advance(&mut self, now_ms: u64, out: &mut Vec<Verdict>) {
        if let Some(c) = self.last_complete {
            if now_ms.saturating_sub(c.at_ms) > self.windows.t_pp_ms {
                out.push(Self::success(c, false));
                self.last_complete = None;
            }
        }
    }

    pub fn on_event(&mut self, now_ms: u64, event: HoEvent, out: &mut Vec<Verdict>) {
        self.advance(now_ms, out);
        match event {
            HoEvent::Trigger { source, target } => {
                if let Some(c) = self.last_complete.take() {
                    let reverse = c.source == target && c.target == source;
                    let ping_pong = reverse && now_ms - c.at_ms <= self.windows.t_pp_ms;
                    out.push(Self::success(c, ping_pong));
                }
                self.executing = Some((source, target));
            }
            HoEvent::Complete { source, target } => {
                self.executing = None;
                self.last_complete = Some(Completed {
                    source,
                    target,
                    at_ms: now_ms,
                });
            }
            HoEvent::Rlf { serving } => {
                if let Some((source, target)) = self.executing.take() {
                    out.push(Verdict::Outcome {
                        source,
                        target,
                        outcome: HoOutcome::TooLate,
                    });
                    self.pending_rlf = Some(PendingRlf::Settled);
                } else if let Some(c) = self.last_complete.take() {
                    if now_ms - c.at_ms <= self.windows.t_crit_ms {
                        self.pending_rlf = Some(PendingRlf::AfterHandover(c));
                    } else {
                        out.push(Self::success(c, false));
                        self.pending_rlf = Some(PendingRlf::NoRecentHandover { serving });
                    }
                } else {
                    self.pending_rlf = Some(PendingRlf::NoRecentHandover { serving });
                }
            }
            HoEvent::Reestablish { cell } => match self.pending_rlf.take() {
                Some(PendingRlf::AfterHandover(c)) => {
                    if cell == c.source {
                        out.push(Verdict::Outcome {
                            source: c.source,
                            target: c.target,
                            outcome: HoOutcome::TooEarly,
                        });
                    } else if cell == c.target {
                        out.push(Self::success(c, false));
                        out.push(Verdict::UnattributedRlf);
                    } else {
                        out.push(Verdict::Outcome {
                            source: c.source,
                            target: c.target,
                            outcome: HoOutcome::WrongCell,
                        });
                    }
                }
                Some(PendingRlf::NoRecentHandover { serving }) => {
                    if cell == serving {
                        out.push(Verdict::UnattributedRlf);
                    } else {
                        out.push(Verdict::Outcome {
                            source: serving,
                            target: cell,
                            outcome: HoOutcome::TooLate,
                        });
                    }
                }
                Some(PendingRlf::Settled) | None => {}
            },
        }
    }

    pub fn is_executing(&self) -> bool {
        self.executing.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows() -> ClassifierWindows {
        ClassifierWindows {
            t_crit_ms: 1000,
            t_pp_ms: 2000,
        }
    }

    fn run(events: &[(u64, HoEvent)], end_ms: u64) -> Vec<Verdict> {
        let mut c = HoClassifier::new(windows());
        let mut out = Vec::new();
        for &(t, e) in events {
            c.on_event(t, e, &mut out);
        }
        c.advance(end_ms, &mut out);
        out
    }

    fn outcome(source: usize, target: usize, outcome: HoOutcome) -> Verdict {
        Verdict::Outcome {
            source,
            target,
            outcome,
        }
    }

    #[test]
    fn rlf_soon_after_handover_back_to_source_is_too_early() {
        let v = run(
            &[
                (
                    0,
                    HoEvent::Trigger {
                        source: 0,
                        target: 1,
                    },
                ),
                (
                    100,
                    HoEvent::Complete {
                        source: 0,
                        target: 1,
                    },
                ),
                (500, HoEvent::Rlf { serving: 1 }),
                (700, HoEvent::Reestablish { cell: 0 }),
            ],
            10_000,
        );
        assert_eq!(v, vec![outcome(0, 1, HoOutcome::TooEarly)]);
    }

    #[test]
    fn rlf_soon_after_handover_to_third_cell_is_wrong_cell() {
        let v = run(
            &[
                (
                    0,
                    HoEvent::Trigger {
                        source: 0,
                        target: 1,
                    },
                ),
                (
                    100,
                    HoEvent::Complete {
                        source: 0,
                        target: 1,
                    },
                ),
                (900, HoEvent::Rlf { serving: 1 }),
                (1100, HoEvent::Reestablish { cell: 2 }),
            ],
            10_000,
        );
        assert_eq!(v, vec![outcome(0, 1, HoOutcome::WrongCell)]);
    }

    #[test]
    fn quick_return_is_ping_pong() {
        let v = run(
            &[
                (
                    0,
                    HoEvent::Trigger {
                        source: 0,
                        target: 1,
                    },
                ),
                (
                    100,
                    HoEvent::Complete {
                        source: 0,
                        target: 1,
                    },
                ),
                (
                    1600,
                    HoEvent::Trigger {
                        source: 1,
                        target: 0,
                    },
                ),
                (
                    1700,
                    HoEvent::Complete {
                        source: 1,
                        target: 0,
                    },
                ),
            ],
            10_000,
        );
        assert_eq!(
            v,
            vec![
                outcome(0, 1, HoOutcome::Success { ping_pong: true }),
                outcome(1, 0, HoOutcome::Success { ping_pong: false }),
            ]
        );
    }

    #[test]
    fn rlf_without_recent_handover_is_too_late() {
        let v = run(
            &[
                (5000, HoEvent::Rlf { serving: 3 }),
                (5200, HoEvent::Reestablish { cell: 4 }),
            ],
            10_000,
        );
        assert_eq!(v, vec![outcome(3, 4, HoOutcome::TooLate)]);
    }

    #[test]
    fn rlf_during_execution_is_too_late_on_attempted_boundary() {
        let v = run(
            &[
                (
                    0,
                    HoEvent::Trigger {
                        source: 0,
                        target: 1,
                    },
                ),
                (50, HoEvent::Rlf { serving: 0 }),
                (250, HoEvent::Reestablish { cell: 2 }),
            ],
            10_000,
        );
        assert_eq!(v, vec![outcome(0, 1, HoOutcome::TooLate)]);
    }

    #[test]
    fn reestablishing_in_same_cell_is_unattributed() {
        let v = run(
            &[
                (0, HoEvent::Rlf { serving: 2 }),
                (200, HoEvent::Reestablish { cell: 2 }),
            ],
            10_000,
        );
        assert_eq!(v, vec![Verdict::UnattributedRlf]);
    }

    #[test]
    fn success_waits_for_ping_pong_window() {
        let mut c = HoClassifier::new(windows());
        let mut out = Vec::new();
        c.on_event(
            0,
            HoEvent::Trigger {
                source: 0,
                target: 1,
            },
            &mut out,
        );
        c.on_event(
            100,
            HoEvent::Complete {
                source: 0,
                target: 1,
            },
            &mut out,
        );
        c.advance(2100, &mut out);
        assert!(out.is_empty());
        c.advance(2200, &mut out);
        assert_eq!(
            out,
            vec![outcome(0, 1, HoOutcome::Success { ping_pong: false })]
        );
    }
}
