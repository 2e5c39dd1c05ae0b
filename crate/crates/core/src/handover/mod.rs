//! Per-user handover state machine, trigger criterion, RLF detection and
//! classification of handover outcomes into per-boundary, per-slice counters.

mod boundaries;
mod classify;
mod context;
mod counters;
pub mod criterion;
mod trace;

pub use boundaries::BoundarySet;
pub use classify::{ClassifierWindows, HoClassifier, HoEvent, Verdict};
pub use context::{
    apply_verdict, process_user_tick, HoConfig, HoParamTable, LinkState, PendingExecution, TickEnv,
    TraceRow, UserHoContext,
};
pub use counters::{HoCounterBook, HoCounts, HoOutcome};
pub use criterion::{detect_rlf, evaluate_criterion, required_samples};
pub use trace::{read_trace, write_trace};
