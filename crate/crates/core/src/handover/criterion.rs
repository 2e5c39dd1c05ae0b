//! Slice-specific handover trigger and radio-link-failure detection over
//! uniformly sampled measurement histories (oldest sample first).

/// Number of consecutive samples a condition lasting `duration_ms` spans at
/// the given sampling period. Durations round to the nearest sample count and
/// always need at least the current sample.
pub fn required_samples(duration_ms: f64, period_ms: f64) -> usize {
    ((duration_ms / period_ms).round() as usize).max(1)
}

/// True iff `P_target > P_serving + margin` held at every sample of the
/// trailing time-to-trigger window. Too short a history means the condition
/// cannot have held.
pub fn evaluate_criterion(
    rsrp_history: &[Vec<f64>],
    period_ms: f64,
    serving: usize,
    target: usize,
    margin_db: f64,
    ttt_ms: f64,
) -> bool {
    let need = required_samples(ttt_ms, period_ms);
    if rsrp_history.len() < need {
        return false;
    }
    rsrp_history[rsrp_history.len() - need..]
        .iter()
        .all(|p| p[target] > p[serving] + margin_db)
}

/// True iff SINR stayed below `q_out_db` for at least `t_rlf_ms` up to the latest sample.
pub fn detect_rlf(sinr_history: &[f64], period_ms: f64, q_out_db: f64, t_rlf_ms: f64) -> bool {
    let run = sinr_history
        .iter()
        .rev()
        .take_while(|&&s| s < q_out_db)
        .count();
    run as f64 * period_ms >= t_rlf_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_history(diff: f64, samples: usize) -> Vec<Vec<f64>> {
        vec![vec![-90.0, -90.0 + diff]; samples]
    }

    #[test]
    fn sustained_margin_triggers() {
        // 3 dB over a 2 dB margin for 500 ms at 10 ms sampling, 320 ms TTT.
        let h = constant_history(3.0, 50);
        assert!(evaluate_criterion(&h, 10.0, 0, 1, 2.0, 320.0));
    }

    #[test]
    fn equality_does_not_trigger() {
        let h = constant_history(0.0, 50);
        assert!(!evaluate_criterion(&h, 10.0, 0, 1, 0.0, 40.0));
    }

    #[test]
    fn unfilled_window_does_not_trigger() {
        let mut h = constant_history(-1.0, 20);
        h.extend(constant_history(3.0, 30));
        assert!(!evaluate_criterion(&h, 10.0, 0, 1, 2.0, 320.0));
        h.extend(constant_history(3.0, 2));
        assert!(evaluate_criterion(&h, 10.0, 0, 1, 2.0, 320.0));
    }

    #[test]
    fn short_history_is_false() {
        assert!(!evaluate_criterion(
            &constant_history(5.0, 3),
            100.0,
            0,
            1,
            0.0,
            512.0
        ));
    }

    #[test]
    fn rlf_examples() {
        assert!(detect_rlf(&[-10.0; 12], 100.0, -8.0, 1000.0));
        assert!(!detect_rlf(&[0.0; 30], 100.0, -8.0, 1000.0));
        let mut dip = vec![-10.0; 5];
        dip.extend([0.0; 10]);
        assert!(!detect_rlf(&dip, 100.0, -8.0, 1000.0));
    }

    proptest! {
        #[test]
        fn raising_margin_never_adds_triggers(
            diffs in prop::collection::vec(-6.0f64..6.0, 1..80),
            margin in -5.0f64..5.0,
            bump in 0.0f64..4.0,
            ttt in prop::sample::select(vec![40.0, 100.0, 320.0, 512.0, 1024.0]),
        ) {
            let history: Vec<Vec<f64>> = diffs.iter().map(|d| vec![-80.0, -80.0 + d]).collect();
            let count = |o: f64| (1..=history.len())
                .filter(|&t| evaluate_criterion(&history[..t], 100.0, 0, 1, o, ttt))
                .count();
            prop_assert!(count(margin + bump) <= count(margin));
        }
    }
}
