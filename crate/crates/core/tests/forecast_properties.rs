use chrono::{NaiveDate, NaiveDateTime};
use pcsmpc::forecast::{step_duration, HistoryBuffer, LoadSample, HISTORY_DEPTH};
use proptest::prelude::*;

fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2019, 3, 4)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weekly_periodic_signal_is_forecast_exactly(
        week in prop::collection::vec(0.0f64..5.0, HISTORY_DEPTH),
        offset in 0usize..HISTORY_DEPTH,
        n in 1usize..96,
    ) {
        let mut b = HistoryBuffer::default();
        let total = HISTORY_DEPTH + offset;
        for k in 0..total {
            let v = week[k % HISTORY_DEPTH];
            b.record(start() + step_duration() * k as i32, LoadSample { q_l_sh: v, q_l_dhw: 0.5 * v, p_l: v }).unwrap();
        }
        let now = start() + step_duration() * total as i32;
        let f = b.forecast_loads(now, n);
        for i in 0..n {
            prop_assert_eq!(f.q_l_sh[i], week[(total + i) % HISTORY_DEPTH]);
        }
        prop_assert!(!f.degraded);
    }

    #[test]
    fn forecast_after_full_week_replays_it(week in prop::collection::vec(0.0f64..5.0, HISTORY_DEPTH)) {
        let mut b = HistoryBuffer::default();
        for (k, v) in week.iter().enumerate() {
            b.record(start() + step_duration() * k as i32, LoadSample { q_l_sh: *v, q_l_dhw: *v, p_l: *v }).unwrap();
        }
        let now = start() + step_duration() * HISTORY_DEPTH as i32;
        let f = b.forecast_loads(now, HISTORY_DEPTH);
        prop_assert_eq!(f.p_l, week);
    }
}
