use cohortnet_core::breakpoints::{find_breakpoint, FitVariant};
use cohortnet_core::series::MetricSeries;
use cohortnet_core::MonthKey;
use proptest::collection::vec;
use proptest::prelude::*;

fn series(values: &[f64]) -> MetricSeries {
    let start = MonthKey::new(2014, 1).unwrap();
    MetricSeries::from_values("m", "s", values.iter().enumerate().map(|(i, v)| (start.offset(i as i64), Some(*v))))
        .unwrap()
}

fn variant() -> impl Strategy<Value = FitVariant> {
    prop_oneof![Just(FitVariant::Independent), Just(FitVariant::Continuous)]
}

proptest! {
    #[test]
    fn tau_leaves_min_seg_on_both_sides(values in vec(-1.0f64..1.0, 12..50), v in variant()) {
        let s = series(&values);
        let r = find_breakpoint(&s, 6, v).unwrap();
        let idx = r.tau.months_since(MonthKey::new(2014, 1).unwrap());
        prop_assert!(idx >= 6 && idx <= values.len() as i64 - 6);
        prop_assert!(r.sse_ratio >= 0.0 && r.sse_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn affine_rescaling_keeps_the_break(
        values in vec(-1.0f64..1.0, 12..40),
        scale in 0.5f64..20.0,
        shift in -5.0f64..5.0,
        v in variant(),
    ) {
        let a = find_breakpoint(&series(&values), 6, v).unwrap();
        let moved: Vec<f64> = values.iter().map(|x| x * scale + shift).collect();
        let b = find_breakpoint(&series(&moved), 6, v).unwrap();
        prop_assert!((a.sse_ratio - b.sse_ratio).abs() < 1e-6);
    }

    #[test]
    fn continuous_fit_never_beats_independent(values in vec(-1.0f64..1.0, 12..40)) {
        let s = series(&values);
        let ind = find_breakpoint(&s, 6, FitVariant::Independent).unwrap();
        let con = find_breakpoint(&s, 6, FitVariant::Continuous).unwrap();
        prop_assert!(ind.sse_segmented <= con.sse_segmented + 1e-9);
    }
}
