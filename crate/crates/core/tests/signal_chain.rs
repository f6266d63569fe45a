use kehmode::signal::{
    calibrate_threshold, detect_stationary, excise_stationary, history_len, hop_len,
    moving_average, segment, window_len, StationaryMask, ThresholdRule, TraceMeta, VoltageTrace,
};
use proptest::prelude::*;

mod common;
use common::*;

fn trace(samples: Vec<f64>, fs: f64) -> VoltageTrace {
    VoltageTrace::new(samples, fs, TraceMeta::default()).unwrap()
}

fn brute_moving_average(x: &[f64], span: usize) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (span / 2) as isize;
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let mut s = 0.0;
            for j in (i - h)..=(i + h) {
                s += x[j as usize];
            }
            s / (2 * h + 1) as f64
        })
        .collect()
}

proptest! {
    #[test]
    fn moving_average_matches_reference(
        x in prop::collection::vec(-5.0f64..5.0, 1..60),
        half in 0usize..6,
    ) {
        let span = 2 * half + 1;
        let got = moving_average(&trace(x.clone(), 10.0), span).unwrap();
        let want = brute_moving_average(&x, span);
        for (a, b) in got.samples.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        prop_assert_eq!(got.samples[0], x[0]);
    }

    #[test]
    fn stop_detection_matches_brute_force(
        x in prop::collection::vec(-1.0f64..1.0, 12..80),
        fs in 2.0f64..9.0,
        threshold in 0.05f64..0.6,
    ) {
        let t = trace(x.clone(), fs);
        let k = history_len(fs);
        prop_assume!(x.len() > k);
        let mask = detect_stationary(&t, threshold).unwrap();
        for i in k..x.len() {
            prop_assert_eq!(mask.flags[i], brute_sigma(&x, i, k) < threshold);
        }
        for i in 0..k {
            prop_assert_eq!(mask.flags[i], mask.flags[k]);
        }
    }

    #[test]
    fn excision_keeps_unflagged_samples_in_order(
        pairs in prop::collection::vec((-3.0f64..3.0, any::<bool>()), 0..50),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let flags: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let out = excise_stationary(&trace(x.clone(), 5.0), &StationaryMask { flags: flags.clone() }).unwrap();
        let want: Vec<f64> = x.iter().zip(&flags).filter(|(_, f)| !**f).map(|(v, _)| *v).collect();
        prop_assert_eq!(out.samples, want);
    }

    #[test]
    fn window_count_matches_closed_form(
        n in 0usize..3000,
        t in 0.2f64..8.0,
        fs in 1.0f64..200.0,
        overlap in 0.0f64..0.9,
    ) {
        let len = window_len(t, fs);
        prop_assume!(len >= 1);
        let hop = hop_len(len, overlap);
        prop_assume!(hop >= 1);
        let windows = segment(&trace(vec![0.5; n], fs), t, overlap).unwrap();
        let expected = if n >= len { (n - len) / hop + 1 } else { 0 };
        prop_assert_eq!(windows.len(), expected);
        for (i, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.offset, i * hop);
            prop_assert_eq!(w.samples.len(), len);
        }
    }
}

#[test]
fn three_point_moving_average_example() {
    let out = moving_average(&trace(vec![1.0, 5.0, 3.0], 1.0), 3).unwrap();
    assert_eq!(out.samples, vec![1.0, 3.0, 3.0]);
}

#[test]
fn quiet_then_active_trace_splits_at_the_threshold() {
    let fs = 10.0;
    let mut x = vec![0.0; 30];
    x.extend((0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
    let t = trace(x, fs);
    let mask = detect_stationary(&t, 0.1).unwrap();
    assert!(mask.flags[..30].iter().all(|f| *f));
    // Index 30 still looks back over zeros only.
    assert!(mask.flags[31..].iter().all(|f| !*f));
    let moving = excise_stationary(&t, &mask).unwrap();
    assert_eq!(moving.len(), 29);
}

#[test]
fn fixed_threshold_passes_through_and_percentile_orders() {
    let t = trace((0..400).map(|i| ((i * i) % 17) as f64 * 0.1).collect(), 20.0);
    assert_eq!(calibrate_threshold(&[t.clone()], ThresholdRule::Fixed(0.3)).unwrap(), 0.3);
    let p10 = calibrate_threshold(&[t.clone()], ThresholdRule::Percentile(10.0)).unwrap();
    let p90 = calibrate_threshold(&[t.clone()], ThresholdRule::Percentile(90.0)).unwrap();
    assert!(p10 <= p90);
    assert!(calibrate_threshold(&[t], ThresholdRule::Percentile(120.0)).is_err());
}

#[test]
fn segment_rejects_bad_parameters() {
    let t = trace(vec![0.0; 100], 10.0);
    assert!(segment(&t, 0.0, 0.1).is_err());
    assert!(segment(&t, 1.0, 1.0).is_err());
    assert!(segment(&t, 0.01, 0.0).is_err());
    assert!(moving_average(&t, 4).is_err());
}
