//! Observation assembly against a hand-unrolled frame loop.

mod common;

use common::*;
use masslam::perception::{observation, FeatureHistory, NormalizationScales, ObservationVector, OrbFeatureVector};

#[test]
fn matches_the_unrolled_loop_for_every_small_shape() {
    for n in 1..=5 {
        for m in 1..=5 {
            for t in 1..=5 {
                let x = observation(&tagged_history(m, t), t, n).unwrap();
                assert_eq!(x.len(), n * m * (m + 3));
                assert_eq!(x.len(), ObservationVector::width(n, m));

                let (expected, padded) = unrolled_observation(n, m, t);
                assert_eq!(x.as_slice(), expected.as_slice(), "n={n} m={m} t={t}");
                assert_eq!(padded, n.saturating_sub(t) * m);
                assert!(x.as_slice().iter().all(|v| v.is_finite()));
            }
        }
    }
}

#[test]
fn first_tick_repeats_frame_one() {
    let m = 3;
    let x = observation(&tagged_history(m, 1), 1, 4).unwrap();
    let block = m * (m + 3);
    for k in 1..4 {
        assert_eq!(&x.as_slice()[k * block..(k + 1) * block], &x.as_slice()[..block]);
    }
}

#[test]
fn single_frame_is_the_current_tick() {
    let m = 4;
    let h = tagged_history(m, 5);
    let x = observation(&h, 5, 1).unwrap();
    let current: Vec<f64> = (1..=m).flat_map(|j| h.normalized(5, j).unwrap().to_vec()).collect();
    assert_eq!(x.as_slice(), current.as_slice());
}

#[test]
fn bad_ticks_are_rejected() {
    let h = tagged_history(2, 3);
    assert!(observation(&h, 0, 2).is_err());
    assert!(observation(&h, 4, 2).is_err());
}

#[test]
fn unreachable_sentinel_and_huge_counts_stay_finite_and_clipped() {
    let f = OrbFeatureVector {
        map_points: u32::MAX,
        kf_new: 0,
        kf_culled: 0,
        loop_interval: 0,
        distances: vec![2.0 * DIAGONAL, f64::INFINITY],
    };
    let v = f.normalized(&NormalizationScales::for_diagonal(DIAGONAL));
    assert_eq!(v, vec![2.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
}

#[test]
fn mismatched_frames_are_rejected() {
    let mut h = FeatureHistory::new(3, NormalizationScales::default());
    assert!(h.push(vec![tagged(1, 1, 3)]).is_err());
    assert!(h.push((1..=3).map(|j| tagged(1, j, 2)).collect()).is_err());
}
