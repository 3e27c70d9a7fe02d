//! Property tests for structural invariants across the pipeline.

use proptest::prelude::*;
use traffic_states::features::normalize_length;
use traffic_states::graph::{build_adjacency, density, render_image};
use traffic_states::harness::{split_indices, SplitSpec};
use traffic_states::ingest::{resample, TrackPoint, Trajectory};
use traffic_states::linalg::softmax;

fn arb_frame() -> impl Strategy<Value = Vec<(u64, f64, f64)>> {
    prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 0..25).prop_map(|pts| {
        pts.into_iter()
            .enumerate()
            .map(|(i, (x, y))| (i as u64, x, y))
            .collect()
    })
}

proptest! {
    #[test]
    fn adjacency_is_symmetric_with_zero_diagonal(frame in arb_frame(), mu in 0.1f64..20.0) {
        let adj = build_adjacency(&frame, mu).unwrap();
        let n = adj.ids.len();
        for i in 0..n {
            prop_assert_eq!(adj.w[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(adj.w[(i, j)], adj.w[(j, i)]);
                prop_assert!((0.0..=1.0).contains(&adj.w[(i, j)]));
            }
        }
        prop_assert!((0.0..=1.0).contains(&density(&adj)));
    }

    #[test]
    fn adjacency_is_permutation_invariant(frame in arb_frame(), rot in 0usize..5) {
        let mut shuffled = frame.clone();
        if !shuffled.is_empty() {
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
        }
        let a = build_adjacency(&frame, 10.0).unwrap();
        let b = build_adjacency(&shuffled, 10.0).unwrap();
        prop_assert_eq!(a.ids, b.ids);
        prop_assert_eq!(a.w, b.w);
    }

    #[test]
    fn rendered_image_stays_in_unit_range(frame in arb_frame()) {
        let adj = build_adjacency(&frame, 10.0).unwrap();
        let img = render_image(&adj, 110, 56).unwrap();
        prop_assert!(img.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn split_partitions_every_index(n in 0usize..600, seed in any::<u64>()) {
        let (tr, va, te) = split_indices(n, &SplitSpec::new(seed));
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn normalize_length_keeps_endpoints(len in 1usize..200) {
        let rows: Vec<Vec<f64>> = (0..len).map(|i| vec![i as f64]).collect();
        let out = normalize_length(&rows, 50).unwrap();
        prop_assert_eq!(out.rows(), 50);
        prop_assert_eq!(out[(0, 0)], 0.0);
        prop_assert_eq!(out[(49, 0)], (len - 1) as f64);
    }

    #[test]
    fn resample_on_its_own_grid_is_idempotent(n in 2usize..40, rate in 1.0f64..10.0) {
        let track = Trajectory {
            track_id: 0,
            points: (0..n)
                .map(|k| TrackPoint { t: k as f64 / rate, x: (k as f64).sin(), y: (k as f64).cos() })
                .collect(),
        };
        let once = resample(&track, rate).unwrap();
        let twice = resample(&once, rate).unwrap();
        prop_assert_eq!(once.points, twice.points);
    }

    #[test]
    fn softmax_is_shift_invariant_and_normalized(
        v in prop::collection::vec(-20.0f64..20.0, 1..10),
        shift in -5.0f64..5.0,
    ) {
        let a = softmax(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let b = softmax(&shifted);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
