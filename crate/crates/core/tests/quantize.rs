use noisebound_core::quantize::{measure_min_bits, quantize_image, step};
use noisebound_core::LinearModel;
use proptest::prelude::*;

proptest! {
    #[test]
    fn quantization_is_idempotent(x in prop::collection::vec(0.0f64..=255.0, 1..64), bits in 1u32..=8) {
        let once = quantize_image(&x, bits, false, 0).unwrap();
        let twice = quantize_image(&once.values, bits, false, 0).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(!once.clamped);
    }

    #[test]
    fn error_is_at_most_half_a_step(x in prop::collection::vec(0.0f64..=255.0, 1..64), bits in 1u32..=8) {
        let q = quantize_image(&x, bits, false, 0).unwrap();
        let half = step(bits) / 2.0;
        for (a, b) in x.iter().zip(&q.values) {
            prop_assert!((a - b).abs() <= half);
        }
    }

    #[test]
    fn dithered_output_lies_on_levels(x in prop::collection::vec(0.0f64..=255.0, 1..64), bits in 1u32..=8, seed in any::<u64>()) {
        let q = quantize_image(&x, bits, true, seed).unwrap();
        let grid = quantize_image(&q.values, bits, false, 0).unwrap();
        prop_assert_eq!(&q.values, &grid.values);
        for (a, b) in x.iter().zip(&q.values) {
            prop_assert!((a - b).abs() <= step(bits));
        }
    }
}

#[test]
fn grid_points_are_fixed_at_their_depth() {
    let levels: Vec<f64> = (0..16).map(|k| k as f64 * 17.0).collect();
    assert_eq!(quantize_image(&levels, 4, false, 0).unwrap().values, levels);
    let m = LinearModel::new(vec![1.0; 16], -1000.0).unwrap();
    assert!(measure_min_bits(&m, &levels, false, 0).unwrap() <= 4);
}
