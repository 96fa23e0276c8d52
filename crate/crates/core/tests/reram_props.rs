use heterosim_core::reram::{
    crossbars_for_matrix, dequant_op_counts, dequantize_mvm, layer_crossbars, quantize_block, reram_energy, rewrite_count,
    MappingPolicy,
};
use heterosim_core::workload::preset;
use heterosim_core::{PrecisionPlan, ReramTileConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let spread = 10f64.powi(rng.random_range(-3..=3));
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0) * spread)
}

#[test]
fn round_trip_within_half_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (rows, cols) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let w = block(&mut rng, rows, cols);
        let bits = [4, 8, 16][rng.random_range(0..3)];
        let q = quantize_block(&w, bits).unwrap();
        let back = q.dequantize();
        let qmax = f64::from((1i32 << (bits - 1)) - 1);
        for (orig, rec) in w.iter().zip(back.iter()) {
            assert!((orig - rec).abs() <= q.scale / 2.0 * (1.0 + 1e-12), "{orig} vs {rec}");
        }
        assert!(q.ints.iter().all(|&v| f64::from(v).abs() <= qmax));
    }
}

#[test]
fn post_mvm_scaling_matches_pre_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let (rows, cols) = (rng.random_range(1..=128), rng.random_range(1..=128));
        let w = block(&mut rng, rows, cols);
        let q = quantize_block(&w, [4, 8][rng.random_range(0..2)]).unwrap();
        let x = Array1::from_shape_fn(cols, |_| rng.random_range(-128i64..=127));
        let post = dequantize_mvm(&q.int_mvm(&x).unwrap(), q.scale);
        let pre = q.dequantize().dot(&x.mapv(|v| v as f64));
        for (a, b) in post.iter().zip(pre.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(q.scale), "{a} vs {b}");
        }
    }
}

#[test]
fn mvm_error_is_bounded_by_input_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (rows, cols) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let w = block(&mut rng, rows, cols);
        let q = quantize_block(&w, 8).unwrap();
        let x = Array1::from_shape_fn(cols, |_| rng.random_range(-16i64..=16));
        let xf = x.mapv(|v| v as f64);
        let exact = w.dot(&xf);
        let approx = dequantize_mvm(&q.int_mvm(&x).unwrap(), q.scale);
        let bound = q.scale / 2.0 * xf.iter().map(|v| v.abs()).sum::<f64>();
        for (e, a) in exact.iter().zip(approx.iter()) {
            assert!((e - a).abs() <= bound * (1.0 + 1e-9) + 1e-12);
        }
    }
}

#[test]
fn degenerate_blocks() {
    let zero = quantize_block(&Array2::zeros((3, 3)), 8).unwrap();
    assert!(zero.ints.iter().all(|&v| v == 0));
    assert!(quantize_block(&Array2::zeros((0, 3)), 8).is_err());
    let nan = Array2::from_elem((2, 2), f64::NAN);
    assert!(quantize_block(&nan, 8).is_err());
    let q = quantize_block(&Array2::ones((2, 3)), 8).unwrap();
    assert!(q.int_mvm(&Array1::zeros(2)).is_err());
}

proptest! {
    #[test]
    fn halving_bits_halves_crossbars(rows in 1u64..4096, cols_blocks in 1u64..32) {
        let cfg = ReramTileConfig::default();
        let cols = cols_blocks * cfg.xbar_cols;
        let x16 = crossbars_for_matrix(rows, cols, 16, &cfg).unwrap();
        let x8 = crossbars_for_matrix(rows, cols, 8, &cfg).unwrap();
        let x4 = crossbars_for_matrix(rows, cols, 4, &cfg).unwrap();
        prop_assert_eq!(x16, 2 * x8);
        prop_assert_eq!(x8, 2 * x4);
    }

    #[test]
    fn dequant_multiplies_energy_by_fixed_factor(tiles in 1u64..10_000, t in 1e-9f64..1.0) {
        let cfg = ReramTileConfig::default();
        let ratio = reram_energy(tiles, t, &cfg, true) / reram_energy(tiles, t, &cfg, false);
        prop_assert!((ratio - (1.0 + cfg.dequant_power_overhead)).abs() < 1e-12);
    }

    #[test]
    fn post_mvm_needs_fewer_scalings(rows in 2u64..512, cols in 1u64..512) {
        let (post, pre) = dequant_op_counts(rows, cols);
        prop_assert!(post < pre);
    }
}

#[test]
fn quantized_layers_need_fewer_crossbars() {
    let cfg = ReramTileConfig::default();
    let model = preset("bert-large").unwrap();
    let full = layer_crossbars(&model, &PrecisionPlan::uniform(16), &cfg).unwrap().total();
    let m8f4 = layer_crossbars(&model, &PrecisionPlan::new(8, 4), &cfg).unwrap().total();
    let m4f8 = layer_crossbars(&model, &PrecisionPlan::new(4, 8), &cfg).unwrap().total();
    assert!(m8f4 < m4f8 && m4f8 < full);
    assert_eq!(cfg.weights_per_crossbar(4), 8192);
}

#[test]
fn heterogeneous_mapping_never_rewrites() {
    for name in heterosim_core::workload::PRESET_NAMES {
        let m = preset(name).unwrap();
        assert_eq!(rewrite_count(&m, MappingPolicy::Heterogeneous), 0);
        assert!(rewrite_count(&m, MappingPolicy::AllOnReram) > 0);
    }
}
