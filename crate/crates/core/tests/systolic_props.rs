use heterosim_core::systolic::{analytic_cycles, event_sim, shape_sweep, utilization, default_candidates};
use heterosim_core::workload::{KernelClass, KernelId, KernelInstance};
use heterosim_core::{MMJob, Phase, SystolicConfig, TransformerConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Walks every fold one at a time: skew in, K beats of accumulation, row-serial drain.
fn fold_oracle(m: u64, k: u64, n: u64, rows: u64, cols: u64) -> u64 {
    let mut total = 0;
    let mut i = 0;
    while i < m {
        let r = rows.min(m - i);
        let mut j = 0;
        while j < n {
            let c = cols.min(n - j);
            let last_operand_arrives = (r - 1) + (c - 1) + k;
            total += last_operand_arrives + r;
            j += cols;
        }
        i += rows;
    }
    total
}

fn naive(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    Array2::from_shape_fn((m, n), |(i, j)| (0..k).map(|t| a[[i, t]] * b[[t, j]]).sum())
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| f64::from(rng.random_range(-8i32..=8)))
}

#[test]
fn small_shapes_match_oracle() {
    for m in 1..=6 {
        for k in 1..=6 {
            for n in 1..=6 {
                for rows in 1..=4 {
                    for cols in 1..=4 {
                        let cfg = SystolicConfig::with_shape(rows, cols);
                        let job = MMJob::new(m, k, n);
                        assert_eq!(analytic_cycles(&job, &cfg).unwrap(), fold_oracle(m, k, n, rows, cols), "{job} on {rows}x{cols}");
                    }
                }
            }
        }
    }
}

#[test]
fn event_products_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (m, k, n) = (rng.random_range(1..=9), rng.random_range(1..=9), rng.random_range(1..=9));
        let (rows, cols) = (rng.random_range(1..=5u64), rng.random_range(1..=5u64));
        let a = random(&mut rng, m, k);
        let b = random(&mut rng, k, n);
        let cfg = SystolicConfig::with_shape(rows, cols);
        let res = event_sim(&MMJob::new(m as u64, k as u64, n as u64), &cfg, &a, &b).unwrap();
        assert_eq!(res.product, naive(&a, &b));
        assert_eq!(res.macs, (m * k * n) as u64);
        assert_eq!(res.cycles, res.compute_cycles + res.drain_cycles);
    }
}

#[test]
fn mismatched_operands_rejected() {
    let cfg = SystolicConfig::with_shape(2, 2);
    let a = Array2::zeros((2, 3));
    let b = Array2::zeros((2, 2));
    assert!(event_sim(&MMJob::new(2, 3, 2), &cfg, &a, &b).is_err());
}

proptest! {
    #[test]
    fn utilization_in_unit_interval(m in 1u64..300, k in 1u64..300, n in 1u64..300, rows in 1u64..64, cols in 1u64..64) {
        let u = utilization(&MMJob::new(m, k, n), &SystolicConfig::with_shape(rows, cols)).unwrap();
        prop_assert!(u > 0.0 && u <= 1.0);
    }

    #[test]
    fn cycles_grow_with_every_dimension(m in 1u64..200, k in 1u64..200, n in 1u64..200, rows in 1u64..32, cols in 1u64..32) {
        let cfg = SystolicConfig::with_shape(rows, cols);
        let c = analytic_cycles(&MMJob::new(m, k, n), &cfg).unwrap();
        prop_assert!(analytic_cycles(&MMJob::new(m + 1, k, n), &cfg).unwrap() >= c);
        prop_assert!(analytic_cycles(&MMJob::new(m, k + 1, n), &cfg).unwrap() > c);
        prop_assert!(analytic_cycles(&MMJob::new(m, k, n + 1), &cfg).unwrap() >= c);
    }

    #[test]
    fn analytic_matches_oracle(m in 1u64..2000, k in 1u64..2000, n in 1u64..2000, rows in 1u64..256, cols in 1u64..256) {
        let cfg = SystolicConfig::with_shape(rows, cols);
        prop_assert_eq!(analytic_cycles(&MMJob::new(m, k, n), &cfg).unwrap(), fold_oracle(m, k, n, rows, cols));
    }
}

#[test]
fn unit_sweep_is_all_feasible_and_ranked_by_utilization() {
    let mut cfg = TransformerConfig::new(2, 1, 1, 1, 1, 0, Phase::Inference);
    cfg.d_model = 1;
    let k = KernelInstance {
        id: KernelId::Mha2,
        layer_index: 0,
        operand_dims: (1, 1, 1),
        multiplicity: 1,
        macs: 1,
        class: KernelClass::DynamicMM,
        trainable_param_count: 0,
        lora_target: None,
    };
    let ranked = shape_sweep(&[k], &cfg, &default_candidates(&SystolicConfig::default()), 1.0).unwrap();
    assert!(ranked.iter().all(|e| e.feasible));
    for w in ranked.windows(2) {
        assert!(w[0].mean_utilization >= w[1].mean_utilization);
    }
}
