//! Finite-difference checks of every differentiable operation.

use nic_autodiff::{
    finite_difference_check, BatchNormConfig, DropoutGranularity, GradCheck, Mode, Padding,
    Result, RunningStats, Tape, Tensor, Var,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn random(shape: &[usize], rng: &mut Xoshiro256PlusPlus) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero so leaky-ReLU kinks are not straddled.
fn away_from_zero(shape: &[usize], rng: &mut Xoshiro256PlusPlus) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random::<bool>() { m } else { -m }
    })
}

fn check(f: impl Fn(&mut Tape, &[Var]) -> Result<Var>, params: &[Tensor]) {
    let report = finite_difference_check(f, params, GradCheck::default()).unwrap();
    assert!(report.passed(), "{report:?}");
}

fn half_sum_squares(tape: &mut Tape, y: Var) -> Var {
    let s = tape.sum_squares(y);
    tape.scale(s, 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conv2d(h in 1usize..=8, w in 1usize..=8, cin in 1usize..=4, cout in 1usize..=4,
              stride in 1usize..=2, same in any::<bool>(), seed in any::<u64>()) {
        let padding = if same { Padding::Same } else { Padding::Valid };
        prop_assume!(same || (h >= 3 && w >= 3));
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [random(&[2, h, w, cin], &mut rng), random(&[3, 3, cin, cout], &mut rng), random(&[cout], &mut rng)];
        check(|t, v| {
            let y = t.conv2d(v[0], v[1], v[2], stride, padding)?;
            Ok(half_sum_squares(t, y))
        }, &params);
    }

    #[test]
    fn depthwise_separable(h in 1usize..=8, w in 1usize..=8, cin in 1usize..=4, cout in 1usize..=4,
                           stride in 1usize..=2, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [
            random(&[2, h, w, cin], &mut rng),
            random(&[3, 3, cin], &mut rng),
            random(&[1, 1, cin, cout], &mut rng),
            random(&[cout], &mut rng),
        ];
        check(|t, v| {
            let y = t.depthwise_separable_conv2d(v[0], v[1], v[2], v[3], stride, Padding::Same)?;
            Ok(half_sum_squares(t, y))
        }, &params);
    }

    #[test]
    fn batch_norm_train(n in 2usize..=4, hw in 1usize..=4, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [random(&[n, hw, hw, c], &mut rng), random(&[c], &mut rng), random(&[c], &mut rng)];
        let proj = random(&[n, hw, hw, c], &mut rng);
        check(|t, v| {
            let mut rs = RunningStats::new(c);
            let y = t.batch_norm(v[0], v[1], v[2], &mut rs, BatchNormConfig::default(), Mode::Train)?;
            // weighted sum so the loss is not invariant to the normalization
            let p = t.constant(proj.clone());
            let z = t.add(y, p)?;
            Ok(half_sum_squares(t, z))
        }, &params);
    }

    #[test]
    fn batch_norm_infer(n in 1usize..=4, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [random(&[n, c], &mut rng), random(&[c], &mut rng), random(&[c], &mut rng)];
        let stats = RunningStats {
            mean: (0..c).map(|_| rng.random_range(-1.0..1.0)).collect(),
            var: (0..c).map(|_| rng.random_range(0.5..2.0)).collect(),
        };
        check(|t, v| {
            let mut rs = stats.clone();
            let y = t.batch_norm(v[0], v[1], v[2], &mut rs, BatchNormConfig::default(), Mode::Infer)?;
            Ok(half_sum_squares(t, y))
        }, &params);
    }

    #[test]
    fn leaky_relu(len in 1usize..=32, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [away_from_zero(&[len], &mut rng)];
        check(|t, v| {
            let y = t.leaky_relu(v[0], 0.2);
            Ok(half_sum_squares(t, y))
        }, &params);
    }

    #[test]
    fn dense_softmax_cross_entropy(n in 1usize..=5, din in 1usize..=6, k in 2usize..=9, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let params = [random(&[n, din], &mut rng), random(&[din, k], &mut rng), random(&[k], &mut rng)];
        check(|t, v| {
            let z = t.dense(v[0], v[1], v[2])?;
            let p = t.softmax(z)?;
            t.cross_entropy(p, &labels)
        }, &params);
    }

    #[test]
    fn mse(n in 1usize..=10, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = [random(&[n], &mut rng)];
        check(|t, v| t.mse(v[0], &target), &params);
    }

    #[test]
    fn dropout_with_fixed_mask(n in 1usize..=3, hw in 1usize..=4, c in 1usize..=4, channel in any::<bool>(), seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [random(&[n, hw, hw, c], &mut rng)];
        let granularity = if channel { DropoutGranularity::Channel } else { DropoutGranularity::Element };
        check(|t, v| {
            let mut mask_rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x5eed);
            let y = t.dropout(v[0], 0.2, Mode::Train, granularity, &mut mask_rng)?;
            Ok(half_sum_squares(t, y))
        }, &params);
    }

    #[test]
    fn pooling_slicing_reshape(n in 2usize..=4, hw in 1usize..=4, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = [random(&[n, hw, hw, c], &mut rng)];
        check(|t, v| {
            let pooled = t.mean_pool_spatial(v[0])?;
            let rows = t.slice_rows(pooled, 1, n - 1)?;
            let flat = t.reshape(rows, &[(n - 1) * c])?;
            let a = half_sum_squares(t, flat);
            let m = t.mean(v[0]);
            let m2 = t.sum_squares(m);
            t.add(a, m2)
        }, &params);
    }

    #[test]
    fn softmax_rows_sum_to_one_and_are_shift_invariant(
        rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 4), 1..5),
        shift in -100.0f64..100.0,
    ) {
        let n = rows.len();
        let flat: Vec<f64> = rows.concat();
        let shifted: Vec<f64> = flat.iter().map(|v| v + shift).collect();
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![n, 4], flat).unwrap());
        let b = tape.constant(Tensor::new(vec![n, 4], shifted).unwrap());
        let sa = tape.softmax(a).unwrap();
        let sb = tape.softmax(b).unwrap();
        for row in tape.value(sa).data().chunks(4) {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(tape.value(sa).max_abs_diff(tape.value(sb)) <= 1e-12);
    }

    #[test]
    fn delta_kernel_identity(h in 1usize..=8, w in 1usize..=8, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let x = random(&[1, h, w, c], &mut rng);
        let k = Tensor::from_fn(&[3, 3, c, c], |i| {
            let (tap, ci, co) = (i / (c * c), (i / c) % c, i % c);
            if tap == 4 && ci == co { 1.0 } else { 0.0 }
        });
        let mut tape = Tape::new();
        let (xv, kv, bv) = (tape.constant(x.clone()), tape.constant(k), tape.constant(Tensor::zeros(&[c])));
        let y = tape.conv2d(xv, kv, bv, 1, Padding::Same).unwrap();
        prop_assert_eq!(tape.value(y), &x);
    }

    #[test]
    fn infer_dropout_is_bit_identical(len in 1usize..64, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let x = random(&[len], &mut rng);
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let y = tape.dropout(v, 0.3, Mode::Infer, DropoutGranularity::Element, &mut rng).unwrap();
        prop_assert_eq!(tape.value(y).data().iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
                        x.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn linear_function_is_exact() {
    let params = [Tensor::vector(vec![0.3, -1.2, 2.5])];
    let report = finite_difference_check(
        |t, v| {
            let s = t.sum(v[0]);
            Ok(t.scale(s, 3.0))
        },
        &params,
        GradCheck::default(),
    )
    .unwrap();
    assert!(report.max_abs_error <= 1e-10, "{report:?}");
}

#[test]
fn corrupted_gradient_rule_is_detected() {
    let params = [Tensor::vector(vec![0.3, -1.2, 2.5])];
    let report = finite_difference_check(
        |t, v| {
            // y = x^3 elementwise, but the recorded rule claims dy/dx = 2x^2
            let x = t.value(v[0]).clone();
            let y = Tensor::from_fn(x.shape(), |i| x.data()[i].powi(3));
            let cube = t.custom(
                &[v[0]],
                y,
                Box::new(|g, inputs, _| {
                    vec![inputs[0].data().iter().zip(g).map(|(x, g)| 2.0 * x * x * g).collect()]
                }),
            );
            Ok(t.sum(cube))
        },
        &params,
        GradCheck::default(),
    )
    .unwrap();
    assert!(!report.passed(), "{report:?}");
    assert!(report.max_rel_error > 0.1);
}

#[test]
fn backward_is_deterministic() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    let x = random(&[2, 6, 6, 3], &mut rng);
    let k = random(&[3, 3, 3, 4], &mut rng);
    let run = || {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let kv = tape.leaf(k.clone());
        let b = tape.constant(Tensor::zeros(&[4]));
        let y = tape.conv2d(xv, kv, b, 2, Padding::Same).unwrap();
        let mut rs = RunningStats::new(4);
        let g = tape.constant(Tensor::full(&[4], 1.0));
        let be = tape.constant(Tensor::zeros(&[4]));
        let z = tape.batch_norm(y, g, be, &mut rs, BatchNormConfig::default(), Mode::Train).unwrap();
        let l = tape.sum_squares(z);
        tape.backward(l).unwrap();
        (tape.grad(xv).unwrap(), tape.grad(kv).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.1.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.1.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
