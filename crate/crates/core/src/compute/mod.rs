//! Dense tensors, a reverse-mode tape, and Adam.

mod adam;
pub mod gradcheck;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use params::{GradBuffer, ParamId, ParamStore};
pub use tape::{Shape, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::gradcheck::{check_params, flat_grads};
    use super::*;
    use crate::error::Result;

    fn eval_and_grad(
        ps: &mut ParamStore,
        f: impl Fn(&mut Tape<'_>) -> Result<Var>,
    ) -> (f64, Vec<f64>) {
        let buf = {
            let mut tape = Tape::new(ps);
            let out = f(&mut tape).unwrap();
            (tape.scalar(out), tape.backward(out).unwrap())
        };
        ps.zero_grads();
        ps.accumulate(&buf.1).unwrap();
        (buf.0, flat_grads(ps))
    }

    fn fd_check(ps: &mut ParamStore, f: impl Fn(&mut Tape<'_>) -> Result<Var> + Copy) -> f64 {
        let (_, analytic) = eval_and_grad(ps, f);
        let report = check_params(ps, &analytic, 1e-5, 1e-4, |p| {
            let mut tape = Tape::new(p);
            let out = f(&mut tape)?;
            Ok(tape.scalar(out))
        })
        .unwrap();
        report.max_relative_error
    }

    fn random_store(rng: &mut ChaCha8Rng, shapes: &[(&str, Vec<usize>)]) -> ParamStore {
        let mut ps = ParamStore::new();
        for (name, shape) in shapes {
            ps.add_uniform(*name, shape.clone(), 1.0, rng);
        }
        ps
    }

    #[test]
    fn matmul_closed_form() {
        let mut ps = ParamStore::new();
        let a = ps.add("a", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = ps.add("b", Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let mut tape = Tape::new(&ps);
        let (va, vb) = (tape.param(a).unwrap(), tape.param(b).unwrap());
        let c = tape.matmul(va, vb).unwrap();
        assert_eq!(tape.shape(c), Shape::Matrix(2, 1));
        assert_eq!(tape.value(c), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = random_store(&mut rng, &[("a", vec![3, 4])]);
        let i = ps.add("i", Tensor::identity(4));
        let mut tape = Tape::new(&ps);
        let a = tape.param(ParamId(0)).unwrap();
        let vi = tape.param(i).unwrap();
        let c = tape.matmul(a, vi).unwrap();
        assert_eq!(tape.value(c), ps.get(ParamId(0)).values());
    }

    #[test]
    fn matmul_shape_mismatch_is_diagnosed() {
        let mut ps = ParamStore::new();
        let a = ps.add_zeros("a", vec![2, 3]);
        let b = ps.add_zeros("b", vec![2, 3]);
        let mut tape = Tape::new(&ps);
        let (va, vb) = (tape.param(a).unwrap(), tape.param(b).unwrap());
        let err = tape.matmul(va, vb).unwrap_err();
        assert!(err.to_string().contains("inner extents 3 != 2"), "{err}");
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = random_store(&mut rng, &[("a", vec![4, 3]), ("b", vec![3, 2])]);
        let err = fd_check(&mut ps, |t| {
            let a = t.param(ParamId(0))?;
            let b = t.param(ParamId(1))?;
            let c = t.matmul(a, b)?;
            Ok(t.sum(c))
        });
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn inner_product_examples() {
        let mut ps = ParamStore::new();
        let a = ps.add("a", Tensor::vector(vec![1.0, 0.0, 2.0]));
        let b = ps.add("b", Tensor::vector(vec![3.0, 1.0, 1.0]));
        let (value, grads) = eval_and_grad(&mut ps, |t| {
            let (a, b) = (t.param(a)?, t.param(b)?);
            t.dot(a, b)
        });
        assert_eq!(value, 5.0);
        // d/da = b, d/db = a
        assert_eq!(grads, vec![3.0, 1.0, 1.0, 1.0, 0.0, 2.0]);

        let mut tape = Tape::new(&ps);
        let va = tape.param(a).unwrap();
        let sq = tape.dot(va, va).unwrap();
        assert_eq!(tape.scalar(sq), 5.0);

        let short = tape.constant_vector(vec![1.0, 2.0]);
        assert!(tape.dot(va, short).is_err());
    }

    #[test]
    fn relu_examples_and_mask_gradient() {
        let mut ps = ParamStore::new();
        let x = ps.add("x", Tensor::vector(vec![-1.0, 0.5, 2.0]));
        let mut tape = Tape::new(&ps);
        let c = tape.constant_vector(vec![-1.0, 0.0, 2.0]);
        let r = tape.relu(c);
        assert_eq!(tape.value(r), &[0.0, 0.0, 2.0]);
        let neg = tape.constant_vector(vec![-3.0, -0.1]);
        let r = tape.relu(neg);
        assert_eq!(tape.value(r), &[0.0, 0.0]);
        drop(tape);

        let (_, g) = eval_and_grad(&mut ps, |t| {
            let v = t.param(x)?;
            let r = t.relu(v);
            Ok(t.sum(r))
        });
        assert_eq!(g, vec![0.0, 1.0, 1.0]);
        let err = fd_check(&mut ps, |t| {
            let v = t.param(x)?;
            let r = t.relu(v);
            Ok(t.sum(r))
        });
        assert!(err < 1e-6);
    }

    #[test]
    fn softmax_overflow_safe() {
        let ps = ParamStore::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant_vector(vec![1000.0, 1000.0]);
        let s = tape.softmax(x).unwrap();
        assert_eq!(tape.value(s), &[0.5, 0.5]);
        let empty = tape.constant_vector(vec![]);
        assert!(tape.softmax(empty).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ps = ParamStore::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant_vector(vec![1.0, -2.0, 3.0]);
        assert_eq!(tape.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(tape.dropout(x, 0.4, false, &mut rng).unwrap(), x);
        assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let input: Vec<f64> = (0..100_000).map(|i| 1.0 + (i % 7) as f64).collect();
        let ps = ParamStore::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant_vector(input.clone());
        let y = tape.dropout(x, 0.3, true, &mut rng).unwrap();
        let out = tape.value(y);
        let zeros = out.iter().filter(|v| **v == 0.0).count() as f64 / out.len() as f64;
        assert!((0.29..=0.31).contains(&zeros), "zero fraction {zeros}");
        let mean_in = input.iter().sum::<f64>() / input.len() as f64;
        let mean_out = out.iter().sum::<f64>() / out.len() as f64;
        assert!((mean_out / mean_in - 1.0).abs() < 0.02);
    }

    #[test]
    fn diamond_accumulates_gradients() {
        // y = (x*a) * (x+b); dy/dx = a*(x+b) + x*a
        let mut ps = ParamStore::new();
        let x = ps.add("x", Tensor::scalar(1.5));
        let (a, b) = (2.0, -0.25);
        let (_, g) = eval_and_grad(&mut ps, |t| {
            let vx = t.param(x)?;
            let left = t.scale(vx, a);
            let cb = t.constant_scalar(b);
            let right = t.add(vx, cb)?;
            t.mul(left, right)
        });
        let brute = {
            let f = |x: f64| (x * a) * (x + b);
            (f(1.5 + 1e-6) - f(1.5 - 1e-6)) / 2e-6
        };
        let exact = a * (1.5 + b) + 1.5 * a;
        assert!((g[0] - exact).abs() < 1e-12);
        assert!((g[0] - brute).abs() < 1e-6);
    }

    #[test]
    fn row_gather_scatters_into_its_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = random_store(&mut rng, &[("table", vec![4, 3])]);
        let (_, g) = eval_and_grad(&mut ps, |t| {
            let r1 = t.row(ParamId(0), 1)?;
            let r3 = t.row(ParamId(0), 3)?;
            let r1b = t.row(ParamId(0), 1)?;
            let s = t.add(r1, r3)?;
            t.dot(s, r1b)
        });
        assert!(g[0..3].iter().all(|v| *v == 0.0));
        assert!(g[6..9].iter().all(|v| *v == 0.0));
        let err = fd_check(&mut ps, |t| {
            let r1 = t.row(ParamId(0), 1)?;
            let r3 = t.row(ParamId(0), 3)?;
            let r1b = t.row(ParamId(0), 1)?;
            let s = t.add(r1, r3)?;
            t.dot(s, r1b)
        });
        assert!(err < 1e-6);
    }

    /// Composite of every differentiable op.
    fn composite(t: &mut Tape<'_>) -> Result<Var> {
        let w = t.param(ParamId(0))?;
        let x = t.param(ParamId(1))?;
        let y = t.param(ParamId(2))?;
        let h = t.matmul(w, x)?;
        let lr = t.leaky_relu(h, 0.01)?;
        let sm = t.softmax(lr)?;
        let terms: Vec<(usize, Var)> = (0..2).map(|k| (k, y)).collect();
        let ws = t.weighted_sum(sm, &terms, t.value(y).len())?;
        let r = t.relu(ws);
        let xr = t.matmul(lr, w)?;
        let cat = t.concat(&[r, xr])?;
        let e0 = t.element(cat, 0)?;
        let sg = t.sigmoid(cat);
        let sq = t.mul(sg, sg)?;
        let sc = t.scale(sq, 0.7);
        let s = t.sum(sc);
        let d = t.dot(cat, cat)?;
        let a = t.add(s, d)?;
        let a = t.sub(a, e0)?;
        let l1 = t.squared_error(a, 0.3);
        let l2 = t.log_loss(e0, true);
        let l3 = t.log_loss(d, false);
        let tot = t.add(l1, l2)?;
        t.add(tot, l3)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_op_matches_finite_differences(seed in 0u64..10_000, d in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ps = ParamStore::new();
            ps.add_uniform("w", vec![2, d], 0.5, &mut rng);
            ps.add_uniform("x", vec![d], 0.5, &mut rng);
            ps.add_uniform("y", vec![d], 0.5, &mut rng);
            let err = fd_check(&mut ps, composite);
            prop_assert!(err < 1e-4, "relative error {}", err);
        }

        #[test]
        fn softmax_is_a_distribution(xs in prop::collection::vec(-500.0f64..500.0, 1..20)) {
            let s = ops::softmax(&xs).unwrap();
            let total: f64 = s.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-6);
            prop_assert!(s.iter().all(|v| *v >= 0.0 && v.is_finite()));
            // strictly positive when the spread is representable
            let spread = xs.iter().cloned().fold(f64::MIN, f64::max)
                - xs.iter().cloned().fold(f64::MAX, f64::min);
            if spread < 700.0 {
                prop_assert!(s.iter().all(|v| *v > 0.0));
            }
        }

        #[test]
        fn forward_and_backward_stay_finite(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ps = ParamStore::new();
            let scale = 10f64.powi(rng.random_range(-2..3));
            ps.add_uniform("w", vec![2, 4], scale, &mut rng);
            ps.add_uniform("x", vec![4], scale, &mut rng);
            ps.add_uniform("y", vec![4], scale, &mut rng);
            let (v, g) = eval_and_grad(&mut ps, composite);
            prop_assert!(v.is_finite());
            prop_assert!(g.iter().all(|x| x.is_finite()));
        }
    }
}
