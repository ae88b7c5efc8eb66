use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{check_gradients, project_to_scalar, FD_STEP, FD_TOLERANCE};
use super::*;

fn t(data: &[f64], shape: &[usize]) -> Tensor {
    Tensor::from_vec(data.to_vec(), shape).unwrap()
}

#[test]
fn matmul_examples() {
    let id = t(&[1., 0., 0., 1.], &[2, 2]);
    let b = t(&[3., 4., 5., 6.], &[2, 2]);
    assert_eq!(id.matmul(&b).unwrap().data(), &[3., 4., 5., 6.]);

    let row = t(&[1., 2.], &[1, 2]);
    let col = t(&[3., 4.], &[2, 1]);
    assert_eq!(row.matmul(&col).unwrap().data(), &[11.]);

    let a = t(&[1., -2., 3., 0.5, 7., 8.], &[3, 2]);
    let z = Tensor::zeros(&[2, 4]);
    assert!(a.matmul(&z).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let a = Tensor::zeros(&[2, 3]);
    let b = Tensor::zeros(&[2, 3]);
    let msg = a.matmul(&b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
}

#[test]
fn softmax_examples() {
    let x = t(&[0., 0., 0.], &[1, 3]);
    for v in x.softmax_rows().unwrap().data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let single = t(&[42.0], &[1, 1]);
    assert_eq!(single.softmax_rows().unwrap().data(), &[1.0]);

    let y = t(&[1., 2.], &[1, 2]).softmax_rows().unwrap();
    // 1/(1+e) and e/(1+e)
    let e = std::f64::consts::E;
    assert!((y.data()[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
    assert!((y.data()[0] - 0.26894).abs() < 1e-5);
    assert!((y.data()[1] - 0.73106).abs() < 1e-5);
}

#[test]
fn layer_norm_examples() {
    let y = t(&[5., 5., 5.], &[1, 3]).layer_norm(1e-8).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));

    let a = 3.5;
    let y = t(&[-a, a], &[1, 2]).layer_norm(1e-8).unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-8 && (y.data()[1] - 1.0).abs() < 1e-8);

    // mean 2, population std sqrt(2/3)
    let y = t(&[1., 2., 3.], &[1, 3]).layer_norm(1e-8).unwrap();
    let s = (2.0f64 / 3.0).sqrt();
    for (got, want) in y.data().iter().zip([-1.0 / s, 0.0, 1.0 / s]) {
        assert!((got - want).abs() < 1e-3);
    }
    assert!((y.data()[0] + 1.2247).abs() < 1e-3);
}

#[test]
fn backward_examples() {
    let x = Tensor::param(vec![0.3, -1.0, 2.0], &[3]).unwrap();
    x.sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);

    let x = Tensor::param(vec![3.0], &[1]).unwrap();
    x.mul(&x).unwrap().sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![6.0]);

    // a second call accumulates, zero_grad clears
    x.mul(&x).unwrap().sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![12.0]);
    x.zero_grad();
    assert!(x.grad().is_none());
}

#[test]
fn backward_rejects_non_scalar() {
    let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let err = x.mul_scalar(2.0).backward().unwrap_err();
    assert!(matches!(err, crate::Error::Contract(_)));
}

#[test]
fn shared_subexpression_accumulates() {
    // f = x*y + x, df/dx = y + 1
    let x = Tensor::param(vec![2.0], &[1]).unwrap();
    let y = Tensor::param(vec![5.0], &[1]).unwrap();
    let f = x.mul(&y).unwrap().add(&x).unwrap().sum_all();
    let g = grad(&f, &[&x, &y], false).unwrap();
    assert_eq!(g[0].data(), &[6.0]);
    assert_eq!(g[1].data(), &[2.0]);
}

#[test]
fn second_order_gradient() {
    // f = x³ → f'' = 6x
    let x = Tensor::param(vec![1.5], &[1]).unwrap();
    let f = x.mul(&x).unwrap().mul(&x).unwrap().sum_all();
    let g = grad(&f, &[&x], true).unwrap().remove(0);
    let gg = grad(&g.sum_all(), &[&x], false).unwrap().remove(0);
    assert!((gg.data()[0] - 9.0).abs() < 1e-12);
}

#[test]
fn no_grad_blocks_recording() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    let y = {
        let _g = no_grad();
        x.mul_scalar(3.0)
    };
    assert!(!y.requires_grad());
    assert!(x.mul_scalar(3.0).requires_grad());
}

#[test]
fn tape_visits_each_op_once() {
    let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let y = x.exp();
    let z = y.mul(&y).unwrap().add(&y).unwrap().sum_all();
    let tape = GradTape::record(&z);
    let names = tape.op_names();
    assert_eq!(names.iter().filter(|n| **n == "exp").count(), 1);
    assert_eq!(names.len(), 5); // exp, mul, add, reshape, sum_to
}

#[test]
fn broadcasting_rules() {
    let a = t(&[1., 2., 3., 4., 5., 6.], &[2, 3]);
    let row = t(&[10., 20., 30.], &[3]);
    let col = t(&[100., 200.], &[2, 1]);
    assert_eq!(a.add(&row).unwrap().data(), &[11., 22., 33., 14., 25., 36.]);
    assert_eq!(a.add(&col).unwrap().data(), &[101., 102., 103., 204., 205., 206.]);
    assert!(a.add(&t(&[1., 2.], &[2])).is_err());
    assert_eq!(a.sum_to(&[3]).unwrap().data(), &[5., 7., 9.]);
    assert_eq!(a.sum_to(&[2, 1]).unwrap().data(), &[6., 15.]);
}

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::randn(rng, shape, 1.0)
}

fn assert_gradcheck(name: &str, f: impl Fn(&[Tensor]) -> crate::Result<Tensor>, inputs: &[Tensor]) {
    let r = check_gradients(|x| project_to_scalar(&f(x)?, 99), inputs, FD_STEP, FD_TOLERANCE).unwrap();
    assert!(r.passed(), "{name}: rel err {:.3e} at {:?}", r.max_rel_error, r.worst);
}

#[test]
fn gradcheck_elementwise_and_reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = rand_t(&mut rng, &[3, 4]);
    let b = rand_t(&mut rng, &[3, 4]);
    let row = rand_t(&mut rng, &[4]);
    let col = rand_t(&mut rng, &[3, 1]);
    let pos = Tensor::from_vec(a.data().iter().map(|v| v.abs() + 0.5).collect(), &[3, 4]).unwrap();
    assert_gradcheck("add", |x| x[0].add(&x[1]), &[a.clone(), row.clone()]);
    assert_gradcheck("sub", |x| x[0].sub(&x[1]), &[a.clone(), col.clone()]);
    assert_gradcheck("mul", |x| x[0].mul(&x[1]), &[a.clone(), b.clone()]);
    assert_gradcheck("div", |x| x[0].div(&x[1]), &[b.clone(), pos.clone()]);
    assert_gradcheck("exp", |x| Ok(x[0].exp()), std::slice::from_ref(&a));
    assert_gradcheck("ln", |x| Ok(x[0].ln()), std::slice::from_ref(&pos));
    assert_gradcheck("sqrt", |x| Ok(x[0].sqrt()), std::slice::from_ref(&pos));
    assert_gradcheck("sigmoid", |x| Ok(x[0].sigmoid()), std::slice::from_ref(&a));
    assert_gradcheck("softplus", |x| Ok(x[0].softplus()), std::slice::from_ref(&a));
    assert_gradcheck("leaky_relu", |x| Ok(x[0].leaky_relu(0.2)), std::slice::from_ref(&a));
    assert_gradcheck("scalars", |x| Ok(x[0].mul_scalar(-1.7).add_scalar(0.3)), std::slice::from_ref(&a));
    assert_gradcheck("sum_axis", |x| x[0].sum_axis(1, false), std::slice::from_ref(&a));
    assert_gradcheck("mean_axis", |x| x[0].mean_axis(0, true), std::slice::from_ref(&a));
    assert_gradcheck("var_axis", |x| x[0].var_axis(1, true), std::slice::from_ref(&a));
    assert_gradcheck("broadcast_to", |x| x[0].broadcast_to(&[2, 3, 4]), std::slice::from_ref(&row));
    assert_gradcheck("narrow", |x| x[0].narrow(1, 1, 2), std::slice::from_ref(&a));
    assert_gradcheck("pad_axis", |x| x[0].pad_axis(0, 1, 5), std::slice::from_ref(&a));
    assert_gradcheck("concat", |x| Tensor::concat(&[x[0].clone(), x[1].clone()], 1), &[a.clone(), col.clone()]);
    assert_gradcheck("reshape_permute", |x| x[0].reshape(&[2, 3, 2])?.permute(&[2, 0, 1]), std::slice::from_ref(&a));
}

#[test]
fn gradcheck_matrix_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = rand_t(&mut rng, &[3, 4]);
    let b = rand_t(&mut rng, &[4, 5]);
    let bt = rand_t(&mut rng, &[5, 4]);
    let at = rand_t(&mut rng, &[4, 3]);
    use MatTranspose::{No, Yes};
    assert_gradcheck("mm nn", |x| x[0].mm(&x[1], No, No), &[a.clone(), b.clone()]);
    assert_gradcheck("mm nt", |x| x[0].mm(&x[1], No, Yes), &[a.clone(), bt.clone()]);
    assert_gradcheck("mm tn", |x| x[0].mm(&x[1], Yes, No), &[at.clone(), b.clone()]);
    assert_gradcheck("mm tt", |x| x[0].mm(&x[1], Yes, Yes), &[at.clone(), bt.clone()]);
    let p = rand_t(&mut rng, &[2, 3, 4]);
    let q = rand_t(&mut rng, &[2, 4, 2]);
    assert_gradcheck("bmm", |x| x[0].mm(&x[1], No, No), &[p, q]);
    assert_gradcheck("softmax", |x| x[0].softmax_rows(), std::slice::from_ref(&a));
    assert_gradcheck("layer_norm", |x| x[0].layer_norm(1e-8), std::slice::from_ref(&a));
    assert_gradcheck("pixel_norm", |x| x[0].pixel_norm(1e-8), std::slice::from_ref(&a));
    let bias = rand_t(&mut rng, &[5]);
    assert_gradcheck("linear", |x| x[0].linear(&x[1], Some(&x[2])), &[a, bt, bias]);
}

#[test]
fn gradcheck_spatial_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = rand_t(&mut rng, &[2, 2, 3, 2]);
    let big = rand_t(&mut rng, &[2, 4, 6, 2]);
    assert_gradcheck("upsample_nearest2x", |x| x[0].upsample_nearest2x(), std::slice::from_ref(&g));
    assert_gradcheck("upsample_bilinear2x", |x| x[0].upsample_bilinear2x(), std::slice::from_ref(&g));
    assert_gradcheck("bilinear2x_adjoint", |x| x[0].bilinear2x_adjoint(), std::slice::from_ref(&big));
    assert_gradcheck("avg_pool2x", |x| x[0].avg_pool2x(), std::slice::from_ref(&big));
    assert_gradcheck("im2col3x3", |x| x[0].im2col3x3(), std::slice::from_ref(&g));
    let cols = rand_t(&mut rng, &[12, 18]);
    assert_gradcheck("col2im3x3", |x| x[0].col2im3x3(2, 2, 3, 2), &[cols]);
}

#[test]
fn gradcheck_second_order_through_conv() {
    // d/dw of ‖∇ₓ f(x; w)‖² with f a conv + leaky-relu + pooling stack
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_t(&mut rng, &[1, 4, 4, 2]);
    let w = rand_t(&mut rng, &[18, 3]);
    let r = check_gradients(
        |p| {
            let xin = x.detach().requires_grad_(true);
            let h = xin.im2col3x3()?.matmul(&p[0])?.leaky_relu(0.2).reshape(&[1, 4, 4, 3])?;
            let h = h.avg_pool2x()?.softplus();
            let score = h.sum_all();
            let gx = grad(&score, &[&xin], true)?.remove(0);
            Ok(gx.square()?.sum_all())
        },
        &[w],
        FD_STEP,
        FD_TOLERANCE,
    )
    .unwrap();
    assert!(r.passed(), "rel err {:.3e}", r.max_rel_error);
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant(
        rows in 1usize..6, cols in 1usize..8, seed in any::<u64>(), shift in -50.0f64..50.0
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::randn(&mut rng, &[rows, cols], 3.0);
        let y = x.softmax_rows().unwrap();
        for r in y.data().chunks(cols) {
            prop_assert!(r.iter().all(|&v| v >= 0.0));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let shifted = x.add_scalar(shift).softmax_rows().unwrap();
        prop_assert!(shifted.max_abs_diff(&y) < 1e-9);
    }

    #[test]
    fn layer_norm_ignores_row_shift(
        rows in 1usize..6, cols in 2usize..8, seed in any::<u64>(), shift in -20.0f64..20.0
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::randn(&mut rng, &[rows, cols], 2.0);
        let y = x.layer_norm(1e-8).unwrap();
        let ys = x.add_scalar(shift).layer_norm(1e-8).unwrap();
        prop_assert!(ys.max_abs_diff(&y) < 1e-9);
        for (r, xr) in y.data().chunks(cols).zip(x.data().chunks(cols)) {
            let mean = r.iter().sum::<f64>() / cols as f64;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64;
            prop_assert!(mean.abs() < 1e-6);
            let xm = xr.iter().sum::<f64>() / cols as f64;
            let xvar = xr.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / cols as f64;
            if xvar > 1e-2 {
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn reshape_and_transpose_round_trip(
        a in 1usize..8, b in 1usize..8, c in 1usize..8, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::randn(&mut rng, &[a, b, c], 1.0);
        let back = x.reshape(&[a * b, c]).unwrap().reshape(&[a, b, c]).unwrap();
        prop_assert!(back.bit_eq(&x));
        let tt = x.transpose().unwrap().transpose().unwrap();
        prop_assert!(tt.bit_eq(&x));
        let p = x.permute(&[2, 0, 1]).unwrap().permute(&[1, 2, 0]).unwrap();
        prop_assert!(p.bit_eq(&x));
    }

    #[test]
    fn random_composite_matches_finite_differences(
        r in 1usize..5, k in 3usize..7, c in 1usize..5, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::randn(&mut rng, &[r, k], 1.0);
        let w = Tensor::randn(&mut rng, &[k, c], 1.0);
        let rep = check_gradients(
            |x| {
                let h = x[0].layer_norm(1e-8)?.matmul(&x[1])?.softmax_rows()?;
                project_to_scalar(&h.mul(&h)?, 5)
            },
            &[a, w],
            FD_STEP,
            FD_TOLERANCE,
        ).unwrap();
        prop_assert!(rep.passed(), "rel err {}", rep.max_rel_error);
    }
}
