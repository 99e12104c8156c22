//! Finite-difference sweeps over every tape primitive.

use rand::Rng;

use crate::numerics::gradcheck::gradient_check;
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use crate::rng::{normal_vec, rng_from_seed, SeededRng};

const FD_STEP: f64 = 1e-3;
const FD_TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
    Tensor::new(shape.to_vec(), normal_vec(rng, shape.iter().product()))
}

/// Values kept away from the relu kink so finite differences stay valid.
fn rand_tensor_offset(rng: &mut SeededRng, shape: &[usize], min_abs: f64) -> Tensor {
    let mut t = rand_tensor(rng, shape);
    for v in t.data_mut() {
        if v.abs() < min_abs {
            *v = min_abs * if *v >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    t
}

fn check<F>(name: &str, build: F, inputs: &[Tensor])
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let report = gradient_check(build, inputs, FD_STEP);
    assert!(
        report.passes(FD_TOL),
        "{name}: rel err {} at input {} elem {} (analytic {}, numeric {})",
        report.max_rel_err,
        report.worst_input,
        report.worst_element,
        report.analytic,
        report.numeric
    );
}

#[test]
fn all_primitives_pass_finite_differences_over_100_seeds() {
    for seed in 0..100u64 {
        let mut rng = rng_from_seed(seed);
        let r = &mut rng;

        let a = rand_tensor(r, &[3, 4]);
        let b = rand_tensor(r, &[3, 4]);
        check(
            "add",
            |t, xs| {
                let s = t.add(xs[0], xs[1]);
                t.sum_all(s)
            },
            &[a.clone(), b.clone()],
        );
        check(
            "sub+mul+neg",
            |t, xs| {
                let d = t.sub(xs[0], xs[1]);
                let m = t.mul(d, xs[0]);
                let n = t.neg(m);
                t.sum_all(n)
            },
            &[a.clone(), b.clone()],
        );
        check(
            "scale+mean",
            |t, xs| {
                let s = t.scale(xs[0], 2.5);
                t.mean_all(s)
            },
            &[a.clone()],
        );

        let bias = rand_tensor(r, &[4]);
        check(
            "add_bias",
            |t, xs| {
                let s = t.add_bias(xs[0], xs[1]);
                let e = t.mul(s, s);
                t.sum_all(e)
            },
            &[a.clone(), bias],
        );

        let x = rand_tensor_offset(r, &[2, 5], 0.05);
        check(
            "relu",
            |t, xs| {
                let y = t.relu(xs[0]);
                t.sum_all(y)
            },
            &[x.clone()],
        );
        check(
            "tanh+sigmoid",
            |t, xs| {
                let y = t.tanh(xs[0]);
                let z = t.sigmoid(y);
                t.sum_all(z)
            },
            &[x.clone()],
        );
        check(
            "exp",
            |t, xs| {
                let y = t.exp(xs[0]);
                t.mean_all(y)
            },
            &[x.scale(0.3)],
        );
        let pos = x.map(|v| v.abs() + 0.5);
        check(
            "ln",
            |t, xs| {
                let y = t.ln(xs[0]);
                t.sum_all(y)
            },
            &[pos],
        );

        let m1 = rand_tensor(r, &[3, 4]);
        let m2 = rand_tensor(r, &[4, 2]);
        check(
            "matmul+transpose",
            |t, xs| {
                let p = t.matmul(xs[0], xs[1]);
                let pt = t.transpose2d(p);
                let sq = t.mul(pt, pt);
                t.sum_all(sq)
            },
            &[m1, m2],
        );

        let b1 = rand_tensor(r, &[2, 3, 4]);
        let b2 = rand_tensor(r, &[2, 4, 2]);
        check(
            "bmm+permute+reshape",
            |t, xs| {
                let p = t.bmm(xs[0], xs[1]);
                let q = t.permute(p, vec![1, 0, 2]);
                let rsh = t.reshape(q, vec![6, 2]);
                let sq = t.mul(rsh, rsh);
                t.sum_all(sq)
            },
            &[b1, b2],
        );

        let logits = rand_tensor(r, &[3, 5]);
        check(
            "softmax_last",
            |t, xs| {
                let s = t.softmax_last(xs[0]);
                let sq = t.mul(s, s);
                t.sum_all(sq)
            },
            &[logits.clone()],
        );
        check(
            "log_softmax+select",
            |t, xs| {
                let s = t.log_softmax_last(xs[0]);
                let sel = t.select_classes(s, vec![0, 2, 4]);
                t.mean_all(sel)
            },
            &[logits.clone()],
        );

        let table = rand_tensor(r, &[6, 3]);
        check(
            "gather_rows",
            |t, xs| {
                let g = t.gather_rows(xs[0], vec![0, 5, 2, 2]);
                let sq = t.mul(g, g);
                t.sum_all(sq)
            },
            &[table],
        );

        let ln_x = rand_tensor(r, &[4, 6]);
        let gamma = rand_tensor_offset(r, &[6], 0.2);
        let beta = rand_tensor(r, &[6]);
        check(
            "layer_norm",
            |t, xs| {
                let y = t.layer_norm(xs[0], xs[1], xs[2], 1e-5);
                let sq = t.mul(y, y);
                t.sum_all(sq)
            },
            &[ln_x.clone(), gamma.clone(), beta.clone()],
        );
        check(
            "batch_norm",
            |t, xs| {
                let (y, _, _) = t.batch_norm(xs[0], xs[1], xs[2], 1e-5);
                let sq = t.mul(y, y);
                t.sum_all(sq)
            },
            &[ln_x, gamma, beta],
        );

        let feats = rand_tensor(r, &[3, 4]);
        let w = rand_tensor(r, &[4, 5]);
        let bt = rand_tensor(r, &[4, 5]);
        let tok = rand_tensor(r, &[5]);
        check(
            "feature_tokens+concat+prepend+slice",
            |t, xs| {
                let tokens = t.feature_tokens(xs[0], xs[1], xs[2]);
                let doubled = t.concat_tokens(tokens, tokens);
                let seq = t.prepend_token(doubled, xs[3]);
                let cls = t.slice_token(seq, 0);
                let rest = t.slice_token(seq, 5);
                let both = t.add(cls, rest);
                let sq = t.mul(both, both);
                t.sum_all(sq)
            },
            &[feats, w, bt, tok],
        );
    }
}

#[test]
fn determinism_identical_graphs_bit_identical() {
    let run = || {
        let mut rng = rng_from_seed(42);
        let x = rand_tensor(&mut rng, &[4, 4]);
        let w = rand_tensor(&mut rng, &[4, 3]);
        let mut tape = Tape::new();
        let xi = tape.param(x);
        let wi = tape.param(w);
        let h = tape.matmul(xi, wi);
        let s = tape.softmax_last(h);
        let l = tape.sum_all(s);
        let g = tape.backward(l).unwrap();
        (
            tape.value(l).scalar_value(),
            g.wrt(wi).unwrap().data().to_vec(),
        )
    };
    let (v1, g1) = run();
    let (v2, g2) = run();
    assert_eq!(v1.to_bits(), v2.to_bits());
    assert_eq!(g1, g2);
}
