use crate::data::standardize::Standardizer;
use crate::data::synthetic::{make_blobs, make_imbalanced_blobs, make_toy2d_multiclass};
use crate::eval::{auroc, ScorePair};
use crate::models::classifier::{ArchModel, EncodedInput, TrainedClassifier};
use crate::models::common::{ArchitectureConfig, ForwardCtx, TrainConfig};
use crate::models::entropy::{entropy_map, GridSpec};
use crate::models::mlp::Mlp;
use crate::models::train::{train_classifier, train_multiclass};
use crate::numerics::gradcheck::gradient_check;
use crate::numerics::stats::softmax;
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;
use crate::rng::rng_from_seed;

fn small_mlp(n_classes: usize) -> ArchitectureConfig {
    ArchitectureConfig {
        hidden: 64,
        depth: 2,
        ..ArchitectureConfig::mlp(n_classes)
    }
}

fn small_resnet(n_classes: usize) -> ArchitectureConfig {
    ArchitectureConfig {
        hidden: 48,
        depth: 2,
        ..ArchitectureConfig::resnet(n_classes)
    }
}

fn small_ft(n_classes: usize) -> ArchitectureConfig {
    ArchitectureConfig {
        token_dim: 16,
        heads: 4,
        depth: 2,
        ..ArchitectureConfig::ft_transformer(n_classes)
    }
}

/// Plain logistic regression by gradient descent; the independent oracle
/// for "this dataset is linearly separable to 99%".
fn logistic_accuracy(x: &Tensor, labels: &[u8], steps: usize, lr: f64) -> f64 {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..steps {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for i in 0..n {
            let row = x.row(i);
            let z: f64 = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - labels[i] as f64;
            for (g, &v) in gw.iter_mut().zip(row) {
                *g += err * v;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g / n as f64;
        }
        b -= lr * gb / n as f64;
    }
    let mut correct = 0;
    for i in 0..n {
        let z: f64 = x.row(i).iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
        let pred = u8::from(z > 0.0);
        if pred == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

#[test]
fn mlp_fits_separable_blobs_to_99_percent() {
    let ds = make_blobs(2000, 10, 10.0, 5).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    // oracle: logistic regression must already solve this data
    let oracle_acc = logistic_accuracy(&ds.features, &ds.labels, 300, 1.0);
    assert!(oracle_acc >= 0.99, "oracle accuracy {oracle_acc}");

    let model = train_classifier(&ds, &std, &small_mlp(2), &TrainConfig::default()).unwrap();
    let enc = model.encode(&ds).unwrap();
    let preds = model.predict_classes(&enc);
    let acc = preds
        .iter()
        .zip(&ds.labels)
        .filter(|(p, l)| **p == **l as usize)
        .count() as f64
        / ds.n_rows() as f64;
    assert!(acc >= 0.99, "training accuracy {acc}");
}

#[test]
fn identical_seed_gives_bit_identical_parameters() {
    let ds = make_blobs(256, 6, 4.0, 2).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    for arch in [small_mlp(2), small_resnet(2), small_ft(2)] {
        let a = train_classifier(&ds, &std, &arch, &cfg).unwrap();
        let b = train_classifier(&ds, &std, &arch, &cfg).unwrap();
        for (pa, pb) in a.model.params().iter().zip(b.model.params()) {
            assert_eq!(pa.data(), pb.data(), "{:?} params differ", arch.kind);
        }
    }
}

#[test]
fn imbalanced_mortality_style_task_beats_chance() {
    // mortality-like positive rates (roughly 7-13%)
    let ds = make_imbalanced_blobs(1500, 8, 3.0, 0.1257, 3).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let model = train_classifier(&ds, &std, &small_mlp(2), &cfg).unwrap();
    let pass = model.forward_with_features(&ds).unwrap();
    let mut id_scores = vec![];
    let mut ood_scores = vec![];
    for i in 0..ds.n_rows() {
        let p = softmax(pass.logits.row(i)).unwrap()[1];
        if ds.labels[i] == 1 {
            ood_scores.push(p);
        } else {
            id_scores.push(p);
        }
    }
    let pair = ScorePair::new(id_scores, ood_scores).unwrap();
    assert!(auroc(&pair).unwrap() > 0.5);
}

#[test]
fn single_class_dataset_is_rejected() {
    let mut ds = make_blobs(64, 4, 2.0, 1).unwrap();
    ds.labels = vec![0; 64];
    let std = Standardizer::fit(&ds).unwrap();
    assert!(train_classifier(&ds, &std, &small_mlp(2), &TrainConfig::default()).is_err());
}

#[test]
fn zero_weight_network_outputs_zero_logits() {
    let ds = make_blobs(8, 5, 1.0, 7).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let mut rng = rng_from_seed(0);
    let mut mlp = Mlp::init(&small_mlp(2), 5, &mut rng);
    for p in mlp.params.iter_mut() {
        for v in p.data_mut() {
            *v = 0.0;
        }
    }
    let model = TrainedClassifier {
        arch: small_mlp(2),
        model: ArchModel::Mlp(mlp),
        standardizer: std,
        input_schema: ds.schema.clone(),
        encoder: Some(crate::data::encode::OneHotEncoder::from_schema(&ds.schema)),
    };
    let pass = model.forward_with_features(&ds).unwrap();
    assert!(pass.logits.data().iter().all(|&v| v == 0.0));
}

#[test]
fn inference_is_batch_independent_and_deterministic() {
    let ds = make_blobs(64, 6, 3.0, 11).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    for arch in [small_mlp(2), small_resnet(2), small_ft(2)] {
        let model = train_classifier(&ds, &std, &arch, &cfg).unwrap();
        let full = model.forward_with_features(&ds).unwrap();
        let single_row = ds.select_rows(&[17]);
        let single = model.forward_with_features(&single_row).unwrap();
        for (a, b) in full.logits.row(17).iter().zip(single.logits.row(0)) {
            assert!(
                (a - b).abs() < 1e-12,
                "{:?}: batch row vs single row differ: {a} vs {b}",
                arch.kind
            );
        }
        // two passes are bit-identical (dropout off at inference)
        let again = model.forward_with_features(&ds).unwrap();
        assert_eq!(full.logits.data(), again.logits.data());
    }
}

#[test]
fn ft_transformer_token_sequence_includes_class_token() {
    let ds = make_blobs(16, 7, 2.0, 3).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let model = train_classifier(&ds, &std, &small_ft(2), &cfg).unwrap();
    match &model.model {
        ArchModel::Ft(ft) => {
            // tokenizer shape rule: d numeric features + 1 class token
            assert_eq!(ft.seq_len(), 7 + 1);
        }
        _ => panic!(),
    }
}

#[test]
fn logit_shift_invariance_of_softmax_predictions() {
    let logits = [0.3, -1.2, 2.0];
    let p1 = softmax(&logits).unwrap();
    let shifted: Vec<f64> = logits.iter().map(|v| v + 123.456).collect();
    let p2 = softmax(&shifted).unwrap();
    for (a, b) in p1.iter().zip(&p2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn resnet_with_zero_residual_scale_degenerates_to_stem_path() {
    let ds = make_blobs(128, 5, 3.0, 13).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let arch = ArchitectureConfig {
        residual_scale: 0.0,
        ..small_resnet(2)
    };
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let model = train_classifier(&ds, &std, &arch, &cfg).unwrap();
    let resnet = match &model.model {
        ArchModel::Resnet(r) => r,
        _ => panic!(),
    };
    // expected output of the stem + head path, computed with plain tensor ops
    let enc = model.encode(&ds).unwrap();
    let x = match &enc {
        EncodedInput::Dense(t) => t.clone(),
        _ => panic!(),
    };
    let p = &resnet.params;
    let np = p.len();
    let mut h = x.matmul(&p[0]);
    for i in 0..h.shape()[0] {
        for j in 0..h.shape()[1] {
            let v = h.get2(i, j) + p[1].data()[j];
            h.set2(i, j, v);
        }
    }
    // head batchnorm with running stats, then relu, then linear
    let stats = resnet.running.last().unwrap();
    let (gamma, beta) = (&p[np - 4], &p[np - 3]);
    for i in 0..h.shape()[0] {
        for j in 0..h.shape()[1] {
            let xhat = (h.get2(i, j) - stats.mean[j]) / (stats.var[j] + 1e-5).sqrt();
            let v = (gamma.data()[j] * xhat + beta.data()[j]).max(0.0);
            h.set2(i, j, v);
        }
    }
    let mut expected = h.matmul(&p[np - 2]);
    for i in 0..expected.shape()[0] {
        for j in 0..expected.shape()[1] {
            let v = expected.get2(i, j) + p[np - 1].data()[j];
            expected.set2(i, j, v);
        }
    }
    let pass = model.forward_with_features(&ds).unwrap();
    for (a, b) in pass.logits.data().iter().zip(expected.data()) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn entropy_map_bounds_and_far_field_confidence() {
    let (ds, classes) = make_toy2d_multiclass(600, 3, 1).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds_std = std.apply(&ds);
    let arch = small_mlp(3);
    let model =
        train_multiclass(&ds_std, &classes, &std, &arch, &TrainConfig::default()).unwrap();

    let cells = entropy_map(&model, &GridSpec::square(-60.0, 60.0, 41)).unwrap();
    assert_eq!(cells.len(), 41 * 41);
    let ln_c = 3.0f64.ln();
    for c in &cells {
        assert!(c.entropy >= -1e-12 && c.entropy <= ln_c + 1e-12);
    }
    // over-confidence far away: some cell at radius >= 10x the data radius
    // (data radius ~ 4 + noise) has near-zero entropy
    let far_min = cells
        .iter()
        .filter(|c| (c.x * c.x + c.y * c.y).sqrt() >= 50.0)
        .map(|c| c.entropy)
        .fold(f64::INFINITY, f64::min);
    assert!(
        far_min < 0.1 * ln_c,
        "minimum far-field entropy {far_min} vs bound {}",
        0.1 * ln_c
    );
}

#[test]
fn entropy_map_rejects_wrong_dimension() {
    let ds = make_blobs(64, 3, 2.0, 1).unwrap();
    let std = Standardizer::fit(&ds).unwrap();
    let ds = std.apply(&ds);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let model = train_classifier(&ds, &std, &small_mlp(2), &cfg).unwrap();
    assert!(entropy_map(&model, &GridSpec::square(-1.0, 1.0, 5)).is_err());
}

#[test]
fn architectures_pass_finite_difference_checks_at_toy_size() {
    // end-to-end gradient of the training loss wrt every parameter
    for seed in 0..3u64 {
        let ds = make_blobs(6, 4, 2.0, seed).unwrap();
        let std = Standardizer::fit(&ds).unwrap();
        let ds = std.apply(&ds);
        let labels: Vec<usize> = ds.labels.iter().map(|&l| l as usize).collect();
        for arch in [
            ArchitectureConfig {
                hidden: 8,
                depth: 2,
                dropout: 0.0,
                ..ArchitectureConfig::mlp(2)
            },
            ArchitectureConfig {
                hidden: 8,
                depth: 2,
                dropout: 0.0,
                ..ArchitectureConfig::resnet(2)
            },
            ArchitectureConfig {
                token_dim: 8,
                heads: 2,
                depth: 2,
                dropout: 0.0,
                ..ArchitectureConfig::ft_transformer(2)
            },
        ] {
            let cfg = TrainConfig {
                epochs: 1,
                seed,
                ..TrainConfig::default()
            };
            let model = train_classifier(&ds, &std, &arch, &cfg).unwrap();
            let enc = model.encode(&ds).unwrap();
            let params: Vec<Tensor> = model.model.params().to_vec();
            let labels = labels.clone();
            let report = gradient_check(
                |tape: &mut Tape, ids| {
                    // batch-statistics path with dropout rate 0: no rng needed
                    let mut ctx = ForwardCtx {
                        training: true,
                        rng: None,
                        bn_batch_stats: Vec::new(),
                    };
                    let run = model.run_with_params(tape, ids, &enc, false, &mut ctx);
                    let lsm = tape.log_softmax_last(run.nodes.logits);
                    let picked = tape.select_classes(lsm, labels.clone());
                    let mean = tape.mean_all(picked);
                    tape.scale(mean, -1.0)
                },
                &params,
                // small step: at 1e-3 the perturbation can cross a relu
                // kink inside the network and the difference quotient
                // stops measuring the derivative
                1e-5,
            );
            assert!(
                report.passes(1e-4),
                "{:?} seed {seed}: rel err {}",
                arch.kind,
                report.max_rel_err
            );
        }
    }
}
