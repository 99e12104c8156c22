//! Cross-entropy training with shuffled mini-batches and AdamW.

use crate::data::dataset::Dataset;
use crate::data::encode::{numeric_and_categorical, OneHotEncoder};
use crate::data::standardize::Standardizer;
use crate::error::{Error, Result};
use crate::models::classifier::{ArchModel, EncodedInput, TrainedClassifier};
use crate::models::common::{ArchKind, ArchitectureConfig, ForwardCtx, TrainConfig};
use crate::models::ft_transformer::FtTransformer;
use crate::models::mlp::Mlp;
use crate::models::resnet::Resnet;
use crate::numerics::adamw::{AdamW, AdamWConfig};
use crate::numerics::tape::Tape;
use crate::rng::{rng_from_seed, shuffled_indices};

/// Train on a dataset's binary labels. The dataset must already be
/// standardized; the fitted standardizer is stored for provenance and for
/// standalone inference entry points.
pub fn train_classifier(
    ds: &Dataset,
    standardizer: &Standardizer,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier> {
    let labels: Vec<usize> = ds.labels.iter().map(|&l| l as usize).collect();
    train_multiclass(ds, &labels, standardizer, arch, cfg)
}

/// Train with explicit class labels (the toy multi-class task).
pub fn train_multiclass(
    ds: &Dataset,
    labels: &[usize],
    standardizer: &Standardizer,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier> {
    arch.validate()?;
    cfg.validate()?;
    if labels.len() != ds.n_rows() {
        return Err(Error::invalid("label count does not match rows"));
    }
    let distinct = {
        let mut seen = std::collections::BTreeSet::new();
        for &l in labels {
            seen.insert(l);
        }
        seen
    };
    if distinct.len() < 2 {
        return Err(Error::invalid(
            "training requires at least two classes present",
        ));
    }
    if let Some(&max) = distinct.iter().next_back() {
        if max >= arch.n_classes {
            return Err(Error::invalid(format!(
                "label {max} exceeds configured class count {}",
                arch.n_classes
            )));
        }
    }

    let mut rng = rng_from_seed(cfg.seed);
    let (mut model, encoder, input) = match arch.kind {
        ArchKind::Mlp | ArchKind::Resnet => {
            let encoder = OneHotEncoder::from_schema(&ds.schema);
            let in_dim = encoder.out_width();
            let model = match arch.kind {
                ArchKind::Mlp => ArchModel::Mlp(Mlp::init(arch, in_dim, &mut rng)),
                _ => ArchModel::Resnet(Resnet::init(arch, in_dim, &mut rng)),
            };
            let input = EncodedInput::Dense(encoder.encode(ds));
            (model, Some(encoder), input)
        }
        ArchKind::FtTransformer => {
            let (numeric, cats, cards) = numeric_and_categorical(ds);
            let model = ArchModel::Ft(FtTransformer::init(
                arch,
                numeric.shape()[1],
                &cards,
                &mut rng,
            ));
            (model, None, EncodedInput::Tokens { numeric, cats })
        }
    };

    let mut classifier = TrainedClassifier {
        arch: arch.clone(),
        model,
        standardizer: standardizer.clone(),
        input_schema: ds.schema.clone(),
        encoder,
    };

    let mut opt = AdamW::new(AdamWConfig::with_lr(cfg.lr));
    let n = ds.n_rows();
    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(&mut rng, n);
        for batch in order.chunks(cfg.batch_size) {
            let batch_input = input.select(batch);
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();

            let mut tape = Tape::new();
            let param_ids: Vec<_> = classifier
                .model
                .params()
                .iter()
                .map(|p| tape.param(p.clone()))
                .collect();
            let mut ctx = ForwardCtx::train(&mut rng);
            let run = classifier.run_with_params(&mut tape, &param_ids, &batch_input, false, &mut ctx);
            let lsm = tape.log_softmax_last(run.nodes.logits);
            let picked = tape.select_classes(lsm, batch_labels);
            let mean = tape.mean_all(picked);
            let loss = tape.scale(mean, -1.0);

            let loss_value = tape.value(loss).scalar_value();
            if !loss_value.is_finite() {
                return Err(Error::DivergedTraining {
                    epoch,
                    detail: format!("loss became {loss_value}"),
                });
            }
            let grads = tape.backward(loss)?;
            let grad_tensors: Vec<_> = param_ids
                .iter()
                .zip(classifier.model.params())
                .map(|(&id, p)| grads.wrt_or_zero(id, p.shape()))
                .collect();
            opt.step(classifier.model.params_mut(), &grad_tensors)?;
            if let ArchModel::Resnet(resnet) = &mut classifier.model {
                resnet.update_running(&ctx.bn_batch_stats);
            }
        }
    }
    Ok(classifier)
}
