use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{accumulate_triplet_grad, EmbeddingGrad, MaskTable, Triplet};
use crate::attention::{pairwise_distances, uniform_aggregate, Member};
use crate::backbone::Projection;
use crate::corpus::{CategoryPair, Corpus, ItemId, Split};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::optim::{momentum_step_f32, TrainConfig};
use crate::rng::{derive_seed, purpose};
use crate::sampler::SamplerState;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEpoch {
    pub epoch: usize,
    pub lr: f64,
    /// Mean hinge loss over the epoch's triplets, measured before each
    /// batch's update.
    pub train_loss: f64,
    /// Validation AUC of the uniform-average score after the epoch.
    pub val_auc: Option<f64>,
    pub triplets: usize,
    pub skipped_triplets: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTrainLog {
    pub epochs: Vec<EmbeddingEpoch>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    /// Validation outfits paired with a negative.
    pub validation_pairs: usize,
}

/// Validation positives with one fixed substitution negative each.
pub(crate) struct ValidationPairs {
    pub pos: Vec<Vec<ItemId>>,
    pub neg: Vec<Vec<ItemId>>,
}

impl ValidationPairs {
    pub(crate) fn build(corpus: &Corpus, outfits: &[usize], seed: u64) -> Self {
        let mut sampler = SamplerState::for_split(corpus, Split::Val, seed);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &o in outfits {
            let outfit = &corpus.outfits()[o];
            // outfits without any substitution candidate are left out to keep 1:1
            if let Ok(n) = sampler.sample_negative_outfit(corpus, outfit) {
                pos.push(outfit.items.clone());
                neg.push(n.items);
            }
        }
        ValidationPairs { pos, neg }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }
}

fn embed_corpus(corpus: &Corpus, proj: &Projection) -> Result<Vec<Vec<f64>>> {
    corpus
        .items()
        .iter()
        .map(|i| proj.embed(&i.features).map(|e| e.values))
        .collect()
}

pub(crate) fn members<'a>(corpus: &Corpus, embeddings: &'a [Vec<f64>], items: &[ItemId]) -> Vec<Member<'a>> {
    items
        .iter()
        .map(|&i| Member {
            category: corpus.item(i).category,
            embedding: &embeddings[i.index()],
        })
        .collect()
}

fn baseline_val_auc(corpus: &Corpus, proj: &Projection, masks: &MaskTable, val: &ValidationPairs) -> Result<f64> {
    let emb = embed_corpus(corpus, proj)?;
    let score = |items: &[ItemId]| -> Result<f64> {
        Ok(-uniform_aggregate(&pairwise_distances(
            masks,
            &members(corpus, &emb, items),
        )?))
    };
    let pos = val.pos.iter().map(|o| score(o)).collect::<Result<Vec<_>>>()?;
    let neg = val.neg.iter().map(|o| score(o)).collect::<Result<Vec<_>>>()?;
    auc(&pos, &neg)
}

/// Learns the shared projection and one gate per training category pair with
/// momentum SGD on the conditional triplet loss.
///
/// Triplets are redrawn every epoch; each mini-batch holds the triplets of
/// `batch_outfits` outfits and its gradient is the batch mean. The returned
/// parameters are those of the latest epoch with the best validation AUC
/// (the last epoch when the validation split is empty).
pub fn train_embedding(
    corpus: &Corpus,
    config: &TrainConfig,
    n: usize,
) -> Result<(Projection, MaskTable, EmbeddingTrainLog)> {
    config.validate()?;
    let train = corpus.outfits_in(Split::Train);
    if train.is_empty() {
        return Err(Error::config("the training split is empty"));
    }
    let mut proj = Projection::init(n, corpus.feature_dim(), derive_seed(config.seed, &[purpose::INIT]))?;
    let pairs = corpus.category_pairs();
    let mut masks = MaskTable::all_ones(n, pairs.iter().copied());

    let sampler = SamplerState::for_split(corpus, Split::Train, derive_seed(config.seed, &[purpose::TRIPLETS]));
    let val = ValidationPairs::build(
        corpus,
        &corpus.outfits_in(Split::Val),
        derive_seed(config.seed, &[purpose::VALIDATION]),
    );

    let mut vel_w = vec![0.0; proj.weight().len()];
    let mut vel_b = vec![0.0; proj.n()];
    let mut vel_m: BTreeMap<CategoryPair, Vec<f64>> = pairs.iter().map(|&p| (p, vec![0.0; n])).collect();

    let mut log = EmbeddingTrainLog {
        validation_pairs: val.pos.len(),
        ..Default::default()
    };
    let mut best: Option<(f64, Projection, MaskTable)> = None;

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let drawn = sampler.sample_triplets(corpus, &train, epoch as u64)?;
        let mut loss_sum = 0.0;
        let mut start = 0;
        while start < drawn.triplets.len() {
            // extend the batch until it spans `batch_outfits` outfits
            let mut end = start;
            let mut outfits_in_batch = 0;
            while end < drawn.triplets.len() {
                if end == start || drawn.triplets[end].outfit != drawn.triplets[end - 1].outfit {
                    if outfits_in_batch == config.batch_outfits {
                        break;
                    }
                    outfits_in_batch += 1;
                }
                end += 1;
            }
            let batch = &drawn.triplets[start..end];
            let mut grad = EmbeddingGrad::zeros(&proj);
            for t in batch {
                let triplet = Triplet::new(corpus.item(t.anchor), corpus.item(t.positive), corpus.item(t.negative))?;
                loss_sum += accumulate_triplet_grad(&proj, &masks, &triplet, config.margin, &mut grad)?;
            }
            grad.scale(1.0 / batch.len() as f64);
            momentum_step_f32(
                proj.weight_mut(),
                &grad.projection.weight,
                &mut vel_w,
                lr,
                config.momentum,
            );
            momentum_step_f32(proj.bias_mut(), &grad.projection.bias, &mut vel_b, lr, config.momentum);
            for (pair, vel) in vel_m.iter_mut() {
                let g = grad.masks.get(pair);
                let mask = masks.mask_mut(*pair).expect("every training pair has a gate");
                match g {
                    Some(g) => momentum_step_f32(mask, g, vel, lr, config.momentum),
                    None => momentum_step_f32(mask, &vec![0.0; n], vel, lr, config.momentum),
                }
            }
            start = end;
        }
        if proj.weight().iter().chain(proj.bias()).any(|v| !v.is_finite()) {
            return Err(Error::config(
                "training diverged (non-finite parameters); lower the learning rate",
            ));
        }

        let val_auc = if val.is_empty() {
            None
        } else {
            Some(baseline_val_auc(corpus, &proj, &masks, &val)?)
        };
        let count = drawn.triplets.len();
        log.epochs.push(EmbeddingEpoch {
            epoch,
            lr,
            train_loss: if count > 0 { loss_sum / count as f64 } else { 0.0 },
            val_auc,
            triplets: count,
            skipped_triplets: drawn.skipped,
        });
        let score = val_auc.unwrap_or(f64::NEG_INFINITY);
        if val_auc.is_none() || best.as_ref().is_none_or(|(b, _, _)| score >= *b) {
            best = Some((score, proj.clone(), masks.clone()));
            log.best_epoch = epoch;
        }
    }
    let (_, proj, masks) = best.expect("at least one epoch ran");
    Ok((proj, masks, log))
}
