use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};

use super::{pairwise_distances, uniform_aggregate, xent_loss, ThemeAttention, ThemeSelection, XENT_EPS};
use crate::backbone::Projection;
use crate::corpus::{CategoryPair, Corpus, ItemId, Split, ThemeId};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::metrics::auc;
use crate::optim::{momentum_step_f64, TrainConfig};
use crate::rng::{derive_seed, purpose, rng_for};
use crate::sampler::SamplerState;
use crate::subspace::train::{members, ValidationPairs};
use crate::subspace::MaskTable;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub train: TrainConfig,
    /// Items replaced per substitution negative.
    pub replace_count: usize,
    /// Share of negatives drawn from outfits of other themes; the rest are
    /// substitution negatives.
    pub other_theme_fraction: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            train: TrainConfig::default(),
            replace_count: 1,
            other_theme_fraction: 0.5,
        }
    }
}

/// One training example for a theme: the outfit's pairwise distances and
/// whether it counts as compatible under the theme.
#[derive(Debug, Clone, PartialEq)]
pub struct ThemeExample {
    pub distances: Vec<(CategoryPair, f64)>,
    pub positive: bool,
}

/// Mean cross-entropy of `σ(β − Σ w·d)` over a set of examples, as a
/// function of one theme's weights and bias.
#[derive(Debug, Clone)]
pub struct ThemeObjective<'a> {
    index: &'a BTreeMap<CategoryPair, usize>,
    default_weight: f64,
    examples: &'a [ThemeExample],
}

impl<'a> ThemeObjective<'a> {
    /// `index` maps every trainable pair to its slot in the weight vector;
    /// other pairs use `default_weight` and receive no gradient.
    pub fn new(index: &'a BTreeMap<CategoryPair, usize>, default_weight: f64, examples: &'a [ThemeExample]) -> Self {
        ThemeObjective {
            index,
            default_weight,
            examples,
        }
    }

    fn score(&self, weights: &[f64], ex: &ThemeExample) -> f64 {
        ex.distances
            .iter()
            .map(|(p, d)| self.index.get(p).map_or(self.default_weight, |&k| weights[k]) * d)
            .sum()
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let total: f64 = self
            .examples
            .iter()
            .map(|ex| xent_loss(sigmoid(bias - self.score(weights, ex)), ex.positive))
            .sum();
        total / self.examples.len() as f64
    }

    /// Loss with its gradient w.r.t. the weights and the bias. With
    /// `z = β − y`, `∂L/∂z = p − t`; examples whose probability is clamped
    /// contribute no gradient.
    pub fn loss_and_grad(&self, weights: &[f64], bias: f64) -> (f64, Vec<f64>, f64) {
        let mut gw = vec![0.0; weights.len()];
        let mut gb = 0.0;
        let mut total = 0.0;
        let scale = 1.0 / self.examples.len() as f64;
        for ex in self.examples {
            let p = sigmoid(bias - self.score(weights, ex));
            total += xent_loss(p, ex.positive);
            if !(XENT_EPS..=1.0 - XENT_EPS).contains(&p) {
                continue;
            }
            let dz = (p - f64::from(u8::from(ex.positive))) * scale;
            gb += dz;
            for (pair, d) in &ex.distances {
                if let Some(&k) = self.index.get(pair) {
                    gw[k] -= dz * d;
                }
            }
        }
        (total * scale, gw, gb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionEpoch {
    pub theme: ThemeId,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionTrainLog {
    pub epochs: Vec<AttentionEpoch>,
    pub best_epoch: BTreeMap<ThemeId, usize>,
    pub warnings: Vec<String>,
}

struct Frozen<'a> {
    corpus: &'a Corpus,
    masks: &'a MaskTable,
    embeddings: Vec<Vec<f64>>,
}

impl Frozen<'_> {
    fn distances(&self, items: &[ItemId]) -> Result<Vec<(CategoryPair, f64)>> {
        pairwise_distances(self.masks, &members(self.corpus, &self.embeddings, items))
    }
}

/// Mean number of item pairs per training outfit.
fn mean_pair_count(corpus: &Corpus, train: &[usize]) -> f64 {
    let total: usize = train
        .iter()
        .map(|&o| {
            let k = corpus.outfits()[o].items.len();
            k * (k - 1) / 2
        })
        .sum();
    total as f64 / train.len() as f64
}

/// Learns, for every selected theme, attention weights over category pairs
/// and a calibration bias, with the projection and gates frozen.
///
/// Only pairs that occur in the theme's own training outfits get a weight;
/// every other pair scores with the default weight. Positives are the
/// training outfits tagged with the theme. Each epoch
/// draws one negative per positive: a share `other_theme_fraction` are
/// outfits of other themes, the rest substitution negatives. Weights start
/// at `1 / k̄` (k̄ the mean pair count of training outfits) and the bias at
/// the mean first-epoch score. The parameters of the epoch with the best
/// validation AUC are kept, the latest such epoch on ties.
pub fn train_attention(
    corpus: &Corpus,
    proj: &Projection,
    masks: &MaskTable,
    selection: &ThemeSelection,
    config: &AttentionConfig,
) -> Result<(ThemeAttention, AttentionTrainLog)> {
    let tc = &config.train;
    tc.validate()?;
    if !(0.0..=1.0).contains(&config.other_theme_fraction) {
        return Err(Error::config("other_theme_fraction must lie in [0, 1]"));
    }
    if config.replace_count == 0 {
        return Err(Error::config("replace_count must be positive"));
    }
    let train = corpus.outfits_in(Split::Train);
    if train.is_empty() {
        return Err(Error::config("the training split is empty"));
    }
    let themes = selection.resolve(corpus)?;
    let frozen = Frozen {
        corpus,
        masks,
        embeddings: corpus
            .items()
            .iter()
            .map(|i| proj.embed(&i.features).map(|e| e.values))
            .collect::<Result<_>>()?,
    };
    let default_weight = 1.0 / mean_pair_count(corpus, &train);

    let mut att = ThemeAttention::new(default_weight);
    let mut log = AttentionTrainLog::default();
    let val_outfits = corpus.outfits_in(Split::Val);

    for theme in themes {
        let positives: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&o| corpus.outfits()[o].has_theme(theme))
            .collect();
        if positives.is_empty() {
            log.warnings.push(format!(
                "theme '{}' has no training outfits; skipped",
                corpus.theme(theme).name
            ));
            continue;
        }
        let pairs: Vec<CategoryPair> = positives
            .iter()
            .flat_map(|&o| corpus.outfit_pairs(&corpus.outfits()[o].items))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<CategoryPair, usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        let others: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&o| !corpus.outfits()[o].has_theme(theme))
            .collect();
        let tag = u64::from(theme.0);

        let val_ids: Vec<usize> = val_outfits
            .iter()
            .copied()
            .filter(|&o| corpus.outfits()[o].has_theme(theme))
            .collect();
        let val = ValidationPairs::build(corpus, &val_ids, derive_seed(tc.seed, &[purpose::VALIDATION, tag]));
        let val_pos: Vec<ThemeExample> = val
            .pos
            .iter()
            .map(|o| {
                frozen.distances(o).map(|d| ThemeExample {
                    distances: d,
                    positive: true,
                })
            })
            .collect::<Result<_>>()?;
        let val_neg: Vec<ThemeExample> = val
            .neg
            .iter()
            .map(|o| {
                frozen.distances(o).map(|d| ThemeExample {
                    distances: d,
                    positive: false,
                })
            })
            .collect::<Result<_>>()?;

        let mut weights = vec![default_weight; pairs.len()];
        let mut bias = 0.0;
        let mut vel_w = vec![0.0; pairs.len()];
        let mut vel_b = [0.0];
        let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;

        for epoch in 0..tc.epochs {
            let mut examples = epoch_examples(&frozen, &positives, &others, config, tag, epoch)?;
            if epoch == 0 {
                let objective = ThemeObjective::new(&index, default_weight, &examples);
                let ys: Vec<f64> = examples.iter().map(|e| objective.score(&weights, e)).collect();
                bias = ys.iter().sum::<f64>() / ys.len() as f64;
            }
            examples.shuffle(&mut rng_for(tc.seed, &[purpose::ATTENTION, tag, epoch as u64, 1]));
            let lr = tc.lr_at(epoch);
            let mut loss_sum = 0.0;
            for batch in examples.chunks(tc.batch_outfits) {
                let objective = ThemeObjective::new(&index, default_weight, batch);
                let (loss, gw, gb) = objective.loss_and_grad(&weights, bias);
                loss_sum += loss * batch.len() as f64;
                momentum_step_f64(&mut weights, &gw, &mut vel_w, lr, tc.momentum);
                let mut b = [bias];
                momentum_step_f64(&mut b, &[gb], &mut vel_b, lr, tc.momentum);
                bias = b[0];
            }
            if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::config("attention training diverged; lower the learning rate"));
            }
            let val_auc = if val_pos.is_empty() {
                None
            } else {
                let objective = ThemeObjective::new(&index, default_weight, &[]);
                let logit = |e: &ThemeExample| bias - objective.score(&weights, e);
                let p: Vec<f64> = val_pos.iter().map(logit).collect();
                let n: Vec<f64> = val_neg.iter().map(logit).collect();
                Some(auc(&p, &n)?)
            };
            log.epochs.push(AttentionEpoch {
                theme,
                epoch,
                lr,
                train_loss: loss_sum / examples.len() as f64,
                val_auc,
            });
            let score = val_auc.unwrap_or(f64::NEG_INFINITY);
            if val_auc.is_none() || best.as_ref().is_none_or(|(b, ..)| score >= *b) {
                best = Some((score, weights.clone(), bias, epoch));
            }
        }
        let (_, w, b, epoch) = best.expect("at least one epoch ran");
        log.best_epoch.insert(theme, epoch);
        att.insert_theme(theme, pairs.iter().copied().zip(w).collect(), b)?;
    }
    Ok((att, log))
}

fn epoch_examples(
    frozen: &Frozen<'_>,
    positives: &[usize],
    others: &[usize],
    config: &AttentionConfig,
    tag: u64,
    epoch: usize,
) -> Result<Vec<ThemeExample>> {
    let corpus = frozen.corpus;
    let seed = config.train.seed;
    let mut rng = rng_for(seed, &[purpose::ATTENTION, tag, epoch as u64]);
    let mut sampler = SamplerState::for_split(
        corpus,
        Split::Train,
        derive_seed(seed, &[purpose::ATTENTION, tag, epoch as u64, 2]),
    );
    let mut order = positives.to_vec();
    order.shuffle(&mut rng);
    let n_other = if others.is_empty() {
        0
    } else {
        libm::round(order.len() as f64 * config.other_theme_fraction) as usize
    };
    let mut examples = Vec::with_capacity(2 * order.len());
    for (j, &o) in order.iter().enumerate() {
        let outfit = &corpus.outfits()[o];
        let negative: Option<Vec<ItemId>> = if j < n_other {
            others.choose(&mut rng).map(|&x| corpus.outfits()[x].items.clone())
        } else {
            let count = config.replace_count.min(outfit.items.len());
            match sampler.sample_negative_outfit_k(corpus, outfit, count) {
                Ok(neg) => Some(neg.items),
                Err(Error::Sampling(_)) => others.choose(&mut rng).map(|&x| corpus.outfits()[x].items.clone()),
                Err(e) => return Err(e),
            }
        };
        // a positive without any usable negative is dropped to keep 1:1
        let Some(negative) = negative else { continue };
        examples.push(ThemeExample {
            distances: frozen.distances(&outfit.items)?,
            positive: true,
        });
        examples.push(ThemeExample {
            distances: frozen.distances(&negative)?,
            positive: false,
        });
    }
    if examples.is_empty() {
        return Err(Error::sampling("no attention training negatives could be drawn"));
    }
    Ok(examples)
}

/// Bias `β₀` of the uniform-average score: the value at which the mean
/// predicted probability over training positives and one substitution
/// negative each equals the positive share (the cross-entropy optimum for
/// an intercept-only fit). Solved by bisection.
pub fn fit_baseline_bias(corpus: &Corpus, proj: &Projection, masks: &MaskTable, seed: u64) -> Result<f64> {
    let train = corpus.outfits_in(Split::Train);
    if train.is_empty() {
        return Err(Error::config("the training split is empty"));
    }
    let frozen = Frozen {
        corpus,
        masks,
        embeddings: corpus
            .items()
            .iter()
            .map(|i| proj.embed(&i.features).map(|e| e.values))
            .collect::<Result<_>>()?,
    };
    let mut sampler = SamplerState::for_split(
        corpus,
        Split::Train,
        derive_seed(seed, &[purpose::VALIDATION, u64::MAX]),
    );
    let mut ys = Vec::new();
    let mut n_pos = 0usize;
    for &o in &train {
        let outfit = &corpus.outfits()[o];
        let Ok(neg) = sampler.sample_negative_outfit(corpus, outfit) else {
            continue;
        };
        ys.push(uniform_aggregate(&frozen.distances(&outfit.items)?));
        ys.push(uniform_aggregate(&frozen.distances(&neg.items)?));
        n_pos += 1;
    }
    if ys.is_empty() {
        return Err(Error::sampling("no training negatives for bias calibration"));
    }
    let target = n_pos as f64;
    let excess = |b: f64| ys.iter().map(|&y| sigmoid(b - y)).sum::<f64>() - target;
    let lo_y = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_y - 50.0, hi_y + 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
