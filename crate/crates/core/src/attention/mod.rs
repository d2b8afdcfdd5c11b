//! Outfit-level scores aggregated from pairwise masked distances.
//!
//! The baseline averages all pairwise distances of an outfit. The
//! theme-aware score weights each pair's distance by a per-theme attention
//! weight `w[P][(u, v)]`. Scores are distances (lower is more compatible);
//! `σ(β − y)` with a per-theme bias `β` turns them into probabilities.

mod train;

pub use train::{
    fit_baseline_bias, train_attention, AttentionConfig, AttentionEpoch, AttentionTrainLog, ThemeExample,
    ThemeObjective,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::backbone::Projection;
use crate::corpus::{CategoryId, CategoryPair, Corpus, Item, ThemeGroup, ThemeId};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::subspace::{masked_sq_distance, MaskTable};

/// Probabilities are clamped to `[XENT_EPS, 1 - XENT_EPS]` before taking logs.
pub const XENT_EPS: f64 = 1e-7;

/// Per-theme attention weights over category pairs plus a calibration bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ThemeAttention {
    weights: BTreeMap<ThemeId, BTreeMap<CategoryPair, f64>>,
    bias: BTreeMap<ThemeId, f64>,
    default_weight: f64,
}

impl ThemeAttention {
    pub fn new(default_weight: f64) -> Self {
        ThemeAttention {
            weights: BTreeMap::new(),
            bias: BTreeMap::new(),
            default_weight,
        }
    }

    /// Registers (or replaces) a theme's weights and bias.
    pub fn insert_theme(&mut self, theme: ThemeId, weights: BTreeMap<CategoryPair, f64>, bias: f64) -> Result<()> {
        if !bias.is_finite() || weights.values().any(|w| !w.is_finite()) {
            return Err(Error::arg(format!(
                "attention for theme {} has non-finite entries",
                theme.0
            )));
        }
        self.weights.insert(theme, weights);
        self.bias.insert(theme, bias);
        Ok(())
    }

    pub fn default_weight(&self) -> f64 {
        self.default_weight
    }

    pub fn themes(&self) -> impl Iterator<Item = ThemeId> + '_ {
        self.weights.keys().copied()
    }

    pub fn has_theme(&self, theme: ThemeId) -> bool {
        self.weights.contains_key(&theme)
    }

    pub fn theme_weights(&self, theme: ThemeId) -> Result<&BTreeMap<CategoryPair, f64>> {
        self.weights
            .get(&theme)
            .ok_or_else(|| Error::arg(format!("no attention weights for theme {}", theme.0)))
    }

    pub fn weight(&self, theme: ThemeId, pair: CategoryPair) -> Result<f64> {
        Ok(self
            .theme_weights(theme)?
            .get(&pair)
            .copied()
            .unwrap_or(self.default_weight))
    }

    pub fn bias(&self, theme: ThemeId) -> Result<f64> {
        self.bias
            .get(&theme)
            .copied()
            .ok_or_else(|| Error::arg(format!("no attention bias for theme {}", theme.0)))
    }

    /// The pair with the largest |weight| for `theme` (first in pair order on ties).
    pub fn dominant_pair(&self, theme: ThemeId) -> Result<Option<(CategoryPair, f64)>> {
        let mut best: Option<(CategoryPair, f64)> = None;
        for (&p, &w) in self.theme_weights(theme)? {
            if best.is_none_or(|(_, b)| w.abs() > b.abs()) {
                best = Some((p, w));
            }
        }
        Ok(best)
    }
}

/// Which themes get their own attention model.
#[derive(Debug, Clone, PartialEq)]
pub enum ThemeSelection {
    All,
    Group(ThemeGroup),
    Themes(Vec<ThemeId>),
}

impl ThemeSelection {
    pub fn resolve(&self, corpus: &Corpus) -> Result<Vec<ThemeId>> {
        let ids: Vec<ThemeId> = match self {
            ThemeSelection::All => corpus.themes().iter().map(|t| t.id).collect(),
            ThemeSelection::Group(g) => corpus.themes().iter().filter(|t| t.group == *g).map(|t| t.id).collect(),
            ThemeSelection::Themes(ts) => {
                if let Some(t) = ts.iter().find(|t| t.index() >= corpus.themes().len()) {
                    return Err(Error::arg(format!("unknown theme id {}", t.0)));
                }
                let mut ts = ts.clone();
                ts.sort_unstable();
                ts.dedup();
                ts
            }
        };
        Ok(ids)
    }
}

/// An item as seen by the scorer: its category and embedding.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub category: CategoryId,
    pub embedding: &'a [f64],
}

/// Masked distance of every unordered member pair.
pub fn pairwise_distances(masks: &MaskTable, members: &[Member<'_>]) -> Result<Vec<(CategoryPair, f64)>> {
    if members.len() < 2 {
        return Err(Error::arg("an outfit needs at least 2 items to be scored"));
    }
    let mut out = Vec::with_capacity(members.len() * (members.len() - 1) / 2);
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            let pair = CategoryPair::new(a.category, b.category)
                .ok_or_else(|| Error::arg(format!("outfit repeats category {}", a.category.0)))?;
            out.push((pair, masked_sq_distance(masks.mask(pair), a.embedding, b.embedding)));
        }
    }
    Ok(out)
}

/// Mean of the pairwise distances.
pub fn uniform_aggregate(distances: &[(CategoryPair, f64)]) -> f64 {
    distances.iter().map(|(_, d)| d).sum::<f64>() / distances.len() as f64
}

/// `Σ w[theme][pair] · d(pair)`.
pub fn theme_aggregate(att: &ThemeAttention, theme: ThemeId, distances: &[(CategoryPair, f64)]) -> Result<f64> {
    let weights = att.theme_weights(theme)?;
    Ok(distances
        .iter()
        .map(|(p, d)| weights.get(p).copied().unwrap_or(att.default_weight) * d)
        .sum())
}

fn embed_all(proj: &Projection, items: &[&Item]) -> Result<Vec<Vec<f64>>> {
    items
        .iter()
        .map(|i| proj.embed(&i.features).map(|e| e.values))
        .collect()
}

fn members<'a>(items: &[&Item], embeddings: &'a [Vec<f64>]) -> Vec<Member<'a>> {
    items
        .iter()
        .zip(embeddings)
        .map(|(i, e)| Member {
            category: i.category,
            embedding: e,
        })
        .collect()
}

/// Mean masked distance over all item pairs of an outfit.
pub fn baseline_score(proj: &Projection, masks: &MaskTable, items: &[&Item]) -> Result<f64> {
    let emb = embed_all(proj, items)?;
    Ok(uniform_aggregate(&pairwise_distances(masks, &members(items, &emb))?))
}

/// Attention-weighted sum of masked distances for `theme`.
pub fn theme_score(
    proj: &Projection,
    masks: &MaskTable,
    att: &ThemeAttention,
    items: &[&Item],
    theme: ThemeId,
) -> Result<f64> {
    att.theme_weights(theme)?;
    let emb = embed_all(proj, items)?;
    theme_aggregate(att, theme, &pairwise_distances(masks, &members(items, &emb))?)
}

/// `σ(β − y)`: larger distance scores mean lower compatibility.
pub fn predict_probability(score: f64, bias: f64) -> f64 {
    sigmoid(bias - score)
}

/// Binary cross-entropy with `p` clamped to `[XENT_EPS, 1 - XENT_EPS]`.
pub fn xent_loss(p: f64, truth: bool) -> f64 {
    let p = p.clamp(XENT_EPS, 1.0 - XENT_EPS);
    if truth {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn pair(a: u32, b: u32) -> CategoryPair {
        CategoryPair::new(CategoryId(a), CategoryId(b)).unwrap()
    }

    /// 1-d embeddings at the given positions, identity projection.
    fn items_at(xs: &[f32]) -> Vec<Item> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| Item {
                key: i.to_string(),
                category: CategoryId(i as u32),
                features: vec![x],
            })
            .collect()
    }

    fn id1() -> Projection {
        Projection::new(1, 1, vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn baseline_averages_pairs() {
        let p = id1();
        let m = MaskTable::new(1);
        let it = items_at(&[0.0, 2.0]);
        let refs: Vec<&Item> = it.iter().collect();
        assert_eq!(baseline_score(&p, &m, &refs).unwrap(), 4.0);

        let it = items_at(&[0.0, 1.0, 3.0]);
        let refs: Vec<&Item> = it.iter().collect();
        // 1, 9, 4
        assert!((baseline_score(&p, &m, &refs).unwrap() - 14.0 / 3.0).abs() < 1e-12);

        assert!(baseline_score(&p, &m, &refs[..1]).is_err());
    }

    #[test]
    fn baseline_over_six_pairs() {
        // gates chosen so the six pair distances are exactly 1..=6 with all
        // embeddings one unit apart
        let p = id1();
        let mut m = MaskTable::new(1);
        let it = items_at(&[0.0, 1.0, 2.0, 3.0]);
        let want = [
            ((0, 1), 1.0f64),
            ((0, 2), 2.0),
            ((0, 3), 3.0),
            ((1, 2), 4.0),
            ((1, 3), 5.0),
            ((2, 3), 6.0),
        ];
        for ((a, b), d) in want {
            let gap = (b - a) as f64;
            m.insert(pair(a, b), vec![(libm::sqrt(d) / gap) as f32]).unwrap();
        }
        let refs: Vec<&Item> = it.iter().collect();
        assert!((baseline_score(&p, &m, &refs).unwrap() - 3.5).abs() < 1e-5);
    }

    #[test]
    fn theme_score_examples() {
        let p = id1();
        let m = MaskTable::new(1);
        let it = items_at(&[0.0, 1.0, 3.0]); // d(0,1)=1, d(0,2)=9, d(1,2)=4
        let refs: Vec<&Item> = it.iter().collect();

        let mut att = ThemeAttention::new(0.0);
        let uniform = [
            (pair(0, 1), 1.0 / 3.0),
            (pair(0, 2), 1.0 / 3.0),
            (pair(1, 2), 1.0 / 3.0),
        ];
        att.insert_theme(ThemeId(0), uniform.into_iter().collect(), 0.0)
            .unwrap();
        let b = baseline_score(&p, &m, &refs).unwrap();
        assert!((theme_score(&p, &m, &att, &refs, ThemeId(0)).unwrap() - b).abs() < 1e-12);

        att.insert_theme(ThemeId(1), BTreeMap::new(), 0.0).unwrap();
        assert_eq!(theme_score(&p, &m, &att, &refs, ThemeId(1)).unwrap(), 0.0);

        assert!(matches!(
            theme_score(&p, &m, &att, &refs, ThemeId(7)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn theme_score_hand_dot_product() {
        // u=0, v=1, t=2 with distances {(u,v):1, (u,t):2, (v,t):7}
        let p = id1();
        let mut m = MaskTable::new(1);
        let it = items_at(&[0.0, 1.0, 2.0]);
        m.insert(pair(0, 2), vec![(libm::sqrt(2.0) / 2.0) as f32]).unwrap();
        m.insert(pair(1, 2), vec![libm::sqrt(7.0) as f32]).unwrap();
        let mut att = ThemeAttention::new(0.0);
        let w = [(pair(0, 1), 2.0), (pair(0, 2), 0.5), (pair(1, 2), 0.0)];
        att.insert_theme(ThemeId(0), w.into_iter().collect(), 0.0).unwrap();
        let refs: Vec<&Item> = it.iter().collect();
        assert!((theme_score(&p, &m, &att, &refs, ThemeId(0)).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(predict_probability(0.7, 0.7), 0.5);
        assert!(predict_probability(1e300, 0.0) < 1e-300);
        assert!(!predict_probability(f64::MAX, 0.0).is_nan());
        assert!((predict_probability(0.0, 1.0) - 0.73106).abs() < 1e-5);
        assert!(predict_probability(1.0, 0.0) < predict_probability(0.5, 0.0));
    }

    #[test]
    fn xent_examples() {
        assert!(xent_loss(1.0, true) <= 1e-6);
        assert!((xent_loss(0.5, true) - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((xent_loss(0.5, false) - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((xent_loss(0.9, false) - core::f64::consts::LN_10).abs() < 1e-5);
        assert!(xent_loss(0.0, true).is_finite());
    }

    #[test]
    fn dominant_pair_prefers_magnitude() {
        let mut att = ThemeAttention::new(0.1);
        let w = [(pair(0, 1), 0.5), (pair(0, 2), -2.0), (pair(1, 2), 1.5)];
        att.insert_theme(ThemeId(0), w.into_iter().collect(), 0.0).unwrap();
        assert_eq!(att.dominant_pair(ThemeId(0)).unwrap(), Some((pair(0, 2), -2.0)));
        assert_eq!(att.weight(ThemeId(0), pair(3, 4)).unwrap(), 0.1);
    }
}
