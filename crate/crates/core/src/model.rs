//! A trained model (projection, gates, optional theme attention) and the
//! scorer interface shared by evaluation, FITB and recommendation.

use alloc::vec::Vec;

use crate::attention::{pairwise_distances, theme_aggregate, uniform_aggregate, Member, ThemeAttention};
use crate::backbone::Projection;
use crate::corpus::{Corpus, Item, ItemId, ThemeId};
use crate::error::{Error, Result};
use crate::subspace::MaskTable;

/// Scores outfits of a corpus. Lower raw scores mean more compatible.
pub trait OutfitScorer {
    /// Raw distance-like score `y`.
    fn score(&self, items: &[ItemId], theme: Option<ThemeId>) -> Result<f64>;

    /// Calibrated log-odds of compatibility. Any strictly decreasing function
    /// of [`OutfitScorer::score`] for a fixed theme; the default is `-y`.
    fn logit(&self, items: &[ItemId], theme: Option<ThemeId>) -> Result<f64> {
        Ok(-self.score(items, theme)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Uniform average over pairs, ignoring the theme.
    Baseline,
    /// Theme-attention weighted sum; requires a theme on every call.
    Theme,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Baseline => "baseline",
            ScoreMode::Theme => "theme-attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub projection: Projection,
    pub masks: MaskTable,
    pub attention: Option<ThemeAttention>,
    /// Calibration bias `β₀` of the uniform-average score.
    pub baseline_bias: f64,
}

impl ModelBundle {
    pub fn new(projection: Projection, masks: MaskTable) -> Result<Self> {
        if projection.n() != masks.n() {
            return Err(Error::arg(
                "projection and mask table disagree on the embedding dimension",
            ));
        }
        Ok(ModelBundle {
            projection,
            masks,
            attention: None,
            baseline_bias: 0.0,
        })
    }

    pub fn embed_items<'a>(&self, items: impl IntoIterator<Item = &'a Item>) -> Result<Vec<Vec<f64>>> {
        items
            .into_iter()
            .map(|i| self.projection.embed(&i.features).map(|e| e.values))
            .collect()
    }

    /// Raw score of already-embedded members.
    pub fn score_members(&self, members: &[Member<'_>], theme: Option<ThemeId>, mode: ScoreMode) -> Result<f64> {
        let d = pairwise_distances(&self.masks, members)?;
        match mode {
            ScoreMode::Baseline => Ok(uniform_aggregate(&d)),
            ScoreMode::Theme => {
                let att = self
                    .attention
                    .as_ref()
                    .ok_or_else(|| Error::arg("model has no theme attention"))?;
                let theme = theme.ok_or_else(|| Error::arg("theme-attention scoring needs a theme"))?;
                theme_aggregate(att, theme, &d)
            }
        }
    }

    /// Bias of the probability mapping for the given mode and theme.
    pub fn bias_for(&self, theme: Option<ThemeId>, mode: ScoreMode) -> Result<f64> {
        match mode {
            ScoreMode::Baseline => Ok(self.baseline_bias),
            ScoreMode::Theme => {
                let att = self
                    .attention
                    .as_ref()
                    .ok_or_else(|| Error::arg("model has no theme attention"))?;
                att.bias(theme.ok_or_else(|| Error::arg("theme-attention scoring needs a theme"))?)
            }
        }
    }

    /// Scorer over `corpus` with every item embedded once up front.
    pub fn scorer<'a>(&'a self, corpus: &'a Corpus, mode: ScoreMode) -> Result<CorpusScorer<'a>> {
        if mode == ScoreMode::Theme && self.attention.is_none() {
            return Err(Error::arg("model has no theme attention"));
        }
        if corpus.feature_dim() != self.projection.d() {
            return Err(Error::arg("corpus feature dimension does not match the projection"));
        }
        Ok(CorpusScorer {
            model: self,
            corpus,
            embeddings: self.embed_items(corpus.items())?,
            mode,
        })
    }
}

pub struct CorpusScorer<'a> {
    model: &'a ModelBundle,
    corpus: &'a Corpus,
    embeddings: Vec<Vec<f64>>,
    mode: ScoreMode,
}

impl CorpusScorer<'_> {
    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn embedding(&self, id: ItemId) -> &[f64] {
        &self.embeddings[id.index()]
    }

    fn members(&self, items: &[ItemId]) -> Vec<Member<'_>> {
        items
            .iter()
            .map(|&i| Member {
                category: self.corpus.item(i).category,
                embedding: &self.embeddings[i.index()],
            })
            .collect()
    }
}

impl OutfitScorer for CorpusScorer<'_> {
    fn score(&self, items: &[ItemId], theme: Option<ThemeId>) -> Result<f64> {
        self.model.score_members(&self.members(items), theme, self.mode)
    }

    fn logit(&self, items: &[ItemId], theme: Option<ThemeId>) -> Result<f64> {
        Ok(self.model.bias_for(theme, self.mode)? - self.score(items, theme)?)
    }
}
