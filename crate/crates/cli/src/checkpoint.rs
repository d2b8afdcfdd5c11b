//! Single-file JSON checkpoint of a trained [`ModelBundle`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use themefit_core::subspace::MaskTable;
use themefit_core::{Category, CategoryPair, Corpus, ModelBundle, Projection, Theme, ThemeAttention};

use crate::error::{CliError, Result};
use crate::io::{qualified_theme, read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThemeWeights {
    /// Keyed by category pair `u:v`.
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionRecord {
    pub default_weight: f64,
    /// Keyed by `group/name`.
    pub themes: BTreeMap<String, ThemeWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    /// Category names in id order, to catch a mismatched vocabulary.
    pub categories: Vec<String>,
    /// Row-major `n × D`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub masks: BTreeMap<String, Vec<f32>>,
    pub default_mask: Vec<f32>,
    pub baseline_bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &ModelBundle, corpus: &Corpus) -> Self {
        let p = &model.projection;
        Checkpoint {
            n: p.n(),
            d: p.d(),
            categories: corpus.categories().iter().map(|c| c.name.clone()).collect(),
            weight: p.weight().to_vec(),
            bias: p.bias().to_vec(),
            masks: model.masks.iter().map(|(pair, m)| (pair.key(), m.to_vec())).collect(),
            default_mask: model.masks.default_mask().to_vec(),
            baseline_bias: model.baseline_bias,
            attention: model.attention.as_ref().map(|att| AttentionRecord {
                default_weight: att.default_weight(),
                themes: att
                    .themes()
                    .map(|t| {
                        let weights = att
                            .theme_weights(t)
                            .expect("listed theme")
                            .iter()
                            .map(|(pair, w)| (pair.key(), *w))
                            .collect();
                        let bias = att.bias(t).expect("listed theme");
                        (qualified_theme(corpus.theme(t)), ThemeWeights { weights, bias })
                    })
                    .collect(),
            }),
        }
    }

    /// Rebuilds the model against a vocabulary, which must be the one it was
    /// trained on.
    pub fn into_model(self, categories: &[Category], themes: &[Theme]) -> Result<ModelBundle> {
        let names: Vec<&str> = categories.iter().map(|c| c.name.as_str()).collect();
        if names != self.categories {
            return Err(CliError::Usage(
                "checkpoint categories do not match the vocabulary it is used with".into(),
            ));
        }
        let bad = |m: String| CliError::Usage(format!("malformed checkpoint: {m}"));
        let pair = |key: &str| {
            CategoryPair::parse_key(key)
                .filter(|p| p.hi().index() < categories.len())
                .ok_or_else(|| bad(format!("bad category pair '{key}'")))
        };
        let projection = Projection::new(self.n, self.d, self.weight, self.bias).map_err(|e| bad(e.to_string()))?;
        let mut masks = MaskTable::new(self.n);
        masks.set_default(self.default_mask).map_err(|e| bad(e.to_string()))?;
        for (key, m) in self.masks {
            masks.insert(pair(&key)?, m).map_err(|e| bad(e.to_string()))?;
        }
        let mut model = ModelBundle::new(projection, masks).map_err(|e| bad(e.to_string()))?;
        if !self.baseline_bias.is_finite() {
            return Err(bad("non-finite baseline_bias".into()));
        }
        model.baseline_bias = self.baseline_bias;
        if let Some(rec) = self.attention {
            let mut att = ThemeAttention::new(rec.default_weight);
            for (key, tw) in rec.themes {
                let theme = themes
                    .iter()
                    .find(|t| qualified_theme(t) == key)
                    .ok_or_else(|| CliError::Usage(format!("checkpoint theme '{key}' is not in the vocabulary")))?;
                let weights = tw
                    .weights
                    .iter()
                    .map(|(k, w)| pair(k).map(|p| (p, *w)))
                    .collect::<Result<_>>()?;
                att.insert_theme(theme.id, weights, tw.bias)
                    .map_err(|e| bad(e.to_string()))?;
            }
            model.attention = Some(att);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// A missing or unreadable checkpoint is a usage error.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::Usage(format!("checkpoint {} not found", path.display())));
        }
        read_json(path).map_err(|e| CliError::Usage(e.to_string()))
    }
}
