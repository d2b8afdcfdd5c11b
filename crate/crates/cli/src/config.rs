//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use themefit_core::attention::{AttentionConfig, ThemeSelection};
use themefit_core::corpus::ThemeGroup;
use themefit_core::{Corpus, Split, TrainConfig};

use crate::error::{CliError, Result};
use crate::io::{read_json, CorpusPaths};

/// Optimiser settings; the seed comes from [`RunConfig::seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub margin: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_outfits: usize,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            margin: t.margin,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            epochs: t.epochs,
            batch_outfits: t.batch_outfits,
            lr_decay_factor: t.lr_decay_factor,
            lr_decay_every: t.lr_decay_every,
        }
    }
}

impl TrainSection {
    pub fn to_core(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            margin: self.margin,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_outfits: self.batch_outfits,
            lr_decay_factor: self.lr_decay_factor,
            lr_decay_every: self.lr_decay_every,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    /// Embedding dimension.
    pub n: usize,
    pub train: TrainSection,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            n: 64,
            train: TrainSection::default(),
        }
    }
}

/// `"all"`, a list of theme names, or `{"group": "occasion"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThemeSpec {
    Keyword(String),
    Names(Vec<String>),
    Group { group: String },
}

impl Default for ThemeSpec {
    fn default() -> Self {
        ThemeSpec::Keyword("all".into())
    }
}

impl ThemeSpec {
    pub fn resolve(&self, corpus: &Corpus) -> Result<ThemeSelection> {
        match self {
            ThemeSpec::Keyword(k) if k == "all" => Ok(ThemeSelection::All),
            ThemeSpec::Keyword(k) => Err(CliError::Usage(format!(
                "theme selection must be \"all\", a list of names or {{\"group\": ...}}, got \"{k}\""
            ))),
            ThemeSpec::Names(names) => names
                .iter()
                .map(|n| {
                    corpus
                        .theme_by_name(n)
                        .ok_or_else(|| CliError::Usage(format!("unknown or ambiguous theme '{n}'")))
                })
                .collect::<Result<_>>()
                .map(ThemeSelection::Themes),
            ThemeSpec::Group { group } => ThemeGroup::parse(group)
                .map(ThemeSelection::Group)
                .ok_or_else(|| CliError::Usage(format!("unknown theme group '{group}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionSection {
    pub train: TrainSection,
    pub replace_count: usize,
    pub other_theme_fraction: f64,
    pub themes: ThemeSpec,
}

impl Default for AttentionSection {
    fn default() -> Self {
        let a = AttentionConfig::default();
        AttentionSection {
            train: TrainSection::default(),
            replace_count: a.replace_count,
            other_theme_fraction: a.other_theme_fraction,
            themes: ThemeSpec::default(),
        }
    }
}

impl AttentionSection {
    pub fn to_core(&self, seed: u64) -> AttentionConfig {
        AttentionConfig {
            train: self.train.to_core(seed),
            replace_count: self.replace_count,
            other_theme_fraction: self.other_theme_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub repetitions: usize,
    pub split: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            repetitions: 5,
            split: "test".into(),
        }
    }
}

impl EvalSection {
    pub fn split(&self) -> Result<Split> {
        Split::parse(&self.split).ok_or_else(|| CliError::Usage(format!("unknown split '{}'", self.split)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub items: Option<PathBuf>,
    pub outfits: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    /// Explicit split; otherwise `split_fractions` are applied with `seed`.
    pub split: Option<PathBuf>,
    pub split_fractions: [f64; 3],
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Defaults to `checkpoint.json` inside `out`.
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub embedding: EmbeddingSection,
    pub attention: AttentionSection,
    pub eval: EvalSection,
    pub skip_attention: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            items: None,
            outfits: None,
            vocab: None,
            split: None,
            split_fractions: [0.8, 0.06, 0.14],
            out: None,
            checkpoint: None,
            seed: 0,
            embedding: EmbeddingSection::default(),
            attention: AttentionSection::default(),
            eval: EvalSection::default(),
            skip_attention: false,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::Usage(format!("config {} not found", path.display())));
        }
        let mut c: RunConfig = read_json(path).map_err(|e| CliError::Usage(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut c.items,
            &mut c.outfits,
            &mut c.vocab,
            &mut c.split,
            &mut c.out,
            &mut c.checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// Points all three corpus files at `dir`.
    pub fn set_data_dir(&mut self, dir: &Path) {
        let p = CorpusPaths::in_dir(dir);
        self.items = Some(p.items);
        self.outfits = Some(p.outfits);
        self.vocab = Some(p.vocab);
    }

    pub fn corpus_paths(&self) -> Result<CorpusPaths> {
        let need = |p: &Option<PathBuf>, what: &str| {
            p.clone()
                .ok_or_else(|| CliError::Usage(format!("no {what} file given (use --data or a config file)")))
        };
        Ok(CorpusPaths {
            items: need(&self.items, "items")?,
            outfits: need(&self.outfits, "outfits")?,
            vocab: need(&self.vocab, "vocab")?,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join("checkpoint.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.embedding.train.learning_rate, 1e-2);
        assert_eq!(c.embedding.train.batch_outfits, 32);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epochs": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"embedding": {"train": {"lr": 1}}}"#).is_err());
    }

    #[test]
    fn theme_spec_forms() {
        let c: RunConfig = serde_json::from_str(r#"{"attention": {"themes": ["a", "b"]}}"#).unwrap();
        assert_eq!(c.attention.themes, ThemeSpec::Names(vec!["a".into(), "b".into()]));
        let c: RunConfig = serde_json::from_str(r#"{"attention": {"themes": {"group": "fit"}}}"#).unwrap();
        assert_eq!(c.attention.themes, ThemeSpec::Group { group: "fit".into() });
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"items": "data/items.jsonl", "out": "/abs"}"#).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.items.unwrap(), dir.path().join("data/items.jsonl"));
        assert_eq!(c.out.unwrap(), PathBuf::from("/abs"));
    }
}
