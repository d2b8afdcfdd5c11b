//! The corpus file formats: `items.jsonl`, `outfits.jsonl`, `vocab.json`
//! and the optional `split.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use themefit_core::corpus::{Coarse, CorpusBuilder, ThemeGroup};
use themefit_core::{Category, CategoryId, Corpus, Item, Split, Theme, ThemeId};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub category: String,
    pub features: Vec<f32>,
}

fn compatible() -> bool {
    true
}

fn is_compatible(label: &bool) -> bool {
    *label
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutfitRecord {
    pub id: String,
    pub items: Vec<String>,
    pub themes: Vec<String>,
    /// Absent means compatible.
    #[serde(default = "compatible", skip_serializing_if = "is_compatible")]
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub name: String,
    pub coarse: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeRecord {
    pub name: String,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub categories: Vec<CategoryRecord>,
    pub themes: Vec<ThemeRecord>,
}

impl Vocab {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Vocab {
            categories: corpus
                .categories()
                .iter()
                .map(|c| CategoryRecord {
                    name: c.name.clone(),
                    coarse: c.coarse.as_str().to_string(),
                })
                .collect(),
            themes: corpus
                .themes()
                .iter()
                .map(|t| ThemeRecord {
                    name: t.name.clone(),
                    group: t.group.as_str().to_string(),
                })
                .collect(),
        }
    }

    /// Assigns dense ids in file order.
    pub fn resolve(&self, path: &Path) -> Result<(Vec<Category>, Vec<Theme>)> {
        let mut categories = Vec::with_capacity(self.categories.len());
        for (i, c) in self.categories.iter().enumerate() {
            let coarse = Coarse::parse(&c.coarse).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: category '{}' has unknown coarse type '{}'",
                    path.display(),
                    c.name,
                    c.coarse
                ))
            })?;
            categories.push(Category {
                id: CategoryId(i as u32),
                name: c.name.clone(),
                coarse,
            });
        }
        let mut themes = Vec::with_capacity(self.themes.len());
        for (i, t) in self.themes.iter().enumerate() {
            let group = ThemeGroup::parse(&t.group).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: theme '{}' has unknown group '{}'",
                    path.display(),
                    t.name,
                    t.group
                ))
            })?;
            themes.push(Theme {
                id: ThemeId(i as u32),
                name: t.name.clone(),
                group,
            });
        }
        Ok((categories, themes))
    }
}

/// Locations of one corpus on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPaths {
    pub items: PathBuf,
    pub outfits: PathBuf,
    pub vocab: PathBuf,
}

impl CorpusPaths {
    /// The file names written by [`write_corpus`] inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            items: dir.join("items.jsonl"),
            outfits: dir.join("outfits.jsonl"),
            vocab: dir.join("vocab.json"),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_vocab(path: &Path) -> Result<(Vec<Category>, Vec<Theme>)> {
    read_json::<Vocab>(path)?.resolve(path)
}

/// Calls `f` with each non-blank line's parsed record and 1-based line
/// number; errors from `f` are prefixed with `path:line`.
fn for_each_record<T, F>(path: &Path, mut f: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let at = format!("{}:{}", path.display(), i + 1);
        let line = line.map_err(|e| CliError::Data(format!("{at}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{at}: {e}")))?;
        f(record).map_err(|e| match e {
            CliError::Data(m) => CliError::Data(format!("{at}: {m}")),
            other => other,
        })?;
    }
    Ok(())
}

fn core_to_data(e: themefit_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Loads and validates a corpus. Every outfit starts in the training split.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let (categories, themes) = read_vocab(&paths.vocab)?;
    let mut builder = CorpusBuilder::new(categories, themes).map_err(core_to_data)?;
    for_each_record(&paths.items, |r: ItemRecord| {
        let cat = builder
            .category_by_name(&r.category)
            .ok_or_else(|| CliError::Data(format!("item '{}' has unknown category '{}'", r.id, r.category)))?;
        builder.add_item(r.id, cat, r.features).map_err(core_to_data)?;
        Ok(())
    })?;
    for_each_record(&paths.outfits, |r: OutfitRecord| {
        let mut themes = Vec::with_capacity(r.themes.len());
        for name in &r.themes {
            themes.push(
                builder.theme_by_name(name).ok_or_else(|| {
                    CliError::Data(format!("outfit '{}' has unknown or ambiguous theme '{name}'", r.id))
                })?,
            );
        }
        let keys: Vec<&str> = r.items.iter().map(String::as_str).collect();
        builder.add_outfit(r.id, &keys, themes, r.label).map_err(core_to_data)
    })?;
    builder.build().map_err(core_to_data)
}

/// Reads an item file whose categories are resolved against `categories`;
/// used for recommendation pools.
pub fn read_items(path: &Path, categories: &[Category]) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut dim = None;
    for_each_record(path, |r: ItemRecord| {
        let Some(cat) = categories.iter().find(|c| c.name == r.category) else {
            return Err(CliError::Data(format!(
                "item '{}' has unknown category '{}'",
                r.id, r.category
            )));
        };
        if !seen.insert(r.id.clone()) {
            return Err(CliError::Data(format!("duplicate item id '{}'", r.id)));
        }
        if *dim.get_or_insert(r.features.len()) != r.features.len() || r.features.is_empty() {
            return Err(CliError::Data(format!(
                "item '{}' has {} features",
                r.id,
                r.features.len()
            )));
        }
        if r.features.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Data(format!("item '{}' has non-finite features", r.id)));
        }
        items.push(Item {
            key: r.id,
            category: cat.id,
            features: r.features,
        });
        Ok(())
    })?;
    Ok(items)
}

pub fn read_split(path: &Path) -> Result<BTreeMap<String, Split>> {
    let raw: BTreeMap<String, String> = read_json(path)?;
    raw.into_iter()
        .map(|(id, s)| {
            Split::parse(&s)
                .map(|s| (id.clone(), s))
                .ok_or_else(|| CliError::Data(format!("{}: outfit '{id}' has unknown split '{s}'", path.display())))
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::write(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, &r).map_err(|e| CliError::Internal(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| CliError::write(path, e))?;
    }
    out.flush().map_err(|e| CliError::write(path, e))
}

/// Name under which a theme is written: the bare name when it resolves
/// uniquely, `group/name` otherwise.
pub fn theme_label(corpus: &Corpus, theme: ThemeId) -> String {
    let t = corpus.theme(theme);
    if corpus.theme_by_name(&t.name) == Some(theme) {
        t.name.clone()
    } else {
        qualified_theme(t)
    }
}

pub fn qualified_theme(t: &Theme) -> String {
    format!("{}/{}", t.group, t.name)
}

/// Writes `items.jsonl`, `outfits.jsonl` and `vocab.json` into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let paths = CorpusPaths::in_dir(dir);
    write_json(&paths.vocab, &Vocab::from_corpus(corpus))?;
    write_jsonl(
        &paths.items,
        corpus.items().iter().map(|i| ItemRecord {
            id: i.key.clone(),
            category: corpus.category(i.category).name.clone(),
            features: i.features.clone(),
        }),
    )?;
    write_jsonl(
        &paths.outfits,
        corpus.outfits().iter().map(|o| OutfitRecord {
            id: o.id.clone(),
            items: o.items.iter().map(|&i| corpus.item(i).key.clone()).collect(),
            themes: o.themes.iter().map(|&t| theme_label(corpus, t)).collect(),
            label: o.label,
        }),
    )?;
    Ok(paths)
}

pub fn write_split(corpus: &Corpus, path: &Path) -> Result<()> {
    let map: BTreeMap<&str, &str> = corpus
        .outfits()
        .iter()
        .zip(corpus.splits())
        .map(|(o, s)| (o.id.as_str(), s.as_str()))
        .collect();
    write_json(path, &map)
}
