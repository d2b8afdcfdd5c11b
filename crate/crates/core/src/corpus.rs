//! Data model: categories, themes, items, outfits and the train/val/test split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// Dense fine-grained category index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryId(pub u32);

/// Dense theme index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThemeId(pub u32);

/// Dense index of an item inside its corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CategoryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ThemeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($s => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum! {
    /// Coarse garment type; used as the fallback pool when a fine-grained
    /// category has too few items to sample from.
    Coarse {
        InnerTop => "inner-top",
        OuterTop => "outer-top",
        Bottom => "bottom",
        Shoe => "shoe",
        Bag => "bag",
        Accessory => "accessory",
        Other => "other",
    }
}

string_enum! {
    ThemeGroup {
        Occasion => "occasion",
        Style => "style",
        Fit => "fit",
        Gender => "gender",
        Synthetic => "synthetic",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    pub coarse: Coarse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theme {
    pub id: ThemeId,
    pub name: String,
    pub group: ThemeGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    /// External identifier.
    pub key: String,
    pub category: CategoryId,
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outfit {
    pub id: String,
    pub items: Vec<ItemId>,
    /// Sorted, duplicate free.
    pub themes: Vec<ThemeId>,
    /// `true` for compatible outfits.
    pub label: bool,
}

impl Outfit {
    pub fn has_theme(&self, theme: ThemeId) -> bool {
        self.themes.binary_search(&theme).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Unordered category pair stored as `(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryPair {
    lo: CategoryId,
    hi: CategoryId,
}

impl CategoryPair {
    /// Canonical pair, or `None` when both categories are the same.
    pub fn new(a: CategoryId, b: CategoryId) -> Option<Self> {
        match a.cmp(&b) {
            core::cmp::Ordering::Less => Some(CategoryPair { lo: a, hi: b }),
            core::cmp::Ordering::Greater => Some(CategoryPair { lo: b, hi: a }),
            core::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(self) -> CategoryId {
        self.lo
    }

    pub fn hi(self) -> CategoryId {
        self.hi
    }

    /// `"u:v"` with numeric ids, the key format used in checkpoints.
    pub fn key(self) -> String {
        format!("{}:{}", self.lo.0, self.hi.0)
    }

    pub fn parse_key(s: &str) -> Option<Self> {
        let (a, b) = s.split_once(':')?;
        let a = a.trim().parse().ok()?;
        let b = b.trim().parse().ok()?;
        let pair = CategoryPair::new(CategoryId(a), CategoryId(b))?;
        // only canonical spelling is accepted
        (pair.lo.0 == a).then_some(pair)
    }
}

impl fmt::Display for CategoryPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo.0, self.hi.0)
    }
}

/// Incrementally validates records and assembles a [`Corpus`].
///
/// Each `add_*` call checks the record against the invariants that can be
/// decided at that point, so a loader can attach its own line numbers to
/// the returned error.
#[derive(Debug, Clone)]
pub struct CorpusBuilder {
    categories: Vec<Category>,
    themes: Vec<Theme>,
    items: Vec<Item>,
    item_index: BTreeMap<String, ItemId>,
    outfits: Vec<Outfit>,
    outfit_ids: BTreeSet<String>,
    feature_dim: Option<usize>,
}

impl CorpusBuilder {
    pub fn new(categories: Vec<Category>, themes: Vec<Theme>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for (i, c) in categories.iter().enumerate() {
            if c.id.index() != i {
                return Err(Error::validation(format!(
                    "category ids must be dense: position {i} has id {}",
                    c.id.0
                )));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::validation(format!("duplicate category name '{}'", c.name)));
            }
        }
        let mut theme_names = BTreeSet::new();
        for (i, t) in themes.iter().enumerate() {
            if t.id.index() != i {
                return Err(Error::validation(format!(
                    "theme ids must be dense: position {i} has id {}",
                    t.id.0
                )));
            }
            if !theme_names.insert((t.group, t.name.as_str())) {
                return Err(Error::validation(format!(
                    "duplicate theme name '{}' in group {}",
                    t.name, t.group
                )));
            }
        }
        Ok(CorpusBuilder {
            categories,
            themes,
            items: Vec::new(),
            item_index: BTreeMap::new(),
            outfits: Vec::new(),
            outfit_ids: BTreeSet::new(),
            feature_dim: None,
        })
    }

    pub fn category_by_name(&self, name: &str) -> Option<CategoryId> {
        self.categories.iter().find(|c| c.name == name).map(|c| c.id)
    }

    /// Resolves a theme by name. Names are unique only within a group, so a
    /// name shared by several groups is ambiguous and yields `None`; such
    /// themes can be addressed as `group/name`.
    pub fn theme_by_name(&self, name: &str) -> Option<ThemeId> {
        find_theme(&self.themes, name)
    }

    pub fn add_item(&mut self, key: String, category: CategoryId, features: Vec<f32>) -> Result<ItemId> {
        if self.item_index.contains_key(&key) {
            return Err(Error::validation(format!("duplicate item id '{key}'")));
        }
        if category.index() >= self.categories.len() {
            return Err(Error::validation(format!(
                "item '{key}' has unknown category id {}",
                category.0
            )));
        }
        if features.is_empty() {
            return Err(Error::validation(format!("item '{key}' has an empty feature vector")));
        }
        match self.feature_dim {
            Some(d) if d != features.len() => {
                return Err(Error::validation(format!(
                    "item '{key}' has {} features, expected {d}",
                    features.len()
                )))
            }
            None => self.feature_dim = Some(features.len()),
            _ => {}
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("item '{key}' has non-finite features")));
        }
        let id = ItemId(self.items.len() as u32);
        self.item_index.insert(key.clone(), id);
        self.items.push(Item {
            key,
            category,
            features,
        });
        Ok(id)
    }

    /// Adds an outfit whose items are given by external key.
    pub fn add_outfit(&mut self, id: String, item_keys: &[&str], themes: Vec<ThemeId>, label: bool) -> Result<()> {
        let mut items = Vec::with_capacity(item_keys.len());
        for key in item_keys {
            let Some(&item) = self.item_index.get(*key) else {
                return Err(Error::validation(format!(
                    "outfit '{id}' references missing item '{key}'"
                )));
            };
            items.push(item);
        }
        self.add_outfit_ids(id, items, themes, label)
    }

    pub fn add_outfit_ids(
        &mut self,
        id: String,
        items: Vec<ItemId>,
        mut themes: Vec<ThemeId>,
        label: bool,
    ) -> Result<()> {
        if self.outfit_ids.contains(&id) {
            return Err(Error::validation(format!("duplicate outfit id '{id}'")));
        }
        if items.len() < 2 {
            return Err(Error::validation(format!("outfit '{id}' has fewer than 2 items")));
        }
        let mut seen_items = BTreeSet::new();
        let mut seen_categories = BTreeSet::new();
        for &item in &items {
            let Some(rec) = self.items.get(item.index()) else {
                return Err(Error::validation(format!(
                    "outfit '{id}' references unknown item index {}",
                    item.0
                )));
            };
            if !seen_items.insert(item) {
                return Err(Error::validation(format!(
                    "outfit '{id}' lists item '{}' more than once",
                    rec.key
                )));
            }
            if !seen_categories.insert(rec.category) {
                return Err(Error::validation(format!(
                    "outfit '{id}' has two items of category '{}'",
                    self.categories[rec.category.index()].name
                )));
            }
        }
        themes.sort_unstable();
        themes.dedup();
        if themes.is_empty() {
            return Err(Error::validation(format!("outfit '{id}' has no theme")));
        }
        if let Some(t) = themes.iter().find(|t| t.index() >= self.themes.len()) {
            return Err(Error::validation(format!("outfit '{id}' has unknown theme id {}", t.0)));
        }
        self.outfit_ids.insert(id.clone());
        self.outfits.push(Outfit {
            id,
            items,
            themes,
            label,
        });
        Ok(())
    }

    pub fn build(self) -> Result<Corpus> {
        let feature_dim = self
            .feature_dim
            .ok_or_else(|| Error::validation("corpus has no items"))?;
        let split = alloc::vec![Split::Train; self.outfits.len()];
        Ok(Corpus {
            categories: self.categories,
            themes: self.themes,
            items: self.items,
            item_index: self.item_index,
            outfits: self.outfits,
            split,
            feature_dim,
        })
    }
}

fn find_theme(themes: &[Theme], name: &str) -> Option<ThemeId> {
    if let Some((group, short)) = name.split_once('/') {
        let group = ThemeGroup::parse(group)?;
        return themes
            .iter()
            .find(|t| t.group == group && t.name == short)
            .map(|t| t.id);
    }
    let mut hits = themes.iter().filter(|t| t.name == name);
    let first = hits.next()?;
    hits.next().is_none().then_some(first.id)
}

/// A validated, immutable collection of items and outfits.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    categories: Vec<Category>,
    themes: Vec<Theme>,
    items: Vec<Item>,
    item_index: BTreeMap<String, ItemId>,
    outfits: Vec<Outfit>,
    split: Vec<Split>,
    feature_dim: usize,
}

impl Corpus {
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn themes(&self) -> &[Theme] {
        &self.themes
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> &Item {
        &self.items[id.index()]
    }

    pub fn item_by_key(&self, key: &str) -> Option<ItemId> {
        self.item_index.get(key).copied()
    }

    pub fn outfits(&self) -> &[Outfit] {
        &self.outfits
    }

    pub fn category(&self, id: CategoryId) -> &Category {
        &self.categories[id.index()]
    }

    pub fn category_by_name(&self, name: &str) -> Option<CategoryId> {
        self.categories.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn theme(&self, id: ThemeId) -> &Theme {
        &self.themes[id.index()]
    }

    /// See [`CorpusBuilder::theme_by_name`].
    pub fn theme_by_name(&self, name: &str) -> Option<ThemeId> {
        find_theme(&self.themes, name)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn split_of(&self, outfit: usize) -> Split {
        self.split[outfit]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    /// Indices of the outfits assigned to `split`, in corpus order.
    pub fn outfits_in(&self, split: Split) -> Vec<usize> {
        (0..self.outfits.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for s in &self.split {
            sizes[*s as usize] += 1;
        }
        sizes
    }

    /// Items referenced by no outfit.
    pub fn orphan_items(&self) -> Vec<ItemId> {
        let mut used = alloc::vec![false; self.items.len()];
        for o in &self.outfits {
            for i in &o.items {
                used[i.index()] = true;
            }
        }
        (0..self.items.len())
            .filter(|&i| !used[i])
            .map(|i| ItemId(i as u32))
            .collect()
    }

    /// Seeded shuffle followed by largest-remainder allocation of sizes.
    pub fn make_split(mut self, fractions: [f64; 3], seed: u64) -> Result<Corpus> {
        let sizes = largest_remainder(self.outfits.len(), fractions)?;
        let mut order: Vec<usize> = (0..self.outfits.len()).collect();
        order.shuffle(&mut rng::rng_for(seed, &[purpose::SPLIT]));
        let labels = [Split::Train, Split::Val, Split::Test];
        let mut pos = 0;
        for (label, size) in labels.iter().zip(sizes) {
            for &o in &order[pos..pos + size] {
                self.split[o] = *label;
            }
            pos += size;
        }
        Ok(self)
    }

    /// Applies an explicit outfit-id → split assignment covering every outfit.
    pub fn with_split_map(mut self, map: &BTreeMap<String, Split>) -> Result<Corpus> {
        for (i, o) in self.outfits.iter().enumerate() {
            let Some(s) = map.get(&o.id) else {
                return Err(Error::validation(format!(
                    "split assigns no partition to outfit '{}'",
                    o.id
                )));
            };
            self.split[i] = *s;
        }
        if map.len() != self.outfits.len() {
            let known: BTreeSet<&str> = self.outfits.iter().map(|o| o.id.as_str()).collect();
            if let Some(extra) = map.keys().find(|k| !known.contains(k.as_str())) {
                return Err(Error::validation(format!("split names unknown outfit '{extra}'")));
            }
        }
        Ok(self)
    }

    /// Canonical category pairs co-occurring in any training outfit, sorted.
    pub fn category_pairs(&self) -> Vec<CategoryPair> {
        let mut pairs = BTreeSet::new();
        for i in self.outfits_in(Split::Train) {
            pairs.extend(self.outfit_pairs(&self.outfits[i].items));
        }
        pairs.into_iter().collect()
    }

    /// Canonical pairs of every unordered item pair in `items`.
    pub fn outfit_pairs(&self, items: &[ItemId]) -> Vec<CategoryPair> {
        let mut out = Vec::new();
        for (a, &x) in items.iter().enumerate() {
            for &y in &items[a + 1..] {
                if let Some(p) = CategoryPair::new(self.item(x).category, self.item(y).category) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn outfit_by_id(&self, id: &str) -> Option<usize> {
        self.outfits.iter().position(|o| o.id == id)
    }

    pub fn describe(&self) -> String {
        let [tr, va, te] = self.split_sizes();
        format!(
            "{} items, {} outfits (train {tr} / val {va} / test {te}), {} categories, {} themes, D={}",
            self.items.len(),
            self.outfits.len(),
            self.categories.len(),
            self.themes.len(),
            self.feature_dim
        )
    }
}

/// Splits `total` into three sizes proportional to `fractions`: floors first,
/// then the leftover units go to the largest fractional parts (earlier
/// partitions win ties).
pub fn largest_remainder(total: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::arg("split fractions must be positive"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("split fractions sum to {sum}, expected 1")));
    }
    let mut sizes = [0usize; 3];
    let mut rema = [0f64; 3];
    for i in 0..3 {
        let exact = fractions[i] * total as f64;
        sizes[i] = libm::floor(exact) as usize;
        rema[i] = exact - sizes[i] as f64;
    }
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        rema[b]
            .partial_cmp(&rema[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    Ok(sizes)
}
