//! Synthetic corpora with planted, theme-dependent compatibility.
//!
//! Every item's features are a one-hot block for its category followed by a
//! linear image of a latent style vector, plus Gaussian noise on every
//! coordinate. Within an outfit of theme `P`, categories joined by one of
//! `P`'s planted pairs (transitively) share one style vector; all other
//! items get styles of their own.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::corpus::{
    Category, CategoryId, CategoryPair, Coarse, Corpus, CorpusBuilder, ItemId, Theme, ThemeGroup, ThemeId,
};
use crate::error::{Error, Result};
use crate::model::OutfitScorer;
use crate::rng::{purpose, rng_for, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub num_categories: usize,
    pub num_themes: usize,
    pub num_outfits: usize,
    pub items_per_outfit: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    /// Planted pairs per theme, indexed by theme.
    pub theme_pair_map: Vec<Vec<CategoryPair>>,
    pub seed: u64,
}

fn pair(a: u32, b: u32) -> CategoryPair {
    CategoryPair::new(CategoryId(a), CategoryId(b)).expect("distinct categories")
}

fn all_pairs(cats: core::ops::Range<u32>) -> Vec<CategoryPair> {
    let mut out = Vec::new();
    for a in cats.clone() {
        for b in a + 1..cats.end {
            out.push(pair(a, b));
        }
    }
    out
}

impl Default for SynthSpec {
    /// Eight categories in two themes; theme 0 plants every pair among
    /// categories 0-3, theme 1 every pair among 4-7.
    fn default() -> Self {
        SynthSpec {
            num_categories: 8,
            num_themes: 2,
            num_outfits: 600,
            items_per_outfit: 3,
            feature_dim: 24,
            latent_dim: 4,
            noise_sigma: 0.1,
            theme_pair_map: vec![all_pairs(0..4), all_pairs(4..8)],
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Four categories, every outfit holds all four, and the two themes
    /// plant disjoint pairings of them: `{0:1, 2:3}` and `{0:2, 1:3}`. Only a
    /// theme-aware score can tell which pairs should be close.
    pub fn theme_contrast() -> Self {
        SynthSpec {
            num_categories: 4,
            num_themes: 2,
            num_outfits: 600,
            items_per_outfit: 4,
            feature_dim: 20,
            latent_dim: 4,
            noise_sigma: 0.1,
            theme_pair_map: vec![vec![pair(0, 1), pair(2, 3)], vec![pair(0, 2), pair(1, 3)]],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_categories;
        if c < 2 {
            return Err(Error::arg("num_categories must be at least 2"));
        }
        if self.num_themes == 0 {
            return Err(Error::arg("num_themes must be positive"));
        }
        if self.num_outfits == 0 {
            return Err(Error::arg("num_outfits must be positive"));
        }
        if self.items_per_outfit < 2 || self.items_per_outfit > c {
            return Err(Error::arg(format!(
                "items_per_outfit must lie in [2, num_categories = {c}], got {}",
                self.items_per_outfit
            )));
        }
        if self.feature_dim <= c {
            return Err(Error::arg(format!(
                "feature_dim must exceed num_categories = {c}, got {}",
                self.feature_dim
            )));
        }
        if self.latent_dim == 0 || self.latent_dim > self.feature_dim {
            return Err(Error::arg(format!(
                "latent_dim must lie in [1, feature_dim = {}], got {}",
                self.feature_dim, self.latent_dim
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::arg("noise_sigma must be finite and non-negative"));
        }
        if self.theme_pair_map.len() != self.num_themes {
            return Err(Error::arg(format!(
                "theme_pair_map has {} entries for {} themes",
                self.theme_pair_map.len(),
                self.num_themes
            )));
        }
        for (t, pairs) in self.theme_pair_map.iter().enumerate() {
            if pairs.is_empty() {
                return Err(Error::arg(format!("theme {t} has no planted pairs")));
            }
            if let Some(p) = pairs.iter().find(|p| p.hi().index() >= c) {
                return Err(Error::arg(format!(
                    "theme {t} plants pair {p} outside the {c} categories"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// Planted pairs per theme, sorted and deduplicated.
    pub planted: Vec<Vec<CategoryPair>>,
    pub num_categories: usize,
}

impl SynthCorpus {
    /// Scorer that knows the planted structure: the sum of squared
    /// style-block distances over the theme's planted pairs present in the
    /// outfit (all themes' pairs when no theme is given).
    pub fn oracle(&self) -> PlantedOracle<'_> {
        PlantedOracle { synth: self }
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        self.0[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra.max(rb)] = ra.min(rb);
    }
}

/// Builds the corpus described by `spec`. Outfit `i` carries theme
/// `i mod num_themes` and is labelled compatible. Deterministic in the seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let c = spec.num_categories;
    let d = spec.feature_dim;
    let l = spec.latent_dim;
    let style_dims = d - c;
    let mut rng = rng_for(spec.seed, &[purpose::SYNTH]);

    let planted: Vec<Vec<CategoryPair>> = spec
        .theme_pair_map
        .iter()
        .map(|p| p.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .collect();

    let mixing_sd = 1.0 / libm::sqrt((l * style_dims) as f64);
    let mixing: Vec<f64> = (0..style_dims * l)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mixing_sd * z
        })
        .collect::<Vec<f64>>();
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::arg(format!("noise_sigma: {e}")))?)
    } else {
        None
    };

    let categories = (0..c)
        .map(|i| Category {
            id: CategoryId(i as u32),
            name: format!("cat{i}"),
            coarse: Coarse::ALL[i % 6],
        })
        .collect();
    let themes = (0..spec.num_themes)
        .map(|t| Theme {
            id: ThemeId(t as u32),
            name: format!("theme{t}"),
            group: ThemeGroup::Synthetic,
        })
        .collect();
    let mut builder = CorpusBuilder::new(categories, themes)?;

    for o in 0..spec.num_outfits {
        let t = o % spec.num_themes;
        let cats = grow_outfit(&mut rng, c, spec.items_per_outfit, &planted[t]);

        let mut dsu = Dsu((0..c).collect());
        for p in &planted[t] {
            if cats.contains(&p.lo().index()) && cats.contains(&p.hi().index()) {
                dsu.union(p.lo().index(), p.hi().index());
            }
        }
        let mut styles: Vec<Option<Vec<f64>>> = vec![None; c];
        let mut items = Vec::with_capacity(cats.len());
        for (slot, &cat) in cats.iter().enumerate() {
            let root = dsu.find(cat);
            if styles[root].is_none() {
                styles[root] = Some((0..l).map(|_| StandardNormal.sample(&mut rng)).collect());
            }
            let style = styles[root].as_ref().expect("style drawn above");
            let mut features = Vec::with_capacity(d);
            for j in 0..c {
                features.push(if j == cat { 1.0 } else { 0.0 });
            }
            for r in 0..style_dims {
                let row = &mixing[r * l..(r + 1) * l];
                features.push(row.iter().zip(style).map(|(a, s)| a * s).sum());
            }
            let features: Vec<f32> = features
                .into_iter()
                .map(|v: f64| (v + noise.as_ref().map_or(0.0, |n| n.sample(&mut rng))) as f32)
                .collect();
            let key = format!("o{o:05}-{slot}");
            items.push(builder.add_item(key, CategoryId(cat as u32), features)?);
        }
        builder.add_outfit_ids(format!("o{o:05}"), items, vec![ThemeId(t as u32)], true)?;
    }
    Ok(SynthCorpus {
        corpus: builder.build()?,
        planted,
        num_categories: c,
    })
}

/// Starts from a random planted pair and keeps adding categories linked to
/// the outfit by a planted pair, falling back to any unused category.
fn grow_outfit(rng: &mut Rng, c: usize, k: usize, planted: &[CategoryPair]) -> Vec<usize> {
    let seed = planted.choose(rng).expect("validated non-empty");
    let mut cats = vec![seed.lo().index(), seed.hi().index()];
    while cats.len() < k {
        let linked: BTreeSet<usize> = planted
            .iter()
            .filter_map(|p| {
                let (a, b) = (p.lo().index(), p.hi().index());
                match (cats.contains(&a), cats.contains(&b)) {
                    (true, false) => Some(b),
                    (false, true) => Some(a),
                    _ => None,
                }
            })
            .collect();
        let next = if linked.is_empty() {
            let free: Vec<usize> = (0..c).filter(|x| !cats.contains(x)).collect();
            free[rng.random_range(0..free.len())]
        } else {
            let linked: Vec<usize> = linked.into_iter().collect();
            linked[rng.random_range(0..linked.len())]
        };
        cats.push(next);
    }
    cats
}

pub struct PlantedOracle<'a> {
    synth: &'a SynthCorpus,
}

impl PlantedOracle<'_> {
    fn style_sq_distance(&self, a: ItemId, b: ItemId) -> f64 {
        let c = self.synth.num_categories;
        let corpus = &self.synth.corpus;
        let fa = &corpus.item(a).features[c..];
        let fb = &corpus.item(b).features[c..];
        fa.iter()
            .zip(fb)
            .map(|(x, y)| {
                let t = f64::from(*x) - f64::from(*y);
                t * t
            })
            .sum()
    }
}

impl OutfitScorer for PlantedOracle<'_> {
    fn score(&self, items: &[ItemId], theme: Option<ThemeId>) -> Result<f64> {
        let corpus = &self.synth.corpus;
        let planted: BTreeSet<CategoryPair> = match theme {
            Some(t) => self
                .synth
                .planted
                .get(t.index())
                .ok_or_else(|| Error::arg(format!("unknown theme id {}", t.0)))?
                .iter()
                .copied()
                .collect(),
            None => self.synth.planted.iter().flatten().copied().collect(),
        };
        let mut total = 0.0;
        for (i, &a) in items.iter().enumerate() {
            for &b in &items[i + 1..] {
                let Some(p) = CategoryPair::new(corpus.item(a).category, corpus.item(b).category) else {
                    return Err(Error::arg("outfit repeats a category"));
                };
                if planted.contains(&p) {
                    total += self.style_sq_distance(a, b);
                }
            }
        }
        Ok(total)
    }
}
