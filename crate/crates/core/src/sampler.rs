//! Seeded construction of training triplets, substitution negatives and
//! fill-in-the-blank questions.
//!
//! All draws come from a pool of items (normally the items of one split plus
//! items that belong to no outfit), indexed by fine-grained and coarse
//! category. Index lists are sorted by [`ItemId`], so a given seed always
//! yields the same samples.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::corpus::{CategoryId, Coarse, Corpus, ItemId, Outfit, Split};
use crate::error::{Error, Result};
use crate::rng::{self, purpose, Rng};

/// Anchor and positive come from one outfit, the negative shares the
/// positive's category but not its outfit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletIds {
    pub outfit: usize,
    pub anchor: ItemId,
    pub positive: ItemId,
    pub negative: ItemId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletEpoch {
    /// Grouped by outfit, outfits in a seeded order.
    pub triplets: Vec<TripletIds>,
    /// Anchor/positive pairs dropped because no negative candidate exists.
    pub skipped: usize,
}

/// A fill-in-the-blank question built from one outfit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitbQuestion {
    pub outfit: usize,
    /// Position of the blanked item in the source outfit.
    pub blank_slot: usize,
    pub stem: Vec<ItemId>,
    pub options: [ItemId; 4],
    pub answer: usize,
}

impl FitbQuestion {
    /// The outfit obtained by filling the blank with option `k`.
    pub fn filled(&self, k: usize) -> Vec<ItemId> {
        let mut items = self.stem.clone();
        items.insert(self.blank_slot.min(items.len()), self.options[k]);
        items
    }
}

#[derive(Debug, Clone)]
pub struct SamplerState {
    seed: u64,
    rng: Rng,
    by_category: BTreeMap<CategoryId, Vec<ItemId>>,
    by_coarse: BTreeMap<Coarse, Vec<ItemId>>,
}

impl SamplerState {
    /// Pool of the given items; duplicates are ignored.
    pub fn new(corpus: &Corpus, pool: impl IntoIterator<Item = ItemId>, seed: u64) -> Self {
        let unique: BTreeSet<ItemId> = pool.into_iter().collect();
        let mut by_category: BTreeMap<CategoryId, Vec<ItemId>> = BTreeMap::new();
        let mut by_coarse: BTreeMap<Coarse, Vec<ItemId>> = BTreeMap::new();
        for id in unique {
            let cat = corpus.item(id).category;
            by_category.entry(cat).or_default().push(id);
            by_coarse.entry(corpus.category(cat).coarse).or_default().push(id);
        }
        SamplerState {
            seed,
            rng: rng::rng_for(seed, &[]),
            by_category,
            by_coarse,
        }
    }

    /// Pool of every item used by an outfit of `split`, plus orphan items.
    pub fn for_split(corpus: &Corpus, split: Split, seed: u64) -> Self {
        let mut pool: Vec<ItemId> = corpus
            .outfits_in(split)
            .into_iter()
            .flat_map(|o| corpus.outfits()[o].items.iter().copied())
            .collect();
        pool.extend(corpus.orphan_items());
        Self::new(corpus, pool, seed)
    }

    pub fn category_pool(&self, category: CategoryId) -> &[ItemId] {
        self.by_category.get(&category).map_or(&[], Vec::as_slice)
    }

    pub fn pool_size(&self) -> usize {
        self.by_category.values().map(Vec::len).sum()
    }

    /// Same-category items other than `exclude`, drawn uniformly.
    fn draw_same_category(&mut self, category: CategoryId, exclude: ItemId) -> Option<ItemId> {
        let list = self.by_category.get(&category)?;
        let excluded = list.binary_search(&exclude).ok();
        let available = list.len() - usize::from(excluded.is_some());
        if available == 0 {
            return None;
        }
        let mut k = self.rng.random_range(0..available);
        if let Some(pos) = excluded {
            if k >= pos {
                k += 1;
            }
        }
        Some(list[k])
    }

    /// Coarse-fallback candidates for the item in `slot`: same coarse type,
    /// but a category not already present in the outfit.
    fn coarse_candidates(&self, corpus: &Corpus, items: &[ItemId], slot: usize) -> Vec<ItemId> {
        let cat = corpus.item(items[slot]).category;
        let taken: BTreeSet<CategoryId> = items.iter().map(|&i| corpus.item(i).category).collect();
        self.by_coarse
            .get(&corpus.category(cat).coarse)
            .map(|list| {
                list.iter()
                    .copied()
                    .filter(|&i| !taken.contains(&corpus.item(i).category))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn has_fine_candidate(&self, corpus: &Corpus, item: ItemId) -> bool {
        let list = self.category_pool(corpus.item(item).category);
        list.len() > usize::from(list.binary_search(&item).is_ok())
    }

    /// Replaces one uniformly chosen item by a random same-category item from
    /// the pool (coarse category when the fine one has no alternative). Slots
    /// with no candidate at either level are never chosen.
    pub fn sample_negative_outfit(&mut self, corpus: &Corpus, outfit: &Outfit) -> Result<Outfit> {
        self.sample_negative_outfit_k(corpus, outfit, 1)
    }

    /// Like [`Self::sample_negative_outfit`] but replaces `count` distinct slots.
    pub fn sample_negative_outfit_k(&mut self, corpus: &Corpus, outfit: &Outfit, count: usize) -> Result<Outfit> {
        if outfit.items.len() < 2 {
            return Err(Error::arg(format!("outfit '{}' has fewer than 2 items", outfit.id)));
        }
        if count == 0 || count > outfit.items.len() {
            return Err(Error::arg(format!(
                "cannot replace {count} items of a {}-item outfit",
                outfit.items.len()
            )));
        }
        let mut items = outfit.items.clone();
        let mut replaced = alloc::vec![false; items.len()];
        for _ in 0..count {
            let mut viable = Vec::new();
            for slot in 0..items.len() {
                if replaced[slot] {
                    continue;
                }
                // the slot's item is always in the outfit, so it is the only
                // in-outfit member of its fine category list
                let fine = self.has_fine_candidate(corpus, items[slot]);
                if fine || !self.coarse_candidates(corpus, &items, slot).is_empty() {
                    viable.push((slot, fine));
                }
            }
            let Some(&(slot, fine)) = viable.choose(&mut self.rng) else {
                return Err(Error::sampling(format!(
                    "no substitution candidate for any slot of outfit '{}'",
                    outfit.id
                )));
            };
            let original = items[slot];
            let pick = if fine {
                self.draw_same_category(corpus.item(original).category, original)
            } else {
                let coarse = self.coarse_candidates(corpus, &items, slot);
                coarse.choose(&mut self.rng).copied()
            };
            items[slot] = pick.expect("viable slot has a candidate");
            replaced[slot] = true;
        }
        Ok(Outfit {
            id: format!("{}~neg", outfit.id),
            items,
            themes: outfit.themes.clone(),
            label: false,
        })
    }

    /// One triplet per ordered (anchor, positive) item pair of each listed
    /// outfit; outfits are visited in an order seeded by `(seed, epoch)`.
    pub fn sample_triplets(&self, corpus: &Corpus, outfits: &[usize], epoch: u64) -> Result<TripletEpoch> {
        if outfits.is_empty() {
            return Err(Error::config("no outfits to draw triplets from"));
        }
        let mut rng = rng::rng_for(self.seed, &[purpose::TRIPLETS, epoch]);
        let mut order = outfits.to_vec();
        order.shuffle(&mut rng);
        let mut triplets = Vec::new();
        let mut skipped = 0;
        for o in order {
            let items = &corpus.outfits()[o].items;
            for (ai, &anchor) in items.iter().enumerate() {
                for (pi, &positive) in items.iter().enumerate() {
                    if ai == pi {
                        continue;
                    }
                    let list = self.category_pool(corpus.item(positive).category);
                    let excluded = list.binary_search(&positive).ok();
                    let available = list.len() - usize::from(excluded.is_some());
                    if available == 0 {
                        skipped += 1;
                        continue;
                    }
                    let mut k = rng.random_range(0..available);
                    if excluded.is_some_and(|pos| k >= pos) {
                        k += 1;
                    }
                    triplets.push(TripletIds {
                        outfit: o,
                        anchor,
                        positive,
                        negative: list[k],
                    });
                }
            }
        }
        Ok(TripletEpoch { triplets, skipped })
    }

    /// Blanks a uniformly chosen item and offers it alongside three distinct
    /// distractors of the same category (coarse fallback), at a uniformly
    /// random answer position. `Ok(None)` when fewer than three distractors
    /// exist.
    pub fn make_fitb_question(&mut self, corpus: &Corpus, outfit_index: usize) -> Result<Option<FitbQuestion>> {
        let outfit = &corpus.outfits()[outfit_index];
        if outfit.items.len() < 2 {
            return Err(Error::arg(format!("outfit '{}' has fewer than 2 items", outfit.id)));
        }
        let slot = self.rng.random_range(0..outfit.items.len());
        let truth = outfit.items[slot];
        let fine: Vec<ItemId> = self
            .category_pool(corpus.item(truth).category)
            .iter()
            .copied()
            .filter(|&i| i != truth)
            .collect();
        let mut distractors: Vec<ItemId> = if fine.len() >= 3 {
            fine.choose_multiple(&mut self.rng, 3).copied().collect()
        } else {
            let coarse = self.coarse_candidates(corpus, &outfit.items, slot);
            if fine.len() + coarse.len() < 3 {
                return Ok(None);
            }
            let mut d = fine;
            let need = 3 - d.len();
            d.extend(coarse.choose_multiple(&mut self.rng, need).copied());
            d
        };
        let answer = self.rng.random_range(0..4);
        distractors.insert(answer, truth);
        let options = [distractors[0], distractors[1], distractors[2], distractors[3]];
        let mut stem = outfit.items.clone();
        stem.remove(slot);
        Ok(Some(FitbQuestion {
            outfit: outfit_index,
            blank_slot: slot,
            stem,
            options,
            answer,
        }))
    }
}

/// Human-readable summary used by loggers.
pub fn describe_outfit(corpus: &Corpus, items: &[ItemId]) -> String {
    let keys: Vec<&str> = items.iter().map(|&i| corpus.item(i).key.as_str()).collect();
    keys.join(",")
}
