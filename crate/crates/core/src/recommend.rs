//! Completing an outfit around an anchor item from a pool of candidates.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::attention::Member;
use crate::corpus::{CategoryId, Item, ThemeId};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{ModelBundle, ScoreMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendRequest<'a> {
    pub anchor: &'a Item,
    /// Categories to fill, in order.
    pub slots: Vec<CategoryId>,
    pub theme: Option<ThemeId>,
    pub mode: ScoreMode,
    /// Alternatives reported per slot.
    pub runner_ups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index into the pool.
    pub item: usize,
    /// Score of the partial outfit with this candidate added.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotPick {
    pub category: CategoryId,
    pub chosen: Candidate,
    pub runner_ups: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub picks: Vec<SlotPick>,
    /// Score of the completed outfit, anchor included.
    pub score: f64,
    pub probability: f64,
    pub warnings: Vec<String>,
}

impl Recommendation {
    pub fn items(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.chosen.item).collect()
    }
}

struct Prepared<'a> {
    pool: &'a [Item],
    embeddings: Vec<Vec<f64>>,
    anchor: Vec<f64>,
    /// Pool indices per usable slot, sorted by item key.
    slots: Vec<(CategoryId, Vec<usize>)>,
    warnings: Vec<String>,
}

fn prepare<'a>(model: &ModelBundle, pool: &'a [Item], req: &RecommendRequest<'_>) -> Result<Prepared<'a>> {
    if req.mode == ScoreMode::Theme && req.theme.is_none() {
        return Err(Error::arg("theme-attention recommendation needs a theme"));
    }
    let anchor = model.projection.embed(&req.anchor.features)?.values;
    let embeddings = model.embed_items(pool)?;
    let mut warnings = Vec::new();
    let mut slots: Vec<(CategoryId, Vec<usize>)> = Vec::new();
    for &cat in &req.slots {
        if cat == req.anchor.category || slots.iter().any(|(c, _)| *c == cat) {
            warnings.push(format!("category {} is already in the outfit; slot skipped", cat.0));
            continue;
        }
        let mut cands: Vec<usize> = (0..pool.len())
            .filter(|&i| pool[i].category == cat && pool[i].key != req.anchor.key)
            .collect();
        if cands.is_empty() {
            warnings.push(format!("pool has no item of category {}; slot skipped", cat.0));
            continue;
        }
        cands.sort_by(|&a, &b| pool[a].key.cmp(&pool[b].key));
        slots.push((cat, cands));
    }
    Ok(Prepared {
        pool,
        embeddings,
        anchor,
        slots,
        warnings,
    })
}

impl Prepared<'_> {
    fn score(&self, model: &ModelBundle, req: &RecommendRequest<'_>, chosen: &[usize]) -> Result<f64> {
        let mut members = Vec::with_capacity(chosen.len() + 1);
        members.push(Member {
            category: req.anchor.category,
            embedding: &self.anchor,
        });
        for &i in chosen {
            members.push(Member {
                category: self.pool[i].category,
                embedding: &self.embeddings[i],
            });
        }
        model.score_members(&members, req.theme, req.mode)
    }

    fn finish(self, model: &ModelBundle, req: &RecommendRequest<'_>, picks: Vec<SlotPick>) -> Result<Recommendation> {
        let chosen: Vec<usize> = picks.iter().map(|p| p.chosen.item).collect();
        let score = if chosen.is_empty() {
            0.0
        } else {
            self.score(model, req, &chosen)?
        };
        let bias = model.bias_for(req.theme, req.mode)?;
        Ok(Recommendation {
            picks,
            score,
            probability: sigmoid(bias - score),
            warnings: self.warnings,
        })
    }
}

/// Fills the slots one at a time, each with the pool item that minimises the
/// score of the partial outfit built so far. Ties go to the smaller item key.
pub fn recommend_greedy(model: &ModelBundle, pool: &[Item], req: &RecommendRequest<'_>) -> Result<Recommendation> {
    let prep = prepare(model, pool, req)?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut picks = Vec::new();
    for (cat, cands) in &prep.slots {
        let mut scored: Vec<Candidate> = Vec::with_capacity(cands.len());
        for &c in cands {
            chosen.push(c);
            let score = prep.score(model, req, &chosen)?;
            chosen.pop();
            scored.push(Candidate { item: c, score });
        }
        // stable sort keeps key order among equal scores
        scored.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal));
        let best = scored.remove(0);
        chosen.push(best.item);
        scored.truncate(req.runner_ups);
        picks.push(SlotPick {
            category: *cat,
            chosen: best,
            runner_ups: scored,
        });
    }
    prep.finish(model, req, picks)
}

/// Steps the per-slot cursor like an odometer; false once it wraps around.
fn advance(cursor: &mut [usize], slots: &[(CategoryId, Vec<usize>)]) -> bool {
    for pos in (0..cursor.len()).rev() {
        cursor[pos] += 1;
        if cursor[pos] < slots[pos].1.len() {
            return true;
        }
        cursor[pos] = 0;
    }
    false
}

/// Largest number of slots [`recommend_exhaustive`] accepts.
pub const MAX_EXHAUSTIVE_SLOTS: usize = 3;

/// Scores every combination of one candidate per slot and returns the one
/// with the lowest full-outfit score, ties going to the lexicographically
/// smallest key sequence. Slot scores in the result are those of the
/// prefixes of the winning combination; no runner-ups are reported.
pub fn recommend_exhaustive(model: &ModelBundle, pool: &[Item], req: &RecommendRequest<'_>) -> Result<Recommendation> {
    let prep = prepare(model, pool, req)?;
    if prep.slots.len() > MAX_EXHAUSTIVE_SLOTS {
        return Err(Error::arg(format!(
            "exhaustive search supports at most {MAX_EXHAUSTIVE_SLOTS} slots, got {}",
            prep.slots.len()
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cursor = alloc::vec![0usize; prep.slots.len()];
    if !prep.slots.is_empty() {
        // candidates are key-sorted, so odometer order is lexicographic and
        // a strict comparison keeps the earliest tie
        loop {
            let combo: Vec<usize> = cursor.iter().zip(&prep.slots).map(|(&k, (_, c))| c[k]).collect();
            let s = prep.score(model, req, &combo)?;
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                best = Some((s, combo));
            }
            if !advance(&mut cursor, &prep.slots) {
                break;
            }
        }
    }
    let combo = best.map(|(_, c)| c).unwrap_or_default();
    let mut picks = Vec::new();
    for (k, (&item, (cat, _))) in combo.iter().zip(&prep.slots).enumerate() {
        picks.push(SlotPick {
            category: *cat,
            chosen: Candidate {
                item,
                score: prep.score(model, req, &combo[..=k])?,
            },
            runner_ups: Vec::new(),
        });
    }
    prep.finish(model, req, picks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::Projection;
    use crate::corpus::CategoryPair;
    use crate::subspace::MaskTable;
    use alloc::string::ToString;
    use alloc::vec;

    fn item(key: &str, cat: u32, x: f32) -> Item {
        Item {
            key: key.to_string(),
            category: CategoryId(cat),
            features: vec![x],
        }
    }

    fn model() -> ModelBundle {
        let proj = Projection::new(1, 1, vec![1.0], vec![0.0]).unwrap();
        let pairs = [(0, 1), (0, 2), (1, 2)].map(|(a, b)| CategoryPair::new(CategoryId(a), CategoryId(b)).unwrap());
        ModelBundle::new(proj, MaskTable::all_ones(1, pairs)).unwrap()
    }

    fn req<'a>(anchor: &'a Item, slots: &[u32]) -> RecommendRequest<'a> {
        RecommendRequest {
            anchor,
            slots: slots.iter().map(|&c| CategoryId(c)).collect(),
            theme: None,
            mode: ScoreMode::Baseline,
            runner_ups: 2,
        }
    }

    #[test]
    fn single_candidate_is_forced() {
        let anchor = item("a", 0, 0.0);
        let pool = vec![item("far", 1, 9.0)];
        let r = recommend_greedy(&model(), &pool, &req(&anchor, &[1])).unwrap();
        assert_eq!(r.items(), vec![0]);
        assert!(r.picks[0].runner_ups.is_empty());
    }

    #[test]
    fn greedy_picks_nearest_and_breaks_ties_by_key() {
        let anchor = item("a", 0, 0.0);
        let pool = vec![
            item("z", 1, 1.0),
            item("y", 1, -1.0),
            item("x", 1, 3.0),
            item("b", 2, 0.5),
        ];
        let r = recommend_greedy(&model(), &pool, &req(&anchor, &[1, 2])).unwrap();
        // "y" and "z" tie at distance 1; "y" sorts first
        assert_eq!(r.picks[0].chosen.item, 1);
        assert_eq!(r.picks[0].runner_ups.len(), 2);
        assert_eq!(r.picks[0].runner_ups[0].item, 0);
        assert_eq!(r.picks[1].chosen.item, 3);
    }

    #[test]
    fn empty_and_anchor_slots_are_skipped_with_warnings() {
        let anchor = item("a", 0, 0.0);
        let pool = vec![item("p", 1, 1.0)];
        let r = recommend_greedy(&model(), &pool, &req(&anchor, &[0, 2, 1])).unwrap();
        assert_eq!(r.items(), vec![0]);
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn exhaustive_matches_brute_force_and_limits_slots() {
        let anchor = item("a", 0, 0.0);
        let pool = vec![
            item("p", 1, 2.0),
            item("q", 1, -2.0),
            item("r", 2, 2.0),
            item("s", 2, -1.5),
        ];
        let m = model();
        let r = recommend_exhaustive(&m, &pool, &req(&anchor, &[1, 2])).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for a in [0, 1] {
            for b in [2, 3] {
                let y = recommend_greedy(&m, &[pool[a].clone(), pool[b].clone()], &req(&anchor, &[1, 2]))
                    .unwrap()
                    .score;
                if y < best.0 {
                    best = (y, vec![a, b]);
                }
            }
        }
        assert_eq!(r.items(), best.1);
        assert!((r.score - best.0).abs() < 1e-12);
        assert!(recommend_exhaustive(&m, &pool, &req(&anchor, &[1, 2, 3, 4])).is_ok());
    }
}
