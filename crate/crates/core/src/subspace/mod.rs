//! Category-pair masked distance and the conditional triplet loss.
//!
//! Every unordered category pair `(u, v)` owns a gate vector `m` of the
//! embedding's length; the distance between an item of `u` and an item of
//! `v` is `|| m ⊙ (f(a) - f(b)) ||²`. Pairs without a stored gate use the
//! table's default (all ones unless trained otherwise).

pub(crate) mod train;

pub use train::{train_embedding, EmbeddingEpoch, EmbeddingTrainLog};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::backbone::{Projection, ProjectionGrad};
use crate::corpus::{CategoryPair, Item};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaskTable {
    n: usize,
    masks: BTreeMap<CategoryPair, Vec<f32>>,
    default_mask: Vec<f32>,
}

impl MaskTable {
    /// Empty table whose default gate is all ones.
    pub fn new(n: usize) -> Self {
        MaskTable {
            n,
            masks: BTreeMap::new(),
            default_mask: vec![1.0; n],
        }
    }

    /// One all-ones gate per listed pair.
    pub fn all_ones(n: usize, pairs: impl IntoIterator<Item = CategoryPair>) -> Self {
        let mut t = Self::new(n);
        for p in pairs {
            t.masks.insert(p, vec![1.0; n]);
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set_default(&mut self, mask: Vec<f32>) -> Result<()> {
        self.check(&mask)?;
        self.default_mask = mask;
        Ok(())
    }

    pub fn insert(&mut self, pair: CategoryPair, mask: Vec<f32>) -> Result<()> {
        self.check(&mask)?;
        self.masks.insert(pair, mask);
        Ok(())
    }

    fn check(&self, mask: &[f32]) -> Result<()> {
        if mask.len() != self.n {
            return Err(Error::arg(format!(
                "mask has length {}, expected {}",
                mask.len(),
                self.n
            )));
        }
        if mask.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("mask entries must be finite"));
        }
        Ok(())
    }

    /// Gate for `pair`, falling back to the default.
    pub fn mask(&self, pair: CategoryPair) -> &[f32] {
        self.masks.get(&pair).unwrap_or(&self.default_mask)
    }

    pub fn mask_mut(&mut self, pair: CategoryPair) -> Option<&mut [f32]> {
        self.masks.get_mut(&pair).map(Vec::as_mut_slice)
    }

    pub fn default_mask(&self) -> &[f32] {
        &self.default_mask
    }

    pub fn contains(&self, pair: CategoryPair) -> bool {
        self.masks.contains_key(&pair)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CategoryPair, &[f32])> {
        self.masks.iter().map(|(p, m)| (*p, m.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// `Σ_i (m_i (a_i - b_i))²`.
pub fn masked_sq_distance(mask: &[f32], a: &[f64], b: &[f64]) -> f64 {
    mask.iter()
        .zip(a.iter().zip(b))
        .map(|(&m, (&x, &y))| {
            let t = m as f64 * (x - y);
            t * t
        })
        .sum()
}

fn pair_of(a: &Item, b: &Item) -> Result<CategoryPair> {
    CategoryPair::new(a.category, b.category).ok_or_else(|| {
        Error::arg(format!(
            "items '{}' and '{}' share category {}; no intra-category gate exists",
            a.key, b.key, a.category.0
        ))
    })
}

/// Squared distance of two items of different categories in their pair's subspace.
pub fn masked_distance(proj: &Projection, masks: &MaskTable, a: &Item, b: &Item) -> Result<f64> {
    let pair = pair_of(a, b)?;
    check_dims(proj, masks)?;
    let ea = proj.embed(&a.features)?;
    let eb = proj.embed(&b.features)?;
    Ok(masked_sq_distance(masks.mask(pair), &ea.values, &eb.values))
}

fn check_dims(proj: &Projection, masks: &MaskTable) -> Result<()> {
    if proj.n() != masks.n() {
        return Err(Error::arg(format!(
            "projection emits {} dims but masks have {}",
            proj.n(),
            masks.n()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct Triplet<'a> {
    pub anchor: &'a Item,
    pub positive: &'a Item,
    pub negative: &'a Item,
}

impl<'a> Triplet<'a> {
    pub fn new(anchor: &'a Item, positive: &'a Item, negative: &'a Item) -> Result<Self> {
        if positive.category != negative.category {
            return Err(Error::arg("positive and negative must share a category"));
        }
        if anchor.category == positive.category {
            return Err(Error::arg("anchor and positive must differ in category"));
        }
        Ok(Triplet {
            anchor,
            positive,
            negative,
        })
    }

    pub fn pair(&self) -> CategoryPair {
        CategoryPair::new(self.anchor.category, self.positive.category).expect("checked in Triplet::new")
    }
}

/// `max(0, d(anchor, positive) - d(anchor, negative) + margin)`.
pub fn triplet_loss(proj: &Projection, masks: &MaskTable, t: &Triplet<'_>, margin: f64) -> Result<f64> {
    check_dims(proj, masks)?;
    let mask = masks.mask(t.pair());
    let ea = proj.embed(&t.anchor.features)?;
    let ep = proj.embed(&t.positive.features)?;
    let en = proj.embed(&t.negative.features)?;
    let d_pos = masked_sq_distance(mask, &ea.values, &ep.values);
    let d_neg = masked_sq_distance(mask, &ea.values, &en.values);
    Ok((d_pos - d_neg + margin).max(0.0))
}

/// Gradient of one triplet's hinge loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub projection: ProjectionGrad,
    pub pair: CategoryPair,
    pub mask: Vec<f64>,
}

/// Accumulated gradient over a batch of triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrad {
    pub projection: ProjectionGrad,
    pub masks: BTreeMap<CategoryPair, Vec<f64>>,
}

impl EmbeddingGrad {
    pub fn zeros(proj: &Projection) -> Self {
        EmbeddingGrad {
            projection: ProjectionGrad::zeros(proj.n(), proj.d()),
            masks: BTreeMap::new(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.projection.scale(s);
        for g in self.masks.values_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Analytic gradient of [`triplet_loss`] with respect to the projection and
/// the pair's gate. Zero when the hinge is inactive or exactly at its kink.
pub fn triplet_grad(proj: &Projection, masks: &MaskTable, t: &Triplet<'_>, margin: f64) -> Result<TripletGrad> {
    let mut acc = EmbeddingGrad::zeros(proj);
    let loss = accumulate_triplet_grad(proj, masks, t, margin, &mut acc)?;
    let pair = t.pair();
    let mask = acc.masks.remove(&pair).unwrap_or_else(|| vec![0.0; proj.n()]);
    Ok(TripletGrad {
        loss,
        projection: acc.projection,
        pair,
        mask,
    })
}

/// Adds one triplet's gradient into `acc` and returns its loss.
pub fn accumulate_triplet_grad(
    proj: &Projection,
    masks: &MaskTable,
    t: &Triplet<'_>,
    margin: f64,
    acc: &mut EmbeddingGrad,
) -> Result<f64> {
    check_dims(proj, masks)?;
    let pair = t.pair();
    let mask = masks.mask(pair);
    let ea = proj.embed(&t.anchor.features)?.values;
    let ep = proj.embed(&t.positive.features)?.values;
    let en = proj.embed(&t.negative.features)?.values;
    let d_pos = masked_sq_distance(mask, &ea, &ep);
    let d_neg = masked_sq_distance(mask, &ea, &en);
    let raw = d_pos - d_neg + margin;
    if raw <= 0.0 {
        return Ok(0.0);
    }
    let n = proj.n();
    let mut up_a = vec![0.0; n];
    let mut up_p = vec![0.0; n];
    let mut up_n = vec![0.0; n];
    let gm = acc.masks.entry(pair).or_insert_with(|| vec![0.0; n]);
    for i in 0..n {
        let m = mask[i] as f64;
        let dp = ea[i] - ep[i];
        let dn = ea[i] - en[i];
        let m2 = m * m;
        // d_pos = Σ m² dp², d_neg = Σ m² dn²
        up_a[i] = 2.0 * m2 * (dp - dn);
        up_p[i] = -2.0 * m2 * dp;
        up_n[i] = 2.0 * m2 * dn;
        gm[i] += 2.0 * m * (dp * dp - dn * dn);
    }
    proj.accumulate_grad(&mut acc.projection, &t.anchor.features, &up_a)?;
    proj.accumulate_grad(&mut acc.projection, &t.positive.features, &up_p)?;
    proj.accumulate_grad(&mut acc.projection, &t.negative.features, &up_n)?;
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CategoryId;
    use alloc::string::ToString;

    fn item(key: &str, cat: u32, f: &[f32]) -> Item {
        Item {
            key: key.to_string(),
            category: CategoryId(cat),
            features: f.to_vec(),
        }
    }

    fn identity(n: usize) -> Projection {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Projection::new(n, n, w, vec![0.0; n]).unwrap()
    }

    fn pair(a: u32, b: u32) -> CategoryPair {
        CategoryPair::new(CategoryId(a), CategoryId(b)).unwrap()
    }

    #[test]
    fn distance_examples() {
        let p = identity(2);
        let mut m = MaskTable::new(2);
        m.insert(pair(0, 1), vec![1.0, 0.0]).unwrap();
        let a = item("a", 0, &[1.0, 0.0]);
        let b = item("b", 1, &[0.0, 1.0]);
        assert_eq!(masked_distance(&p, &m, &a, &b).unwrap(), 1.0);
        let same = item("c", 1, &[1.0, 0.0]);
        assert_eq!(masked_distance(&p, &m, &a, &same).unwrap(), 0.0);

        let p = identity(3);
        let mut m = MaskTable::new(3);
        m.insert(pair(2, 5), vec![0.5, 2.0, 1.0]).unwrap();
        let a = item("a", 5, &[2.0, -1.0, 3.0]);
        let b = item("b", 2, &[0.0, 1.0, 3.0]);
        assert_eq!(masked_distance(&p, &m, &a, &b).unwrap(), 17.0);
        assert_eq!(masked_distance(&p, &m, &b, &a).unwrap(), 17.0);
    }

    #[test]
    fn same_category_is_an_error() {
        let p = identity(1);
        let m = MaskTable::new(1);
        let err = masked_distance(&p, &m, &item("a", 3, &[1.0]), &item("b", 3, &[2.0])).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn unseen_pairs_use_default_gate() {
        let p = identity(2);
        let m = MaskTable::all_ones(2, [pair(0, 1)]);
        let a = item("a", 4, &[1.0, 2.0]);
        let b = item("b", 7, &[0.0, 0.0]);
        assert_eq!(masked_distance(&p, &m, &a, &b).unwrap(), 5.0);
    }

    #[test]
    fn loss_examples() {
        let p = identity(1);
        let m = MaskTable::new(1);
        let a = item("a", 0, &[0.0]);
        let pos = item("p", 1, &[0.3]);
        let t = Triplet::new(&a, &pos, &pos).unwrap();
        assert!((triplet_loss(&p, &m, &t, 0.2).unwrap() - 0.2).abs() < 1e-12);

        // sqrt distances chosen so that d_pos, d_neg hit the stated values
        let pos = item("p", 1, &[libm::sqrtf(0.2)]);
        let neg = item("n", 1, &[libm::sqrtf(0.5)]);
        let t = Triplet::new(&a, &pos, &neg).unwrap();
        assert_eq!(triplet_loss(&p, &m, &t, 0.2).unwrap(), 0.0);

        let pos = item("p", 1, &[libm::sqrtf(0.9)]);
        let neg = item("n", 1, &[libm::sqrtf(0.1)]);
        let t = Triplet::new(&a, &pos, &neg).unwrap();
        assert!((triplet_loss(&p, &m, &t, 0.2).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn triplet_invariants() {
        let a = item("a", 0, &[0.0]);
        let b = item("b", 1, &[0.0]);
        let c = item("c", 2, &[0.0]);
        assert!(Triplet::new(&a, &b, &c).is_err());
        assert!(Triplet::new(&a, &a, &a).is_err());
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        let p = identity(2);
        let m = MaskTable::all_ones(2, [pair(0, 1)]);
        let a = item("a", 0, &[0.0, 0.0]);
        let pos = item("p", 1, &[0.1, 0.0]);
        let neg = item("n", 1, &[3.0, 0.0]);
        let g = triplet_grad(&p, &m, &Triplet::new(&a, &pos, &neg).unwrap(), 0.2).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g
            .projection
            .weight
            .iter()
            .chain(&g.projection.bias)
            .chain(&g.mask)
            .all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_the_gate_quadruples_distances() {
        let p = Projection::init(3, 3, 4).unwrap();
        let mut m = MaskTable::all_ones(3, [pair(0, 1)]);
        let a = item("a", 0, &[0.2, -0.4, 1.0]);
        let pos = item("p", 1, &[0.5, 0.1, 0.3]);
        let neg = item("n", 1, &[-0.3, 0.9, 0.0]);
        let t = Triplet::new(&a, &pos, &neg).unwrap();
        let dp = masked_distance(&p, &m, &a, &pos).unwrap();
        let dn = masked_distance(&p, &m, &a, &neg).unwrap();
        m.insert(pair(0, 1), vec![2.0; 3]).unwrap();
        assert!((masked_distance(&p, &m, &a, &pos).unwrap() - 4.0 * dp).abs() < 1e-9);
        let expected = (4.0 * dp - 4.0 * dn + 0.2).max(0.0);
        assert!((triplet_loss(&p, &m, &t, 0.2).unwrap() - expected).abs() < 1e-9);
    }
}
