//! ROC-AUC, fill-in-the-blank accuracy and the repeated-resampling
//! evaluation protocol.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Outfit, Split, ThemeId};
use crate::error::{Error, Result};
use crate::math::{mean, sample_std};
use crate::model::OutfitScorer;
use crate::rng::{derive_seed, purpose};
use crate::sampler::{FitbQuestion, SamplerState};

/// Exact ROC-AUC via the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs where the positive scores higher, with ties
/// counting one half. Sorts once and assigns mid-ranks to tie groups.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::arg("AUC needs at least one positive and one negative score"));
    }
    if pos.iter().chain(neg).any(|s| !s.is_finite()) {
        return Err(Error::arg("AUC scores must be finite"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of (doubled) ranks of the positives; doubling keeps mid-ranks integral.
    let mut rank2_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j, doubled mid-rank = i + 1 + j
        let mid2 = (i + 1 + j) as u128;
        let n_pos = all[i..j].iter().filter(|x| x.1).count() as u128;
        rank2_sum += mid2 * n_pos;
        i = j;
    }
    let m = pos.len() as u128;
    let n = neg.len() as u128;
    // 2U = 2R - m(m+1)
    let u2 = rank2_sum - m * (m + 1);
    Ok(u2 as f64 / (2 * m * n) as f64)
}

/// A question together with the theme it is asked under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemedQuestion {
    pub question: FitbQuestion,
    pub theme: Option<ThemeId>,
}

/// Index of the option whose filled outfit has the lowest raw score; the
/// first such option wins ties.
pub fn fitb_choice(scorer: &impl OutfitScorer, q: &FitbQuestion, theme: Option<ThemeId>) -> Result<usize> {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for k in 0..4 {
        let s = scorer.score(&q.filled(k), theme)?;
        if s < best_score {
            best = k;
            best_score = s;
        }
    }
    Ok(best)
}

pub fn fitb_accuracy(scorer: &impl OutfitScorer, questions: &[ThemedQuestion]) -> Result<f64> {
    if questions.is_empty() {
        return Err(Error::arg("no FITB questions"));
    }
    let mut correct = 0usize;
    for q in questions {
        if fitb_choice(scorer, &q.question, q.theme)? == q.question.answer {
            correct += 1;
        }
    }
    Ok(correct as f64 / questions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub repetitions: usize,
    pub seed: u64,
    pub split: Split,
    /// Restrict evaluation to these themes; `None` evaluates every theme.
    pub themes: Option<Vec<ThemeId>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            repetitions: 5,
            seed: 0,
            split: Split::Test,
            themes: None,
        }
    }
}

/// One evaluated (outfit, theme) combination. An outfit tagged with several
/// themes yields one instance per theme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub outfit: usize,
    pub theme: ThemeId,
}

pub fn eval_instances(corpus: &Corpus, options: &EvalOptions) -> Vec<Instance> {
    let mut out = Vec::new();
    for o in corpus.outfits_in(options.split) {
        for &theme in &corpus.outfits()[o].themes {
            if options.themes.as_ref().is_none_or(|ts| ts.contains(&theme)) {
                out.push(Instance { outfit: o, theme });
            }
        }
    }
    out
}

/// Negatives and questions of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSamples {
    pub instances: Vec<Instance>,
    /// One substitution negative per instance, aligned with `instances`.
    pub negatives: Vec<Outfit>,
    /// `(instance index, question)`; instances whose question had to be
    /// skipped are absent.
    pub questions: Vec<(usize, FitbQuestion)>,
    pub skipped_questions: usize,
}

pub fn build_eval_samples(corpus: &Corpus, options: &EvalOptions, repetition: usize) -> Result<EvalSamples> {
    let instances = eval_instances(corpus, options);
    let rep = repetition as u64;
    let mut neg_sampler =
        SamplerState::for_split(corpus, options.split, derive_seed(options.seed, &[purpose::EVAL, rep]));
    let mut q_sampler =
        SamplerState::for_split(corpus, options.split, derive_seed(options.seed, &[purpose::FITB, rep]));
    let mut negatives = Vec::with_capacity(instances.len());
    let mut questions = Vec::new();
    let mut skipped_questions = 0;
    for (k, inst) in instances.iter().enumerate() {
        negatives.push(neg_sampler.sample_negative_outfit(corpus, &corpus.outfits()[inst.outfit])?);
        match q_sampler.make_fitb_question(corpus, inst.outfit)? {
            Some(q) => questions.push((k, q)),
            None => skipped_questions += 1,
        }
    }
    Ok(EvalSamples {
        instances,
        negatives,
        questions,
        skipped_questions,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalSummary {
    pub auc_mean: f64,
    pub auc_std: f64,
    pub fitb_mean: f64,
    pub fitb_std: f64,
    /// Totals over all repetitions.
    pub positives: usize,
    pub negatives: usize,
    pub questions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub repetitions: usize,
    pub overall: EvalSummary,
    /// Keyed by `group/name`.
    pub per_theme: BTreeMap<String, EvalSummary>,
    pub per_group: BTreeMap<String, EvalSummary>,
    pub auc_runs: Vec<f64>,
    pub fitb_runs: Vec<f64>,
}

#[derive(Default)]
struct Accumulator {
    aucs: Vec<f64>,
    fitbs: Vec<f64>,
    positives: usize,
    negatives: usize,
    questions: usize,
}

#[derive(Default)]
struct RepScores {
    pos: Vec<f64>,
    neg: Vec<f64>,
    correct: usize,
    asked: usize,
}

impl Accumulator {
    fn push(&mut self, r: &RepScores) -> Result<()> {
        if !r.pos.is_empty() {
            self.aucs.push(auc(&r.pos, &r.neg)?);
        }
        if r.asked > 0 {
            self.fitbs.push(r.correct as f64 / r.asked as f64);
        }
        self.positives += r.pos.len();
        self.negatives += r.neg.len();
        self.questions += r.asked;
        Ok(())
    }

    fn summary(&self) -> EvalSummary {
        EvalSummary {
            auc_mean: mean(&self.aucs),
            auc_std: sample_std(&self.aucs),
            fitb_mean: mean(&self.fitbs),
            fitb_std: sample_std(&self.fitbs),
            positives: self.positives,
            negatives: self.negatives,
            questions: self.questions,
        }
    }
}

/// Scores the split's positives against freshly sampled substitution
/// negatives (1:1) and answers one FITB question per instance, once per
/// repetition; reports mean and sample standard deviation. Ranking uses the
/// scorer's logits, so different themes are compared on a calibrated scale.
pub fn evaluate(scorer: &impl OutfitScorer, corpus: &Corpus, options: &EvalOptions) -> Result<EvalReport> {
    if options.repetitions == 0 {
        return Err(Error::arg("repetitions must be positive"));
    }
    if eval_instances(corpus, options).is_empty() {
        return Err(Error::config(format!(
            "no outfits to evaluate in the {} split",
            options.split.as_str()
        )));
    }
    let mut overall = Accumulator::default();
    let mut per_theme: BTreeMap<ThemeId, Accumulator> = BTreeMap::new();
    let mut per_group: BTreeMap<&'static str, Accumulator> = BTreeMap::new();
    let mut auc_runs = Vec::new();
    let mut fitb_runs = Vec::new();
    for r in 0..options.repetitions {
        let samples = build_eval_samples(corpus, options, r)?;
        let mut all = RepScores::default();
        let mut by_theme: BTreeMap<ThemeId, RepScores> = BTreeMap::new();
        let mut by_group: BTreeMap<&'static str, RepScores> = BTreeMap::new();
        for (inst, neg) in samples.instances.iter().zip(&samples.negatives) {
            let theme = Some(inst.theme);
            let p = scorer.logit(&corpus.outfits()[inst.outfit].items, theme)?;
            let n = scorer.logit(&neg.items, theme)?;
            let group = corpus.theme(inst.theme).group.as_str();
            for acc in [
                &mut all,
                by_theme.entry(inst.theme).or_default(),
                by_group.entry(group).or_default(),
            ] {
                acc.pos.push(p);
                acc.neg.push(n);
            }
        }
        for (k, q) in &samples.questions {
            let theme = samples.instances[*k].theme;
            let hit = fitb_choice(scorer, q, Some(theme))? == q.answer;
            let group = corpus.theme(theme).group.as_str();
            for acc in [
                &mut all,
                by_theme.entry(theme).or_default(),
                by_group.entry(group).or_default(),
            ] {
                acc.asked += 1;
                acc.correct += usize::from(hit);
            }
        }
        overall.push(&all)?;
        auc_runs.push(*overall.aucs.last().expect("instances are non-empty"));
        fitb_runs.push(overall.fitbs.last().copied().unwrap_or(0.0));
        for (t, s) in &by_theme {
            per_theme.entry(*t).or_default().push(s)?;
        }
        for (g, s) in &by_group {
            per_group.entry(g).or_default().push(s)?;
        }
    }

    Ok(EvalReport {
        repetitions: options.repetitions,
        overall: overall.summary(),
        per_theme: per_theme
            .iter()
            .map(|(t, a)| {
                let th = corpus.theme(*t);
                (format!("{}/{}", th.group, th.name), a.summary())
            })
            .collect(),
        per_group: per_group.iter().map(|(g, a)| (String::from(*g), a.summary())).collect(),
        auc_runs,
        fitb_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(pos: &[f64], neg: &[f64]) -> f64 {
        let mut wins2 = 0u64;
        for &p in pos {
            for &n in neg {
                wins2 += if p > n {
                    2
                } else if p == n {
                    1
                } else {
                    0
                };
            }
        }
        wins2 as f64 / (2 * pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.7, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.8, 0.4], &[0.6, 0.2]).unwrap(), 0.75);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2], &[0.8, 0.9]).unwrap(), 0.0);
        assert!(auc(&[], &[1.0]).is_err());
        assert!(auc(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn auc_with_ties_matches_brute_force() {
        let pos = [1.0, 2.0, 2.0, 3.0, 5.0];
        let neg = [2.0, 2.0, 0.0, 5.0];
        assert_eq!(auc(&pos, &neg).unwrap(), brute(&pos, &neg));
    }

    #[test]
    fn auc_complement() {
        let pos = [0.3, 0.3, 0.9, 0.1];
        let neg = [0.3, 0.5, 0.05];
        let a = auc(&pos, &neg).unwrap() + auc(&neg, &pos).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
    }
}
