//! The subcommands, independent of argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::json;
use themefit_core::attention::{fit_baseline_bias, train_attention};
use themefit_core::corpus::CorpusBuilder;
use themefit_core::metrics::{build_eval_samples, evaluate, EvalOptions};
use themefit_core::recommend::{recommend_exhaustive, recommend_greedy, Candidate, RecommendRequest};
use themefit_core::subspace::train_embedding;
use themefit_core::synth::{generate, SynthSpec};
use themefit_core::{CategoryPair, Corpus, ModelBundle, ScoreMode, ThemeId};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{
    load_corpus, qualified_theme, read_items, read_split, read_vocab, theme_label, write_corpus, write_json,
    write_jsonl, write_split, CorpusPaths,
};
use crate::report::{render_table, MethodReport, ReportFile};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn gen_synth(spec: &SynthSpec, out: &Path) -> Result<CorpusPaths> {
    let synth = generate(spec)?;
    let paths = write_corpus(&synth.corpus, out)?;
    info!("{}", synth.corpus.describe());
    Ok(paths)
}

/// Loads the configured corpus and assigns its split: the split file when
/// one is given, otherwise the configured fractions with the run seed.
pub fn load_run_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let corpus = load_corpus(&cfg.corpus_paths()?)?;
    let corpus = match &cfg.split {
        Some(path) => corpus.with_split_map(&read_split(path)?)?,
        None => corpus.make_split(cfg.split_fractions, cfg.seed)?,
    };
    let [tr, va, te] = corpus.split_sizes();
    info!("split: {tr} train, {va} val, {te} test outfits");
    Ok(corpus)
}

#[derive(Debug, Serialize)]
struct EmbeddingLine<'a> {
    phase: &'a str,
    epoch: usize,
    lr: f64,
    loss: f64,
    val_auc: Option<f64>,
    triplets: usize,
    skipped_triplets: usize,
}

#[derive(Debug, Serialize)]
struct AttentionLine<'a> {
    phase: &'a str,
    theme: String,
    epoch: usize,
    lr: f64,
    loss: f64,
    val_auc: Option<f64>,
}

pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub model: ModelBundle,
}

/// Trains the embedding, calibrates the baseline bias and (unless skipped)
/// trains theme attention. Writes `checkpoint.json`, `train_log.jsonl` and
/// the `split.json` used.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let corpus = load_run_corpus(cfg)?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_split(&corpus, &out.join("split.json"))?;

    let emb_cfg = cfg.embedding.train.to_core(cfg.seed);
    let (proj, masks, elog) = train_embedding(&corpus, &emb_cfg, cfg.embedding.n)?;
    info!(
        "embedding: best epoch {} of {}, {} validation pairs",
        elog.best_epoch,
        elog.epochs.len(),
        elog.validation_pairs
    );
    let mut model = ModelBundle::new(proj, masks)?;
    model.baseline_bias = fit_baseline_bias(&corpus, &model.projection, &model.masks, cfg.seed)?;

    let mut lines: Vec<serde_json::Value> = elog
        .epochs
        .iter()
        .map(|e| {
            json!(EmbeddingLine {
                phase: "embedding",
                epoch: e.epoch,
                lr: e.lr,
                loss: e.train_loss,
                val_auc: e.val_auc,
                triplets: e.triplets,
                skipped_triplets: e.skipped_triplets,
            })
        })
        .collect();

    if !cfg.skip_attention {
        let selection = cfg.attention.themes.resolve(&corpus)?;
        let att_cfg = cfg.attention.to_core(cfg.seed);
        let (att, alog) = train_attention(&corpus, &model.projection, &model.masks, &selection, &att_cfg)?;
        for w in &alog.warnings {
            warn!("{w}");
        }
        lines.extend(alog.epochs.iter().map(|e| {
            json!(AttentionLine {
                phase: "attention",
                theme: qualified_theme(corpus.theme(e.theme)),
                epoch: e.epoch,
                lr: e.lr,
                loss: e.train_loss,
                val_auc: e.val_auc,
            })
        }));
        model.attention = Some(att);
    }

    let checkpoint = cfg.checkpoint_path();
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    Checkpoint::from_model(&model, &corpus).save(&checkpoint)?;
    let log = out.join("train_log.jsonl");
    write_jsonl(&log, lines)?;
    info!("wrote {} and {}", checkpoint.display(), log.display());
    Ok(TrainOutcome { checkpoint, log, model })
}

fn load_model(cfg: &RunConfig, corpus: &Corpus) -> Result<ModelBundle> {
    Checkpoint::load(&cfg.checkpoint_path())?.into_model(corpus.categories(), corpus.themes())
}

/// Themes both modes are evaluated on: those the attention table covers,
/// or every theme when there is none.
fn eval_themes(model: &ModelBundle) -> Option<Vec<ThemeId>> {
    model.attention.as_ref().map(|a| a.themes().collect())
}

fn run_evaluation(cfg: &RunConfig, dump_samples: bool) -> Result<(ReportFile, Corpus)> {
    let corpus = load_run_corpus(cfg)?;
    let model = load_model(cfg, &corpus)?;
    let options = EvalOptions {
        repetitions: cfg.eval.repetitions,
        seed: cfg.seed,
        split: cfg.eval.split()?,
        themes: eval_themes(&model),
    };
    let mut modes = vec![ScoreMode::Baseline];
    if model.attention.is_some() {
        modes.push(ScoreMode::Theme);
    }
    let mut methods = Vec::new();
    for mode in modes {
        let scorer = model.scorer(&corpus, mode)?;
        let r = evaluate(&scorer, &corpus, &options)?;
        methods.push(MethodReport::new(mode.as_str(), &r));
    }
    if dump_samples {
        let out = cfg.out_dir();
        ensure_dir(&out)?;
        dump_eval_samples(&corpus, &options, &out.join("eval_samples.jsonl"))?;
    }
    let report = ReportFile {
        split: options.split.as_str().to_string(),
        repetitions: options.repetitions,
        seed: options.seed,
        methods,
    };
    Ok((report, corpus))
}

fn dump_eval_samples(corpus: &Corpus, options: &EvalOptions, path: &Path) -> Result<()> {
    let keys = |items: &[themefit_core::ItemId]| -> Vec<String> {
        items.iter().map(|&i| corpus.item(i).key.clone()).collect()
    };
    let mut lines = Vec::new();
    for rep in 0..options.repetitions {
        let s = build_eval_samples(corpus, options, rep)?;
        let mut questions = s.questions.iter().peekable();
        for (k, (inst, neg)) in s.instances.iter().zip(&s.negatives).enumerate() {
            let question = questions.next_if(|(qk, _)| *qk == k).map(|(_, q)| {
                json!({
                    "blank_slot": q.blank_slot,
                    "options": keys(&q.options),
                    "answer": q.answer,
                })
            });
            lines.push(json!({
                "repetition": rep,
                "outfit": corpus.outfits()[inst.outfit].id,
                "theme": theme_label(corpus, inst.theme),
                "negative": keys(&neg.items),
                "question": question,
            }));
        }
    }
    write_jsonl(path, lines)
}

/// Evaluates every available mode and writes `report.json` and
/// `report.txt` into the output directory.
pub fn eval(cfg: &RunConfig, dump_samples: bool) -> Result<ReportFile> {
    let (report, _) = run_evaluation(cfg, dump_samples)?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_json(&out.join("report.json"), &report)?;
    let table = render_table(&report);
    fs::write(out.join("report.txt"), &table).map_err(|e| CliError::write(&out.join("report.txt"), e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitbLine {
    pub method: String,
    pub fitb_mean: f64,
    pub fitb_std: f64,
    pub questions: usize,
    pub fitb_runs: Vec<f64>,
}

/// Fill-in-the-blank accuracy only; writes `fitb.json`.
pub fn fitb(cfg: &RunConfig, dump_samples: bool) -> Result<Vec<FitbLine>> {
    let (report, _) = run_evaluation(cfg, dump_samples)?;
    let lines: Vec<FitbLine> = report
        .methods
        .iter()
        .map(|m| FitbLine {
            method: m.method.clone(),
            fitb_mean: m.overall.fitb_mean,
            fitb_std: m.overall.fitb_std,
            questions: m.overall.questions,
            fitb_runs: m.fitb_runs.clone(),
        })
        .collect();
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_json(&out.join("fitb.json"), &lines)?;
    Ok(lines)
}

#[derive(Debug, Clone)]
pub struct RecommendArgs {
    pub checkpoint: PathBuf,
    pub vocab: PathBuf,
    pub pool: PathBuf,
    pub anchor: String,
    pub theme: Option<String>,
    /// Category names.
    pub slots: Vec<String>,
    /// `None` picks theme attention when a theme is given and the
    /// checkpoint has it, the baseline otherwise.
    pub mode: Option<ScoreMode>,
    pub runner_ups: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredItem {
    pub item: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutput {
    pub category: String,
    pub item: String,
    pub score: f64,
    pub runner_ups: Vec<ScoredItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendOutput {
    pub anchor: String,
    pub theme: Option<String>,
    pub mode: String,
    pub search: String,
    /// Anchor first, then one item per filled slot.
    pub outfit: Vec<String>,
    pub slots: Vec<SlotOutput>,
    pub score: f64,
    pub probability: f64,
    pub warnings: Vec<String>,
}

pub fn recommend(args: &RecommendArgs) -> Result<RecommendOutput> {
    let (categories, themes) = read_vocab(&args.vocab)?;
    let lookup = CorpusBuilder::new(categories.clone(), themes.clone()).map_err(|e| CliError::Data(e.to_string()))?;
    let model = Checkpoint::load(&args.checkpoint)?.into_model(&categories, &themes)?;
    let pool = read_items(&args.pool, &categories)?;
    if pool.first().is_some_and(|i| i.features.len() != model.projection.d()) {
        return Err(CliError::Data(format!(
            "pool features have length {}, the checkpoint expects {}",
            pool[0].features.len(),
            model.projection.d()
        )));
    }
    let anchor = pool
        .iter()
        .find(|i| i.key == args.anchor)
        .ok_or_else(|| CliError::Usage(format!("anchor item '{}' is not in the pool", args.anchor)))?;
    let theme = match &args.theme {
        Some(name) => Some(
            lookup
                .theme_by_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown or ambiguous theme '{name}'")))?,
        ),
        None => None,
    };
    let mode = args.mode.unwrap_or(match (theme, &model.attention) {
        (Some(t), Some(att)) if att.has_theme(t) => ScoreMode::Theme,
        _ => ScoreMode::Baseline,
    });
    let slots = args
        .slots
        .iter()
        .map(|s| {
            lookup
                .category_by_name(s)
                .ok_or_else(|| CliError::Usage(format!("unknown category '{s}'")))
        })
        .collect::<Result<_>>()?;
    let req = RecommendRequest {
        anchor,
        slots,
        theme,
        mode,
        runner_ups: args.runner_ups,
    };
    let rec = if args.exhaustive {
        recommend_exhaustive(&model, &pool, &req)?
    } else {
        recommend_greedy(&model, &pool, &req)?
    };
    for w in &rec.warnings {
        warn!("{w}");
    }
    let scored = |c: &Candidate| ScoredItem {
        item: pool[c.item].key.clone(),
        score: c.score,
    };
    let mut outfit = vec![anchor.key.clone()];
    outfit.extend(rec.picks.iter().map(|p| pool[p.chosen.item].key.clone()));
    Ok(RecommendOutput {
        anchor: anchor.key.clone(),
        theme: theme.map(|t| qualified_theme(&themes[t.index()])),
        mode: mode.as_str().to_string(),
        search: if args.exhaustive { "exhaustive" } else { "greedy" }.to_string(),
        outfit,
        slots: rec
            .picks
            .iter()
            .map(|p| SlotOutput {
                category: categories[p.category.index()].name.clone(),
                item: pool[p.chosen.item].key.clone(),
                score: p.chosen.score,
                runner_ups: p.runner_ups.iter().map(scored).collect(),
            })
            .collect(),
        score: rec.score,
        probability: rec.probability,
        warnings: rec.warnings,
    })
}

/// Parses `0:1,2:3;0:2,1:3` into one pair list per theme.
pub fn parse_theme_pairs(s: &str) -> Result<Vec<Vec<CategoryPair>>> {
    s.split(';')
        .map(|theme| {
            theme
                .split(',')
                .map(|p| {
                    let (a, b) = p
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| CliError::Usage(format!("bad category pair '{p}', expected u:v")))?;
                    let parse = |x: &str| {
                        x.trim()
                            .parse::<u32>()
                            .map_err(|_| CliError::Usage(format!("bad category id '{x}' in '{p}'")))
                    };
                    CategoryPair::new(
                        themefit_core::CategoryId(parse(a)?),
                        themefit_core::CategoryId(parse(b)?),
                    )
                    .ok_or_else(|| CliError::Usage(format!("pair '{p}' joins a category with itself")))
                })
                .collect()
        })
        .collect()
}

/// Every pair inside each of `themes` contiguous blocks of categories.
pub fn block_theme_pairs(categories: usize, themes: usize) -> Result<Vec<Vec<CategoryPair>>> {
    let size = categories.checked_div(themes).unwrap_or(0);
    if size < 2 {
        return Err(CliError::Usage(format!(
            "{categories} categories cannot give {themes} themes a block of two; pass --theme-pairs"
        )));
    }
    Ok((0..themes)
        .map(|t| {
            let lo = (t * size) as u32;
            let hi = lo + size as u32;
            let mut v = Vec::new();
            for a in lo..hi {
                for b in a + 1..hi {
                    v.push(
                        CategoryPair::new(themefit_core::CategoryId(a), themefit_core::CategoryId(b)).expect("a < b"),
                    );
                }
            }
            v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theme_pair_syntax() {
        let m = parse_theme_pairs("0:1,2:3;1:0").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1][0].key(), "0:1");
        assert!(parse_theme_pairs("0-1").is_err());
        assert!(parse_theme_pairs("2:2").is_err());
    }

    #[test]
    fn block_pairs_match_default_layout() {
        let m = block_theme_pairs(8, 2).unwrap();
        assert_eq!(m, SynthSpec::default().theme_pair_map);
        assert!(block_theme_pairs(3, 2).is_err());
    }
}
