use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use themefit::commands::{self, block_theme_pairs, parse_theme_pairs, RecommendArgs};
use themefit::config::RunConfig;
use themefit::report::render_table;
use themefit::{CliError, Result};
use themefit_core::synth::SynthSpec;
use themefit_core::ScoreMode;

#[derive(Parser)]
#[command(
    name = "themefit",
    version,
    about = "Theme-aware outfit compatibility: train, evaluate, recommend"
)]
struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(short, long, global = true)]
    verbose: bool,

    /// Also write the sampled evaluation negatives and questions
    #[arg(long, global = true)]
    dump_samples: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted structure
    GenSynth(SynthArgs),
    /// Train the embedding and theme attention; writes a checkpoint and log
    Train(TrainArgs),
    /// Compatibility AUC and FITB accuracy, baseline and theme attention
    Eval(EvalArgs),
    /// FITB accuracy only
    Fitb(EvalArgs),
    /// Complete an outfit around an anchor item from a pool
    Recommend(RecommendCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    ThemeContrast,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[arg(long)]
    num_categories: Option<usize>,
    #[arg(long)]
    num_themes: Option<usize>,
    #[arg(long)]
    num_outfits: Option<usize>,
    #[arg(long)]
    items_per_outfit: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Planted pairs per theme, e.g. `0:1,2:3;0:2,1:3`
    #[arg(long)]
    theme_pairs: Option<String>,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding items.jsonl, outfits.jsonl and vocab.json
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    items: Option<PathBuf>,
    #[arg(long)]
    outfits: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// split.json assigning every outfit to train, val or test
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Epochs for both training phases
    #[arg(long)]
    epochs: Option<usize>,
    /// Embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    skip_attention: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Baseline,
    Theme,
}

#[derive(Args)]
struct RecommendCmd {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Candidate items, in items.jsonl format; must contain the anchor
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    anchor: String,
    #[arg(long)]
    theme: Option<String>,
    /// Category names to fill, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    slots: Vec<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 3)]
    runner_ups: usize,
    /// Brute force over all combinations (at most 3 slots)
    #[arg(long)]
    exhaustive: bool,
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(dir) = &d.data {
        cfg.set_data_dir(dir);
    }
    for (slot, flag) in [
        (&mut cfg.items, &d.items),
        (&mut cfg.outfits, &d.outfits),
        (&mut cfg.vocab, &d.vocab),
        (&mut cfg.split, &d.split),
        (&mut cfg.checkpoint, &d.checkpoint),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
}

fn synth_spec(a: &SynthArgs, seed: u64) -> Result<SynthSpec> {
    let mut spec = match a.preset {
        Preset::Default => SynthSpec::default(),
        Preset::ThemeContrast => SynthSpec::theme_contrast(),
    };
    let reshaped = a.num_categories.is_some_and(|c| c != spec.num_categories)
        || a.num_themes.is_some_and(|t| t != spec.num_themes);
    spec.num_categories = a.num_categories.unwrap_or(spec.num_categories);
    spec.num_themes = a.num_themes.unwrap_or(spec.num_themes);
    spec.num_outfits = a.num_outfits.unwrap_or(spec.num_outfits);
    spec.items_per_outfit = a.items_per_outfit.unwrap_or(spec.items_per_outfit);
    spec.feature_dim = a.feature_dim.unwrap_or(spec.feature_dim);
    spec.latent_dim = a.latent_dim.unwrap_or(spec.latent_dim);
    spec.noise_sigma = a.noise_sigma.unwrap_or(spec.noise_sigma);
    spec.seed = seed;
    if let Some(p) = &a.theme_pairs {
        spec.theme_pair_map = parse_theme_pairs(p)?;
    } else if reshaped {
        spec.theme_pair_map = block_theme_pairs(spec.num_categories, spec.num_themes)?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match &cli.command {
        Command::GenSynth(a) => {
            let spec = synth_spec(a, cfg.seed)?;
            let out = cli
                .out
                .clone()
                .ok_or_else(|| CliError::Usage("gen-synth needs --out DIR".into()))?;
            let paths = commands::gen_synth(&spec, &out)?;
            println!(
                "wrote {}, {}, {}",
                paths.items.display(),
                paths.outfits.display(),
                paths.vocab.display()
            );
        }
        Command::Train(a) => {
            apply_data(&mut cfg, &a.data);
            if let Some(e) = a.epochs {
                cfg.embedding.train.epochs = e;
                cfg.attention.train.epochs = e;
            }
            if let Some(n) = a.dim {
                cfg.embedding.n = n;
            }
            cfg.skip_attention |= a.skip_attention;
            let t = commands::train(&cfg)?;
            println!("wrote {} and {}", t.checkpoint.display(), t.log.display());
        }
        Command::Eval(a) | Command::Fitb(a) => {
            apply_data(&mut cfg, &a.data);
            if let Some(r) = a.repetitions {
                cfg.eval.repetitions = r;
            }
            if matches!(cli.command, Command::Eval(_)) {
                let report = commands::eval(&cfg, cli.dump_samples)?;
                print!("{}", render_table(&report));
            } else {
                for l in commands::fitb(&cfg, cli.dump_samples)? {
                    println!(
                        "{:<16} FITB {:.2} ± {:.2} % over {} questions",
                        l.method,
                        100.0 * l.fitb_mean,
                        100.0 * l.fitb_std,
                        l.questions
                    );
                }
            }
        }
        Command::Recommend(a) => {
            let need = |p: &Option<PathBuf>, fallback: Option<PathBuf>, what: &str| {
                p.clone()
                    .or(fallback)
                    .ok_or_else(|| CliError::Usage(format!("recommend needs --{what}")))
            };
            let args = RecommendArgs {
                checkpoint: need(&a.checkpoint, Some(cfg.checkpoint_path()), "checkpoint")?,
                vocab: need(&a.vocab, cfg.vocab.clone(), "vocab")?,
                pool: a.pool.clone(),
                anchor: a.anchor.clone(),
                theme: a.theme.clone(),
                slots: a.slots.clone(),
                mode: a.mode.map(|m| match m {
                    Mode::Baseline => ScoreMode::Baseline,
                    Mode::Theme => ScoreMode::Theme,
                }),
                runner_ups: a.runner_ups,
                exhaustive: a.exhaustive,
            };
            let rec = commands::recommend(&args)?;
            let text = serde_json::to_string_pretty(&rec).map_err(|e| CliError::Internal(e.to_string()))?;
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out).map_err(|e| CliError::Internal(e.to_string()))?;
                themefit::io::write_json(&out.join("recommendation.json"), &rec)?;
            }
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
