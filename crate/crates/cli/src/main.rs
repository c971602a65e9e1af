use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use signcorpus_annotate::{serve, ServiceConfig};
use signcorpus_cli::commands::{self, ScoreOptions, Tokens};
use signcorpus_cli::pipeline::{jsonl_bytes, write_atomic};
use signcorpus_cli::{run_episodes, CliError, PipelineConfig, Stage};
use signcorpus_core::metrics::{MetricKind, Smoothing};
use signcorpus_core::synth::SynthSpec;

#[derive(Parser)]
#[command(name = "signcorpus", version, about = "Build, annotate and score a sign language corpus")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override, e.g. `--set split.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Active signing runs from scores.txt into signs.jsonl.
    SegmentActivity(Episodes),
    /// Subtitle clips from subtitles.raw into clips.jsonl and clips.raw.
    SubtitleClips(Episodes),
    /// Recognize clip text into ocr.jsonl.
    Ocr(Episodes),
    /// Merge over-segmented clips into groups.jsonl.
    Regroup(Episodes),
    /// Pair sign runs with subtitle groups into aligned.jsonl.
    Align(Episodes),
    /// segment-activity, subtitle-clips, ocr, regroup and align in order.
    All(Episodes),
    /// Raw annotations (`id<TAB>raw`) to flat gloss sequences.
    GlossNormalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Resolve homosigns against this registry (test mode).
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Write the registry built from the input (training mode).
        #[arg(long, conflicts_with = "registry")]
        registry_out: Option<PathBuf>,
    },
    /// Replace registry members by their class representative in
    /// hypothesis and reference gloss files.
    GlossCanonicalize {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out_hyp: PathBuf,
        #[arg(long)]
        out_ref: PathBuf,
    },
    /// Score hypotheses against references; JSON report on stdout.
    Score {
        metric: Metric,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Defaults to words for WER and chars otherwise.
        #[arg(long, value_enum)]
        tokens: Option<TokenMode>,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// none, add-one, exponential or epsilon:<value>
        #[arg(long, default_value = "none", value_parser = parse_smoothing)]
        smoothing: Smoothing,
        /// Homosign registry applied before scoring.
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Also write per-sample scores as JSON lines.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        /// Print a text table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// OOV-free train/dev/test split of a sample manifest.
    Split {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-split corpus statistics.
    Stats {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Create an annotation store from aligned episodes.
    StoreInit {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value = "unknown")]
        signer: String,
        /// Media locator; {episode}, {sample_id}, {start} and {end} are
        /// substituted.
        #[arg(long, default_value = "{episode}/{sample_id}.mp4")]
        media_template: String,
        episodes: Vec<PathBuf>,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        read_only: bool,
    },
    /// Write a synthetic episode with known ground truth.
    SynthEpisode {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        signs: usize,
        #[arg(long, default_value_t = 1)]
        min_subtitles: usize,
        #[arg(long, default_value_t = 3)]
        max_subtitles: usize,
        #[arg(long, default_value_t = 3.0)]
        min_sign_s: f64,
        #[arg(long, default_value_t = 15.0)]
        max_sign_s: f64,
        #[arg(long, default_value_t = 1)]
        distractors: usize,
        #[arg(long, default_value_t = 0.2)]
        oversegment: f64,
    },
}

#[derive(clap::Args)]
struct Episodes {
    /// Episode directories; defaults to `paths.episodes`.
    dirs: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Wer,
    Bleu,
    Rouge,
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenMode {
    Words,
    Chars,
    EachChar,
}

fn parse_smoothing(s: &str) -> Result<Smoothing, String> {
    match s {
        "none" => Ok(Smoothing::None),
        "add-one" => Ok(Smoothing::AddOne),
        "exponential" => Ok(Smoothing::Exponential),
        other => other
            .strip_prefix("epsilon:")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| *v > 0.0)
            .map(Smoothing::Epsilon)
            .ok_or_else(|| format!("unknown smoothing {other:?}")),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run_stages(stages: &[Stage], cfg: &PipelineConfig, eps: Episodes) -> Result<(), CliError> {
    let dirs = if eps.dirs.is_empty() { cfg.paths.episodes.clone() } else { eps.dirs };
    if dirs.is_empty() {
        return Err(CliError::Usage("no episode directories given".into()));
    }
    let (mut failed, mut code) = (0, 0);
    for result in run_episodes(stages, cfg, &dirs) {
        match result {
            Ok(reports) => {
                for r in reports {
                    println!("{}", serde_json::to_string(&r)?);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed += 1;
                code = code.max(e.exit_code());
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Episodes { failed, total: dirs.len(), code })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::SegmentActivity(e) => run_stages(&[Stage::SegmentActivity], &cfg, e),
        Command::SubtitleClips(e) => run_stages(&[Stage::SubtitleClips], &cfg, e),
        Command::Ocr(e) => run_stages(&[Stage::Ocr], &cfg, e),
        Command::Regroup(e) => run_stages(&[Stage::Regroup], &cfg, e),
        Command::Align(e) => run_stages(&[Stage::Align], &cfg, e),
        Command::All(e) => run_stages(&Stage::CHAIN, &cfg, e),
        Command::GlossNormalize { input, output, registry, registry_out } => {
            let n = commands::gloss_normalize(&input, &output, registry.as_deref(), registry_out.as_deref())?;
            eprintln!("{n} annotations normalized");
            Ok(())
        }
        Command::GlossCanonicalize { registry, hyp, reference, out_hyp, out_ref } => {
            commands::gloss_canonicalize(&registry, &hyp, &reference, &out_hyp, &out_ref)?;
            Ok(())
        }
        Command::Score { metric, hyp, reference, tokens, max_n, beta, smoothing, registry, jsonl, table } => {
            let kind = match metric {
                Metric::Wer => MetricKind::Wer,
                Metric::Bleu => MetricKind::Bleu,
                Metric::Rouge => MetricKind::RougeL,
            };
            let mut opts = ScoreOptions::new(kind);
            if let Some(t) = tokens {
                opts.tokens = match t {
                    TokenMode::Words => Tokens::Words,
                    TokenMode::Chars => Tokens::Chars,
                    TokenMode::EachChar => Tokens::EachChar,
                };
            }
            opts.max_n = max_n;
            opts.beta = beta;
            opts.smoothing = smoothing;
            opts.registry = registry;
            let report = commands::score(&hyp, &reference, &opts)?;
            if let Some(p) = jsonl {
                write_atomic(&p, &jsonl_bytes(&report.per_sample))?;
            }
            if table {
                print!("{}", report.to_table());
                Ok(())
            } else {
                print_json(&report)
            }
        }
        Command::Split { manifest, out } => print_json(&commands::split(&cfg, manifest.as_deref(), out.as_deref())?),
        Command::Stats { manifest, split, json } => {
            let st = commands::stats(&cfg, manifest.as_deref(), split.as_deref())?;
            if json {
                print_json(&st)
            } else {
                print!("{}", st.to_table());
                Ok(())
            }
        }
        Command::StoreInit { store, signer, media_template, episodes } => {
            let store = store_dir(store, &cfg)?;
            let dirs = if episodes.is_empty() { cfg.paths.episodes.clone() } else { episodes };
            let n = commands::store_init(&store, &dirs, &signer, &media_template)?;
            eprintln!("{n} tasks created in {}", store.display());
            Ok(())
        }
        Command::Serve { store, bind, read_only } => {
            let config = ServiceConfig {
                store_dir: store_dir(store, &cfg)?,
                bind: bind
                    .or_else(|| cfg.paths.bind.clone())
                    .unwrap_or_else(|| ServiceConfig::default().bind),
                read_only,
                workers: cfg.workers,
            };
            if !config.store_dir.join(signcorpus_annotate::MANIFEST).exists() {
                return Err(CliError::MissingInput(config.store_dir.join(signcorpus_annotate::MANIFEST)));
            }
            let handle = serve(&config)?;
            eprintln!("serving {} on http://{}", config.store_dir.display(), handle.addr);
            handle.join();
            Ok(())
        }
        Command::SynthEpisode {
            out,
            seed,
            signs,
            min_subtitles,
            max_subtitles,
            min_sign_s,
            max_sign_s,
            distractors,
            oversegment,
        } => {
            let spec = SynthSpec {
                episode_id: signcorpus_cli::pipeline::episode_id(&out),
                seed,
                signs,
                min_subtitles,
                max_subtitles,
                min_sign_s,
                max_sign_s,
                distractors,
                oversegment,
                fps: cfg.fps,
                ..SynthSpec::default()
            };
            let n = commands::synth_episode(&spec, &out)?;
            eprintln!("{n} sign runs written to {}", out.display());
            Ok(())
        }
    }
}

fn store_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.paths.store.clone())
        .ok_or_else(|| CliError::Usage("no store given (--store or paths.store)".into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
