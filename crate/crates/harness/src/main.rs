use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use higsfa::eval::Challenge;
use higsfa_bench::config::{ExperimentConfig, Task, MNIST_SIZES, MNIST_TRIALS, OMNIGLOT_EPISODES, OMNIGLOT_TRIALS};
use higsfa_bench::features::export_features;
use higsfa_bench::glyphs::{write_surrogate_corpus, GlyphSpec};
use higsfa_bench::mnist::run_mnist_curve;
use higsfa_bench::omniglot::run_omniglot;
use higsfa_bench::prepare::{prepare_mnist, prepare_omniglot};
use higsfa_bench::records::{report, ReportFormat, RunRecord};
use higsfa_bench::{BenchError, Result};

#[derive(Parser)]
#[command(name = "higsfa", version, about = "Hierarchical GSFA data-efficiency benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw MNIST IDX files and/or an Omniglot tree into the cache.
    Prepare {
        #[arg(long)]
        mnist_dir: Option<PathBuf>,
        #[arg(long)]
        omniglot_dir: Option<PathBuf>,
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// MNIST test accuracy over training-set sizes.
    MnistCurve {
        #[command(flatten)]
        common: Common,
        /// Training samples per class.
        #[arg(long, value_delimiter = ',', default_values_t = MNIST_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = MNIST_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = higsfa_bench::config::MNIST_VAL_PER_CLASS)]
        val_per_class: usize,
    },
    /// Omniglot 1-NN transfer challenges over a training-set grid.
    Omniglot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0u8, 1, 2])]
        challenges: Vec<u8>,
        #[arg(long, value_delimiter = ',', default_values_t = [8usize])]
        alphabets: Vec<usize>,
        /// Characters per alphabet.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 6, 8, 10, 12])]
        chars: Vec<usize>,
        /// Training samples per character.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 16])]
        samples: Vec<usize>,
        #[arg(long, default_value_t = OMNIGLOT_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = higsfa::eval::DEFAULT_WAY)]
        way: usize,
        #[arg(long, default_value_t = OMNIGLOT_TRIALS)]
        trials: usize,
        /// Precomputed features (FEAT file, one row per cached image)
        /// used instead of training a network.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Re-execute the run described by a `run.json` record.
    Rerun {
        #[arg(long)]
        record: PathBuf,
        /// Write results here instead of the recorded output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the features of a saved network for every row of one or more
    /// image caches, stacked in the order given.
    Features {
        #[arg(long)]
        net: PathBuf,
        #[arg(long = "in", value_delimiter = ',', required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize every trials.jsonl below a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Write the procedural surrogate glyph corpus (Omniglot layout).
    SynthOmniglot {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = GlyphSpec::default().background_alphabets)]
        background_alphabets: usize,
        #[arg(long, default_value_t = GlyphSpec::default().evaluation_alphabets)]
        evaluation_alphabets: usize,
        #[arg(long, default_value_t = GlyphSpec::default().chars_per_alphabet)]
        chars_per_alphabet: usize,
        #[arg(long, default_value_t = GlyphSpec::default().samples)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "cache")]
    cache_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every trained network under <out>/nets.
    #[arg(long)]
    save_networks: bool,
}

fn configure(task: Task, common: Common) -> ExperimentConfig {
    let mut cfg = match task {
        Task::MnistCurve => ExperimentConfig::mnist(common.cache_dir, common.out),
        Task::Omniglot => ExperimentConfig::omniglot(common.cache_dir, common.out),
    };
    cfg.base_seed = common.seed;
    cfg.save_networks = common.save_networks;
    cfg
}

fn print_summary(record: &RunRecord) {
    for row in &record.summary {
        let p = &row.point;
        let at = match p.challenge {
            Some(ch) => format!(
                "challenge {} A={} C={} S={}",
                ch as u8,
                p.alphabets.unwrap_or(0),
                p.chars.unwrap_or(0),
                p.samples_per_class
            ),
            None => format!("{} per class", p.samples_per_class),
        };
        println!("{} {at}: {:.4} ± {:.4} (n={})", p.task, row.mean, row.sem, row.n);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            mnist_dir,
            omniglot_dir,
            cache_dir,
        } => {
            if mnist_dir.is_none() && omniglot_dir.is_none() {
                return Err(BenchError::Config("give --mnist-dir and/or --omniglot-dir".into()));
            }
            if let Some(dir) = mnist_dir {
                prepare_mnist(&dir, &cache_dir)?;
                println!("prepared MNIST into {}", cache_dir.display());
            }
            if let Some(dir) = omniglot_dir {
                for w in prepare_omniglot(&dir, &cache_dir)? {
                    eprintln!("warning: {w}");
                }
                println!("prepared Omniglot into {}", cache_dir.display());
            }
        }
        Command::MnistCurve {
            common,
            sizes,
            trials,
            val_per_class,
        } => {
            let mut cfg = configure(Task::MnistCurve, common);
            cfg.sizes = sizes;
            cfg.trials = trials;
            cfg.val_per_class = val_per_class;
            print_summary(&run_mnist_curve(&cfg)?);
        }
        Command::Omniglot {
            common,
            challenges,
            alphabets,
            chars,
            samples,
            episodes,
            way,
            trials,
            features,
        } => {
            let mut cfg = configure(Task::Omniglot, common);
            cfg.grid.challenges = challenges
                .into_iter()
                .map(Challenge::try_from)
                .collect::<std::result::Result<_, _>>()
                .map_err(BenchError::Config)?;
            cfg.grid.alphabets = alphabets;
            cfg.grid.chars = chars;
            cfg.grid.samples = samples;
            cfg.grid.episodes = episodes;
            cfg.grid.way = way;
            cfg.trials = trials;
            cfg.features = features;
            print_summary(&run_omniglot(&cfg)?);
        }
        Command::Rerun { record, out } => {
            let text = std::fs::read_to_string(&record)?;
            let rec: RunRecord = serde_json::from_str(&text).map_err(|e| BenchError::Record {
                path: record.clone(),
                msg: e.to_string(),
            })?;
            let mut cfg = rec.config;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let result = match cfg.task {
                Task::MnistCurve => run_mnist_curve(&cfg)?,
                Task::Omniglot => run_omniglot(&cfg)?,
            };
            print_summary(&result);
        }
        Command::Features { net, input, out } => {
            let (rows, cols) = export_features(&net, &input, &out)?;
            println!("wrote {rows} × {cols} features to {}", out.display());
        }
        Command::Report { input, format } => {
            print!("{}", report(&input, format)?);
        }
        Command::SynthOmniglot {
            out,
            background_alphabets,
            evaluation_alphabets,
            chars_per_alphabet,
            samples,
            seed,
        } => {
            let spec = GlyphSpec {
                background_alphabets,
                evaluation_alphabets,
                chars_per_alphabet,
                samples,
                seed,
                ..GlyphSpec::default()
            };
            let n = write_surrogate_corpus(&out, &spec)?;
            println!("wrote {n} surrogate glyphs to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
