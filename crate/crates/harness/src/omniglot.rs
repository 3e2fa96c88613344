use std::time::Instant;

use higsfa::dataio::{read_matrix, LabeledDataset, FEATURE_MAGIC};
use higsfa::eval::{run_challenge, Challenge, EpisodePools, GridPoint, HeldoutCharacter, TrainedCharacter, TrialResult};
use higsfa::network::{forward, save_network, train_network};
use higsfa::DataMatrix;
use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Task};
use crate::error::{BenchError, Result};
use crate::mnist::{channel_note, finish};
use crate::prepare::{load_omniglot_cache, OmniglotData};
use crate::records::{append_trials, completed, read_trials, TrialTiming, TRIALS_FILE};
use crate::seeds::{sub_seed, trial_seed};

pub fn point_key(alphabets: usize, chars: usize, samples: usize) -> String {
    format!("omniglot|{alphabets}|{chars}|{samples}")
}

/// Training characters drawn for one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingDraw {
    pub pools: EpisodePools,
    /// Rows of the training images and their class (index into `pools.trained`).
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Reject grid points the corpus cannot serve before anything is trained.
pub fn check_capacity(data: &OmniglotData, cfg: &ExperimentConfig) -> Result<()> {
    let g = &cfg.grid;
    let min_samples = data
        .background
        .iter()
        .flat_map(|a| &a.characters)
        .map(|c| c.rows.len())
        .min()
        .unwrap_or(0);
    let heldout: usize = data
        .evaluation
        .iter()
        .map(|a| a.characters.iter().filter(|c| c.rows.len() >= 2).count())
        .sum();
    for (a, c, s) in g.points() {
        let at = format!("grid point alphabets={a} chars={c} samples={s}");
        let eligible = data.background.iter().filter(|al| al.characters.len() >= c).count();
        if eligible < a {
            return Err(BenchError::Config(format!(
                "{at}: only {eligible} background alphabets have {c} characters"
            )));
        }
        if s > min_samples {
            return Err(BenchError::Config(format!(
                "{at}: characters have as few as {min_samples} samples"
            )));
        }
        for ch in &g.challenges {
            let problem = match ch {
                Challenge::Trained if s < 2 => Some("challenge 0 needs 2 trained samples per character".to_string()),
                Challenge::UnseenSamples if min_samples - s < 2 => {
                    Some("challenge 1 needs 2 unused samples per character".to_string())
                }
                Challenge::Trained | Challenge::UnseenSamples if a * c < g.way => {
                    Some(format!("{} training characters for a {}-way episode", a * c, g.way))
                }
                Challenge::UnseenAlphabets if heldout < g.way => {
                    Some(format!("{heldout} held-out characters for a {}-way episode", g.way))
                }
                _ => None,
            };
            if let Some(p) = problem {
                return Err(BenchError::Config(format!("{at}: {p}")));
            }
        }
    }
    Ok(())
}

/// Draw `alphabets` background alphabets, `chars` characters from each and
/// `samples` training images per character.
pub fn draw_training_set(
    data: &OmniglotData,
    alphabets: usize,
    chars: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> TrainingDraw {
    let eligible: Vec<usize> = (0..data.background.len())
        .filter(|&i| data.background[i].characters.len() >= chars)
        .collect();
    let mut picked: Vec<usize> = sample(rng, eligible.len(), alphabets)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();

    let mut draw = TrainingDraw {
        pools: EpisodePools::default(),
        rows: Vec::new(),
        labels: Vec::new(),
        class_names: Vec::new(),
    };
    for ai in picked {
        let alphabet = &data.background[ai];
        let mut cs: Vec<usize> = sample(rng, alphabet.characters.len(), chars).into_vec();
        cs.sort_unstable();
        for ci in cs {
            let ch = &alphabet.characters[ci];
            let mut chosen: Vec<usize> = sample(rng, ch.rows.len(), samples).into_vec();
            chosen.sort_unstable();
            let used: Vec<usize> = chosen.iter().map(|&k| ch.rows[k]).collect();
            let unused: Vec<usize> = ch.rows.iter().copied().filter(|r| !used.contains(r)).collect();
            let class = draw.class_names.len();
            draw.class_names.push(format!("{}/{}", alphabet.name, ch.name));
            draw.rows.extend_from_slice(&used);
            draw.labels.extend(std::iter::repeat(class).take(used.len()));
            draw.pools.trained.push(TrainedCharacter {
                character: ch.id,
                used,
                unused,
            });
        }
    }
    draw.pools.heldout = data
        .evaluation
        .iter()
        .flat_map(|a| &a.characters)
        .map(|c| HeldoutCharacter {
            character: c.id,
            rows: c.rows.clone(),
        })
        .collect();
    draw
}

/// Train on one draw and score every configured challenge.
fn run_omniglot_trial(
    data: &OmniglotData,
    external: Option<&DataMatrix>,
    cfg: &ExperimentConfig,
    (a, c, s): (usize, usize, usize),
    trial: usize,
) -> Result<Vec<TrialResult>> {
    let seed = trial_seed(cfg.base_seed, &point_key(a, c, s), trial);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "draw"));
    let draw = draw_training_set(data, a, c, s, &mut rng);
    let mut notes = Vec::new();

    let net = match external {
        Some(_) => {
            notes.push("external features".to_string());
            None
        }
        None => {
            let train = LabeledDataset::new(
                data.images.select(Axis(0), &draw.rows),
                draw.labels.clone(),
                draw.class_names.clone(),
            )?;
            let net = train_network(&train, data.shape, &cfg.architecture)?;
            notes.push(channel_note(&net));
            if cfg.save_networks {
                let dir = cfg.out_dir.join("nets");
                std::fs::create_dir_all(&dir)?;
                save_network(&net, &dir.join(format!("omniglot-{a}-{c}-{s}-{trial}.hgsn")))?;
            }
            Some(net)
        }
    };

    let mut out = Vec::new();
    for &challenge in &cfg.grid.challenges {
        let mut ep_rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("episodes-{}", challenge as u8)));
        let outcome = match (&net, external) {
            (Some(net), _) => run_challenge(
                |x: ArrayView2<f64>| forward(net, x),
                data.images.view(),
                &draw.pools,
                challenge,
                cfg.grid.way,
                cfg.grid.episodes,
                &mut ep_rng,
            )?,
            (None, Some(feats)) => run_challenge(
                |x: ArrayView2<f64>| Ok(x.to_owned()),
                feats.view(),
                &draw.pools,
                challenge,
                cfg.grid.way,
                cfg.grid.episodes,
                &mut ep_rng,
            )?,
            (None, None) => unreachable!("either a network or external features"),
        };
        out.push(TrialResult {
            point: GridPoint::omniglot(challenge, a, c, s),
            trial,
            seed,
            accuracy: outcome.accuracy,
            notes: notes.clone(),
        });
    }
    Ok(out)
}

pub fn run_omniglot(cfg: &ExperimentConfig) -> Result<crate::records::RunRecord> {
    cfg.validate()?;
    if cfg.task != Task::Omniglot {
        return Err(BenchError::Config("not an Omniglot config".into()));
    }
    let start = Instant::now();
    let data = load_omniglot_cache(&cfg.cache_dir)?;
    check_capacity(&data, cfg)?;
    let external = match &cfg.features {
        Some(path) => {
            let feats = read_matrix(path, FEATURE_MAGIC)?;
            if feats.nrows() != data.images.nrows() {
                return Err(higsfa::Error::Dimension(format!(
                    "feature file has {} rows, the Omniglot cache {}",
                    feats.nrows(),
                    data.images.nrows()
                ))
                .into());
            }
            Some(feats)
        }
        None => None,
    };

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut results = read_trials(&cfg.out_dir.join(TRIALS_FILE))?;
    let done = completed(&results);
    let mut timings = Vec::new();
    for point in cfg.grid.points() {
        let (a, c, s) = point;
        for trial in 0..cfg.trials {
            let finished = cfg
                .grid
                .challenges
                .iter()
                .all(|&ch| done.contains(&(GridPoint::omniglot(ch, a, c, s), trial)));
            if finished {
                continue;
            }
            let t = Instant::now();
            let new = run_omniglot_trial(&data, external.as_ref(), cfg, point, trial)?;
            append_trials(&cfg.out_dir, &new)?;
            let secs = t.elapsed().as_secs_f64();
            let accs: Vec<String> = new.iter().map(|r| format!("{:.3}", r.accuracy)).collect();
            eprintln!("omniglot A={a} C={c} S={s} trial {trial}: {} ({secs:.1}s)", accs.join(" "));
            for r in &new {
                timings.push(TrialTiming {
                    point: r.point.clone(),
                    trial,
                    seconds: secs,
                });
            }
            results.extend(new);
        }
    }
    finish(cfg, results, timings, start)
}
