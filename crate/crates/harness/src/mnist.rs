use std::time::Instant;

use higsfa::dataio::{sample_split, SplitSpec};
use higsfa::eval::{predict_accuracy, train_softmax, GridPoint, TrialResult};
use higsfa::network::{forward, save_network, train_network, NetworkModel};

use crate::config::{ExperimentConfig, Task};
use crate::error::{BenchError, Result};
use crate::prepare::{load_mnist, MnistData};
use crate::records::{append_trials, completed, read_trials, write_run_record, write_summary, RunRecord, TrialTiming, TRIALS_FILE};
use crate::seeds::{sub_seed, trial_seed};

pub fn point_key(size: usize) -> String {
    format!("mnist|{size}")
}

/// Slow/PCA split of every layer, e.g. `layers 1+24 9+7`.
pub fn channel_note(net: &NetworkModel) -> String {
    let parts: Vec<String> = net
        .layers
        .iter()
        .map(|l| format!("{}+{}", l.node.info.n_slow, l.node.info.n_pca))
        .collect();
    format!("slow+pca channels per layer: {}", parts.join(" "))
}

/// One seeded trial: split, train the hierarchy, fit the softmax head with
/// early stopping on the validation part, score on the test set.
pub fn run_mnist_trial(
    data: &MnistData,
    cfg: &ExperimentConfig,
    size: usize,
    trial: usize,
) -> Result<(TrialResult, NetworkModel)> {
    let seed = trial_seed(cfg.base_seed, &point_key(size), trial);
    let split = sample_split(
        &data.train,
        &SplitSpec {
            per_class_train: size,
            per_class_val: cfg.val_per_class,
            seed: sub_seed(seed, "split"),
            cap_train: true,
        },
    )?;
    let mut notes: Vec<String> = split
        .shortfalls
        .iter()
        .map(|s| format!("class {} {}: {} of {} samples", s.class, s.part, s.taken, s.requested))
        .collect();

    let net = train_network(&split.train, data.shape, &cfg.architecture)?;
    notes.push(channel_note(&net));
    let train_feats = forward(&net, split.train.data().view())?;
    let (val_feats, val_labels) = match &split.val {
        Some(v) => (forward(&net, v.data().view())?, v.labels().to_vec()),
        None => (ndarray::Array2::zeros((0, net.output_dim())), Vec::new()),
    };
    let test_feats = forward(&net, data.test.data().view())?;

    let mut regime = cfg.regime;
    regime.seed = sub_seed(seed, "softmax");
    let n_classes = data.train.n_classes();
    let (model, log) = train_softmax(
        train_feats.view(),
        split.train.labels(),
        val_feats.view(),
        &val_labels,
        n_classes,
        &regime,
    )?;
    notes.extend(log.warnings);
    notes.push(format!(
        "softmax epochs {} best {}",
        log.epochs,
        log.best_epoch.map_or("-".into(), |e| e.to_string())
    ));
    let accuracy = predict_accuracy(&model, test_feats.view(), data.test.labels())?;
    Ok((
        TrialResult {
            point: GridPoint::mnist(size),
            trial,
            seed,
            accuracy,
            notes,
        },
        net,
    ))
}

/// Run every (size, trial) of the learning curve that `cfg.out_dir` does
/// not already hold, then rewrite the summary.
pub fn run_mnist_curve(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if cfg.task != Task::MnistCurve {
        return Err(BenchError::Config("not an MNIST learning-curve config".into()));
    }
    let start = Instant::now();
    let data = load_mnist(&cfg.cache_dir)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut results = read_trials(&cfg.out_dir.join(TRIALS_FILE))?;
    let done = completed(&results);
    let mut timings = Vec::new();

    for &size in &cfg.sizes {
        for trial in 0..cfg.trials {
            let point = GridPoint::mnist(size);
            if done.contains(&(point.clone(), trial)) {
                continue;
            }
            let t = Instant::now();
            let (result, net) = run_mnist_trial(&data, cfg, size, trial)?;
            if cfg.save_networks {
                let dir = cfg.out_dir.join("nets");
                std::fs::create_dir_all(&dir)?;
                save_network(&net, &dir.join(format!("mnist-{size}-{trial}.hgsn")))?;
            }
            append_trials(&cfg.out_dir, std::slice::from_ref(&result))?;
            eprintln!(
                "mnist size {size} trial {trial}: accuracy {:.4} ({:.1}s)",
                result.accuracy,
                t.elapsed().as_secs_f64()
            );
            timings.push(TrialTiming {
                point,
                trial,
                seconds: t.elapsed().as_secs_f64(),
            });
            results.push(result);
        }
    }
    finish(cfg, results, timings, start)
}

/// Keep the records of this config's grid, in a fixed order, and write the
/// summary and run record.
pub(crate) fn finish(
    cfg: &ExperimentConfig,
    mut results: Vec<TrialResult>,
    timings: Vec<TrialTiming>,
    start: Instant,
) -> Result<RunRecord> {
    let wanted = crate::grid_points(cfg);
    results.retain(|r| r.trial < cfg.trials && wanted.contains(&r.point));
    results.sort_by(|a, b| (&a.point, a.trial).cmp(&(&b.point, b.trial)));
    results.dedup_by(|a, b| a.point == b.point && a.trial == b.trial);
    let summary = write_summary(&cfg.out_dir, &results)?;
    let record = RunRecord {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        trials: results,
        summary,
        timings,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_run_record(&cfg.out_dir, &record)?;
    Ok(record)
}
