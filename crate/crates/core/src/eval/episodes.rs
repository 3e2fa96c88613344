//! One-shot matching episodes over Omniglot-style character pools.

use std::collections::BTreeMap;

use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{DataMatrix, Error, Result};

/// Characters per episode.
pub const DEFAULT_WAY: usize = 16;

/// Where probe and target samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Challenge {
    /// Training characters, samples the model was trained on.
    Trained = 0,
    /// Training characters, samples held out from training.
    UnseenSamples = 1,
    /// Characters from alphabets absent from training.
    UnseenAlphabets = 2,
}

impl From<Challenge> for u8 {
    fn from(c: Challenge) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for Challenge {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Challenge::Trained),
            1 => Ok(Challenge::UnseenSamples),
            2 => Ok(Challenge::UnseenAlphabets),
            other => Err(format!("no challenge {other}")),
        }
    }
}

/// One image of one character; `row` indexes the shared image matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub character: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub challenge: Challenge,
    /// `probe[i]` and `target[i]` are two different samples of one character.
    pub probe: Vec<SampleRef>,
    pub target: Vec<SampleRef>,
}

impl EpisodeSpec {
    pub fn way(&self) -> usize {
        self.probe.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainedCharacter {
    pub character: usize,
    /// Rows the model was trained on.
    pub used: Vec<usize>,
    /// Rows of this character withheld from training.
    pub unused: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldoutCharacter {
    pub character: usize,
    pub rows: Vec<usize>,
}

/// Registry of what a model saw during training, plus characters from
/// alphabets it never saw.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpisodePools {
    pub trained: Vec<TrainedCharacter>,
    pub heldout: Vec<HeldoutCharacter>,
}

/// Draw one `way`-way episode for `challenge`.
pub fn make_episode<R: Rng + ?Sized>(
    pools: &EpisodePools,
    challenge: Challenge,
    way: usize,
    rng: &mut R,
) -> Result<EpisodeSpec> {
    if way == 0 {
        return Err(Error::Request("an episode needs at least one character".into()));
    }
    let candidates: Vec<(usize, &[usize])> = match challenge {
        Challenge::Trained => pools
            .trained
            .iter()
            .map(|c| (c.character, c.used.as_slice()))
            .collect(),
        Challenge::UnseenSamples => pools
            .trained
            .iter()
            .map(|c| (c.character, c.unused.as_slice()))
            .collect(),
        Challenge::UnseenAlphabets => pools
            .heldout
            .iter()
            .map(|c| (c.character, c.rows.as_slice()))
            .collect(),
    };
    let eligible: Vec<(usize, &[usize])> = candidates.into_iter().filter(|(_, r)| r.len() >= 2).collect();
    if eligible.len() < way {
        return Err(Error::Episode(format!(
            "challenge {} needs {} characters with two eligible samples, found {}",
            challenge as u8,
            way,
            eligible.len()
        )));
    }
    let mut probe = Vec::with_capacity(way);
    let mut target = Vec::with_capacity(way);
    for i in sample(rng, eligible.len(), way).into_iter() {
        let (character, rows) = eligible[i];
        let pair = sample(rng, rows.len(), 2);
        probe.push(SampleRef {
            character,
            row: rows[pair.index(0)],
        });
        target.push(SampleRef {
            character,
            row: rows[pair.index(1)],
        });
    }
    Ok(EpisodeSpec {
        challenge,
        probe,
        target,
    })
}

/// Index of the nearest target row (Euclidean) for every probe row; ties go
/// to the lowest index.
pub fn one_nn_match(probe: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<Vec<usize>> {
    if target.nrows() == 0 {
        return Err(Error::Request("1-NN against an empty target set".into()));
    }
    if probe.ncols() != target.ncols() {
        return Err(Error::Dimension(format!(
            "probe width {} differs from target width {}",
            probe.ncols(),
            target.ncols()
        )));
    }
    Ok(probe
        .rows()
        .into_iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, t) in target.rows().into_iter().enumerate() {
                let d: f64 = p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Outcome of a batch of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengeOutcome {
    pub accuracy: f64,
    pub successes: usize,
    pub probes: usize,
    pub episodes: usize,
}

/// Run `n_episodes` fresh episodes and score 1-NN matching in the feature
/// space produced by `features`.
///
/// `images` holds every image the pools refer to; `features` is called once,
/// on the subset of rows the episodes actually use (in ascending row order).
pub fn run_challenge<R, F>(
    mut features: F,
    images: ArrayView2<f64>,
    pools: &EpisodePools,
    challenge: Challenge,
    way: usize,
    n_episodes: usize,
    rng: &mut R,
) -> Result<ChallengeOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(ArrayView2<f64>) -> Result<DataMatrix>,
{
    if n_episodes == 0 {
        return Err(Error::Request("at least one episode required".into()));
    }
    let episodes = (0..n_episodes)
        .map(|_| make_episode(pools, challenge, way, rng))
        .collect::<Result<Vec<_>>>()?;

    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    for ep in &episodes {
        for s in ep.probe.iter().chain(&ep.target) {
            if s.row >= images.nrows() {
                return Err(Error::Episode(format!(
                    "row {} outside an image pool of {}",
                    s.row,
                    images.nrows()
                )));
            }
            slot.insert(s.row, 0);
        }
    }
    let rows: Vec<usize> = slot.keys().copied().collect();
    for (i, r) in rows.iter().enumerate() {
        slot.insert(*r, i);
    }
    let subset = images.select(Axis(0), &rows);
    let feats = features(subset.view())?;
    if feats.nrows() != rows.len() {
        return Err(Error::Dimension(format!(
            "feature function returned {} rows for {} images",
            feats.nrows(),
            rows.len()
        )));
    }

    let mut successes = 0;
    for ep in &episodes {
        let p: Vec<usize> = ep.probe.iter().map(|s| slot[&s.row]).collect();
        let t: Vec<usize> = ep.target.iter().map(|s| slot[&s.row]).collect();
        let pf = feats.select(Axis(0), &p);
        let tf = feats.select(Axis(0), &t);
        let matches = one_nn_match(pf.view(), tf.view())?;
        successes += matches
            .iter()
            .zip(&ep.probe)
            .filter(|(&m, probe)| ep.target[m].character == probe.character)
            .count();
    }
    let probes = episodes.iter().map(|e| e.way()).sum::<usize>();
    Ok(ChallengeOutcome {
        accuracy: successes as f64 / probes as f64,
        successes,
        probes,
        episodes: n_episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `n_chars` trained characters with 20 rows each, `n_used` used.
    fn pools(n_chars: usize, n_used: usize, n_heldout: usize) -> EpisodePools {
        let mut p = EpisodePools::default();
        for c in 0..n_chars {
            let rows: Vec<usize> = (c * 20..(c + 1) * 20).collect();
            p.trained.push(TrainedCharacter {
                character: c,
                used: rows[..n_used].to_vec(),
                unused: rows[n_used..].to_vec(),
            });
        }
        for h in 0..n_heldout {
            let c = n_chars + h;
            p.heldout.push(HeldoutCharacter {
                character: c,
                rows: (c * 20..(c + 1) * 20).collect(),
            });
        }
        p
    }

    #[test]
    fn hand_case() {
        let probe = array![[0.0]];
        let target = array![[-1.0], [3.0]];
        assert_eq!(one_nn_match(probe.view(), target.view()).unwrap(), vec![0]);
    }

    #[test]
    fn identical_sets_match_identity() {
        let x = Array2::from_shape_fn((16, 5), |(i, j)| (i * 5 + j) as f64);
        let m = one_nn_match(x.view(), x.view()).unwrap();
        assert_eq!(m, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn ties_go_to_lowest_index_and_empty_target_fails() {
        let probe = array![[0.0]];
        let target = array![[1.0], [-1.0]];
        assert_eq!(one_nn_match(probe.view(), target.view()).unwrap(), vec![0]);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(one_nn_match(probe.view(), empty.view()).is_err());
    }

    #[test]
    fn forced_selection_uses_every_character() {
        let p = pools(16, 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ep = make_episode(&p, Challenge::Trained, 16, &mut rng).unwrap();
        let mut chars: Vec<usize> = ep.probe.iter().map(|s| s.character).collect();
        chars.sort_unstable();
        assert_eq!(chars, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn provenance_per_challenge() {
        let p = pools(20, 4, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            for challenge in [Challenge::Trained, Challenge::UnseenSamples, Challenge::UnseenAlphabets] {
                let ep = make_episode(&p, challenge, 16, &mut rng).unwrap();
                assert_eq!(ep.probe.len(), 16);
                for (a, b) in ep.probe.iter().zip(&ep.target) {
                    assert_eq!(a.character, b.character);
                    assert_ne!(a.row, b.row);
                    for s in [a, b] {
                        let within = s.row % 20;
                        match challenge {
                            Challenge::Trained => assert!(s.character < 20 && within < 4),
                            Challenge::UnseenSamples => assert!(s.character < 20 && within >= 4),
                            Challenge::UnseenAlphabets => assert!(s.character >= 20),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shortfall_is_an_episode_error() {
        let p = pools(10, 4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            make_episode(&p, Challenge::Trained, 16, &mut rng),
            Err(Error::Episode(_))
        ));
        assert!(make_episode(&p, Challenge::UnseenAlphabets, 16, &mut rng).is_err());
        let p = pools(16, 19, 0);
        assert!(make_episode(&p, Challenge::UnseenSamples, 16, &mut rng).is_err());
    }

    #[test]
    fn constant_features_score_one_in_way() {
        let p = pools(16, 4, 0);
        let images = Array2::zeros((320, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_challenge(
            |x: ArrayView2<f64>| Ok(Array2::ones((x.nrows(), 7))),
            images.view(),
            &p,
            Challenge::Trained,
            16,
            50,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.probes, 800);
        assert_eq!(out.accuracy, 1.0 / 16.0);
    }

    #[test]
    fn identical_samples_score_perfectly() {
        // every sample of a character is the same image
        let p = pools(16, 4, 0);
        let images = Array2::from_shape_fn((320, 16), |(r, j)| if j == r / 20 { 1.0 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = run_challenge(
            |x: ArrayView2<f64>| Ok(x.to_owned()),
            images.view(),
            &p,
            Challenge::UnseenSamples,
            16,
            10,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.accuracy, 1.0);
    }
}
