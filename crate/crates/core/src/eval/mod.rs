//! Evaluation: a softmax head for supervised accuracy, nearest-neighbour
//! matching episodes, and trial statistics.

mod episodes;
mod softmax;
mod stats;

pub use episodes::{
    make_episode, one_nn_match, run_challenge, Challenge, ChallengeOutcome, EpisodePools, EpisodeSpec,
    HeldoutCharacter, SampleRef, TrainedCharacter, DEFAULT_WAY,
};
pub use softmax::{
    predict_accuracy, train_softmax, EarlyStopping, SoftmaxModel, StopDecision, TrainLog, TrainRegime,
};
pub use stats::{mean_sem, summarize, GridPoint, SummaryRow, TrialResult};
