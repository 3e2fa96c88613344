use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Challenge;

/// Identifies one cell of an experiment grid. Ordering is lexicographic in
/// field order, which fixes the row order of summaries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub task: String,
    pub challenge: Option<Challenge>,
    pub alphabets: Option<usize>,
    pub chars: Option<usize>,
    pub samples_per_class: usize,
}

impl GridPoint {
    pub fn mnist(samples_per_class: usize) -> Self {
        Self {
            task: "mnist".into(),
            challenge: None,
            alphabets: None,
            chars: None,
            samples_per_class,
        }
    }

    pub fn omniglot(challenge: Challenge, alphabets: usize, chars: usize, samples: usize) -> Self {
        Self {
            task: "omniglot".into(),
            challenge: Some(challenge),
            alphabets: Some(alphabets),
            chars: Some(chars),
            samples_per_class: samples,
        }
    }
}

/// Result of one trial at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub point: GridPoint,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: GridPoint,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 when `n == 1`.
    pub sem: f64,
}

impl SummaryRow {
    /// A single trial carries no spread estimate.
    pub fn single_trial(&self) -> bool {
        self.n == 1
    }
}

/// Mean and standard error of `values`; `None` when empty.
pub fn mean_sem(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Group trials by grid point and summarize each group, ordered by point.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<&GridPoint, Vec<f64>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.point).or_default().push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|(point, accs)| {
            let (mean, sem) = mean_sem(&accs).expect("groups are non-empty");
            SummaryRow {
                point: point.clone(),
                n: accs.len(),
                mean,
                sem,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(point: GridPoint, accuracy: f64) -> TrialResult {
        TrialResult {
            point,
            trial: 0,
            seed: 0,
            accuracy,
            notes: vec![],
        }
    }

    #[test]
    fn two_trial_summary() {
        let (m, s) = mean_sem(&[0.9, 1.0]).unwrap();
        assert!((m - 0.95).abs() < 1e-12);
        assert!((s - 0.05).abs() < 1e-12);
        let (_, s) = mean_sem(&[0.9, 0.95, 1.0]).unwrap();
        assert!((s - 0.028_867_513).abs() < 1e-8);
    }

    #[test]
    fn single_trial_has_zero_sem() {
        let rows = summarize(&[trial(GridPoint::mnist(5), 0.7)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].sem, 0.0);
        assert!(rows[0].single_trial());
        assert!(mean_sem(&[]).is_none());
    }

    #[test]
    fn rows_are_ordered_and_grouped() {
        let rs = vec![
            trial(GridPoint::omniglot(Challenge::UnseenAlphabets, 5, 10, 4), 0.3),
            trial(GridPoint::mnist(50), 0.9),
            trial(GridPoint::mnist(10), 0.8),
            trial(GridPoint::mnist(50), 0.92),
            trial(GridPoint::omniglot(Challenge::Trained, 5, 10, 4), 0.6),
        ];
        let rows = summarize(&rs);
        let keys: Vec<_> = rows.iter().map(|r| (r.point.task.as_str(), r.point.challenge, r.n)).collect();
        assert_eq!(
            keys,
            vec![
                ("mnist", None, 1),
                ("mnist", None, 2),
                ("omniglot", Some(Challenge::Trained), 1),
                ("omniglot", Some(Challenge::UnseenAlphabets), 1),
            ]
        );
        assert!((rows[1].mean - 0.91).abs() < 1e-12);
    }
}
