//! Record linkage with a surrogate label.
//!
//! Each update record is blocked against the master database by exact last
//! name, candidate pairs are turned into similarity features, and the binary
//! graduation-year-equality feature acts as the surrogate `x1`: two records
//! of the same person practically never disagree on it (100% recall), and for
//! records of two different people it is independent of the other field
//! similarities. The matcher therefore trains its `P(x1|x2)` predictor on all
//! candidate pairs without using any match labels; a small labeled holdout
//! only sets the decision threshold. A conventional supervised matcher over
//! the same features serves as the baseline.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SurrogateModel, SurrogateMode};
use crate::posterior::{
    select_threshold, ClassConditionalX1, PosteriorError, Probability, Threshold,
    ThresholdObjective, DEFAULT_CLAMP_EPSILON,
};
use crate::predictor::{
    fit_logistic, BasePredictor, FeatureVector, LogisticModel, PredictorError, TrainConfig,
};
use crate::text::edit_similarity;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinkageError {
    #[error("need at least 2 master records with a graduation year")]
    InsufficientData,
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

/// One physician record. Only the last name is mandatory; it is the blocking
/// key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageRecord {
    pub id: u32,
    pub first: Option<String>,
    pub last: String,
    pub middle_initial: Option<char>,
    pub street: Option<String>,
    pub phone: Option<String>,
    pub specialty: Option<String>,
    pub grad_year: Option<u16>,
}

/// Ground truth for one update record; `None` marks it unmatchable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPair {
    pub update_id: u32,
    pub master_id: Option<u32>,
}

/// A master/update pair of databases plus the evaluation truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageCorpus {
    pub master: Vec<LinkageRecord>,
    pub update: Vec<LinkageRecord>,
    pub truth: Vec<TruthPair>,
}

/// Pairwise features: the surrogate `x1` (graduation-year equality, missing
/// when either year is absent) and the similarity vector `x2` in the order
/// first-name edit similarity, middle-initial equality, street edit
/// similarity, phone equality, specialty equality.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub x1: Option<bool>,
    pub x2: FeatureVector,
}

pub const PAIR_FEATURE_DIM: usize = 5;

/// Final verdict for one update record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub update_id: u32,
    pub master_id: Option<u32>,
    pub score: Probability,
}

/// Master records indexed by exact last name.
#[derive(Debug, Clone)]
pub struct BlockIndex {
    by_last: HashMap<String, Vec<usize>>,
}

impl BlockIndex {
    pub fn build(master: &[LinkageRecord]) -> Self {
        let mut by_last: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, record) in master.iter().enumerate() {
            by_last.entry(record.last.clone()).or_default().push(i);
        }
        Self { by_last }
    }

    /// Indices into the master slice sharing the update's last name, in
    /// master order. Empty when the last name is absent.
    pub fn candidates(&self, last: &str) -> &[usize] {
        self.by_last.get(last).map_or(&[], Vec::as_slice)
    }
}

/// All master records blocked for an update record.
pub fn block<'a>(
    update: &LinkageRecord,
    master: &'a [LinkageRecord],
    index: &BlockIndex,
) -> Vec<&'a LinkageRecord> {
    index
        .candidates(&update.last)
        .iter()
        .map(|&i| &master[i])
        .collect()
}

fn eq_feature<T: PartialEq>(a: &Option<T>, b: &Option<T>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(f64::from(u8::from(a == b))),
        _ => None,
    }
}

fn sim_feature(a: &Option<String>, b: &Option<String>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(edit_similarity(a, b)),
        _ => None,
    }
}

pub fn extract_features(update: &LinkageRecord, candidate: &LinkageRecord) -> PairFeatures {
    let x1 = match (update.grad_year, candidate.grad_year) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };
    let x2 = FeatureVector::from_options(vec![
        sim_feature(&update.first, &candidate.first),
        eq_feature(&update.middle_initial, &candidate.middle_initial),
        sim_feature(&update.street, &candidate.street),
        eq_feature(&update.phone, &candidate.phone),
        eq_feature(&update.specialty, &candidate.specialty),
    ])
    .expect("similarity features are finite");
    PairFeatures { x1, x2 }
}

/// Score one candidate pair: 0 for a disagreeing surrogate, the reconstructed
/// `P(y=1 | x1=1, x2)` for an agreeing one, and the marginal
/// `P(y=1|x1=1,x2) * P(x1=1|x2)` when the surrogate is missing.
pub fn score_pair<P>(f: &PairFeatures, model: &SurrogateModel<P>) -> Result<Probability, ModelError>
where
    P: BasePredictor<Input = FeatureVector>,
{
    model.score(f.x1, &f.x2)
}

/// The probability that two distinct physicians share a graduation year:
/// the sum of squared empirical year frequencies in the master database.
pub fn estimate_p_x1_given_y0(master: &[LinkageRecord]) -> Result<Probability, LinkageError> {
    let mut counts: HashMap<u16, usize> = HashMap::new();
    let mut total = 0usize;
    for record in master {
        if let Some(year) = record.grad_year {
            *counts.entry(year).or_default() += 1;
            total += 1;
        }
    }
    if total < 2 {
        return Err(LinkageError::InsufficientData);
    }
    let collision = counts
        .values()
        .map(|c| {
            let p = *c as f64 / total as f64;
            p * p
        })
        .sum::<f64>();
    Ok(Probability::clamped01(collision))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub train: TrainConfig,
    pub clamp_epsilon: f64,
    /// Fraction of update records whose truth labels may be used to select
    /// the decision threshold.
    pub holdout_fraction: f64,
    pub objective: ThresholdObjective,
    /// Skip holdout selection and use this threshold directly.
    pub fixed_threshold: Option<f64>,
    /// Seed for holdout / training-split sampling.
    pub seed: u64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
            holdout_fraction: 0.1,
            objective: ThresholdObjective::F1,
            fixed_threshold: None,
            seed: 0,
        }
    }
}

/// Per-update best candidate, with its correctness under the truth file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBest {
    pub update_id: u32,
    pub master_id: u32,
    pub score: Probability,
    pub correct: bool,
}

/// Everything a matcher run produces, including the per-block argmax list
/// that threshold sweeps are computed from.
#[derive(Debug, Clone)]
pub struct MatcherRun {
    pub decisions: Vec<MatchDecision>,
    pub threshold: Threshold,
    pub p_x1_given_y0: Probability,
    pub predictor: LogisticModel,
    pub block_bests: Vec<ScoredBest>,
}

fn truth_map(corpus: &LinkageCorpus) -> HashMap<u32, Option<u32>> {
    corpus
        .truth
        .iter()
        .map(|t| (t.update_id, t.master_id))
        .collect()
}

struct ScoredBlocks {
    /// Indexed like `corpus.update`; `None` for an empty block.
    bests: Vec<Option<ScoredBest>>,
}

impl ScoredBlocks {
    fn decisions(&self, corpus: &LinkageCorpus, threshold: f64) -> Vec<MatchDecision> {
        corpus
            .update
            .iter()
            .zip(&self.bests)
            .map(|(update, best)| match best {
                Some(best) if best.score.get() >= threshold => MatchDecision {
                    update_id: update.id,
                    master_id: Some(best.master_id),
                    score: best.score,
                },
                Some(best) => MatchDecision {
                    update_id: update.id,
                    master_id: None,
                    score: best.score,
                },
                None => MatchDecision {
                    update_id: update.id,
                    master_id: None,
                    score: Probability::ZERO,
                },
            })
            .collect()
    }

    fn select_threshold_on(
        &self,
        holdout: &[usize],
        objective: ThresholdObjective,
    ) -> Result<Threshold, PosteriorError> {
        let labeled: Vec<(Probability, bool)> = holdout
            .iter()
            .filter_map(|&i| self.bests[i].map(|b| (b.score, b.correct)))
            .collect();
        select_threshold(&labeled, objective)
    }
}

/// Run per-block argmax over precomputed pair scores.
///
/// `scores[i]` holds `(master_index, score)` for update `i`'s candidates.
/// Ties go to the smallest master id.
fn best_per_block(
    corpus: &LinkageCorpus,
    scores: &[Vec<(usize, Probability)>],
    truth: &HashMap<u32, Option<u32>>,
) -> ScoredBlocks {
    let bests = corpus
        .update
        .iter()
        .zip(scores)
        .map(|(update, candidates)| {
            let mut best: Option<(u32, Probability)> = None;
            for &(master_idx, score) in candidates {
                let id = corpus.master[master_idx].id;
                let better = match best {
                    None => true,
                    Some((best_id, best_score)) => {
                        score.get() > best_score.get()
                            || (score.get() == best_score.get() && id < best_id)
                    }
                };
                if better {
                    best = Some((id, score));
                }
            }
            best.map(|(master_id, score)| ScoredBest {
                update_id: update.id,
                master_id,
                score,
                correct: truth.get(&update.id).copied().flatten() == Some(master_id),
            })
        })
        .collect();
    ScoredBlocks { bests }
}

fn sample_update_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let count = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    picked
}

/// The surrogate matcher. The `P(x1|x2)` predictor is fitted on every
/// candidate pair with the surrogate present — no match labels involved;
/// truth is consulted only for the small threshold-selection holdout.
pub fn run_matcher(corpus: &LinkageCorpus, cfg: &MatcherConfig) -> Result<MatcherRun, LinkageError> {
    if corpus.update.is_empty() || corpus.master.is_empty() {
        return Err(LinkageError::InvalidCorpus(
            "matcher needs nonempty master and update databases".into(),
        ));
    }
    let index = BlockIndex::build(&corpus.master);
    let truth = truth_map(corpus);

    // Candidate pair features, in (update, master) order.
    let mut pair_features: Vec<Vec<(usize, PairFeatures)>> = Vec::with_capacity(corpus.update.len());
    for update in &corpus.update {
        let candidates = index.candidates(&update.last);
        let features = candidates
            .iter()
            .map(|&mi| (mi, extract_features(update, &corpus.master[mi])))
            .collect();
        pair_features.push(features);
    }

    // Unlabeled training set: every pair with the surrogate observed.
    let train_data: Vec<(FeatureVector, bool)> = pair_features
        .iter()
        .flatten()
        .filter_map(|(_, f)| f.x1.map(|x1| (f.x2.clone(), x1)))
        .collect();
    let predictor = fit_logistic(&train_data, &cfg.train)?;

    let p0 = estimate_p_x1_given_y0(&corpus.master)?;
    let conditionals = ClassConditionalX1::hundred_percent_recall(p0.get())?;
    let model = SurrogateModel::new(conditionals, predictor, SurrogateMode::HundredPercentRecall)?
        .with_clamp_epsilon(cfg.clamp_epsilon)?;

    let mut scores: Vec<Vec<(usize, Probability)>> = Vec::with_capacity(pair_features.len());
    for features in &pair_features {
        let mut row = Vec::with_capacity(features.len());
        for (mi, f) in features {
            row.push((*mi, score_pair(f, &model)?));
        }
        scores.push(row);
    }
    let blocks = best_per_block(corpus, &scores, &truth);

    let threshold = match cfg.fixed_threshold {
        Some(value) => Threshold {
            value,
            objective: cfg.objective,
        },
        None => {
            let holdout =
                sample_update_indices(corpus.update.len(), cfg.holdout_fraction, cfg.seed);
            blocks.select_threshold_on(&holdout, cfg.objective)?
        }
    };

    Ok(MatcherRun {
        decisions: blocks.decisions(corpus, threshold.value),
        threshold,
        p_x1_given_y0: p0,
        predictor: model.predictor().clone(),
        block_bests: blocks.bests.into_iter().flatten().collect(),
    })
}

/// A supervised baseline run; decisions cover only the test split.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub decisions: Vec<MatchDecision>,
    pub threshold: Threshold,
    pub test_update_ids: Vec<u32>,
    pub block_bests: Vec<ScoredBest>,
}

/// Logistic regression from the concatenated `(x1, x2)` pair features to
/// match/non-match, trained on the blocks of a labeled fraction of update
/// records and evaluated on the rest, with the same per-block argmax rule.
pub fn run_supervised_baseline(
    corpus: &LinkageCorpus,
    labeled_fraction: f64,
    cfg: &MatcherConfig,
) -> Result<BaselineRun, LinkageError> {
    if corpus.update.is_empty() || corpus.master.is_empty() {
        return Err(LinkageError::InvalidCorpus(
            "baseline needs nonempty master and update databases".into(),
        ));
    }
    if !(0.0..1.0).contains(&labeled_fraction) || labeled_fraction == 0.0 {
        return Err(LinkageError::InvalidCorpus(format!(
            "labeled_fraction {labeled_fraction} outside (0, 1)"
        )));
    }
    let index = BlockIndex::build(&corpus.master);
    let truth = truth_map(corpus);

    let labeled = sample_update_indices(corpus.update.len(), labeled_fraction, cfg.seed);
    let labeled_set: std::collections::HashSet<usize> = labeled.iter().copied().collect();

    let pair_row = |update: &LinkageRecord, candidate: &LinkageRecord| -> FeatureVector {
        let f = extract_features(update, candidate);
        let mut values = vec![f.x1.map(|b| f64::from(u8::from(b)))];
        for i in 0..f.x2.len() {
            values.push(f.x2.value(i));
        }
        FeatureVector::from_options(values).expect("pair features are finite")
    };

    let mut train_data = Vec::new();
    for &ui in &labeled {
        let update = &corpus.update[ui];
        let truth_master = truth.get(&update.id).copied().flatten();
        for &mi in index.candidates(&update.last) {
            let candidate = &corpus.master[mi];
            train_data.push((
                pair_row(update, candidate),
                truth_master == Some(candidate.id),
            ));
        }
    }
    let model = fit_logistic(&train_data, &cfg.train)?;

    let score_block = |ui: usize| -> Result<Vec<(usize, Probability)>, LinkageError> {
        let update = &corpus.update[ui];
        index
            .candidates(&update.last)
            .iter()
            .map(|&mi| {
                let proba = model.predict_proba(&pair_row(update, &corpus.master[mi]))?;
                Ok((mi, proba))
            })
            .collect()
    };

    let mut scores: Vec<Vec<(usize, Probability)>> = Vec::with_capacity(corpus.update.len());
    for ui in 0..corpus.update.len() {
        scores.push(score_block(ui)?);
    }
    let blocks = best_per_block(corpus, &scores, &truth);

    let threshold = match cfg.fixed_threshold {
        Some(value) => Threshold {
            value,
            objective: cfg.objective,
        },
        None => blocks.select_threshold_on(&labeled, cfg.objective)?,
    };

    let test: Vec<usize> = (0..corpus.update.len())
        .filter(|i| !labeled_set.contains(i))
        .collect();
    let all_decisions = blocks.decisions(corpus, threshold.value);
    let decisions: Vec<MatchDecision> = test.iter().map(|&i| all_decisions[i]).collect();
    let test_ids: Vec<u32> = test.iter().map(|&i| corpus.update[i].id).collect();
    let test_id_set: std::collections::HashSet<u32> = test_ids.iter().copied().collect();

    Ok(BaselineRun {
        decisions,
        threshold,
        block_bests: blocks
            .bests
            .into_iter()
            .flatten()
            .filter(|b| test_id_set.contains(&b.update_id))
            .collect(),
        test_update_ids: test_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(id: u32, last: &str, year: Option<u16>) -> LinkageRecord {
        LinkageRecord {
            id,
            first: Some("Ann".into()),
            last: last.into(),
            middle_initial: Some('Q'),
            street: Some("12 Oak St".into()),
            phone: Some("5551234567".into()),
            specialty: Some("cardiology".into()),
            grad_year: year,
        }
    }

    #[test]
    fn blocking_returns_exact_last_name_matches() {
        let master = vec![
            record(1, "Smith", Some(1980)),
            record(2, "Jones", Some(1981)),
            record(3, "Smith", Some(1982)),
        ];
        let index = BlockIndex::build(&master);
        let update = record(10, "Smith", Some(1980));
        let blocked = block(&update, &master, &index);
        assert_eq!(
            blocked.iter().map(|r| r.id).collect::<Vec<_>>(),
            vec![1, 3]
        );
        let missing = record(11, "Nguyen", None);
        assert!(block(&missing, &master, &index).is_empty());
        let unique = record(12, "Jones", None);
        assert_eq!(block(&unique, &master, &index).len(), 1);
    }

    #[test]
    fn features_of_identical_records() {
        let a = record(1, "Smith", Some(1980));
        let f = extract_features(&a, &a);
        assert_eq!(f.x1, Some(true));
        for i in 0..PAIR_FEATURE_DIM {
            assert_eq!(f.x2.value(i), Some(1.0));
        }
    }

    #[test]
    fn missing_year_makes_x1_missing() {
        let a = record(1, "Smith", None);
        let b = record(2, "Smith", Some(1980));
        assert_eq!(extract_features(&a, &b).x1, None);
        let c = record(3, "Smith", Some(1990));
        assert_eq!(extract_features(&c, &b).x1, Some(false));
    }

    #[test]
    fn street_similarity_uses_normalized_edit_distance() {
        let mut a = record(1, "Lee", Some(1980));
        let mut b = record(2, "Lee", Some(1980));
        a.street = Some("Smith".into());
        b.street = Some("Smyth".into());
        let f = extract_features(&a, &b);
        assert_abs_diff_eq!(f.x2.value(2).unwrap(), 0.8, epsilon = 1e-15);
        b.street = None;
        let f = extract_features(&a, &b);
        assert_eq!(f.x2.value(2), None);
    }

    #[test]
    fn year_collision_estimate() {
        let same: Vec<LinkageRecord> =
            (0..5).map(|i| record(i, "A", Some(1980))).collect();
        assert_eq!(estimate_p_x1_given_y0(&same).unwrap().get(), 1.0);

        let uniform: Vec<LinkageRecord> = (0..10)
            .map(|i| record(i, "A", Some(1980 + (i % 5) as u16)))
            .collect();
        assert_abs_diff_eq!(
            estimate_p_x1_given_y0(&uniform).unwrap().get(),
            0.2,
            epsilon = 1e-12
        );

        let too_few = vec![record(0, "A", Some(1980)), record(1, "B", None)];
        assert_eq!(
            estimate_p_x1_given_y0(&too_few),
            Err(LinkageError::InsufficientData)
        );
    }

    #[test]
    fn score_pair_case_split() {
        let cond = ClassConditionalX1::hundred_percent_recall(0.1).unwrap();
        let data = vec![
            (FeatureVector::dense(vec![1.0; 5]).unwrap(), true),
            (FeatureVector::dense(vec![0.0; 5]).unwrap(), false),
            (FeatureVector::dense(vec![0.9; 5]).unwrap(), true),
            (FeatureVector::dense(vec![0.1; 5]).unwrap(), false),
        ];
        let predictor = fit_logistic(&data, &TrainConfig::default()).unwrap();
        let model =
            SurrogateModel::new(cond, predictor, SurrogateMode::HundredPercentRecall).unwrap();

        let high = FeatureVector::dense(vec![1.0; 5]).unwrap();
        let zero = score_pair(
            &PairFeatures {
                x1: Some(false),
                x2: high.clone(),
            },
            &model,
        )
        .unwrap();
        assert_eq!(zero.get(), 0.0);

        let present = score_pair(
            &PairFeatures {
                x1: Some(true),
                x2: high.clone(),
            },
            &model,
        )
        .unwrap();
        assert!(present.get() > 0.9);

        let missing = score_pair(
            &PairFeatures {
                x1: None,
                x2: high.clone(),
            },
            &model,
        )
        .unwrap();
        let px = model.p_x1_given_x2(&high).unwrap();
        assert_abs_diff_eq!(
            missing.get(),
            px.get() * present.get(),
            epsilon = 1e-12
        );
    }
}
