//! Posterior reconstruction from a surrogate feature.
//!
//! For a two-class problem with feature blocks `x1` and `x2` that are
//! class-conditionally independent, the class posterior can be rewritten in
//! terms of `P(x1|x2)` (learnable from unlabeled data alone) and `P(x1|y)`
//! (a pair of scalars when `x1` is binary). This module houses those
//! identities, the 100%-recall special case, the missing-surrogate marginal
//! score, and threshold selection on the reconstructed posterior.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default clamp applied to estimated probabilities before they enter a
/// division. Keeps estimation noise from violating the non-degeneracy
/// assumptions the algebra relies on.
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-6;

/// Largest clamp epsilon accepted by [`crate::model::SurrogateModel`].
pub const MAX_CLAMP_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PosteriorError {
    #[error("value {value} outside {expected}")]
    Domain { value: f64, expected: &'static str },
    #[error("class conditionals too close: |{p1} - {p0}| < {eps}")]
    DegenerateConditionals { p0: f64, p1: f64, eps: f64 },
    #[error("threshold selection needs at least one example of each label")]
    InsufficientLabels,
}

/// A probability, guaranteed finite and in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self, PosteriorError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(PosteriorError::Domain {
                value,
                expected: "[0, 1]",
            })
        }
    }

    /// Clip an arbitrary finite value into `[0, 1]`.
    pub fn clamped01(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    /// Clip into `[eps, 1 - eps]`.
    pub fn clamped(value: f64, eps: f64) -> Self {
        Self(value.clamp(eps, 1.0 - eps))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

/// `P(x1 = 1 | y)` for both classes. `x1` is the binary surrogate feature.
///
/// The two values must differ (otherwise `x1` carries no class information
/// and the reconstruction divides by zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassConditionalX1 {
    p_x1_given_y0: Probability,
    p_x1_given_y1: Probability,
}

impl ClassConditionalX1 {
    pub fn new(p_x1_given_y0: f64, p_x1_given_y1: f64) -> Result<Self, PosteriorError> {
        let p0 = Probability::new(p_x1_given_y0)?;
        let p1 = Probability::new(p_x1_given_y1)?;
        if p0 == p1 {
            return Err(PosteriorError::DegenerateConditionals {
                p0: p0.get(),
                p1: p1.get(),
                eps: 0.0,
            });
        }
        Ok(Self {
            p_x1_given_y0: p0,
            p_x1_given_y1: p1,
        })
    }

    /// Conditionals for the 100%-recall case: `P(x1=1|y=1)` is exactly 1,
    /// i.e. every positive example has `x1 = 1`.
    pub fn hundred_percent_recall(p_x1_given_y0: f64) -> Result<Self, PosteriorError> {
        Self::new(p_x1_given_y0, 1.0)
    }

    /// `P(x1 = 1 | y = 0)`.
    pub fn p_x1_given_y0(&self) -> Probability {
        self.p_x1_given_y0
    }

    /// `P(x1 = 1 | y = 1)`.
    pub fn p_x1_given_y1(&self) -> Probability {
        self.p_x1_given_y1
    }
}

fn observed(p: f64, x1_observed: bool) -> f64 {
    if x1_observed {
        p
    } else {
        1.0 - p
    }
}

fn check_open_unit(value: f64) -> Result<f64, PosteriorError> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(PosteriorError::Domain {
            value,
            expected: "(0, 1)",
        })
    }
}

fn posterior_general_raw(
    p_x1_given_x2: f64,
    cond: &ClassConditionalX1,
    x1_observed: bool,
) -> f64 {
    let px = observed(p_x1_given_x2, x1_observed);
    let p0 = observed(cond.p_x1_given_y0.get(), x1_observed);
    let p1 = observed(cond.p_x1_given_y1.get(), x1_observed);
    (p0 / px) * ((p1 - px) / (p1 - p0))
}

/// `P(y = 0 | x1, x2)` reconstructed from `P(x1=1|x2)` and `P(x1=1|y)`.
///
/// All inputs use the `x1 = 1` convention; the flip to the observed value of
/// `x1` happens here. The raw identity can leave `[0, 1]` when the inputs are
/// noisy estimates, so the result is clipped.
pub fn posterior_general(
    p_x1_given_x2: Probability,
    cond: &ClassConditionalX1,
    x1_observed: bool,
    eps: f64,
) -> Result<Probability, PosteriorError> {
    check_open_unit(p_x1_given_x2.get())?;
    let p0 = cond.p_x1_given_y0.get();
    let p1 = cond.p_x1_given_y1.get();
    if (p1 - p0).abs() < eps {
        return Err(PosteriorError::DegenerateConditionals { p0, p1, eps });
    }
    Ok(Probability::clamped01(posterior_general_raw(
        p_x1_given_x2.get(),
        cond,
        x1_observed,
    )))
}

/// Unclipped 100%-recall score; see [`score_special`].
///
/// Strictly increasing in `p_x1eq0_given_x2`, which makes it usable as a
/// ranking key even where the clipped posterior saturates at 1.
pub fn score_special_raw(
    p_x1eq0_given_x2: Probability,
    cond: &ClassConditionalX1,
    eps: f64,
) -> Result<f64, PosteriorError> {
    let q = check_open_unit(p_x1eq0_given_x2.get())?;
    let p0 = cond.p_x1_given_y0.get();
    let p_x1eq0_given_y0 = 1.0 - p0;
    if p_x1eq0_given_y0 < eps {
        return Err(PosteriorError::DegenerateConditionals {
            p0,
            p1: cond.p_x1_given_y1.get(),
            eps,
        });
    }
    Ok((p0 / p_x1eq0_given_y0) * (q / (1.0 - q)))
}

/// `P(y = 0 | x1 = 1, x2)` in the 100%-recall case.
///
/// With `P(x1=0, y=1) = 0` the general identity collapses to
/// `[P(x1=1|y=0) / P(x1=0|y=0)] * [P(x1=0|x2) / (1 - P(x1=0|x2))]`,
/// a monotone function of `P(x1=0|x2)` alone.
pub fn score_special(
    p_x1eq0_given_x2: Probability,
    cond: &ClassConditionalX1,
    eps: f64,
) -> Result<Probability, PosteriorError> {
    score_special_raw(p_x1eq0_given_x2, cond, eps).map(Probability::clamped01)
}

/// `P(y = 1 | x2)` for a record whose surrogate feature is missing:
/// `P(y=1 | x1=1, x2) * P(x1=1 | x2)`.
///
/// Valid under the 100%-recall assumption, where `y = 1` forces `x1 = 1`.
pub fn score_missing_x1(
    p_x1eq1_given_x2: Probability,
    posterior_y1_given_x1eq1_x2: Probability,
) -> Probability {
    Probability::clamped01(p_x1eq1_given_x2.get() * posterior_y1_given_x1eq1_x2.get())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdObjective {
    F1,
    Accuracy,
}

/// A decision threshold on the posterior-for-`y=1` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub objective: ThresholdObjective,
}

fn objective_value(objective: ThresholdObjective, tp: usize, fp: usize, n_pos: usize, n_neg: usize) -> f64 {
    let fneg = n_pos - tp;
    match objective {
        ThresholdObjective::F1 => {
            let denom = 2 * tp + fp + fneg;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        }
        ThresholdObjective::Accuracy => {
            let tn = n_neg - fp;
            (tp + tn) as f64 / (n_pos + n_neg) as f64
        }
    }
}

/// Pick the threshold maximizing `objective` over a labeled sample, where an
/// item is predicted positive when its score is `>=` the threshold.
///
/// Candidates are the midpoints between consecutive distinct scores plus the
/// sentinels 0 and 1; among ties the smallest maximizing threshold wins.
pub fn select_threshold(
    scores: &[(Probability, bool)],
    objective: ThresholdObjective,
) -> Result<Threshold, PosteriorError> {
    let n_pos = scores.iter().filter(|(_, label)| *label).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PosteriorError::InsufficientLabels);
    }

    let mut sorted: Vec<(f64, bool)> = scores.iter().map(|(s, l)| (s.get(), *l)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut distinct: Vec<f64> = sorted.iter().map(|(s, _)| *s).collect();
    distinct.dedup();

    let mut candidates = vec![0.0];
    candidates.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(1.0);

    // Suffix positive counts over the sorted scores: pos_at_or_after[i] is the
    // number of positive labels in sorted[i..].
    let mut pos_at_or_after = vec![0usize; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        pos_at_or_after[i] = pos_at_or_after[i + 1] + usize::from(sorted[i].1);
    }

    let mut cut = 0; // first index with score >= current candidate
    let mut best: Option<(f64, f64)> = None; // (objective, threshold)
    for t in candidates {
        while cut < sorted.len() && sorted[cut].0 < t {
            cut += 1;
        }
        let tp = pos_at_or_after[cut];
        let fp = sorted.len() - cut - tp;
        let value = objective_value(objective, tp, fp, n_pos, n_neg);
        if best.map_or(true, |(v, _)| value > v) {
            best = Some((value, t));
        }
    }

    let (_, value) = best.expect("candidate list is never empty");
    Ok(Threshold { value, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cond(p0: f64, p1: f64) -> ClassConditionalX1 {
        ClassConditionalX1::new(p0, p1).unwrap()
    }

    fn prob(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(1.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(Probability::clamped01(1.7).get(), 1.0);
        assert_eq!(Probability::clamped(0.0, 1e-6).get(), 1e-6);
    }

    #[test]
    fn conditionals_reject_equal_values() {
        assert!(matches!(
            ClassConditionalX1::new(0.4, 0.4),
            Err(PosteriorError::DegenerateConditionals { .. })
        ));
        assert!(ClassConditionalX1::hundred_percent_recall(1.0).is_err());
    }

    #[test]
    fn posterior_at_class_conditional_is_certain() {
        // P(x1|x2) equal to P(x1|y=0) forces P(y=0|x1,x2) = 1, and equal to
        // P(x1|y=1) forces 0; both for either observed value of x1.
        let c = cond(0.4, 0.8);
        for x1 in [false, true] {
            let at_y0 = posterior_general(prob(0.4), &c, x1, 1e-6).unwrap();
            let at_y1 = posterior_general(prob(0.8), &c, x1, 1e-6).unwrap();
            assert_abs_diff_eq!(at_y0.get(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(at_y1.get(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn posterior_mixture_hand_value() {
        // p_y0 = 0.5 and an uninformative x2 cell: P(x1=1|x2) = 0.6,
        // P(y=0|x1=1,x2) = 0.5*0.4/0.6 = 1/3, P(y=0|x1=0,x2) = 0.5*0.6/0.4 = 3/4.
        // The same x1=1-convention input serves both observed values.
        let c = cond(0.4, 0.8);
        let p1 = posterior_general(prob(0.6), &c, true, 1e-6).unwrap();
        let p0 = posterior_general(prob(0.6), &c, false, 1e-6).unwrap();
        assert_abs_diff_eq!(p1.get(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p0.get(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn posterior_rejects_degenerate_and_boundary_inputs() {
        let c = cond(0.5, 0.5 + 1e-9);
        assert!(matches!(
            posterior_general(prob(0.5), &c, true, 1e-6),
            Err(PosteriorError::DegenerateConditionals { .. })
        ));
        let c = cond(0.4, 0.8);
        assert!(posterior_general(Probability::ZERO, &c, true, 1e-6).is_err());
        assert!(posterior_general(Probability::ONE, &c, true, 1e-6).is_err());
    }

    #[test]
    fn score_special_example2_value() {
        // Example-2-style conditionals: P(x1=1|y=0) = 0.4, so P(x1=0|y=0) = 0.6.
        // At P(x1=0|x2) = 0.5 the odds factor is 1 and the score is 0.4/0.6.
        let c = ClassConditionalX1::hundred_percent_recall(0.4).unwrap();
        let s = score_special(prob(0.5), &c, 1e-6).unwrap();
        assert_abs_diff_eq!(s.get(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn score_special_limit_cases() {
        let c = ClassConditionalX1::hundred_percent_recall(0.4).unwrap();
        let eps = 1e-6;
        let near_zero = score_special(prob(eps), &c, eps).unwrap();
        assert!(near_zero.get() < 1e-5);
        // Degenerate when P(x1=0|y=0) vanishes.
        let c_bad = cond(1.0 - 1e-9, 0.5);
        assert!(matches!(
            score_special(prob(0.5), &c_bad, eps),
            Err(PosteriorError::DegenerateConditionals { .. })
        ));
    }

    #[test]
    fn score_missing_x1_identities() {
        assert_abs_diff_eq!(
            score_missing_x1(Probability::ONE, prob(0.37)).get(),
            0.37,
            epsilon = 0.0
        );
        assert_eq!(score_missing_x1(prob(0.9), Probability::ZERO).get(), 0.0);
    }

    #[test]
    fn threshold_separable_pair_is_midpoint() {
        let scores = [(prob(0.9), true), (prob(0.1), false)];
        for objective in [ThresholdObjective::F1, ThresholdObjective::Accuracy] {
            let t = select_threshold(&scores, objective).unwrap();
            assert_abs_diff_eq!(t.value, 0.5, epsilon = 0.0);
        }
    }

    #[test]
    fn threshold_identical_scores_follows_majority() {
        let mostly_pos = [(prob(0.7), true), (prob(0.7), true), (prob(0.7), false)];
        let mostly_neg = [(prob(0.7), false), (prob(0.7), false), (prob(0.7), true)];
        let t = select_threshold(&mostly_pos, ThresholdObjective::Accuracy).unwrap();
        assert_eq!(t.value, 0.0);
        let t = select_threshold(&mostly_neg, ThresholdObjective::Accuracy).unwrap();
        assert_eq!(t.value, 1.0);
        // F1 prefers predicting the positives even in the minority case.
        let t = select_threshold(&mostly_neg, ThresholdObjective::F1).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn threshold_requires_both_labels() {
        let scores = [(prob(0.9), true), (prob(0.1), true)];
        assert_eq!(
            select_threshold(&scores, ThresholdObjective::F1),
            Err(PosteriorError::InsufficientLabels)
        );
    }

    /// Naive recount used as the independent side of the threshold check.
    fn exhaustive_best(
        scores: &[(Probability, bool)],
        objective: ThresholdObjective,
    ) -> (f64, f64) {
        let mut vals: Vec<f64> = scores.iter().map(|(s, _)| s.get()).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut candidates = vec![0.0];
        candidates.extend(vals.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        candidates.push(1.0);
        let n_pos = scores.iter().filter(|(_, l)| *l).count();
        let n_neg = scores.len() - n_pos;
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for t in candidates {
            let tp = scores.iter().filter(|(s, l)| *l && s.get() >= t).count();
            let fp = scores.iter().filter(|(s, l)| !*l && s.get() >= t).count();
            let v = objective_value(objective, tp, fp, n_pos, n_neg);
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn select_threshold_matches_exhaustive_search(
            raw in proptest::collection::vec((0.0f64..=1.0, proptest::bool::ANY), 2..50),
            objective in prop_oneof![Just(ThresholdObjective::F1), Just(ThresholdObjective::Accuracy)],
        ) {
            let scores: Vec<(Probability, bool)> =
                raw.iter().map(|(s, l)| (Probability::new(*s).unwrap(), *l)).collect();
            let n_pos = scores.iter().filter(|(_, l)| *l).count();
            prop_assume!(n_pos > 0 && n_pos < scores.len());

            let picked = select_threshold(&scores, objective).unwrap();
            let (best_value, best_t) = exhaustive_best(&scores, objective);

            let tp = scores.iter().filter(|(s, l)| *l && s.get() >= picked.value).count();
            let fp = scores.iter().filter(|(s, l)| !*l && s.get() >= picked.value).count();
            let picked_value =
                objective_value(objective, tp, fp, n_pos, scores.len() - n_pos);
            prop_assert!((picked_value - best_value).abs() < 1e-12);
            // Tie rule: nothing smaller achieves the optimum.
            prop_assert!(picked.value <= best_t + 1e-12);
        }

        #[test]
        fn posterior_pair_normalizes_before_clipping(
            px in 0.01f64..0.99,
            p0 in 0.01f64..0.99,
            gap in 0.05f64..0.5,
            x1 in proptest::bool::ANY,
        ) {
            let p1 = (p0 + gap).min(0.999);
            let c = cond(p0, p1);
            let flipped = ClassConditionalX1::new(p1, p0).unwrap();
            // Swapping the class roles computes P(y=1 | x1, x2).
            let y0 = posterior_general_raw(px, &c, x1);
            let y1 = posterior_general_raw(px, &flipped, x1);
            prop_assert!((y0 + y1 - 1.0).abs() < 1e-10);
        }

        #[test]
        fn score_special_strictly_increasing(
            p0 in 0.01f64..0.99,
            a in 0.001f64..0.999,
            b in 0.001f64..0.999,
        ) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let c = ClassConditionalX1::hundred_percent_recall(p0).unwrap();
            let s_lo = score_special_raw(prob(lo), &c, 1e-6).unwrap();
            let s_hi = score_special_raw(prob(hi), &c, 1e-6).unwrap();
            prop_assert!(s_lo < s_hi);
        }
    }
}
