//! Random class-conditionally independent joints for property testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::DatagenError;
use crate::oracle::CIJointSpec;

/// Upper bound on rejection-sampling attempts before giving up.
pub const MAX_REJECTION_RETRIES: usize = 100_000;

/// Normalized Exp(1) draws: uniform on the simplex.
fn uniform_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    // Absorb rounding into the largest entry so the sum is exactly 1.
    let drift = 1.0 - v.iter().sum::<f64>();
    let argmax = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    v[argmax] += drift;
    v
}

fn validate_args(k: usize, min_margin: f64) -> Result<(), DatagenError> {
    if k < 2 {
        return Err(DatagenError::InvalidSpec(format!(
            "need at least 2 x2 cells, got {k}"
        )));
    }
    if !(min_margin.is_finite() && (0.0..1.0).contains(&min_margin)) {
        return Err(DatagenError::InvalidSpec(format!(
            "min_margin {min_margin} outside [0, 1)"
        )));
    }
    Ok(())
}

/// A random CI joint spec whose `P(x1=1|y)` values differ by at least
/// `min_margin`, found by rejection sampling.
pub fn random_ci_joint(k: usize, seed: u64, min_margin: f64) -> Result<CIJointSpec, DatagenError> {
    validate_args(k, min_margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTION_RETRIES {
        let p0: f64 = rng.random();
        let p1: f64 = rng.random();
        if (p1 - p0).abs() < min_margin {
            continue;
        }
        let p_y0 = 0.05 + 0.9 * rng.random::<f64>();
        let q0 = uniform_simplex(&mut rng, k);
        let q1 = uniform_simplex(&mut rng, k);
        return Ok(CIJointSpec::new(p_y0, p0, p1, q0, q1)?);
    }
    Err(DatagenError::RetriesExhausted(MAX_REJECTION_RETRIES))
}

/// Like [`random_ci_joint`] but with `P(x1=1|y=1)` pinned to exactly 1, the
/// 100%-recall case; the margin applies to `1 - P(x1=1|y=0)`.
pub fn random_recall_joint(
    k: usize,
    seed: u64,
    min_margin: f64,
) -> Result<CIJointSpec, DatagenError> {
    validate_args(k, min_margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTION_RETRIES {
        let p0: f64 = rng.random();
        if p0 <= 0.0 || 1.0 - p0 < min_margin {
            continue;
        }
        let p_y0 = 0.05 + 0.9 * rng.random::<f64>();
        let q0 = uniform_simplex(&mut rng, k);
        let q1 = uniform_simplex(&mut rng, k);
        return Ok(CIJointSpec::new(p_y0, p0, 1.0, q0, q1)?);
    }
    Err(DatagenError::RetriesExhausted(MAX_REJECTION_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DiscreteJoint;

    #[test]
    fn sampled_specs_satisfy_invariants() {
        for seed in [1, 2, 3] {
            let spec = random_ci_joint(5, seed, 0.05).unwrap();
            let margin =
                (spec.p_x1_given_y1.get() - spec.p_x1_given_y0.get()).abs();
            assert!(margin >= 0.05, "margin {margin}");
            // Expanding validates the simplexes and normalization.
            DiscreteJoint::from_ci_spec(&spec).unwrap();
        }
    }

    #[test]
    fn extreme_margin_forces_near_deterministic_conditionals() {
        let spec = random_ci_joint(2, 11, 0.99).unwrap();
        let (lo, hi) = (
            spec.p_x1_given_y0.get().min(spec.p_x1_given_y1.get()),
            spec.p_x1_given_y0.get().max(spec.p_x1_given_y1.get()),
        );
        assert!(lo < 0.01 && hi > 0.99);
    }

    #[test]
    fn smallest_cell_count_works() {
        let spec = random_ci_joint(2, 4, 0.05).unwrap();
        assert_eq!(spec.k(), 2);
        assert!(random_ci_joint(1, 4, 0.05).is_err());
    }

    #[test]
    fn recall_joint_has_unit_conditional() {
        for seed in 0..10 {
            let spec = random_recall_joint(4, seed, 0.05).unwrap();
            assert_eq!(spec.p_x1_given_y1.get(), 1.0);
            assert!(1.0 - spec.p_x1_given_y0.get() >= 0.05);
            let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
            assert_eq!(joint.p_x1_y(false, true), 0.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            random_ci_joint(6, 99, 0.05).unwrap(),
            random_ci_joint(6, 99, 0.05).unwrap()
        );
    }
}
