//! Seeded synthetic data: samplers for the worked example distributions,
//! random class-conditionally independent joints for property tests, and a
//! two-database record-linkage corpus generator.

mod ci;
mod corpus;
mod example;

pub use ci::{random_ci_joint, random_recall_joint, MAX_REJECTION_RETRIES};
pub use corpus::{gen_linkage_corpus, FieldNoise, LinkageCorpusSpec};
pub use example::{ExampleSample, ExampleSpec, JointX1Y};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::oracle::{DiscreteJoint, OracleError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DatagenError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("rejection sampling exhausted after {0} attempts")]
    RetriesExhausted(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// One draw from a [`DiscreteJoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointSample {
    pub x1: bool,
    pub x2: usize,
    pub y: bool,
}

/// I.i.d. draws from the full joint, deterministic per seed.
pub fn sample_joint(joint: &DiscreteJoint, n: usize, seed: u64) -> Vec<JointSample> {
    let k = joint.k();
    let mut cells = Vec::with_capacity(4 * k);
    let mut acc = 0.0;
    for x1 in [false, true] {
        for x2 in 0..k {
            for y in [false, true] {
                acc += joint.p(x1, x2, y);
                cells.push((acc, JointSample { x1, x2, y }));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let pos = cells.partition_point(|(c, _)| *c < u);
            cells[pos.min(cells.len() - 1)].1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::CIJointSpec;

    #[test]
    fn joint_sampling_matches_cell_masses() {
        let spec = CIJointSpec::new(0.5, 0.2, 0.9, vec![0.7, 0.3], vec![0.4, 0.6]).unwrap();
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        let n = 200_000;
        let samples = sample_joint(&joint, n, 3);
        assert_eq!(samples.len(), n);
        for x1 in [false, true] {
            for x2 in 0..joint.k() {
                for y in [false, true] {
                    let count = samples
                        .iter()
                        .filter(|s| s.x1 == x1 && s.x2 == x2 && s.y == y)
                        .count();
                    let expected = joint.p(x1, x2, y);
                    let freq = count as f64 / n as f64;
                    assert!(
                        (freq - expected).abs() < 0.01,
                        "cell ({x1},{x2},{y}): {freq} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn joint_sampling_is_deterministic() {
        let spec = CIJointSpec::new(0.4, 0.2, 0.9, vec![0.5, 0.5], vec![0.3, 0.7]).unwrap();
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        assert_eq!(sample_joint(&joint, 500, 9), sample_joint(&joint, 500, 9));
    }
}
