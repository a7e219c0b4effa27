//! Exact probability computations over small finite joints.
//!
//! A [`DiscreteJoint`] stores the full table `P(x1, x2, y)` for binary `x1`,
//! binary `y` and a discretized `x2` with `K` cells. Every conditional the
//! surrogate formulas reconstruct can be read off the table by brute-force
//! summation, which makes the joint the ground truth the identities are
//! verified against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::{ClassConditionalX1, PosteriorError, Probability};

/// Absolute tolerance on normalization checks.
pub const TABLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("joint table must be nonnegative with {expected} entries summing to 1 (got {detail})")]
    InvalidTable { expected: usize, detail: String },
    #[error("simplex vector must be nonnegative and sum to 1 (sum = {sum})")]
    InvalidSimplex { sum: f64 },
    #[error("zero marginal at {context}")]
    ZeroMarginal { context: String },
    #[error(transparent)]
    Degenerate(#[from] PosteriorError),
}

fn check_simplex(v: &[f64]) -> Result<(), OracleError> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > TABLE_TOLERANCE {
        return Err(OracleError::InvalidSimplex { sum });
    }
    Ok(())
}

/// A class-conditionally independent joint, specified by its factors:
/// `P(y)`, `P(x1=1|y)` and the simplex `P(x2|y)` for each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CIJointSpec {
    pub p_y0: Probability,
    pub p_x1_given_y0: Probability,
    pub p_x1_given_y1: Probability,
    pub p_x2_given_y0: Vec<f64>,
    pub p_x2_given_y1: Vec<f64>,
}

impl CIJointSpec {
    pub fn new(
        p_y0: f64,
        p_x1_given_y0: f64,
        p_x1_given_y1: f64,
        p_x2_given_y0: Vec<f64>,
        p_x2_given_y1: Vec<f64>,
    ) -> Result<Self, OracleError> {
        if p_x2_given_y0.len() != p_x2_given_y1.len() || p_x2_given_y0.is_empty() {
            return Err(OracleError::InvalidSimplex { sum: f64::NAN });
        }
        check_simplex(&p_x2_given_y0)?;
        check_simplex(&p_x2_given_y1)?;
        Ok(Self {
            p_y0: Probability::new(p_y0).map_err(OracleError::from)?,
            p_x1_given_y0: Probability::new(p_x1_given_y0)?,
            p_x1_given_y1: Probability::new(p_x1_given_y1)?,
            p_x2_given_y0,
            p_x2_given_y1,
        })
    }

    pub fn k(&self) -> usize {
        self.p_x2_given_y0.len()
    }
}

/// Exact joint `P(x1, x2, y)` over `{0,1} x {0..k-1} x {0,1}`.
///
/// Serializes as the cell count `k` plus the flat row-major table, indexed by
/// `(x1 * k + x2) * 2 + y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    k: usize,
    table: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(k: usize, table: Vec<f64>) -> Result<Self, OracleError> {
        let expected = 4 * k;
        if k == 0 || table.len() != expected {
            return Err(OracleError::InvalidTable {
                expected,
                detail: format!("{} entries", table.len()),
            });
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(OracleError::InvalidTable {
                expected,
                detail: "negative or non-finite entry".into(),
            });
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > TABLE_TOLERANCE {
            return Err(OracleError::InvalidTable {
                expected,
                detail: format!("sum = {sum}"),
            });
        }
        Ok(Self { k, table })
    }

    /// Expand a CI specification into the full table
    /// `P(x1, x2, y) = P(y) P(x1|y) P(x2|y)`.
    pub fn from_ci_spec(spec: &CIJointSpec) -> Result<Self, OracleError> {
        let k = spec.k();
        let p_y = [spec.p_y0.get(), 1.0 - spec.p_y0.get()];
        let p_x1 = [spec.p_x1_given_y0.get(), spec.p_x1_given_y1.get()];
        let mut table = vec![0.0; 4 * k];
        for x1 in 0..2 {
            for x2 in 0..k {
                for y in 0..2 {
                    let px1 = if x1 == 1 { p_x1[y] } else { 1.0 - p_x1[y] };
                    let px2 = if y == 0 {
                        spec.p_x2_given_y0[x2]
                    } else {
                        spec.p_x2_given_y1[x2]
                    };
                    table[(x1 * k + x2) * 2 + y] = p_y[y] * px1 * px2;
                }
            }
        }
        Self::new(k, table)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn idx(&self, x1: bool, x2: usize, y: bool) -> usize {
        (usize::from(x1) * self.k + x2) * 2 + usize::from(y)
    }

    /// Cell mass `P(x1, x2, y)`.
    pub fn p(&self, x1: bool, x2: usize, y: bool) -> f64 {
        self.table[self.idx(x1, x2, y)]
    }

    /// Marginal `P(x2)`.
    pub fn p_x2(&self, x2: usize) -> f64 {
        self.p(false, x2, false)
            + self.p(false, x2, true)
            + self.p(true, x2, false)
            + self.p(true, x2, true)
    }

    /// Marginal `P(x1, y)`.
    pub fn p_x1_y(&self, x1: bool, y: bool) -> f64 {
        (0..self.k).map(|x2| self.p(x1, x2, y)).sum()
    }

    /// Marginal `P(y)`.
    pub fn p_y(&self, y: bool) -> f64 {
        self.p_x1_y(false, y) + self.p_x1_y(true, y)
    }

    /// Exact `P(x1 = 1 | x2)`.
    pub fn cond_x1_given_x2(&self, x2: usize) -> Result<Probability, OracleError> {
        let denom = self.p_x2(x2);
        if denom <= 0.0 {
            return Err(OracleError::ZeroMarginal {
                context: format!("P(x2 = {x2})"),
            });
        }
        let num = self.p(true, x2, false) + self.p(true, x2, true);
        Ok(Probability::clamped01(num / denom))
    }

    /// Exact `P(y = 0 | x1, x2)`.
    pub fn cond_y_given_x1_x2(&self, x1: bool, x2: usize) -> Result<Probability, OracleError> {
        let denom = self.p(x1, x2, false) + self.p(x1, x2, true);
        if denom <= 0.0 {
            return Err(OracleError::ZeroMarginal {
                context: format!("P(x1 = {}, x2 = {x2})", u8::from(x1)),
            });
        }
        Ok(Probability::clamped01(self.p(x1, x2, false) / denom))
    }

    /// Exact `P(y = 0 | x2)`, marginalized over `x1`.
    pub fn cond_y_given_x2(&self, x2: usize) -> Result<Probability, OracleError> {
        let denom = self.p_x2(x2);
        if denom <= 0.0 {
            return Err(OracleError::ZeroMarginal {
                context: format!("P(x2 = {x2})"),
            });
        }
        let num = self.p(false, x2, false) + self.p(true, x2, false);
        Ok(Probability::clamped01(num / denom))
    }

    /// Exact `P(x1 = 1 | y)` for both classes.
    pub fn cond_x1_given_y(&self) -> Result<ClassConditionalX1, OracleError> {
        let mut conds = [0.0; 2];
        for (y, slot) in conds.iter_mut().enumerate() {
            let y = y == 1;
            let denom = self.p_y(y);
            if denom <= 0.0 {
                return Err(OracleError::ZeroMarginal {
                    context: format!("P(y = {})", u8::from(y)),
                });
            }
            *slot = self.p_x1_y(true, y) / denom;
        }
        Ok(ClassConditionalX1::new(conds[0], conds[1])?)
    }

    /// Accuracy of the Bayes rule `argmax_y P(y | x1, x2)`: the sum over all
    /// cells of the larger class mass. Thresholding the true posterior at 0.5
    /// achieves exactly this.
    pub fn bayes_accuracy(&self) -> f64 {
        let mut acc = 0.0;
        for x1 in [false, true] {
            for x2 in 0..self.k {
                acc += self.p(x1, x2, false).max(self.p(x1, x2, true));
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Example-1 shaped CI spec: joint P(x1, y) = {0.3, 0.1, 0.2, 0.4} and an
    /// arbitrary informative pair of x2 simplexes.
    fn example1_spec(k: usize) -> CIJointSpec {
        let q0: Vec<f64> = (0..k).map(|i| (i + 1) as f64).collect();
        let s0: f64 = q0.iter().sum();
        let q0: Vec<f64> = q0.iter().map(|v| v / s0).collect();
        let q1: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
        let s1: f64 = q1.iter().sum();
        let q1: Vec<f64> = q1.iter().map(|v| v / s1).collect();
        CIJointSpec::new(0.5, 0.4, 0.8, q0, q1).unwrap()
    }

    #[test]
    fn ci_spec_rejects_bad_simplex() {
        assert!(CIJointSpec::new(0.5, 0.4, 0.8, vec![0.5, 0.6], vec![0.5, 0.5]).is_err());
        assert!(CIJointSpec::new(0.5, 0.4, 0.8, vec![0.5, 0.5], vec![]).is_err());
        assert!(CIJointSpec::new(1.5, 0.4, 0.8, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(DiscreteJoint::new(1, vec![0.25; 4]).is_ok());
        assert!(DiscreteJoint::new(1, vec![0.5; 4]).is_err());
        assert!(DiscreteJoint::new(1, vec![0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(DiscreteJoint::new(2, vec![0.25; 4]).is_err());
    }

    #[test]
    fn uniform_x2_carries_no_information() {
        let k = 4;
        let uniform = vec![1.0 / k as f64; k];
        let spec = CIJointSpec::new(0.6, 0.3, 0.9, uniform.clone(), uniform).unwrap();
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        for x1 in [false, true] {
            let first = joint.cond_y_given_x1_x2(x1, 0).unwrap().get();
            for x2 in 1..k {
                assert_abs_diff_eq!(
                    joint.cond_y_given_x1_x2(x1, x2).unwrap().get(),
                    first,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn recall_spec_has_zero_mass_on_x1eq0_y1() {
        // Example-2 shaped spec: joint P(x1, y) = {0.3, 0.0, 0.2, 0.5}.
        let spec = CIJointSpec::new(0.5, 0.4, 1.0, vec![0.5, 0.5], vec![0.1, 0.9]).unwrap();
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        assert_eq!(joint.p_x1_y(false, true), 0.0);
        assert_abs_diff_eq!(joint.p_x1_y(false, false), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(joint.p_x1_y(true, false), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(joint.p_x1_y(true, true), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn conditional_independence_holds_cellwise() {
        let spec = example1_spec(5);
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        for y in [false, true] {
            let p_y = joint.p_y(y);
            for x1 in [false, true] {
                let p_x1 = joint.p_x1_y(x1, y) / p_y;
                for x2 in 0..joint.k() {
                    let p_x2: f64 = joint.p(false, x2, y) + joint.p(true, x2, y);
                    let p_x2 = p_x2 / p_y;
                    assert_abs_diff_eq!(
                        joint.p(x1, x2, y) / p_y,
                        p_x1 * p_x2,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn conditionals_recombine_to_table() {
        let spec = example1_spec(6);
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        for x1 in [false, true] {
            for x2 in 0..joint.k() {
                let p_x1_x2 = joint.p(x1, x2, false) + joint.p(x1, x2, true);
                let p_y0 = joint.cond_y_given_x1_x2(x1, x2).unwrap().get();
                assert_abs_diff_eq!(p_y0 * p_x1_x2, joint.p(x1, x2, false), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ci_spec_round_trips_through_conditionals() {
        let spec = example1_spec(4);
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        let cond = joint.cond_x1_given_y().unwrap();
        assert_abs_diff_eq!(cond.p_x1_given_y0().get(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.p_x1_given_y1().get(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(joint.p_y(false), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn uniform_joint_conditionals_are_flagged() {
        let k = 2;
        let joint = DiscreteJoint::new(k, vec![0.125; 4 * k]).unwrap();
        assert!(matches!(
            joint.cond_x1_given_y(),
            Err(OracleError::Degenerate(_))
        ));
    }

    #[test]
    fn deterministic_cell_is_certain() {
        let k = 2;
        let mut table = vec![0.0; 4 * k];
        table[(1 * k + 1) * 2 + 1] = 1.0; // all mass on (x1=1, x2=1, y=1)
        let joint = DiscreteJoint::new(k, table).unwrap();
        assert_eq!(joint.cond_y_given_x1_x2(true, 1).unwrap().get(), 0.0);
        assert!(joint.cond_y_given_x1_x2(false, 1).is_err());
        assert_eq!(joint.bayes_accuracy(), 1.0);
    }

    #[test]
    fn json_round_trip() {
        let spec = example1_spec(3);
        let joint = DiscreteJoint::from_ci_spec(&spec).unwrap();
        let json = serde_json::to_string(&joint).unwrap();
        let back: DiscreteJoint = serde_json::from_str(&json).unwrap();
        assert_eq!(joint, back);
    }
}
