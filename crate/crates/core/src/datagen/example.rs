//! The worked example family: a binary surrogate `x1`, a class `y`, and a
//! scalar `x2` whose class-conditional density is Gaussian for `y = 0` and
//! Laplacian for `y = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Laplace, Normal as NormalDist};

use super::DatagenError;
use crate::oracle::DiscreteJoint;
use crate::posterior::{ClassConditionalX1, PosteriorError};

/// The joint `P(x1, y)` over two binary variables, indexed `[x1][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointX1Y(pub [[f64; 2]; 2]);

impl JointX1Y {
    pub fn p(&self, x1: bool, y: bool) -> f64 {
        self.0[usize::from(x1)][usize::from(y)]
    }

    pub fn p_y0(&self) -> f64 {
        self.p(false, false) + self.p(true, false)
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let sum: f64 = self.0.iter().flatten().sum();
        if self.0.iter().flatten().any(|p| !p.is_finite() || *p < 0.0)
            || (sum - 1.0).abs() > 1e-12
        {
            return Err(DatagenError::InvalidSpec(format!(
                "joint P(x1, y) must be nonnegative and sum to 1 (sum = {sum})"
            )));
        }
        Ok(())
    }

    /// `P(x1 = 1 | y)` for both classes.
    pub fn conditionals(&self) -> Result<ClassConditionalX1, PosteriorError> {
        let p_y0 = self.p_y0();
        let p_y1 = 1.0 - p_y0;
        ClassConditionalX1::new(self.p(true, false) / p_y0, self.p(true, true) / p_y1)
    }
}

/// One sampled point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleSample {
    pub x1: bool,
    pub x2: f64,
    pub y: bool,
}

/// Distribution spec for the example family. The default density parameters
/// put the Gaussian at -1 and the Laplacian at +1, both unit scale, so the
/// classes overlap without being inseparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub joint_x1_y: JointX1Y,
    /// (mean, std) of `P(x2 | y = 0)`.
    pub gaussian: (f64, f64),
    /// (location, scale) of `P(x2 | y = 1)`.
    pub laplace: (f64, f64),
}

impl ExampleSpec {
    /// Both classes see both values of `x1`.
    pub fn example1() -> Self {
        Self {
            joint_x1_y: JointX1Y([[0.3, 0.1], [0.2, 0.4]]),
            gaussian: (-1.0, 1.0),
            laplace: (1.0, 1.0),
        }
    }

    /// `x1` is a 100%-recall feature: `P(x1 = 0, y = 1) = 0`.
    pub fn example2() -> Self {
        Self {
            joint_x1_y: JointX1Y([[0.3, 0.0], [0.2, 0.5]]),
            gaussian: (-1.0, 1.0),
            laplace: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        self.joint_x1_y.validate()?;
        if !(self.gaussian.1.is_finite() && self.gaussian.1 > 0.0) {
            return Err(DatagenError::InvalidSpec(format!(
                "gaussian std must be positive, got {}",
                self.gaussian.1
            )));
        }
        if !(self.laplace.1.is_finite() && self.laplace.1 > 0.0) {
            return Err(DatagenError::InvalidSpec(format!(
                "laplace scale must be positive, got {}",
                self.laplace.1
            )));
        }
        Ok(())
    }

    pub fn is_hundred_percent_recall(&self) -> bool {
        self.joint_x1_y.p(false, true) == 0.0
    }

    /// The x2 interval covered by discretization: six scale units beyond both
    /// density locations.
    pub fn grid(&self) -> (f64, f64) {
        let (g_mean, g_std) = self.gaussian;
        let (l_loc, l_scale) = self.laplace;
        let lo = (g_mean - 6.0 * g_std).min(l_loc - 6.0 * l_scale);
        let hi = (g_mean + 6.0 * g_std).max(l_loc + 6.0 * l_scale);
        (lo, hi)
    }

    /// Discretize onto `k` grid cells, folding the density tails into the
    /// edge cells so each class simplex sums to exactly 1.
    pub fn discretized_joint(&self, k: usize) -> Result<DiscreteJoint, DatagenError> {
        self.validate()?;
        if k < 2 {
            return Err(DatagenError::InvalidSpec(format!(
                "discretization needs at least 2 cells, got {k}"
            )));
        }
        let (lo, hi) = self.grid();
        let normal = NormalDist::new(self.gaussian.0, self.gaussian.1)
            .expect("validated gaussian parameters");
        let laplace =
            Laplace::new(self.laplace.0, self.laplace.1).expect("validated laplace parameters");

        let edge = |i: usize| lo + (hi - lo) * i as f64 / k as f64;
        let bin_masses = |cdf: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let mut masses: Vec<f64> = (0..k).map(|b| cdf(edge(b + 1)) - cdf(edge(b))).collect();
            masses[0] += cdf(lo);
            masses[k - 1] += 1.0 - cdf(hi);
            masses
        };
        let q = [
            bin_masses(&|x| normal.cdf(x)),
            bin_masses(&|x| laplace.cdf(x)),
        ];

        let mut table = vec![0.0; 4 * k];
        for x1 in 0..2 {
            for bin in 0..k {
                for y in 0..2 {
                    table[(x1 * k + bin) * 2 + y] = self.joint_x1_y.0[x1][y] * q[y][bin];
                }
            }
        }
        Ok(DiscreteJoint::new(k, table)?)
    }

    /// I.i.d. draws: `(x1, y)` from the joint table, then `x2` from the
    /// matching class-conditional density. Deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<ExampleSample>, DatagenError> {
        self.validate()?;
        if n == 0 {
            return Err(DatagenError::InvalidSpec("need at least one draw".into()));
        }
        let normal =
            Normal::new(self.gaussian.0, self.gaussian.1).expect("validated gaussian parameters");
        let (l_loc, l_scale) = self.laplace;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Cumulative masses over (x1, y) cells in the order (0,0) (0,1) (1,0) (1,1).
        let cells = [
            (self.joint_x1_y.p(false, false), false, false),
            (self.joint_x1_y.p(false, true), false, true),
            (self.joint_x1_y.p(true, false), true, false),
            (self.joint_x1_y.p(true, true), true, true),
        ];
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut picked = (true, true);
            for (mass, x1, y) in cells {
                acc += mass;
                if u <= acc {
                    picked = (x1, y);
                    break;
                }
            }
            let (x1, y) = picked;
            let x2 = if y {
                sample_laplace(&mut rng, l_loc, l_scale)
            } else {
                normal.sample(&mut rng)
            };
            samples.push(ExampleSample { x1, x2, y });
        }
        Ok(samples)
    }
}

/// Inverse-CDF Laplace draw.
fn sample_laplace(rng: &mut impl Rng, location: f64, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>().clamp(1e-16, 1.0 - 1e-16) - 0.5;
    location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}
