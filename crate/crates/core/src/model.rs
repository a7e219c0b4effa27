//! The assembled surrogate model: class conditionals for `x1` plus a fitted
//! `P(x1=1|x2)` predictor, with the clamping policy applied in one place.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::{
    self, ClassConditionalX1, PosteriorError, Probability, DEFAULT_CLAMP_EPSILON,
    MAX_CLAMP_EPSILON,
};
use crate::predictor::{BasePredictor, PredictorError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("clamp epsilon {0} outside (0, {MAX_CLAMP_EPSILON}]")]
    InvalidClampEpsilon(f64),
    #[error("a missing surrogate feature can only be scored in 100%-recall mode")]
    MissingX1InGeneralMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMode {
    General,
    HundredPercentRecall,
}

/// Everything needed to score a sample: `P(x1|y)` estimates and a base
/// predictor for `P(x1=1|x2)`. Immutable once built.
#[derive(Debug, Clone)]
pub struct SurrogateModel<P> {
    conditionals: ClassConditionalX1,
    predictor: P,
    mode: SurrogateMode,
    clamp_epsilon: f64,
}

impl<P> SurrogateModel<P> {
    /// In 100%-recall mode the stored `P(x1=1|y=1)` is forced to exactly 1.
    pub fn new(
        conditionals: ClassConditionalX1,
        predictor: P,
        mode: SurrogateMode,
    ) -> Result<Self, ModelError> {
        let conditionals = match mode {
            SurrogateMode::General => conditionals,
            SurrogateMode::HundredPercentRecall => {
                ClassConditionalX1::hundred_percent_recall(conditionals.p_x1_given_y0().get())?
            }
        };
        Ok(Self {
            conditionals,
            predictor,
            mode,
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
        })
    }

    pub fn with_clamp_epsilon(mut self, eps: f64) -> Result<Self, ModelError> {
        if !(eps.is_finite() && eps > 0.0 && eps <= MAX_CLAMP_EPSILON) {
            return Err(ModelError::InvalidClampEpsilon(eps));
        }
        self.clamp_epsilon = eps;
        Ok(self)
    }

    pub fn conditionals(&self) -> &ClassConditionalX1 {
        &self.conditionals
    }

    pub fn mode(&self) -> SurrogateMode {
        self.mode
    }

    pub fn clamp_epsilon(&self) -> f64 {
        self.clamp_epsilon
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }
}

impl<P: BasePredictor> SurrogateModel<P> {
    /// Predictor output clamped into `[eps, 1 - eps]` before any division.
    pub fn p_x1_given_x2(&self, x: &P::Input) -> Result<Probability, ModelError> {
        let raw = self.predictor.p_x1(x)?;
        Ok(Probability::clamped(raw, self.clamp_epsilon))
    }

    /// Reconstructed `P(y = 0 | x1, x2)`.
    pub fn posterior_y0(&self, x1: bool, x: &P::Input) -> Result<Probability, ModelError> {
        let px = self.p_x1_given_x2(x)?;
        match self.mode {
            SurrogateMode::General => Ok(posterior::posterior_general(
                px,
                &self.conditionals,
                x1,
                self.clamp_epsilon,
            )?),
            SurrogateMode::HundredPercentRecall => {
                if x1 {
                    Ok(posterior::score_special(
                        px.complement(),
                        &self.conditionals,
                        self.clamp_epsilon,
                    )?)
                } else {
                    // x1 = 0 rules out y = 1 when x1 has 100% recall.
                    Ok(Probability::ONE)
                }
            }
        }
    }

    /// Match-style score `P(y = 1 | observed features)`, with the surrogate
    /// feature possibly missing. With `x1` missing the marginal
    /// `P(y=1|x1=1,x2) * P(x1=1|x2)` is used, which requires 100%-recall mode.
    pub fn score(&self, x1: Option<bool>, x: &P::Input) -> Result<Probability, ModelError> {
        match x1 {
            Some(x1) => Ok(self.posterior_y0(x1, x)?.complement()),
            None => {
                if self.mode != SurrogateMode::HundredPercentRecall {
                    return Err(ModelError::MissingX1InGeneralMode);
                }
                let px = self.p_x1_given_x2(x)?;
                let posterior_y1 = self.posterior_y0(true, x)?.complement();
                Ok(posterior::score_missing_x1(px, posterior_y1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{fit_histogram, HistogramModel};
    use approx::assert_abs_diff_eq;

    fn recall_model(p0: f64) -> SurrogateModel<HistogramModel> {
        let cond = ClassConditionalX1::hundred_percent_recall(p0).unwrap();
        // Histogram over [0,1] in two bins: left mostly x1=0, right mostly x1=1.
        let data = vec![
            (0.1, false),
            (0.2, false),
            (0.3, true),
            (0.7, true),
            (0.8, true),
            (0.9, false),
        ];
        let predictor = fit_histogram(&data, 2, (0.0, 1.0)).unwrap();
        SurrogateModel::new(cond, predictor, SurrogateMode::HundredPercentRecall).unwrap()
    }

    #[test]
    fn recall_mode_forces_unit_conditional() {
        let cond = ClassConditionalX1::new(0.4, 0.8).unwrap();
        let data = vec![(0.1, false), (0.9, true)];
        let predictor = fit_histogram(&data, 2, (0.0, 1.0)).unwrap();
        let model =
            SurrogateModel::new(cond, predictor, SurrogateMode::HundredPercentRecall).unwrap();
        assert_eq!(model.conditionals().p_x1_given_y1().get(), 1.0);
    }

    #[test]
    fn background_sample_is_certainly_negative() {
        let model = recall_model(0.4);
        assert_eq!(model.posterior_y0(false, &0.1).unwrap().get(), 1.0);
        assert_eq!(model.score(Some(false), &0.1).unwrap().get(), 0.0);
    }

    #[test]
    fn missing_x1_score_is_the_marginal_product() {
        let model = recall_model(0.4);
        let x = 0.75;
        let px = model.p_x1_given_x2(&x).unwrap();
        let posterior_y1 = model.score(Some(true), &x).unwrap();
        let missing = model.score(None, &x).unwrap();
        assert_abs_diff_eq!(
            missing.get(),
            px.get() * posterior_y1.get(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn general_mode_rejects_missing_x1() {
        let cond = ClassConditionalX1::new(0.4, 0.8).unwrap();
        let data = vec![(0.1, false), (0.9, true)];
        let predictor = fit_histogram(&data, 2, (0.0, 1.0)).unwrap();
        let model = SurrogateModel::new(cond, predictor, SurrogateMode::General).unwrap();
        assert!(matches!(
            model.score(None, &0.5),
            Err(ModelError::MissingX1InGeneralMode)
        ));
    }

    #[test]
    fn clamp_epsilon_is_validated() {
        let model = recall_model(0.4);
        assert!(model.clone().with_clamp_epsilon(0.0).is_err());
        assert!(model.clone().with_clamp_epsilon(0.5).is_err());
        assert!(model.with_clamp_epsilon(1e-4).is_ok());
    }
}
