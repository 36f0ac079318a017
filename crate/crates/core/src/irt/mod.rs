//! Two-parameter logistic item response model.
//!
//! The probability that a student of ability `theta` answers an item with
//! discrimination `a` and difficulty `d` correctly is
//! `1 / (1 + exp(-a * (theta - d)))`. Everything else in this module
//! (calibration, ability estimation, evaluation metrics) is built on that
//! single curve.

mod calibrate;
mod estimate;
pub mod io;
mod metrics;

pub use calibrate::{calibrate, CalibrationConfig, CalibrationObjective, CalibrationResult};
pub use estimate::{estimate_theta, ThetaEstimate};
pub use metrics::{compute_auc, learning_gain, mean_prob_correct};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on |theta| and |d| once priors are in effect.
pub const LOGIT_BOUND: f64 = 6.0;

#[derive(Debug, Error, PartialEq)]
pub enum IrtError {
    #[error("invalid item parameter for {item_id}: {reason}")]
    InvalidParameter { item_id: String, reason: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("AUC is undefined: {0}")]
    UndefinedAuc(&'static str),
    #[error("length mismatch: {predictions} predictions vs {outcomes} outcomes")]
    LengthMismatch { predictions: usize, outcomes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub item_id: String,
    #[serde(rename = "a")]
    pub discrimination: f64,
    #[serde(rename = "d")]
    pub difficulty: f64,
}

impl ItemParams {
    pub fn new(item_id: impl Into<String>, discrimination: f64, difficulty: f64) -> Self {
        Self {
            item_id: item_id.into(),
            discrimination,
            difficulty,
        }
    }

    pub fn validate(&self) -> Result<(), IrtError> {
        if !(self.discrimination.is_finite() && self.discrimination > 0.0) {
            return Err(IrtError::InvalidParameter {
                item_id: self.item_id.clone(),
                reason: format!("discrimination must be positive, got {}", self.discrimination),
            });
        }
        if !self.difficulty.is_finite() {
            return Err(IrtError::InvalidParameter {
                item_id: self.item_id.clone(),
                reason: format!("difficulty must be finite, got {}", self.difficulty),
            });
        }
        Ok(())
    }
}

/// A point estimate of latent ability on the logit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ability {
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
}

impl Ability {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            standard_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub student_id: String,
    pub item_id: String,
    #[serde(with = "binary_flag")]
    pub correct: bool,
}

/// Accepts `0`/`1` as well as `true`/`false`; always writes `0`/`1`.
mod binary_flag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Flag {
            Bool(bool),
            Int(i64),
        }
        match Flag::deserialize(d)? {
            Flag::Bool(b) => Ok(b),
            Flag::Int(0) => Ok(false),
            Flag::Int(1) => Ok(true),
            Flag::Int(other) => Err(de::Error::custom(format!("correct must be 0 or 1, got {other}"))),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative log-likelihood of one binary response at logit `z`.
#[inline]
pub(crate) fn response_loss(z: f64, correct: bool) -> f64 {
    if correct {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Probability of a correct response under the 2PL curve.
pub fn prob_correct(params: &ItemParams, ability: &Ability) -> Result<f64, IrtError> {
    params.validate()?;
    Ok(sigmoid(params.discrimination * (ability.theta - params.difficulty)))
}
