//! Seeded candidate sequences and their rank-only view.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use thiserror::Error;

use crate::rules::Observation;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeqError {
    #[error("AR(1) coefficient phi = {0} must satisfy |phi| < 1")]
    InvalidPhi(f64),
    #[error("sequence length {0} is too short (need n >= 2)")]
    TooShort(usize),
    #[error("value at position {0} is not finite")]
    NonFinite(usize),
    #[error("unknown sequence model `{0}`")]
    UnknownModel(String),
}

/// Distribution of the candidate values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceModel {
    Uniform01,
    StandardNormal,
    ExponentialUnitRate,
    /// Stationary Gaussian AR(1): `X_t = phi X_{t-1} + eps_t`.
    Ar1 { phi: f64 },
}

impl SequenceModel {
    pub const DEFAULT_PHI: f64 = 0.5;

    pub fn ar1(phi: f64) -> Result<Self, SeqError> {
        let model = SequenceModel::Ar1 { phi };
        model.validate()?;
        Ok(model)
    }

    /// The four models of the default experiment.
    pub fn defaults() -> Vec<SequenceModel> {
        vec![
            SequenceModel::Uniform01,
            SequenceModel::StandardNormal,
            SequenceModel::ExponentialUnitRate,
            SequenceModel::Ar1 {
                phi: Self::DEFAULT_PHI,
            },
        ]
    }

    pub fn validate(&self) -> Result<(), SeqError> {
        match *self {
            SequenceModel::Ar1 { phi } if !(phi.abs() < 1.0) => Err(SeqError::InvalidPhi(phi)),
            _ => Ok(()),
        }
    }

    pub fn catalog_index(&self) -> usize {
        match self {
            SequenceModel::Uniform01 => 0,
            SequenceModel::StandardNormal => 1,
            SequenceModel::ExponentialUnitRate => 2,
            SequenceModel::Ar1 { .. } => 3,
        }
    }

    /// Total order: catalog position, then AR(1) coefficient.
    pub fn sort_key(&self) -> (usize, u64) {
        let phi_key = match *self {
            // Map to an unsigned key that orders like the float.
            SequenceModel::Ar1 { phi } => {
                let bits = phi.to_bits();
                if bits >> 63 == 1 {
                    !bits
                } else {
                    bits | (1 << 63)
                }
            }
            _ => 0,
        };
        (self.catalog_index(), phi_key)
    }

    /// Stable seeding tag.
    pub fn seed_tag(&self) -> u64 {
        match *self {
            SequenceModel::Ar1 { phi } => derive_seed(3, phi.to_bits()),
            _ => self.catalog_index() as u64,
        }
    }

    /// Heading used in report tables.
    pub fn title(&self) -> String {
        match *self {
            SequenceModel::Uniform01 => "Uniform(0,1)".to_string(),
            SequenceModel::StandardNormal => "Normal(0,1)".to_string(),
            SequenceModel::ExponentialUnitRate => "Exponential(1)".to_string(),
            SequenceModel::Ar1 { phi } => format!("AR(1), phi = {phi}"),
        }
    }
}

impl fmt::Display for SequenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SequenceModel::Uniform01 => f.write_str("uniform"),
            SequenceModel::StandardNormal => f.write_str("normal"),
            SequenceModel::ExponentialUnitRate => f.write_str("exponential"),
            SequenceModel::Ar1 { phi } => write!(f, "ar1(phi={phi})"),
        }
    }
}

impl FromStr for SequenceModel {
    type Err = SeqError;

    /// Accepts `uniform`, `normal`, `exponential`, `ar1` (default phi) and
    /// `ar1(phi=<x>)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "uniform" | "uniform01" => return Ok(SequenceModel::Uniform01),
            "normal" | "standard-normal" => return Ok(SequenceModel::StandardNormal),
            "exponential" | "exp" => return Ok(SequenceModel::ExponentialUnitRate),
            "ar1" => return SequenceModel::ar1(Self::DEFAULT_PHI),
            _ => {}
        }
        let phi = lower
            .strip_prefix("ar1(phi=")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| SeqError::UnknownModel(s.to_string()))?;
        SequenceModel::ar1(phi)
    }
}

/// One realized candidate sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    values: Vec<f64>,
    records: Vec<bool>,
    argmax_index: usize,
}

impl Trial {
    /// Builds a trial from explicit values. Records use strict `>`; the
    /// argmax is the earliest maximal position (1-based).
    pub fn from_values(values: Vec<f64>) -> Result<Self, SeqError> {
        if values.len() < 2 {
            return Err(SeqError::TooShort(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeqError::NonFinite(i + 1));
        }
        let mut records = Vec::with_capacity(values.len());
        let mut best = f64::NEG_INFINITY;
        let mut argmax_index = 0;
        for (i, &v) in values.iter().enumerate() {
            let is_record = i == 0 || v > best;
            if is_record {
                best = v;
                argmax_index = i + 1;
            }
            records.push(is_record);
        }
        Ok(Self {
            values,
            records,
            argmax_index,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `records()[t - 1]` is the record indicator at position `t`.
    pub fn records(&self) -> &[bool] {
        &self.records
    }

    /// 1-based position of the maximum.
    pub fn argmax_index(&self) -> usize {
        self.argmax_index
    }

    pub fn is_record(&self, t: usize) -> bool {
        self.records[t - 1]
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.records
            .iter()
            .enumerate()
            .map(|(i, &is_record)| Observation { t: i + 1, is_record })
    }
}

/// Draws `n` candidate values from `model`; fully determined by the seed.
pub fn generate(model: SequenceModel, n: usize, seed: u64) -> Result<Trial, SeqError> {
    model.validate()?;
    if n < 2 {
        return Err(SeqError::TooShort(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = match model {
        SequenceModel::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
        SequenceModel::StandardNormal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        SequenceModel::ExponentialUnitRate => (0..n).map(|_| rng.sample(Exp1)).collect(),
        SequenceModel::Ar1 { phi } => {
            let first: f64 = rng.sample(StandardNormal);
            let mut x = first / (1.0 - phi * phi).sqrt();
            let mut values = Vec::with_capacity(n);
            values.push(x);
            for _ in 1..n {
                let eps: f64 = rng.sample(StandardNormal);
                x = phi * x + eps;
                values.push(x);
            }
            values
        }
    };
    Trial::from_values(values)
}

/// The rank-only view of a trial.
pub fn to_observations(trial: &Trial) -> Vec<Observation> {
    trial.observations().collect()
}
