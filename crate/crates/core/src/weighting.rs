//! Per-tree observation weights.
//!
//! Random-weight schemes (`ExpOne`, `LogNormalUnit`, `SqrtGammaUnit`) replace
//! bootstrap resampling: every observation stays in every tree but contributes
//! with an i.i.d. nonnegative unit-mean weight. The classic bootstrap and the
//! moving-block bootstrap are expressed as integer multiplicity weights so all
//! forests share one weighted tree grower.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Substream;

/// Shape of the gamma variate behind [`WeightScheme::SqrtGammaUnit`].
pub const SQRT_GAMMA_SHAPE: f64 = 0.295;
/// Scale (not rate) of the gamma variate behind [`WeightScheme::SqrtGammaUnit`].
pub const SQRT_GAMMA_SCALE: f64 = 6.803;

/// Distribution of the per-tree weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Exp(1) weights.
    ExpOne,
    /// Lognormal with mu = -ln(2)/2 and sigma^2 = ln 2 (unit mean).
    LogNormalUnit,
    /// Square root of a Gamma(0.295, scale 6.803) draw (mean close to one).
    SqrtGammaUnit,
    /// All weights one: every tree sees the same data.
    ConstantOne,
    /// Multinomial counts of T draws with replacement.
    Bootstrap,
    /// Counts from concatenated random contiguous blocks.
    MovingBlockBootstrap { block_len: usize },
}

impl WeightScheme {
    pub fn tag(&self) -> String {
        self.to_string()
    }

    /// Whether the scheme produces integer multiplicities.
    pub fn is_resampling(&self) -> bool {
        matches!(
            self,
            WeightScheme::Bootstrap | WeightScheme::MovingBlockBootstrap { .. }
        )
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::ExpOne => f.write_str("exp1"),
            WeightScheme::LogNormalUnit => f.write_str("lognorm"),
            WeightScheme::SqrtGammaUnit => f.write_str("sqrtgamma"),
            WeightScheme::ConstantOne => f.write_str("ones"),
            WeightScheme::Bootstrap => f.write_str("bootstrap"),
            WeightScheme::MovingBlockBootstrap { block_len } => write!(f, "mbb:{block_len}"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(WeightScheme::ExpOne),
            "lognorm" => Ok(WeightScheme::LogNormalUnit),
            "sqrtgamma" => Ok(WeightScheme::SqrtGammaUnit),
            "ones" => Ok(WeightScheme::ConstantOne),
            "bootstrap" => Ok(WeightScheme::Bootstrap),
            other => {
                let len = other
                    .strip_prefix("mbb:")
                    .ok_or_else(|| Error::Parse(format!("unknown weight scheme `{other}`")))?;
                let block_len = len
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad block length `{len}`")))?;
                Ok(WeightScheme::MovingBlockBootstrap { block_len })
            }
        }
    }
}

/// One tree's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub scheme: WeightScheme,
    pub substream: Substream,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Draws `len` weights from `scheme` on the given substream.
pub fn draw_weights(scheme: WeightScheme, len: usize, substream: Substream) -> Result<WeightVector> {
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = substream.rng();
    let values = match scheme {
        WeightScheme::ExpOne => (0..len).map(|_| Exp1.sample(&mut rng)).collect(),
        WeightScheme::LogNormalUnit => {
            let ln2 = std::f64::consts::LN_2;
            let dist = LogNormal::new(-ln2 / 2.0, ln2.sqrt()).expect("valid lognormal parameters");
            (0..len).map(|_| dist.sample(&mut rng)).collect()
        }
        WeightScheme::SqrtGammaUnit => {
            let dist = Gamma::new(SQRT_GAMMA_SHAPE, SQRT_GAMMA_SCALE).expect("valid gamma parameters");
            (0..len).map(|_| dist.sample(&mut rng).sqrt()).collect()
        }
        WeightScheme::ConstantOne => vec![1.0; len],
        WeightScheme::Bootstrap => {
            let mut counts = vec![0.0; len];
            for _ in 0..len {
                counts[rng.random_range(0..len)] += 1.0;
            }
            counts
        }
        WeightScheme::MovingBlockBootstrap { block_len } => {
            if block_len == 0 || block_len > len {
                return Err(Error::InvalidBlockLen { block_len, len });
            }
            let mut counts = vec![0.0; len];
            let mut picks = 0;
            while picks < len {
                let start = rng.random_range(0..=len - block_len);
                for c in &mut counts[start..start + block_len.min(len - picks)] {
                    *c += 1.0;
                }
                picks += block_len;
            }
            counts
        }
    };
    let values: Vec<f64> = values;
    if !values.iter().any(|&w| w > 0.0) {
        return Err(Error::DegenerateData);
    }
    Ok(WeightVector {
        values,
        scheme,
        substream,
    })
}

/// Empirical mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCheck {
    pub mean: f64,
    pub stderr: f64,
}

/// Diagnostic: empirical mean and standard error of `n` draws from `scheme`.
pub fn scheme_mean_check(scheme: WeightScheme, n: usize, substream: Substream) -> Result<MeanCheck> {
    if n < 1000 {
        return Err(Error::InvalidConfig(format!(
            "mean check needs at least 1000 draws, got {n}"
        )));
    }
    let w = draw_weights(scheme, n, substream)?;
    let nf = n as f64;
    let mean = w.values.iter().sum::<f64>() / nf;
    let var = w.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(MeanCheck {
        mean,
        stderr: (var / nf).sqrt(),
    })
}
