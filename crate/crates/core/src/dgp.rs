//! Simulated nonlinear autoregressive series.
//!
//! Paths start from a zero state (all pre-sample values 0), run `burn_in`
//! steps that are discarded, then record `T` values. Gaussian innovations come
//! from `rand_distr::StandardNormal` (ziggurat) on the spec's substreams:
//! `(seed, Innovations, 0)` for the response and `(seed, ExogInnovations, 0)`
//! for the exogenous channel of M3.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use crate::embed::TimeSeries;
use crate::error::{Error, Result};
use crate::rng::{Purpose, Substream};

pub const DEFAULT_BURN_IN: usize = 500;

/// Name of the exogenous channel produced by M3.
pub const M3_CHANNEL: &str = "x";

pub type NlarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DgpKind {
    M1,
    M2,
    M3,
    /// `Y_t = f(Y_{t-1}, ..., Y_{t-order}) + e_t`.
    CustomNlar { order: usize, f: NlarFn },
}

impl fmt::Debug for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DgpKind::CustomNlar { order, .. } => write!(f, "CustomNlar({order})"),
            other => f.write_str(&other.to_string()),
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DgpKind::M1 => f.write_str("m1"),
            DgpKind::M2 => f.write_str("m2"),
            DgpKind::M3 => f.write_str("m3"),
            DgpKind::CustomNlar { order, .. } => write!(f, "nlar{order}"),
        }
    }
}

impl FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(DgpKind::M1),
            "m2" => Ok(DgpKind::M2),
            "m3" => Ok(DgpKind::M3),
            other => Err(Error::Parse(format!("unknown data-generating process `{other}`"))),
        }
    }
}

impl DgpKind {
    /// Lag scenarios (under-, correctly, over-specified).
    pub fn scenarios(&self) -> Vec<usize> {
        match self {
            DgpKind::M1 => vec![3, 5, 15],
            DgpKind::M2 => vec![2, 3, 15],
            DgpKind::M3 => vec![6, 8, 15],
            DgpKind::CustomNlar { order, .. } => vec![*order],
        }
    }

    /// Number of lags of the true model.
    pub fn correct_lags(&self) -> usize {
        match self {
            DgpKind::M1 => 5,
            DgpKind::M2 => 3,
            DgpKind::M3 => 8,
            DgpKind::CustomNlar { order, .. } => *order,
        }
    }

    pub fn has_exogenous(&self) -> bool {
        matches!(self, DgpKind::M3)
    }
}

#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub burn_in: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, seed: u64) -> Self {
        DgpSpec {
            kind,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

/// `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Conditional mean of M1 given `(Y_{t-1}, Y_{t-3}, Y_{t-5})`.
pub fn m1_mean(y1: f64, y3: f64, y5: f64) -> f64 {
    y1 * (-0.4 * y1 * y1).exp() + 4.0 * y3 * y3 * (-0.55 * y3 * y3).exp() + 4.0 * y5 * (-0.3 * y5 * y5).exp()
}

/// Conditional mean of M2 given `(Y_{t-1}, Y_{t-3})`.
pub fn m2_mean(y1: f64, y3: f64) -> f64 {
    (5.0 * y1).sin() * (-y1 * y1).exp() + 2.0 * sign(y3) * (PI * y3).cos()
}

/// Conditional mean of M3's response given `(Y_{t-1}, X_{t-6}, Y_{t-8})`.
pub fn m3_mean(y1: f64, x6: f64, y8: f64) -> f64 {
    6.0 * y1 * (-0.6 * y1 * y1).exp()
        + 3.0 * x6.cos() * (-0.5 * x6 * x6).exp()
        + 4.0 * (y8 * y8).sin() * (-0.4 * y8 * y8).exp()
}

/// Conditional mean of M3's exogenous channel given `(X_{t-2}, X_{t-8})`.
pub fn m3_exog_mean(x2: f64, x8: f64) -> f64 {
    2.0 * x2 * (-0.7 * x2 * x2).exp() + 3.0 * x8.sin() * sign((-0.5 * x8 * x8).exp())
}

/// Runs the recursion over the given innovations (one per step, burn-in
/// included) and returns `(Y, X)`; `X` is empty unless the process has an
/// exogenous channel.
pub fn simulate_path(kind: &DgpKind, innovations: &[f64], exog_innovations: &[f64]) -> (Vec<f64>, Vec<f64>) {
    const PAD: usize = 8;
    let n = innovations.len();
    let lag = |v: &[f64], t: usize, l: usize| v[t + PAD - l];
    let mut y = vec![0.0; n + PAD];
    let mut x = if kind.has_exogenous() { vec![0.0; n + PAD] } else { Vec::new() };
    let order = match kind {
        DgpKind::CustomNlar { order, .. } => *order,
        _ => 0,
    };
    let mut y_custom = vec![0.0; n + order];
    for t in 0..n {
        let e = innovations[t];
        match kind {
            DgpKind::M1 => y[t + PAD] = m1_mean(lag(&y, t, 1), lag(&y, t, 3), lag(&y, t, 5)) + e,
            DgpKind::M2 => y[t + PAD] = m2_mean(lag(&y, t, 1), lag(&y, t, 3)) + e,
            DgpKind::M3 => {
                x[t + PAD] = m3_exog_mean(lag(&x, t, 2), lag(&x, t, 8)) + exog_innovations[t];
                y[t + PAD] = m3_mean(lag(&y, t, 1), lag(&x, t, 6), lag(&y, t, 8)) + e;
            }
            DgpKind::CustomNlar { order, f } => {
                let history: Vec<f64> = (1..=*order).map(|l| y_custom[t + order - l]).collect();
                y_custom[t + order] = f(&history) + e;
            }
        }
    }
    if order > 0 {
        return (y_custom.split_off(order), Vec::new());
    }
    let xs = if x.is_empty() { x } else { x.split_off(PAD) };
    (y.split_off(PAD), xs)
}

/// Simulates `len` recorded values after the burn-in.
pub fn generate(spec: &DgpSpec, len: usize) -> Result<TimeSeries> {
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    let total = spec.burn_in + len;
    let draw = |purpose| -> Vec<f64> {
        let mut rng = Substream::new(spec.seed, purpose, 0).rng();
        (0..total).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let eps = draw(Purpose::Innovations);
    let eps2 = if spec.kind.has_exogenous() {
        draw(Purpose::ExogInnovations)
    } else {
        Vec::new()
    };
    let (y, x) = simulate_path(&spec.kind, &eps, &eps2);
    let series = TimeSeries::new(y[spec.burn_in..].to_vec());
    if spec.kind.has_exogenous() {
        series.with_channel(M3_CHANNEL, x[spec.burn_in..].to_vec())
    } else {
        Ok(series)
    }
}

/// Contiguous split: the first `train` points, then the next `test` points.
pub fn train_test_split(series: &TimeSeries, train: usize, test: usize) -> Result<(TimeSeries, TimeSeries)> {
    if train == 0 || series.len() < train + test {
        return Err(Error::InsufficientLength {
            len: series.len(),
            train,
            test,
        });
    }
    Ok((series.slice(0..train), series.slice(train..train + test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn zero_innovations_stay_at_zero() {
        for kind in [DgpKind::M1, DgpKind::M2] {
            let (y, x) = simulate_path(&kind, &[0.0; 50], &[0.0; 50]);
            assert!(y.iter().all(|&v| v == 0.0), "{kind}");
            assert!(x.iter().all(|&v| v == 0.0), "{kind}");
        }
    }

    #[test]
    fn m1_single_step() {
        let v = m1_mean(1.0, 0.0, 0.0);
        assert!((v - 0.670_320_046_035_639_3).abs() < 1e-15);
        assert!((v - (-0.4f64).exp()).abs() < 1e-15);
        // Innovation 1 at the first step, then the recursion from (1, 0, 0).
        let (y, _) = simulate_path(&DgpKind::M1, &[1.0, 0.0], &[]);
        assert_eq!(y[1], m1_mean(1.0, 0.0, 0.0));
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(2.5), 1.0);
        assert_eq!(sign(-1e-300), -1.0);
        for x in [-10.0, -3.0, 0.0, 0.1, 7.0, 30.0] {
            assert_eq!(sign((-0.5f64 * x * x).exp()), 1.0);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&DgpSpec::new(DgpKind::M1, 5), 200).unwrap();
        let b = generate(&DgpSpec::new(DgpKind::M1, 5), 200).unwrap();
        assert_eq!(a, b);
        let mut seen = HashSet::new();
        for seed in 0..100 {
            let s = generate(&DgpSpec::new(DgpKind::M2, seed), 50).unwrap();
            let bits: Vec<u64> = s.values.iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(bits));
        }
    }

    #[test]
    fn m3_has_independent_channel() {
        let s = generate(&DgpSpec::new(DgpKind::M3, 11), 300).unwrap();
        let x = s.channel(M3_CHANNEL).unwrap();
        assert_eq!(x.len(), 300);
        assert_ne!(x, s.values.as_slice());
    }

    #[test]
    fn custom_nlar() {
        let kind = DgpKind::CustomNlar {
            order: 2,
            f: Arc::new(|h: &[f64]| 0.5 * h[0] - 0.25 * h[1]),
        };
        let (y, _) = simulate_path(&kind, &[1.0, 0.0, 0.0], &[]);
        assert_eq!(y, vec![1.0, 0.5, 0.0]);
        let s = generate(&DgpSpec { kind, burn_in: 10, seed: 3 }, 20).unwrap();
        assert_eq!(s.len(), 20);
    }

    #[test]
    fn split_examples() {
        let s = TimeSeries::new((0..600).map(|i| i as f64).collect());
        let (train, test) = train_test_split(&s, 500, 100).unwrap();
        assert_eq!(train.len(), 500);
        assert_eq!(test.values[0], 500.0);
        assert_eq!(*test.values.last().unwrap(), 599.0);
        let (_, test) = train_test_split(&s, 600, 0).unwrap();
        assert!(test.is_empty());
        assert!(train_test_split(&s, 0, 600).is_err());
        assert!(train_test_split(&s, 500, 101).is_err());
    }

    /// Standard error of the mean via non-overlapping batch means.
    fn batch_se(v: &[f64], batch: usize) -> f64 {
        let means: Vec<f64> = v.chunks_exact(batch).map(|c| c.iter().sum::<f64>() / batch as f64).collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    }

    #[test]
    fn stationarity_smoke() {
        for kind in [DgpKind::M1, DgpKind::M2, DgpKind::M3] {
            let s = generate(&DgpSpec::new(kind.clone(), 77), 20_000).unwrap();
            let (a, b) = s.values.split_at(10_000);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let se = (batch_se(a, 200).powi(2) + batch_se(b, 200).powi(2)).sqrt();
            let diff = (mean(a) - mean(b)).abs();
            assert!(diff < 5.0 * se, "{kind}: diff {diff}, se {se}");
        }
    }
}
