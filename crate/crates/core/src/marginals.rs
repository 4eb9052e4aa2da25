//! Semiparametric marginal models.
//!
//! Continuous variables get a scaled empirical CDF, `N F_N / (N+1)`, so the
//! transform never reaches 1, plus a Gaussian kernel density with Silverman's
//! rule-of-thumb bandwidth.  Discrete variables get the empirical PMF with
//! left limits, which the order-statistic mass formulas need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarginalError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("computed bandwidth is not positive (degenerate sample)")]
    ZeroBandwidth,
    #[error("bandwidth override must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("probability argument {0} outside (0,1)")]
    BadProbability(f64),
    #[error("density requested from a discrete marginal (use pmf)")]
    DensityOfDiscrete,
    #[error("probability mass requested from a continuous marginal (use pdf)")]
    MassOfContinuous,
    #[error("invalid serialized marginal: {0}")]
    BadSerialized(String),
}

/// A fitted per-variable marginal distribution.
///
/// Immutable after fitting; all evaluators are read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub enum MarginalModel {
    Continuous {
        /// The sample, ascending.
        sorted: Vec<f64>,
        /// Kernel bandwidth, same units as the data.
        bandwidth: f64,
    },
    Discrete {
        /// Unique support values, ascending.
        support: Vec<f64>,
        /// Relative frequencies, summing to 1.
        probs: Vec<f64>,
        /// Running totals of `probs`.
        cumulative: Vec<f64>,
    },
}

/// Serialized form: `{kind: "continuous", bandwidth, sorted_values}` or
/// `{kind: "discrete", support, probs}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelRepr {
    Continuous {
        bandwidth: f64,
        sorted_values: Vec<f64>,
    },
    Discrete {
        support: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl From<MarginalModel> for ModelRepr {
    fn from(m: MarginalModel) -> Self {
        match m {
            MarginalModel::Continuous { sorted, bandwidth } => ModelRepr::Continuous {
                bandwidth,
                sorted_values: sorted,
            },
            MarginalModel::Discrete { support, probs, .. } => {
                ModelRepr::Discrete { support, probs }
            }
        }
    }
}

impl TryFrom<ModelRepr> for MarginalModel {
    type Error = MarginalError;

    fn try_from(r: ModelRepr) -> Result<Self, MarginalError> {
        match r {
            ModelRepr::Continuous {
                bandwidth,
                sorted_values,
            } => {
                if !(bandwidth > 0.0) || sorted_values.len() < 2 {
                    return Err(MarginalError::BadSerialized(
                        "continuous marginal needs positive bandwidth and >= 2 values".into(),
                    ));
                }
                if sorted_values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(MarginalError::BadSerialized(
                        "sorted_values not ascending".into(),
                    ));
                }
                Ok(MarginalModel::Continuous {
                    sorted: sorted_values,
                    bandwidth,
                })
            }
            ModelRepr::Discrete { support, probs } => {
                if support.len() != probs.len() || support.is_empty() {
                    return Err(MarginalError::BadSerialized(
                        "support/probs length mismatch".into(),
                    ));
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(MarginalError::BadSerialized("negative probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(MarginalError::BadSerialized(format!(
                        "probabilities sum to {total}"
                    )));
                }
                let cumulative = running_totals(&probs);
                Ok(MarginalModel::Discrete {
                    support,
                    probs,
                    cumulative,
                })
            }
        }
    }
}

fn running_totals(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Fit a continuous marginal: store the sorted sample and pick the kernel
/// bandwidth by Silverman's rule, `0.9 min(sd, IQR/1.34) N^{-1/5}`, unless an
/// override is given.
pub fn fit_continuous(
    sample: &[f64],
    bandwidth_override: Option<f64>,
) -> Result<MarginalModel, MarginalError> {
    if sample.len() < 2 {
        return Err(MarginalError::TooFewSamples {
            needed: 2,
            got: sample.len(),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(MarginalError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let bandwidth = match bandwidth_override {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(MarginalError::BadBandwidth(h)),
        None => {
            let h = silverman_bandwidth(&sorted);
            if !(h > 0.0) {
                return Err(MarginalError::ZeroBandwidth);
            }
            h
        }
    };
    Ok(MarginalModel::Continuous { sorted, bandwidth })
}

/// Fit a discrete marginal: unique sorted support with relative frequencies.
pub fn fit_discrete(sample: &[f64]) -> Result<MarginalModel, MarginalError> {
    if sample.is_empty() {
        return Err(MarginalError::TooFewSamples { needed: 1, got: 0 });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(MarginalError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut support = Vec::new();
    let mut probs = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut count = 0usize;
        while i < sorted.len() && sorted[i] == v {
            count += 1;
            i += 1;
        }
        support.push(v);
        probs.push(count as f64 / n);
    }
    let cumulative = running_totals(&probs);
    Ok(MarginalModel::Discrete {
        support,
        probs,
        cumulative,
    })
}

fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let iqr = interp_quantile(sorted, 0.75) - interp_quantile(sorted, 0.25);
    0.9 * sd.min(iqr / 1.34) * n.powf(-0.2)
}

/// Linear-interpolation quantile of an ascending sample (R type 7).
fn interp_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl MarginalModel {
    pub fn is_discrete(&self) -> bool {
        matches!(self, MarginalModel::Discrete { .. })
    }

    pub fn sample_size(&self) -> usize {
        match self {
            MarginalModel::Continuous { sorted, .. } => sorted.len(),
            MarginalModel::Discrete { support, .. } => support.len(),
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            MarginalModel::Continuous { bandwidth, .. } => Some(*bandwidth),
            MarginalModel::Discrete { .. } => None,
        }
    }

    pub fn data_range(&self) -> (f64, f64) {
        match self {
            MarginalModel::Continuous { sorted, .. } => {
                (sorted[0], *sorted.last().unwrap())
            }
            MarginalModel::Discrete { support, .. } => (support[0], *support.last().unwrap()),
        }
    }

    /// Estimated CDF.  Continuous kind: `#{x_i <= x} / (N+1)`, so the value
    /// never exceeds `N/(N+1)`.  Discrete kind: total mass at support <= x.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::Continuous { sorted, .. } => {
                let count = sorted.partition_point(|&v| v <= x);
                count as f64 / (sorted.len() as f64 + 1.0)
            }
            MarginalModel::Discrete {
                support,
                cumulative,
                ..
            } => {
                let idx = support.partition_point(|&v| v <= x);
                if idx == 0 {
                    0.0
                } else {
                    cumulative[idx - 1]
                }
            }
        }
    }

    /// Left limit of the CDF: mass strictly below `x`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            MarginalModel::Continuous { sorted, .. } => {
                let count = sorted.partition_point(|&v| v < x);
                count as f64 / (sorted.len() as f64 + 1.0)
            }
            MarginalModel::Discrete {
                support,
                cumulative,
                ..
            } => {
                let idx = support.partition_point(|&v| v < x);
                if idx == 0 {
                    0.0
                } else {
                    cumulative[idx - 1]
                }
            }
        }
    }

    /// Gaussian kernel density estimate (continuous kind only).
    pub fn pdf(&self, x: f64) -> Result<f64, MarginalError> {
        match self {
            MarginalModel::Continuous { sorted, bandwidth } => {
                let n = sorted.len() as f64;
                let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bandwidth * n);
                let sum: f64 = sorted
                    .iter()
                    .map(|&xi| (-0.5 * ((x - xi) / bandwidth).powi(2)).exp())
                    .sum();
                Ok(norm * sum)
            }
            MarginalModel::Discrete { .. } => Err(MarginalError::DensityOfDiscrete),
        }
    }

    /// Probability mass at `x` (discrete kind only); 0 off the support.
    pub fn pmf(&self, x: f64) -> Result<f64, MarginalError> {
        match self {
            MarginalModel::Discrete { support, probs, .. } => {
                match support.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                    Ok(i) => Ok(probs[i]),
                    Err(_) => Ok(0.0),
                }
            }
            MarginalModel::Continuous { .. } => Err(MarginalError::MassOfContinuous),
        }
    }

    /// Generalized inverse of the CDF.  The continuous kind interpolates
    /// linearly between adjacent order statistics on the `i/(N+1)` grid
    /// (clamped to the data range); the discrete kind returns the smallest
    /// support value with CDF >= p.
    pub fn quantile(&self, p: f64) -> Result<f64, MarginalError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(MarginalError::BadProbability(p));
        }
        match self {
            MarginalModel::Continuous { sorted, .. } => {
                let n = sorted.len();
                let scale = n as f64 + 1.0;
                // knots p_i = i/(N+1) -> sorted[i-1]
                let h = p * scale; // in (0, N+1)
                if h <= 1.0 {
                    return Ok(sorted[0]);
                }
                if h >= n as f64 {
                    return Ok(sorted[n - 1]);
                }
                let lo = h.floor() as usize; // 1..N-1
                let frac = h - lo as f64;
                Ok(sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]))
            }
            MarginalModel::Discrete {
                support,
                cumulative,
                ..
            } => {
                let idx = cumulative.partition_point(|&c| c < p);
                Ok(support[idx.min(support.len() - 1)])
            }
        }
    }
}
