//! Gaussian-copula baseline: normal-scores (van der Waerden) correlation of
//! the pseudo-observations, plus conditional-slice density grids for
//! side-by-side contour comparison.  A comparator only — no MLE.

use crate::CliError;
use baker_copula::em::scaled_ranks;
use baker_copula::marginals::MarginalModel;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    pub dim: usize,
    /// Full correlation matrix, nested rows.
    pub correlation: Vec<Vec<f64>>,
}

impl GaussianFit {
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.correlation[i][j]
    }

    /// Conditional correlation of axes (a, b) given the stratifying axis —
    /// constant in the conditioning value under a Gaussian copula.
    pub fn conditional_correlation(&self, a: usize, b: usize, s: usize) -> f64 {
        let (rab, ras, rbs) = (self.rho(a, b), self.rho(a, s), self.rho(b, s));
        (rab - ras * rbs) / ((1.0 - ras * ras) * (1.0 - rbs * rbs)).sqrt()
    }
}

/// Estimate the Gaussian copula by the sample correlation of the normal
/// scores `Phi^{-1}(rank/(N+1))`.
pub fn fit_gaussian(columns: &[Vec<f64>]) -> Result<GaussianFit, CliError> {
    let d = columns.len();
    if d < 2 {
        return Err(CliError::Dimensionality(
            "gaussian baseline needs at least 2 columns".into(),
        ));
    }
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let scores: Vec<Vec<f64>> = columns
        .iter()
        .map(|col| {
            scaled_ranks(col)
                .into_iter()
                .map(|u| std_normal.inverse_cdf(u))
                .collect()
        })
        .collect();
    let mut correlation = vec![vec![0.0; d]; d];
    for i in 0..d {
        correlation[i][i] = 1.0;
        for j in (i + 1)..d {
            let r = pearson(&scores[i], &scores[j]);
            if !r.is_finite() {
                return Err(CliError::Input(format!(
                    "correlation of columns {i} and {j} is undefined (constant ranks?)"
                )));
            }
            correlation[i][j] = r;
            correlation[j][i] = r;
        }
    }
    Ok(GaussianFit { dim: d, correlation })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Conditional joint density of axes (a, b) given the stratifying axis lying
/// between two of its copula quantiles, under the fitted Gaussian copula with
/// the supplied (continuous) marginals.
///
/// In score space the conditional integral has a closed form:
/// `h(x,y|S) = phi2(zx,zy) * (Phi(hi') - Phi(lo')) / P(S) * f(x) g(y) /
/// (phi(zx) phi(zy))` where `hi', lo'` standardize the stratum bounds by the
/// conditional law of the stratifying score given `(zx, zy)`.
pub struct ConditionalSlice {
    rho_ab: f64,
    // coefficients of the conditional mean of z_s given (z_a, z_b)
    coef_a: f64,
    coef_b: f64,
    sd_cond: f64,
    z_lo: f64,
    z_hi: f64,
    prob: f64,
}

impl ConditionalSlice {
    /// `lo`/`hi` are copula-scale quantile bounds of the stratum (0..1).
    pub fn new(
        fit: &GaussianFit,
        a: usize,
        b: usize,
        s: usize,
        lo: f64,
        hi: f64,
    ) -> Result<Self, CliError> {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let (rab, ras, rbs) = (fit.rho(a, b), fit.rho(a, s), fit.rho(b, s));
        let det = 1.0 - rab * rab;
        if det <= 1e-12 {
            return Err(CliError::Input(
                "singular correlation matrix in conditional slice".into(),
            ));
        }
        // regression of z_s on (z_a, z_b)
        let coef_a = (ras - rab * rbs) / det;
        let coef_b = (rbs - rab * ras) / det;
        let var_cond = 1.0 - (coef_a * ras + coef_b * rbs);
        if var_cond <= 1e-12 {
            return Err(CliError::Input(
                "degenerate conditional variance in slice".into(),
            ));
        }
        let z_lo = if lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            std_normal.inverse_cdf(lo)
        };
        let z_hi = if hi >= 1.0 {
            f64::INFINITY
        } else {
            std_normal.inverse_cdf(hi)
        };
        Ok(ConditionalSlice {
            rho_ab: rab,
            coef_a,
            coef_b,
            sd_cond: var_cond.sqrt(),
            z_lo,
            z_hi,
            prob: hi - lo,
        })
    }

    pub fn density(
        &self,
        x: f64,
        y: f64,
        marg_a: &MarginalModel,
        marg_b: &MarginalModel,
    ) -> Result<f64, CliError> {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let ua = marg_a.cdf(x).clamp(1e-12, 1.0 - 1e-12);
        let ub = marg_b.cdf(y).clamp(1e-12, 1.0 - 1e-12);
        let za = std_normal.inverse_cdf(ua);
        let zb = std_normal.inverse_cdf(ub);
        let mu = self.coef_a * za + self.coef_b * zb;
        let hi = if self.z_hi.is_infinite() {
            1.0
        } else {
            std_normal.cdf((self.z_hi - mu) / self.sd_cond)
        };
        let lo = if self.z_lo.is_infinite() {
            0.0
        } else {
            std_normal.cdf((self.z_lo - mu) / self.sd_cond)
        };
        let phi2 = bivariate_normal_density(za, zb, self.rho_ab);
        let fa = marg_a.pdf(x).map_err(CliError::input)?;
        let fb = marg_b.pdf(y).map_err(CliError::input)?;
        let denom = std_normal.pdf(za) * std_normal.pdf(zb) * self.prob;
        Ok(phi2 * (hi - lo) * fa * fb / denom)
    }
}

fn bivariate_normal_density(x: f64, y: f64, rho: f64) -> f64 {
    let det = 1.0 - rho * rho;
    let quad = (x * x - 2.0 * rho * x * y + y * y) / det;
    (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}
