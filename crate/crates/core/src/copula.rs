//! The Bernstein copula / Baker distribution model.
//!
//! The model's sole parameter is a nonnegative weight array `R` over
//! component indices `(k_1,...,k_d)` with uniform axis marginals: for every
//! axis `j` and level `k`, the weights summing over the other axes equal
//! `1/n_j`.  The copula density is
//! `c(u) = (prod_j n_j) * sum_k r_k prod_j b_{k_j-1, n_j-1}(u_j)`
//! and the CDF replaces each basis factor with its cumulative integral.
//! Sampling follows the mixture construction directly: draw a component
//! index, then draw each coordinate from the Beta law of the corresponding
//! order statistic.

use crate::bernstein;
use crate::marginals::{MarginalError, MarginalModel};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance under which constructor inputs are accepted as-is.
const CONSTRAINT_TOL: f64 = 1e-10;
/// Worst axis-sum violation the constructor will repair by renormalization.
const REPAIR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error("weights length {got} does not match dims product {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("dims must all be >= 1")]
    EmptyAxis,
    #[error("negative weight {value} at flat index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("axis-sum constraint violated by {residual} (axis {axis}, level {level})")]
    MarginalSums {
        axis: usize,
        level: usize,
        residual: f64,
    },
    #[error("point has dimension {got}, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation defined only for bivariate tensors, dims has length {0}")]
    NotBivariate(usize),
    #[error("mixing weight q={0} outside [0,1]")]
    BadMixingWeight(f64),
    #[error("H-family order n must be >= 1")]
    BadOrder,
    #[error(transparent)]
    Bernstein(#[from] bernstein::BernsteinError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error("joint density needs continuous marginals on every axis")]
    DiscreteMarginal,
}

/// Sign of the extreme-correlation H family: `+` concentrates mass on the
/// diagonal, `-` on the anti-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl std::str::FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(format!("expected '+' or '-', got '{other}'")),
        }
    }
}

/// The one-parameter H± subfamily: `(1-q) * independence + q * C_n^±`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpmModel {
    pub sign: Sign,
    pub q: f64,
    pub n: u32,
}

impl HpmModel {
    pub fn new(sign: Sign, q: f64, n: u32) -> Result<Self, CopulaError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(CopulaError::BadMixingWeight(q));
        }
        if n < 1 {
            return Err(CopulaError::BadOrder);
        }
        Ok(HpmModel { sign, q, n })
    }

    pub fn params(&self) -> ParamTensor {
        hpm_params(self.sign, self.q, self.n).expect("validated on construction")
    }
}

/// The d-dimensional weight tensor with uniform axis marginals.
///
/// Weights are stored row-major (last axis fastest), which is also the
/// serialized layout and the lexicographic order used by the covariance
/// estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct ParamTensor {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

impl From<ParamTensor> for TensorRepr {
    fn from(t: ParamTensor) -> Self {
        TensorRepr {
            dims: t.dims,
            weights: t.weights,
        }
    }
}

impl TryFrom<TensorRepr> for ParamTensor {
    type Error = CopulaError;
    fn try_from(r: TensorRepr) -> Result<Self, CopulaError> {
        ParamTensor::new(r.dims, r.weights)
    }
}

impl ParamTensor {
    /// Validated constructor.  Axis-sum residuals up to 1e-10 are accepted
    /// as-is; residuals up to 1e-8 (floating-point drift from EM output) are
    /// repaired by iterative proportional fitting; anything worse is an error.
    pub fn new(dims: Vec<usize>, mut weights: Vec<f64>) -> Result<Self, CopulaError> {
        validate_shape(&dims, &weights)?;
        for (i, w) in weights.iter_mut().enumerate() {
            if *w < 0.0 {
                if *w > -1e-12 {
                    *w = 0.0;
                } else {
                    return Err(CopulaError::NegativeWeight {
                        index: i,
                        value: *w,
                    });
                }
            }
        }
        let worst = worst_axis_residual(&dims, &weights);
        if worst.2 > CONSTRAINT_TOL {
            if worst.2 > REPAIR_TOL {
                return Err(CopulaError::MarginalSums {
                    axis: worst.0,
                    level: worst.1,
                    residual: worst.2,
                });
            }
            ipf_normalize(&dims, &mut weights, 1e-13, 200);
        }
        Ok(ParamTensor { dims, weights })
    }

    /// Unvalidated constructor for raw (possibly infeasible) weight arrays,
    /// e.g. the cell-count EM initializer.  Shape and nonnegativity are still
    /// enforced.
    pub(crate) fn raw(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self, CopulaError> {
        validate_shape(&dims, &weights)?;
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
            return Err(CopulaError::NegativeWeight { index: i, value: w });
        }
        Ok(ParamTensor { dims, weights })
    }

    /// The independence copula: every weight `1 / prod(dims)`.
    pub fn uniform(dims: Vec<usize>) -> Result<Self, CopulaError> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(CopulaError::EmptyAxis);
        }
        let size: usize = dims.iter().product();
        let w = 1.0 / size as f64;
        Ok(ParamTensor {
            weights: vec![w; size],
            dims,
        })
    }

    /// A random interior point of the constraint polytope: positive noise
    /// projected onto the axis-sum constraints by proportional fitting.
    pub fn random_feasible<R: Rng + ?Sized>(
        dims: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self, CopulaError> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(CopulaError::EmptyAxis);
        }
        let size: usize = dims.iter().product();
        let mut weights: Vec<f64> = (0..size)
            .map(|_| (rng.random_range(-1.5f64..1.5)).exp())
            .collect();
        ipf_normalize(&dims, &mut weights, 1e-13, 500);
        ParamTensor::new(dims, weights)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Row-major flat weights (last axis fastest).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at a multi-index (0-based per axis).
    pub fn weight_at(&self, idx: &[usize]) -> f64 {
        self.weights[flat_index(&self.dims, idx)]
    }

    /// Largest axis-sum constraint violation across all axes and levels.
    pub fn max_constraint_residual(&self) -> f64 {
        worst_axis_residual(&self.dims, &self.weights).2
    }

    fn check_point(&self, u: &[f64]) -> Result<(), CopulaError> {
        if u.len() != self.dims.len() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.dims.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Copula density `c(u; R)`.
    pub fn copula_density(&self, u: &[f64]) -> Result<f64, CopulaError> {
        self.check_point(u)?;
        let factors: Vec<Vec<f64>> = self
            .dims
            .iter()
            .zip(u)
            .map(|(&n, &uj)| bernstein::basis_all(n as u32 - 1, uj))
            .collect::<Result<_, _>>()?;
        Ok(self.scale() * self.mix(&factors))
    }

    /// Copula CDF `C(u; R)`; has uniform marginals and total mass 1.
    pub fn copula_cdf(&self, u: &[f64]) -> Result<f64, CopulaError> {
        self.check_point(u)?;
        let factors: Vec<Vec<f64>> = self
            .dims
            .iter()
            .zip(u)
            .map(|(&n, &uj)| bernstein::cum_all(n as u32 - 1, uj))
            .collect::<Result<_, _>>()?;
        Ok(self.scale() * self.mix(&factors))
    }

    /// Partial derivative of the copula density along `axis`.
    pub fn copula_density_partial(&self, u: &[f64], axis: usize) -> Result<f64, CopulaError> {
        self.check_point(u)?;
        if axis >= self.dims.len() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.dims.len(),
                got: axis,
            });
        }
        let factors: Vec<Vec<f64>> = self
            .dims
            .iter()
            .zip(u)
            .enumerate()
            .map(|(j, (&n, &uj))| {
                if j == axis {
                    (0..n as u32)
                        .map(|k| bernstein::basis_deriv(k, n as u32 - 1, uj))
                        .collect()
                } else {
                    bernstein::basis_all(n as u32 - 1, uj)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(self.scale() * self.mix(&factors))
    }

    /// `prod_j n_j`, the normalizing factor of the density and CDF mixtures.
    fn scale(&self) -> f64 {
        self.dims.iter().map(|&n| n as f64).product()
    }

    /// `sum_k r_k prod_j factors[j][k_j]` over the full index grid.
    fn mix(&self, factors: &[Vec<f64>]) -> f64 {
        let mut idx = vec![0usize; self.dims.len()];
        let mut total = 0.0;
        for &w in &self.weights {
            if w != 0.0 {
                let mut prod = w;
                for (j, &kj) in idx.iter().enumerate() {
                    prod *= factors[j][kj];
                }
                total += prod;
            }
            increment_index(&mut idx, &self.dims);
        }
        total
    }

    /// Spearman's rank correlation of the bivariate copula,
    /// `rho = 12 \int\int C(u,v) du dv - 3`, in closed form.
    pub fn spearman_rho(&self) -> Result<f64, CopulaError> {
        if self.dims.len() != 2 {
            return Err(CopulaError::NotBivariate(self.dims.len()));
        }
        let (m, n) = (self.dims[0], self.dims[1]);
        let row_tot: Vec<f64> = (0..m)
            .map(|k| bernstein::cum_total(k as u32, m as u32 - 1))
            .collect::<Result<_, _>>()?;
        let col_tot: Vec<f64> = (0..n)
            .map(|l| bernstein::cum_total(l as u32, n as u32 - 1))
            .collect::<Result<_, _>>()?;
        let mut integral = 0.0;
        for k in 0..m {
            for l in 0..n {
                integral += self.weights[k * n + l] * row_tot[k] * col_tot[l];
            }
        }
        Ok(12.0 * self.scale() * integral - 3.0)
    }

    /// Draw `count` points from the copula itself (uniform marginals).
    /// Deterministic for a given seed.
    pub fn sample_copula(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.sample_copula_with(count, &mut rng)
    }

    /// As [`sample_copula`](Self::sample_copula) with a caller-provided RNG.
    /// Parallel callers must split seeds per shard to keep streams disjoint.
    pub fn sample_copula_with<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let component = WeightedIndex::new(self.weights.iter().copied())
            .expect("weights are nonnegative and sum to 1");
        // Beta(k_j, n_j - k_j + 1) laws of the order statistics, per axis/level
        let beta: Vec<Vec<rand_distr::Beta<f64>>> = self
            .dims
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|a| {
                        rand_distr::Beta::new((a + 1) as f64, (n - a) as f64)
                            .expect("positive shape parameters")
                    })
                    .collect()
            })
            .collect();
        let d = self.dims.len();
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; d];
        for _ in 0..count {
            let flat = component.sample(rng);
            unflatten_index(&self.dims, flat, &mut idx);
            let row: Vec<f64> = (0..d).map(|j| beta[j][idx[j]].sample(rng)).collect();
            out.push(row);
        }
        out
    }
}

/// The H± weight tensor: `(1-q)/n^2` everywhere plus `q/n` on the diagonal
/// (`+`) or anti-diagonal (`-`).
pub fn hpm_params(sign: Sign, q: f64, n: u32) -> Result<ParamTensor, CopulaError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CopulaError::BadMixingWeight(q));
    }
    if n < 1 {
        return Err(CopulaError::BadOrder);
    }
    let n = n as usize;
    let base = (1.0 - q) / (n * n) as f64;
    let bump = q / n as f64;
    let mut weights = vec![base; n * n];
    for k in 0..n {
        let l = match sign {
            Sign::Plus => k,
            Sign::Minus => n - 1 - k,
        };
        weights[k * n + l] += bump;
    }
    Ok(ParamTensor {
        dims: vec![n, n],
        weights,
    })
}

/// Baker's distribution: a weight tensor coupled with per-axis marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct BakerModel {
    pub params: ParamTensor,
    pub marginals: Vec<MarginalModel>,
}

impl BakerModel {
    pub fn new(params: ParamTensor, marginals: Vec<MarginalModel>) -> Result<Self, CopulaError> {
        if marginals.len() != params.ndim() {
            return Err(CopulaError::DimensionMismatch {
                expected: params.ndim(),
                got: marginals.len(),
            });
        }
        Ok(BakerModel { params, marginals })
    }

    /// Joint density at a data-scale point: `c(F_1(x_1),...) * prod f_j(x_j)`.
    /// All marginals must be continuous.
    pub fn joint_density(&self, x: &[f64]) -> Result<f64, CopulaError> {
        if x.len() != self.params.ndim() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.params.ndim(),
                got: x.len(),
            });
        }
        if self.marginals.iter().any(|m| m.is_discrete()) {
            return Err(CopulaError::DiscreteMarginal);
        }
        let u: Vec<f64> = self
            .marginals
            .iter()
            .zip(x)
            .map(|(m, &xj)| m.cdf(xj))
            .collect();
        let mut dens = self.params.copula_density(&u)?;
        for (m, &xj) in self.marginals.iter().zip(x) {
            dens *= m.pdf(xj)?;
        }
        Ok(dens)
    }

    /// Draw `count` rows: sample the copula, then map each coordinate through
    /// the marginal quantile.  Deterministic for a given seed.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, CopulaError> {
        let mut rows = self.params.sample_copula(count, seed);
        for row in &mut rows {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.marginals[j].quantile(v.clamp(1e-15, 1.0 - 1e-15))?;
            }
        }
        Ok(rows)
    }
}

// ---------------------------------------------------------------------------
// index and constraint helpers (shared with the em/mstep modules)
// ---------------------------------------------------------------------------

fn validate_shape(dims: &[usize], weights: &[f64]) -> Result<(), CopulaError> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0) {
        return Err(CopulaError::EmptyAxis);
    }
    let size: usize = dims.iter().product();
    if weights.len() != size {
        return Err(CopulaError::ShapeMismatch {
            expected: size,
            got: weights.len(),
        });
    }
    Ok(())
}

pub(crate) fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    let mut flat = 0;
    for (d, &i) in dims.iter().zip(idx) {
        debug_assert!(i < *d);
        flat = flat * d + i;
    }
    flat
}

pub(crate) fn unflatten_index(dims: &[usize], mut flat: usize, out: &mut [usize]) {
    for j in (0..dims.len()).rev() {
        out[j] = flat % dims[j];
        flat /= dims[j];
    }
}

/// Advance a row-major multi-index by one (with wraparound).
pub(crate) fn increment_index(idx: &mut [usize], dims: &[usize]) {
    for j in (0..dims.len()).rev() {
        idx[j] += 1;
        if idx[j] < dims[j] {
            return;
        }
        idx[j] = 0;
    }
}

/// Sum of weights over each level of each axis.
pub(crate) fn axis_level_sums(dims: &[usize], weights: &[f64]) -> Vec<Vec<f64>> {
    let mut sums: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n]).collect();
    let mut idx = vec![0usize; dims.len()];
    for &w in weights {
        for (j, &kj) in idx.iter().enumerate() {
            sums[j][kj] += w;
        }
        increment_index(&mut idx, dims);
    }
    sums
}

/// `(axis, level, |sum - 1/n_axis|)` of the worst constraint violation.
fn worst_axis_residual(dims: &[usize], weights: &[f64]) -> (usize, usize, f64) {
    let sums = axis_level_sums(dims, weights);
    let mut worst = (0, 0, 0.0);
    for (j, level_sums) in sums.iter().enumerate() {
        let target = 1.0 / dims[j] as f64;
        for (a, &s) in level_sums.iter().enumerate() {
            let r = (s - target).abs();
            if r > worst.2 {
                worst = (j, a, r);
            }
        }
    }
    worst
}

/// Iterative proportional fitting toward uniform axis sums.  Converges for
/// positive tensors; used for constructor repair and random feasible points.
pub(crate) fn ipf_normalize(dims: &[usize], weights: &mut [f64], tol: f64, max_sweeps: usize) {
    for _ in 0..max_sweeps {
        for (j, &nj) in dims.iter().enumerate() {
            let sums = axis_level_sums(dims, weights);
            let target = 1.0 / nj as f64;
            let scale: Vec<f64> = sums[j]
                .iter()
                .map(|&s| if s > 0.0 { target / s } else { 0.0 })
                .collect();
            let mut idx = vec![0usize; dims.len()];
            for w in weights.iter_mut() {
                *w *= scale[idx[j]];
                increment_index(&mut idx, dims);
            }
        }
        if worst_axis_residual(dims, weights).2 < tol {
            break;
        }
    }
}

/// Empirical Spearman rank correlation (mid-ranks for ties).
pub fn empirical_spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// 1-based ranks with ties replaced by the mean rank of the tied block.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}
