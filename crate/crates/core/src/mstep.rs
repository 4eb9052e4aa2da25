//! Constrained maximizer of the EM M-step.
//!
//! Given the averaged responsibilities `tau_bar`, the M-step maximizes
//! `sum_k tau_bar_k log r_k` over the uniform-marginal polytope.  Stationarity
//! gives `r_k = tau_bar_k / sum_j mu^{(j)}_{k_j}` for one Lagrange multiplier
//! vector per axis, and the multipliers solve a coupled system tackled by a
//! fixed-point sweep: each axis in turn is solved exactly by bisection on a
//! strictly decreasing residual, the others held fixed, then all axes but the
//! last are recentered to their initial sums to remove the additive
//! redundancy (adding c to one axis and subtracting it from another leaves
//! every `r_k` unchanged).
//!
//! In two dimensions a sweep is exactly Steps M1-M3 of the bivariate
//! algorithm: solve the column multipliers, solve the row multipliers,
//! recenter the rows.  The sweep contracts locally at rate `nu_2`, the second
//! singular value of the scaled responsibility matrix; [`rate_bound`] computes
//! that diagnostic.

use crate::copula::{self, ParamTensor};
use nalgebra::DMatrix;
use thiserror::Error;

/// Residual tolerance of the inner bisection; must beat the outer tolerance.
const BISECT_RESIDUAL_TOL: f64 = 1e-14;
/// Relative interval width at which bisection stops refining.
const BISECT_REL_TOL: f64 = 1e-15;
const BRACKET_MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MStepError {
    #[error("invalid tau_bar: {0}")]
    InvalidTauBar(String),
    #[error("bisection could not bracket a root within {BRACKET_MAX_DOUBLINGS} doublings")]
    BracketFailure,
    #[error("no convergence in {iterations} sweeps (constraint residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Flat row-major weights of the last iterate.
        last: Vec<f64>,
    },
    #[error("diagnostic defined only for bivariate tau_bar, got {0} axes")]
    NotBivariate(usize),
    #[error(transparent)]
    Copula(#[from] copula::CopulaError),
}

/// Averaged responsibilities: a probability tensor over component indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TauBar {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl TauBar {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self, MStepError> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(MStepError::InvalidTauBar("empty axis".into()));
        }
        let size: usize = dims.iter().product();
        if values.len() != size {
            return Err(MStepError::InvalidTauBar(format!(
                "{} values for dims product {size}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(MStepError::InvalidTauBar(format!("bad entry {v}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MStepError::InvalidTauBar(format!("total {total} != 1")));
        }
        Ok(TauBar { dims, values })
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self, MStepError> {
        let size: usize = dims.iter().product();
        if size == 0 {
            return Err(MStepError::InvalidTauBar("empty axis".into()));
        }
        Ok(TauBar {
            values: vec![1.0 / size as f64; size],
            dims,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One Lagrange multiplier vector per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub per_axis: Vec<Vec<f64>>,
}

impl MultiplierState {
    /// Every multiplier starts at `1/d` (the bivariate algorithm's 1/2).
    pub fn initial(dims: &[usize]) -> Self {
        let d = dims.len() as f64;
        MultiplierState {
            per_axis: dims.iter().map(|&n| vec![1.0 / d; n]).collect(),
        }
    }

    /// Per-axis sums, the quantities the recentering step holds fixed.
    pub fn axis_sums(&self) -> Vec<f64> {
        self.per_axis.iter().map(|v| v.iter().sum()).collect()
    }

    fn denominator(&self, idx: &[usize]) -> f64 {
        self.per_axis
            .iter()
            .zip(idx)
            .map(|(mu, &k)| mu[k])
            .sum()
    }
}

/// Converged output of [`solve_full`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub params: ParamTensor,
    pub multipliers: MultiplierState,
    pub iterations: usize,
    pub residual: f64,
}

/// Find the root of a strictly decreasing `residual_fn` on `(lower_open, inf)`.
///
/// The function tends to `+inf` at the open lower end and below zero at
/// infinity, so a sign change is bracketed by growing the offset from
/// `lower_open + 1` geometrically (and shrinking it likewise when the start
/// is already negative), then bisected.
pub fn inner_bisect<F: Fn(f64) -> f64>(
    residual_fn: F,
    lower_open: f64,
    tol: f64,
) -> Result<f64, MStepError> {
    let at = |offset: f64| residual_fn(lower_open + offset);
    let mut off_lo = 1.0;
    let mut off_hi = 1.0;
    let start = at(1.0);
    if start == 0.0 {
        return Ok(lower_open + 1.0);
    }
    if start > 0.0 {
        // root is further out
        let mut found = false;
        for _ in 0..BRACKET_MAX_DOUBLINGS {
            off_hi *= 2.0;
            if at(off_hi) <= 0.0 {
                found = true;
                break;
            }
            off_lo = off_hi;
        }
        if !found {
            return Err(MStepError::BracketFailure);
        }
    } else {
        // root is closer to the open end
        let mut found = false;
        for _ in 0..BRACKET_MAX_DOUBLINGS {
            off_lo /= 2.0;
            if at(off_lo) >= 0.0 {
                found = true;
                break;
            }
            off_hi = off_lo;
        }
        if !found {
            return Err(MStepError::BracketFailure);
        }
    }
    // bisect on the offset so the comparison with lower_open stays exact
    for _ in 0..200 {
        let mid = 0.5 * (off_lo + off_hi);
        let f = at(mid);
        if f.abs() < tol {
            return Ok(lower_open + mid);
        }
        if f > 0.0 {
            off_lo = mid;
        } else {
            off_hi = mid;
        }
        if off_hi - off_lo <= BISECT_REL_TOL * off_hi.abs().max(1e-300) {
            break;
        }
    }
    Ok(lower_open + 0.5 * (off_lo + off_hi))
}

/// Maximize `sum tau_bar log r` over the constraint polytope.
///
/// `tol` bounds the worst axis-sum violation of the returned tensor (default
/// choice 1e-10); `max_outer` caps the number of fixed-point sweeps.  Entries
/// with `tau_bar = 0` produce `r = 0`; a level whose entire slice is zero
/// makes the constraint unreachable and is rejected.
pub fn solve(tau_bar: &TauBar, tol: f64, max_outer: usize) -> Result<ParamTensor, MStepError> {
    solve_full(tau_bar, tol, max_outer).map(|s| s.params)
}

/// As [`solve`], also returning the multipliers and iteration stats.
pub fn solve_full(
    tau_bar: &TauBar,
    tol: f64,
    max_outer: usize,
) -> Result<Solution, MStepError> {
    check_slices(tau_bar)?;
    let mut state = MultiplierState::initial(&tau_bar.dims);
    let target_sums = state.axis_sums();
    for t in 1..=max_outer {
        sweep(tau_bar, &mut state, &target_sums)?;
        let (weights, residual) = params_of(tau_bar, &state);
        if residual < tol {
            let params = ParamTensor::new(tau_bar.dims.clone(), weights)?;
            return Ok(Solution {
                params,
                multipliers: state,
                iterations: t,
                residual,
            });
        }
        if t == max_outer {
            return Err(MStepError::NonConvergence {
                iterations: t,
                residual,
                last: weights,
            });
        }
    }
    unreachable!("loop returns or errors")
}

/// One full fixed-point cycle: solve every axis but the first, then the
/// first, then recenter all axes but the last onto `target_sums`.
pub fn sweep(
    tau_bar: &TauBar,
    state: &mut MultiplierState,
    target_sums: &[f64],
) -> Result<(), MStepError> {
    let d = tau_bar.dims.len();
    let order: Vec<usize> = (1..d).chain(std::iter::once(0)).collect();
    for &axis in &order {
        solve_axis(tau_bar, state, axis)?;
    }
    // Remove the additive redundancy (d-1 degrees of freedom): pin the sums
    // of all axes but the last, absorbing the total shift into the last axis
    // so every denominator sum_j mu^{(j)}_{k_j} is preserved.  The absorbed
    // part is overwritten by the next sweep's first solve, which at d = 2
    // makes the row-multiplier iterates exactly those of Steps M1-M3.
    let mut absorbed = 0.0;
    for axis in 0..d.saturating_sub(1) {
        let n = tau_bar.dims[axis] as f64;
        let shift = (state.per_axis[axis].iter().sum::<f64>() - target_sums[axis]) / n;
        for v in &mut state.per_axis[axis] {
            *v -= shift;
        }
        absorbed += shift;
    }
    if d > 1 {
        for v in &mut state.per_axis[d - 1] {
            *v += absorbed;
        }
    }
    Ok(())
}

/// Solve the multipliers of one axis exactly, the others held fixed.
fn solve_axis(
    tau_bar: &TauBar,
    state: &mut MultiplierState,
    axis: usize,
) -> Result<(), MStepError> {
    let dims = &tau_bar.dims;
    let n_axis = dims[axis];
    let target = 1.0 / n_axis as f64;
    // gather (tau, partial denominator) pairs per level of this axis
    let mut terms: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_axis];
    let mut idx = vec![0usize; dims.len()];
    for &tv in &tau_bar.values {
        if tv > 0.0 {
            let s_minus = state.denominator(&idx) - state.per_axis[axis][idx[axis]];
            terms[idx[axis]].push((tv, s_minus));
        }
        copula::increment_index(&mut idx, dims);
    }
    for (level, level_terms) in terms.iter().enumerate() {
        let lower_open = level_terms
            .iter()
            .map(|&(_, s)| -s)
            .fold(f64::NEG_INFINITY, f64::max);
        let root = inner_bisect(
            |x| {
                level_terms
                    .iter()
                    .map(|&(tv, s)| tv / (s + x))
                    .sum::<f64>()
                    - target
            },
            lower_open,
            BISECT_RESIDUAL_TOL,
        )?;
        state.per_axis[axis][level] = root;
    }
    Ok(())
}

/// Weights implied by the multipliers and their worst constraint violation.
fn params_of(tau_bar: &TauBar, state: &MultiplierState) -> (Vec<f64>, f64) {
    let dims = &tau_bar.dims;
    let mut weights = vec![0.0; tau_bar.values.len()];
    let mut idx = vec![0usize; dims.len()];
    let mut valid = true;
    for (w, &tv) in weights.iter_mut().zip(&tau_bar.values) {
        if tv > 0.0 {
            let s = state.denominator(&idx);
            if s <= 0.0 {
                valid = false;
                break;
            }
            *w = tv / s;
        }
        copula::increment_index(&mut idx, dims);
    }
    if !valid {
        return (weights, f64::INFINITY);
    }
    let sums = copula::axis_level_sums(dims, &weights);
    let mut residual: f64 = 0.0;
    for (j, level_sums) in sums.iter().enumerate() {
        let target = 1.0 / dims[j] as f64;
        for &s in level_sums {
            residual = residual.max((s - target).abs());
        }
    }
    (weights, residual)
}

fn check_slices(tau_bar: &TauBar) -> Result<(), MStepError> {
    let sums = copula::axis_level_sums(&tau_bar.dims, &tau_bar.values);
    for (j, level_sums) in sums.iter().enumerate() {
        for (a, &s) in level_sums.iter().enumerate() {
            if s <= 0.0 {
                return Err(MStepError::InvalidTauBar(format!(
                    "axis {j} level {a} has zero total responsibility; \
                     the 1/{} constraint is unreachable",
                    tau_bar.dims[j]
                )));
            }
        }
    }
    Ok(())
}

/// The M-step objective `sum tau_bar log r` (zero-responsibility entries skipped).
pub fn objective(tau_bar: &TauBar, params: &ParamTensor) -> f64 {
    tau_bar
        .values
        .iter()
        .zip(params.weights())
        .map(|(&t, &r)| if t > 0.0 { t * r.ln() } else { 0.0 })
        .sum()
}

/// Local contraction factor of the fixed-point sweep at a solution.
///
/// Builds `c_kl = tau_bar_kl / (mu_k + lambda_l)^2`, the diagonal row/column
/// scalings `G` and `H`, and `D = G^{-1/2} C H^{-1/2}`; the largest eigenvalue
/// of `D D'` is 1 and the second-largest, `nu_2`, bounds the asymptotic
/// per-sweep error contraction.  Bivariate only.
pub fn rate_bound(tau_bar: &TauBar, solution: &MultiplierState) -> Result<f64, MStepError> {
    if tau_bar.dims.len() != 2 {
        return Err(MStepError::NotBivariate(tau_bar.dims.len()));
    }
    let (m, n) = (tau_bar.dims[0], tau_bar.dims[1]);
    let mu = &solution.per_axis[0];
    let lambda = &solution.per_axis[1];
    let mut c = DMatrix::zeros(m, n);
    for k in 0..m {
        for l in 0..n {
            let denom = mu[k] + lambda[l];
            if denom <= 0.0 {
                return Err(MStepError::InvalidTauBar(format!(
                    "multiplier sum not positive at ({k},{l})"
                )));
            }
            c[(k, l)] = tau_bar.values[k * n + l] / (denom * denom);
        }
    }
    let row_sums: Vec<f64> = (0..m).map(|k| c.row(k).sum()).collect();
    let col_sums: Vec<f64> = (0..n).map(|l| c.column(l).sum()).collect();
    let mut d_mat = c;
    for k in 0..m {
        for l in 0..n {
            d_mat[(k, l)] /= (row_sums[k] * col_sums[l]).sqrt();
        }
    }
    let ddt = &d_mat * d_mat.transpose();
    let mut eigen: Vec<f64> = ddt.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigen.sort_by(|a, b| b.partial_cmp(a).unwrap());
    debug_assert!((eigen[0] - 1.0).abs() < 1e-8, "largest eigenvalue {}", eigen[0]);
    let nu2 = if m > 1 { eigen[1] } else { 0.0 };
    Ok(nu2.clamp(0.0, 1.0 - f64::EPSILON))
}
