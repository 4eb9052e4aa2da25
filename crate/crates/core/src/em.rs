//! EM estimation of the weight tensor.
//!
//! All E-steps share one shape: per observation, each axis contributes a
//! factor vector over its component levels — the order-statistic density
//! `n b_{k-1,n-1}(F(x))` on continuous axes, the order-statistic mass
//! `n (B_{k-1,n-1}(F(x)) - B_{k-1,n-1}(F(x-)))` on discrete axes — and the
//! posterior over component indices is the normalized product mixture.
//! Averaging the posteriors gives `tau_bar`, which the constrained M-step
//! turns back into a feasible tensor.  Marginal density factors cancel in the
//! normalization, so the recorded pseudo-log-likelihood is copula-level.
//!
//! The parameterized H± family gets its own, much cheaper EM: the mixture
//! responsibility against the independence component updates `q`, and the
//! order `n` is re-picked by direct objective evaluation over the allowed
//! range.

use crate::bernstein;
use crate::copula::{self, CopulaError, ParamTensor, Sign};
use crate::inference;
use crate::marginals::MarginalModel;
use crate::mstep::{self, MStepError, TauBar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("observation {obs} has zero mixture density (outside model support)")]
    DegenerateDensity { obs: usize },
    #[error("pseudo-observations malformed: {0}")]
    BadPseudoSample(String),
    #[error("axis kinds do not match the operation: {0}")]
    KindMismatch(String),
    #[error("dims {0:?} invalid for this sample")]
    BadDims(Vec<usize>),
    #[error("empty model-selection grid")]
    EmptyGrid,
    #[error("all {0} grid cells failed to fit")]
    AllCellsFailed(usize),
    #[error(
        "M-step stalled at EM iteration {iterations} (constraint residual {residual:.3e}); \
         the last feasible fit is attached"
    )]
    MStepStalled {
        iterations: usize,
        residual: f64,
        partial: Box<FitResult>,
    },
    #[error(transparent)]
    Bernstein(#[from] crate::bernstein::BernsteinError),
    #[error(transparent)]
    MStep(#[from] MStepError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
}

/// Declared kind of one data axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Continuous,
    Discrete,
}

/// Per-observation marginal-CDF transforms of the data.
///
/// Continuous axes hold the scaled empirical CDF value `rank/(N+1)` (left
/// limit equal to it); discrete axes hold the fitted CDF together with its
/// left limit, whose difference is the observation's probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    kinds: Vec<AxisKind>,
    /// Column-major: `right[j][i]` is F_j at observation i.
    right: Vec<Vec<f64>>,
    left: Vec<Vec<f64>>,
}

impl PseudoSample {
    /// Build from data columns already transformed to CDF scale.
    pub fn new(
        kinds: Vec<AxisKind>,
        right: Vec<Vec<f64>>,
        left: Vec<Vec<f64>>,
    ) -> Result<Self, EmError> {
        if kinds.is_empty() || kinds.len() != right.len() || kinds.len() != left.len() {
            return Err(EmError::BadPseudoSample("column count mismatch".into()));
        }
        let n = right[0].len();
        for j in 0..kinds.len() {
            if right[j].len() != n || left[j].len() != n {
                return Err(EmError::BadPseudoSample("ragged columns".into()));
            }
            for i in 0..n {
                let (l, r) = (left[j][i], right[j][i]);
                if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&l) || l > r {
                    return Err(EmError::BadPseudoSample(format!(
                        "axis {j} obs {i}: left {l}, right {r}"
                    )));
                }
                if kinds[j] == AxisKind::Continuous && l != r {
                    return Err(EmError::BadPseudoSample(format!(
                        "continuous axis {j} has distinct left limit at obs {i}"
                    )));
                }
            }
        }
        Ok(PseudoSample { kinds, right, left })
    }

    /// Rank-transform raw continuous columns: `#{x_j <= x_i} / (N+1)`.
    pub fn from_continuous(columns: &[Vec<f64>]) -> Result<Self, EmError> {
        let right: Vec<Vec<f64>> = columns.iter().map(|c| scaled_ranks(c)).collect();
        PseudoSample::new(
            vec![AxisKind::Continuous; columns.len()],
            right.clone(),
            right,
        )
    }

    /// Use values already on the unit interval (e.g. simulated copula data).
    pub fn from_uniform(columns: &[Vec<f64>]) -> Result<Self, EmError> {
        PseudoSample::new(
            vec![AxisKind::Continuous; columns.len()],
            columns.to_vec(),
            columns.to_vec(),
        )
    }

    /// Transform data columns through fitted marginal models.
    pub fn from_marginals(
        columns: &[Vec<f64>],
        models: &[MarginalModel],
    ) -> Result<Self, EmError> {
        if columns.len() != models.len() {
            return Err(EmError::BadPseudoSample(
                "one marginal model per column required".into(),
            ));
        }
        let mut kinds = Vec::new();
        let mut right = Vec::new();
        let mut left = Vec::new();
        for (col, model) in columns.iter().zip(models) {
            let r: Vec<f64> = col.iter().map(|&x| model.cdf(x)).collect();
            let l: Vec<f64> = if model.is_discrete() {
                col.iter().map(|&x| model.cdf_left(x)).collect()
            } else {
                r.clone()
            };
            kinds.push(if model.is_discrete() {
                AxisKind::Discrete
            } else {
                AxisKind::Continuous
            });
            right.push(r);
            left.push(l);
        }
        PseudoSample::new(kinds, right, left)
    }

    pub fn n_obs(&self) -> usize {
        self.right[0].len()
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[AxisKind] {
        &self.kinds
    }

    pub fn right(&self) -> &[Vec<f64>] {
        &self.right
    }

    pub fn left(&self) -> &[Vec<f64>] {
        &self.left
    }
}

/// Scaled empirical CDF of a column evaluated at its own entries.
pub fn scaled_ranks(column: &[f64]) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = column.len() as f64 + 1.0;
    column
        .iter()
        .map(|&x| sorted.partition_point(|&v| v <= x) as f64 / scale)
        .collect()
}

/// Ordered categorical data as a two-way table of counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// Row-major `|A| x |B|` counts.
    pub counts: Vec<f64>,
}

impl ContingencyTable {
    pub fn from_pairs(x: &[f64], y: &[f64]) -> Result<Self, EmError> {
        if x.len() != y.len() || x.is_empty() {
            return Err(EmError::BadPseudoSample(
                "paired columns of equal positive length required".into(),
            ));
        }
        let mut row_values: Vec<f64> = x.to_vec();
        row_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        row_values.dedup();
        let mut col_values: Vec<f64> = y.to_vec();
        col_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        col_values.dedup();
        let mut counts = vec![0.0; row_values.len() * col_values.len()];
        for (&xi, &yi) in x.iter().zip(y) {
            let a = row_values
                .binary_search_by(|v| v.partial_cmp(&xi).unwrap())
                .unwrap();
            let b = col_values
                .binary_search_by(|v| v.partial_cmp(&yi).unwrap())
                .unwrap();
            counts[a * col_values.len() + b] += 1.0;
        }
        Ok(ContingencyTable {
            row_values,
            col_values,
            counts,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// shared E-step kernel
// ---------------------------------------------------------------------------

/// Per-axis factor matrices, `factor[j][i * n_j + a]`, plus observation weights.
struct Factors {
    per_axis: Vec<Vec<f64>>,
    obs_weights: Vec<f64>,
}

fn build_factors(pseudo: &PseudoSample, dims: &[usize]) -> Result<Factors, EmError> {
    if dims.len() != pseudo.dim() || dims.iter().any(|&n| n == 0) {
        return Err(EmError::BadDims(dims.to_vec()));
    }
    let n_obs = pseudo.n_obs();
    let mut per_axis = Vec::with_capacity(dims.len());
    for (j, &nj) in dims.iter().enumerate() {
        let deg = nj as u32 - 1;
        let mut mat = vec![0.0; n_obs * nj];
        match pseudo.kinds[j] {
            AxisKind::Continuous => {
                for i in 0..n_obs {
                    let row = bernstein::basis_all(deg, pseudo.right[j][i])?;
                    for (a, &b) in row.iter().enumerate() {
                        mat[i * nj + a] = nj as f64 * b;
                    }
                }
            }
            AxisKind::Discrete => {
                for i in 0..n_obs {
                    let hi = bernstein::cum_all(deg, pseudo.right[j][i])?;
                    let lo = bernstein::cum_all(deg, pseudo.left[j][i])?;
                    for a in 0..nj {
                        mat[i * nj + a] = nj as f64 * (hi[a] - lo[a]).max(0.0);
                    }
                }
            }
        }
        per_axis.push(mat);
    }
    Ok(Factors {
        per_axis,
        obs_weights: vec![1.0; n_obs],
    })
}

/// Averaged responsibilities and the weighted log of the mixture density.
/// Reductions run in ascending index order so results are bit-reproducible.
fn estep_core(
    weights: &[f64],
    dims: &[usize],
    factors: &Factors,
) -> Result<(Vec<f64>, f64), EmError> {
    let size = weights.len();
    let d = dims.len();
    let n_obs = factors.obs_weights.len();
    let total_w: f64 = factors.obs_weights.iter().sum();
    let mut tau = vec![0.0; size];
    let mut comp = vec![0.0; size];
    let mut loglik = 0.0;
    let mut idx = vec![0usize; d];
    for i in 0..n_obs {
        let wi = factors.obs_weights[i];
        idx.fill(0);
        let mut dens = 0.0;
        for k in 0..size {
            let mut p = weights[k];
            if p != 0.0 {
                for (j, &nj) in dims.iter().enumerate() {
                    p *= factors.per_axis[j][i * nj + idx[j]];
                }
            }
            comp[k] = p;
            dens += p;
            copula::increment_index(&mut idx, dims);
        }
        if !(dens > 0.0) || !dens.is_finite() {
            return Err(EmError::DegenerateDensity { obs: i });
        }
        loglik += wi * dens.ln();
        let scale = wi / (dens * total_w);
        for k in 0..size {
            tau[k] += comp[k] * scale;
        }
    }
    // each posterior row sums to 1, so the mean does too; pin the float sum
    let total: f64 = tau.iter().sum();
    if total > 0.0 {
        for t in tau.iter_mut() {
            *t /= total;
        }
    }
    Ok((tau, loglik))
}

// ---------------------------------------------------------------------------
// public E-steps and the pseudo-log-likelihood
// ---------------------------------------------------------------------------

/// E-step when every axis is continuous.
pub fn estep_continuous(params: &ParamTensor, pseudo: &PseudoSample) -> Result<TauBar, EmError> {
    if pseudo.kinds.iter().any(|&k| k != AxisKind::Continuous) {
        return Err(EmError::KindMismatch(
            "estep_continuous requires all-continuous axes".into(),
        ));
    }
    estep_mixed(params, pseudo)
}

/// E-step for any mix of continuous and discrete axes.
pub fn estep_mixed(params: &ParamTensor, pseudo: &PseudoSample) -> Result<TauBar, EmError> {
    let factors = build_factors(pseudo, params.dims())?;
    let (tau, _) = estep_core(params.weights(), params.dims(), &factors)?;
    Ok(TauBar::new(params.dims().to_vec(), tau)?)
}

/// E-step for bivariate ordered categorical data given as a count table;
/// aggregates the cell posteriors weighted by cell counts.
pub fn estep_discrete(
    params: &ParamTensor,
    table: &ContingencyTable,
    row_marginal: &MarginalModel,
    col_marginal: &MarginalModel,
) -> Result<TauBar, EmError> {
    let factors = table_factors(params.dims(), table, row_marginal, col_marginal)?;
    let (tau, _) = estep_core(params.weights(), params.dims(), &factors)?;
    Ok(TauBar::new(params.dims().to_vec(), tau)?)
}

fn table_factors(
    dims: &[usize],
    table: &ContingencyTable,
    row_marginal: &MarginalModel,
    col_marginal: &MarginalModel,
) -> Result<Factors, EmError> {
    if dims.len() != 2 {
        return Err(EmError::BadDims(dims.to_vec()));
    }
    if !row_marginal.is_discrete() || !col_marginal.is_discrete() {
        return Err(EmError::KindMismatch(
            "estep_discrete requires discrete marginals".into(),
        ));
    }
    // order-statistic masses per support value
    let mass = |values: &[f64], model: &MarginalModel, nj: usize| -> Result<Vec<f64>, EmError> {
        let deg = nj as u32 - 1;
        let mut out = vec![0.0; values.len() * nj];
        for (t, &v) in values.iter().enumerate() {
            let hi = bernstein::cum_all(deg, model.cdf(v))?;
            let lo = bernstein::cum_all(deg, model.cdf_left(v))?;
            for a in 0..nj {
                out[t * nj + a] = nj as f64 * (hi[a] - lo[a]).max(0.0);
            }
        }
        Ok(out)
    };
    let row_mass = mass(&table.row_values, row_marginal, dims[0])?;
    let col_mass = mass(&table.col_values, col_marginal, dims[1])?;
    let nb = table.col_values.len();
    let mut per_axis = vec![Vec::new(), Vec::new()];
    let mut obs_weights = Vec::new();
    for (cell, &count) in table.counts.iter().enumerate() {
        if count > 0.0 {
            let (a, b) = (cell / nb, cell % nb);
            per_axis[0].extend_from_slice(&row_mass[a * dims[0]..(a + 1) * dims[0]]);
            per_axis[1].extend_from_slice(&col_mass[b * dims[1]..(b + 1) * dims[1]]);
            obs_weights.push(count);
        }
    }
    if obs_weights.is_empty() {
        return Err(EmError::BadPseudoSample("empty contingency table".into()));
    }
    Ok(Factors {
        per_axis,
        obs_weights,
    })
}

/// Copula-level pseudo-log-likelihood `sum_i log c(u_i; R)`; on discrete axes
/// the basis factor is replaced by the order-statistic mass, giving the
/// probability-mass analogue.
pub fn pseudo_loglik(params: &ParamTensor, pseudo: &PseudoSample) -> Result<f64, EmError> {
    let factors = build_factors(pseudo, params.dims())?;
    let (_, ll) = estep_core(params.weights(), params.dims(), &factors)?;
    Ok(ll)
}

// ---------------------------------------------------------------------------
// initializer, EM loop, AIC
// ---------------------------------------------------------------------------

/// Cell-count initializer: the fraction of pseudo-observations falling in
/// each grid cell `((k-1)/n_j, k/n_j]`, with the first cell closed at 0.
///
/// The result is a raw probability tensor — it generally violates the
/// uniform-marginal sums (the estimator is inconsistent for fixed dims) and
/// is meant as an EM starting point, not a fitted model.
pub fn init_binning(pseudo: &PseudoSample, dims: &[usize]) -> Result<ParamTensor, EmError> {
    if dims.len() != pseudo.dim() || dims.iter().any(|&n| n == 0) {
        return Err(EmError::BadDims(dims.to_vec()));
    }
    let size: usize = dims.iter().product();
    let mut counts = vec![0.0; size];
    let n_obs = pseudo.n_obs();
    let mut idx = vec![0usize; dims.len()];
    for i in 0..n_obs {
        for (j, &nj) in dims.iter().enumerate() {
            let u = pseudo.right[j][i];
            let cell = (u * nj as f64).ceil() as usize;
            idx[j] = cell.clamp(1, nj) - 1;
        }
        counts[copula::flat_index(dims, &idx)] += 1.0;
    }
    let n = n_obs as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(ParamTensor::raw(dims.to_vec(), counts)?)
}

fn smooth_weights(raw: &[f64], n_obs: usize) -> Vec<f64> {
    let size = raw.len() as f64;
    let eps = 1.0 / (n_obs as f64 * size);
    let total: f64 = raw.iter().map(|w| w + eps).sum();
    raw.iter().map(|w| (w + eps) / total).collect()
}

/// Where the EM iteration starts.
#[derive(Debug, Clone, Default)]
pub enum InitStrategy {
    /// Cell-count initializer, smoothed by `1/(N * prod dims)` per cell so no
    /// slice starts at zero.
    #[default]
    Binning,
    /// The independence tensor.
    Uniform,
    /// A caller-supplied tensor (must match dims).
    Custom(ParamTensor),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Stop when the max-abs change of tau_bar falls below this.
    pub tol: f64,
    /// Alternative stop: relative log-likelihood change below this.
    pub loglik_tol: f64,
    pub max_iter: usize,
    /// Constraint tolerance passed to the M-step solver.
    pub mstep_tol: f64,
    pub mstep_max_outer: usize,
    pub init: InitStrategy,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-8,
            loglik_tol: 1e-10,
            max_iter: 2000,
            mstep_tol: 1e-10,
            mstep_max_outer: 10_000,
            init: InitStrategy::Binning,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ParamTensor,
    /// Pseudo-log-likelihood after each M-step; nondecreasing.
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Run the EM loop: alternate the E-step appropriate to the axis kinds with
/// the constrained M-step until `tau_bar` stops moving.
pub fn fit(
    pseudo: &PseudoSample,
    dims: &[usize],
    config: &FitConfig,
) -> Result<FitResult, EmError> {
    let factors = build_factors(pseudo, dims)?;
    let mut weights = match &config.init {
        InitStrategy::Binning => {
            let raw = init_binning(pseudo, dims)?;
            smooth_weights(raw.weights(), pseudo.n_obs())
        }
        InitStrategy::Uniform => ParamTensor::uniform(dims.to_vec())?.weights().to_vec(),
        InitStrategy::Custom(t) => {
            if t.dims() != dims {
                return Err(EmError::BadDims(dims.to_vec()));
            }
            t.weights().to_vec()
        }
    };
    let mut trace = Vec::new();
    let mut prev_tau: Vec<f64> = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=config.max_iter {
        let (tau, ll) = estep_core(&weights, dims, &factors)?;
        if t > 1 {
            trace.push(ll); // log-likelihood of the tensor from M-step t-1
            let dtau = tau
                .iter()
                .zip(&prev_tau)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let dll = (ll - prev_ll).abs() / ll.abs().max(1.0);
            if dtau < config.tol || dll < config.loglik_tol {
                converged = true;
                iterations = t - 1;
                break;
            }
        }
        prev_tau = tau.clone();
        prev_ll = ll;
        let tau_bar = TauBar::new(dims.to_vec(), tau)?;
        match mstep::solve(&tau_bar, config.mstep_tol, config.mstep_max_outer) {
            Ok(solved) => weights = solved.weights().to_vec(),
            Err(MStepError::NonConvergence { residual, .. }) if t > 1 => {
                // Boundary maximizers make the fixed point contract at a rate
                // close to 1; hand back everything learned so far instead of
                // discarding a long run.
                let partial = FitResult {
                    params: ParamTensor::new(dims.to_vec(), weights)?,
                    loglik_trace: trace,
                    iterations: t - 1,
                    converged: false,
                };
                return Err(EmError::MStepStalled {
                    iterations: t,
                    residual,
                    partial: Box::new(partial),
                });
            }
            Err(e) => return Err(e.into()),
        }
        iterations = t;
    }
    if !converged {
        let (_, ll) = estep_core(&weights, dims, &factors)?;
        trace.push(ll);
    }
    let params = ParamTensor::new(dims.to_vec(), weights)?;
    Ok(FitResult {
        params,
        loglik_trace: trace,
        iterations,
        converged,
    })
}

/// Free parameter count of the constraint polytope:
/// `prod n_j - sum_j (n_j - 1) - 1` (equals `(m-1)(n-1)` in two dimensions).
pub fn aic_param_count(dims: &[usize]) -> usize {
    let size: usize = dims.iter().product();
    let constraints: usize = dims.iter().map(|&n| n - 1).sum();
    size - constraints - 1
}

/// Akaike information criterion at copula level.
pub fn aic(copula_loglik: f64, dims: &[usize]) -> f64 {
    -2.0 * copula_loglik + 2.0 * aic_param_count(dims) as f64
}

#[derive(Debug, Clone)]
pub struct SelectCell {
    pub dims: Vec<usize>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelectResult {
    pub best: Vec<usize>,
    pub cells: Vec<SelectCell>,
}

/// Fit every candidate in `grid` and pick the AIC argmin; ties break toward
/// fewer components, then lexicographically smaller dims.
pub fn select_aic(
    pseudo: &PseudoSample,
    grid: &[Vec<usize>],
    config: &FitConfig,
) -> Result<SelectResult, EmError> {
    if grid.is_empty() {
        return Err(EmError::EmptyGrid);
    }
    let cells: Vec<SelectCell> = grid
        .iter()
        .map(|dims| select_cell(pseudo, dims, config))
        .collect();
    pick_best(cells, grid.len())
}

/// Score one grid cell (the CLI fans these out to worker threads).
pub fn select_cell(pseudo: &PseudoSample, dims: &[usize], config: &FitConfig) -> SelectCell {
    match fit(pseudo, dims, config) {
        Ok(res) => {
            let ll = *res.loglik_trace.last().unwrap_or(&0.0);
            SelectCell {
                dims: dims.to_vec(),
                loglik: Some(ll),
                aic: Some(aic(ll, dims)),
                converged: res.converged,
                error: None,
            }
        }
        Err(e) => SelectCell {
            dims: dims.to_vec(),
            loglik: None,
            aic: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

/// Argmin-AIC over scored cells.  AIC values within numerical noise of each
/// other count as ties, broken toward fewer components, then lexicographic.
pub fn pick_best(cells: Vec<SelectCell>, grid_len: usize) -> Result<SelectResult, EmError> {
    const AIC_TIE_EPS: f64 = 1e-9;
    let mut best: Option<&SelectCell> = None;
    for cell in cells.iter().filter(|c| c.aic.is_some()) {
        let Some(cur) = best else {
            best = Some(cell);
            continue;
        };
        let (ca, ba) = (cell.aic.unwrap(), cur.aic.unwrap());
        let eps = AIC_TIE_EPS * ba.abs().max(1.0);
        if ca < ba - eps {
            best = Some(cell);
        } else if (ca - ba).abs() <= eps {
            let pc: usize = cell.dims.iter().product();
            let pb: usize = cur.dims.iter().product();
            if pc < pb || (pc == pb && cell.dims < cur.dims) {
                best = Some(cell);
            }
        }
    }
    let best = best
        .map(|c| c.dims.clone())
        .ok_or(EmError::AllCellsFailed(grid_len))?;
    Ok(SelectResult { best, cells })
}

// ---------------------------------------------------------------------------
// parameterized H± family
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HpmConfig {
    /// Upper bound of the order search.
    pub n_max: u32,
    /// Convergence tolerance on q (n must be exactly unchanged).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HpmConfig {
    fn default() -> Self {
        HpmConfig {
            n_max: 64,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpmFit {
    pub sign: Sign,
    pub q: f64,
    pub n: u32,
    pub loglik_trace: Vec<f64>,
    /// Approximate variance of q (continuous axes, n >= 2 only).
    pub var_q: Option<f64>,
    /// True when the fit degenerates to independence (n = 1, q unidentified).
    pub degenerate: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl HpmFit {
    /// Rank correlation implied by the fitted model, `±q (n-1)/(n+1)`.
    pub fn model_rank_correlation(&self) -> f64 {
        let s = match self.sign {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        s * self.q * (self.n as f64 - 1.0) / (self.n as f64 + 1.0)
    }
}

/// Density ratio of the `C_n^±` component against independence for each
/// observation and each candidate order: `rho[n-1][i]`.  Continuous axes
/// contribute copula-density basis factors, discrete axes the mass ratio
/// `f_{k:n}(x)/f(x)`, so the ratio stays marginal-free in every case.
struct HpmProblem {
    rho: Vec<Vec<f64>>,
    obs_weights: Vec<f64>,
}

fn hpm_problem(pseudo: &PseudoSample, sign: Sign, n_max: u32) -> Result<HpmProblem, EmError> {
    if pseudo.dim() != 2 {
        return Err(EmError::BadDims(vec![pseudo.dim()]));
    }
    let n_obs = pseudo.n_obs();
    let nm = n_max as usize;
    // per-axis level factors for every candidate order: phi[i][n-1][k]
    let axis_factors = |j: usize| -> Result<Vec<Vec<Vec<f64>>>, EmError> {
        let mut out = Vec::with_capacity(n_obs);
        for i in 0..n_obs {
            let per_n: Vec<Vec<f64>> = match pseudo.kinds[j] {
                AxisKind::Continuous => {
                    let rows = bernstein::basis_rows(nm - 1, pseudo.right[j][i]);
                    (1..=nm)
                        .map(|n| rows[n - 1].iter().map(|&b| n as f64 * b).collect())
                        .collect()
                }
                AxisKind::Discrete => {
                    let mass = pseudo.right[j][i] - pseudo.left[j][i];
                    if mass <= 0.0 {
                        return Err(EmError::DegenerateDensity { obs: i });
                    }
                    let hi = bernstein::cum_rows(nm - 1, pseudo.right[j][i]);
                    let lo = bernstein::cum_rows(nm - 1, pseudo.left[j][i]);
                    (1..=nm)
                        .map(|n| {
                            (0..n)
                                .map(|k| {
                                    n as f64 * (hi[n - 1][k] - lo[n - 1][k]).max(0.0) / mass
                                })
                                .collect()
                        })
                        .collect()
                }
            };
            out.push(per_n);
        }
        Ok(out)
    };
    let fx = axis_factors(0)?;
    let fy = axis_factors(1)?;
    let mut rho = vec![vec![0.0; n_obs]; nm];
    for i in 0..n_obs {
        for n in 1..=nm {
            let mut acc = 0.0;
            for k in 0..n {
                let l = match sign {
                    Sign::Plus => k,
                    Sign::Minus => n - 1 - k,
                };
                acc += fx[i][n - 1][k] * fy[i][n - 1][l];
            }
            rho[n - 1][i] = acc / n as f64;
        }
    }
    Ok(HpmProblem {
        rho,
        obs_weights: vec![1.0; n_obs],
    })
}

impl HpmProblem {
    fn total_weight(&self) -> f64 {
        self.obs_weights.iter().sum()
    }

    fn loglik(&self, q: f64, n: u32) -> f64 {
        let r = &self.rho[n as usize - 1];
        self.obs_weights
            .iter()
            .zip(r)
            .map(|(&w, &c)| w * ((1.0 - q) + q * c).ln())
            .sum()
    }

    /// Mixture responsibilities of the independence component.
    fn responsibilities(&self, q: f64, n: u32) -> Vec<f64> {
        self.rho[n as usize - 1]
            .iter()
            .map(|&c| (1.0 - q) / ((1.0 - q) + q * c))
            .collect()
    }

    fn update_q(&self, tau: &[f64]) -> f64 {
        let wsum: f64 = self
            .obs_weights
            .iter()
            .zip(tau)
            .map(|(&w, &t)| w * t)
            .sum();
        1.0 - wsum / self.total_weight()
    }

    /// `argmax_n sum_i w_i (1 - tau_i) log rho_n(i)` over the allowed orders.
    fn update_n(&self, tau: &[f64], n_min: u32, n_max: u32) -> u32 {
        let mut best_n = n_min;
        let mut best_val = f64::NEG_INFINITY;
        for n in n_min..=n_max {
            let r = &self.rho[n as usize - 1];
            let mut val = 0.0;
            for ((&w, &t), &c) in self.obs_weights.iter().zip(tau).zip(r) {
                val += w * (1.0 - t) * c.ln();
            }
            if val > best_val {
                best_val = val;
                best_n = n;
            }
        }
        best_n
    }
}

/// EM for the H± family: alternate the independence/component responsibility
/// with the `(q, n)` update until the pair settles.
///
/// With `n_max >= 2` the order search starts at 2: at n = 1 the component is
/// itself independence, the objective term is identically zero, and q cannot
/// move, so keeping 1 in the search would freeze the fit at its starting
/// point whenever the data look independent.  `n_max = 1` forces the
/// degenerate model and is flagged as such.
pub fn fit_hpm(pseudo: &PseudoSample, sign: Sign, config: &HpmConfig) -> Result<HpmFit, EmError> {
    if config.n_max < 1 {
        return Err(EmError::BadDims(vec![0]));
    }
    let problem = hpm_problem(pseudo, sign, config.n_max)?;
    let mut q = 0.5;
    let mut n = 1u32;
    let n_min = if config.n_max >= 2 { 2 } else { 1 };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=config.max_iter {
        let tau = problem.responsibilities(q, n);
        let q_new = problem.update_q(&tau);
        let n_new = problem.update_n(&tau, n_min, config.n_max);
        trace.push(problem.loglik(q_new, n_new));
        let settled = n_new == n && (q_new - q).abs() < config.tol;
        q = q_new;
        n = n_new;
        iterations = t;
        if settled {
            converged = true;
            break;
        }
    }
    let degenerate = n == 1;
    let var_q = if !degenerate && pseudo.kinds.iter().all(|&k| k == AxisKind::Continuous) {
        inference::var_qhat(sign, q, n, pseudo).ok()
    } else {
        None
    };
    Ok(HpmFit {
        sign,
        q,
        n,
        loglik_trace: trace,
        var_q,
        degenerate,
        iterations,
        converged,
    })
}

/// MLE of q with the order fixed, plus the profile log-likelihood at the
/// optimum.  Runs the H± EM with the n-update suppressed.
pub fn profile_loglik_hpm(
    pseudo: &PseudoSample,
    sign: Sign,
    n: u32,
    config: &HpmConfig,
) -> Result<(f64, f64), EmError> {
    if n < 1 {
        return Err(EmError::BadDims(vec![0]));
    }
    let problem = hpm_problem(pseudo, sign, n)?;
    let mut q = 0.5;
    for _ in 0..config.max_iter {
        let tau = problem.responsibilities(q, n);
        let q_new = problem.update_q(&tau);
        let done = (q_new - q).abs() < config.tol;
        q = q_new;
        if done {
            break;
        }
    }
    Ok((q, problem.loglik(q, n)))
}
