//! Asymptotic-variance machinery for the fitted weights.
//!
//! The sandwich estimator `Sigma = B+ S B+` scales the asymptotic covariance
//! of the weight MLE under estimated marginals: `B` is the sample covariance
//! of the score-like pseudo-observation vectors `u_i` (the observed Fisher
//! information when the marginals are known) and `S` that of the corrected
//! vectors `v_i`, whose rank-set sums account for the plugged-in empirical
//! CDFs.  Because the estimator is semiparametric, `Sigma` exceeds the
//! known-margins information bound; nothing here computes the efficient
//! bound.
//!
//! Rank-set sums run over `{j : x_i <= x_j}` with ties included literally;
//! heavily tied data inherit that convention.  `B` is singular by
//! construction (the axis-sum constraints remove `m+n-1` directions), hence
//! the spectral pseudo-inverse.

use crate::bernstein;
use crate::copula::{hpm_params, CopulaError, ParamTensor, Sign};
use crate::em::{AxisKind, EmError, PseudoSample};
use crate::marginals::{MarginalError, MarginalModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("observation {obs} has zero copula density")]
    DegenerateDensity { obs: usize },
    #[error("operation requires bivariate continuous pseudo-observations")]
    NotBivariateContinuous,
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Bernstein(#[from] bernstein::BernsteinError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Em(#[from] EmError),
}

/// Sandwich covariance of the weight vector, lexicographic `(k,l)` order —
/// the same row-major flattening the tensor serializes with.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub dims: [usize; 2],
    pub n_obs: usize,
    /// `Sigma = B+ S B+`, row-major `mn x mn`.
    pub sigma: Vec<f64>,
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    /// Rank retained when pseudo-inverting `B`.
    pub rank: usize,
}

/// Serialized schema: `{dims, order: "lexicographic", sigma}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceExport {
    pub dims: Vec<usize>,
    pub order: String,
    pub sigma: Vec<f64>,
}

impl CovarianceEstimate {
    pub fn size(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn sigma_at(&self, row: usize, col: usize) -> f64 {
        self.sigma[row * self.size() + col]
    }

    pub fn export(&self) -> CovarianceExport {
        CovarianceExport {
            dims: self.dims.to_vec(),
            order: "lexicographic".to_string(),
            sigma: self.sigma.clone(),
        }
    }
}

fn require_bivariate_continuous(pseudo: &PseudoSample) -> Result<(), InferenceError> {
    if pseudo.dim() != 2 || pseudo.kinds().iter().any(|&k| k != AxisKind::Continuous) {
        return Err(InferenceError::NotBivariateContinuous);
    }
    Ok(())
}

/// The score pseudo-observations `u_i` and their rank-corrected versions
/// `v_i`, one `mn`-vector per observation (rows of the returned matrices).
pub fn pseudo_obs(
    params: &ParamTensor,
    pseudo: &PseudoSample,
) -> Result<(DMatrix<f64>, DMatrix<f64>), InferenceError> {
    require_bivariate_continuous(pseudo)?;
    if params.ndim() != 2 {
        return Err(InferenceError::Mismatch(format!(
            "tensor has {} axes",
            params.ndim()
        )));
    }
    let (m, n) = (params.dims()[0], params.dims()[1]);
    let mn = m * n;
    let n_obs = pseudo.n_obs();
    let scale = mn as f64;
    let xs = &pseudo.right()[0];
    let ys = &pseudo.right()[1];

    let mut u = DMatrix::zeros(n_obs, mn);
    // per-observation summand vectors of the two correction sums
    let mut wx = DMatrix::zeros(n_obs, mn);
    let mut wy = DMatrix::zeros(n_obs, mn);
    for i in 0..n_obs {
        let dens = params.copula_density(&[xs[i], ys[i]])?;
        if !(dens > 0.0) {
            return Err(InferenceError::DegenerateDensity { obs: i });
        }
        let cu = params.copula_density_partial(&[xs[i], ys[i]], 0)?;
        let cv = params.copula_density_partial(&[xs[i], ys[i]], 1)?;
        let bu = bernstein::basis_all(m as u32 - 1, xs[i])?;
        let bv = bernstein::basis_all(n as u32 - 1, ys[i])?;
        for k in 0..m {
            for l in 0..n {
                let base = scale * bu[k] * bv[l] / dens;
                u[(i, k * n + l)] = base;
                wx[(i, k * n + l)] = base * cu / dens;
                wy[(i, k * n + l)] = base * cv / dens;
            }
        }
    }

    let cx = suffix_rank_sums(xs, &wx);
    let cy = suffix_rank_sums(ys, &wy);
    let mut v = u.clone();
    let inv_n = 1.0 / n_obs as f64;
    for i in 0..n_obs {
        for c in 0..mn {
            v[(i, c)] -= inv_n * (cx[(i, c)] + cy[(i, c)]);
        }
    }
    Ok((u, v))
}

/// For each i, `sum_{j : key_i <= key_j} w_j`, via one sort and suffix sums.
fn suffix_rank_sums(keys: &[f64], w: &DMatrix<f64>) -> DMatrix<f64> {
    let n_obs = keys.len();
    let cols = w.ncols();
    let mut order: Vec<usize> = (0..n_obs).collect();
    order.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap());
    let sorted_keys: Vec<f64> = order.iter().map(|&i| keys[i]).collect();
    // suffix[p] = sum over positions >= p of w[order[p']]
    let mut suffix = DMatrix::zeros(n_obs + 1, cols);
    for p in (0..n_obs).rev() {
        for c in 0..cols {
            suffix[(p, c)] = suffix[(p + 1, c)] + w[(order[p], c)];
        }
    }
    let mut out = DMatrix::zeros(n_obs, cols);
    for i in 0..n_obs {
        let pos = sorted_keys.partition_point(|&v| v < keys[i]);
        for c in 0..cols {
            out[(i, c)] = suffix[(pos, c)];
        }
    }
    out
}

/// Orthogonal projection of a lexicographic `m x n` weight-space vector onto
/// the tangent space of the constraint polytope (all axis-level sums zero):
/// double-centering, `x - rowmean - colmean + grandmean`.
fn project_tangent_rows(rows: &mut DMatrix<f64>, m: usize, n: usize) {
    let cols = rows.ncols();
    debug_assert_eq!(cols, m * n);
    for i in 0..rows.nrows() {
        let mut row_mean = vec![0.0; m];
        let mut col_mean = vec![0.0; n];
        let mut grand = 0.0;
        for k in 0..m {
            for l in 0..n {
                let v = rows[(i, k * n + l)];
                row_mean[k] += v / n as f64;
                col_mean[l] += v / m as f64;
                grand += v / (m * n) as f64;
            }
        }
        for k in 0..m {
            for l in 0..n {
                rows[(i, k * n + l)] += grand - row_mean[k] - col_mean[l];
            }
        }
    }
}

/// Column-centered sample covariance with divisor N-1.
fn sample_covariance(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rows.nrows();
    let cols = rows.ncols();
    let mut centered = rows.clone();
    for c in 0..cols {
        let mean = rows.column(c).sum() / n as f64;
        for r in 0..n {
            centered[(r, c)] -= mean;
        }
    }
    centered.transpose() * centered / (n as f64 - 1.0)
}

/// Spectral Moore-Penrose pseudo-inverse of a symmetric matrix: eigenvalues
/// below `rel_tol * max|lambda|` are treated as zero.
pub fn pinv_sym(matrix: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_abs = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let cut = rel_tol * max_abs;
    let mut inv_vals = eig.eigenvalues.clone();
    for l in inv_vals.iter_mut() {
        *l = if l.abs() > cut { 1.0 / *l } else { 0.0 };
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

const PINV_REL_TOL: f64 = 1e-10;

/// Sandwich covariance `Sigma = B+ S B+` of the fitted weight vector.
///
/// The fitted weights can only move within the constraint polytope, so the
/// pseudo-observations are first projected onto its tangent space; `B` then
/// has the polytope's free dimension `(m-1)(n-1)` as its rank and its
/// pseudo-inverse acts purely on directions the estimator can actually vary
/// in.  Without the projection the sandwich picks up spurious mass along the
/// constraint normals and stops matching the Monte Carlo covariance of the
/// fitted weights.
pub fn covariance_r(
    params: &ParamTensor,
    pseudo: &PseudoSample,
) -> Result<CovarianceEstimate, InferenceError> {
    let (mut u, mut v) = pseudo_obs(params, pseudo)?;
    let (m, n) = (params.dims()[0], params.dims()[1]);
    project_tangent_rows(&mut u, m, n);
    project_tangent_rows(&mut v, m, n);
    let b = sample_covariance(&u);
    let s = sample_covariance(&v);
    let b_pinv = pinv_sym(&b, PINV_REL_TOL);
    let sigma = &b_pinv * &s * &b_pinv;
    // retained rank of B
    let eig = b.clone().symmetric_eigen();
    let max_abs = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|l| l.abs() > PINV_REL_TOL * max_abs && max_abs > 0.0)
        .count();
    Ok(CovarianceEstimate {
        dims: [params.dims()[0], params.dims()[1]],
        n_obs: pseudo.n_obs(),
        sigma: sigma.transpose().as_slice().to_vec(), // row-major
        // the tangent-projected covariances actually pseudo-inverted
        b: b.transpose().as_slice().to_vec(),
        s: s.transpose().as_slice().to_vec(),
        rank,
    })
}

/// Approximate variance of the H± mixing weight, `s / (N beta^2)`, from the
/// scalar pseudo-observations of the profile score at `(q, n)`.
pub fn var_qhat(
    sign: Sign,
    q: f64,
    n: u32,
    pseudo: &PseudoSample,
) -> Result<f64, InferenceError> {
    require_bivariate_continuous(pseudo)?;
    if n < 1 {
        return Err(InferenceError::DegenerateModel("order n = 0".into()));
    }
    let component = hpm_params(sign, 1.0, n)?;
    let n_obs = pseudo.n_obs();
    let xs = &pseudo.right()[0];
    let ys = &pseudo.right()[1];
    let mut u = DMatrix::zeros(n_obs, 1);
    let mut wx = DMatrix::zeros(n_obs, 1);
    let mut wy = DMatrix::zeros(n_obs, 1);
    for i in 0..n_obs {
        let c = component.copula_density(&[xs[i], ys[i]])?;
        let denom = 1.0 - q + q * c;
        if !(denom > 0.0) {
            return Err(InferenceError::DegenerateDensity { obs: i });
        }
        let cu = component.copula_density_partial(&[xs[i], ys[i]], 0)?;
        let cv = component.copula_density_partial(&[xs[i], ys[i]], 1)?;
        u[(i, 0)] = (c - 1.0) / denom;
        wx[(i, 0)] = (c - 1.0) * cu / (denom * denom);
        wy[(i, 0)] = (c - 1.0) * cv / (denom * denom);
    }
    let cx = suffix_rank_sums(xs, &wx);
    let cy = suffix_rank_sums(ys, &wy);
    let mut v = u.clone();
    for i in 0..n_obs {
        v[(i, 0)] -= q / n_obs as f64 * (cx[(i, 0)] + cy[(i, 0)]);
    }
    let beta = sample_covariance(&u)[(0, 0)];
    let s = sample_covariance(&v)[(0, 0)];
    if beta <= 1e-300 {
        return Err(InferenceError::DegenerateModel(
            "pseudo-observations are constant (n = 1 component is independence)".into(),
        ));
    }
    Ok(s / (n_obs as f64 * beta * beta))
}

/// Pointwise asymptotic variance of the fitted joint density at `x`:
/// `(1/N) g' Sigma g` with `g_(k,l) = f_{k:m}(x_0) g_{l:n}(x_1)`.
pub fn var_density_at(
    params: &ParamTensor,
    cov: &CovarianceEstimate,
    x: [f64; 2],
    marginals: &[MarginalModel],
) -> Result<f64, InferenceError> {
    if params.ndim() != 2 || marginals.len() != 2 {
        return Err(InferenceError::Mismatch(
            "bivariate model and two marginals required".into(),
        ));
    }
    if [params.dims()[0], params.dims()[1]] != cov.dims {
        return Err(InferenceError::Mismatch(
            "covariance dims do not match tensor dims".into(),
        ));
    }
    let g = order_stat_density_vector(params.dims(), x, marginals)?;
    let size = cov.size();
    let mut quad = 0.0;
    for r in 0..size {
        let mut row = 0.0;
        for c in 0..size {
            row += cov.sigma[r * size + c] * g[c];
        }
        quad += g[r] * row;
    }
    Ok(quad.max(0.0) / cov.n_obs as f64)
}

/// `g_(k,l) = m b_{k-1,m-1}(F(x)) f(x) * n b_{l-1,n-1}(G(y)) g(y)`.
fn order_stat_density_vector(
    dims: &[usize],
    x: [f64; 2],
    marginals: &[MarginalModel],
) -> Result<Vec<f64>, InferenceError> {
    let (m, n) = (dims[0], dims[1]);
    let fu = marginals[0].cdf(x[0]);
    let gv = marginals[1].cdf(x[1]);
    let fx = marginals[0].pdf(x[0])?;
    let gy = marginals[1].pdf(x[1])?;
    let bu = bernstein::basis_all(m as u32 - 1, fu)?;
    let bv = bernstein::basis_all(n as u32 - 1, gv)?;
    let mut g = vec![0.0; m * n];
    for k in 0..m {
        for l in 0..n {
            g[k * n + l] = (m as f64 * bu[k] * fx) * (n as f64 * bv[l] * gy);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::fit_continuous;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn columns_of(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect()
    }

    #[test]
    fn pinv_basics() {
        let id = DMatrix::<f64>::identity(3, 3);
        let p = pinv_sym(&id, 1e-10);
        assert!((p - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
        let p = pinv_sym(&d, 1e-10);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
        assert!(p[(1, 1)].abs() < 1e-14);
    }

    #[test]
    fn pinv_penrose_conditions() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..10 {
            let k = rng.random_range(2usize..6);
            let g = DMatrix::from_fn(k, k + 1, |_, _| rng.random_range(-1.0f64..1.0));
            let a = &g * g.transpose(); // random symmetric PSD
            let x = pinv_sym(&a, 1e-10);
            let axa = &a * &x * &a;
            let xax = &x * &a * &x;
            assert!((&axa - &a).abs().max() < 1e-9);
            assert!((&xax - &x).abs().max() < 1e-9);
            let ax = &a * &x;
            let xa = &x * &a;
            assert!((&ax - ax.transpose()).abs().max() < 1e-9);
            assert!((&xa - xa.transpose()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn pseudo_obs_uniform_params() {
        // c = 1, c_u = c_v = 0: u = mn b b and v = u
        let params = ParamTensor::uniform(vec![2, 3]).unwrap();
        let pseudo =
            PseudoSample::from_uniform(&[vec![0.2, 0.5, 0.9], vec![0.6, 0.1, 0.4]]).unwrap();
        let (u, v) = pseudo_obs(&params, &pseudo).unwrap();
        assert!((&u - &v).abs().max() < 1e-14);
        let bu = bernstein::basis_all(1, 0.2).unwrap();
        let bv = bernstein::basis_all(2, 0.6).unwrap();
        for k in 0..2 {
            for l in 0..3 {
                assert!((u[(0, k * 3 + l)] - 6.0 * bu[k] * bv[l]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pseudo_obs_single_component() {
        let params = ParamTensor::uniform(vec![1, 1]).unwrap();
        let pseudo = PseudoSample::from_uniform(&[vec![0.3, 0.7], vec![0.2, 0.9]]).unwrap();
        let (u, v) = pseudo_obs(&params, &pseudo).unwrap();
        for i in 0..2 {
            assert!((u[(i, 0)] - 1.0).abs() < 1e-14);
            assert!((v[(i, 0)] - 1.0).abs() < 1e-14);
        }
        let cov = covariance_r(&params, &pseudo).unwrap();
        assert!(cov.sigma.iter().all(|&x| x.abs() < 1e-20));
    }

    #[test]
    fn corrections_match_naive_double_loop() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let params = ParamTensor::random_feasible(vec![2, 2], &mut rng).unwrap();
        let rows = params.sample_copula(60, 4);
        let cols = columns_of(&rows);
        let pseudo = PseudoSample::from_continuous(&cols).unwrap();
        let (u, v) = pseudo_obs(&params, &pseudo).unwrap();

        let xs = &pseudo.right()[0];
        let ys = &pseudo.right()[1];
        let n_obs = xs.len();
        let mn = 4;
        for i in 0..n_obs {
            for c in 0..mn {
                let (k, l) = (c / 2, c % 2);
                let mut corr = 0.0;
                for j in 0..n_obs {
                    let dens = params.copula_density(&[xs[j], ys[j]]).unwrap();
                    let bu = bernstein::basis_all(1, xs[j]).unwrap();
                    let bv = bernstein::basis_all(1, ys[j]).unwrap();
                    let base = 4.0 * bu[k] * bv[l] / (dens * dens);
                    if xs[i] <= xs[j] {
                        corr +=
                            base * params.copula_density_partial(&[xs[j], ys[j]], 0).unwrap();
                    }
                    if ys[i] <= ys[j] {
                        corr +=
                            base * params.copula_density_partial(&[xs[j], ys[j]], 1).unwrap();
                    }
                }
                let expected = u[(i, c)] - corr / n_obs as f64;
                assert!(
                    (v[(i, c)] - expected).abs() < 1e-12,
                    "obs {i} comp {c}: {} vs {expected}",
                    v[(i, c)]
                );
            }
        }
    }

    #[test]
    fn sigma_symmetric_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let params = ParamTensor::random_feasible(vec![2, 3], &mut rng).unwrap();
        let rows = params.sample_copula(400, 12);
        let cols = columns_of(&rows);
        let pseudo = PseudoSample::from_continuous(&cols).unwrap();
        let cov = covariance_r(&params, &pseudo).unwrap();
        let size = cov.size();
        let sig = DMatrix::from_row_slice(size, size, &cov.sigma);
        assert!((&sig - sig.transpose()).abs().max() < 1e-10);
        let eig = sig.symmetric_eigen();
        for &l in eig.eigenvalues.iter() {
            assert!(l > -1e-8, "eigenvalue {l}");
        }
        // projected B is supported on the polytope tangent space only
        assert_eq!(cov.rank, (2 - 1) * (3 - 1));
        let b = DMatrix::from_row_slice(size, size, &cov.b);
        // a constraint-normal direction (constant over one row of the tensor)
        let mut normal = nalgebra::DVector::zeros(size);
        for l in 0..3 {
            normal[l] = 1.0;
        }
        assert!((b * normal).abs().max() < 1e-10);
    }

    #[test]
    fn var_density_quadratic_form_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let params = ParamTensor::random_feasible(vec![2, 2], &mut rng).unwrap();
        let rows = params.sample_copula(200, 3);
        let cols = columns_of(&rows);
        let pseudo = PseudoSample::from_continuous(&cols).unwrap();
        let cov = covariance_r(&params, &pseudo).unwrap();
        let marginals = vec![
            fit_continuous(&cols[0], None).unwrap(),
            fit_continuous(&cols[1], None).unwrap(),
        ];
        let x = [0.4, 0.6];
        let got = var_density_at(&params, &cov, x, &marginals).unwrap();
        // naive quadruple loop
        let g = order_stat_density_vector(params.dims(), x, &marginals).unwrap();
        let mut quad = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                for kp in 0..2 {
                    for lp in 0..2 {
                        quad +=
                            g[k * 2 + l] * g[kp * 2 + lp] * cov.sigma_at(k * 2 + l, kp * 2 + lp);
                    }
                }
            }
        }
        let expected = quad.max(0.0) / cov.n_obs as f64;
        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        assert!(got >= 0.0);

        // zero covariance matrix gives zero variance
        let zero = CovarianceEstimate {
            dims: [2, 2],
            n_obs: 200,
            sigma: vec![0.0; 16],
            b: vec![0.0; 16],
            s: vec![0.0; 16],
            rank: 0,
        };
        assert_eq!(var_density_at(&params, &zero, x, &marginals).unwrap(), 0.0);
    }

    #[test]
    fn var_qhat_degenerate_at_order_one() {
        let pseudo =
            PseudoSample::from_uniform(&[vec![0.2, 0.8, 0.4], vec![0.3, 0.6, 0.9]]).unwrap();
        match var_qhat(Sign::Plus, 0.5, 1, &pseudo) {
            Err(InferenceError::DegenerateModel(_)) => {}
            other => panic!("expected DegenerateModel, got {other:?}"),
        }
    }

    #[test]
    fn var_qhat_scales_inversely_with_sample_size() {
        use crate::em::scaled_ranks;
        let truth = hpm_params(Sign::Plus, 0.9, 8).unwrap();
        let rows = truth.sample_copula(6000, 71);
        let take = |n: usize| -> PseudoSample {
            let x: Vec<f64> = rows[..n].iter().map(|r| r[0]).collect();
            let y: Vec<f64> = rows[..n].iter().map(|r| r[1]).collect();
            PseudoSample::from_uniform(&[scaled_ranks(&x), scaled_ranks(&y)]).unwrap()
        };
        let v_half = var_qhat(Sign::Plus, 0.9, 8, &take(3000)).unwrap();
        let v_full = var_qhat(Sign::Plus, 0.9, 8, &take(6000)).unwrap();
        assert!(v_half > 0.0 && v_half < 0.01);
        let ratio = v_half / v_full;
        assert!((1.4..=2.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn independence_makes_corrections_vanish_in_sigma() {
        // with uniform params, v = u so S = B and Sigma = B+ B B+ = B+
        let params = ParamTensor::uniform(vec![2, 2]).unwrap();
        let rows = params.sample_copula(300, 8);
        let cols = columns_of(&rows);
        let pseudo = PseudoSample::from_uniform(&cols).unwrap();
        let cov = covariance_r(&params, &pseudo).unwrap();
        let size = cov.size();
        let b = DMatrix::from_row_slice(size, size, &cov.b);
        let bp = pinv_sym(&b, 1e-10);
        let sig = DMatrix::from_row_slice(size, size, &cov.sigma);
        assert!((&sig - &bp).abs().max() < 1e-9);
    }
}
