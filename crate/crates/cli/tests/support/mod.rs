//! Shared helpers for the acceptance suite, including the independent
//! projected-gradient maximizer used to cross-check the M-step solver.

use baker_copula::copula::empirical_spearman;
use baker_copula::em::{self, EmError, FitConfig, FitResult, PseudoSample};
use baker_copula::mstep::TauBar;
use baker_copula_cli::gaussian::GaussianFit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::ContinuousCDF;

/// Fit, accepting the attached partial result when a boundary maximizer
/// stalls the M-step fixed point.
pub fn fit_or_partial(pseudo: &PseudoSample, dims: &[usize], cfg: &FitConfig) -> FitResult {
    match em::fit(pseudo, dims, cfg) {
        Ok(res) => res,
        Err(EmError::MStepStalled { partial, .. }) => *partial,
        Err(e) => panic!("fit failed: {e}"),
    }
}

pub fn columns_of(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect()
}

/// Maximize `sum tau log r` over the uniform-marginal polytope by projected
/// gradient ascent with backtracking; the projection onto the polytope
/// (affine sums intersected with the nonnegative orthant) runs Dykstra's
/// alternating scheme.  Entirely independent of the Lagrange fixed point.
pub fn pg_maximize(tau: &TauBar, m: usize, n: usize) -> Vec<f64> {
    let t = tau.values();
    let row_target = 1.0 / m as f64;
    let col_target = 1.0 / n as f64;
    let objective = |r: &[f64]| -> f64 {
        t.iter()
            .zip(r)
            .map(|(&tv, &rv)| if tv > 0.0 { tv * rv.ln() } else { 0.0 })
            .sum()
    };
    let mut r = vec![1.0 / (m * n) as f64; m * n];
    let mut step = 0.05;
    for _ in 0..50_000 {
        let f0 = objective(&r);
        let grad: Vec<f64> = t
            .iter()
            .zip(&r)
            .map(|(&tv, &rv)| tv / rv.max(1e-12))
            .collect();
        let mut eta = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = r
                .iter()
                .zip(&grad)
                .map(|(&rv, &gv)| rv + eta * gv)
                .collect();
            let cand = dykstra_project(&cand, m, n, row_target, col_target);
            if objective(&cand) > f0 {
                accepted = Some((cand, eta));
                break;
            }
            eta *= 0.5;
        }
        match accepted {
            Some((cand, eta_used)) => {
                let delta = cand
                    .iter()
                    .zip(&r)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                r = cand;
                step = (eta_used * 2.0).min(0.5);
                if delta < 1e-13 {
                    break;
                }
            }
            None => break, // no improving step exists at fp resolution
        }
    }
    r
}

/// Euclidean projection onto the affine set of exact row/column sums.
fn affine_project(x: &[f64], m: usize, n: usize, row_target: f64, col_target: f64) -> Vec<f64> {
    let mut row_excess = vec![0.0; m];
    let mut col_excess = vec![0.0; n];
    for k in 0..m {
        for l in 0..n {
            row_excess[k] += x[k * n + l];
            col_excess[l] += x[k * n + l];
        }
    }
    for e in row_excess.iter_mut() {
        *e = row_target - *e;
    }
    for e in col_excess.iter_mut() {
        *e = col_target - *e;
    }
    let total: f64 = row_excess.iter().sum();
    let mut y = x.to_vec();
    for k in 0..m {
        for l in 0..n {
            y[k * n + l] +=
                row_excess[k] / n as f64 + col_excess[l] / m as f64 - total / (m * n) as f64;
        }
    }
    y
}

fn dykstra_project(x0: &[f64], m: usize, n: usize, row_target: f64, col_target: f64) -> Vec<f64> {
    let size = m * n;
    let mut x = x0.to_vec();
    let mut p = vec![0.0; size];
    let mut q = vec![0.0; size];
    for _ in 0..400 {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = affine_project(&xp, m, n, row_target, col_target);
        for i in 0..size {
            p[i] = xp[i] - y[i];
        }
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let z: Vec<f64> = yq.iter().map(|&v| v.max(0.0)).collect();
        for i in 0..size {
            q[i] = yq[i] - z[i];
        }
        x = z;
        // feasibility check of the clipped point
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let s: f64 = (0..n).map(|l| x[k * n + l]).sum();
            worst = worst.max((s - row_target).abs());
        }
        for l in 0..n {
            let s: f64 = (0..m).map(|k| x[k * n + l]).sum();
            worst = worst.max((s - col_target).abs());
        }
        if worst < 1e-13 {
            break;
        }
    }
    x
}

/// Spearman correlation of the two non-stratified axes within the lowest and
/// highest strata of column `s` (empirical quantiles `lo_q` and `hi_q`).
pub fn stratified_spearman(rows: &[Vec<f64>], s: usize, lo_q: f64, hi_q: f64) -> (f64, f64) {
    let others: Vec<usize> = (0..rows[0].len()).filter(|&j| j != s).collect();
    let (a, b) = (others[0], others[1]);
    let mut z: Vec<f64> = rows.iter().map(|r| r[s]).collect();
    z.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let lo_cut = z[((z.len() as f64 - 1.0) * lo_q) as usize];
    let hi_cut = z[((z.len() as f64 - 1.0) * hi_q) as usize];
    let collect = |pred: &dyn Fn(f64) -> bool| -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in rows {
            if pred(r[s]) {
                xs.push(r[a]);
                ys.push(r[b]);
            }
        }
        (xs, ys)
    };
    let (lx, ly) = collect(&|v| v <= lo_cut);
    let (hx, hy) = collect(&|v| v > hi_cut);
    (empirical_spearman(&lx, &ly), empirical_spearman(&hx, &hy))
}

/// Draw copula-scale samples from a fitted Gaussian copula.
pub fn sample_gaussian_copula(fit: &GaussianFit, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = fit.dim;
    let corr = nalgebra::DMatrix::from_fn(d, d, |i, j| fit.correlation[i][j]);
    let chol = corr.cholesky().expect("correlation matrix not PD");
    let l = chol.l();
    let std_normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let eps = nalgebra::DVector::from_fn(d, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let z = &l * eps;
            (0..d).map(|j| std_normal.cdf(z[j])).collect()
        })
        .collect()
}
