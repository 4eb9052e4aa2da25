//! Bernstein basis polynomials and their calculus.
//!
//! The basis polynomial of index `k` and degree `n` is
//! `b_{k,n}(u) = C(n,k) u^k (1-u)^{n-k}` on `[0,1]`; its cumulative integral
//! `B_{k,n}(u) = ∫_0^u b_{k,n}(t) dt` equals the regularized incomplete beta
//! function `I_u(k+1, n-k+1) / (n+1)`.  Everything here is overflow-safe:
//! binomial coefficients are computed exactly below degree 30 and in log-gamma
//! space above, and the incomplete beta uses the standard continued-fraction
//! expansion with a symmetry switch.

use thiserror::Error;

/// Slack allowed outside `[0,1]` before an argument is rejected; values
/// within it are clamped.  Absorbs floating-point noise from ECDF scaling.
const UNIT_SLACK: f64 = 1e-12;

/// Degree above which binomial coefficients switch to log-gamma evaluation.
const DIRECT_BINOMIAL_MAX: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BernsteinError {
    #[error("index k={k} exceeds degree n={n}")]
    IndexOrder { k: u32, n: u32 },
    #[error("argument u={u} outside [0,1]")]
    OutOfUnitInterval { u: f64 },
}

fn check_index(k: u32, n: u32) -> Result<(), BernsteinError> {
    if k > n {
        Err(BernsteinError::IndexOrder { k, n })
    } else {
        Ok(())
    }
}

fn clamp_unit(u: f64) -> Result<f64, BernsteinError> {
    if u.is_nan() {
        return Err(BernsteinError::OutOfUnitInterval { u });
    }
    if u < 0.0 {
        if u >= -UNIT_SLACK {
            return Ok(0.0);
        }
        return Err(BernsteinError::OutOfUnitInterval { u });
    }
    if u > 1.0 {
        if u <= 1.0 + UNIT_SLACK {
            return Ok(1.0);
        }
        return Err(BernsteinError::OutOfUnitInterval { u });
    }
    Ok(u)
}

/// Natural log of the gamma function, Lanczos approximation (g = 7, n = 9).
/// Arguments here are positive integers plus one, so no reflection is needed.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Exact binomial coefficient for n <= 30 (fits in u64 comfortably).
fn binomial_exact(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let k = k.min(n - k);
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k as u128 {
        num *= (n as u128) - i;
        den *= i + 1;
    }
    (num / den) as f64
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Bernstein basis polynomial `b_{k,n}(u) = C(n,k) u^k (1-u)^{n-k}`.
///
/// Exact 0/1 at the interval endpoints; log-gamma evaluation for n > 30.
pub fn basis(k: u32, n: u32, u: f64) -> Result<f64, BernsteinError> {
    check_index(k, n)?;
    let u = clamp_unit(u)?;
    if u == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if u == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    if n <= DIRECT_BINOMIAL_MAX {
        Ok(binomial_exact(n, k) * u.powi(k as i32) * (1.0 - u).powi((n - k) as i32))
    } else {
        let ln_val = ln_binomial(n, k) + k as f64 * u.ln() + (n - k) as f64 * (1.0 - u).ln();
        Ok(ln_val.exp())
    }
}

/// Derivative of the basis polynomial:
/// `d/du b_{k,n}(u) = n (b_{k-1,n-1}(u) - b_{k,n-1}(u))`,
/// with the conventions `b_{-1,n-1} = b_{n,n-1} = 0`.
pub fn basis_deriv(k: u32, n: u32, u: f64) -> Result<f64, BernsteinError> {
    check_index(k, n)?;
    let u = clamp_unit(u)?;
    if n == 0 {
        return Ok(0.0);
    }
    let lower = if k == 0 { 0.0 } else { basis(k - 1, n - 1, u)? };
    let upper = if k == n { 0.0 } else { basis(k, n - 1, u)? };
    Ok(n as f64 * (lower - upper))
}

/// Cumulative integral `B_{k,n}(u) = I_u(k+1, n-k+1) / (n+1)`.
pub fn cum(k: u32, n: u32, u: f64) -> Result<f64, BernsteinError> {
    check_index(k, n)?;
    let u = clamp_unit(u)?;
    Ok(beta_reg((k + 1) as f64, (n - k + 1) as f64, u) / (n as f64 + 1.0))
}

/// Total mass of the cumulative basis, `∫_0^1 B_{k,n}(u) du = (n+1-k)/((n+1)(n+2))`.
pub fn cum_total(k: u32, n: u32) -> Result<f64, BernsteinError> {
    check_index(k, n)?;
    let n = n as f64;
    let k = k as f64;
    Ok((n + 1.0 - k) / ((n + 1.0) * (n + 2.0)))
}

/// All basis values `b_{0,n}(u), ..., b_{n,n}(u)` by the de Casteljau-style
/// convex-combination recurrence, which keeps every intermediate in `[0,1]`.
pub fn basis_all(n: u32, u: f64) -> Result<Vec<f64>, BernsteinError> {
    let u = clamp_unit(u)?;
    Ok(basis_all_clamped(n as usize, u))
}

pub(crate) fn basis_all_clamped(n: usize, u: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    let v = 1.0 - u;
    for d in 1..=n {
        row[d] = u * row[d - 1];
        for k in (1..d).rev() {
            row[k] = v * row[k] + u * row[k - 1];
        }
        row[0] *= v;
    }
    row
}

/// All cumulative values `B_{0,n}(u), ..., B_{n,n}(u)` at once, through the
/// identity `(n+1) B_{k,n}(u) = Σ_{j>k} b_{j,n+1}(u)`.
pub fn cum_all(n: u32, u: f64) -> Result<Vec<f64>, BernsteinError> {
    let u = clamp_unit(u)?;
    let upper = basis_all_clamped(n as usize + 1, u);
    Ok(cum_row_from_basis(&upper))
}

fn cum_row_from_basis(upper: &[f64]) -> Vec<f64> {
    let n = upper.len() - 2;
    let mut out = vec![0.0; n + 1];
    let mut suffix = 0.0;
    for k in (0..=n).rev() {
        suffix += upper[k + 1];
        out[k] = suffix / (n as f64 + 1.0);
    }
    out
}

/// Basis values of every degree `0..=max_degree` at `u` in one triangle pass;
/// `out[d][k] = b_{k,d}(u)`.
pub(crate) fn basis_rows(max_degree: usize, u: f64) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(max_degree + 1);
    rows.push(vec![1.0]);
    let v = 1.0 - u;
    for d in 1..=max_degree {
        let prev = &rows[d - 1];
        let mut row = vec![0.0; d + 1];
        row[0] = v * prev[0];
        for k in 1..d {
            row[k] = v * prev[k] + u * prev[k - 1];
        }
        row[d] = u * prev[d - 1];
        rows.push(row);
    }
    rows
}

/// Cumulative values of every degree `0..=max_degree` at `u`;
/// `out[d][k] = B_{k,d}(u)`.
pub(crate) fn cum_rows(max_degree: usize, u: f64) -> Vec<Vec<f64>> {
    let rows = basis_rows(max_degree + 1, u);
    (0..=max_degree)
        .map(|d| cum_row_from_basis(&rows[d + 1]))
        .collect()
}

/// Regularized incomplete beta `I_x(a,b)` for positive integer-valued `a`, `b`.
///
/// Continued-fraction expansion (modified Lentz), switching to the symmetric
/// form `1 - I_{1-x}(b,a)` when `x > a/(a+b)` so the fraction always converges
/// quickly.  Relative tolerance 1e-14.
fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // front = x^a (1-x)^b / (a B(a,b)), shared by both branches
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    if x <= a / (a + b) {
        let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp() / a;
        front * beta_cf(a, b, x)
    } else {
        let front = (b * (1.0 - x).ln() + a * x.ln() - ln_beta).exp() / b;
        1.0 - front * beta_cf(b, a, 1.0 - x)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-14;
    const MAX_ITER: usize = 300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
