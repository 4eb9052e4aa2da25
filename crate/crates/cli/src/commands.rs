//! The seven subcommands.

use crate::dataset::{self, Dataset};
use crate::gaussian::{self, ConditionalSlice};
use crate::model::{FitSummary, ModelFile, MODEL_VERSION};
use crate::workers;
use crate::CliError;
use baker_copula::bernstein;
use baker_copula::copula::{ParamTensor, Sign};
use baker_copula::em::{self, FitConfig, HpmConfig, PseudoSample};
use baker_copula::inference::{self, CovarianceEstimate, CovarianceExport};
use baker_copula::marginals::MarginalModel;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "baker-copula",
    about = "Bernstein copula estimation: EM fitting, model selection, sampling, density export",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the weight tensor to CSV data by EM
    Fit(FitArgs),
    /// AIC model selection over a grid of tensor sizes
    Select(SelectArgs),
    /// Fit the one-parameter H+/H- family
    FitHpm(FitHpmArgs),
    /// Draw samples from a fitted model file
    Sample(SampleArgs),
    /// Export a density grid for contour plotting
    Density(DensityArgs),
    /// Generate the trivariate varying-correlation benchmark dataset
    Simulate3d(Simulate3dArgs),
    /// Fit a Gaussian-copula baseline (normal-scores correlation)
    FitGaussian(FitGaussianArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Select(args) => cmd_select(&args),
        Command::FitHpm(args) => cmd_fit_hpm(&args),
        Command::Sample(args) => cmd_sample(&args),
        Command::Density(args) => cmd_density(&args),
        Command::Simulate3d(args) => cmd_simulate3d(&args),
        Command::FitGaussian(args) => cmd_fit_gaussian(&args),
    }
}

fn load_dataset(input: &Path, kinds: &Option<String>) -> Result<Dataset, CliError> {
    let kinds = match kinds {
        Some(spec) => dataset::parse_kinds(spec)?,
        None => Vec::new(),
    };
    dataset::read_csv(input, &kinds)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV (header required)
    pub input: PathBuf,
    /// Tensor size per column, e.g. "2,3"
    #[arg(long)]
    pub dims: String,
    /// Axis kinds, e.g. "c,c" or "c,d" (default: all continuous)
    #[arg(long)]
    pub kinds: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Output model JSON path
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the sandwich covariance of the weights (bivariate
    /// continuous models only)
    #[arg(long)]
    pub covariance: Option<PathBuf>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.input, &args.kinds)?;
    let dims = dataset::parse_dims(&args.dims)?;
    if dims.len() != data.dim() {
        return Err(CliError::Input(format!(
            "--dims has {} entries for {} columns",
            dims.len(),
            data.dim()
        )));
    }
    let marginals = data.fit_marginals()?;
    let pseudo =
        PseudoSample::from_marginals(&data.columns, &marginals).map_err(CliError::input)?;
    let config = FitConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        ..Default::default()
    };
    let result = match em::fit(&pseudo, &dims, &config) {
        Ok(res) => res,
        // a boundary maximizer can stall the M-step; the partial fit is
        // still written, and the exit code reports the non-convergence
        Err(em::EmError::MStepStalled { partial, .. }) => *partial,
        Err(e) => return Err(CliError::input(e)),
    };
    let loglik = *result.loglik_trace.last().unwrap_or(&0.0);
    let aic = em::aic(loglik, &dims);
    let file = ModelFile {
        version: MODEL_VERSION,
        dims: dims.clone(),
        weights: result.params.weights().to_vec(),
        marginals,
        fit: FitSummary {
            loglik_trace: result.loglik_trace.clone(),
            iterations: result.iterations,
            converged: result.converged,
            aic,
        },
    };
    file.save(&args.out)?;

    println!("fitted dims {dims:?} on {} rows", data.n_rows());
    println!(
        "iterations: {}  converged: {}  copula log-likelihood: {loglik:.6}  AIC: {aic:.6}",
        result.iterations, result.converged
    );
    if dims.len() == 2 {
        println!("weights (rows = {}, cols = {}):", dims[0], dims[1]);
        for k in 0..dims[0] {
            let row: Vec<String> = (0..dims[1])
                .map(|l| format!("{:.4}", result.params.weights()[k * dims[1] + l]))
                .collect();
            println!("  {}", row.join(" "));
        }
        if let Ok(rho) = result.params.spearman_rho() {
            println!("model Spearman rho: {rho:.4}");
        }
    }
    println!("model written to {}", args.out.display());

    if let Some(cov_path) = &args.covariance {
        if dims.len() != 2 {
            return Err(CliError::Dimensionality(
                "--covariance is defined for bivariate models".into(),
            ));
        }
        let cov = inference::covariance_r(&result.params, &pseudo).map_err(CliError::input)?;
        write_json(cov_path, &cov.export())?;
        println!("covariance written to {}", cov_path.display());
    }

    if !result.converged {
        return Err(CliError::NonConvergence(format!(
            "EM stopped after {} iterations",
            result.iterations
        )));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub input: PathBuf,
    /// Grid of candidate sizes, e.g. "1..10x1..10"
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub kinds: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Output AIC table CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (overrides BAKER_COPULA_THREADS)
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.input, &args.kinds)?;
    if data.dim() != 2 {
        return Err(CliError::Dimensionality(format!(
            "select emits an m x n table; data has {} columns",
            data.dim()
        )));
    }
    let grid = dataset::parse_grid(&args.grid)?;
    if grid.iter().any(|dims| dims.len() != 2) {
        return Err(CliError::Input("grid must have two axes".into()));
    }
    let marginals = data.fit_marginals()?;
    let pseudo =
        PseudoSample::from_marginals(&data.columns, &marginals).map_err(CliError::input)?;
    let config = FitConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        ..Default::default()
    };
    let threads = workers::resolve_threads(args.threads);
    let cells = workers::ordered_parallel_map(&grid, threads, |dims| {
        em::select_cell(&pseudo, dims, &config)
    });
    let result = em::pick_best(cells, grid.len()).map_err(CliError::input)?;

    // rectangular table: rows m, columns n
    let mut ms: Vec<usize> = grid.iter().map(|d| d[0]).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut ns: Vec<usize> = grid.iter().map(|d| d[1]).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut lookup = std::collections::HashMap::new();
    for cell in &result.cells {
        lookup.insert((cell.dims[0], cell.dims[1]), cell);
    }
    let mut out = std::fs::File::create(&args.out)?;
    let header: Vec<String> = std::iter::once("m".to_string())
        .chain(ns.iter().map(|n| n.to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for &m in &ms {
        let mut row = vec![m.to_string()];
        for &n in &ns {
            let text = match lookup.get(&(m, n)).and_then(|c| c.aic) {
                Some(aic) => format!("{aic:.6}"),
                None => "NA".to_string(),
            };
            row.push(text);
        }
        writeln!(out, "{}", row.join(","))?;
    }
    println!(
        "best dims by AIC: ({}, {})",
        result.best[0], result.best[1]
    );
    println!("table written to {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-hpm
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct FitHpmArgs {
    pub input: PathBuf,
    /// Family sign: "+" or "-"
    #[arg(long)]
    pub sign: String,
    #[arg(long, default_value_t = 64)]
    pub n_max: u32,
    /// Also write the profile table q(n) / log-likelihood over n = 1..n_max
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub kinds: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Output fit JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct HpmFile {
    version: u32,
    sign: Sign,
    q: f64,
    n: u32,
    var_q: Option<f64>,
    rank_correlation: f64,
    loglik_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    degenerate: bool,
}

pub fn cmd_fit_hpm(args: &FitHpmArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.input, &args.kinds)?;
    if data.dim() != 2 {
        return Err(CliError::Dimensionality(format!(
            "the H family is bivariate; data has {} columns",
            data.dim()
        )));
    }
    let sign: Sign = args.sign.parse().map_err(CliError::Input)?;
    let marginals = data.fit_marginals()?;
    let pseudo =
        PseudoSample::from_marginals(&data.columns, &marginals).map_err(CliError::input)?;
    let config = HpmConfig {
        n_max: args.n_max,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let fit = em::fit_hpm(&pseudo, sign, &config).map_err(CliError::input)?;
    let file = HpmFile {
        version: MODEL_VERSION,
        sign: fit.sign,
        q: fit.q,
        n: fit.n,
        var_q: fit.var_q,
        rank_correlation: fit.model_rank_correlation(),
        loglik_trace: fit.loglik_trace.clone(),
        iterations: fit.iterations,
        converged: fit.converged,
        degenerate: fit.degenerate,
    };
    write_json(&args.out, &file)?;
    println!(
        "H{sign} fit: q = {:.4}, n = {}, model rank correlation = {:.4}",
        fit.q,
        fit.n,
        fit.model_rank_correlation()
    );
    if let Some(v) = fit.var_q {
        println!("approximate Var(q) = {v:.3e}");
    }

    if let Some(profile_path) = &args.profile {
        let mut out = std::fs::File::create(profile_path)?;
        writeln!(out, "n,q,loglik")?;
        for n in 1..=args.n_max {
            let (q, ll) =
                em::profile_loglik_hpm(&pseudo, sign, n, &config).map_err(CliError::input)?;
            writeln!(out, "{n},{q},{ll}")?;
        }
        println!("profile table written to {}", profile_path.display());
    }

    if fit.degenerate {
        return Err(CliError::Degenerate(
            "n = 1: the model is independence for every q".into(),
        ));
    }
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "H family EM stopped after {} iterations",
            fit.iterations
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Fitted model JSON
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let baker = model.to_baker()?;
    let rows = baker.sample(args.count, args.seed).map_err(CliError::input)?;
    let mut out = std::fs::File::create(&args.out)?;
    let header: Vec<String> = (1..=model.dims.len()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    println!(
        "{} rows sampled (seed {}) to {}",
        args.count,
        args.seed,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DensityArgs {
    pub model: PathBuf,
    /// Grid resolution, e.g. "100x100" (grid points per axis)
    #[arg(long, default_value = "100x100")]
    pub grid: String,
    /// "auto" or explicit "x0:x1,y0:y1"
    #[arg(long, default_value = "auto")]
    pub range: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Covariance JSON from `fit --covariance`; adds a variance column
    #[arg(long)]
    pub variance: Option<PathBuf>,
    /// 1-based axis to stratify on (trivariate models): emits conditional
    /// density grids of the remaining two axes per stratum
    #[arg(long)]
    pub stratify: Option<usize>,
    /// Stratum quantile cutpoints low/mid-lo/mid-hi/high
    #[arg(long, default_value = "0.1,0.45,0.55,0.9")]
    pub cuts: String,
}

fn parse_grid_res(spec: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = spec
        .split_once('x')
        .ok_or_else(|| CliError::Input(format!("bad grid '{spec}', expected GxG")))?;
    let gx: usize = a
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid '{spec}'")))?;
    let gy: usize = b
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid '{spec}'")))?;
    if gx < 2 || gy < 2 {
        return Err(CliError::Input("grid needs at least 2x2 points".into()));
    }
    Ok((gx, gy))
}

/// Effective support of a kernel marginal: data range padded by 3 bandwidths.
fn auto_range(marginal: &MarginalModel) -> Result<(f64, f64), CliError> {
    let h = marginal
        .bandwidth()
        .ok_or_else(|| CliError::Input("density export needs continuous marginals".into()))?;
    let (lo, hi) = marginal.data_range();
    Ok((lo - 3.0 * h, hi + 3.0 * h))
}

fn parse_ranges(
    spec: &str,
    marginals: &[&MarginalModel],
) -> Result<Vec<(f64, f64)>, CliError> {
    if spec == "auto" {
        return marginals.iter().map(|m| auto_range(m)).collect();
    }
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != marginals.len() {
        return Err(CliError::Input(format!(
            "--range needs {} axis ranges",
            marginals.len()
        )));
    }
    parts
        .iter()
        .map(|part| {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| CliError::Input(format!("bad range '{part}'")))?;
            let lo: f64 = a
                .parse()
                .map_err(|_| CliError::Input(format!("bad range '{part}'")))?;
            let hi: f64 = b
                .parse()
                .map_err(|_| CliError::Input(format!("bad range '{part}'")))?;
            if !(lo < hi) {
                return Err(CliError::Input(format!("empty range '{part}'")));
            }
            Ok((lo, hi))
        })
        .collect()
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn cmd_density(args: &DensityArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    match args.stratify {
        None => density_2d(args, &model),
        Some(axis) => density_stratified(args, &model, axis),
    }
}

fn density_2d(args: &DensityArgs, model: &ModelFile) -> Result<(), CliError> {
    if model.dims.len() != 2 {
        return Err(CliError::Dimensionality(format!(
            "density grid is bivariate; model has {} axes (use --stratify for 3)",
            model.dims.len()
        )));
    }
    let baker = model.to_baker()?;
    let (gx, gy) = parse_grid_res(&args.grid)?;
    let ranges = parse_ranges(&args.range, &[&model.marginals[0], &model.marginals[1]])?;
    let xs = linspace(ranges[0].0, ranges[0].1, gx);
    let ys = linspace(ranges[1].0, ranges[1].1, gy);

    let cov = match &args.variance {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let export: CovarianceExport = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if export.dims != model.dims {
                return Err(CliError::Input(
                    "covariance dims do not match the model".into(),
                ));
            }
            let size = export.dims[0] * export.dims[1];
            if export.sigma.len() != size * size {
                return Err(CliError::Input("covariance matrix has wrong size".into()));
            }
            Some(CovarianceEstimate {
                dims: [export.dims[0], export.dims[1]],
                n_obs: model.marginals[0].sample_size(),
                sigma: export.sigma,
                b: Vec::new(),
                s: Vec::new(),
                rank: 0,
            })
        }
        None => None,
    };

    let mut out = std::fs::File::create(&args.out)?;
    if cov.is_some() {
        writeln!(out, "x,y,density,variance")?;
    } else {
        writeln!(out, "x,y,density")?;
    }
    for &x in &xs {
        for &y in &ys {
            let h = baker.joint_density(&[x, y]).map_err(CliError::input)?;
            match &cov {
                Some(c) => {
                    let v = inference::var_density_at(&baker.params, c, [x, y], &baker.marginals)
                        .map_err(CliError::input)?;
                    writeln!(out, "{x},{y},{h},{v}")?;
                }
                None => writeln!(out, "{x},{y},{h}")?,
            }
        }
    }
    println!(
        "{}x{} density grid written to {}",
        gx,
        gy,
        args.out.display()
    );
    Ok(())
}

fn parse_cuts(spec: &str) -> Result<[f64; 4], CliError> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad cut '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != 4
        || vals.windows(2).any(|w| w[0] > w[1])
        || vals[0] <= 0.0
        || vals[3] >= 1.0
    {
        return Err(CliError::Input(
            "--cuts needs 4 ascending quantiles strictly inside (0,1)".into(),
        ));
    }
    Ok([vals[0], vals[1], vals[2], vals[3]])
}

/// The three strata implied by the cutpoints, as copula-scale intervals.
pub fn strata_bounds(cuts: [f64; 4]) -> [(String, f64, f64); 3] {
    [
        ("low".to_string(), 0.0, cuts[0]),
        ("mid".to_string(), cuts[1], cuts[2]),
        ("high".to_string(), cuts[3], 1.0),
    ]
}

fn density_stratified(args: &DensityArgs, model: &ModelFile, axis: usize) -> Result<(), CliError> {
    if model.dims.len() != 3 {
        return Err(CliError::Dimensionality(format!(
            "--stratify expects a trivariate model, got {} axes",
            model.dims.len()
        )));
    }
    if !(1..=3).contains(&axis) {
        return Err(CliError::Input(format!("--stratify axis {axis} out of range")));
    }
    let s = axis - 1;
    let others: Vec<usize> = (0..3).filter(|&j| j != s).collect();
    let (a, b) = (others[0], others[1]);
    let cuts = parse_cuts(&args.cuts)?;
    let (gx, gy) = parse_grid_res(&args.grid)?;
    let ranges = parse_ranges(&args.range, &[&model.marginals[a], &model.marginals[b]])?;
    let xs = linspace(ranges[0].0, ranges[0].1, gx);
    let ys = linspace(ranges[1].0, ranges[1].1, gy);
    let params =
        ParamTensor::new(model.dims.clone(), model.weights.clone()).map_err(CliError::input)?;

    let mut out = std::fs::File::create(&args.out)?;
    writeln!(out, "stratum,x,y,density")?;
    for (name, lo, hi) in strata_bounds(cuts) {
        let cond = conditional_weights(&params, s, a, b, lo, hi).map_err(CliError::input)?;
        let (na, nb) = (model.dims[a], model.dims[b]);
        for &x in &xs {
            let ua = model.marginals[a].cdf(x);
            let bu = bernstein::basis_all(na as u32 - 1, ua).map_err(CliError::input)?;
            let fa = model.marginals[a].pdf(x).map_err(CliError::input)?;
            for &y in &ys {
                let ub = model.marginals[b].cdf(y);
                let bv = bernstein::basis_all(nb as u32 - 1, ub).map_err(CliError::input)?;
                let fb = model.marginals[b].pdf(y).map_err(CliError::input)?;
                let mut c = 0.0;
                for ka in 0..na {
                    for kb in 0..nb {
                        c += cond[ka * nb + kb] * bu[ka] * bv[kb];
                    }
                }
                let dens = (na * nb) as f64 * c * fa * fb;
                writeln!(out, "{name},{x},{y},{dens}")?;
            }
        }
    }
    println!(
        "stratified density grids (axis {axis}) written to {}",
        args.out.display()
    );
    Ok(())
}

/// Collapse the stratifying axis of the copula onto a quantile interval:
/// `M[ka,kb] = sum_ks r[..] n_s (B_{ks-1}(hi) - B_{ks-1}(lo)) / (hi - lo)`.
fn conditional_weights(
    params: &ParamTensor,
    s: usize,
    a: usize,
    b: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, baker_copula::copula::CopulaError> {
    let dims = params.dims();
    let ns = dims[s];
    let hi_cum = bernstein::cum_all(ns as u32 - 1, hi)?;
    let lo_cum = bernstein::cum_all(ns as u32 - 1, lo)?;
    let slice_w: Vec<f64> = (0..ns)
        .map(|ks| ns as f64 * (hi_cum[ks] - lo_cum[ks]).max(0.0) / (hi - lo))
        .collect();
    let mut cond = vec![0.0; dims[a] * dims[b]];
    let mut idx = [0usize; 3];
    for ka in 0..dims[a] {
        for kb in 0..dims[b] {
            let mut acc = 0.0;
            for ks in 0..ns {
                idx[a] = ka;
                idx[b] = kb;
                idx[s] = ks;
                acc += params.weight_at(&idx) * slice_w[ks];
            }
            cond[ka * dims[b] + kb] = acc;
        }
    }
    Ok(cond)
}

// ---------------------------------------------------------------------------
// simulate3d
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Simulate3dArgs {
    #[arg(long, default_value_t = 20)]
    pub n1: usize,
    #[arg(long, default_value_t = 20)]
    pub n2: usize,
    #[arg(long, default_value_t = 2)]
    pub n3: usize,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// The varying-correlation tensor: the bottom slice of the third axis is the
/// independence plane, the top slice is the diagonal, and intermediate slices
/// (when n3 > 2) interpolate linearly, so the (X,Y) correlation grows with Z.
pub fn interaction_tensor(n1: usize, n2: usize, n3: usize) -> Result<ParamTensor, CliError> {
    if n1 != n2 {
        return Err(CliError::Input(format!(
            "the diagonal slice needs n1 = n2, got {n1} and {n2}"
        )));
    }
    if n1 < 1 || n3 < 2 {
        return Err(CliError::Input("need n1 >= 1 and n3 >= 2".into()));
    }
    let mut weights = vec![0.0; n1 * n2 * n3];
    for k1 in 0..n1 {
        for k2 in 0..n2 {
            for k3 in 0..n3 {
                let t = k3 as f64 / (n3 as f64 - 1.0);
                let uniform = (1.0 - t) / (n3 * n1 * n2) as f64;
                let diagonal = if k1 == k2 { t / (n3 * n1) as f64 } else { 0.0 };
                weights[(k1 * n2 + k2) * n3 + k3] = uniform + diagonal;
            }
        }
    }
    ParamTensor::new(vec![n1, n2, n3], weights).map_err(CliError::input)
}

pub fn cmd_simulate3d(args: &Simulate3dArgs) -> Result<(), CliError> {
    let params = interaction_tensor(args.n1, args.n2, args.n3)?;
    let rows = params.sample_copula(args.count, args.seed);
    let std_normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let mut out = std::fs::File::create(&args.out)?;
    writeln!(out, "x,y,z")?;
    for row in rows {
        let vals: Vec<String> = row
            .iter()
            .map(|&u| {
                let z = std_normal.inverse_cdf(u.clamp(1e-15, 1.0 - 1e-15));
                format!("{z}")
            })
            .collect();
        writeln!(out, "{}", vals.join(","))?;
    }
    println!(
        "{} rows (dims {}x{}x{}, seed {}) written to {}",
        args.count,
        args.n1,
        args.n2,
        args.n3,
        args.seed,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-gaussian
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct FitGaussianArgs {
    pub input: PathBuf,
    /// Output JSON with the normal-scores correlation matrix
    #[arg(long)]
    pub out: PathBuf,
    /// Write conditional-slice density grids (trivariate data)
    #[arg(long)]
    pub slice_out: Option<PathBuf>,
    /// 1-based stratifying axis for --slice-out
    #[arg(long, default_value_t = 3)]
    pub stratify: usize,
    #[arg(long, default_value = "0.1,0.45,0.55,0.9")]
    pub cuts: String,
    #[arg(long, default_value = "100x100")]
    pub grid: String,
}

pub fn cmd_fit_gaussian(args: &FitGaussianArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.input, &None)?;
    let fit = gaussian::fit_gaussian(&data.columns)?;
    write_json(&args.out, &fit)?;
    println!("normal-scores correlation matrix:");
    for row in &fit.correlation {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.4}")).collect();
        println!("  {}", cells.join(" "));
    }
    println!("written to {}", args.out.display());

    if let Some(slice_path) = &args.slice_out {
        if data.dim() != 3 {
            return Err(CliError::Dimensionality(
                "--slice-out expects 3 data columns".into(),
            ));
        }
        if !(1..=3).contains(&args.stratify) {
            return Err(CliError::Input("--stratify axis out of range".into()));
        }
        let s = args.stratify - 1;
        let others: Vec<usize> = (0..3).filter(|&j| j != s).collect();
        let (a, b) = (others[0], others[1]);
        let marg_a = baker_copula::marginals::fit_continuous(&data.columns[a], None)
            .map_err(CliError::input)?;
        let marg_b = baker_copula::marginals::fit_continuous(&data.columns[b], None)
            .map_err(CliError::input)?;
        let cuts = parse_cuts(&args.cuts)?;
        let (gx, gy) = parse_grid_res(&args.grid)?;
        let ra = auto_range(&marg_a)?;
        let rb = auto_range(&marg_b)?;
        let xs = linspace(ra.0, ra.1, gx);
        let ys = linspace(rb.0, rb.1, gy);
        let mut out = std::fs::File::create(slice_path)?;
        writeln!(out, "stratum,x,y,density")?;
        for (name, lo, hi) in strata_bounds(cuts) {
            let slice = ConditionalSlice::new(&fit, a, b, s, lo, hi)?;
            for &x in &xs {
                for &y in &ys {
                    let dens = slice.density(x, y, &marg_a, &marg_b)?;
                    writeln!(out, "{name},{x},{y},{dens}")?;
                }
            }
        }
        println!("gaussian slice grids written to {}", slice_path.display());
        println!(
            "implied conditional correlation of the other two axes: {:+.4} (constant in the stratum)",
            fit.conditional_correlation(a, b, s)
        );
    }
    Ok(())
}
