//! Estimation and evaluation of Bernstein copulas (Baker distributions).
//!
//! A Baker distribution couples order statistics of independent samples from
//! given marginals through a joint index distribution `R`, a nonnegative
//! weight array whose axis-wise marginals are uniform.  The copula of that
//! distribution is a polynomial mixture of Bernstein basis functions, which
//! makes the model a finite mixture: the weights can be estimated by an EM
//! algorithm whose M-step is a small constrained convex program solved by a
//! Lagrange-multiplier fixed point.
//!
//! Module map:
//!
//! - [`bernstein`]: Bernstein basis polynomials, derivatives, and cumulative
//!   integrals (regularized incomplete beta).
//! - [`marginals`]: semiparametric per-variable marginals — scaled empirical
//!   CDFs, Gaussian kernel densities, discrete PMFs with left limits.
//! - [`copula`]: the weight tensor [`copula::ParamTensor`], copula density and
//!   CDF in d dimensions, the one-parameter H± subfamily, Spearman's rho, and
//!   exact mixture sampling.
//! - [`mstep`]: the constrained maximizer of the EM M-step, with the spectral
//!   convergence-rate diagnostic.
//! - [`em`]: E-steps for continuous, discrete, and mixed data, the full EM
//!   loop, the H± EM, pseudo-log-likelihood, and AIC model selection.
//! - [`inference`]: sandwich covariance of the fitted weights, variance of
//!   the H± mixing weight, and pointwise density variance.

pub mod bernstein;
pub mod copula;
pub mod em;
pub mod inference;
pub mod marginals;
pub mod mstep;

pub use copula::{BakerModel, HpmModel, ParamTensor, Sign};
pub use em::{FitConfig, FitResult, HpmConfig, HpmFit, PseudoSample};
pub use marginals::MarginalModel;
