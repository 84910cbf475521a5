//! Regularizing filters and the filter-based regularization
//! `B_alpha = g_alpha(A*A) A*`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linop::SvdOperator;

/// Anything that evaluates as `g_alpha(lambda)`.
///
/// Implemented by [`RegularizingFilter`]; the trait exists so axiom checks can
/// also be run against arbitrary candidate functions.
pub trait SpectralFilter {
    fn value(&self, alpha: f64, lambda: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    /// `g(lambda) = 1 / (lambda + alpha)`
    Tikhonov,
    /// `g(lambda) = 1/lambda` for `lambda >= alpha`, else 0.
    TruncatedSvd,
    /// `k(alpha) = ceil(1/alpha)` steps of Landweber iteration with step size `step`.
    Landweber { step: f64 },
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterKind::Tikhonov => write!(f, "tikhonov"),
            FilterKind::TruncatedSvd => write!(f, "tsvd"),
            FilterKind::Landweber { .. } => write!(f, "landweber"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizingFilter {
    pub kind: FilterKind,
    /// Declared qualification `mu_0`; `f64::INFINITY` when unbounded.
    pub qualification: f64,
    /// Constant `C` of the qualification inequality at the reference order.
    pub constant: f64,
}

impl RegularizingFilter {
    pub fn tikhonov() -> Self {
        Self { kind: FilterKind::Tikhonov, qualification: 1.0, constant: 1.0 }
    }

    pub fn truncated_svd() -> Self {
        Self { kind: FilterKind::TruncatedSvd, qualification: f64::INFINITY, constant: 1.0 }
    }

    /// Landweber iteration with step size in `(0, 1/||A*A||]`.
    pub fn landweber(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(format!("Landweber step must be positive, got {step}")));
        }
        Ok(Self { kind: FilterKind::Landweber { step }, qualification: f64::INFINITY, constant: 1.0 })
    }

    /// Parses `tikhonov`, `tsvd` or `landweber`. Landweber gets the largest
    /// admissible step `1/lambda_max`.
    pub fn parse(name: &str, lambda_max: f64) -> Result<Self> {
        match name.parse::<FilterName>()? {
            FilterName::Tikhonov => Ok(Self::tikhonov()),
            FilterName::TruncatedSvd => Ok(Self::truncated_svd()),
            FilterName::Landweber => Self::landweber(1.0 / lambda_max),
        }
    }

    /// `g_alpha(lambda)`; rejects negative or non-finite arguments.
    pub fn filter_value(&self, alpha: f64, lambda: f64) -> Result<f64> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(self.value(alpha, lambda))
    }

    /// Landweber iteration count `k(alpha) = ceil(1/alpha)`.
    pub fn landweber_steps(alpha: f64) -> f64 {
        (1.0 / alpha).ceil().max(1.0)
    }

    /// Constant `C` with `sup lambda^mu |1 - lambda g_alpha(lambda)| <= C alpha^mu`,
    /// or `None` when `mu` exceeds the qualification.
    pub fn qualification_constant(&self, mu: f64) -> Option<f64> {
        if !(mu > 0.0) || mu > self.qualification {
            return None;
        }
        Some(match self.kind {
            FilterKind::TruncatedSvd => 1.0,
            FilterKind::Tikhonov => {
                if mu >= 1.0 {
                    1.0
                } else {
                    mu.powf(mu) * (1.0 - mu).powf(1.0 - mu)
                }
            }
            // lambda^mu (1 - beta lambda)^k <= (mu / (e beta k))^mu and k >= 1/alpha
            FilterKind::Landweber { step } => (mu / (std::f64::consts::E * step)).powf(mu),
        })
    }
}

impl SpectralFilter for RegularizingFilter {
    fn value(&self, alpha: f64, lambda: f64) -> f64 {
        match self.kind {
            FilterKind::Tikhonov => 1.0 / (lambda + alpha),
            FilterKind::TruncatedSvd => {
                if lambda < alpha {
                    0.0
                } else {
                    1.0 / lambda
                }
            }
            FilterKind::Landweber { step } => {
                let k = Self::landweber_steps(alpha);
                let q = step * lambda;
                if lambda == 0.0 {
                    step * k
                } else if q <= 1.0 {
                    // sum_{j<k} beta (1 - beta lambda)^j = (1 - (1 - q)^k) / lambda
                    -(k * (-q).ln_1p()).exp_m1() / lambda
                } else {
                    (1.0 - (1.0 - q).powf(k)) / lambda
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FilterName {
    Tikhonov,
    TruncatedSvd,
    Landweber,
}

impl FromStr for FilterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tikhonov" => Ok(Self::Tikhonov),
            "tsvd" => Ok(Self::TruncatedSvd),
            "landweber" => Ok(Self::Landweber),
            other => Err(Error::invalid(format!("unknown filter '{other}' (expected tikhonov|tsvd|landweber)"))),
        }
    }
}

/// `B_alpha` bound to an operator.
#[derive(Debug, Clone)]
pub struct FilterRegularizer {
    operator: Arc<SvdOperator>,
    filter: RegularizingFilter,
    alpha: f64,
}

impl FilterRegularizer {
    pub fn new(operator: Arc<SvdOperator>, filter: RegularizingFilter, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { operator, filter, alpha })
    }

    pub fn operator(&self) -> &Arc<SvdOperator> {
        &self.operator
    }

    pub fn filter(&self) -> &RegularizingFilter {
        &self.filter
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of singular components with `sigma_n^2 >= alpha`.
    pub fn kept(&self) -> usize {
        self.operator.count_at_least(self.alpha)
    }

    /// `B_alpha y = sum_n g_alpha(sigma_n^2) sigma_n <v_n, y> u_n`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.operator.spectral_apply(y, |s| self.filter.value(self.alpha, s * s) * s)
    }

    /// `B_alpha A x`, evaluated on the spectrum without forming `A x`.
    pub fn apply_after_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.operator.image_spectral_apply(x, |s| self.filter.value(self.alpha, s * s) * s * s)
    }

    /// Exact operator norm `max_n |g_alpha(sigma_n^2)| sigma_n` of the discrete `B_alpha`.
    pub fn norm(&self) -> f64 {
        let op = &self.operator;
        op.singular_values()[..op.rank()]
            .iter()
            .map(|&s| (self.filter.value(self.alpha, s * s) * s).abs())
            .fold(0.0, f64::max)
    }
}

/// `max lambda^mu |1 - lambda g_alpha(lambda)|` over a uniform grid on
/// `[0, lambda_max]`, refined geometrically around `lambda = alpha` where
/// the supremum of cut-off filters sits.
pub fn qualification_sup(
    filter: &impl SpectralFilter,
    alpha: f64,
    mu: f64,
    lambda_max: f64,
    grid_size: usize,
) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    if grid_size < 1000 {
        return Err(Error::invalid(format!("grid_size must be at least 1000, got {grid_size}")));
    }
    if !(alpha > 0.0 && lambda_max > 0.0) {
        return Err(Error::invalid("alpha and lambda_max must be positive"));
    }
    let eval = |lambda: f64| lambda.powf(mu) * (1.0 - lambda * filter.value(alpha, lambda)).abs();
    let h = lambda_max / grid_size as f64;
    let mut best = (0..=grid_size).map(|i| eval(i as f64 * h)).fold(0.0, f64::max);
    for j in -160..=160 {
        let lambda = alpha * 2f64.powf(j as f64 / 8.0);
        if lambda <= lambda_max {
            best = best.max(eval(lambda));
        }
    }
    for j in 1..=60 {
        let lambda = alpha * (1.0 - 2f64.powi(-j));
        if lambda <= lambda_max {
            best = best.max(eval(lambda));
        }
    }
    Ok(best)
}

/// Pointwise convergence trace of `|g_alpha(lambda) - 1/lambda|` at one `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub lambda: f64,
    pub residuals: Vec<f64>,
    pub converging: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub alphas: Vec<f64>,
    /// `max_lambda |lambda g_alpha(lambda)|` per alpha.
    pub sup_per_alpha: Vec<f64>,
    /// Overall `sup |lambda g_alpha(lambda)|`.
    pub sup_lambda_g: f64,
    pub bounded: bool,
    pub traces: Vec<ConvergenceTrace>,
    pub converges: bool,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.bounded && self.converges
    }
}

/// Growth of `sup |lambda g|` across the alpha sweep that counts as unbounded.
const GROWTH_LIMIT: f64 = 10.0;
/// A trace converges if it ends below this fraction of its start (or at zero).
const CONVERGENCE_RATIO: f64 = 0.5;

/// Numerical check of the two regularizing-filter axioms on `[0, lambda_max]`.
///
/// Boundedness is flagged when the per-alpha supremum of `|lambda g|` grows by
/// more than a factor 10 over the sweep. Convergence is checked at
/// log-spaced `lambda` in `[10 alpha_min, lambda_max]`: each residual sequence
/// must be non-increasing and end at zero or below half its initial value.
pub fn verify_filter_axioms(filter: &impl SpectralFilter, lambda_max: f64, alphas: &[f64]) -> Result<AxiomReport> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::invalid("alphas must be a non-empty list of positive values"));
    }
    if alphas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("alphas must be strictly descending"));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::invalid("lambda_max must be positive"));
    }

    const GRID: usize = 2000;
    let sup_per_alpha: Vec<f64> = alphas
        .iter()
        .map(|&alpha| {
            let uniform = (0..=GRID).map(|i| lambda_max * i as f64 / GRID as f64);
            let near_alpha = (-40..=40).map(|j| alpha * 2f64.powf(j as f64 / 4.0)).filter(|&l| l <= lambda_max);
            uniform.chain(near_alpha).map(|l| (l * filter.value(alpha, l)).abs()).fold(0.0, f64::max)
        })
        .collect();
    let sup_lambda_g = sup_per_alpha.iter().copied().fold(0.0, f64::max);
    let first = sup_per_alpha[0];
    let last = *sup_per_alpha.last().unwrap();
    let bounded = sup_lambda_g.is_finite() && last <= GROWTH_LIMIT * first.max(f64::MIN_POSITIVE);

    let alpha_min = *alphas.last().unwrap();
    let lo = (10.0 * alpha_min).min(lambda_max);
    const PROBES: usize = 12;
    let traces: Vec<ConvergenceTrace> = (0..PROBES)
        .map(|i| {
            let t = i as f64 / (PROBES - 1) as f64;
            let lambda = lo * (lambda_max / lo).powf(t);
            let residuals: Vec<f64> = alphas.iter().map(|&a| (filter.value(a, lambda) - 1.0 / lambda).abs()).collect();
            let monotone = residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
            let r0 = residuals[0];
            let rn = *residuals.last().unwrap();
            let shrinks = rn <= 1e-12 / lambda || rn <= CONVERGENCE_RATIO * r0;
            ConvergenceTrace { lambda, converging: monotone && shrinks && rn.is_finite(), residuals }
        })
        .collect();
    let converges = traces.iter().all(|t| t.converging);

    Ok(AxiomReport { alphas: alphas.to_vec(), sup_per_alpha, sup_lambda_g, bounded, traces, converges })
}
