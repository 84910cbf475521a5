//! Regularizing networks `R_alpha = (Id + N_theta(alpha)) B_alpha`.
//!
//! Three variants share one code path and differ only in where the learned
//! residual is allowed to live:
//!
//! - [`Variant::ClassicalFilter`]: no residual, `R_alpha = B_alpha`.
//! - [`Variant::NullSpace`]: `P_ker(A) N(z)`, the regularized null-space network.
//!   Its family converges on the admissible set `M = (Id + F)(ran A^+)`.
//! - [`Variant::ContinuedSvd`]: the projection of `N(z)` onto
//!   `span{u_n : sigma_n^2 < alpha}` together with the numerical kernel, so the
//!   network only continues coefficients that truncation dropped.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::filters::{FilterRegularizer, RegularizingFilter};
use crate::linop::SvdOperator;
use crate::network::{self, NetworkParams, OutputProjection, TrainConfig, TrainingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    ClassicalFilter,
    NullSpace,
    ContinuedSvd,
}

impl Variant {
    pub fn is_learned(self) -> bool {
        !matches!(self, Variant::ClassicalFilter)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::ClassicalFilter => "classical",
            Variant::NullSpace => "nullspace",
            Variant::ContinuedSvd => "continued",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" | "tsvd" => Ok(Variant::ClassicalFilter),
            "nullspace" => Ok(Variant::NullSpace),
            "continued" => Ok(Variant::ContinuedSvd),
            other => Err(Error::invalid(format!("unknown method variant '{other}'"))),
        }
    }
}

/// Orthogonal projector `x - sum_{n < keep} <u_n, x> u_n`.
#[derive(Debug, Clone)]
pub struct ComplementProjector {
    operator: Arc<SvdOperator>,
    keep: usize,
}

impl ComplementProjector {
    pub fn new(operator: Arc<SvdOperator>, keep: usize) -> Self {
        Self { operator, keep }
    }

    /// Projector onto the numerical kernel.
    pub fn kernel(operator: Arc<SvdOperator>) -> Self {
        let keep = operator.rank();
        Self { operator, keep }
    }

    pub fn keep(&self) -> usize {
        self.keep
    }
}

impl OutputProjection for ComplementProjector {
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.operator.complement_project(x, self.keep)
    }

    fn project_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.operator.complement_project_many(xs, self.keep)
    }
}

/// `F(z) = P_ker(A) N(z)`.
pub fn nullspace_residual(op: &SvdOperator, params: &NetworkParams, z: &[f64]) -> Result<Vec<f64>> {
    check_len(op.cols(), z.len())?;
    op.kernel_project(&params.forward(z)?)
}

/// `sum_{sigma_n^2 < alpha} <N(z), u_n> u_n`, including the numerical kernel.
pub fn continued_svd_residual(op: &SvdOperator, alpha: f64, params: &NetworkParams, z: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    check_len(op.cols(), z.len())?;
    op.complement_project(&params.forward(z)?, op.count_at_least(alpha))
}

#[derive(Debug, Clone)]
pub struct ReconstructionMethod {
    variant: Variant,
    regularizer: FilterRegularizer,
    params: Option<NetworkParams>,
}

impl ReconstructionMethod {
    pub fn new(variant: Variant, regularizer: FilterRegularizer, params: Option<NetworkParams>) -> Result<Self> {
        match (variant, &params) {
            (Variant::ClassicalFilter, _) => Ok(Self { variant, regularizer, params: None }),
            (_, None) => Err(Error::MissingParams),
            (_, Some(p)) => {
                p.validate()?;
                check_len(regularizer.operator().cols(), p.arch.pixels())?;
                Ok(Self { variant, regularizer, params })
            }
        }
    }

    pub fn classical(regularizer: FilterRegularizer) -> Self {
        Self { variant: Variant::ClassicalFilter, regularizer, params: None }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn regularizer(&self) -> &FilterRegularizer {
        &self.regularizer
    }

    pub fn operator(&self) -> &Arc<SvdOperator> {
        self.regularizer.operator()
    }

    pub fn alpha(&self) -> f64 {
        self.regularizer.alpha()
    }

    pub fn params(&self) -> Option<&NetworkParams> {
        self.params.as_ref()
    }

    /// Number of leading singular components the residual may not touch.
    pub fn protected_components(&self) -> usize {
        match self.variant {
            Variant::ClassicalFilter | Variant::NullSpace => self.operator().rank(),
            Variant::ContinuedSvd => self.regularizer.kept(),
        }
    }

    /// The projector applied after the network.
    pub fn projector(&self) -> ComplementProjector {
        ComplementProjector::new(self.operator().clone(), self.protected_components())
    }

    /// `N_theta(alpha)(z)`, the projected residual; zero for the classical variant.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let op = self.operator();
        check_len(op.cols(), z.len())?;
        match (self.variant, &self.params) {
            (Variant::ClassicalFilter, _) => Ok(vec![0.0; op.cols()]),
            (_, None) => Err(Error::MissingParams),
            (Variant::NullSpace, Some(p)) => nullspace_residual(op, p, z),
            (Variant::ContinuedSvd, Some(p)) => continued_svd_residual(op, self.alpha(), p, z),
        }
    }

    /// `R_alpha(y) = B_alpha y + N_theta(alpha)(B_alpha y)`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.regularizer.apply(y)?;
        if self.variant.is_learned() {
            let r = self.residual(&x)?;
            crate::axpy(1.0, &r, &mut x);
        }
        Ok(x)
    }

    /// `||B_alpha A N_theta(alpha)(B_alpha A x)||`.
    pub fn a3_residual(&self, x: &[f64]) -> Result<f64> {
        let z = self.regularizer.apply_after_forward(x)?;
        let r = self.residual(&z)?;
        Ok(crate::norm(&self.regularizer.apply_after_forward(&r)?))
    }
}

/// Builds the training samples for one alpha: input and base are
/// `B_alpha y_k`, targets are the ground-truth coefficients.
pub fn training_samples(
    regularizer: &FilterRegularizer,
    data: &[Vec<f64>],
    truths: &[Vec<f64>],
) -> Result<Vec<TrainingSample>> {
    check_len(truths.len(), data.len())?;
    data.iter()
        .zip(truths)
        .map(|(y, c)| {
            let b = regularizer.apply(y)?;
            Ok(TrainingSample { input: b.clone(), base: b, target: c.clone() })
        })
        .collect()
}

/// Trains the network of a learned variant in place, minimizing the MAE of
/// `B_alpha y + P N(B_alpha y)` against the ground truth.
pub fn train_method(
    variant: Variant,
    regularizer: &FilterRegularizer,
    params: &mut NetworkParams,
    samples: &[TrainingSample],
    config: &TrainConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if !variant.is_learned() {
        return Err(Error::invalid("classical methods have nothing to train"));
    }
    let op = regularizer.operator().clone();
    let projector = match variant {
        Variant::NullSpace => ComplementProjector::kernel(op),
        _ => ComplementProjector::new(op, regularizer.kept()),
    };
    network::train(params, samples, &projector, config, on_epoch)
}

/// One network per alpha for a fixed operator, filter and variant.
#[derive(Debug, Clone)]
pub struct RegNetFamily {
    operator: Arc<SvdOperator>,
    filter: RegularizingFilter,
    variant: Variant,
    members: Vec<(f64, NetworkParams)>,
    lipschitz: Vec<f64>,
    lipschitz_cap: f64,
}

impl RegNetFamily {
    /// Alphas must be strictly descending; every member's Lipschitz bound must
    /// not exceed `lipschitz_cap`.
    pub fn new(
        operator: Arc<SvdOperator>,
        filter: RegularizingFilter,
        variant: Variant,
        members: Vec<(f64, NetworkParams)>,
        lipschitz_cap: f64,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("empty RegNet family"));
        }
        if !variant.is_learned() {
            return Err(Error::invalid("a RegNet family needs a learned variant"));
        }
        if members.windows(2).any(|w| w[0].0 <= w[1].0) || members.iter().any(|m| !(m.0 > 0.0)) {
            return Err(Error::invalid("family alphas must be positive and strictly descending"));
        }
        let lipschitz = members.iter().map(|(_, p)| network::lipschitz_upper_bound(p)).collect::<Result<Vec<_>>>()?;
        if let Some((i, l)) = lipschitz.iter().enumerate().find(|(_, &l)| l > lipschitz_cap) {
            return Err(Error::Precondition(format!(
                "member {i} (alpha = {}) has Lipschitz bound {l} above the cap {lipschitz_cap}",
                members[i].0
            )));
        }
        Ok(Self { operator, filter, variant, members, lipschitz, lipschitz_cap })
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.0).collect()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn lipschitz_bounds(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn lipschitz_cap(&self) -> f64 {
        self.lipschitz_cap
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Reconstruction method for member `i`.
    pub fn method(&self, i: usize) -> Result<ReconstructionMethod> {
        let (alpha, params) = &self.members[i];
        let reg = FilterRegularizer::new(self.operator.clone(), self.filter, *alpha)?;
        ReconstructionMethod::new(self.variant, reg, Some(params.clone()))
    }

    /// Member whose alpha is closest to `alpha` on a log scale.
    pub fn nearest(&self, alpha: f64) -> usize {
        let target = alpha.ln();
        self.members
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0.ln() - target).abs().total_cmp(&(b.1 .0.ln() - target).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptednessReport {
    pub alphas: Vec<f64>,
    /// `distances[p][j] = ||N_j(B_j A z_p) - N_min(B_min A z_p)||`.
    pub distances: Vec<Vec<f64>>,
    /// Per probe: distances over the second half of the sweep are non-increasing.
    pub monotone_tail: Vec<bool>,
}

/// Records how `N_theta(alpha)(B_alpha A z)` approaches the smallest-alpha
/// member on probes `z` from `ran(A^+)`.
pub fn adaptedness_probe(family: &RegNetFamily, probes: &[Vec<f64>]) -> Result<AdaptednessReport> {
    let op = &family.operator;
    let methods = (0..family.len()).map(|i| family.method(i)).collect::<Result<Vec<_>>>()?;
    let mut distances = Vec::with_capacity(probes.len());
    for z in probes {
        check_len(op.cols(), z.len())?;
        let outputs =
            methods.iter().map(|m| m.residual(&m.regularizer().apply_after_forward(z)?)).collect::<Result<Vec<_>>>()?;
        let reference = outputs.last().expect("family is non-empty");
        distances.push(outputs.iter().map(|o| crate::distance(o, reference)).collect::<Vec<_>>());
    }
    let monotone_tail = distances
        .iter()
        .map(|d: &Vec<f64>| {
            let start = d.len() / 2;
            d[start..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15)
        })
        .collect();
    Ok(AdaptednessReport { alphas: family.alphas(), distances, monotone_tail })
}
