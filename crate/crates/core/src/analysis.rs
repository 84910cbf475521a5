//! Quantitative checks of the convergence theory and the test-set protocol.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};
use crate::linop::SvdOperator;
use crate::radon;
use crate::regnet::{ReconstructionMethod, RegNetFamily};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCondition {
    pub mu: f64,
    pub rho: f64,
}

impl SourceCondition {
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0 && rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid(format!("source condition needs mu, rho > 0 (got {mu}, {rho})")));
        }
        Ok(Self { mu, rho })
    }
}

const BISECTION_MAX_ITER: usize = 5000;

/// `min ||r - (A*A)^mu omega||` over `||omega|| <= rho`, solved in the singular basis.
///
/// If the unconstrained representer `r_n / sigma_n^{2 mu}` fits in the ball the
/// distance is the kernel part of `r`. Otherwise the Lagrange multiplier `nu`
/// of `sum_n (d_n r_n / (d_n^2 + nu))^2 = rho^2`, `d_n = sigma_n^{2 mu}`, is
/// found by bisection to 1e-12 relative accuracy.
pub fn distance_to_source_set(op: &SvdOperator, r: &[f64], sc: SourceCondition) -> Result<f64> {
    check_len(op.cols(), r.len())?;
    let rank = op.rank();
    let coeffs = op.image_coefficients(r, rank);
    let kernel_sq = crate::norm(&op.complement_project(r, rank)?).powi(2);
    let d: Vec<f64> = op.singular_values()[..rank].iter().map(|s| s.powf(2.0 * sc.mu)).collect();

    let free_norm_sq: f64 = coeffs.iter().zip(&d).map(|(c, dn)| (c / dn).powi(2)).sum();
    if free_norm_sq <= sc.rho * sc.rho {
        return Ok(kernel_sq.sqrt());
    }
    let omega_norm_sq =
        |nu: f64| -> f64 { coeffs.iter().zip(&d).map(|(c, dn)| (dn * c / (dn * dn + nu)).powi(2)).sum() };
    let range_norm = crate::norm(&coeffs);
    let mut hi = d.iter().copied().fold(0.0, f64::max) * range_norm / sc.rho;
    let mut lo = 0.0;
    if !(hi > 0.0) || omega_norm_sq(hi) > sc.rho * sc.rho * (1.0 + 1e-12) {
        return Err(Error::Bracket(format!("no feasible multiplier below {hi}")));
    }
    let mut iterations = 0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if omega_norm_sq(mid) > sc.rho * sc.rho {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > BISECTION_MAX_ITER {
            return Err(Error::Bracket("bisection did not reach tolerance".into()));
        }
    }
    let nu = hi;
    let range_sq: f64 = coeffs.iter().zip(&d).map(|(c, dn)| (c * nu / (dn * dn + nu)).powi(2)).sum();
    Ok((range_sq + kernel_sq).sqrt())
}

/// `d_alpha(x; rho, mu)` for a reconstruction method: the distance of
/// `x - N_theta(alpha)(B_alpha A x)` to the source set.
pub fn distance_function(method: &ReconstructionMethod, x: &[f64], sc: SourceCondition) -> Result<f64> {
    let op = method.operator();
    check_len(op.cols(), x.len())?;
    let z = method.regularizer().apply_after_forward(x)?;
    let n = method.residual(&z)?;
    let r: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a - b).collect();
    distance_to_source_set(op, &r, sc)
}

/// The four terms of the error estimate and the error they bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `delta (1 + L) ||B_alpha||`
    pub noise_term: f64,
    /// `C rho alpha^mu`
    pub approx_term: f64,
    /// `d_alpha(x; rho, mu)`
    pub dist_term: f64,
    /// `||B_alpha A N B_alpha A x||`
    pub a3_term: f64,
    /// `||R_alpha(y_delta) - x||`
    pub lhs: f64,
}

pub const BOUND_SLACK: f64 = 1e-9;

impl BoundTerms {
    pub fn bound(&self) -> f64 {
        self.noise_term + self.approx_term + self.dist_term + self.a3_term
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.bound() + BOUND_SLACK
    }
}

/// Evaluates both sides of the error estimate for one instance.
///
/// `lipschitz` bounds the Lipschitz constant of the learned residual and
/// `constant` is the qualification constant of the filter at order `mu`.
pub fn error_bound_terms(
    method: &ReconstructionMethod,
    x: &[f64],
    y_delta: &[f64],
    delta: f64,
    sc: SourceCondition,
    lipschitz: f64,
    constant: f64,
) -> Result<BoundTerms> {
    let op = method.operator();
    check_len(op.cols(), x.len())?;
    check_len(op.rows(), y_delta.len())?;
    let ax = op.apply_forward(x)?;
    let noise = crate::distance(&ax, y_delta);
    if noise > delta * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!("||Ax - y_delta|| = {noise} exceeds delta = {delta}")));
    }
    let qualification = method.regularizer().filter().qualification;
    if sc.mu > qualification {
        return Err(Error::Precondition(format!(
            "filter qualification {qualification} is below the smoothness order {}",
            sc.mu
        )));
    }
    let reg = method.regularizer();
    let recon = method.reconstruct(y_delta)?;
    Ok(BoundTerms {
        noise_term: delta * (1.0 + lipschitz) * reg.norm(),
        approx_term: constant * sc.rho * reg.alpha().powf(sc.mu),
        dist_term: distance_function(method, x, sc)?,
        a3_term: method.a3_residual(x)?,
        lhs: crate::distance(&recon, x),
    })
}

/// A-priori rule `alpha = c delta^{2 / (2 mu + 1)}`.
pub fn param_choice(delta: f64, sc: SourceCondition, scale: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    Ok(scale * delta.powf(2.0 / (2.0 * sc.mu + 1.0)))
}

/// Theoretical rate exponent `2 mu / (2 mu + 1)`.
pub fn rate_exponent(mu: f64) -> f64 {
    2.0 * mu / (2.0 * mu + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    check_len(xs.len(), ys.len())?;
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SlopeFit { slope, intercept, residual })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub kept: usize,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub delta: f64,
    pub alpha: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub alpha_rows: Vec<AlphaRow>,
    pub rate_rows: Vec<RateRow>,
    /// Rows with `delta = 0`, kept out of the fit.
    pub noiseless_rows: Vec<RateRow>,
    pub slope: Option<SlopeFit>,
    /// Convergence runs: the error at the smallest delta exceeds the first one.
    pub final_exceeds_initial: bool,
}

impl ExperimentReport {
    /// Row with the smallest mean squared error.
    pub fn best(&self) -> Option<AlphaRow> {
        self.alpha_rows.iter().copied().min_by(|a, b| a.mse.total_cmp(&b.mse))
    }

    /// `alpha,kept,mse,mae` table, preceded by `# key=value` header lines.
    pub fn alpha_csv(&self, header: &[(String, String)]) -> String {
        let mut out = comment_block(header);
        out.push_str("alpha,kept,mse,mae\n");
        for r in &self.alpha_rows {
            let _ = writeln!(out, "{:e},{},{:e},{:e}", r.alpha, r.kept, r.mse, r.mae);
        }
        out
    }

    /// `delta,alpha,error` table including noiseless rows.
    pub fn rate_csv(&self, header: &[(String, String)]) -> String {
        let mut out = comment_block(header);
        out.push_str("delta,alpha,error\n");
        for r in self.noiseless_rows.iter().chain(&self.rate_rows) {
            let _ = writeln!(out, "{:e},{:e},{:e}", r.delta, r.alpha, r.error);
        }
        out
    }

    /// Plain `key=value` summary of the fitted slope.
    pub fn slope_summary(&self, header: &[(String, String)], expected: Option<f64>) -> String {
        let mut out = String::new();
        for (k, v) in header {
            let _ = writeln!(out, "{k}={v}");
        }
        if let Some(fit) = self.slope {
            let _ = writeln!(out, "slope={}", fit.slope);
            let _ = writeln!(out, "intercept={}", fit.intercept);
            let _ = writeln!(out, "fit_residual={}", fit.residual);
        }
        if let Some(e) = expected {
            let _ = writeln!(out, "expected_slope={e}");
        }
        let _ = writeln!(out, "points={}", self.rate_rows.len());
        out
    }
}

fn comment_block(header: &[(String, String)]) -> String {
    header.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

/// `x = (A*A)^mu omega` with a seeded random `omega` of norm `rho`.
pub fn source_element(op: &SvdOperator, sc: SourceCondition, seed: u64) -> Result<Vec<f64>> {
    let omega = radon::exact_norm_noise(op.cols(), sc.rho, seed)?;
    op.power_apply(&omega, sc.mu)
}

/// Noise of norm `delta` along the last retained data vector, where the
/// amplification `1 / sigma` of a spectral cut-off is largest. The seed only
/// picks the sign.
pub fn worst_case_noise(op: &SvdOperator, kept: usize, delta: f64, seed: u64) -> Vec<f64> {
    let sign = if seed & 1 == 0 { 1.0 } else { -1.0 };
    op.data_vector(kept.max(1) - 1).iter().map(|v| sign * delta * v).collect()
}

/// Errors `||R_alpha(y_delta) - x||` along `alpha = param_choice(delta)` with
/// worst-case noise of exact norm `delta`, and the log-log slope over the
/// positive deltas.
pub fn rate_experiment(
    method_for_alpha: &dyn Fn(f64) -> Result<ReconstructionMethod>,
    op: &SvdOperator,
    x: &[f64],
    sc: SourceCondition,
    scale: f64,
    deltas: &[f64],
    seed: u64,
) -> Result<ExperimentReport> {
    check_len(op.cols(), x.len())?;
    let positive = deltas.iter().filter(|&&d| d > 0.0).count();
    if positive < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 positive noise levels, got {positive}")));
    }
    let ax = op.apply_forward(x)?;
    let mut report = ExperimentReport::default();
    for (i, &delta) in deltas.iter().enumerate() {
        if delta < 0.0 {
            return Err(Error::invalid("noise levels must be non-negative"));
        }
        if delta == 0.0 {
            // smallest alpha that still keeps every nonzero component
            let smin = op.singular_values()[op.rank().saturating_sub(1)];
            let alpha = smin * smin;
            let err = crate::distance(&method_for_alpha(alpha)?.reconstruct(&ax)?, x);
            report.noiseless_rows.push(RateRow { delta, alpha, error: err });
            continue;
        }
        let alpha = param_choice(delta, sc, scale)?;
        let method = method_for_alpha(alpha)?;
        let noise = worst_case_noise(op, method.regularizer().kept(), delta, seed.wrapping_add(i as u64));
        let y: Vec<f64> = ax.iter().zip(&noise).map(|(a, n)| a + n).collect();
        let err = crate::distance(&method.reconstruct(&y)?, x);
        report.rate_rows.push(RateRow { delta, alpha, error: err });
    }
    report.rate_rows.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let ds: Vec<f64> = report.rate_rows.iter().map(|r| r.delta).collect();
    let es: Vec<f64> = report.rate_rows.iter().map(|r| r.error).collect();
    report.slope = Some(fit_loglog(&ds, &es)?);
    Ok(report)
}

/// Errors of a RegNet family along a decreasing noise sequence for an element
/// of the admissible set. The member closest to `alpha_rule(delta)` is used.
pub fn convergence_experiment(
    family: &RegNetFamily,
    x: &[f64],
    deltas: &[f64],
    alpha_rule: &dyn Fn(f64) -> f64,
    seed: u64,
) -> Result<ExperimentReport> {
    if deltas.is_empty() {
        return Err(Error::invalid("no noise levels"));
    }
    let mut report = ExperimentReport::default();
    let mut ax = None;
    for (i, &delta) in deltas.iter().enumerate() {
        let method = family.method(family.nearest(alpha_rule(delta)))?;
        let op = method.operator();
        let ax = match &ax {
            Some(v) => v,
            None => ax.insert(op.apply_forward(x)?),
        };
        let noise = radon::exact_norm_noise(ax.len(), delta, seed.wrapping_add(i as u64))?;
        let y: Vec<f64> = ax.iter().zip(&noise).map(|(a, n)| a + n).collect();
        let error = crate::distance(&method.reconstruct(&y)?, x);
        report.rate_rows.push(RateRow { delta, alpha: method.alpha(), error });
    }
    let first = report.rate_rows.first().map(|r| r.error).unwrap_or(0.0);
    let last = report.rate_rows.last().map(|r| r.error).unwrap_or(0.0);
    report.final_exceeds_initial = last > first;
    let ds: Vec<f64> = report.rate_rows.iter().map(|r| r.delta).collect();
    let es: Vec<f64> = report.rate_rows.iter().map(|r| r.error).collect();
    report.slope = fit_loglog(&ds, &es).ok();
    Ok(report)
}

/// Anything that maps data to coefficients at a given regularization level.
pub trait Reconstructor {
    fn alpha(&self) -> f64;
    /// Number of retained singular components (reporting only).
    fn kept(&self) -> usize;
    fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl Reconstructor for ReconstructionMethod {
    fn alpha(&self) -> f64 {
        ReconstructionMethod::alpha(self)
    }

    fn kept(&self) -> usize {
        self.regularizer().kept()
    }

    fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        ReconstructionMethod::reconstruct(self, y)
    }
}

/// Affine map of `v` onto `[0, 1]`; constant vectors map to zero.
pub fn rescale_unit(v: &[f64]) -> Vec<f64> {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / span).collect()
}

/// Per-pixel mean squared and mean absolute error after rescaling both
/// images to `[0, 1]`.
pub fn image_errors(reconstruction: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    check_len(truth.len(), reconstruction.len())?;
    let a = rescale_unit(reconstruction);
    let b = rescale_unit(truth);
    let n = a.len().max(1) as f64;
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
    let mae = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    Ok((mse, mae))
}

/// Mean test-set errors for each method (one per alpha) at relative Gaussian
/// noise level `delta`. Image `k` gets noise seed `seed + k`, shared by all methods.
pub fn evaluate_testset(
    methods: &[&dyn Reconstructor],
    truths: &[Vec<f64>],
    clean_data: &[Vec<f64>],
    delta: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    if truths.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    check_len(truths.len(), clean_data.len())?;
    let noisy: Vec<Vec<f64>> = clean_data
        .iter()
        .enumerate()
        .map(|(k, y)| radon::relative_noise(y, delta, seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::default();
    for method in methods {
        let (mut mse, mut mae) = (0.0, 0.0);
        for (truth, y) in truths.iter().zip(&noisy) {
            let (e2, e1) = image_errors(&method.reconstruct(y)?, truth)?;
            mse += e2;
            mae += e1;
        }
        let k = truths.len() as f64;
        report.alpha_rows.push(AlphaRow { alpha: method.alpha(), kept: method.kept(), mse: mse / k, mae: mae / k });
    }
    report.alpha_rows.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{FilterRegularizer, RegularizingFilter};
    use crate::linop::DEFAULT_RANK_TOL;
    use std::sync::Arc;

    fn op() -> Arc<SvdOperator> {
        // diagonal operator with a one-dimensional kernel
        let s = [2.0, 1.0, 0.5, 0.1, 0.0];
        let mut m = vec![0.0; 25];
        for (i, v) in s.iter().enumerate() {
            m[i * 5 + i] = *v;
        }
        Arc::new(SvdOperator::decompose(m, 5, 5, DEFAULT_RANK_TOL).unwrap())
    }

    fn classical(alpha: f64) -> ReconstructionMethod {
        ReconstructionMethod::classical(
            FilterRegularizer::new(op(), RegularizingFilter::truncated_svd(), alpha).unwrap(),
        )
    }

    #[test]
    fn source_representable_has_zero_distance() {
        let sc = SourceCondition::new(0.5, 1.0).unwrap();
        let omega = [0.3, -0.2, 0.4, 0.1, 0.7];
        let x = op().power_apply(&omega, 0.5).unwrap();
        let d = distance_function(&classical(0.01), &x, sc).unwrap();
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn kernel_element_keeps_full_distance() {
        let sc = SourceCondition::new(1.0, 10.0).unwrap();
        let x = [0.0, 0.0, 0.0, 0.0, 0.8];
        let d = distance_function(&classical(0.01), &x, sc).unwrap();
        assert!((d - 0.8).abs() < 1e-14);
    }

    #[test]
    fn distance_decreases_with_radius() {
        let x = [1.0, 1.0, 1.0, 1.0, 0.2];
        let mut last = f64::INFINITY;
        for rho in [0.01, 0.1, 1.0, 10.0, 1e3] {
            let d = distance_to_source_set(&op(), &x, SourceCondition::new(1.0, rho).unwrap()).unwrap();
            assert!(d <= last + 1e-15);
            last = d;
        }
        assert!((last - 0.2).abs() < 1e-12);
    }

    #[test]
    fn param_choice_values() {
        let half = SourceCondition::new(0.5, 1.0).unwrap();
        assert!((param_choice(1e-4, half, 1.0).unwrap() - 1e-4).abs() < 1e-18);
        let one = SourceCondition::new(1.0, 1.0).unwrap();
        assert!((param_choice(1e-3, one, 1.0).unwrap() - 1e-2).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for d in [1e-1, 1e-2, 1e-3, 1e-4] {
            let a = param_choice(d, one, 1.0).unwrap();
            assert!(a < last);
            last = a;
        }
        assert!(param_choice(0.0, one, 1.0).is_err());
    }

    #[test]
    fn loglog_fit() {
        let xs = [1.0, 10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope - 0.7).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(matches!(fit_loglog(&xs[..2], &ys[..2]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn rate_experiment_rejects_short_sweeps_and_separates_noiseless() {
        let sc = SourceCondition::new(0.5, 1.0).unwrap();
        let x = source_element(&op(), sc, 1).unwrap();
        let f = |a: f64| Ok(classical(a));
        assert!(matches!(rate_experiment(&f, &op(), &x, sc, 1.0, &[1e-2, 1e-3], 0), Err(Error::DegenerateFit(_))));
        let r = rate_experiment(&f, &op(), &x, sc, 1.0, &[1e-1, 1e-2, 0.0, 1e-3], 0).unwrap();
        assert_eq!(r.rate_rows.len(), 3);
        assert_eq!(r.noiseless_rows.len(), 1);
        assert!(r.noiseless_rows[0].error < 1e-12);
    }

    #[test]
    fn rescaling_and_errors() {
        assert_eq!(rescale_unit(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(rescale_unit(&[1.0, 1.0]), vec![0.0, 0.0]);
        let t = [0.0, 0.5, 1.0];
        assert_eq!(image_errors(&t, &t).unwrap(), (0.0, 0.0));
        let scaled: Vec<f64> = t.iter().map(|v| 3.0 * v - 7.0).collect();
        assert_eq!(image_errors(&scaled, &t).unwrap(), (0.0, 0.0));
    }

    struct Oracle {
        truths: Vec<Vec<f64>>,
        data: Vec<Vec<f64>>,
    }

    impl Reconstructor for Oracle {
        fn alpha(&self) -> f64 {
            1.0
        }
        fn kept(&self) -> usize {
            0
        }
        fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
            // noise-free lookup; delta = 0 keeps data identical
            let k = self.data.iter().position(|d| d.as_slice() == y).unwrap();
            Ok(self.truths[k].clone())
        }
    }

    #[test]
    fn identity_oracle_has_zero_error() {
        let truths = vec![vec![0.0, 0.2, 1.0], vec![0.5, 0.0, 0.9]];
        let data = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let oracle = Oracle { truths: truths.clone(), data: data.clone() };
        let r = evaluate_testset(&[&oracle], &truths, &data, 0.0, 0).unwrap();
        assert_eq!(r.alpha_rows[0].mse, 0.0);
        assert_eq!(r.alpha_rows[0].mae, 0.0);
        assert!(evaluate_testset(&[&oracle], &[], &[], 0.0, 0).is_err());
    }

    #[test]
    fn duplicated_test_image_keeps_the_mean() {
        let m = classical(0.2);
        let truth = vec![0.1, 0.9, 0.3, 0.0, 1.0];
        let y = m.operator().apply_forward(&truth).unwrap();
        let one = evaluate_testset(&[&m], std::slice::from_ref(&truth), std::slice::from_ref(&y), 0.0, 0).unwrap();
        let many = evaluate_testset(&[&m], &vec![truth; 4], &vec![y; 4], 0.0, 0).unwrap();
        assert!((one.alpha_rows[0].mse - many.alpha_rows[0].mse).abs() < 1e-15);
    }

    #[test]
    fn bound_terms_vanish_for_exact_recovery() {
        let sc = SourceCondition::new(0.5, 1.0).unwrap();
        let x = op().power_apply(&[0.1, 0.2, 0.3, 0.4, 0.5], 0.5).unwrap();
        let m = classical(0.001);
        let y = m.operator().apply_forward(&x).unwrap();
        let t = error_bound_terms(&m, &x, &y, 0.0, sc, 0.0, 1.0).unwrap();
        assert!(t.lhs < 1e-12 && t.dist_term < 1e-10 && t.noise_term == 0.0 && t.a3_term == 0.0);
        assert!(t.holds());
        assert!(error_bound_terms(&m, &x, &y, -1.0, sc, 0.0, 1.0).is_err());
        let tik =
            ReconstructionMethod::classical(FilterRegularizer::new(op(), RegularizingFilter::tikhonov(), 0.1).unwrap());
        let deep = SourceCondition::new(2.0, 1.0).unwrap();
        assert!(matches!(error_bound_terms(&tik, &x, &y, 0.0, deep, 0.0, 1.0), Err(Error::Precondition(_))));
    }
}
