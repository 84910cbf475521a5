//! Independent numerical oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regnets::network::{batch_loss, NetworkParams, OutputProjection, TrainingSample};
use regnets::radon::{kb_value, RadonGeometry};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Line integral of the blob profile at offset `s`, integrated numerically along the chord.
pub fn kb_line_quadrature(s: f64, a: f64, rho: f64) -> f64 {
    if s.abs() >= a {
        return 0.0;
    }
    let half = (a * a - s * s).sqrt();
    adaptive_simpson(&|t: f64| kb_value((s * s + t * t).sqrt(), a, rho), -half, half, 1e-15)
}

/// Line integral of `sum_i c_i phi(x - x_i)` along `{x : <x, (cos t, sin t)> = s}`,
/// split at every blob boundary crossing.
pub fn continuous_radon(geom: &RadonGeometry, coeffs: &[f64], s: f64, theta: f64) -> f64 {
    let (c, sn) = (theta.cos(), theta.sin());
    let a = geom.kb_support;
    let mut breaks = Vec::new();
    for i in 0..geom.cols() {
        let (x, y) = geom.center(i);
        let d = s - (x * c + y * sn);
        if d.abs() < a {
            let t0 = -x * sn + y * c;
            let h = (a * a - d * d).sqrt();
            breaks.push(t0 - h);
            breaks.push(t0 + h);
        }
    }
    if breaks.is_empty() {
        return 0.0;
    }
    breaks.sort_by(f64::total_cmp);
    let f = |t: f64| {
        let (px, py) = (s * c - t * sn, s * sn + t * c);
        (0..geom.cols())
            .map(|i| {
                let (x, y) = geom.center(i);
                coeffs[i] * kb_value(((px - x).powi(2) + (py - y).powi(2)).sqrt(), a, geom.kb_shape)
            })
            .sum::<f64>()
    };
    breaks.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-13)).sum()
}

/// Random `rows x cols` matrix with prescribed singular values (padded with zeros).
pub fn matrix_with_spectrum(rows: usize, cols: usize, sigma: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let orth = |n: usize, rng: &mut ChaCha8Rng| {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m.qr().q()
    };
    let u = orth(rows, rng);
    let v = orth(cols, rng);
    let mut s = DMatrix::zeros(rows, cols);
    for (i, &x) in sigma.iter().enumerate() {
        s[(i, i)] = x;
    }
    let a = u * s * v.transpose();
    (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect()
}

/// `(A^T A)^mu` from a symmetric eigendecomposition, eigenvalues below
/// `rank_tol * max` treated as zero.
pub fn gram_power(matrix: &[f64], rows: usize, cols: usize, mu: f64, rank_tol: f64) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(rows, cols, matrix);
    let eig = SymmetricEigen::new(a.transpose() * &a);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lam = eig.eigenvalues.map(|l| if l > (rank_tol * top.sqrt()).powi(2) { l.powf(mu) } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose()
}

/// `min ||r - M w||` over `||w|| <= rho` by accelerated projected gradient,
/// run until the projected-gradient step is below `tol`.
pub fn projected_gradient_distance(m: &DMatrix<f64>, r: &[f64], rho: f64, tol: f64) -> f64 {
    let r = DVector::from_column_slice(r);
    let lip = SymmetricEigen::new(m.transpose() * m).eigenvalues.iter().cloned().fold(0.0, f64::max);
    let project = |w: DVector<f64>| {
        let n = w.norm();
        if n > rho {
            w * (rho / n)
        } else {
            w
        }
    };
    let grad = |w: &DVector<f64>| m.transpose() * (m * w - &r);
    let mut w = DVector::zeros(m.ncols());
    let mut z = w.clone();
    let mut t = 1.0f64;
    for _ in 0..5_000_000 {
        let next = project(&z - grad(&z) / lip);
        let step = project(&next - grad(&next) / lip) - &next;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &w) * ((t - 1.0) / t_next);
        w = next;
        t = t_next;
        if step.norm() <= tol {
            break;
        }
    }
    (&r - m * w).norm()
}

/// Mutable reference to parameter `index` in the flattened layout (weights then biases per layer).
pub fn param_mut(params: &mut NetworkParams, mut index: usize) -> &mut f64 {
    for layer in &mut params.layers {
        if index < layer.weights.len() {
            return &mut layer.weights[index];
        }
        index -= layer.weights.len();
        if index < layer.bias.len() {
            return &mut layer.bias[index];
        }
        index -= layer.bias.len();
    }
    panic!("parameter index out of range")
}

/// Central finite difference of the batch loss with respect to one parameter.
pub fn finite_difference(
    params: &NetworkParams,
    batch: &[TrainingSample],
    projection: &dyn OutputProjection,
    index: usize,
    h: f64,
) -> f64 {
    let mut p = params.clone();
    let x0 = *param_mut(&mut p, index);
    *param_mut(&mut p, index) = x0 + h;
    let up = batch_loss(&p, batch, projection).unwrap();
    *param_mut(&mut p, index) = x0 - h;
    let down = batch_loss(&p, batch, projection).unwrap();
    (up - down) / (2.0 * h)
}

use std::sync::Arc;

use regnets::analysis::{error_bound_terms, BoundTerms, SourceCondition};
use regnets::linop::SvdOperator;
use regnets::network::{lipschitz_upper_bound, NetworkArch};
use regnets::radon::exact_norm_noise;
use regnets::{FilterRegularizer, ReconstructionMethod, RegularizingFilter, Variant};

/// One random admissible instance of the error estimate: random filter,
/// alpha, smoothness, network and noise of norm at most delta.
pub fn random_bound_instance(op: &Arc<SvdOperator>, side: usize, variant: Variant, seed: u64) -> BoundTerms {
    let mut r = rng(seed);
    let lambda_max = op.sigma_max().powi(2);
    let (filter, mu) = match r.gen_range(0..3) {
        0 => (RegularizingFilter::tikhonov(), r.gen_range(0.1..1.0)),
        1 => (RegularizingFilter::truncated_svd(), r.gen_range(0.1..2.0)),
        _ => (RegularizingFilter::landweber(1.0 / lambda_max).unwrap(), r.gen_range(0.1..2.0)),
    };
    let alpha = 10f64.powf(r.gen_range(-4.0..0.0)) * lambda_max;
    let reg = FilterRegularizer::new(op.clone(), filter, alpha).unwrap();
    let params = variant.is_learned().then(|| {
        let mut p =
            NetworkParams::init(NetworkArch::with_channels(side, &[4], r.gen_bool(0.5)).unwrap(), r.gen()).unwrap();
        p.layers[1].bias[0] = r.gen_range(-0.2..0.2);
        p
    });
    let lipschitz = params.as_ref().map(|p| lipschitz_upper_bound(p).unwrap()).unwrap_or(0.0);
    let method = ReconstructionMethod::new(variant, reg, params).unwrap();
    let x = uniform_vec(op.cols(), &mut r);
    let delta = 10f64.powf(r.gen_range(-4.0..-1.0));
    let noise_norm = delta * r.gen_range(0.0..1.0);
    let ax = op.apply_forward(&x).unwrap();
    let noise = exact_norm_noise(op.rows(), noise_norm, r.gen()).unwrap();
    let y: Vec<f64> = ax.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let sc = SourceCondition::new(mu, r.gen_range(0.01..2.0)).unwrap();
    let constant = filter.qualification_constant(mu).unwrap();
    error_bound_terms(&method, &x, &y, delta, sc, lipschitz, constant).unwrap()
}
