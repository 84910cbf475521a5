//! Sparse-angle parallel-beam Radon transform in a Kaiser-Bessel blob basis,
//! random ellipse phantoms and the data noise models.
//!
//! The image is `f(x) = sum_i c_i phi(x - x_i)` with blob centers `x_i` at the
//! cell centers of an `N x N` grid on `[-1, 1]^2`. Coefficient `i = row * N + col`
//! sits at `(x, y) = (-1 + (col + 1/2) h, 1 - (row + 1/2) h)`, `h = 2/N`, so the
//! coefficient array displays upright as an image.
//!
//! Sinogram entry `N_s * j + n` holds the line integral at angle `theta_j`
//! and signed offset `s_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::special::bessel_i0;

#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    pub side: usize,
    pub angles: usize,
    pub detectors: usize,
    pub detector_min: f64,
    pub detector_max: f64,
    /// Blob support radius `a`.
    pub kb_support: f64,
    /// Blob shape parameter.
    pub kb_shape: f64,
}

impl RadonGeometry {
    /// 64 x 64 coefficients, 15 angles, 64 detectors.
    pub fn desk() -> Self {
        Self::new(64, 15, 64)
    }

    /// 128 x 128 coefficients, 30 angles, 200 detectors.
    pub fn paper_scale() -> Self {
        Self::new(128, 30, 200)
    }

    /// Geometry with the default detector interval `[-3/2, 3/2]` and blob
    /// parameters `a = 0.055`, shape 7.
    pub fn new(side: usize, angles: usize, detectors: usize) -> Self {
        Self { side, angles, detectors, detector_min: -1.5, detector_max: 1.5, kb_support: 0.055, kb_shape: 7.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.angles == 0 || self.detectors == 0 {
            return Err(Error::invalid("geometry counts must be positive"));
        }
        if !(self.kb_support > 0.0 && self.kb_shape > 0.0) {
            return Err(Error::invalid("blob support and shape must be positive"));
        }
        if !(self.detector_max >= self.detector_min) {
            return Err(Error::invalid("detector interval is empty"));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.angles * self.detectors
    }

    pub fn cols(&self) -> usize {
        self.side * self.side
    }

    /// `theta_j = j pi / N_theta`, `j = 0..N_theta`.
    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * std::f64::consts::PI / self.angles as f64
    }

    /// Equidistant offsets including both interval endpoints.
    pub fn offset(&self, n: usize) -> f64 {
        if self.detectors == 1 {
            return 0.5 * (self.detector_min + self.detector_max);
        }
        self.detector_min + (self.detector_max - self.detector_min) * n as f64 / (self.detectors - 1) as f64
    }

    pub fn center(&self, i: usize) -> (f64, f64) {
        let h = 2.0 / self.side as f64;
        let (row, col) = (i / self.side, i % self.side);
        (-1.0 + (col as f64 + 0.5) * h, 1.0 - (row as f64 + 0.5) * h)
    }
}

/// Blob profile `I0(rho sqrt(1 - (r/a)^2)) / I0(rho)` for `r <= a`, else 0.
pub fn kb_value(r: f64, a: f64, rho: f64) -> f64 {
    let r = r.abs();
    if r > a {
        return 0.0;
    }
    let t = r / a;
    bessel_i0(rho * (1.0 - t * t).max(0.0).sqrt()) / bessel_i0(rho)
}

/// Line integral of the blob along a line at distance `s` from its center.
///
/// With `w = sqrt(1 - (s/a)^2)` the chord integral of the order-zero blob is
/// `2 a sinh(rho w) / (rho I0(rho))`.
pub fn kb_line_integral(s: f64, a: f64, rho: f64) -> f64 {
    let t = s.abs() / a;
    if t >= 1.0 {
        return 0.0;
    }
    let w = (1.0 - t * t).sqrt();
    2.0 * a * (rho * w).sinh() / (rho * bessel_i0(rho))
}

/// Dense row-major system matrix, `rows = N_theta N_s`, `cols = N^2`.
pub fn assemble_matrix(geom: &RadonGeometry) -> Result<Vec<f64>> {
    geom.validate()?;
    let (rows, cols) = (geom.rows(), geom.cols());
    let a = geom.kb_support;
    let mut m = vec![0.0; rows * cols];
    let centers: Vec<(f64, f64)> = (0..cols).map(|i| geom.center(i)).collect();
    for j in 0..geom.angles {
        let (sin, cos) = geom.angle(j).sin_cos();
        for n in 0..geom.detectors {
            let s = geom.offset(n);
            let row = &mut m[(j * geom.detectors + n) * cols..][..cols];
            for (entry, &(x, y)) in row.iter_mut().zip(&centers) {
                let d = s - (x * cos + y * sin);
                if d.abs() < a {
                    *entry = kb_line_integral(d, a, geom.kb_shape);
                }
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub tilt: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.tilt.sin_cos();
        let p = (dx * c + dy * s) / self.axes.0;
        let q = (-dx * s + dy * c) / self.axes.1;
        p * p + q * q <= 1.0
    }
}

/// Distribution of random ellipse phantoms.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub min_ellipses: usize,
    pub max_ellipses: usize,
    pub intensity: (f64, f64),
    pub center_range: f64,
    pub axis_range: (f64, f64),
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self { min_ellipses: 5, max_ellipses: 10, intensity: (-0.5, 1.0), center_range: 0.7, axis_range: (0.05, 0.6) }
    }
}

impl PhantomSpec {
    pub fn empty() -> Self {
        Self { min_ellipses: 0, max_ellipses: 0, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.min_ellipses > self.max_ellipses {
            return Err(Error::invalid("min_ellipses exceeds max_ellipses"));
        }
        if !(self.intensity.0 <= self.intensity.1 && self.axis_range.0 > 0.0 && self.axis_range.0 <= self.axis_range.1)
        {
            return Err(Error::invalid("invalid phantom ranges"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub side: usize,
    pub coefficients: Vec<f64>,
    pub seed: u64,
    pub ellipses: Vec<Ellipse>,
}

/// Random superposition of ellipses sampled at the grid centers, clipped to `[0, 1]`.
pub fn gen_phantom(side: usize, seed: u64, spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    if side == 0 {
        return Err(Error::invalid("phantom side must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(spec.min_ellipses..=spec.max_ellipses);
    let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|_| Ellipse {
            center: (uniform(-spec.center_range, spec.center_range), uniform(-spec.center_range, spec.center_range)),
            axes: (uniform(spec.axis_range.0, spec.axis_range.1), uniform(spec.axis_range.0, spec.axis_range.1)),
            tilt: uniform(0.0, std::f64::consts::PI),
            intensity: uniform(spec.intensity.0, spec.intensity.1),
        })
        .collect();
    let geom = RadonGeometry::new(side, 1, 1);
    let coefficients = (0..side * side)
        .map(|i| {
            let (x, y) = geom.center(i);
            let v: f64 = ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum();
            v.clamp(0.0, 1.0)
        })
        .collect();
    Ok(Phantom { side, coefficients, seed, ellipses })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDescriptor {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub data: Vec<f64>,
    pub angles: usize,
    pub detectors: usize,
    pub noise: Option<NoiseDescriptor>,
}

impl Sinogram {
    pub fn new(data: Vec<f64>, angles: usize, detectors: usize) -> Result<Self> {
        check_len(angles * detectors, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Self { data, angles, detectors, noise: None })
    }

    /// Noise-free data `A c` for a given geometry's matrix.
    pub fn simulate(geom: &RadonGeometry, matrix: &[f64], coefficients: &[f64]) -> Result<Self> {
        check_len(geom.rows() * geom.cols(), matrix.len())?;
        check_len(geom.cols(), coefficients.len())?;
        let data = matrix.chunks_exact(geom.cols()).map(|row| crate::dot(row, coefficients)).collect();
        Self::new(data, geom.angles, geom.detectors)
    }
}

fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `y + delta ||y||_inf g` with i.i.d. standard normal `g`.
pub fn add_noise(y: &Sinogram, delta: f64, seed: u64) -> Result<Sinogram> {
    let data = relative_noise(&y.data, delta, seed)?;
    Ok(Sinogram { data, angles: y.angles, detectors: y.detectors, noise: Some(NoiseDescriptor { delta, seed }) })
}

/// Noisy copy of raw data, same model as [`add_noise`].
pub fn relative_noise(y: &[f64], delta: f64, seed: u64) -> Result<Vec<f64>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("noise level must be non-negative, got {delta}")));
    }
    let scale = delta * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = gaussian(y.len(), seed);
    Ok(y.iter().zip(&g).map(|(v, n)| v + scale * n).collect())
}

/// Seeded random direction scaled to Euclidean norm exactly `delta`.
pub fn exact_norm_noise(len: usize, delta: f64, seed: u64) -> Result<Vec<f64>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("noise level must be non-negative, got {delta}")));
    }
    let mut g = gaussian(len, seed);
    let n = crate::norm(&g);
    for v in &mut g {
        *v *= delta / n;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kb_center_and_edge() {
        assert_eq!(kb_value(0.0, 0.055, 7.0), 1.0);
        let edge = kb_value(0.055, 0.055, 7.0);
        assert!((edge - 1.0 / bessel_i0(7.0)).abs() < 1e-16);
        assert_eq!(kb_value(0.06, 0.055, 7.0), 0.0);
    }

    #[test]
    fn kb_half_radius_against_series() {
        // independent power series of I0 summed to convergence
        fn i0(x: f64) -> f64 {
            let mut t = 1.0;
            let mut s = 1.0;
            for k in 1..200 {
                t *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
                s += t;
            }
            s
        }
        let (a, rho) = (0.055, 7.0);
        let want = i0(rho * (1.0f64 - 0.25).sqrt()) / i0(rho);
        assert!((kb_value(a / 2.0, a, rho) - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn line_integral_symmetry_and_support() {
        let (a, rho) = (0.055, 7.0);
        assert_eq!(kb_line_integral(a, a, rho), 0.0);
        assert_eq!(kb_line_integral(-0.1, a, rho), 0.0);
        for s in [0.0, 0.01, 0.03, 0.05] {
            assert_eq!(kb_line_integral(s, a, rho), kb_line_integral(-s, a, rho));
        }
    }

    #[test]
    fn geometry_layout() {
        let g = RadonGeometry::new(4, 3, 5);
        assert_eq!(g.rows(), 15);
        assert_eq!(g.offset(0), -1.5);
        assert_eq!(g.offset(4), 1.5);
        assert_eq!(g.angle(0), 0.0);
        assert!((g.angle(2) - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
        assert_eq!(g.center(0), (-0.75, 0.75));
        assert_eq!(g.center(15), (0.75, -0.75));
        assert_eq!(RadonGeometry::paper_scale().rows(), 6000);
        assert_eq!(RadonGeometry::paper_scale().cols(), 16384);
    }

    #[test]
    fn blob_on_a_line_gets_peak_value() {
        // 1x1 grid: the single center is the origin, offset 0 passes through it
        let mut g = RadonGeometry::new(1, 2, 3);
        g.detector_min = -1.0;
        g.detector_max = 1.0;
        let m = assemble_matrix(&g).unwrap();
        let peak = kb_line_integral(0.0, g.kb_support, g.kb_shape);
        assert_eq!(m[1], peak);
        assert_eq!(m[4], peak);
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn far_blob_has_empty_angle_block() {
        // detectors only near s = 0 while the blob sits at x = 0.5 for theta = 0
        let mut g = RadonGeometry::new(2, 2, 4);
        g.detector_min = -0.01;
        g.detector_max = 0.01;
        let m = assemble_matrix(&g).unwrap();
        let cols = g.cols();
        for n in 0..g.detectors {
            for i in 0..cols {
                assert_eq!(m[n * cols + i], 0.0, "angle 0 row {n} col {i}");
            }
        }
    }

    #[test]
    fn point_symmetry_of_the_matrix() {
        // (theta, s) with center x equals (theta, -s) with center -x
        let g = RadonGeometry::new(6, 4, 9);
        let m = assemble_matrix(&g).unwrap();
        let cols = g.cols();
        for j in 0..g.angles {
            for n in 0..g.detectors {
                let mirror_n = g.detectors - 1 - n;
                for i in 0..cols {
                    let mirror_i = cols - 1 - i;
                    let a = m[(j * g.detectors + n) * cols + i];
                    let b = m[(j * g.detectors + mirror_n) * cols + mirror_i];
                    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let g = RadonGeometry::new(5, 3, 7);
        assert_eq!(assemble_matrix(&g).unwrap(), assemble_matrix(&g).unwrap());
    }

    #[test]
    fn phantoms() {
        let spec = PhantomSpec::default();
        let a = gen_phantom(16, 3, &spec).unwrap();
        assert_eq!(a, gen_phantom(16, 3, &spec).unwrap());
        assert!((5..=10).contains(&a.ellipses.len()));
        assert!(gen_phantom(16, 3, &PhantomSpec::empty()).unwrap().coefficients.iter().all(|&v| v == 0.0));
        for seed in 0..50 {
            let p = gen_phantom(16, seed, &spec).unwrap();
            assert!(p.coefficients.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_ne!(gen_phantom(16, 4, &spec).unwrap().coefficients, a.coefficients);
    }

    #[test]
    fn noise_models() {
        let y = Sinogram::new(vec![1.0, -2.0, 0.5, 0.0], 2, 2).unwrap();
        assert_eq!(add_noise(&y, 0.0, 1).unwrap().data, y.data);
        let zero = Sinogram::new(vec![0.0; 4], 2, 2).unwrap();
        assert_eq!(add_noise(&zero, 0.05, 1).unwrap().data, zero.data);
        let noisy = add_noise(&y, 0.05, 1).unwrap();
        assert_eq!(noisy.noise, Some(NoiseDescriptor { delta: 0.05, seed: 1 }));
        assert!(add_noise(&y, -1.0, 1).is_err());
        let z = exact_norm_noise(100, 0.3, 7).unwrap();
        assert!((crate::norm(&z) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn relative_noise_scale() {
        // ||y_delta - y||_inf / ||y||_inf = delta max|g|, with max|g| of 960
        // standard normals concentrated around 3.2
        let y = Sinogram::new((0..960).map(|i| (i as f64 * 0.01).sin()).collect(), 15, 64).unwrap();
        let ymax = y.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut ratios = Vec::new();
        for seed in 0..100 {
            let n = add_noise(&y, 0.05, seed).unwrap();
            let dev = n.data.iter().zip(&y.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ratios.push(dev / ymax / 0.05);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((2.8..3.7).contains(&mean), "{mean}");
    }
}
