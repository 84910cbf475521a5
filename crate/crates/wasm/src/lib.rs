//! Browser bindings: filter curves, the blob basis function and a small
//! phantom to sinogram to filtered-SVD reconstruction loop.

use std::sync::Arc;

use regnets::filters::SpectralFilter;
use regnets::radon::{self, PhantomSpec, RadonGeometry};
use regnets::{FilterRegularizer, RegularizingFilter, SvdOperator};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `lambda g_alpha(lambda)` on `points` equidistant samples of `[0, 1]`.
pub fn filter_response(kind: &str, alpha: f64, points: usize) -> Result<Vec<f64>, regnets::Error> {
    let filter = RegularizingFilter::parse(kind, 1.0)?;
    filter.filter_value(alpha, 1.0)?;
    let n = points.max(2);
    Ok((0..n)
        .map(|i| {
            let lambda = i as f64 / (n - 1) as f64;
            lambda * filter.value(alpha, lambda)
        })
        .collect())
}

#[wasm_bindgen]
pub fn filter_curve(kind: &str, alpha: f64, points: usize) -> Result<Vec<f64>, JsError> {
    filter_response(kind, alpha, points).map_err(js)
}

/// Radial profile of a unit-support blob followed by its line integrals,
/// both sampled at `points` offsets in `[0, 1]`.
#[wasm_bindgen]
pub fn blob_profile(shape: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    let r = |i: usize| i as f64 / (n - 1) as f64;
    let values = (0..n).map(|i| radon::kb_value(r(i), 1.0, shape));
    let projections = (0..n).map(|i| radon::kb_line_integral(r(i), 1.0, shape));
    values.chain(projections).collect()
}

/// A small sparse-angle problem with one phantom and one noisy sinogram.
#[wasm_bindgen]
pub struct Demo {
    geom: RadonGeometry,
    matrix: Vec<f64>,
    op: Arc<SvdOperator>,
    phantom: Vec<f64>,
    clean: Vec<f64>,
    noisy: Vec<f64>,
}

impl Demo {
    pub fn build(side: usize, angles: usize, seed: u64) -> Result<Demo, regnets::Error> {
        if side > 48 {
            return Err(regnets::Error::InvalidArgument("side is capped at 48 in the browser".into()));
        }
        let geom = RadonGeometry::new(side, angles, side);
        let matrix = radon::assemble_matrix(&geom)?;
        let op = Arc::new(SvdOperator::decompose(
            matrix.clone(),
            geom.rows(),
            geom.cols(),
            regnets::linop::DEFAULT_RANK_TOL,
        )?);
        let mut demo = Demo { geom, matrix, op, phantom: Vec::new(), clean: Vec::new(), noisy: Vec::new() };
        demo.load_phantom(seed)?;
        Ok(demo)
    }

    pub fn load_phantom(&mut self, seed: u64) -> Result<(), regnets::Error> {
        self.phantom = radon::gen_phantom(self.geom.side, seed, &PhantomSpec::default())?.coefficients;
        self.clean = radon::Sinogram::simulate(&self.geom, &self.matrix, &self.phantom)?.data;
        self.noisy = self.clean.clone();
        Ok(())
    }

    pub fn apply_noise(&mut self, delta: f64, seed: u64) -> Result<(), regnets::Error> {
        self.noisy = radon::relative_noise(&self.clean, delta, seed)?;
        Ok(())
    }

    pub fn reconstruction(&self, kind: &str, alpha: f64) -> Result<Vec<f64>, regnets::Error> {
        let filter = RegularizingFilter::parse(kind, self.op.sigma_max().powi(2))?;
        FilterRegularizer::new(self.op.clone(), filter, alpha)?.apply(&self.noisy)
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(side: usize, angles: usize, seed: u32) -> Result<Demo, JsError> {
        Demo::build(side, angles, seed.into()).map_err(js)
    }

    pub fn side(&self) -> usize {
        self.geom.side
    }

    pub fn angles(&self) -> usize {
        self.geom.angles
    }

    pub fn detectors(&self) -> usize {
        self.geom.detectors
    }

    #[wasm_bindgen(js_name = newPhantom)]
    pub fn new_phantom(&mut self, seed: u32) -> Result<(), JsError> {
        self.load_phantom(seed.into()).map_err(js)
    }

    #[wasm_bindgen(js_name = setNoise)]
    pub fn set_noise(&mut self, delta: f64, seed: u32) -> Result<(), JsError> {
        self.apply_noise(delta, seed.into()).map_err(js)
    }

    pub fn phantom(&self) -> Vec<f64> {
        self.phantom.clone()
    }

    /// Noisy sinogram, angle-major.
    pub fn sinogram(&self) -> Vec<f64> {
        self.noisy.clone()
    }

    #[wasm_bindgen(js_name = singularValues)]
    pub fn singular_values(&self) -> Vec<f64> {
        self.op.singular_values()[..self.op.rank()].to_vec()
    }

    pub fn kept(&self, alpha: f64) -> usize {
        self.op.count_at_least(alpha)
    }

    pub fn reconstruct(&self, kind: &str, alpha: f64) -> Result<Vec<f64>, JsError> {
        self.reconstruction(kind, alpha).map_err(js)
    }

    /// `||x - phantom|| / ||phantom||`.
    #[wasm_bindgen(js_name = relativeError)]
    pub fn relative_error(&self, x: &[f64]) -> f64 {
        regnets::distance(x, &self.phantom) / regnets::l2_norm(&self.phantom).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_curves_stay_in_unit_interval() {
        for kind in ["tikhonov", "tsvd", "landweber"] {
            let c = filter_response(kind, 0.1, 101).unwrap();
            assert_eq!(c.len(), 101);
            assert_eq!(c[0], 0.0);
            assert!(c.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)), "{kind}");
        }
        let tsvd = filter_response("tsvd", 0.25, 5).unwrap();
        assert_eq!(tsvd, vec![0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(filter_response("median", 0.1, 10).is_err());
        assert!(filter_response("tsvd", -1.0, 10).is_err());
    }

    #[test]
    fn blob_profile_layout() {
        let p = blob_profile(7.0, 11);
        assert_eq!(p.len(), 22);
        assert!((p[0] - 1.0).abs() < 1e-14);
        assert_eq!(p[10], radon::kb_value(1.0, 1.0, 7.0));
        assert_eq!(p[21], 0.0);
        assert!(p[11] > p[12]);
    }

    #[test]
    fn tsvd_demo_improves_with_alpha_range() {
        let mut d = Demo::build(12, 8, 3).unwrap();
        let exact = d.reconstruction("tsvd", 1e-12).unwrap();
        let lam = d.op.sigma_max().powi(2);
        let coarse = d.reconstruction("tsvd", 0.5 * lam).unwrap();
        assert!(d.relative_error(&exact) < d.relative_error(&coarse));
        d.apply_noise(0.05, 1).unwrap();
        assert_ne!(d.noisy, d.clean);
        assert!(d.kept(1e-12) >= d.kept(0.5 * lam));
        assert!(Demo::build(64, 8, 1).is_err());
    }
}
