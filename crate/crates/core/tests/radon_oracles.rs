mod support;

use rand::Rng;
use regnets::radon::{assemble_matrix, kb_line_integral, RadonGeometry};
use support::{continuous_radon, kb_line_quadrature, rng};

#[test]
fn closed_form_blob_projection_matches_quadrature() {
    let mut r = rng(3);
    for (a, shape) in [(0.055, 7.0), (1.0, 2.0), (0.3, 10.4)] {
        for _ in 0..200 {
            let s = r.gen_range(-a..a);
            let exact = kb_line_quadrature(s, a, shape);
            let closed = kb_line_integral(s, a, shape);
            assert!((closed - exact).abs() <= 1e-6 * exact.abs(), "s={s}: {closed} vs {exact}");
        }
    }
}

#[test]
fn matrix_rows_match_continuous_line_integrals() {
    let geom = RadonGeometry::new(8, 7, 33);
    let m = assemble_matrix(&geom).unwrap();
    let mut r = rng(11);
    let coeffs: Vec<f64> = (0..geom.cols()).map(|_| r.gen_range(0.1..1.0)).collect();
    let mut checked = 0;
    for row in 0..geom.rows() {
        let (j, n) = (row / geom.detectors, row % geom.detectors);
        let discrete: f64 = m[row * geom.cols()..][..geom.cols()].iter().zip(&coeffs).map(|(a, c)| a * c).sum();
        let continuous = continuous_radon(&geom, &coeffs, geom.offset(n), geom.angle(j));
        if continuous.abs() < 1e-12 {
            assert!(discrete.abs() < 1e-12);
            continue;
        }
        assert!((discrete - continuous).abs() <= 1e-5 * continuous.abs(), "row {row}: {discrete} vs {continuous}");
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn small_radon_singular_pairs_are_consistent() {
    // repeated singular values and zero rows; an older faer release returned wrong vectors here
    let geom = RadonGeometry::new(8, 5, 12);
    let op = regnets::SvdOperator::decompose(assemble_matrix(&geom).unwrap(), geom.rows(), geom.cols(), 1e-10).unwrap();
    for n in 0..op.rank() {
        let au = op.apply_forward(op.image_vector(n)).unwrap();
        let err =
            regnets::distance(&au, &op.data_vector(n).iter().map(|v| v * op.singular_values()[n]).collect::<Vec<_>>());
        assert!(err <= 1e-12, "pair {n}: {err}");
    }
}
