//! Modified Bessel function of the first kind, order zero.

/// Switch-over point between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 30.0;

/// `I_0(x)` to roughly 1e-15 relative accuracy for all finite `x`.
///
/// The power series has only positive terms, so it is summed directly for
/// `|x| <= 30`. Beyond that the Hankel asymptotic expansion is used, truncated
/// at its smallest term.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        i0_series(ax)
    } else {
        i0_asymptotic(ax)
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

fn i0_asymptotic(x: f64) -> f64 {
    // I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() <= 1e-17 * sum {
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    if x > 700.0 {
        // avoid overflow in the intermediate exponential
        let half = (0.5 * x).exp();
        half * (half * sum / (2.0 * std::f64::consts::PI * x).sqrt())
    } else {
        x.exp() * sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // reference values from standard tables
        let cases = [
            (0.0, 1.0),
            (1.0, 1.266_065_877_752_008_4),
            (2.0, 2.279_585_302_336_067_3),
            (7.0, 168.593_908_510_289_6),
            (10.0, 2_815.716_628_466_254),
        ];
        for (x, want) in cases {
            let got = bessel_i0(x);
            assert!(((got - want) / want).abs() < 1e-14, "I0({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn even_function() {
        assert_eq!(bessel_i0(-3.5), bessel_i0(3.5));
    }

    #[test]
    fn branches_agree_near_switch() {
        for x in [25.0, 30.0, 35.0, 40.0] {
            let a = i0_series(x);
            let b = i0_asymptotic(x);
            assert!(((a - b) / a).abs() < 1e-13, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        assert!(bessel_i0(700.0).is_finite());
        assert!(bessel_i0(710.0).is_finite());
    }
}
