//! Modified Bessel function of the first kind, evaluated in log space.

pub use statrs::function::gamma::ln_gamma;

const SERIES_TOL: f64 = 1e-16;
const HANKEL_TOL: f64 = 1e-16;
const RESCALE: f64 = 1e250;

/// `ln I_nu(x) - x` for `nu > -1`, `x >= 0`.
///
/// The exponentially scaled form lets callers cancel the `e^x` growth against
/// other exponentials before leaving log space.
pub fn ln_bessel_i_scaled(nu: f64, x: f64) -> f64 {
    debug_assert!(nu > -1.0, "order must exceed -1");
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x > 30f64.max(2.0 * nu) {
        if let Some(v) = hankel_scaled(nu, x) {
            return v;
        }
    }
    series(nu, x) - x
}

/// `ln I_nu(x)`.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    ln_bessel_i_scaled(nu, x) + x
}

pub fn bessel_i(nu: f64, x: f64) -> f64 {
    ln_bessel_i(nu, x).exp()
}

// Ascending series  sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)); every term is positive.
fn series(nu: f64, x: f64) -> f64 {
    let quarter_x2 = 0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut log_scale = 0.0f64;
    let mut k = 0.0f64;
    loop {
        let ratio = quarter_x2 / ((k + 1.0) * (k + 1.0 + nu));
        term *= ratio;
        sum += term;
        k += 1.0;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += RESCALE.ln();
        }
        // once the ratio drops below one the tail is bounded by a geometric series
        let next = quarter_x2 / ((k + 1.0) * (k + 1.0 + nu));
        if next < 1.0 && term * next / (1.0 - next) <= SERIES_TOL * sum {
            break;
        }
        if k > 1e7 {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + sum.ln() + log_scale
}

// Large-argument expansion
//   I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k.
// Returns None when the asymptotic terms stop shrinking before reaching the tolerance.
fn hankel_scaled(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..64 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() > term.abs() && next != 0.0 {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() <= HANKEL_TOL * sum.abs() {
            if sum <= 0.0 {
                return None;
            }
            return Some(sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * x).ln());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn half_integer_orders_have_closed_forms() {
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x,  I_{-1/2}(x) = sqrt(2/(pi x)) cosh x
        for &x in &[1e-3, 0.1, 1.0, 5.0, 20.0, 29.0, 31.0, 80.0, 300.0] {
            let c = (2.0 / (std::f64::consts::PI * x)).sqrt();
            let lhs = ln_bessel_i(0.5, x);
            // ln sinh x, stable for large x
            let ln_sinh = x + (-(-2.0 * x).exp_m1() / 2.0).ln();
            assert!((lhs - (c.ln() + ln_sinh)).abs() < 1e-12, "x={x}");
            let ln_cosh = x + ((1.0 + (-2.0 * x).exp()) / 2.0).ln();
            assert!((ln_bessel_i(-0.5, x) - (c.ln() + ln_cosh)).abs() < 1e-12, "x={x}");
            // I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
            let i32 = c * (x.cosh() - x.sinh() / x);
            if i32.is_finite() && x > 0.05 {
                assert!(rel(bessel_i(1.5, x), i32) < 1e-10, "x={x}");
            }
        }
    }

    #[test]
    fn integer_order_reference_values() {
        // Abramowitz & Stegun table 9.8
        assert!(rel(bessel_i(0.0, 1.0), 1.266_065_877_752_008_4) < 1e-14);
        assert!(rel(bessel_i(1.0, 1.0), 0.565_159_103_992_485) < 1e-14);
        assert!(rel(bessel_i(2.0, 2.0), 0.688_948_447_698_738_2) < 1e-14);
        assert!(rel(bessel_i(0.0, 50.0), 2.932_553_783_849_336e20) < 1e-12);
    }

    #[test]
    fn branches_agree_across_switch() {
        for &nu in &[0.0, 0.3, 1.0, 2.4, 7.5] {
            for &x in &[30.5, 40.0, 60.0] {
                let s = series(nu, x) - x;
                let h = hankel_scaled(nu, x).unwrap();
                assert!((s - h).abs() < 1e-12, "nu={nu} x={x}: {s} vs {h}");
            }
        }
    }

    #[test]
    fn recurrence_holds() {
        // I_{nu-1}(x) - I_{nu+1}(x) = (2 nu / x) I_nu(x)
        for &nu in &[1.4, 2.4, 3.4, 12.0] {
            for &x in &[0.5, 3.0, 25.0, 45.0, 120.0] {
                let lhs = (ln_bessel_i_scaled(nu - 1.0, x).exp()) - (ln_bessel_i_scaled(nu + 1.0, x).exp());
                let rhs = 2.0 * nu / x * ln_bessel_i_scaled(nu, x).exp();
                assert!(rel(lhs, rhs) < 1e-10, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn large_order_falls_back_to_series() {
        // x barely above 2 nu: asymptotic series diverges, series path must answer
        let v = ln_bessel_i(40.0, 81.0);
        let s = series(40.0, 81.0);
        assert!((v - s).abs() < 1e-12);
    }

    #[test]
    fn zero_argument() {
        assert_eq!(ln_bessel_i(0.0, 0.0), 0.0);
        assert_eq!(ln_bessel_i(2.4, 0.0), f64::NEG_INFINITY);
    }
}
