//! Special functions for the SSR F-test: ln-gamma, the regularized
//! incomplete beta function (continued fraction), and the F upper tail.

/// ln Γ(z) for z > 0, Lanczos approximation (Numerical Recipes coefficients).
pub fn ln_gamma(z: f64) -> f64 {
    let coeffs = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let x = z;
    let mut tmp = x + 5.5;
    tmp -= (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for (i, c) in coeffs.iter().enumerate() {
        ser += c / (x + 1.0 + i as f64);
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Continued fraction for the incomplete beta function, modified Lentz method.
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-14;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Upper-tail probability of an F(d1, d2) statistic:
/// p = I_x(d2/2, d1/2) with x = d2 / (d2 + d1 * F).
pub fn f_pvalue(f: f64, d1: usize, d2: usize) -> f64 {
    debug_assert!(d1 >= 1 && d2 >= 1);
    if f <= 0.0 {
        return 1.0;
    }
    let d1 = d1 as f64;
    let d2 = d2 as f64;
    let x = d2 / (d2 + d1 * f);
    reg_inc_beta(d2 / 2.0, d1 / 2.0, x).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-10);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn zero_statistic_gives_p_one() {
        assert_eq!(f_pvalue(0.0, 3, 10), 1.0);
    }

    #[test]
    fn f_of_one_with_equal_df_is_median() {
        for d in [2, 5, 10, 40] {
            assert!((f_pvalue(1.0, d, d) - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_tail_value() {
        // F = 4.26, d1 = 2, d2 = 20 -> p ~ 0.0288
        let p = f_pvalue(4.26, 2, 20);
        assert!((p - 0.0288).abs() < 2e-4, "p = {p}");
    }

    #[test]
    fn p_monotone_in_f() {
        let mut last = 1.0;
        let mut f = 0.0;
        while f < 20.0 {
            let p = f_pvalue(f, 3, 25);
            assert!(p <= last + 1e-15);
            last = p;
            f += 0.25;
        }
    }
}
