//! Special functions backing the scores and test statistics: log-gamma,
//! the regularized incomplete gamma function, the chi-square(1) survival
//! function, and normal / Student-t(4) quantiles.
//!
//! Everything here is hand-rolled from standard constructions (Lanczos
//! series, incomplete-gamma series + Lentz continued fraction, an algebraic
//! closed form for the t(4) quantile) so the crate carries no numeric
//! dependencies and results are bit-stable across platforms.

// reference constants are kept at their published precision
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LANCZOS_G: f64 = 7.0;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for x > 0.
///
/// Relative error is below 1e-13 over the range used by the scores
/// (arguments up to alpha + beta + n).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // Reflection keeps the Lanczos argument away from zero.
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function P(a, x), for a > 0, x >= 0.
///
/// Series expansion for x < a + 1, Lentz continued fraction for the upper
/// tail otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_cf(a, x)
    }
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_cf(a, x)
    }
}

/// P(a, x) by the standard series x^a e^-x / Gamma(a) * sum x^n / (a)_n+1.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * sum
}

/// Q(a, x) by the Lentz-evaluated continued fraction.
fn upper_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// Complementary error function, via erfc(x) = Q(1/2, x^2).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x == 0.0 {
        1.0
    } else {
        gamma_q(0.5, x * x)
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile (inverse CDF) for p in (0, 1).
///
/// Bisection to a safe bracket followed by Newton polish against
/// [`normal_cdf`]; accurate to full double precision away from the extreme
/// tails.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1), got {p}");
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = 0.0;
    for _ in 0..60 {
        x = 0.5 * (lo + hi);
        if normal_cdf(x) < p {
            lo = x;
        } else {
            hi = x;
        }
    }
    // Newton refinement; the bracket start is already within ~1e-17 of the
    // root in absolute terms, so a handful of steps saturates precision.
    for _ in 0..4 {
        let f = normal_cdf(x) - p;
        let d = normal_pdf(x);
        if d <= 0.0 {
            break;
        }
        let step = f / d;
        x -= step;
        if step.abs() < 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Survival function of the chi-square distribution with one degree of
/// freedom: P(X > x) = Q(1/2, x/2).
pub fn chi2_sf_1df(x: f64) -> f64 {
    assert!(x >= 0.0, "chi-square statistic must be nonnegative, got {x}");
    gamma_q(0.5, 0.5 * x)
}

/// Quantile of the Student-t distribution with 4 degrees of freedom.
///
/// Uses the algebraic closed form available at nu = 4:
/// with q = 4 p (1 - p), the quantile is
/// `sign(p - 1/2) * 2 * sqrt(cos(arccos(sqrt(q)) / 3) / sqrt(q) - 1)`.
pub fn t4_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t4_quantile requires p in (0,1), got {p}");
    if p == 0.5 {
        return 0.0;
    }
    let q = 4.0 * p * (1.0 - p);
    let sq = q.sqrt();
    let magnitude = 2.0 * ((sq.acos() / 3.0).cos() / sq - 1.0).sqrt();
    if p > 0.5 {
        magnitude
    } else {
        -magnitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_integers_and_halves() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24.0_f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(0.5), PI.sqrt().ln(), max_relative = 1e-13);
        assert_relative_eq!(
            ln_gamma(1.5),
            (PI.sqrt() / 2.0).ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn ln_gamma_frozen_values() {
        // mpmath, 25 digits of working precision.
        let cases = [
            (0.1, 2.252712651734206),
            (0.7, 0.26086724653166651),
            (3.2, 0.88540482715490895),
            (12.5, 18.734347511936446),
            (171.0, 706.57306224578735),
            (5007.5, 37646.510137347555),
        ];
        for (x, want) in cases {
            assert_relative_eq!(ln_gamma(x), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn incomplete_gamma_complements() {
        for &(a, x) in &[(0.5, 0.3), (0.5, 4.0), (2.0, 1.0), (7.5, 11.0)] {
            assert_relative_eq!(gamma_p(a, x) + gamma_q(a, x), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn erfc_frozen_values() {
        // mpmath erfc.
        let cases = [
            (0.1, 0.88753708398171511),
            (0.5, 0.47950012218695346),
            (1.0, 0.15729920705028513),
            (2.0, 0.0046777349810472658),
            (3.0, 2.2090496998585441e-5),
        ];
        for (x, want) in cases {
            assert_relative_eq!(erfc(x), want, max_relative = 1e-12);
            assert_relative_eq!(erfc(-x), 2.0 - want, max_relative = 1e-12);
        }
    }

    #[test]
    fn normal_quantile_frozen_values() {
        assert_relative_eq!(normal_quantile(0.975), 1.959963984540054, max_relative = 1e-12);
        assert_relative_eq!(normal_quantile(0.99), 2.3263478740408408, max_relative = 1e-12);
        assert_relative_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            normal_quantile(0.025),
            -1.959963984540054,
            max_relative = 1e-12
        );
    }

    #[test]
    fn normal_quantile_round_trips_cdf() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert_relative_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-13);
        }
    }

    #[test]
    fn chi2_sf_frozen_values() {
        // 95% critical value of chi-square(1).
        assert_relative_eq!(chi2_sf_1df(3.841458820694124), 0.05, max_relative = 1e-12);
        assert_relative_eq!(chi2_sf_1df(0.0), 1.0, epsilon = 0.0);
        assert_relative_eq!(
            chi2_sf_1df(6.666666666666667),
            0.009823274507519248,
            max_relative = 1e-12
        );
    }

    #[test]
    fn t4_quantile_frozen_values() {
        assert_relative_eq!(t4_quantile(0.975), 2.7764451051977944, max_relative = 1e-12);
        assert_relative_eq!(t4_quantile(0.99), 3.7469473879791968, max_relative = 1e-12);
        assert_relative_eq!(t4_quantile(0.6), 0.27072229470759742, max_relative = 1e-12);
        assert_relative_eq!(t4_quantile(0.5), 0.0, epsilon = 0.0);
        assert_relative_eq!(
            t4_quantile(0.01),
            -3.7469473879791968,
            max_relative = 1e-12
        );
    }
}
