//! Scalar helpers. Everything funnels through `libm` so the core stays
//! `no_std` and deterministic.

use crate::C64;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn tan(x: f64) -> f64 {
    libm::tan(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}
#[inline]
pub fn atanh(x: f64) -> f64 {
    libm::atanh(x)
}
#[inline]
pub fn cosh(x: f64) -> f64 {
    libm::cosh(x)
}
#[inline]
pub fn sinh(x: f64) -> f64 {
    libm::sinh(x)
}
#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}
#[inline]
pub fn acos(x: f64) -> f64 {
    libm::acos(x)
}

pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}
#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `e^{i theta}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(cos(theta), sin(theta))
}

/// `ln n!`
pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `n!` as a float. Exact up to 22!, rounded beyond.
pub fn factorial(n: usize) -> f64 {
    if n <= 22 {
        (1..=n).fold(1.0, |acc, k| acc * k as f64)
    } else {
        exp(ln_factorial(n))
    }
}

/// `ln C(n, k)` via log-gamma; no overflow for large `n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Binomial thinning weight `C(m, n) p^n (1-p)^(m-n)`, exact at `p = 0, 1`.
pub fn binomial_pmf(m: usize, n: usize, p: f64) -> f64 {
    if n > m {
        return 0.0;
    }
    if p <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    // direct products are accurate to a few ulps while nothing underflows
    if m <= 170 {
        let k = n.min(m - n);
        let c = (1..=k).fold(1.0, |acc, j| acc * (m - k + j) as f64 / j as f64);
        let (a, b) = (powi(p, n as i32), powi(1.0 - p, (m - n) as i32));
        if a > f64::MIN_POSITIVE && b > f64::MIN_POSITIVE {
            return c * a * b;
        }
    }
    exp(ln_binomial(m, n) + n as f64 * ln(p) + (m - n) as f64 * ln(1.0 - p))
}

/// Principal square root of a complex number.
pub fn csqrt(z: C64) -> C64 {
    let r = sqrt(z.norm());
    let arg = atan2(z.im, z.re);
    C64::new(r * cos(arg / 2.0), r * sin(arg / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_pmf_edges() {
        assert_eq!(binomial_pmf(3, 3, 1.0), 1.0);
        assert_eq!(binomial_pmf(3, 2, 1.0), 0.0);
        assert_eq!(binomial_pmf(3, 0, 0.0), 1.0);
        assert!((binomial_pmf(2, 1, 0.3) - 0.42).abs() < 1e-14);
        let total: f64 = (0..=60).map(|n| binomial_pmf(60, n, 0.37)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factorial_small_is_exact() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(10), 3_628_800.0);
        assert!((factorial(30) / 2.652_528_598_121_910_6e32 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csqrt_principal_branch() {
        let s = csqrt(C64::new(-3.0f64.sqrt(), 0.0));
        assert!(s.re.abs() < 1e-15);
        assert!((s.im - 3.0f64.powf(0.25)).abs() < 1e-14);
    }
}
