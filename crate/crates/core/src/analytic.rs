//! Closed-form coherent photon subtraction.
//!
//! Detecting `n1` photons on mode `d`, `n2` on mode `c` (after the balanced
//! beamsplitter) and `n3` on mode `b` leaves mode `a` in
//!
//! ```text
//! |psi> ∝ sum_k A'_k |2k - N - n3>,   A'_k = A_{k-n3} x^k k! / sqrt((2k-N-n3)!)
//! ```
//!
//! with `N = n1 + n2`, `x = e^{i phi} tanh R'` and `k` running from
//! `max(n3, ceil((N + n3)/2))` to `N + n3`. A finite transmission `t` only
//! renormalises the squeezing, `tanh R' = t^2 tanh R`, so the output state is
//! exact at any reflectivity. The subtraction probability is
//!
//! ```text
//! P = (tan^2(theta) / 2)^N / (n3! cosh^2 R) * sum_k |A'_k(R')|^2,
//! ```
//!
//! which reduces to the weak-reflectivity form with `theta^2` and `R' = R`
//! as `theta -> 0`; both are provided.
//!
//! The coefficients are
//!
//! ```text
//! A_k = sqrt(n1! n2!) sum_i (-1)^{i+k-n1} / (i! (i+k-n1)! (n1-i)! (N-i-k)!)
//! ```
//!
//! over `max(0, n1-k) <= i <= min(n1, N-k)`. The reference count is `n1`,
//! the detector on mode `d`; this fixes the relative sign of the two
//! single-subtraction outcomes (`[1,0,n3]` gives `+`, `[0,1,n3]` gives `-`).
//! With `n1 >= n2` the expression coincides with the one indexed by
//! `max(n1, n2)`; otherwise the two differ by `(-1)^k`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::channels::DetectorModel;
use crate::fock::{DensityOperator, PureState};
use crate::linalg::CMatrix;
use crate::math::{cis, cosh, exp, ln, ln_binomial, ln_factorial, sqrt, tan, tanh};
use crate::squeeze::SqueezeParam;
use crate::{Error, Result, C64};

/// Detection triple `[n1, n2, n3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomePattern {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl OutcomePattern {
    pub const fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Self { n1, n2, n3 }
    }

    /// Total number of subtracted photons.
    pub const fn total(&self) -> usize {
        self.n1 + self.n2
    }

    /// Outcome with the two subtraction detectors exchanged.
    pub const fn mirrored(&self) -> Self {
        Self { n1: self.n2, n2: self.n1, n3: self.n3 }
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.n1, self.n2, self.n3]
    }

    /// Smallest `k` in the output sum.
    pub const fn k_min(&self) -> usize {
        let n = self.total();
        let half = (n + self.n3).div_ceil(2);
        if self.n3 > half {
            self.n3
        } else {
            half
        }
    }

    /// Fock indices that can carry weight, ascending.
    pub fn support_candidates(&self) -> Vec<usize> {
        let n = self.total();
        (self.k_min()..=n + self.n3).map(|k| 2 * k - n - self.n3).collect()
    }
}

impl core::fmt::Display for OutcomePattern {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "[{},{},{}]", self.n1, self.n2, self.n3)
    }
}

/// `A_{n1,n2,k} = numerator / N! * sqrt(n1! n2!)`, with an exact integer
/// numerator (a signed sum of multinomial coefficients).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCoefficient {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub numerator: BigInt,
}

impl ExactCoefficient {
    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    /// `ln |A|`; `-inf` when the coefficient vanishes.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let n = self.n1 + self.n2;
        ln_big(&self.numerator.magnitude().clone()) - ln_factorial(n)
            + 0.5 * (ln_factorial(self.n1) + ln_factorial(self.n2))
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let v = exp(self.ln_abs());
        if self.is_negative() {
            -v
        } else {
            v
        }
    }
}

/// Natural log of a big unsigned integer without overflowing `f64`.
fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return ln(x.to_f64().unwrap_or(f64::INFINITY));
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    ln(top) + shift as f64 * core::f64::consts::LN_2
}

/// Exact `A_{n1,n2,k}`.
pub fn coefficient_a(n1: usize, n2: usize, k: usize) -> Result<ExactCoefficient> {
    let n = n1 + n2;
    if k > n {
        return Err(Error::invalid("subtraction coefficient index k exceeds n1 + n2"));
    }
    Ok(coefficient_from(&factorials(n), n1, n2, k))
}

fn factorials(n: usize) -> Vec<BigUint> {
    let mut f = Vec::with_capacity(n + 1);
    f.push(BigUint::one());
    for j in 1..=n {
        let next = &f[j - 1] * j as u64;
        f.push(next);
    }
    f
}

/// `facts[j] = j!` for `j <= n1 + n2`; `k <= n1 + n2`.
fn coefficient_from(facts: &[BigUint], n1: usize, n2: usize, k: usize) -> ExactCoefficient {
    let n = n1 + n2;
    let lo = n1.saturating_sub(k);
    let hi = n1.min(n - k);
    let mut sum = BigInt::zero();
    for i in lo..=hi {
        let j = i + k - n1;
        let denom = &facts[i] * &facts[j] * &facts[n1 - i] * &facts[n - i - k];
        let term = BigInt::from(&facts[n] / denom);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    ExactCoefficient { n1, n2, k, numerator: sum }
}

/// All `A_{n1,n2,k}`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtractionCoefficients {
    pub n1: usize,
    pub n2: usize,
    pub exact: Vec<ExactCoefficient>,
    pub values: Vec<f64>,
    /// `ln |A_k|`, cached for the log-space state builder.
    pub ln_abs: Vec<f64>,
}

impl SubtractionCoefficients {
    pub fn new(n1: usize, n2: usize) -> Self {
        let facts = factorials(n1 + n2);
        let exact: Vec<ExactCoefficient> = (0..=n1 + n2).map(|k| coefficient_from(&facts, n1, n2, k)).collect();
        let values = exact.iter().map(ExactCoefficient::to_f64).collect();
        let ln_abs = exact.iter().map(ExactCoefficient::ln_abs).collect();
        Self { n1, n2, exact, values, ln_abs }
    }

    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }
}

/// Coefficient tables for every `(n1, n2)` with `n1 + n2 <= n_max`, built
/// once and then shared read-only.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    n_max: usize,
    rows: Vec<SubtractionCoefficients>,
}

impl CoefficientTable {
    pub fn new(n_max: usize) -> Self {
        let mut t = Self { n_max: 0, rows: vec![SubtractionCoefficients::new(0, 0)] };
        t.extend_to(n_max);
        t
    }

    /// Appends the rows for every total up to `n_max`.
    pub fn extend_to(&mut self, n_max: usize) {
        for n in self.n_max + 1..=n_max {
            for n1 in 0..=n {
                self.rows.push(SubtractionCoefficients::new(n1, n - n1));
            }
        }
        self.n_max = self.n_max.max(n_max);
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, n1: usize, n2: usize) -> Option<&SubtractionCoefficients> {
        let n = n1 + n2;
        if n > self.n_max {
            return None;
        }
        self.rows.get(n * (n + 1) / 2 + n1)
    }
}

/// Closed-form output of one detection pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalStateSpec {
    pub outcome: OutcomePattern,
    /// Squeezing at which the `A'` were evaluated (effective squeezing).
    pub squeeze: SqueezeParam,
    /// `(Fock index, normalised amplitude)`, ascending in index, zero
    /// coefficients dropped.
    pub components: Vec<(usize, C64)>,
    /// `ln sum_k |A'_k|^2`.
    pub ln_weight: f64,
}

impl FinalStateSpec {
    pub fn support(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.0).collect()
    }

    pub fn max_index(&self) -> usize {
        self.components.last().map_or(0, |c| c.0)
    }

    /// Normalised single-mode state in dimension `dim`.
    pub fn to_state(&self, dim: usize) -> Result<PureState> {
        if self.max_index() >= dim {
            return Err(Error::invalid("output state support exceeds the requested dimension"));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        for &(n, c) in &self.components {
            amps[n] = c;
        }
        PureState::from_amplitudes(vec![dim], amps)
    }

    pub fn mean_photon(&self) -> f64 {
        self.components.iter().map(|(n, c)| *n as f64 * c.norm_sqr()).sum()
    }

    /// Amplitude on Fock level `n` (zero off support).
    pub fn amplitude(&self, n: usize) -> C64 {
        self.components.iter().find(|c| c.0 == n).map_or(C64::new(0.0, 0.0), |c| c.1)
    }

    /// `ln [ sum|A'|^2 / (n3! cosh^2 R) ]` for a TMSV of magnitude `r_norm`.
    fn ln_branch(&self, r_norm: f64) -> f64 {
        self.ln_weight - ln_factorial(self.outcome.n3) - 2.0 * ln(cosh(r_norm))
    }
}

fn build_spec(coeffs: &SubtractionCoefficients, n3: usize, squeeze: SqueezeParam) -> Result<FinalStateSpec> {
    let outcome = OutcomePattern::new(coeffs.n1, coeffs.n2, n3);
    let n = outcome.total();
    let lx = ln(tanh(squeeze.r));
    let mut raw: Vec<(usize, f64, C64)> = Vec::new();
    for k in outcome.k_min()..=n + n3 {
        let a = coeffs.values[k - n3];
        if a == 0.0 {
            continue;
        }
        let la = coeffs.ln_abs[k - n3];
        let idx = 2 * k - n - n3;
        let ln_mag = if k == 0 {
            la
        } else if squeeze.r == 0.0 {
            continue;
        } else {
            la + k as f64 * lx + ln_factorial(k) - 0.5 * ln_factorial(idx)
        };
        let sign = if a < 0.0 { -1.0 } else { 1.0 };
        raw.push((idx, ln_mag, cis(k as f64 * squeeze.phi) * sign));
    }
    if raw.is_empty() {
        return Err(Error::ZeroProbability);
    }
    let top = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = raw.iter().map(|r| exp(2.0 * (r.1 - top))).sum();
    let ln_weight = 2.0 * top + ln(scaled);
    let inv = 1.0 / sqrt(scaled);
    let components = raw.into_iter().map(|(idx, l, ph)| (idx, ph * (exp(l - top) * inv))).collect();
    Ok(FinalStateSpec { outcome, squeeze, components, ln_weight })
}

/// Output state for `outcome` at the given (effective) squeezing.
pub fn final_state(outcome: OutcomePattern, squeeze_eff: SqueezeParam) -> Result<FinalStateSpec> {
    let coeffs = SubtractionCoefficients::new(outcome.n1, outcome.n2);
    build_spec(&coeffs, outcome.n3, squeeze_eff)
}

/// As [`final_state`] with precomputed coefficients.
pub fn final_state_with(
    coeffs: &SubtractionCoefficients,
    n3: usize,
    squeeze_eff: SqueezeParam,
) -> Result<FinalStateSpec> {
    build_spec(coeffs, n3, squeeze_eff)
}

/// `tanh R' = t^2 tanh R`.
pub fn effective_squeezing(r: f64, t: f64) -> f64 {
    crate::squeeze::effective_squeezing(r, t)
}

/// Exact probability of `outcome` from initial squeezing `squeeze` and
/// subtraction angle `theta` (ideal detectors).
pub fn success_probability(outcome: OutcomePattern, squeeze: SqueezeParam, theta: f64) -> Result<f64> {
    let coeffs = SubtractionCoefficients::new(outcome.n1, outcome.n2);
    success_probability_with(&coeffs, outcome.n3, squeeze, theta)
}

pub fn success_probability_with(
    coeffs: &SubtractionCoefficients,
    n3: usize,
    squeeze: SqueezeParam,
    theta: f64,
) -> Result<f64> {
    check_theta(theta)?;
    let n = coeffs.total();
    if n > 0 && theta == 0.0 {
        return Ok(0.0);
    }
    let spec = match build_spec(coeffs, n3, squeeze.effective(crate::math::cos(theta))) {
        Ok(s) => s,
        Err(Error::ZeroProbability) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    Ok(branch_probability(&spec, squeeze.r, theta))
}

/// Probability of a branch whose state `spec` was built at the effective
/// squeezing for initial squeezing `r_initial` and angle `theta`.
pub fn branch_probability(spec: &FinalStateSpec, r_initial: f64, theta: f64) -> f64 {
    let n = spec.outcome.total();
    if n > 0 && theta == 0.0 {
        return 0.0;
    }
    let pre = if n == 0 { 0.0 } else { n as f64 * ln(tan(theta) * tan(theta) / 2.0) };
    exp(pre + spec.ln_branch(r_initial))
}

/// Weak-reflectivity probability: `theta^2` in place of `tan^2 theta` and the
/// coefficients evaluated at the squeezing passed in.
pub fn success_probability_leading_order(outcome: OutcomePattern, squeeze: SqueezeParam, theta: f64) -> Result<f64> {
    let n = outcome.total();
    if n > 0 && theta == 0.0 {
        return Ok(0.0);
    }
    let spec = match final_state(outcome, squeeze) {
        Ok(s) => s,
        Err(Error::ZeroProbability) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let pre = if n == 0 { 0.0 } else { n as f64 * ln(theta * theta / 2.0) };
    Ok(exp(pre + spec.ln_branch(squeeze.r)))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..core::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::invalid("subtraction angle must lie in [0, pi/2)"));
    }
    Ok(())
}

/// Relative sign in the single-subtraction state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Single-subtraction output built directly from the TMSV Schmidt weights
/// `c_{n,n'} = e^{i phi (n+n')} tanh^{n+n'} R / cosh^2 R`:
/// `sqrt(n3 c_{n3,n3}) |n3-1> ± sqrt((n3+1) c_{n3+1,n3+1}) |n3+1>`, with
/// `sqrt(c_{n,n}) = e^{i n phi} tanh^n R / cosh R`.
pub fn simple_subtracted_state(n3: usize, squeeze: SqueezeParam, sign: Sign) -> Result<FinalStateSpec> {
    if n3 < 1 {
        return Err(Error::invalid("single-subtraction state needs n3 >= 1"));
    }
    let root_c =
        |n: usize| cis(n as f64 * squeeze.phi) * (crate::math::powi(tanh(squeeze.r), n as i32) / cosh(squeeze.r));
    let lo = root_c(n3) * sqrt(n3 as f64);
    let mut hi = root_c(n3 + 1) * sqrt((n3 + 1) as f64);
    if sign == Sign::Minus {
        hi = -hi;
    }
    let norm2 = lo.norm_sqr() + hi.norm_sqr();
    let inv = 1.0 / sqrt(norm2);
    let mut components = vec![(n3 - 1, lo * inv)];
    if hi.norm_sqr() > 0.0 {
        components.push((n3 + 1, hi * inv));
    }
    let outcome = match sign {
        Sign::Plus => OutcomePattern::new(1, 0, n3),
        Sign::Minus => OutcomePattern::new(0, 1, n3),
    };
    // Same normalisation convention as the general route: sum |A'|^2 with the
    // common factor sqrt(n3!) restored and cosh^2 R removed.
    let ln_weight = ln(norm2) + 2.0 * ln(cosh(squeeze.r)) + ln_factorial(n3);
    Ok(FinalStateSpec { outcome, squeeze, components, ln_weight })
}

/// Joint probability that `total` photons are reflected into the
/// subtraction modes (in any split between the two detectors) and `n3`
/// photons reach the third detector, for ideal detection.
pub fn subtraction_marginal(r: f64, theta: f64, total: usize, n3: usize) -> f64 {
    if r == 0.0 {
        return if total == 0 && n3 == 0 { 1.0 } else { 0.0 };
    }
    let (s, c) = (crate::math::sin(theta), crate::math::cos(theta));
    if total > 0 && s == 0.0 {
        return 0.0;
    }
    let lt = 2.0 * ln(tanh(r));
    let base = -2.0 * ln(cosh(r));
    let mut acc = 0.0;
    // `l` photons reflected from the b arm, so the pair number is n3 + l
    for l in 0..=total {
        let j = total - l;
        let n = n3 + l;
        if j > n {
            continue;
        }
        let mut lnp = base + n as f64 * lt + ln_binomial(n, j) + ln_binomial(n, l);
        if total > 0 {
            lnp += 2.0 * total as f64 * ln(s);
        }
        let kept = 2 * n - total;
        if kept > 0 {
            if c == 0.0 {
                continue;
            }
            lnp += 2.0 * kept as f64 * ln(c);
        }
        acc += exp(lnp);
    }
    acc
}

/// Conditional mode-`a` state when the third detector has efficiency
/// `eta3` (subtraction detectors ideal): the mixture over true photon
/// numbers `m >= n3` weighted by `P([n1,n2,m]) p(n3|m)`.
///
/// Branches are summed until the neglected marginal weight drops below
/// `tail`; the output support must fit in `dim`.
pub fn lossy_final_state(
    outcome: OutcomePattern,
    squeeze: SqueezeParam,
    theta: f64,
    eta3: f64,
    dim: usize,
    tail: f64,
) -> Result<(DensityOperator, f64)> {
    let det = DetectorModel::new(eta3, usize::MAX)?;
    check_theta(theta)?;
    let coeffs = SubtractionCoefficients::new(outcome.n1, outcome.n2);
    let n = outcome.total();
    let eff = squeeze.effective(crate::math::cos(theta));
    let mut rho = CMatrix::zeros(dim);
    let mut total_p = 0.0;
    let mut m = outcome.n3;
    loop {
        let w_marg = subtraction_marginal(squeeze.r, theta, n, m);
        let p = success_probability_with(&coeffs, m, squeeze, theta)?;
        let w = p * det.click_probability(outcome.n3, m);
        if w > 0.0 {
            let spec = build_spec(&coeffs, m, eff)?;
            if spec.max_index() >= dim {
                if w_marg < tail {
                    break;
                }
                return Err(Error::TruncationTail { tail: w_marg, tolerance: tail });
            }
            let amps: Vec<C64> = {
                let mut a = vec![C64::new(0.0, 0.0); dim];
                for &(i, c) in &spec.components {
                    a[i] = c;
                }
                a
            };
            rho.add_assign_scaled(&CMatrix::outer(&amps, &amps), C64::new(w, 0.0));
            total_p += w;
        }
        // remaining marginal mass decays geometrically once past the peak
        if m > outcome.n3 + 4 && w_marg < tail * 1e-3 && subtraction_marginal(squeeze.r, theta, n, m + 1) < w_marg {
            break;
        }
        if eta3 == 1.0 || squeeze.r == 0.0 {
            break;
        }
        m += 1;
    }
    if !(total_p > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let rho = DensityOperator::single_mode(rho.scale(C64::new(1.0 / total_p, 0.0)))?;
    Ok((rho, total_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeeze::db_to_r;

    fn sq(r: f64, phi: f64) -> SqueezeParam {
        SqueezeParam::new(r, phi).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(coefficient_a(0, 0, 0).unwrap().to_f64(), 1.0);
        assert!(coefficient_a(1, 1, 1).unwrap().is_zero());
        let a0 = coefficient_a(1, 0, 0).unwrap().to_f64();
        let a1 = coefficient_a(1, 0, 1).unwrap().to_f64();
        assert!(a0 != 0.0 && (a0.abs() - a1.abs()).abs() < 1e-15);
        assert!(coefficient_a(1, 0, 2).is_err());
    }

    #[test]
    fn coefficients_match_float_sum() {
        for n1 in 0..5usize {
            for n2 in 0..5usize {
                let n = n1 + n2;
                for k in 0..=n {
                    let mut direct = 0.0;
                    for i in n1.saturating_sub(k)..=n1.min(n - k) {
                        let j = i + k - n1;
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        direct += s
                            / (crate::math::factorial(i)
                                * crate::math::factorial(j)
                                * crate::math::factorial(n1 - i)
                                * crate::math::factorial(n - i - k));
                    }
                    direct *= sqrt(crate::math::factorial(n1) * crate::math::factorial(n2));
                    let exact = coefficient_a(n1, n2, k).unwrap().to_f64();
                    assert!((exact - direct).abs() < 1e-12 * (1.0 + direct.abs()), "{n1} {n2} {k}");
                }
            }
        }
    }

    #[test]
    fn binomial_word_at_threshold() {
        let x = 2f64.powf(-0.25);
        let spec =
            final_state(OutcomePattern::new(1, 1, 2), sq(crate::math::atanh(x), core::f64::consts::FRAC_PI_2)).unwrap();
        assert_eq!(spec.support(), vec![0, 4]);
        let (a0, a4) = (spec.amplitude(0), spec.amplitude(4));
        let rel = a4 / a0;
        assert!((a0.norm() - 0.5).abs() < 1e-12);
        assert!((rel - C64::new(3f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_subtraction_routes_agree() {
        for n3 in 1..=6 {
            for (pat, sign) in [((1, 0), Sign::Plus), ((0, 1), Sign::Minus)] {
                let s = sq(0.63, 0.4);
                let a = final_state(OutcomePattern::new(pat.0, pat.1, n3), s).unwrap();
                let b = simple_subtracted_state(n3, s, sign).unwrap();
                assert_eq!(a.support(), b.support());
                for (x, y) in a.components.iter().zip(&b.components) {
                    assert!((x.1 - y.1).norm() < 1e-12);
                }
                assert!((a.ln_weight - b.ln_weight).abs() < 1e-12);
            }
        }
        let tiny = simple_subtracted_state(3, sq(1e-9, 0.0), Sign::Plus).unwrap();
        assert!((tiny.amplitude(2).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_subtraction_probabilities() {
        let s = sq(0.7, 1.1);
        assert_eq!(success_probability(OutcomePattern::new(1, 0, 3), s, 0.0).unwrap(), 0.0);
        for n3 in 0..6 {
            let p = success_probability(OutcomePattern::new(0, 0, n3), s, 0.0).unwrap();
            let expect = tanh(0.7).powi(2 * n3 as i32) / cosh(0.7).powi(2);
            assert!((p - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn probability_is_phase_independent() {
        let o = OutcomePattern::new(2, 1, 3);
        let p0 = success_probability(o, sq(0.9, 0.0), 0.3).unwrap();
        let p1 = success_probability(o, sq(0.9, 2.2), 0.3).unwrap();
        assert!((p0 - p1).abs() < 1e-15 * (1.0 + p0));
    }

    #[test]
    fn leading_order_is_small_angle_limit() {
        let o = OutcomePattern::new(1, 2, 4);
        let s = sq(0.8, 0.0);
        let th = 1e-3;
        let exact = success_probability(o, s, th).unwrap();
        let lead = success_probability_leading_order(o, s, th).unwrap();
        assert!((exact / lead - 1.0).abs() < 1e-4);
    }

    #[test]
    fn marginals_sum_over_splits() {
        let s = sq(0.9, 0.0);
        let th = 0.35;
        for total in 0..4 {
            for n3 in 0..5 {
                let split: f64 = (0..=total)
                    .map(|n1| success_probability(OutcomePattern::new(n1, total - n1, n3), s, th).unwrap())
                    .sum();
                let marg = subtraction_marginal(0.9, th, total, n3);
                assert!((split - marg).abs() < 1e-13 * (1.0 + marg), "{total} {n3}");
            }
        }
        let mut all = 0.0;
        for total in 0..60 {
            for n3 in 0..140 {
                all += subtraction_marginal(0.9, th, total, n3);
            }
        }
        assert!((all - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hom_spacing_and_component_counts() {
        let s = sq(0.8, 0.0);
        for n1 in 0..4 {
            for n2 in 0..4 {
                for n3 in 0..8 {
                    let o = OutcomePattern::new(n1, n2, n3);
                    let Ok(spec) = final_state(o, s) else { continue };
                    let sup = spec.support();
                    let step = if n1 == n2 { 4 } else { 2 };
                    assert!(sup.windows(2).all(|w| (w[1] - w[0]) % step == 0));
                    let n = n1 + n2;
                    if n3 > n {
                        assert!(sup.len() <= n + 1);
                    }
                    if n3 < n {
                        assert!(sup.len() <= (n + n3) / 2 + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn lossy_mixture_reduces_to_pure() {
        let o = OutcomePattern::new(1, 1, 2);
        let s = sq(db_to_r(12.0), 0.0);
        let th = 0.1f64.sqrt().asin();
        let (rho, p) = lossy_final_state(o, s, th, 1.0, 30, 1e-12).unwrap();
        let pure = final_state(o, s.effective(th.cos())).unwrap().to_state(30).unwrap();
        assert!(rho.matrix().max_abs_diff(pure.to_density().matrix()) < 1e-12);
        assert!((p - success_probability(o, s, th).unwrap()).abs() < 1e-15);
    }
}
