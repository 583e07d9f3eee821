//! Target code states, the squeezing that produces them, the
//! Knill-Laflamme checker and the first-order model of code words made
//! with an inefficient final detector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::parity_of_populations;
use crate::fock::{annihilator_dim, DensityOperator, ModeOperator, PureState};
use crate::linalg::CMatrix;
use crate::math::{atanh, cis, csqrt, sqrt, tanh};
use crate::squeeze::{effective_squeezing, SqueezeParam};
use crate::{Error, Result, C64};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A pair of logical code words.
#[derive(Debug, Clone, PartialEq)]
pub struct CodePair {
    pub zero_word: PureState,
    pub one_word: PureState,
    /// Rotation symmetry order `K`.
    pub symmetry: usize,
    pub label: String,
}

impl CodePair {
    /// Checks normalisation and orthogonality to `1e-10`.
    pub fn new(zero_word: PureState, one_word: PureState, symmetry: usize, label: impl Into<String>) -> Result<Self> {
        if zero_word.mode_dims() != one_word.mode_dims() {
            return Err(Error::DimensionMismatch {
                expected: zero_word.amplitudes().len(),
                found: one_word.amplitudes().len(),
            });
        }
        for w in [&zero_word, &one_word] {
            if (w.norm_sqr() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid("code words must be normalised"));
            }
        }
        if zero_word.inner(&one_word)?.norm() > 1e-10 {
            return Err(Error::invalid("code words must be orthogonal"));
        }
        Ok(Self { zero_word, one_word, symmetry, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.zero_word.amplitudes().len()
    }

    pub fn words(&self) -> [&PureState; 2] {
        [&self.zero_word, &self.one_word]
    }
}

/// `|0_L> = (|0> + sqrt(3)|4>)/2`, `|1_L> = (sqrt(3)|2> + |6>)/2`, `K = 4`.
pub fn binomial_codewords(dim: usize) -> Result<CodePair> {
    let h = sqrt(3.0) / 2.0;
    let zero = PureState::from_components(dim, &[(0, re(0.5)), (4, re(h))])?;
    let one = PureState::from_components(dim, &[(2, re(h)), (6, re(0.5))])?;
    CodePair::new(zero, one, 4, "binomial")
}

/// Normalised images of the binomial words after one photon loss:
/// `|3>` and `(|1> + |5>)/sqrt(2)`.
pub fn error_words(dim: usize) -> Result<CodePair> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let zero = PureState::from_components(dim, &[(3, re(1.0))])?;
    let one = PureState::from_components(dim, &[(1, re(h)), (5, re(h))])?;
    CodePair::new(zero, one, 4, "binomial error words")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `|m-1> + alpha |m+1>` from outcome `[0, 1, m]`.
    TwoFold,
    /// `|m-2> + beta |m+2>` from outcome `[1, 1, m]`.
    FourFold,
}

impl Symmetry {
    pub fn order(&self) -> usize {
        match self {
            Symmetry::TwoFold => 2,
            Symmetry::FourFold => 4,
        }
    }
}

/// Two-component rotation-symmetric target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoComponentTarget {
    pub m: usize,
    pub coefficient: C64,
    pub symmetry: Symmetry,
}

impl TwoComponentTarget {
    pub fn two_fold(m: usize, alpha: C64) -> Self {
        Self { m, coefficient: alpha, symmetry: Symmetry::TwoFold }
    }

    pub fn four_fold(m: usize, beta: C64) -> Self {
        Self { m, coefficient: beta, symmetry: Symmetry::FourFold }
    }

    /// Largest admissible `|coefficient|`.
    pub fn bound(&self) -> f64 {
        let m = self.m as f64;
        match self.symmetry {
            Symmetry::TwoFold => sqrt((m + 1.0) / m),
            Symmetry::FourFold => sqrt((m + 1.0) * (m + 2.0) / (m * (m - 1.0))),
        }
    }

    /// Heralding outcome that produces the target.
    pub fn outcome(&self) -> crate::analytic::OutcomePattern {
        match self.symmetry {
            Symmetry::TwoFold => crate::analytic::OutcomePattern::new(0, 1, self.m),
            Symmetry::FourFold => crate::analytic::OutcomePattern::new(1, 1, self.m),
        }
    }

    /// The normalised target state.
    pub fn state(&self, dim: usize) -> Result<PureState> {
        let gap = self.symmetry.order() / 2;
        if self.m < gap {
            return Err(Error::invalid("target needs m >= 1 (2-fold) or m >= 2 (4-fold)"));
        }
        PureState::from_components(dim, &[(self.m - gap, re(1.0)), (self.m + gap, self.coefficient)])
    }
}

/// Effective squeezing that makes the heralded state equal the target:
/// `e^{i phi} tanh R = -alpha sqrt(m/(m+1))` (2-fold) or
/// `sqrt(-beta) (m(m-1)/((m+1)(m+2)))^{1/4}` (4-fold, principal root; both
/// roots give the same output because only `x^2` enters).
pub fn squeezing_condition(target: &TwoComponentTarget) -> Result<SqueezeParam> {
    let m = target.m as f64;
    let x = match target.symmetry {
        Symmetry::TwoFold => {
            if target.m < 1 {
                return Err(Error::invalid("2-fold target needs m >= 1"));
            }
            -target.coefficient * sqrt(m / (m + 1.0))
        }
        Symmetry::FourFold => {
            if target.m < 2 {
                return Err(Error::invalid("4-fold target needs m >= 2"));
            }
            // `+ 0.0` clears the signed zero so real beta lands on phi = pi/2
            let neg = C64::new(-target.coefficient.re + 0.0, -target.coefficient.im + 0.0);
            csqrt(neg) * sqrt(sqrt(m * (m - 1.0) / ((m + 1.0) * (m + 2.0))))
        }
    };
    SqueezeParam::from_ratio(x)
}

/// The heralded pair `(psi_{0,1,m}, psi_{0,2,m})` at effective squeezing
/// `squeeze`, written out term by term:
///
/// ```text
/// psi_01 ∝ x^{-1/2} sqrt(m) |m-1> - x^{1/2} sqrt(m+1) |m+1>
/// psi_02 ∝ x^{-1} sqrt(m/(m+1)) |m-2> - 2 sqrt((m+1)/(m-1)) |m> + x sqrt((m+2)/(m-1)) |m+2>
/// ```
///
/// with `x = e^{i phi} tanh R` (the half powers carry `e^{±i phi/2}`). The
/// middle sign of `psi_02` follows from the same detector assignment that
/// gives `psi_01` its minus sign.
pub fn cat_like_pair(m: usize, squeeze: SqueezeParam, dim: usize) -> Result<(PureState, PureState)> {
    if m < 2 {
        return Err(Error::invalid("cat-like pair needs m >= 2"));
    }
    if squeeze.r == 0.0 {
        return Err(Error::invalid("cat-like pair needs non-zero squeezing"));
    }
    let mf = m as f64;
    let t = tanh(squeeze.r);
    let half = cis(squeeze.phi / 2.0);
    let psi01 = PureState::from_components(
        dim,
        &[(m - 1, half.conj() * (sqrt(mf) / sqrt(t))), (m + 1, -half * (sqrt(t) * sqrt(mf + 1.0)))],
    )?;
    let full = cis(squeeze.phi);
    let psi02 = PureState::from_components(
        dim,
        &[
            (m - 2, full.conj() * (sqrt(mf / (mf + 1.0)) / t)),
            (m, re(-2.0 * sqrt((mf + 1.0) / (mf - 1.0)))),
            (m + 2, full * (t * sqrt((mf + 2.0) / (mf - 1.0)))),
        ],
    )?;
    Ok((psi01, psi02))
}

/// The cat-like pair as a [`CodePair`] (`psi_02` as the zero word).
pub fn cat_code_pair(m: usize, squeeze: SqueezeParam, dim: usize) -> Result<CodePair> {
    let (p01, p02) = cat_like_pair(m, squeeze, dim)?;
    CodePair::new(p02, p01, 2, alloc::format!("cat-like m={m}"))
}

/// Mean photon numbers of `psi_{0,1,m}` and `psi_{0,2,m}` for
/// `tanh R = t`, in closed form.
pub fn cat_pair_mean_photons(m: usize, t: f64) -> (f64, f64) {
    let mf = m as f64;
    let (w0, w1) = (mf / t, t * (mf + 1.0));
    let n01 = ((mf - 1.0) * w0 + (mf + 1.0) * w1) / (w0 + w1);
    let a = mf / (mf + 1.0) / (t * t);
    let b = 4.0 * (mf + 1.0) / (mf - 1.0);
    let c = t * t * (mf + 2.0) / (mf - 1.0);
    let n02 = ((mf - 2.0) * a + mf * b + (mf + 2.0) * c) / (a + b + c);
    (n01, n02)
}

/// Initial squeezing at which the pair has equal mean photon number after
/// subtraction with transmission `cos(theta)`. Bisection in `R` to `1e-10`
/// starting from `[0.05, 1.6]`, widened if needed.
pub fn balance_cat_pair(m: usize, theta: f64) -> Result<SqueezeParam> {
    if m < 2 {
        return Err(Error::invalid("cat-like pair needs m >= 2"));
    }
    let t = crate::math::cos(theta);
    let f = |r: f64| {
        let (a, b) = cat_pair_mean_photons(m, tanh(effective_squeezing(r, t)));
        a - b
    };
    let (mut lo, mut hi) = (0.05, 1.6);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    let mut widen = 0;
    while flo * fhi > 0.0 {
        widen += 1;
        if widen > 40 {
            return Err(Error::NoSignChange { lo, hi });
        }
        lo *= 0.5;
        hi *= 1.5;
        flo = f(lo);
        fhi = f(hi);
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    SqueezeParam::new(0.5 * (lo + hi), 0.0)
}

/// Outcome of a Knill-Laflamme test.
#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    /// `blocks[l][m]` is the 2x2 matrix `<i_L| E_l^dagger E_m |j_L>`.
    pub blocks: Vec<Vec<[[C64; 2]; 2]>>,
    /// Largest violation of `block = alpha I` over all pairs.
    pub max_defect: f64,
    pub passed: bool,
}

/// Evaluates `<i_L| E_l^dagger E_m |j_L>` for every error pair and tests
/// that each 2x2 block is proportional to the identity within `tol`.
pub fn kl_check(pair: &CodePair, errors: &[ModeOperator], tol: f64) -> Result<KlReport> {
    let d = pair.dim();
    for e in errors {
        if e.dims() != [d] {
            return Err(Error::DimensionMismatch { expected: d, found: e.total_dim() });
        }
    }
    // images[e][w] = E_e |w>
    let images: Vec<[PureState; 2]> = errors
        .iter()
        .map(|e| {
            let img = |w: &PureState| {
                let mut s = w.clone();
                s.apply(e, &[0]).map(|_| s)
            };
            Ok([img(&pair.zero_word)?, img(&pair.one_word)?])
        })
        .collect::<Result<_>>()?;
    let mut blocks = Vec::with_capacity(errors.len());
    let mut max_defect = 0.0f64;
    for l in &images {
        let mut row = Vec::with_capacity(errors.len());
        for m in &images {
            let mut b = [[C64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    b[i][j] = l[i].inner(&m[j])?;
                }
            }
            let defect = (b[0][0] - b[1][1]).norm().max(b[0][1].norm()).max(b[1][0].norm());
            max_defect = max_defect.max(defect);
            row.push(b);
        }
        blocks.push(row);
    }
    Ok(KlReport { blocks, max_defect, passed: max_defect <= tol })
}

/// `{I, a}` on dimension `dim`.
pub fn loss_error_set(dim: usize) -> Vec<ModeOperator> {
    vec![ModeOperator::identity(&[dim]), annihilator_dim(dim)]
}

/// `{I, a, n}` on dimension `dim`.
pub fn loss_and_dephasing_error_set(dim: usize) -> Vec<ModeOperator> {
    vec![ModeOperator::identity(&[dim]), annihilator_dim(dim), crate::fock::number_operator_dim(dim)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalWord {
    Zero,
    One,
}

/// `(1 - delta) |ideal><ideal| + delta rho_E`, first order in `1 - eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImperfectCodeword {
    pub which: LogicalWord,
    pub ideal: PureState,
    pub error_state: DensityOperator,
    pub delta: f64,
    pub eta: f64,
}

/// `delta/(1-delta) = c (1 - eta)` coefficients: `3 sqrt(2)` for `|0_L>`,
/// `8 sqrt(2)/sqrt(15)` for `|1_L>`.
pub fn delta_ratio_coefficient(which: LogicalWord) -> f64 {
    match which {
        LogicalWord::Zero => 3.0 * core::f64::consts::SQRT_2,
        LogicalWord::One => 8.0 * core::f64::consts::SQRT_2 / sqrt(15.0),
    }
}

/// The error component left by one undetected photon:
/// `(sqrt(3)|1> + sqrt(5)|5>)/sqrt(8)` for `|0_L>`,
/// `(5|3> + sqrt(7)|7>)/sqrt(32)` for `|1_L>`.
pub fn error_component(which: LogicalWord, dim: usize) -> Result<PureState> {
    match which {
        LogicalWord::Zero => PureState::from_components(dim, &[(1, re(sqrt(3.0))), (5, re(sqrt(5.0)))]),
        LogicalWord::One => PureState::from_components(dim, &[(3, re(5.0)), (7, re(sqrt(7.0)))]),
    }
}

pub fn imperfect_codeword(which: LogicalWord, eta: f64, dim: usize) -> Result<ImperfectCodeword> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("detector efficiency must lie in (0, 1]"));
    }
    let words = binomial_codewords(dim)?;
    let ideal = match which {
        LogicalWord::Zero => words.zero_word,
        LogicalWord::One => words.one_word,
    };
    let ratio = delta_ratio_coefficient(which) * (1.0 - eta);
    let delta = ratio / (1.0 + ratio);
    Ok(ImperfectCodeword { which, ideal, error_state: error_component(which, dim)?.to_density(), delta, eta })
}

impl ImperfectCodeword {
    pub fn ratio(&self) -> f64 {
        self.delta / (1.0 - self.delta)
    }

    pub fn density(&self) -> DensityOperator {
        self.ideal
            .to_density()
            .scaled(1.0 - self.delta)
            .add(&self.error_state.scaled(self.delta))
            .expect("same dimension by construction")
    }

    /// `Tr[delta a rho_E a^dagger] / Tr[(1-delta) a |ideal><ideal| a^dagger]`,
    /// i.e. `delta <n>_E / ((1-delta) <n>_ideal)`.
    pub fn incorrect_diagnosis_trace_ratio(&self) -> f64 {
        let n_ideal = self.ideal.mean_photon(0).expect("single mode");
        self.delta * self.error_state.mean_photon() / ((1.0 - self.delta) * n_ideal)
    }
}

/// `P_inc = 9 delta / (10 (1 - delta))`.
pub fn incorrect_diagnosis_probability(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid("delta must lie in [0, 1)"));
    }
    Ok(9.0 * delta / (10.0 * (1.0 - delta)))
}

/// `E_0 rho E_0^dagger` with `E_0 = 1 - gamma n / 2`, kept to first order
/// in `gamma` and split into its three parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoJumpDecomposition {
    /// `(1 - delta) E_0 |ideal><ideal| E_0^dagger`.
    pub ideal_term: DensityOperator,
    /// `delta rho_E`.
    pub preserved_error: DensityOperator,
    /// `-(delta gamma / 2) (n rho_E + rho_E n)`.
    pub coupled_error: DensityOperator,
}

impl NoJumpDecomposition {
    pub fn total(&self) -> DensityOperator {
        self.ideal_term
            .add(&self.preserved_error)
            .and_then(|s| s.add(&self.coupled_error))
            .expect("same dimension by construction")
    }

    /// `|Tr|` of the coupled term, `delta gamma <n>_E`.
    pub fn coupled_weight(&self) -> f64 {
        self.coupled_error.trace().abs()
    }
}

pub fn no_jump_transform(cw: &ImperfectCodeword, gamma: f64) -> Result<NoJumpDecomposition> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("loss gamma must be non-negative"));
    }
    let d = cw.ideal.amplitudes().len();
    let nvec: Vec<C64> = (0..d).map(|n| re(n as f64)).collect();
    let num = CMatrix::from_diagonal(&nvec);
    let e0 = CMatrix::identity(d).sub(&num.scale(re(gamma / 2.0)));
    let ideal = cw.ideal.to_density();
    let ideal_term = e0.matmul(ideal.matrix()).matmul(&e0.adjoint()).scale(re(1.0 - cw.delta));
    let rho_e = cw.error_state.matrix();
    let coupled = num.matmul(rho_e).add(&rho_e.matmul(&num)).scale(re(-0.5 * cw.delta * gamma));
    Ok(NoJumpDecomposition {
        ideal_term: DensityOperator::single_mode(ideal_term)?,
        preserved_error: cw.error_state.scaled(cw.delta),
        coupled_error: DensityOperator::single_mode(coupled)?,
    })
}

/// Numbers behind the two efficiency conditions `1 - eta ~ gamma` (no-jump)
/// and `eta >> 1 - gamma` (single jump), for one `(eta, gamma)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub eta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Coupled no-jump weight over `gamma`, i.e. `delta <n>_E`.
    pub coupled_over_gamma: f64,
    /// Incorrect-diagnosis probability (trace ratio) over `gamma`.
    pub p_inc_over_gamma: f64,
}

pub fn efficiency_report(which: LogicalWord, eta: f64, gamma: f64) -> Result<EfficiencyReport> {
    let cw = imperfect_codeword(which, eta, 10)?;
    let nj = no_jump_transform(&cw, gamma)?;
    let g = if gamma > 0.0 { gamma } else { f64::NAN };
    Ok(EfficiencyReport {
        eta,
        gamma,
        delta: cw.delta,
        coupled_over_gamma: nj.coupled_weight() / g,
        p_inc_over_gamma: cw.incorrect_diagnosis_trace_ratio() / g,
    })
}

/// Parity of a single-mode state's support, if definite.
pub fn word_parity(w: &PureState) -> Option<i8> {
    let pops: Vec<f64> = w.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    parity_of_populations(&pops)
}

/// Effective squeezing for the binomial words: `tanh R = 2^{-1/4}` for
/// `|0_L>` and `(2/15)^{1/4}` for `|1_L>`, phase `pi/2`.
pub fn binomial_threshold(which: LogicalWord) -> SqueezeParam {
    let (m, beta) = match which {
        LogicalWord::Zero => (2, sqrt(3.0)),
        LogicalWord::One => (4, 1.0 / sqrt(3.0)),
    };
    squeezing_condition(&TwoComponentTarget::four_fold(m, re(beta))).expect("binomial targets are reachable")
}

/// Largest `tanh R` accepted by [`squeezing_condition`] for `target`, for
/// diagnostics.
pub fn target_ratio_magnitude(target: &TwoComponentTarget) -> f64 {
    squeezing_condition(target).map_or(f64::INFINITY, |s| tanh(s.r))
}

/// `atanh` of a tanh value, exposed for threshold tables.
pub fn r_from_tanh(t: f64) -> f64 {
    atanh(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{final_state, OutcomePattern};
    use crate::squeeze::r_to_db;

    #[test]
    fn binomial_words_properties() {
        let p = binomial_codewords(10).unwrap();
        assert!((p.zero_word.mean_photon(0).unwrap() - 3.0).abs() < 1e-12);
        assert!((p.one_word.mean_photon(0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(p.zero_word.inner(&p.one_word).unwrap(), C64::new(0.0, 0.0));
        for w in p.words() {
            let rho = w.to_density();
            assert!((crate::analysis::super_parity_expectation(&rho, 4).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn error_words_are_loss_images() {
        let p = binomial_codewords(10).unwrap();
        let e = error_words(10).unwrap();
        let a = annihilator_dim(10);
        let mut z = p.zero_word.clone();
        z.apply(&a, &[0]).unwrap();
        assert!((z.amplitudes()[3] - re(3f64.sqrt())).norm() < 1e-12);
        assert!((z.norm_sqr() - 3.0).abs() < 1e-12);
        let mut o = p.one_word.clone();
        o.apply(&a, &[0]).unwrap();
        let c = (1.5f64).sqrt();
        assert!((o.amplitudes()[1] - re(c)).norm() < 1e-12);
        assert!((o.amplitudes()[5] - re(c)).norm() < 1e-12);
        for w in e.words() {
            for v in p.words() {
                assert!(w.inner(v).unwrap().norm() < 1e-15);
            }
        }
    }

    #[test]
    fn threshold_squeezing() {
        let z = binomial_threshold(LogicalWord::Zero);
        let o = binomial_threshold(LogicalWord::One);
        assert!((r_to_db(z.r) - 10.63).abs() < 0.02);
        assert!((r_to_db(o.r) - 6.08).abs() < 0.02);
        let tiny = squeezing_condition(&TwoComponentTarget::two_fold(3, re(1e-9))).unwrap();
        assert!(tiny.r < 1e-8);
        let over = TwoComponentTarget::four_fold(2, re(2.5));
        assert!(matches!(squeezing_condition(&over), Err(Error::Unreachable(_))));
    }

    #[test]
    fn squeezing_condition_reproduces_targets() {
        let targets = [
            TwoComponentTarget::two_fold(3, C64::new(0.4, -0.7)),
            TwoComponentTarget::two_fold(6, re(-0.9)),
            TwoComponentTarget::four_fold(2, re(3f64.sqrt())),
            TwoComponentTarget::four_fold(5, C64::new(-0.3, 0.8)),
        ];
        for t in targets {
            let s = squeezing_condition(&t).unwrap();
            let spec = final_state(t.outcome(), s).unwrap();
            let gap = t.symmetry.order() / 2;
            let rel = spec.amplitude(t.m + gap) / spec.amplitude(t.m - gap);
            assert!((rel - t.coefficient).norm() < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn cat_pair_matches_general_route() {
        for m in 2..=8 {
            let s = SqueezeParam::new(0.55, 0.8).unwrap();
            let (p01, p02) = cat_like_pair(m, s, m + 3).unwrap();
            let a = final_state(OutcomePattern::new(0, 1, m), s).unwrap().to_state(m + 3).unwrap();
            let b = final_state(OutcomePattern::new(0, 2, m), s).unwrap().to_state(m + 3).unwrap();
            // equal up to a global phase
            for (x, y) in [(&p01, &a), (&p02, &b)] {
                let ov = x.inner(y).unwrap();
                assert!((ov.norm() - 1.0).abs() < 1e-12);
                let ph = ov / ov.norm();
                for (u, v) in x.amplitudes().iter().zip(y.amplitudes()) {
                    assert!((u * ph - v).norm() < 1e-12);
                }
            }
            assert!(p01.inner(&p02).unwrap().norm() < 1e-15);
            assert_eq!(word_parity(&p02).unwrap(), -word_parity(&p01).unwrap());
            let (n01, n02) = cat_pair_mean_photons(m, 0.55f64.tanh());
            assert!((p01.mean_photon(0).unwrap() - n01).abs() < 1e-12);
            assert!((p02.mean_photon(0).unwrap() - n02).abs() < 1e-12);
        }
        assert!(cat_like_pair(1, SqueezeParam::new(0.5, 0.0).unwrap(), 5).is_err());
    }

    #[test]
    fn binomial_pair_passes_kl() {
        let p = binomial_codewords(10).unwrap();
        let r = kl_check(&p, &loss_and_dephasing_error_set(10), 1e-8).unwrap();
        assert!(r.passed, "{}", r.max_defect);
        assert!(kl_check(&p, &loss_error_set(9), 1e-8).is_err());
    }

    #[test]
    fn unbalanced_cat_pair_fails_number_block() {
        let th = 0.1f64.sqrt().asin();
        let bal = balance_cat_pair(5, th).unwrap();
        let off = SqueezeParam::from_db(bal.db() + 1.0, 0.0).unwrap().effective(th.cos());
        let pair = cat_code_pair(5, off, 10).unwrap();
        let r = kl_check(&pair, &[crate::fock::number_operator_dim(10)], 1e-8).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn imperfect_word_examples() {
        let perfect = imperfect_codeword(LogicalWord::Zero, 1.0, 10).unwrap();
        assert_eq!(perfect.delta, 0.0);
        let cw = imperfect_codeword(LogicalWord::Zero, 0.9, 10).unwrap();
        assert!((cw.ratio() - 0.4243).abs() < 1e-4);
        assert!(cw.ideal.to_density().matrix().max_abs() > 0.0);
        assert!(fidelity_zero(&cw) < 1e-12);
        assert!(imperfect_codeword(LogicalWord::One, 0.0, 10).is_err());
        assert_eq!(incorrect_diagnosis_probability(0.0).unwrap(), 0.0);
        assert!((incorrect_diagnosis_probability(0.1).unwrap() - 0.1).abs() < 1e-15);
    }

    fn fidelity_zero(cw: &ImperfectCodeword) -> f64 {
        crate::analysis::fidelity_pure(&cw.error_state, &cw.ideal).unwrap()
    }

    #[test]
    fn error_components_follow_from_neighbouring_outcome() {
        for (which, m) in [(LogicalWord::Zero, 2), (LogicalWord::One, 4)] {
            let s = binomial_threshold(which);
            let next = final_state(OutcomePattern::new(1, 1, m + 1), s).unwrap().to_state(10).unwrap();
            let e = error_component(which, 10).unwrap();
            assert!((next.inner(&e).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn error_branch_mimics_code_parity_after_jump() {
        let cw = imperfect_codeword(LogicalWord::Zero, 0.95, 10).unwrap();
        let a = annihilator_dim(10).matrix();
        let jumped = a.matmul(cw.error_state.matrix()).matmul(&a.adjoint());
        let even: f64 = (0..10).step_by(2).map(|n| jumped[(n, n)].re).sum();
        assert!(even > 0.0);
    }

    #[test]
    fn no_jump_terms() {
        let cw = imperfect_codeword(LogicalWord::Zero, 0.97, 10).unwrap();
        let same = no_jump_transform(&cw, 0.0).unwrap().total();
        assert!(same.matrix().max_abs_diff(cw.density().matrix()) < 1e-15);
        let pure = imperfect_codeword(LogicalWord::Zero, 1.0, 10).unwrap();
        let nj = no_jump_transform(&pure, 0.05).unwrap();
        assert_eq!(nj.coupled_error.matrix().max_abs(), 0.0);
        assert_eq!(nj.preserved_error.matrix().max_abs(), 0.0);
        for g in [1e-3, 2e-3, 4e-3, 8e-3] {
            let w = no_jump_transform(&cw, g).unwrap().coupled_weight();
            assert!((w / (cw.delta * g) - 3.5).abs() < 1e-12);
        }
    }
}
