//! Pure-loss channel in Kraus form and the lossy photon-number-resolving
//! detector. Dark counts are not modelled.

use alloc::vec::Vec;

use crate::fock::{DensityOperator, ModeOperator};
use crate::linalg::CMatrix;
use crate::math::{binomial_pmf, exp, factorial, ln_binomial, sqrt};
use crate::{Error, Result, C64};

/// Loss `gamma = alpha L` with Kraus operators `E_0 .. E_{k_max}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParam {
    pub gamma: f64,
    pub k_max: usize,
}

impl LossParam {
    pub fn new(gamma: f64, k_max: usize) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("loss gamma must be finite and non-negative"));
        }
        Ok(Self { gamma, k_max })
    }

    /// `k_max = dim - 1`, which makes the Kraus set complete on the
    /// truncated space.
    pub fn complete(gamma: f64, dim: usize) -> Result<Self> {
        Self::new(gamma, dim.saturating_sub(1))
    }

    /// Probability that a single photon is lost, `1 - e^{-gamma}`.
    pub fn loss_fraction(&self) -> f64 {
        1.0 - exp(-self.gamma)
    }
}

/// `<n-k| E_k |n>`, i.e. `sqrt(C(n,k) (1-e^{-g})^k e^{-g(n-k)})`.
fn kraus_element(gamma: f64, n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if gamma == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let p = 1.0 - exp(-gamma);
    sqrt(exp(ln_binomial(n, k) + k as f64 * crate::math::ln(p) - gamma * (n - k) as f64))
}

/// `E_k = sqrt((1-e^{-g})^k / k!) e^{-g n/2} a^k` on a mode of dimension `dim`.
pub fn kraus_operator(loss: &LossParam, dim: usize, k: usize) -> Result<ModeOperator> {
    if k > loss.k_max {
        return Err(Error::invalid("Kraus index exceeds k_max"));
    }
    let mut m = CMatrix::zeros(dim);
    for n in k..dim {
        m[(n - k, n)] = C64::new(kraus_element(loss.gamma, n, k), 0.0);
    }
    ModeOperator::from_matrix(alloc::vec![dim], m)
}

/// `rho' = sum_k E_k rho E_k^dagger`. Uses the shifted-diagonal structure of
/// `E_k` directly, `O(d^2 k_max)`.
pub fn apply_loss(rho: &DensityOperator, loss: &LossParam) -> Result<DensityOperator> {
    let d = rho.dim();
    if rho.mode_dims().len() != 1 {
        return Err(Error::invalid("loss channel acts on a single mode"));
    }
    let a = rho.matrix();
    let kmax = loss.k_max.min(d.saturating_sub(1));
    let table: Vec<Vec<f64>> = (0..=kmax).map(|k| (0..d).map(|n| kraus_element(loss.gamma, n, k)).collect()).collect();
    let mut out = CMatrix::zeros(d);
    for (k, e) in table.iter().enumerate() {
        for i in 0..d - k {
            for j in 0..d - k {
                out[(i, j)] += a[(i + k, j + k)] * (e[i + k] * e[j + k]);
            }
        }
    }
    DensityOperator::single_mode(out)
}

/// `P_k = Tr[E_k^dagger E_k rho]`.
pub fn loss_probability(rho: &DensityOperator, loss: &LossParam, k: usize) -> Result<f64> {
    if k > loss.k_max {
        return Err(Error::invalid("Kraus index exceeds k_max"));
    }
    let pops = rho.populations();
    let p = loss.loss_fraction();
    Ok(pops.iter().enumerate().map(|(n, w)| w * binomial_pmf(n, k, p)).sum())
}

/// Leading-order `P_k ~ (g^k / k!) Tr[a^k rho a^dagger^k]`.
pub fn loss_probability_leading_order(rho: &DensityOperator, gamma: f64, k: usize) -> f64 {
    let falling: f64 = rho
        .populations()
        .iter()
        .enumerate()
        .filter(|(n, _)| *n >= k)
        .map(|(n, w)| w * (n - k + 1..=n).map(|j| j as f64).product::<f64>())
        .sum();
    crate::math::powi(gamma, k as i32) / factorial(k) * falling
}

/// Photon-number-resolving detector of efficiency `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub eta: f64,
    pub n_max: usize,
}

impl DetectorModel {
    pub fn new(eta: f64, n_max: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid("detector efficiency must lie in [0, 1]"));
        }
        Ok(Self { eta, n_max })
    }

    pub fn ideal(n_max: usize) -> Self {
        Self { eta: 1.0, n_max }
    }

    /// `p(n | m) = C(m, n) eta^n (1 - eta)^{m-n}`.
    pub fn click_probability(&self, n: usize, m: usize) -> f64 {
        binomial_pmf(m, n, self.eta)
    }

    /// Diagonal of `Pi_n` over `m = 0..=n_max`.
    pub fn povm_diagonal(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.n_max {
            return Err(Error::invalid("click number beyond detector range"));
        }
        Ok((0..=self.n_max).map(|m| self.click_probability(n, m)).collect())
    }
}

/// `Pi_n = sum_{m >= n} C(m,n) eta^n (1-eta)^{m-n} |m><m|`.
pub fn pnr_povm(det: &DetectorModel, n: usize) -> Result<ModeOperator> {
    let diag: Vec<C64> = det.povm_diagonal(n)?.into_iter().map(|w| C64::new(w, 0.0)).collect();
    ModeOperator::from_matrix(alloc::vec![det.n_max + 1], CMatrix::from_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PureState;

    fn random_density(d: usize, seed: u64) -> DensityOperator {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = C64::new(next(), next());
            }
        }
        let rho = a.matmul(&a.adjoint());
        let tr = rho.trace().re;
        DensityOperator::single_mode(rho.scale(C64::new(1.0 / tr, 0.0))).unwrap()
    }

    #[test]
    fn kraus_trivial_cases() {
        let l = LossParam::new(0.0, 5).unwrap();
        let e0 = kraus_operator(&l, 6, 0).unwrap().matrix();
        assert!(e0.max_abs_diff(&CMatrix::identity(6)) < 1e-15);
        for k in 1..=5 {
            assert_eq!(kraus_operator(&l, 6, k).unwrap().matrix().max_abs(), 0.0);
        }
        assert!(kraus_operator(&l, 6, 6).is_err());
    }

    #[test]
    fn kraus_completeness() {
        let d = 21;
        let l = LossParam::complete(0.2, d).unwrap();
        let mut sum = CMatrix::zeros(d);
        for k in 0..=l.k_max {
            let e = kraus_operator(&l, d, k).unwrap().matrix();
            sum = sum.add(&e.adjoint().matmul(&e));
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(d)) < 1e-9);
    }

    #[test]
    fn loss_on_single_photon() {
        let rho = PureState::fock(2, 1).unwrap().to_density();
        let out = apply_loss(&rho, &LossParam::complete(0.1, 2).unwrap()).unwrap();
        let e = (-0.1f64).exp();
        assert!((out.matrix()[(0, 0)].re - (1.0 - e)).abs() < 1e-15);
        assert!((out.matrix()[(1, 1)].re - e).abs() < 1e-15);
        assert!(out.matrix()[(0, 1)].norm() < 1e-15);

        let vac = PureState::fock(5, 0).unwrap().to_density();
        let v = apply_loss(&vac, &LossParam::complete(0.7, 5).unwrap()).unwrap();
        assert!(v.matrix().max_abs_diff(vac.matrix()) < 1e-15);
    }

    #[test]
    fn loss_matches_explicit_kraus_sum() {
        let d = 8;
        let rho = random_density(d, 3);
        let l = LossParam::complete(0.3, d).unwrap();
        let fast = apply_loss(&rho, &l).unwrap();
        let mut slow = CMatrix::zeros(d);
        for k in 0..d {
            let e = kraus_operator(&l, d, k).unwrap().matrix();
            slow = slow.add(&e.matmul(rho.matrix()).matmul(&e.adjoint()));
        }
        assert!(fast.matrix().max_abs_diff(&slow) < 1e-14);
        assert!((fast.trace() - 1.0).abs() < 1e-9);
        assert!(fast.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn loss_probabilities_sum_to_one() {
        let rho = random_density(10, 9);
        let l = LossParam::complete(0.4, 10).unwrap();
        assert_eq!(loss_probability(&rho, &LossParam::new(0.0, 0).unwrap(), 0).unwrap(), 1.0);
        let total: f64 = (0..10).map(|k| loss_probability(&rho, &l, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn povm_examples() {
        let ideal = DetectorModel::ideal(6);
        for n in 0..=6 {
            let d = ideal.povm_diagonal(n).unwrap();
            for (m, w) in d.iter().enumerate() {
                assert_eq!(*w, if m == n { 1.0 } else { 0.0 });
            }
        }
        let det = DetectorModel::new(0.73, 12).unwrap();
        let mut sum = [0.0f64; 13];
        for n in 0..=12 {
            for (s, w) in sum.iter_mut().zip(det.povm_diagonal(n).unwrap()) {
                *s += w;
            }
        }
        for s in sum {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let p1 = pnr_povm(&det, 1).unwrap().matrix();
        assert!((p1[(2, 2)].re - 2.0 * 0.73 * 0.27).abs() < 1e-15);
        assert!(det.povm_diagonal(13).is_err());
        assert!(DetectorModel::new(1.2, 3).is_err());
    }
}
