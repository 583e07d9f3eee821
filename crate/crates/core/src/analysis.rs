//! State metrics: Wigner function and its negativity, fidelity, parity,
//! rotation-symmetry order, mean photon number.
//!
//! Phase-space convention: `hbar = 1`, `a = (q + i p)/sqrt(2)`, vacuum
//! variance 1/2 in each quadrature and `∫∫ W dq dp = 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::fock::{DensityOperator, PureState};
use crate::linalg::{psd_sqrt, CMatrix, HermitianEigen};
use crate::math::{cis, exp, ln, ln_factorial, sqrt};
use crate::{Error, Result, C64};

const PI: f64 = core::f64::consts::PI;

/// Rectangular phase-space grid, inclusive of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    /// Points per axis.
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { q_range: (-6.0, 6.0), p_range: (-6.0, 6.0), resolution: 241 }
    }
}

impl GridSpec {
    pub fn square(half_width: f64, resolution: usize) -> Self {
        Self { q_range: (-half_width, half_width), p_range: (-half_width, half_width), resolution }
    }

    /// Default grid, widened (at the default spacing) for states with
    /// `<n> > 8` so the classical turning radius `sqrt(2n+1)` stays well
    /// inside.
    pub fn for_mean_photon(mean: f64) -> Self {
        let base = Self::default();
        if mean <= 8.0 {
            return base;
        }
        let half = crate::math::ceil(sqrt(4.0 * mean + 2.0) + 2.0);
        let step = 12.0 / 240.0;
        Self::square(half, (2.0 * half / step) as usize + 1)
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        // symmetric ranges map i and n-1-i to exact negatives
        let (lo, hi) = range;
        (0..n)
            .map(|i| {
                let j = n - 1 - i;
                (lo * j as f64 + hi * i as f64) / (n - 1) as f64
            })
            .collect()
    }

    pub fn q_axis(&self) -> Vec<f64> {
        Self::axis(self.q_range, self.resolution)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        Self::axis(self.p_range, self.resolution)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.q_range.0, self.q_range.1, self.p_range.0, self.p_range.1].iter().all(|v| v.is_finite());
        if !finite || self.q_range.0 >= self.q_range.1 || self.p_range.0 >= self.p_range.1 || self.resolution < 2 {
            return Err(Error::invalid("Wigner grid must have finite increasing ranges and >= 2 points"));
        }
        Ok(())
    }
}

/// Wigner function sampled on a grid; `values[iq * resolution + ip]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.p.len() + ip]
    }

    /// 2-D trapezoid rule of `f(q, p, W)`.
    pub fn integrate(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let (nq, np) = (self.q.len(), self.p.len());
        let hq = (self.spec.q_range.1 - self.spec.q_range.0) / (nq - 1) as f64;
        let hp = (self.spec.p_range.1 - self.spec.p_range.0) / (np - 1) as f64;
        let mut acc = 0.0;
        for (i, &q) in self.q.iter().enumerate() {
            let wq = if i == 0 || i == nq - 1 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for (j, &p) in self.p.iter().enumerate() {
                let wp = if j == 0 || j == np - 1 { 0.5 } else { 1.0 };
                row += wp * f(q, p, self.at(i, j));
            }
            acc += wq * row;
        }
        acc * hq * hp
    }

    pub fn total(&self) -> f64 {
        self.integrate(|_, _, w| w)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫∫ W (q^2 + p^2)/2`, which equals `<n> + 1/2`.
    pub fn energy_moment(&self) -> f64 {
        self.integrate(|q, p, w| w * 0.5 * (q * q + p * p))
    }

    /// Largest `|W(q,p) - W(-p,q)|`; zero for 4-fold symmetric states.
    /// Needs a square grid symmetric about the origin.
    pub fn quarter_turn_defect(&self) -> Result<f64> {
        let n = self.q.len();
        if self.p.len() != n || self.spec.q_range != self.spec.p_range || self.spec.q_range.0 != -self.spec.q_range.1 {
            return Err(Error::invalid("quarter-turn check needs a square grid centred on the origin"));
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                // (-p_j, q_i) sits at q-index n-1-j, p-index i
                worst = worst.max((self.at(i, j) - self.at(n - 1 - j, i)).abs());
            }
        }
        Ok(worst)
    }

    /// Largest `|W(q,p) - W(-q,-p)|`; zero for 2-fold symmetric states.
    pub fn half_turn_defect(&self) -> f64 {
        let (nq, np) = (self.q.len(), self.p.len());
        let mut worst = 0.0f64;
        for i in 0..nq {
            for j in 0..np {
                worst = worst.max((self.at(i, j) - self.at(nq - 1 - i, np - 1 - j)).abs());
            }
        }
        worst
    }
}

/// Per-state precomputation for pointwise Wigner evaluation.
#[derive(Debug, Clone)]
pub struct WignerEvaluator {
    dim: usize,
    /// `coef[k][n]` multiplies `W_{|n+k><n|}`; off-diagonal entries already
    /// carry the factor 2 from the Hermitian partner.
    coef: Vec<Vec<C64>>,
    /// `sqrt(n!/(n+k)!) (-1)^n`, same layout.
    norm: Vec<Vec<f64>>,
}

impl WignerEvaluator {
    pub fn new(rho: &DensityOperator) -> Self {
        let d = rho.dim();
        let m = rho.matrix();
        let mut coef = Vec::with_capacity(d);
        let mut norm = Vec::with_capacity(d);
        for k in 0..d {
            let mut c = Vec::with_capacity(d - k);
            let mut w = Vec::with_capacity(d - k);
            for n in 0..d - k {
                let factor = if k == 0 { 1.0 } else { 2.0 };
                c.push(m[(n + k, n)] * factor);
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                w.push(sign * exp(0.5 * (ln_factorial(n) - ln_factorial(n + k))));
            }
            coef.push(c);
            norm.push(w);
        }
        Self { dim: d, coef, norm }
    }

    /// `W(q, p) = sum_{mn} rho_mn W_{|m><n|}(q, p)`, where for `m = n + k`
    /// `W_{|m><n|} = (-1)^n/pi sqrt(n!/m!) (sqrt(2)(q - i p))^k e^{-r^2} L_n^k(2 r^2)`.
    pub fn eval(&self, q: f64, p: f64) -> f64 {
        let r2 = q * q + p * p;
        let x = 2.0 * r2;
        let z = C64::new(q, -p) * core::f64::consts::SQRT_2;
        let mut zk = C64::new(1.0, 0.0);
        let mut acc = 0.0;
        for k in 0..self.dim {
            let coefs = &self.coef[k];
            if coefs.iter().any(|c| c.re != 0.0 || c.im != 0.0) {
                // L_n^k(x) by the three-term recurrence
                let kf = k as f64;
                let (mut l_prev, mut l_cur) = (0.0, 1.0);
                let mut sum = C64::new(0.0, 0.0);
                for (n, c) in coefs.iter().enumerate() {
                    if n > 0 {
                        let nf = n as f64;
                        let next = ((2.0 * nf - 1.0 + kf - x) * l_cur - (nf - 1.0 + kf) * l_prev) / nf;
                        l_prev = l_cur;
                        l_cur = next;
                    }
                    sum += c * (self.norm[k][n] * l_cur);
                }
                acc += (sum * zk).re;
            }
            zk *= z;
        }
        acc * exp(-r2) / PI
    }
}

/// Wigner function of `rho` on `grid`.
pub fn wigner(rho: &DensityOperator, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    let ev = WignerEvaluator::new(rho);
    let q = grid.q_axis();
    let p = grid.p_axis();
    let mut values = Vec::with_capacity(q.len() * p.len());
    for &qi in &q {
        for &pj in &p {
            values.push(ev.eval(qi, pj));
        }
    }
    Ok(WignerGrid { spec: *grid, q, p, values })
}

/// Acceptable deviation of `∫W` from one before the grid is rejected.
pub const COVERAGE_TOLERANCE: f64 = 1e-3;

fn check_coverage(grid: &WignerGrid) -> Result<()> {
    let total = grid.total();
    if (total - 1.0).abs() > COVERAGE_TOLERANCE {
        return Err(Error::GridCoverage(total));
    }
    Ok(())
}

/// Minimum of `W` over the grid.
pub fn wigner_negativity(grid: &WignerGrid) -> Result<f64> {
    check_coverage(grid)?;
    Ok(grid.min())
}

/// Wigner log-negativity `ln ∫∫ |W|`.
pub fn wln(grid: &WignerGrid) -> Result<f64> {
    check_coverage(grid)?;
    Ok(ln(grid.integrate(|_, _, w| w.abs())))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    for m in [rho, sigma] {
        let e = m.min_eigenvalue();
        if e < -1e-9 {
            return Err(Error::NotPositive(e));
        }
    }
    let s = psd_sqrt(rho.matrix());
    let inner = s.matmul(sigma.matrix()).matmul(&s);
    // symmetrise away rounding before the eigen-decomposition
    let inner = inner.add(&inner.adjoint()).scale(C64::new(0.5, 0.0));
    let tr: f64 = HermitianEigen::new(&inner).values.iter().map(|&l| sqrt(l.max(0.0))).sum();
    Ok((tr * tr).min(1.0))
}

/// `<psi| rho |psi>`; `psi` is zero padded or must fit in `rho`'s dimension.
pub fn fidelity_pure(rho: &DensityOperator, psi: &PureState) -> Result<f64> {
    let amps = psi.amplitudes();
    if amps.len() > rho.dim() && amps[rho.dim()..].iter().any(|c| c.norm_sqr() > 0.0) {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: amps.len() });
    }
    let m = rho.matrix();
    let d = rho.dim().min(amps.len());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += amps[i].conj() * m[(i, j)] * amps[j];
        }
    }
    Ok(acc.re)
}

/// `max_phi <psi| e^{i phi n} rho e^{-i phi n} |psi>`: fidelity up to a
/// phase-space rotation, i.e. up to the phase of the squeezing.
pub fn phase_aligned_fidelity(rho: &DensityOperator, psi: &PureState) -> Result<(f64, f64)> {
    let amps = psi.amplitudes();
    let d = rho.dim().min(amps.len());
    if amps[d..].iter().any(|c| c.norm_sqr() > 0.0) {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: amps.len() });
    }
    let m = rho.matrix();
    // f(phi) = sum_{ij} conj(psi_i) rho_ij psi_j e^{i phi (i-j)}
    let mut by_diff = vec![C64::new(0.0, 0.0); 2 * d];
    for i in 0..d {
        for j in 0..d {
            by_diff[i + d - j] += amps[i].conj() * m[(i, j)] * amps[j];
        }
    }
    let f = |phi: f64| -> f64 {
        by_diff.iter().enumerate().map(|(idx, c)| (c * cis(phi * (idx as f64 - d as f64))).re).sum()
    };
    let steps = 2048;
    let h = 2.0 * PI / steps as f64;
    let (mut best_phi, mut best) = (0.0, f(0.0));
    for s in 1..steps {
        let v = f(s as f64 * h);
        if v > best {
            best = v;
            best_phi = s as f64 * h;
        }
    }
    // golden-section refinement inside the bracketing cell
    let (mut a, mut b) = (best_phi - h, best_phi + h);
    let g = 0.5 * (sqrt(5.0) - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if f(c) > f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let phi = 0.5 * (a + b);
    let v = f(phi);
    Ok(if v > best { (v, phi) } else { (best, best_phi) })
}

/// Photon-number parity: `Some(1)` for even support, `Some(-1)` for odd,
/// `None` when both carry more than `1e-12` population.
pub fn parity(rho: &DensityOperator) -> Option<i8> {
    parity_of_populations(&rho.populations())
}

pub fn parity_of_populations(pops: &[f64]) -> Option<i8> {
    let total: f64 = pops.iter().sum();
    let odd: f64 = pops.iter().skip(1).step_by(2).sum();
    let even = total - odd;
    let tol = 1e-12 * total.max(1e-300);
    if odd <= tol {
        Some(1)
    } else if even <= tol {
        Some(-1)
    } else {
        None
    }
}

/// Largest `K <= 8` such that the photon-number distribution sits on every
/// `K`-th level counted from its lowest occupied level, tested as
/// `|<Pi_K> e^{-2 pi i n_min / K} - 1| < 1e-9` with `Pi_K = e^{2 pi i n / K}`.
/// A single Fock level is symmetric under every rotation and returns 8;
/// `None` when only `K = 1` holds.
pub fn symmetry_order(rho: &DensityOperator) -> Option<usize> {
    symmetry_order_of_populations(&rho.populations())
}

pub fn symmetry_order_of_populations(pops: &[f64]) -> Option<usize> {
    let sparse: Vec<(usize, f64)> = pops.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
    symmetry_order_of_sparse(&sparse)
}

/// As [`symmetry_order_of_populations`] for `(level, population)` pairs in
/// ascending level order.
pub fn symmetry_order_of_sparse(pops: &[(usize, f64)]) -> Option<usize> {
    let total: f64 = pops.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let n_min = pops.iter().find(|e| e.1 > 1e-12 * total)?.0;
    (2..=8usize).rev().find(|&k| {
        let s: C64 = pops
            .iter()
            .filter(|e| e.0 >= n_min)
            .map(|&(n, p)| cis(2.0 * PI * (n - n_min) as f64 / k as f64) * (p / total))
            .sum();
        (s - 1.0).norm() < 1e-9
    })
}

/// Number of Fock levels holding more than `tol` of the population.
pub fn fock_component_count(pops: &[f64], tol: f64) -> usize {
    let total: f64 = pops.iter().sum();
    pops.iter().filter(|&&p| p > tol * total).count()
}

pub fn mean_photon(rho: &DensityOperator) -> f64 {
    rho.mean_photon()
}

/// `Tr[Pi_K rho]` for `Pi_K = e^{2 pi i n / K}`.
pub fn super_parity_expectation(rho: &DensityOperator, k: usize) -> C64 {
    rho.populations().iter().enumerate().map(|(n, &p)| cis(2.0 * PI * n as f64 / k as f64) * p).sum()
}

/// Matrix of `rho` rotated in phase space by `phi`: `e^{i phi n} rho e^{-i phi n}`.
pub fn rotate(rho: &DensityOperator, phi: f64) -> DensityOperator {
    let d = rho.dim();
    let src = rho.matrix();
    let mut m = CMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = src[(i, j)] * cis(phi * (i as f64 - j as f64));
        }
    }
    DensityOperator::single_mode(m).expect("rotation preserves Hermiticity")
}
