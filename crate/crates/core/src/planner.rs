//! Outcome enumeration, symmetry-filtered aggregates, multiplexing and the
//! balanced cat-pair table.

use alloc::vec;
use alloc::vec::Vec;

use crate::analytic::{branch_probability, final_state_with, CoefficientTable, OutcomePattern};
use crate::codes::{balance_cat_pair, binomial_threshold, LogicalWord};
use crate::dense::{theta_from_reflectivity, DenseProtocol, Network};
use crate::fock::TruncationConfig;
use crate::math::{binomial_pmf, cos, cosh, exp, ln, ln_binomial, sin, sinh, tanh};
use crate::squeeze::{db_to_r, SqueezeParam};
use crate::{Error, Result};

pub const DEFAULT_CUTOFF: f64 = 1e-8;
/// Cap on the photon number reaching the third detector.
pub const DEFAULT_SWEEP_N_MAX: usize = 400;
/// Population below which a Fock level does not count as a component.
const COMPONENT_TOLERANCE: f64 = 1e-14;

/// Which heralded outputs count towards an aggregate. All filters also
/// require a genuine superposition (at least two Fock components).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeFilter {
    /// Symmetry order divisible by 2, which includes every 4-fold state.
    AnyTwoFold,
    /// Symmetry order divisible by 4.
    AnyFourFold,
    /// Exactly `k` components and symmetry order divisible by `fold`.
    KComponents {
        k: usize,
        fold: usize,
    },
    Exact(OutcomePattern),
}

impl OutcomeFilter {
    /// Decision from the outcome and the output's photon-number populations
    /// as ascending `(level, population)` pairs.
    pub fn accepts(&self, outcome: &OutcomePattern, populations: &[(usize, f64)]) -> bool {
        let Some((count, order)) = classify(populations) else {
            return false;
        };
        if count < 2 {
            return false;
        }
        let divisible = |f: usize| order.is_some_and(|k| k % f == 0);
        match *self {
            OutcomeFilter::AnyTwoFold => divisible(2),
            OutcomeFilter::AnyFourFold => divisible(4),
            OutcomeFilter::KComponents { k, fold } => count == k && divisible(fold),
            OutcomeFilter::Exact(o) => o == *outcome,
        }
    }
}

/// Component count and symmetry order (largest `K <= 8` dividing every
/// level spacing) over the levels holding more than the component
/// tolerance. `None` for an empty distribution.
fn classify(populations: &[(usize, f64)]) -> Option<(usize, Option<usize>)> {
    let total: f64 = populations.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut levels = populations.iter().filter(|e| e.1 > COMPONENT_TOLERANCE * total).map(|e| e.0);
    let first = levels.next()?;
    let mut count = 1;
    let mut g = 0usize;
    for n in levels {
        count += 1;
        g = gcd(g, n - first);
    }
    let order = if g == 0 { Some(8) } else { (2..=8).rev().find(|k| g % k == 0) };
    Some((count, order))
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub squeeze_db: Vec<f64>,
    /// Subtraction beamsplitter reflectivities `r^2`.
    pub reflectivity: Vec<f64>,
    pub filter: OutcomeFilter,
    /// Efficiencies of the third detector.
    pub eta: Vec<f64>,
    /// Largest photon number considered at the third detector.
    pub n_max: usize,
    pub cutoff: f64,
}

impl SweepSpec {
    pub fn new(squeeze_db: Vec<f64>, reflectivity: Vec<f64>, filter: OutcomeFilter) -> Self {
        Self { squeeze_db, reflectivity, filter, eta: vec![1.0], n_max: DEFAULT_SWEEP_N_MAX, cutoff: DEFAULT_CUTOFF }
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeeze_db.is_empty() || self.reflectivity.is_empty() || self.eta.is_empty() {
            return Err(Error::invalid("sweep grids must be non-empty"));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::invalid("tail cutoff must be positive"));
        }
        if self.squeeze_db.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::invalid("squeezing must be finite and non-negative"));
        }
        if self.reflectivity.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::invalid("reflectivity must lie in [0, 1)"));
        }
        if self.eta.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::invalid("detector efficiency must lie in (0, 1]"));
        }
        if let OutcomeFilter::KComponents { fold, .. } = self.filter {
            if fold == 0 {
                return Err(Error::invalid("symmetry fold must be positive"));
            }
        }
        Ok(())
    }

    /// Grid points in output order: squeezing outermost, then reflectivity,
    /// then efficiency.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.squeeze_db.len() * self.reflectivity.len() * self.eta.len());
        for &db in &self.squeeze_db {
            for &r2 in &self.reflectivity {
                for &eta in &self.eta {
                    out.push(GridPoint { squeeze_db: db, reflectivity: r2, eta });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub squeeze_db: f64,
    pub reflectivity: f64,
    pub eta: f64,
}

/// One heralded branch with ideal detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub outcome: OutcomePattern,
    pub probability: f64,
    /// Photon-number populations of the normalised output, as ascending
    /// `(level, population)` pairs.
    pub populations: Vec<(usize, f64)>,
    pub mean_photon: f64,
}

/// All ideal-detection branches with non-negligible weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Ordered by total `N`, then `n3`, then `n1`.
    pub branches: Vec<Branch>,
    /// `1 -` the enumerated `(N, n3)` marginal mass.
    pub leftover: f64,
}

impl Enumeration {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

/// Probability that `total` photons are reflected towards the subtraction
/// detectors, whatever reaches the third detector: a thermal pair number
/// `n` with each of the `2n` photons reflected independently.
pub fn reflected_marginal(r: f64, theta: f64, total: usize) -> f64 {
    if r == 0.0 {
        return if total == 0 { 1.0 } else { 0.0 };
    }
    let (s, c) = (sin(theta), cos(theta));
    if total > 0 && s == 0.0 {
        return 0.0;
    }
    let lt = 2.0 * ln(tanh(r));
    let base = -2.0 * ln(cosh(r));
    let mut acc = 0.0;
    let mut n = total.div_ceil(2);
    loop {
        let kept = 2 * n - total;
        let mut lnp = base + n as f64 * lt + ln_binomial(2 * n, total);
        if total > 0 {
            lnp += 2.0 * total as f64 * ln(s);
        }
        if kept > 0 {
            if c == 0.0 {
                break;
            }
            lnp += 2.0 * kept as f64 * ln(c);
        }
        let term = exp(lnp);
        acc += term;
        // terms decay geometrically once past the peak
        if (term < 1e-18 * acc && n > total + 8) || n > 200_000 {
            break;
        }
        n += 1;
    }
    acc
}

/// Enumerates `[n1, n2, n3]` in increasing `N = n1 + n2`, then `n3`, until
/// the unvisited marginal mass is below `cutoff`. `cutoff/2` is spent on
/// the `N` tail and `cutoff/2^{N+2}` on the `n3` tail of each `N`.
pub fn enumerate_outcomes(squeeze: SqueezeParam, theta: f64, cutoff: f64, n3_cap: usize) -> Result<Enumeration> {
    if !(cutoff > 0.0) {
        return Err(Error::invalid("tail cutoff must be positive"));
    }
    let r = squeeze.r;
    let eff = squeeze.effective(cos(theta));
    let mut branches = Vec::new();
    let mut covered = 0.0;
    let mut n_done = 0.0;
    let mut table = CoefficientTable::new(8);
    let mut total = 0usize;
    while 1.0 - n_done >= cutoff / 2.0 {
        let p_n = reflected_marginal(r, theta, total);
        n_done += p_n;
        let budget = cutoff / exp2(total + 2);
        if p_n > budget {
            table.extend_to(total);
            let mut within = 0.0;
            let mut n3 = 0usize;
            while p_n - within >= budget && n3 <= n3_cap {
                let marginal = crate::analytic::subtraction_marginal(r, theta, total, n3);
                within += marginal;
                if marginal > 0.0 {
                    for n1 in 0..=total {
                        let coeffs = table.get(n1, total - n1).expect("table covers total");
                        let spec = match final_state_with(coeffs, n3, eff) {
                            Ok(s) => s,
                            Err(Error::ZeroProbability) => continue,
                            Err(e) => return Err(e),
                        };
                        let probability = branch_probability(&spec, r, theta);
                        let populations = spec.components.iter().map(|&(n, c)| (n, c.norm_sqr())).collect();
                        branches.push(Branch {
                            outcome: spec.outcome,
                            probability,
                            populations,
                            mean_photon: spec.mean_photon(),
                        });
                    }
                }
                n3 += 1;
            }
            covered += within;
        }
        total += 1;
        if total > 4 * n3_cap + 64 {
            break;
        }
    }
    Ok(Enumeration { branches, leftover: (1.0 - covered).max(0.0) })
}

fn exp2(k: usize) -> f64 {
    crate::math::powi(2.0, k.min(1000) as i32)
}

/// Branches after a third detector of efficiency `eta`: for each
/// `(n1, n2)` the detected count `j` mixes the ideal branches `m >= j` with
/// weights `P[n1,n2,m] C(m,j) eta^j (1-eta)^{m-j}`. Populations suffice
/// because the branches add incoherently.
pub fn detect_with_efficiency(ideal: &Enumeration, eta: f64) -> Vec<Branch> {
    if eta == 1.0 {
        return ideal.branches.clone();
    }
    let mut groups: Vec<((usize, usize), Vec<&Branch>)> = Vec::new();
    for b in &ideal.branches {
        let key = (b.outcome.n1, b.outcome.n2);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(b),
            None => groups.push((key, vec![b])),
        }
    }
    let mut out = Vec::new();
    for ((n1, n2), members) in groups {
        let top = members.iter().map(|b| b.outcome.n3).max().unwrap_or(0);
        for j in 0..=top {
            let mut probability = 0.0;
            let mut pops: Vec<f64> = Vec::new();
            for b in members.iter().filter(|b| b.outcome.n3 >= j) {
                let w = b.probability * binomial_pmf(b.outcome.n3, j, eta);
                if w == 0.0 {
                    continue;
                }
                probability += w;
                for &(n, p) in &b.populations {
                    if pops.len() <= n {
                        pops.resize(n + 1, 0.0);
                    }
                    pops[n] += w * p;
                }
            }
            if probability <= 0.0 {
                continue;
            }
            let pops: Vec<(usize, f64)> =
                pops.into_iter().enumerate().filter(|e| e.1 != 0.0).map(|(n, p)| (n, p / probability)).collect();
            let mean_photon = pops.iter().map(|&(n, p)| n as f64 * p).sum();
            out.push(Branch { outcome: OutcomePattern::new(n1, n2, j), probability, populations: pops, mean_photon });
        }
    }
    out
}

/// Aggregate at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: GridPoint,
    /// Sum of `P` over accepted outcomes.
    pub probability: f64,
    /// Probability-weighted mean photon number; `None` when nothing passes.
    pub mean_photon: Option<f64>,
    /// `sinh^2 R` of one input mode.
    pub input_mean_photon: f64,
    /// Sum of `P` over every enumerated outcome.
    pub enumerated_probability: f64,
    pub leftover: f64,
    pub accepted_outcomes: usize,
}

pub fn evaluate_point(point: GridPoint, filter: OutcomeFilter, cutoff: f64, n3_cap: usize) -> Result<PointResult> {
    let squeeze = SqueezeParam::from_db(point.squeeze_db, 0.0)?;
    let theta = theta_from_reflectivity(point.reflectivity)?;
    let ideal = enumerate_outcomes(squeeze, theta, cutoff, n3_cap)?;
    let branches = detect_with_efficiency(&ideal, point.eta);
    let mut probability = 0.0;
    let mut weighted = 0.0;
    let mut accepted = 0usize;
    let mut enumerated = 0.0;
    for b in &branches {
        enumerated += b.probability;
        if filter.accepts(&b.outcome, &b.populations) {
            probability += b.probability;
            weighted += b.probability * b.mean_photon;
            accepted += 1;
        }
    }
    let sh = sinh(squeeze.r);
    Ok(PointResult {
        point,
        probability,
        mean_photon: (probability > 0.0).then(|| weighted / probability),
        input_mean_photon: sh * sh,
        enumerated_probability: enumerated,
        leftover: ideal.leftover,
        accepted_outcomes: accepted,
    })
}

/// Every grid point of `spec`, in [`SweepSpec::points`] order.
pub fn aggregate_probability(spec: &SweepSpec) -> Result<Vec<PointResult>> {
    spec.validate()?;
    spec.points().into_iter().map(|p| evaluate_point(p, spec.filter, spec.cutoff, spec.n_max)).collect()
}

/// Same points as [`aggregate_probability`], reduced to `(point, <n>)`.
pub fn expected_mean_photon(spec: &SweepSpec) -> Result<Vec<(GridPoint, Option<f64>)>> {
    Ok(aggregate_probability(spec)?.into_iter().map(|r| (r.point, r.mean_photon)).collect())
}

/// Probability of heralding a binomial word from initial squeezing `db`
/// with the subtraction angle chosen so that the effective squeezing hits
/// the word's threshold. `None` below threshold.
pub fn codeword_probability(which: LogicalWord, db: f64) -> Result<Option<f64>> {
    let target = binomial_threshold(which);
    let initial = SqueezeParam::from_db(db, target.phi)?;
    let t2 = tanh(target.r) / tanh(initial.r);
    if !(t2 <= 1.0) {
        return Ok(None);
    }
    let theta = crate::math::acos(crate::math::sqrt(t2));
    let outcome = match which {
        LogicalWord::Zero => OutcomePattern::new(1, 1, 2),
        LogicalWord::One => OutcomePattern::new(1, 1, 4),
    };
    crate::analytic::success_probability(outcome, initial, theta).map(Some)
}

/// Multiplexing summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuxPlan {
    pub p_single: f64,
    pub n_mux: u64,
    pub p_mux: f64,
    /// Tolerated failure probability, when `n_mux` was solved for.
    pub delta_tol: Option<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("single-shot probability must lie in (0, 1)"));
    }
    Ok(())
}

/// `1 - (1 - p)^n`.
pub fn mux_probability(p_single: f64, n: u64) -> Result<f64> {
    check_p(p_single)?;
    Ok(match n {
        0 => 0.0,
        1 => p_single,
        _ => -libm::expm1(n as f64 * libm::log1p(-p_single)),
    })
}

pub fn mux_at(p_single: f64, n: u64) -> Result<MuxPlan> {
    Ok(MuxPlan { p_single, n_mux: n, p_mux: mux_probability(p_single, n)?, delta_tol: None })
}

/// Smallest `n` with `1 - (1-p)^n >= 1 - delta`: `ceil(ln delta / ln(1-p))`.
pub fn mux_for_tolerance(p_single: f64, delta_tol: f64) -> Result<MuxPlan> {
    check_p(p_single)?;
    if !(delta_tol > 0.0 && delta_tol < 1.0) {
        return Err(Error::invalid("failure tolerance must lie in (0, 1)"));
    }
    let n = crate::math::ceil(ln(delta_tol) / libm::log1p(-p_single)) as u64;
    let n = n.max(1);
    Ok(MuxPlan { p_single, n_mux: n, p_mux: mux_probability(p_single, n)?, delta_tol: Some(delta_tol) })
}

pub const TABLE1_REFLECTIVITY: f64 = 0.10;
pub const TABLE1_N_MAX: usize = 40;

/// Balanced cat-pair row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub m: usize,
    pub squeezing_db: f64,
    /// Common mean photon number of the two conditional states.
    pub mean_photon: f64,
    pub p01: f64,
    pub p10: f64,
    pub p02: f64,
    pub p20: f64,
}

impl Table1Row {
    /// `P[0,1,m] + P[1,0,m]`: the two differ only by an optical phase.
    pub fn p01_either(&self) -> f64 {
        self.p01 + self.p10
    }

    /// `P[0,2,m] + P[2,0,m]`.
    pub fn p02_either(&self) -> f64 {
        self.p02 + self.p20
    }
}

/// Rows for `m = 2..=8`: the initial squeezing balancing the pair's mean
/// photon numbers, then the four-mode simulation at that squeezing.
pub fn table1(reflectivity: f64, n_max: usize) -> Result<Vec<Table1Row>> {
    let theta = theta_from_reflectivity(reflectivity)?;
    let trunc = TruncationConfig::new(n_max)?;
    let net = Network::new(theta, n_max, 2)?;
    (2..=8)
        .map(|m| {
            let sq = balance_cat_pair(m, theta)?;
            let sim = DenseProtocol::prepare_with(&net, sq, trunc)?;
            let p = |n1, n2| sim.ideal_probability(&OutcomePattern::new(n1, n2, m));
            let (state, _) = sim.condition_pure(&OutcomePattern::new(0, 1, m))?;
            Ok(Table1Row {
                m,
                squeezing_db: sq.db(),
                mean_photon: state.mean_photon(0)?,
                p01: p(0, 1)?,
                p10: p(1, 0)?,
                p02: p(0, 2)?,
                p20: p(2, 0)?,
            })
        })
        .collect()
}

/// Initial squeezing `db` for a given `R` in nepers; convenience for tables.
pub fn db_of(r: f64) -> f64 {
    crate::squeeze::r_to_db(r)
}

/// `R` for a dB value; convenience for tables.
pub fn r_of(db: f64) -> f64 {
    db_to_r(db)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(db: f64, r2: f64) -> GridPoint {
        GridPoint { squeeze_db: db, reflectivity: r2, eta: 1.0 }
    }

    #[test]
    fn marginals_are_consistent() {
        let (r, th) = (1.1, 0.4);
        let mut total = 0.0;
        for n in 0..200 {
            let pn = reflected_marginal(r, th, n);
            let split: f64 = (0..400).map(|n3| crate::analytic::subtraction_marginal(r, th, n, n3)).sum();
            assert!((pn - split).abs() < 1e-12 * pn.max(1e-300) + 1e-15, "{n}");
            total += pn;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_is_complete() {
        let sq = SqueezeParam::from_db(12.0, 0.0).unwrap();
        let th = theta_from_reflectivity(0.1).unwrap();
        let e = enumerate_outcomes(sq, th, 1e-8, DEFAULT_SWEEP_N_MAX).unwrap();
        assert!(e.leftover < 1e-8);
        assert!((e.total_probability() + e.leftover - 1.0).abs() < 1e-10);
        let mut last = (0, 0, 0);
        for b in &e.branches {
            let key = (b.outcome.total(), b.outcome.n3, b.outcome.n1);
            assert!(key > last || last == (0, 0, 0));
            last = key;
        }
    }

    #[test]
    fn zero_reflectivity_has_no_superposition() {
        let r = evaluate_point(point(12.0, 0.0), OutcomeFilter::AnyTwoFold, 1e-8, 400).unwrap();
        assert_eq!(r.probability, 0.0);
        assert_eq!(r.mean_photon, None);
        assert!((r.enumerated_probability - 1.0).abs() < 1e-7);
    }

    #[test]
    fn four_fold_is_subset() {
        for r2 in [0.02, 0.1, 0.3] {
            let a = evaluate_point(point(8.0, r2), OutcomeFilter::AnyTwoFold, 1e-8, 400).unwrap();
            let b = evaluate_point(point(8.0, r2), OutcomeFilter::AnyFourFold, 1e-8, 400).unwrap();
            assert!(b.probability <= a.probability);
            assert!(b.probability > 0.0);
        }
    }

    #[test]
    fn filters() {
        let o = OutcomePattern::new(1, 1, 2);
        let word = [(0, 0.25), (4, 0.75)];
        assert!(OutcomeFilter::AnyFourFold.accepts(&o, &word));
        assert!(OutcomeFilter::AnyTwoFold.accepts(&o, &word));
        assert!(OutcomeFilter::KComponents { k: 2, fold: 4 }.accepts(&o, &word));
        assert!(!OutcomeFilter::KComponents { k: 3, fold: 2 }.accepts(&o, &word));
        assert!(OutcomeFilter::Exact(o).accepts(&o, &word));
        assert!(!OutcomeFilter::Exact(OutcomePattern::new(1, 1, 3)).accepts(&o, &word));
        assert!(!OutcomeFilter::AnyTwoFold.accepts(&o, &[(2, 1.0)]));
        let cat = [(1, 0.3), (3, 0.7)];
        assert!(!OutcomeFilter::AnyFourFold.accepts(&o, &cat));
    }

    #[test]
    fn lossy_detection_conserves_probability() {
        let sq = SqueezeParam::from_db(6.0, 0.0).unwrap();
        let th = theta_from_reflectivity(0.05).unwrap();
        let e = enumerate_outcomes(sq, th, 1e-10, 400).unwrap();
        let lossy = detect_with_efficiency(&e, 0.8);
        let a: f64 = lossy.iter().map(|b| b.probability).sum();
        assert!((a - e.total_probability()).abs() < 1e-12);
        for b in &lossy {
            let s: f64 = b.populations.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mux_examples() {
        assert_eq!(mux_probability(0.5, 1).unwrap(), 0.5);
        assert_eq!(mux_probability(0.3, 1).unwrap(), 0.3);
        let plan = mux_for_tolerance(1.39e-3, 0.01).unwrap();
        assert_eq!(plan.n_mux, 3311);
        assert!(plan.p_mux >= 0.99);
        assert!(mux_probability(1.39e-3, 3310).unwrap() < 0.99);
        assert!(mux_probability(0.0, 3).is_err());
        assert!(mux_probability(1.0, 3).is_err());
        assert!((mux_probability(0.2, 3).unwrap() - (1.0 - 0.8f64.powi(3))).abs() < 1e-15);
    }

    #[test]
    fn codeword_probability_threshold() {
        assert_eq!(codeword_probability(LogicalWord::Zero, 10.0).unwrap(), None);
        let p = codeword_probability(LogicalWord::Zero, 12.0).unwrap().unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(codeword_probability(LogicalWord::One, 6.0).unwrap().is_none());
        assert!(codeword_probability(LogicalWord::One, 8.0).unwrap().unwrap() > 0.0);
    }
}
