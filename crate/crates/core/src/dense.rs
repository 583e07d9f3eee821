//! Brute-force simulation of the four-mode protocol on a truncated Fock
//! space. Independent of the closed forms in [`crate::analytic`].
//!
//! Mode order is `[a, b, c, d]`. The TMSV occupies `a, b`; `c, d` start in
//! vacuum. The network is `U_ac(theta)` on `(a, c)`, `U_bd(theta)` on
//! `(b, d)` and then the balanced `U(pi/4)` on the ordered pair `(d, c)`.
//! Detector assignment: `n1` on mode `d`, `n2` on mode `c`, `n3` on mode `b`;
//! mode `a` carries the output.
//!
//! With this wiring the photon tapped from `a` leaves the balanced
//! beamsplitter as `(c^dagger + d^dagger)/sqrt(2)` and the one tapped from
//! `b` as `(d^dagger - c^dagger)/sqrt(2)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::{parity, symmetry_order};
use crate::analytic::OutcomePattern;
use crate::channels::DetectorModel;
use crate::fock::{beamsplitter, DensityOperator, ModeOperator, PureState, TruncationConfig};
use crate::linalg::CMatrix;
use crate::math::{asin, cis, cos, cosh, exp, ln, powi, sin, sqrt, tanh};
use crate::squeeze::SqueezeParam;
use crate::{Error, Result, C64};

pub const MODE_A: usize = 0;
pub const MODE_B: usize = 1;
pub const MODE_C: usize = 2;
pub const MODE_D: usize = 3;

/// Default per-mode cutoff for four-mode runs.
pub const DEFAULT_FOUR_MODE_N_MAX: usize = 30;

/// Probabilities below this are reported as zero-probability outcomes.
pub const ZERO_PROBABILITY: f64 = 1e-300;

/// Subtraction angle for a reflectivity `r^2 = sin^2(theta)`.
pub fn theta_from_reflectivity(r2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r2) {
        return Err(Error::invalid("reflectivity must lie in [0, 1)"));
    }
    Ok(asin(sqrt(r2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub squeeze: SqueezeParam,
    /// Subtraction angle; `t = cos(theta)`, `r = sin(theta)`.
    pub theta: f64,
    pub outcome: OutcomePattern,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    /// Cutoff for the TMSV modes `a, b`.
    pub trunc: TruncationConfig,
    /// Cutoff for the subtraction modes `c, d`; at least `n1 + n2`.
    pub ancilla_n_max: usize,
}

impl ProtocolConfig {
    /// Ideal detectors, ancilla cutoff equal to `trunc.n_max`.
    pub fn new(squeeze: SqueezeParam, theta: f64, outcome: OutcomePattern, trunc: TruncationConfig) -> Self {
        Self { squeeze, theta, outcome, eta1: 1.0, eta2: 1.0, eta3: 1.0, trunc, ancilla_n_max: trunc.n_max }
    }

    pub fn with_eta3(mut self, eta3: f64) -> Self {
        self.eta3 = eta3;
        self
    }

    pub fn with_efficiencies(mut self, eta1: f64, eta2: f64, eta3: f64) -> Self {
        self.eta1 = eta1;
        self.eta2 = eta2;
        self.eta3 = eta3;
        self
    }

    pub fn with_ancilla_n_max(mut self, n: usize) -> Self {
        self.ancilla_n_max = n;
        self
    }

    pub fn reflectivity(&self) -> f64 {
        let s = sin(self.theta);
        s * s
    }

    pub fn transmission(&self) -> f64 {
        cos(self.theta)
    }

    pub fn efficiencies(&self) -> [f64; 3] {
        [self.eta1, self.eta2, self.eta3]
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..core::f64::consts::FRAC_PI_2).contains(&self.theta) {
            return Err(Error::invalid("subtraction angle must lie in [0, pi/2)"));
        }
        for eta in self.efficiencies() {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid("detector efficiencies must lie in [0, 1]"));
            }
        }
        check_outcome(&self.outcome, self.trunc.n_max, self.ancilla_n_max)
    }
}

fn check_outcome(o: &OutcomePattern, n_max: usize, ancilla_n_max: usize) -> Result<()> {
    if o.total() > ancilla_n_max {
        return Err(Error::invalid("n1 + n2 exceeds the ancilla cutoff"));
    }
    if o.n3 > n_max {
        return Err(Error::invalid("n3 exceeds the photon cutoff"));
    }
    Ok(())
}

/// Conditional output of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub outcome: OutcomePattern,
    /// Normalised state of mode `a`.
    pub state: DensityOperator,
    pub probability: f64,
    pub parity: Option<i8>,
    pub symmetry_order: Option<usize>,
    pub mean_photon: f64,
    /// Worst of the TMSV population cut by the truncation and the output's
    /// population in its two highest Fock levels.
    pub truncation_health: f64,
}

/// Population of the TMSV beyond `n_max`, `tanh^{2(n_max+1)} R`.
pub fn tmsv_tail(r: f64, n_max: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    exp(2.0 * (n_max + 1) as f64 * ln(tanh(r)))
}

/// Smallest cutoff whose TMSV tail is below `tol`.
pub fn n_max_for_tail(r: f64, tol: f64) -> usize {
    if r == 0.0 {
        return 1;
    }
    let n = crate::math::ceil(ln(tol) / (2.0 * ln(tanh(r)))) as usize;
    n.saturating_sub(1).max(1)
}

/// `(1/cosh R) sum_n e^{i n phi} tanh^n R |n, n>` on modes of dimension
/// `n_max + 1`. Not renormalised; fails when the cut tail exceeds the
/// truncation tolerance.
pub fn tmsv(squeeze: SqueezeParam, trunc: &TruncationConfig) -> Result<PureState> {
    let tail = tmsv_tail(squeeze.r, trunc.n_max);
    if tail > trunc.tail_tolerance {
        return Err(Error::TruncationTail { tail, tolerance: trunc.tail_tolerance });
    }
    let d = trunc.dim();
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    let (t, ch) = (tanh(squeeze.r), cosh(squeeze.r));
    for n in 0..d {
        amps[n * d + n] = cis(n as f64 * squeeze.phi) * (powi(t, n as i32) / ch);
    }
    PureState::from_amplitudes(vec![d, d], amps)
}

/// The three beamsplitters of the network for one subtraction angle and
/// truncation; independent of the squeezing, so reusable across runs.
#[derive(Debug, Clone)]
pub struct Network {
    pub theta: f64,
    pub dim: usize,
    pub ancilla_dim: usize,
    u_sub: ModeOperator,
    u_bal: ModeOperator,
}

impl Network {
    pub fn new(theta: f64, n_max: usize, ancilla_n_max: usize) -> Result<Self> {
        if !(0.0..core::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::invalid("subtraction angle must lie in [0, pi/2)"));
        }
        let (d, dc) = (n_max + 1, ancilla_n_max + 1);
        Ok(Self {
            theta,
            dim: d,
            ancilla_dim: dc,
            u_sub: beamsplitter(d, dc, theta),
            u_bal: beamsplitter(dc, dc, core::f64::consts::FRAC_PI_4),
        })
    }

    /// Four-mode state just before detection.
    pub fn propagate(&self, squeeze: SqueezeParam, trunc: &TruncationConfig) -> Result<PureState> {
        if trunc.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: trunc.dim() });
        }
        let ab = tmsv(squeeze, trunc)?;
        let mut state = ab.tensor(&PureState::vacuum(&[self.ancilla_dim, self.ancilla_dim])?);
        state.apply(&self.u_sub, &[MODE_A, MODE_C])?;
        state.apply(&self.u_sub, &[MODE_B, MODE_D])?;
        state.apply(&self.u_bal, &[MODE_D, MODE_C])?;
        Ok(state)
    }
}

/// Four-mode pre-detection state plus the data needed to condition it on
/// many outcomes.
#[derive(Debug, Clone)]
pub struct DenseProtocol {
    pub squeeze: SqueezeParam,
    pub theta: f64,
    pub trunc: TruncationConfig,
    pub ancilla_n_max: usize,
    state: PureState,
    tmsv_tail: f64,
}

impl DenseProtocol {
    pub fn prepare(squeeze: SqueezeParam, theta: f64, trunc: TruncationConfig, ancilla_n_max: usize) -> Result<Self> {
        let net = Network::new(theta, trunc.n_max, ancilla_n_max)?;
        Self::prepare_with(&net, squeeze, trunc)
    }

    pub fn prepare_with(net: &Network, squeeze: SqueezeParam, trunc: TruncationConfig) -> Result<Self> {
        let state = net.propagate(squeeze, &trunc)?;
        Ok(Self {
            squeeze,
            theta: net.theta,
            trunc,
            ancilla_n_max: net.ancilla_dim - 1,
            state,
            tmsv_tail: tmsv_tail(squeeze.r, trunc.n_max),
        })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn into_state(self) -> PureState {
        self.state
    }

    fn dims(&self) -> (usize, usize) {
        (self.trunc.dim(), self.ancilla_n_max + 1)
    }

    /// Mode-`a` amplitudes for definite photon numbers on `b, c, d`.
    fn slice(&self, mb: usize, mc: usize, md: usize) -> Vec<C64> {
        let (d, dc) = self.dims();
        let stride_a = d * dc * dc;
        let base = mb * dc * dc + mc * dc + md;
        let amps = self.state.amplitudes();
        (0..d).map(|a| amps[a * stride_a + base]).collect()
    }

    /// Joint probability of `outcome` with ideal detectors.
    pub fn ideal_probability(&self, outcome: &OutcomePattern) -> Result<f64> {
        check_outcome(outcome, self.trunc.n_max, self.ancilla_n_max)?;
        Ok(self.slice(outcome.n3, outcome.n2, outcome.n1).iter().map(|c| c.norm_sqr()).sum())
    }

    /// Ideal-detection conditional state of mode `a` and its probability.
    pub fn condition_pure(&self, outcome: &OutcomePattern) -> Result<(PureState, f64)> {
        check_outcome(outcome, self.trunc.n_max, self.ancilla_n_max)?;
        let v = self.slice(outcome.n3, outcome.n2, outcome.n1);
        let mut s = PureState::from_amplitudes(vec![self.trunc.dim()], v)?;
        let p = s.norm_sqr();
        if p < ZERO_PROBABILITY {
            return Err(Error::ZeroProbability);
        }
        s.normalize()?;
        s.norm_probability = p;
        Ok((s, p))
    }

    /// Conditional mode-`a` state for lossy detectors with efficiencies
    /// `[eta1, eta2, eta3]`: `sum_m p(n1|m_d) p(n2|m_c) p(n3|m_b) |v_m><v_m|`
    /// over the pure-state slices, never forming the four-mode density
    /// operator.
    pub fn condition(&self, outcome: &OutcomePattern, eta: [f64; 3]) -> Result<ProtocolResult> {
        check_outcome(outcome, self.trunc.n_max, self.ancilla_n_max)?;
        let (d, dc) = self.dims();
        let det = |e: f64, top: usize| DetectorModel::new(e, top);
        let (d1, d2, d3) = (det(eta[0], dc - 1)?, det(eta[1], dc - 1)?, det(eta[2], d - 1)?);
        let w1: Vec<f64> = (0..dc).map(|m| d1.click_probability(outcome.n1, m)).collect();
        let w2: Vec<f64> = (0..dc).map(|m| d2.click_probability(outcome.n2, m)).collect();
        let w3: Vec<f64> = (0..d).map(|m| d3.click_probability(outcome.n3, m)).collect();
        let mut rho = CMatrix::zeros(d);
        let mut total = 0.0;
        for (mb, &wb) in w3.iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            for (mc, &wc) in w2.iter().enumerate() {
                if wc == 0.0 {
                    continue;
                }
                for (md, &wd) in w1.iter().enumerate() {
                    if wd == 0.0 {
                        continue;
                    }
                    let v = self.slice(mb, mc, md);
                    let p: f64 = v.iter().map(|c| c.norm_sqr()).sum();
                    if p == 0.0 {
                        continue;
                    }
                    let w = wb * wc * wd;
                    total += w * p;
                    rho.add_assign_scaled(&CMatrix::outer(&v, &v), C64::new(w, 0.0));
                }
            }
        }
        if total < ZERO_PROBABILITY {
            return Err(Error::ZeroProbability);
        }
        let rho = rho.scale(C64::new(1.0 / total, 0.0));
        let rho = DensityOperator::single_mode(rho.add(&rho.adjoint()).scale(C64::new(0.5, 0.0)))?;
        Ok(self.result(*outcome, rho, total))
    }

    fn result(&self, outcome: OutcomePattern, state: DensityOperator, probability: f64) -> ProtocolResult {
        let pops = state.populations();
        let top: f64 = pops[pops.len().saturating_sub(2)..].iter().sum();
        ProtocolResult {
            outcome,
            parity: parity(&state),
            symmetry_order: symmetry_order(&state),
            mean_photon: state.mean_photon(),
            truncation_health: top.max(self.tmsv_tail),
            probability,
            state,
        }
    }

    /// Ideal-detection probabilities of every outcome resolvable on this
    /// truncation, `[n1][n2][n3]` flattened with `n3` fastest.
    pub fn outcome_table(&self) -> Vec<f64> {
        let (d, dc) = self.dims();
        let amps = self.state.amplitudes();
        let stride_a = d * dc * dc;
        let mut out = vec![0.0; dc * dc * d];
        for a in 0..d {
            for mb in 0..d {
                for mc in 0..dc {
                    for md in 0..dc {
                        let p = amps[a * stride_a + mb * dc * dc + mc * dc + md].norm_sqr();
                        out[(md * dc + mc) * d + mb] += p;
                    }
                }
            }
        }
        out
    }
}

/// Four-mode state before detection.
pub fn run_protocol_pure_until_measurement(cfg: &ProtocolConfig) -> Result<PureState> {
    cfg.validate()?;
    Network::new(cfg.theta, cfg.trunc.n_max, cfg.ancilla_n_max)?.propagate(cfg.squeeze, &cfg.trunc)
}

/// Full protocol: network, lossy detection, conditional state of mode `a`.
/// A vanishing outcome probability is reported as
/// [`Error::ZeroProbability`].
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    cfg.validate()?;
    let p = DenseProtocol::prepare(cfg.squeeze, cfg.theta, cfg.trunc, cfg.ancilla_n_max)?;
    p.condition(&cfg.outcome, cfg.efficiencies())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunc(n: usize) -> TruncationConfig {
        TruncationConfig::new(n).unwrap()
    }

    #[test]
    fn tmsv_examples() {
        let vac = tmsv(SqueezeParam::new(0.0, 0.0).unwrap(), &trunc(4)).unwrap();
        assert_eq!(vac.amplitude(&[0, 0]), C64::new(1.0, 0.0));
        assert!((vac.norm_sqr() - 1.0).abs() < 1e-15);

        let s = SqueezeParam::new(0.6, 0.9).unwrap();
        let st = tmsv(s, &trunc(30)).unwrap();
        let ratio = st.amplitude(&[1, 1]) / st.amplitude(&[0, 0]);
        assert!((ratio - s.ratio()).norm() < 1e-15);

        let big = tmsv(SqueezeParam::new(1.0, 0.0).unwrap(), &trunc(40)).unwrap();
        let mean = big.mean_photon(0).unwrap();
        assert!((mean - 1f64.sinh().powi(2)).abs() < 1e-6);

        assert!(matches!(tmsv(SqueezeParam::new(1.5, 0.0).unwrap(), &trunc(10)), Err(Error::TruncationTail { .. })));
    }

    #[test]
    fn reduced_tmsv_is_thermal() {
        use crate::fock::PartialTrace;
        let st = tmsv(SqueezeParam::new(0.5, 0.0).unwrap(), &trunc(40)).unwrap();
        let rho = st.partial_trace(&[0]).unwrap();
        let nbar = 0.5f64.sinh().powi(2);
        for n in 0..10 {
            let thermal = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
            assert!((rho.matrix()[(n, n)].re - thermal).abs() < 1e-12);
        }
        assert!(rho.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn zero_angle_keeps_tmsv() {
        let s = SqueezeParam::new(0.4, 0.3).unwrap();
        let cfg = ProtocolConfig::new(s, 0.0, OutcomePattern::new(0, 0, 3), trunc(25)).with_ancilla_n_max(2);
        let four = run_protocol_pure_until_measurement(&cfg).unwrap();
        let t = tmsv(s, &trunc(25)).unwrap();
        for n in 0..26 {
            assert!((four.amplitude(&[n, n, 0, 0]) - t.amplitude(&[n, n])).norm() < 1e-14);
        }
        assert!((four.norm_sqr() - 1.0).abs() < 1e-10);

        let r = run_protocol(&cfg).unwrap();
        assert!((r.state.matrix()[(3, 3)].re - 1.0).abs() < 1e-12);
        let expect = 0.4f64.tanh().powi(6) / 0.4f64.cosh().powi(2);
        assert!((r.probability - expect).abs() < 1e-14);
    }

    #[test]
    fn small_angle_depletion_is_second_order() {
        let s = SqueezeParam::new(0.5, 0.0).unwrap();
        let th = 0.1;
        let cfg = ProtocolConfig::new(s, th, OutcomePattern::new(0, 0, 0), trunc(30)).with_ancilla_n_max(3);
        let four = run_protocol_pure_until_measurement(&cfg).unwrap();
        let t = tmsv(s, &trunc(30)).unwrap();
        for n in 0..5 {
            // |n, n, 0, 0> keeps amplitude cos^{2n}(theta) ~ 1 - n theta^2
            let ratio = (four.amplitude(&[n, n, 0, 0]) / t.amplitude(&[n, n])).re;
            assert!((ratio - th.cos().powi(2 * n as i32)).abs() < 1e-13);
            assert!((ratio - (1.0 - n as f64 * th * th)).abs() < 2.0 * (n * n) as f64 * th.powi(4) + 1e-15);
        }
    }

    #[test]
    fn exchange_symmetry_and_parity() {
        let s = SqueezeParam::new(0.7, 0.0).unwrap();
        let p = DenseProtocol::prepare(s, 0.3, trunc(30), 4).unwrap();
        for n3 in 0..5 {
            for (n1, n2) in [(1, 0), (2, 1), (3, 1)] {
                let a = p.condition(&OutcomePattern::new(n1, n2, n3), [1.0; 3]).unwrap();
                let b = p.condition(&OutcomePattern::new(n2, n1, n3), [1.0; 3]).unwrap();
                assert!((a.probability / b.probability - 1.0).abs() < 1e-10);
                let expect = if (n3 + n1 + n2) % 2 == 0 { 1 } else { -1 };
                assert_eq!(a.parity, Some(expect));
            }
        }
    }

    #[test]
    fn single_subtraction_sign_pattern() {
        let s = SqueezeParam::new(0.6, 0.0).unwrap();
        let p = DenseProtocol::prepare(s, 0.2, trunc(30), 2).unwrap();
        let (plus, pp) = p.condition_pure(&OutcomePattern::new(1, 0, 3)).unwrap();
        let (minus, pm) = p.condition_pure(&OutcomePattern::new(0, 1, 3)).unwrap();
        let a = plus.amplitudes();
        let b = minus.amplitudes();
        let rp = a[4] / a[2];
        let rm = b[4] / b[2];
        assert!(rp.re > 0.0 && (rp + rm).norm() < 1e-10);
        assert!((pp / pm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn outcome_table_sums_to_norm() {
        let s = SqueezeParam::new(0.5, 0.0).unwrap();
        let p = DenseProtocol::prepare(s, 0.3, trunc(40), 20).unwrap();
        let total: f64 = p.outcome_table().iter().sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        let s = SqueezeParam::new(0.5, 0.0).unwrap();
        let cfg = ProtocolConfig::new(s, 0.2, OutcomePattern::new(2, 2, 1), trunc(10)).with_ancilla_n_max(3);
        assert!(cfg.validate().is_err());
        assert!(ProtocolConfig::new(s, 2.0, OutcomePattern::new(0, 0, 0), trunc(10)).validate().is_err());
        assert!(theta_from_reflectivity(1.0).is_err());
        assert!((theta_from_reflectivity(0.1).unwrap().sin().powi(2) - 0.1).abs() < 1e-15);
    }
}
