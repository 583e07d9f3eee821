//! Every command as a serialisable job, so a manifest can re-run it.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rotsym_core::analysis::{
    fidelity_pure, phase_aligned_fidelity, symmetry_order, wigner, wigner_negativity, wln, GridSpec,
};
use rotsym_core::analytic::{final_state, lossy_final_state, success_probability_leading_order, OutcomePattern};
use rotsym_core::channels::DetectorModel;
use rotsym_core::codes::{
    balance_cat_pair, binomial_codewords, binomial_threshold, cat_code_pair, efficiency_report, imperfect_codeword,
    incorrect_diagnosis_probability, kl_check, CodePair, LogicalWord,
};
use rotsym_core::dense::{
    n_max_for_tail, run_protocol, theta_from_reflectivity, DenseProtocol, ProtocolConfig, DEFAULT_FOUR_MODE_N_MAX,
};
use rotsym_core::fock::{
    annihilator_dim, number_operator_dim, DensityOperator, ModeOperator, PureState, TruncationConfig,
};
use rotsym_core::linalg::CMatrix;
use rotsym_core::planner::{mux_at, mux_for_tolerance, table1, OutcomeFilter, SweepSpec};
use rotsym_core::squeeze::{db_to_r, r_to_db, SqueezeParam};
use rotsym_core::C64 as Complex64;

use crate::error::{CliError, CliResult};
use crate::format::{number, optional, CsvTable};
use crate::{figures, sweep};

/// Largest automatic truncation for the four-mode simulation.
pub const AUTO_N_MAX_CAP: usize = 160;
/// Initial squeezing used to herald the binomial words.
pub const WORD_SOURCE_DB: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Run(RunConfig),
    Sweep(SweepConfig),
    Wigner(WignerConfig),
    Codes(CodesConfig),
    KlCheck(KlConfig),
    Mux(MuxConfig),
    Table1(Table1Config),
    Figures(FiguresConfig),
}

impl Job {
    pub fn command(&self) -> &'static str {
        match self {
            Job::Run(_) => "run",
            Job::Sweep(_) => "sweep",
            Job::Wigner(_) => "wigner",
            Job::Codes(_) => "codes",
            Job::KlCheck(_) => "kl-check",
            Job::Mux(_) => "mux",
            Job::Table1(_) => "table1",
            Job::Figures(_) => "figures",
        }
    }

    pub fn truncation(&self) -> Option<usize> {
        match self {
            Job::Run(c) => {
                Some(c.n_max.unwrap_or_else(|| auto_n_max(c.squeezing.r()).max(c.outcome.iter().sum::<usize>() + 2)))
            }
            Job::Sweep(c) => Some(c.n_max),
            Job::Table1(c) => Some(c.n_max),
            _ => None,
        }
    }
}

/// A produced file: JSON document or CSV table.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Json(Value),
    Csv(CsvTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub content: Content,
}

impl Artifact {
    pub fn json(name: &str, v: Value) -> Self {
        Self { name: name.into(), content: Content::Json(v) }
    }

    pub fn csv(name: &str, t: CsvTable) -> Self {
        Self { name: name.into(), content: Content::Csv(t) }
    }

    /// Bytes with the manifest hash embedded.
    pub fn to_bytes(&self, hash: &str) -> CliResult<Vec<u8>> {
        match &self.content {
            Content::Json(v) => {
                let mut v = v.clone();
                if let Value::Object(map) = &mut v {
                    map.insert("manifest_hash".into(), Value::String(hash.into()));
                }
                Ok((serde_json::to_string_pretty(&v)? + "\n").into_bytes())
            }
            Content::Csv(t) => {
                let mut t = t.clone();
                t.comments.insert(0, ("manifest_hash".into(), hash.into()));
                t.to_bytes()
            }
        }
    }
}

/// Settings that change speed but never results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecContext {
    pub jobs: usize,
}

pub fn execute(job: &Job, ctx: ExecContext) -> CliResult<Vec<Artifact>> {
    match job {
        Job::Run(c) => Ok(vec![Artifact::json("run.json", run(c)?)]),
        Job::Sweep(c) => sweep::execute(c, ctx),
        Job::Wigner(c) => wigner_job(c),
        Job::Codes(c) => Ok(vec![Artifact::json("codes.json", codes(c)?)]),
        Job::KlCheck(c) => Ok(vec![Artifact::json("kl_check.json", kl(c)?)]),
        Job::Mux(c) => Ok(vec![Artifact::json("mux.json", mux(c)?)]),
        Job::Table1(c) => Ok(vec![Artifact::csv("table1.csv", table1_csv(c)?)]),
        Job::Figures(c) => figures::execute(c, ctx),
    }
}

/// Squeezing magnitude given either in dB or directly as `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squeezing {
    Db(f64),
    RawR(f64),
}

impl Squeezing {
    pub fn r(&self) -> f64 {
        match *self {
            Squeezing::Db(d) => db_to_r(d),
            Squeezing::RawR(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub squeezing: Squeezing,
    #[serde(default)]
    pub phi: f64,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
    #[serde(default)]
    pub outcome: [usize; 3],
    #[serde(default = "one")]
    pub eta3: f64,
    /// `None` picks the truncation from the TMSV tail.
    #[serde(default)]
    pub n_max: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn default_reflectivity() -> f64 {
    rotsym_core::planner::TABLE1_REFLECTIVITY
}

/// Truncation meeting the default tail tolerance, at least the default.
pub fn auto_n_max(r: f64) -> usize {
    n_max_for_tail(r, TruncationConfig::DEFAULT_TAIL_TOLERANCE).clamp(DEFAULT_FOUR_MODE_N_MAX, AUTO_N_MAX_CAP)
}

fn parity_name(p: Option<i8>) -> &'static str {
    match p {
        Some(1) => "even",
        Some(-1) => "odd",
        _ => "mixed",
    }
}

fn state_summary(rho: &DensityOperator) -> CliResult<Value> {
    let pops = rho.populations();
    let words = binomial_codewords(7)?;
    let fid = |w: &PureState| -> CliResult<Option<f64>> {
        if rho.dim() < 7 {
            return Ok(None);
        }
        Ok(Some(phase_aligned_fidelity(rho, w)?.0))
    };
    Ok(json!({
        "parity": parity_name(rotsym_core::analysis::parity(rho)),
        "symmetry_order": symmetry_order(rho),
        "mean_photon": rho.mean_photon(),
        "fidelity": {
            "zero_word": fid(&words.zero_word)?,
            "one_word": fid(&words.one_word)?,
        },
        "populations": pops,
    }))
}

/// Conditional state in the limit of vanishing reflectivity, where the
/// heralding probability of any subtraction goes to zero but the state
/// converges: the closed form at the initial squeezing, mixed over the
/// third detector's response with leading-order weights.
fn vanishing_reflectivity_limit(
    o: OutcomePattern,
    sq: SqueezeParam,
    eta3: f64,
    dim: usize,
) -> CliResult<DensityOperator> {
    if eta3 == 1.0 {
        return Ok(final_state(o, sq)?.to_state(dim)?.to_density());
    }
    let det = DetectorModel::new(eta3, usize::MAX)?;
    let mut acc = CMatrix::zeros(dim);
    let mut total = 0.0;
    // every branch shares the theta^{2N} factor, so theta = 1 is a valid proxy
    for m in o.n3..dim {
        let branch = OutcomePattern::new(o.n1, o.n2, m);
        let spec = match final_state(branch, sq) {
            Ok(s) => s,
            Err(rotsym_core::Error::ZeroProbability) => continue,
            Err(e) => return Err(e.into()),
        };
        if spec.max_index() >= dim {
            break;
        }
        let w = success_probability_leading_order(branch, sq, 1.0)? * det.click_probability(o.n3, m);
        if w == 0.0 {
            continue;
        }
        let psi = spec.to_state(dim)?;
        acc.add_assign_scaled(&CMatrix::outer(psi.amplitudes(), psi.amplitudes()), Complex64::new(w, 0.0));
        total += w;
    }
    if !(total > 0.0) {
        return Err(rotsym_core::Error::ZeroProbability.into());
    }
    Ok(DensityOperator::single_mode(acc.scale(Complex64::new(1.0 / total, 0.0)))?)
}

pub fn run(c: &RunConfig) -> CliResult<Value> {
    let sq = SqueezeParam::new(c.squeezing.r(), c.phi)?;
    let theta = theta_from_reflectivity(c.reflectivity)?;
    let [n1, n2, n3] = c.outcome;
    let outcome = OutcomePattern::new(n1, n2, n3);
    let n_max = Job::Run(c.clone()).truncation().expect("run has a truncation");
    let trunc = TruncationConfig::new(n_max)?;
    let cfg = ProtocolConfig::new(sq, theta, outcome, trunc).with_eta3(c.eta3).with_ancilla_n_max((n1 + n2).max(1));
    cfg.validate()?;
    let eff = sq.effective(theta.cos());
    let mut out = json!({
        "outcome": [n1, n2, n3],
        "squeeze_db": r_to_db(sq.r),
        "r": sq.r,
        "phi": sq.phi,
        "reflectivity": c.reflectivity,
        "effective_squeeze_db": r_to_db(eff.r),
        "eta3": c.eta3,
        "n_max": n_max,
    });
    let map = out.as_object_mut().expect("object");
    // no photon reaches the subtraction detectors; rounding in the
    // simulated beamsplitter would otherwise report a ~1e-33 probability
    if theta == 0.0 && n1 + n2 > 0 {
        let rho = vanishing_reflectivity_limit(outcome, sq, c.eta3, trunc.dim())?;
        map.insert("probability".into(), json!(0.0));
        map.insert(
            "warning".into(),
            json!(
                "zero-probability outcome at zero reflectivity; state fields describe the vanishing-reflectivity limit"
            ),
        );
        if let Value::Object(s) = state_summary(&rho)? {
            map.extend(s);
        }
        return Ok(out);
    }
    match run_protocol(&cfg) {
        Ok(res) => {
            map.insert("probability".into(), json!(res.probability));
            map.insert("truncation_health".into(), json!(res.truncation_health));
            if let Value::Object(s) = state_summary(&res.state)? {
                map.extend(s);
            }
        }
        Err(rotsym_core::Error::ZeroProbability) => {
            map.insert("probability".into(), json!(0.0));
            map.insert("warning".into(), json!("zero-probability outcome; no conditional state"));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

/// Outcome filter in its command-line spelling: `any-2fold`, `any-4fold`,
/// `k:<k>:<fold>` or `exact:<n1>,<n2>,<n3>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterArg(pub OutcomeFilter);

impl FromStr for FilterArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown filter `{s}` (any-2fold, any-4fold, k:<k>:<fold>, exact:<n1>,<n2>,<n3>)");
        let f = match s {
            "any-2fold" => OutcomeFilter::AnyTwoFold,
            "any-4fold" => OutcomeFilter::AnyFourFold,
            _ => {
                if let Some(rest) = s.strip_prefix("k:") {
                    let (k, fold) = rest.split_once(':').ok_or_else(bad)?;
                    OutcomeFilter::KComponents {
                        k: k.parse().map_err(|_| bad())?,
                        fold: fold.parse().map_err(|_| bad())?,
                    }
                } else if let Some(rest) = s.strip_prefix("exact:") {
                    let v: Vec<usize> =
                        rest.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
                    let [a, b, c] = v[..] else { return Err(bad()) };
                    OutcomeFilter::Exact(OutcomePattern::new(a, b, c))
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(FilterArg(f))
    }
}

impl std::fmt::Display for FilterArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            OutcomeFilter::AnyTwoFold => write!(f, "any-2fold"),
            OutcomeFilter::AnyFourFold => write!(f, "any-4fold"),
            OutcomeFilter::KComponents { k, fold } => write!(f, "k:{k}:{fold}"),
            OutcomeFilter::Exact(o) => write!(f, "exact:{},{},{}", o.n1, o.n2, o.n3),
        }
    }
}

impl Serialize for FilterArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FilterArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub squeeze_db: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub filter: FilterArg,
    #[serde(default = "default_eta")]
    pub eta: Vec<f64>,
    #[serde(default = "default_sweep_n_max")]
    pub n_max: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Fraction of grid points re-checked with the four-mode simulation.
    #[serde(default = "default_validate_fraction")]
    pub validate_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_eta() -> Vec<f64> {
    vec![1.0]
}

fn default_sweep_n_max() -> usize {
    rotsym_core::planner::DEFAULT_SWEEP_N_MAX
}

fn default_cutoff() -> f64 {
    rotsym_core::planner::DEFAULT_CUTOFF
}

fn default_validate_fraction() -> f64 {
    0.05
}

impl SweepConfig {
    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            squeeze_db: self.squeeze_db.clone(),
            reflectivity: self.reflectivity.clone(),
            filter: self.filter.0,
            eta: self.eta.clone(),
            n_max: self.n_max,
            cutoff: self.cutoff,
        }
    }
}

/// Named single-mode states for the Wigner command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedState {
    Vacuum,
    Fock(usize),
    Word(LogicalWord),
    /// `psi_{0,1,m}` or `psi_{0,2,m}` at the balanced squeezing.
    Cat {
        n2: usize,
        m: usize,
    },
}

impl FromStr for NamedState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown state `{s}` (vacuum, fock:<n>, 0L, 1L, cat01:<m>, cat02:<m>)");
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        Ok(match s {
            "vacuum" => NamedState::Vacuum,
            "0L" => NamedState::Word(LogicalWord::Zero),
            "1L" => NamedState::Word(LogicalWord::One),
            _ => {
                if let Some(n) = s.strip_prefix("fock:") {
                    NamedState::Fock(num(n)?)
                } else if let Some(m) = s.strip_prefix("cat01:") {
                    NamedState::Cat { n2: 1, m: num(m)? }
                } else if let Some(m) = s.strip_prefix("cat02:") {
                    NamedState::Cat { n2: 2, m: num(m)? }
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl std::fmt::Display for NamedState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NamedState::Vacuum => write!(f, "vacuum"),
            NamedState::Fock(n) => write!(f, "fock:{n}"),
            NamedState::Word(LogicalWord::Zero) => write!(f, "0L"),
            NamedState::Word(LogicalWord::One) => write!(f, "1L"),
            NamedState::Cat { n2, m } => write!(f, "cat0{n2}:{m}"),
        }
    }
}

impl Serialize for NamedState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NamedState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub state: NamedState,
    /// Efficiency of the third detector when the state is heralded.
    #[serde(default = "one")]
    pub eta: f64,
    /// `None` picks the grid from the mean photon number.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Subtraction reflectivity for the cat-like states.
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
}

/// Four-mode state before detection for heralding a binomial word at its
/// threshold from [`WORD_SOURCE_DB`], with the outcome to condition on.
pub fn word_protocol(which: LogicalWord) -> CliResult<(DenseProtocol, OutcomePattern)> {
    let target = binomial_threshold(which);
    let initial = SqueezeParam::from_db(WORD_SOURCE_DB, target.phi)?;
    let theta = (target.r.tanh() / initial.r.tanh()).sqrt().acos();
    let outcome = match which {
        LogicalWord::Zero => OutcomePattern::new(1, 1, 2),
        LogicalWord::One => OutcomePattern::new(1, 1, 4),
    };
    let trunc = TruncationConfig::new(auto_n_max(initial.r))?;
    Ok((DenseProtocol::prepare(initial, theta, trunc, 2)?, outcome))
}

/// The binomial word heralded with third-detector efficiency `eta3`.
pub fn heralded_word(which: LogicalWord, eta3: f64) -> CliResult<DensityOperator> {
    if !(0.0..=1.0).contains(&eta3) {
        return Err(CliError::usage("detector efficiency must lie in [0, 1]"));
    }
    let (sim, outcome) = word_protocol(which)?;
    Ok(sim.condition(&outcome, [1.0, 1.0, eta3])?.state)
}

/// `psi_{0,n2,m}` at the balanced squeezing, third detector efficiency
/// `eta3`.
pub fn heralded_cat(n2: usize, m: usize, reflectivity: f64, eta3: f64) -> CliResult<DensityOperator> {
    let theta = theta_from_reflectivity(reflectivity)?;
    let sq = balance_cat_pair(m, theta)?;
    let dim = m + n2 + 2 + 120;
    Ok(lossy_final_state(OutcomePattern::new(0, n2, m), sq, theta, eta3, dim, 1e-10)?.0)
}

pub fn named_state(state: NamedState, eta: f64, reflectivity: f64) -> CliResult<DensityOperator> {
    Ok(match state {
        NamedState::Vacuum => PureState::vacuum(&[2])?.to_density(),
        NamedState::Fock(n) => PureState::fock(n + 1, n)?.to_density(),
        NamedState::Word(w) => heralded_word(w, eta)?,
        NamedState::Cat { n2, m } => heralded_cat(n2, m, reflectivity, eta)?,
    })
}

pub fn wigner_grid_spec(c: &WignerConfig, mean: f64) -> GridSpec {
    let base = GridSpec::for_mean_photon(mean);
    let half = c.half_width.unwrap_or(base.q_range.1);
    let res = c.resolution.unwrap_or(if c.half_width.is_some() { 241 } else { base.resolution });
    GridSpec::square(half, res)
}

fn wigner_job(c: &WignerConfig) -> CliResult<Vec<Artifact>> {
    let rho = named_state(c.state, c.eta, c.reflectivity)?;
    let spec = wigner_grid_spec(c, rho.mean_photon());
    let grid = wigner(&rho, &spec)?;
    let mut t = CsvTable::new(&["q", "p", "w"]);
    t.comment("state", c.state.to_string());
    t.comment("eta", number(c.eta));
    t.comment("min_w", number(grid.min()));
    t.comment("max_w", number(grid.max()));
    match wln(&grid) {
        Ok(v) => {
            t.comment("wln", number(v));
            t.comment("negativity", number(wigner_negativity(&grid)?));
        }
        Err(rotsym_core::Error::GridCoverage(m)) => t.comment("coverage_missing", number(m)),
        Err(e) => return Err(e.into()),
    }
    if let NamedState::Word(w) = c.state {
        let words = binomial_codewords(rho.dim())?;
        let ideal = if w == LogicalWord::Zero { &words.zero_word } else { &words.one_word };
        t.comment("fidelity", number(fidelity_pure(&rho, ideal)?));
    }
    for (iq, q) in grid.q.iter().enumerate() {
        for (ip, p) in grid.p.iter().enumerate() {
            t.push(vec![number(*q), number(*p), number(grid.at(iq, ip))]);
        }
    }
    Ok(vec![Artifact::csv("wigner.csv", t)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodesConfig {
    /// Third-detector efficiency for the imperfect-word model.
    #[serde(default = "default_codes_eta")]
    pub eta: f64,
    /// Loss for the no-jump and single-jump figures.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Cat-like pairs to balance.
    #[serde(default = "default_cat_m")]
    pub cat_m: Vec<usize>,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
}

fn default_codes_eta() -> f64 {
    0.98
}

fn default_gamma() -> f64 {
    0.01
}

fn default_cat_m() -> Vec<usize> {
    vec![5, 7]
}

fn codes(c: &CodesConfig) -> CliResult<Value> {
    let threshold = |w: LogicalWord| {
        let s = binomial_threshold(w);
        json!({ "squeeze_db": r_to_db(s.r), "tanh_r": s.r.tanh(), "phi": s.phi })
    };
    let imperfect = |w: LogicalWord| -> CliResult<Value> {
        let cw = imperfect_codeword(w, c.eta, 10)?;
        let eff = efficiency_report(w, c.eta, c.gamma)?;
        Ok(json!({
            "delta": cw.delta,
            "delta_ratio": cw.ratio(),
            "p_inc_formula": incorrect_diagnosis_probability(cw.delta)?,
            "p_inc_trace_ratio": cw.incorrect_diagnosis_trace_ratio(),
            "coupled_no_jump_over_gamma": eff.coupled_over_gamma,
            "p_inc_over_gamma": eff.p_inc_over_gamma,
        }))
    };
    let theta = theta_from_reflectivity(c.reflectivity)?;
    let cats = c
        .cat_m
        .iter()
        .map(|&m| -> CliResult<Value> {
            let sq = balance_cat_pair(m, theta)?;
            let pair = cat_code_pair(m, sq.effective(theta.cos()), m + 4)?;
            Ok(json!({
                "m": m,
                "squeeze_db": sq.db(),
                "mean_photon": pair.zero_word.mean_photon(0)?,
                "parities": [
                    parity_name(rotsym_core::analysis::parity(&pair.one_word.to_density())),
                    parity_name(rotsym_core::analysis::parity(&pair.zero_word.to_density())),
                ],
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(json!({
        "thresholds": { "zero_word": threshold(LogicalWord::Zero), "one_word": threshold(LogicalWord::One) },
        "eta": c.eta,
        "gamma": c.gamma,
        "imperfect": { "zero_word": imperfect(LogicalWord::Zero)?, "one_word": imperfect(LogicalWord::One)? },
        "reflectivity": c.reflectivity,
        "cat_pairs": cats,
    }))
}

/// Code families for the KL checker: `binomial` or `cat:<m>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeArg {
    Binomial,
    Cat(usize),
}

impl FromStr for CodeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "binomial" {
            return Ok(CodeArg::Binomial);
        }
        s.strip_prefix("cat:")
            .and_then(|m| m.parse().ok())
            .map(CodeArg::Cat)
            .ok_or_else(|| format!("unknown code `{s}` (binomial, cat:<m>)"))
    }
}

impl std::fmt::Display for CodeArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CodeArg::Binomial => write!(f, "binomial"),
            CodeArg::Cat(m) => write!(f, "cat:{m}"),
        }
    }
}

impl Serialize for CodeArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CodeArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlConfig {
    #[serde(default = "default_code")]
    pub code: CodeArg,
    /// Error operators: `I`, `a`, `n`, `a2`.
    #[serde(default = "default_errors")]
    pub errors: Vec<String>,
    #[serde(default = "default_kl_tol")]
    pub tol: f64,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
    /// Initial squeezing for cat codes; `None` uses the balanced value.
    #[serde(default)]
    pub squeeze_db: Option<f64>,
}

fn default_code() -> CodeArg {
    CodeArg::Binomial
}

fn default_errors() -> Vec<String> {
    ["I", "a", "n"].map(String::from).to_vec()
}

fn default_kl_tol() -> f64 {
    1e-8
}

fn error_operator(name: &str, dim: usize) -> CliResult<ModeOperator> {
    Ok(match name {
        "I" => ModeOperator::identity(&[dim]),
        "a" => annihilator_dim(dim),
        "n" => number_operator_dim(dim),
        "a2" => annihilator_dim(dim).compose(&annihilator_dim(dim))?,
        _ => return Err(CliError::usage(format!("unknown error operator `{name}` (I, a, n, a2)"))),
    })
}

fn kl(c: &KlConfig) -> CliResult<Value> {
    let (pair, squeeze_db): (CodePair, Option<f64>) = match c.code {
        CodeArg::Binomial => (binomial_codewords(10)?, None),
        CodeArg::Cat(m) => {
            let theta = theta_from_reflectivity(c.reflectivity)?;
            let initial = match c.squeeze_db {
                Some(db) => SqueezeParam::from_db(db, 0.0)?,
                None => balance_cat_pair(m, theta)?,
            };
            (cat_code_pair(m, initial.effective(theta.cos()), m + 5)?, Some(initial.db()))
        }
    };
    let ops = c.errors.iter().map(|e| error_operator(e, pair.dim())).collect::<CliResult<Vec<_>>>()?;
    let report = kl_check(&pair, &ops, c.tol)?;
    let cplx = |z: Complex64| json!([z.re, z.im]);
    let blocks: Vec<Value> = report
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(l, row)| {
            let errors = &c.errors;
            row.iter().enumerate().map(move |(m, b)| {
                json!({
                    "left": errors[l],
                    "right": errors[m],
                    "block": [[cplx(b[0][0]), cplx(b[0][1])], [cplx(b[1][0]), cplx(b[1][1])]],
                })
            })
        })
        .collect();
    Ok(json!({
        "code": c.code.to_string(),
        "squeeze_db": squeeze_db,
        "errors": c.errors,
        "tol": c.tol,
        "passed": report.passed,
        "max_defect": report.max_defect,
        "blocks": blocks,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuxConfig {
    pub p: f64,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn mux(c: &MuxConfig) -> CliResult<Value> {
    let plan = match (c.n, c.delta) {
        (Some(n), None) => mux_at(c.p, n)?,
        (None, Some(d)) => mux_for_tolerance(c.p, d)?,
        _ => return Err(CliError::usage("give exactly one of --n and --delta")),
    };
    Ok(json!({ "p_single": plan.p_single, "n_mux": plan.n_mux, "p_mux": plan.p_mux, "delta_tol": plan.delta_tol }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
    #[serde(default = "default_table1_n_max")]
    pub n_max: usize,
}

fn default_table1_n_max() -> usize {
    rotsym_core::planner::TABLE1_N_MAX
}

pub fn table1_csv(c: &Table1Config) -> CliResult<CsvTable> {
    let rows = table1(c.reflectivity, c.n_max)?;
    let mut t = CsvTable::new(&[
        "m",
        "mean_photon",
        "squeezing_db",
        "p01",
        "p02",
        "p01_single",
        "p10_single",
        "p02_single",
        "p20_single",
    ]);
    t.comment("reflectivity", number(c.reflectivity));
    t.comment("n_max", c.n_max.to_string());
    for r in rows {
        t.push(vec![
            r.m.to_string(),
            number(r.mean_photon),
            number(r.squeezing_db),
            number(r.p01_either()),
            number(r.p02_either()),
            number(r.p01),
            number(r.p10),
            number(r.p02),
            number(r.p20),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresConfig {
    /// Figure ids to produce (`fig2a` ...); empty for all.
    #[serde(default)]
    pub only: Vec<String>,
    /// Coarser grids for a fast preview.
    #[serde(default)]
    pub quick: bool,
}

pub(crate) fn opt(x: Option<f64>) -> String {
    optional(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_spellings_round_trip() {
        for s in ["any-2fold", "any-4fold", "k:3:4", "exact:1,2,5"] {
            assert_eq!(s.parse::<FilterArg>().unwrap().to_string(), s);
        }
        for s in ["vacuum", "fock:3", "0L", "1L", "cat01:5", "cat02:7"] {
            assert_eq!(s.parse::<NamedState>().unwrap().to_string(), s);
        }
        for s in ["binomial", "cat:5"] {
            assert_eq!(s.parse::<CodeArg>().unwrap().to_string(), s);
        }
        for bad in ["k:3", "exact:1,2", "2fold"] {
            assert!(bad.parse::<FilterArg>().is_err());
        }
        assert!("cat03:5".parse::<NamedState>().is_err());
    }

    #[test]
    fn jobs_round_trip_through_json_with_defaults() {
        let job: Job = serde_json::from_str(r#"{"command": "run", "squeezing": {"db": 6.0}}"#).unwrap();
        let Job::Run(c) = &job else { panic!("run job") };
        assert_eq!((c.reflectivity, c.eta3, c.outcome), (0.1, 1.0, [0, 0, 0]));
        assert_eq!(job.command(), "run");
        let back: Job = serde_json::from_str(&serde_json::to_string(&job).unwrap()).unwrap();
        assert_eq!(back, job);
        let kl: Job = serde_json::from_str(r#"{"command": "kl-check"}"#).unwrap();
        assert_eq!(kl.command(), "kl-check");
        assert!(serde_json::from_str::<Job>(r#"{"command": "mux", "p": 0.5, "typo": 1}"#).is_err());
    }

    #[test]
    fn mux_needs_exactly_one_target() {
        assert!(mux(&MuxConfig { p: 0.5, n: None, delta: None }).is_err());
        assert!(mux(&MuxConfig { p: 0.5, n: Some(2), delta: Some(0.1) }).is_err());
        assert_eq!(mux(&MuxConfig { p: 0.5, n: Some(2), delta: None }).unwrap()["p_mux"], 0.75);
    }

    #[test]
    fn limit_state_mixes_in_higher_counts_under_loss() {
        let sq = SqueezeParam::from_db(10.0, 0.0).unwrap();
        let o = OutcomePattern::new(1, 1, 2);
        let ideal = vanishing_reflectivity_limit(o, sq, 1.0, 40).unwrap();
        assert_eq!(rotsym_core::analysis::parity(&ideal), Some(1));
        let lossy = vanishing_reflectivity_limit(o, sq, 0.8, 40).unwrap();
        assert!((lossy.trace() - 1.0).abs() < 1e-12);
        assert_eq!(rotsym_core::analysis::parity(&lossy), None);
        assert!(lossy.mean_photon() > ideal.mean_photon());
    }
}
