//! Data behind each figure, one CSV per panel.

use rayon::prelude::*;

use rotsym_core::analysis::{fidelity_pure, wigner, wln, GridSpec};
use rotsym_core::analytic::{effective_squeezing, success_probability, OutcomePattern};
use rotsym_core::codes::{balance_cat_pair, binomial_codewords, cat_pair_mean_photons, LogicalWord};
use rotsym_core::dense::theta_from_reflectivity;
use rotsym_core::planner::{
    codeword_probability, detect_with_efficiency, enumerate_outcomes, mux_probability, OutcomeFilter, DEFAULT_CUTOFF,
    DEFAULT_SWEEP_N_MAX, TABLE1_REFLECTIVITY,
};
use rotsym_core::squeeze::SqueezeParam;

use crate::error::{CliError, CliResult};
use crate::format::{number, CsvTable};
use crate::jobs::{opt, word_protocol, Artifact, ExecContext, FiguresConfig};
use crate::sweep::with_pool;

pub const ALL: [&str; 19] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig4c", "fig4d", "fig5a",
    "fig5b", "fig5c", "fig6a", "fig6b", "fig6c", "fig7a", "fig7b",
];

/// Reflectivity of the multiplexing curves and the cat-like pairs.
pub const FIXED_REFLECTIVITY: f64 = TABLE1_REFLECTIVITY;
/// Initial squeezing of the k-component curves and the flat cat-pair curves.
pub const FIXED_SQUEEZE_DB: f64 = 12.0;
/// Largest multiplexing degree plotted.
pub const MUX_N_MAX: u64 = 50;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

struct Grids {
    fig2_db: Vec<f64>,
    reflectivity: Vec<f64>,
    fig3a_db: Vec<f64>,
    wigner_resolution: usize,
    eta: Vec<f64>,
    fig6_db: Vec<f64>,
    cat_m: Vec<usize>,
}

impl Grids {
    fn new(quick: bool) -> Self {
        if quick {
            Self {
                fig2_db: vec![6.0, 12.0],
                reflectivity: logspace(1e-2, 0.3, 5),
                fig3a_db: linspace(6.0, 16.0, 11),
                wigner_resolution: 41,
                eta: linspace(0.5, 1.0, 6),
                fig6_db: linspace(2.0, 14.0, 7),
                cat_m: vec![3, 5],
            }
        } else {
            Self {
                fig2_db: vec![3.0, 6.0, 9.0, 12.0, 15.0],
                reflectivity: logspace(1e-3, 0.3, 25),
                fig3a_db: linspace(6.0, 20.0, 57),
                wigner_resolution: 201,
                eta: linspace(0.5, 1.0, 21),
                fig6_db: linspace(0.5, 14.0, 55),
                cat_m: (2..=8).collect(),
            }
        }
    }
}

/// Probability and probability-weighted mean photon number for each
/// filter, from one enumeration.
fn aggregates(db: f64, reflectivity: f64, filters: &[OutcomeFilter]) -> CliResult<Vec<(f64, Option<f64>)>> {
    let squeeze = SqueezeParam::from_db(db, 0.0)?;
    let theta = theta_from_reflectivity(reflectivity)?;
    let ideal = enumerate_outcomes(squeeze, theta, DEFAULT_CUTOFF, DEFAULT_SWEEP_N_MAX)?;
    let branches = detect_with_efficiency(&ideal, 1.0);
    Ok(filters
        .iter()
        .map(|f| {
            let (mut p, mut w) = (0.0, 0.0);
            for b in branches.iter().filter(|b| f.accepts(&b.outcome, &b.populations)) {
                p += b.probability;
                w += b.probability * b.mean_photon;
            }
            (p, (p > 0.0).then(|| w / p))
        })
        .collect())
}

fn fig2(g: &Grids) -> CliResult<Vec<Artifact>> {
    let filters = [OutcomeFilter::AnyTwoFold, OutcomeFilter::AnyFourFold];
    let pts: Vec<(f64, f64)> = g.fig2_db.iter().flat_map(|&d| g.reflectivity.iter().map(move |&r| (d, r))).collect();
    let res: Vec<_> = pts.par_iter().map(|&(d, r)| aggregates(d, r, &filters)).collect::<CliResult<_>>()?;
    let mut prob = [
        CsvTable::new(&["squeeze_db", "reflectivity", "probability"]),
        CsvTable::new(&["squeeze_db", "reflectivity", "probability"]),
    ];
    let head = ["squeeze_db", "reflectivity", "mean_photon", "input_mean_photon"];
    let mut mean = [CsvTable::new(&head), CsvTable::new(&head)];
    for ((d, r), agg) in pts.iter().zip(&res) {
        let sh = SqueezeParam::from_db(*d, 0.0)?.r.sinh();
        for i in 0..2 {
            prob[i].push(vec![number(*d), number(*r), number(agg[i].0)]);
            mean[i].push(vec![number(*d), number(*r), opt(agg[i].1), number(sh * sh)]);
        }
    }
    let [pa, pb] = prob;
    let [mc, md] = mean;
    Ok(vec![
        Artifact::csv("fig2a.csv", pa),
        Artifact::csv("fig2b.csv", pb),
        Artifact::csv("fig2c.csv", mc),
        Artifact::csv("fig2d.csv", md),
    ])
}

fn fig3a(g: &Grids) -> CliResult<Vec<Artifact>> {
    let mut t = CsvTable::new(&["squeeze_db", "zero_word", "one_word"]);
    for &d in &g.fig3a_db {
        let z = codeword_probability(LogicalWord::Zero, d)?;
        let o = codeword_probability(LogicalWord::One, d)?;
        t.push(vec![number(d), opt(z), opt(o)]);
    }
    Ok(vec![Artifact::csv("fig3a.csv", t)])
}

fn fig3bc(g: &Grids) -> CliResult<Vec<Artifact>> {
    let ks = [2usize, 3, 4, 5];
    let filters: Vec<OutcomeFilter> =
        [4usize, 2].iter().flat_map(|&fold| ks.iter().map(move |&k| OutcomeFilter::KComponents { k, fold })).collect();
    let res: Vec<_> =
        g.reflectivity.par_iter().map(|&r| aggregates(FIXED_SQUEEZE_DB, r, &filters)).collect::<CliResult<_>>()?;
    let mut tables =
        [CsvTable::new(&["reflectivity", "k", "probability"]), CsvTable::new(&["reflectivity", "k", "probability"])];
    for t in &mut tables {
        t.comment("squeeze_db", number(FIXED_SQUEEZE_DB));
    }
    for (r, agg) in g.reflectivity.iter().zip(&res) {
        for (fi, &(p, _)) in agg.iter().enumerate() {
            tables[fi / ks.len()].push(vec![number(*r), ks[fi % ks.len()].to_string(), number(p)]);
        }
    }
    let [b, c] = tables;
    Ok(vec![Artifact::csv("fig3b.csv", b), Artifact::csv("fig3c.csv", c)])
}

fn fig4(g: &Grids) -> CliResult<Vec<Artifact>> {
    let panels = [
        ("fig4a.csv", LogicalWord::Zero, 1.0),
        ("fig4b.csv", LogicalWord::Zero, 0.9),
        ("fig4c.csv", LogicalWord::One, 1.0),
        ("fig4d.csv", LogicalWord::One, 0.9),
    ];
    let spec = GridSpec::square(6.0, g.wigner_resolution);
    panels
        .par_iter()
        .map(|&(name, which, eta)| {
            let (sim, outcome) = word_protocol(which)?;
            let rho = sim.condition(&outcome, [1.0, 1.0, eta])?.state;
            let grid = wigner(&rho, &spec)?;
            let mut t = CsvTable::new(&["q", "p", "w"]);
            t.comment("eta", number(eta));
            t.comment("min_w", number(grid.min()));
            for (iq, q) in grid.q.iter().enumerate() {
                for (ip, p) in grid.p.iter().enumerate() {
                    t.push(vec![number(*q), number(*p), number(grid.at(iq, ip))]);
                }
            }
            Ok(Artifact::csv(name, t))
        })
        .collect()
}

fn fig5(g: &Grids) -> CliResult<Vec<Artifact>> {
    let spec = GridSpec::square(6.0, g.wigner_resolution.min(121));
    let per_word = [LogicalWord::Zero, LogicalWord::One]
        .par_iter()
        .map(|&which| -> CliResult<Vec<(f64, f64, f64)>> {
            let (sim, outcome) = word_protocol(which)?;
            let words = binomial_codewords(sim.state().mode_dims()[0])?;
            let ideal = if which == LogicalWord::Zero { &words.zero_word } else { &words.one_word };
            g.eta
                .iter()
                .map(|&eta| {
                    let rho = sim.condition(&outcome, [1.0, 1.0, eta])?.state;
                    let grid = wigner(&rho, &spec)?;
                    Ok((fidelity_pure(&rho, ideal)?, grid.min(), wln(&grid)?))
                })
                .collect()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut tables = [("fig5a.csv", "fidelity"), ("fig5b.csv", "min_w"), ("fig5c.csv", "wln")]
        .map(|(name, q)| (name, q, CsvTable::new(&["eta", "zero_word", "one_word"])));
    for (i, &eta) in g.eta.iter().enumerate() {
        let (z, o) = (per_word[0][i], per_word[1][i]);
        tables[0].2.push(vec![number(eta), number(z.0), number(o.0)]);
        tables[1].2.push(vec![number(eta), number(z.1), number(o.1)]);
        tables[2].2.push(vec![number(eta), number(z.2), number(o.2)]);
    }
    Ok(tables
        .into_iter()
        .map(|(name, q, mut t)| {
            t.comment("quantity", q);
            Artifact::csv(name, t)
        })
        .collect())
}

fn fig6(g: &Grids) -> CliResult<Vec<Artifact>> {
    let theta = theta_from_reflectivity(FIXED_REFLECTIVITY)?;
    let t_cos = theta.cos();
    let mut a = CsvTable::new(&["squeeze_db", "m", "mean_photon_01", "mean_photon_02"]);
    let mut b = CsvTable::new(&["squeeze_db", "m", "probability"]);
    let mut c = CsvTable::new(&["squeeze_db", "m", "probability"]);
    for t in [&mut a, &mut b, &mut c] {
        t.comment("reflectivity", number(FIXED_REFLECTIVITY));
    }
    for &m in &g.cat_m {
        a.comment(&format!("balanced_db_m{m}"), number(balance_cat_pair(m, theta)?.db()));
        for &d in &g.fig6_db {
            let sq = SqueezeParam::from_db(d, 0.0)?;
            let (n01, n02) = cat_pair_mean_photons(m, effective_squeezing(sq.r, t_cos).tanh());
            a.push(vec![number(d), m.to_string(), number(n01), number(n02)]);
            let p = |n1, n2| success_probability(OutcomePattern::new(n1, n2, m), sq, theta);
            b.push(vec![number(d), m.to_string(), number(p(0, 1)? + p(1, 0)?)]);
            c.push(vec![number(d), m.to_string(), number(p(0, 2)? + p(2, 0)?)]);
        }
    }
    Ok(vec![Artifact::csv("fig6a.csv", a), Artifact::csv("fig6b.csv", b), Artifact::csv("fig6c.csv", c)])
}

/// Best single-shot probability of heralding `which` over `dbs`.
fn best_codeword_probability(which: LogicalWord, dbs: &[f64]) -> CliResult<(f64, f64)> {
    let mut best = (f64::NAN, 0.0);
    for &d in dbs {
        if let Some(p) = codeword_probability(which, d)? {
            if p > best.1 {
                best = (d, p);
            }
        }
    }
    Ok(best)
}

fn mux_rows(t: &mut CsvTable, label: &[String], p: f64) -> CliResult<()> {
    for n in 1..=MUX_N_MAX {
        let mut row = label.to_vec();
        row.extend([number(p), n.to_string(), number(mux_probability(p, n)?)]);
        t.push(row);
    }
    Ok(())
}

fn fig7(g: &Grids) -> CliResult<Vec<Artifact>> {
    let mut a = CsvTable::new(&["curve", "squeeze_db", "p_single", "n_mux", "p_mux"]);
    a.comment("reflectivity", number(FIXED_REFLECTIVITY));
    let filters = [OutcomeFilter::AnyTwoFold, OutcomeFilter::AnyFourFold];
    let dbs = [15.0, 6.0];
    let aggs: Vec<_> =
        dbs.par_iter().map(|&d| aggregates(d, FIXED_REFLECTIVITY, &filters)).collect::<CliResult<_>>()?;
    for (fi, name) in ["any-2fold", "any-4fold"].iter().enumerate() {
        for (d, agg) in dbs.iter().zip(&aggs) {
            mux_rows(&mut a, &[name.to_string(), number(*d)], agg[fi].0)?;
        }
    }
    let scan = linspace(6.0, 20.0, 141);
    for (name, which) in [("one_word", LogicalWord::One), ("zero_word", LogicalWord::Zero)] {
        let (d, p) = best_codeword_probability(which, &scan)?;
        mux_rows(&mut a, &[name.to_string(), number(d)], p)?;
    }

    let theta = theta_from_reflectivity(FIXED_REFLECTIVITY)?;
    let mut b = CsvTable::new(&["m", "squeezing", "word", "squeeze_db", "p_single", "n_mux", "p_mux"]);
    b.comment("reflectivity", number(FIXED_REFLECTIVITY));
    for &m in &g.cat_m {
        let balanced = balance_cat_pair(m, theta)?;
        let flat = SqueezeParam::from_db(FIXED_SQUEEZE_DB, 0.0)?;
        for (label, sq) in [("balanced", balanced), ("flat", flat)] {
            for (word, n2) in [("psi01", 1usize), ("psi02", 2)] {
                let p = success_probability(OutcomePattern::new(0, n2, m), sq, theta)?
                    + success_probability(OutcomePattern::new(n2, 0, m), sq, theta)?;
                mux_rows(&mut b, &[m.to_string(), label.into(), word.into(), number(sq.db())], p)?;
            }
        }
    }
    Ok(vec![Artifact::csv("fig7a.csv", a), Artifact::csv("fig7b.csv", b)])
}

type Group = fn(&Grids) -> CliResult<Vec<Artifact>>;

const GROUPS: [(&str, Group); 7] = [
    ("fig2", fig2),
    ("fig3a", fig3a),
    ("fig3b", fig3bc),
    ("fig4", fig4),
    ("fig5", fig5),
    ("fig6", fig6),
    ("fig7", fig7),
];

fn group_of(id: &str) -> &'static str {
    match id {
        "fig3a" => "fig3a",
        "fig3b" | "fig3c" => "fig3b",
        _ => GROUPS.iter().map(|g| g.0).find(|g| id.starts_with(g)).expect("known figure id"),
    }
}

pub fn execute(c: &FiguresConfig, ctx: ExecContext) -> CliResult<Vec<Artifact>> {
    for id in &c.only {
        if !ALL.contains(&id.as_str()) {
            return Err(CliError::usage(format!("unknown figure `{id}` (fig2a ... fig7b)")));
        }
    }
    let wanted = |id: &str| c.only.is_empty() || c.only.iter().any(|o| o == id);
    let groups: Vec<_> = GROUPS.iter().filter(|(g, _)| ALL.iter().any(|id| group_of(id) == *g && wanted(id))).collect();
    let grids = Grids::new(c.quick);
    let out = with_pool(ctx.jobs, || -> CliResult<Vec<Vec<Artifact>>> {
        groups.par_iter().map(|(_, f)| f(&grids)).collect()
    })??;
    let mut arts: Vec<Artifact> =
        out.into_iter().flatten().filter(|a| wanted(a.name.trim_end_matches(".csv"))).collect();
    for a in &mut arts {
        if let crate::jobs::Content::Csv(t) = &mut a.content {
            t.comment("quick", c.quick.to_string());
        }
    }
    Ok(arts)
}
