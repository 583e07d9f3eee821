use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};

use rotsym::error::{CliError, CliResult};
use rotsym::jobs::{
    CodesConfig, FiguresConfig, KlConfig, MuxConfig, RunConfig, SweepConfig, Table1Config, WignerConfig,
};
use rotsym::output::{replay, run_job, Destination};
use rotsym::{ExecContext, Job};

#[derive(Parser)]
#[command(name = "rotsym", version, about = "Heralded rotation-symmetric bosonic code states from squeezed light")]
struct Cli {
    /// Worker threads; 0 uses one per logical core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Io {
    /// TOML or JSON file with the command's settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output directory; the manifest goes to `manifest.json`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one protocol run and report the heralded state.
    Run(RunArgs),
    /// Symmetry-filtered aggregate probabilities over a parameter grid.
    Sweep(SweepArgs),
    /// Wigner function of a named state on a grid.
    Wigner(WignerArgs),
    /// Code thresholds, imperfect-word model and balanced cat-like pairs.
    Codes(CodesArgs),
    /// Knill-Laflamme conditions for a code and error set.
    KlCheck(KlArgs),
    /// Multiplexed success probability.
    Mux(MuxArgs),
    /// Balanced cat-like pairs at 10% reflectivity.
    Table1(Table1Args),
    /// Data for every figure panel.
    Figures(FiguresArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "raw_r", allow_negative_numbers = true)]
    squeeze_db: Option<f64>,
    /// Squeezing parameter `R` in nepers.
    #[arg(long)]
    raw_r: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    n3: Option<usize>,
    #[arg(long)]
    eta3: Option<f64>,
    /// Photon cutoff per mode; automatic from the squeezing if unset.
    #[arg(long = "nmax", env = "ROTSYM_NMAX")]
    n_max: Option<usize>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    squeeze_db: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    reflectivity: Vec<f64>,
    /// any-2fold, any-4fold, k:<k>:<fold> or exact:<n1>,<n2>,<n3>.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long = "nmax")]
    n_max: Option<usize>,
    /// Fraction of points re-checked with the four-mode simulation.
    #[arg(long)]
    validate_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct WignerArgs {
    /// vacuum, fock:<n>, 0L, 1L, cat01:<m> or cat02:<m>.
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct CodesArgs {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    cat_m: Vec<usize>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct KlArgs {
    /// binomial or cat:<m>.
    #[arg(long)]
    code: Option<String>,
    /// Comma-separated error operators from I, a, n, a2.
    #[arg(long, value_delimiter = ',')]
    errors: Vec<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long)]
    squeeze_db: Option<f64>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct MuxArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, conflicts_with = "delta")]
    n: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long)]
    reflectivity: Option<f64>,
    #[arg(long = "nmax")]
    n_max: Option<usize>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct FiguresArgs {
    /// Comma-separated figure ids; all when unset.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Coarse grids for a fast preview.
    #[arg(long)]
    quick: bool,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Also write the re-run outputs here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let value: Value = if is_toml {
        let t: toml::Value = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t)?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::config(format!("{}: expected a table of settings", path.display()))),
    }
}

/// Settings from the config file with every given flag laid over them.
struct Overlay(Map<String, Value>);

impl Overlay {
    fn new(io: &Io) -> CliResult<Self> {
        Ok(Self(load_config(io.config.as_deref())?))
    }

    fn set<T: serde::Serialize>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), json!(v));
        }
        self
    }

    fn set_list<T: serde::Serialize>(&mut self, key: &str, v: &[T]) -> &mut Self {
        if !v.is_empty() {
            self.0.insert(key.into(), json!(v));
        }
        self
    }

    fn build<T: DeserializeOwned>(&mut self) -> CliResult<T> {
        serde_json::from_value(Value::Object(std::mem::take(&mut self.0))).map_err(|e| CliError::config(e.to_string()))
    }
}

fn run_config(a: &RunArgs) -> CliResult<RunConfig> {
    let mut o = Overlay::new(&a.io)?;
    o.set("squeezing", a.squeeze_db.map(|d| json!({ "db": d })))
        .set("squeezing", a.raw_r.map(|r| json!({ "raw_r": r })))
        .set("phi", a.phi)
        .set("reflectivity", a.reflectivity)
        .set("eta3", a.eta3)
        .set("n_max", a.n_max);
    if !o.0.contains_key("squeezing") {
        return Err(CliError::usage("give --squeeze-db or --raw-r"));
    }
    let mut outcome = match o.0.get("outcome") {
        Some(v) => {
            serde_json::from_value::<[usize; 3]>(v.clone()).map_err(|e| CliError::config(format!("outcome: {e}")))?
        }
        None => [0; 3],
    };
    for (slot, v) in outcome.iter_mut().zip([a.n1, a.n2, a.n3]) {
        if let Some(v) = v {
            *slot = v;
        }
    }
    o.set("outcome", Some(outcome));
    o.build()
}

fn job_of(cmd: &Cmd) -> CliResult<(Job, &Io)> {
    Ok(match cmd {
        Cmd::Run(a) => (Job::Run(run_config(a)?), &a.io),
        Cmd::Sweep(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set_list("squeeze_db", &a.squeeze_db)
                .set_list("reflectivity", &a.reflectivity)
                .set("filter", a.filter.clone())
                .set_list("eta", &a.eta)
                .set("cutoff", a.cutoff)
                .set("n_max", a.n_max)
                .set("validate_fraction", a.validate_fraction)
                .set("seed", a.seed);
            (Job::Sweep(o.build::<SweepConfig>()?), &a.io)
        }
        Cmd::Wigner(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set("state", a.state.clone())
                .set("eta", a.eta)
                .set("half_width", a.half_width)
                .set("resolution", a.resolution)
                .set("reflectivity", a.reflectivity);
            (Job::Wigner(o.build::<WignerConfig>()?), &a.io)
        }
        Cmd::Codes(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set("eta", a.eta).set("gamma", a.gamma).set_list("cat_m", &a.cat_m).set("reflectivity", a.reflectivity);
            (Job::Codes(o.build::<CodesConfig>()?), &a.io)
        }
        Cmd::KlCheck(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set("code", a.code.clone())
                .set_list("errors", &a.errors)
                .set("tol", a.tol)
                .set("reflectivity", a.reflectivity)
                .set("squeeze_db", a.squeeze_db);
            (Job::KlCheck(o.build::<KlConfig>()?), &a.io)
        }
        Cmd::Mux(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set("p", a.p).set("n", a.n).set("delta", a.delta);
            (Job::Mux(o.build::<MuxConfig>()?), &a.io)
        }
        Cmd::Table1(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set("reflectivity", a.reflectivity).set("n_max", a.n_max);
            (Job::Table1(o.build::<Table1Config>()?), &a.io)
        }
        Cmd::Figures(a) => {
            let mut o = Overlay::new(&a.io)?;
            o.set_list("only", &a.only).set("quick", a.quick.then_some(true));
            (Job::Figures(o.build::<FiguresConfig>()?), &a.io)
        }
        Cmd::Replay(_) => unreachable!("replay has no job"),
    })
}

fn main_inner(cli: Cli) -> CliResult<()> {
    let ctx = ExecContext { jobs: cli.jobs };
    if let Cmd::Replay(a) = &cli.cmd {
        let report = replay(&a.manifest, ctx, a.out_dir.as_deref())?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        if report["identical"] != Value::Bool(true) {
            return Err(CliError::Mismatch);
        }
        return Ok(());
    }
    let (job, io) = job_of(&cli.cmd)?;
    let dest = Destination::from_flags(io.out.clone(), io.out_dir.clone())?;
    let manifest = run_job(&job, ctx, &dest)?;
    if dest != Destination::Stdout {
        let files: Vec<_> = manifest.outputs.values().filter_map(|r| r.file.clone()).collect();
        println!("{}", json!({ "command": manifest.command, "hash": manifest.hash, "files": files }));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return CliError::usage(first).report();
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
