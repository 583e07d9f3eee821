//! Writing artifacts with their manifest, and replaying a manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::jobs::{execute, Artifact, ExecContext, Job};
use crate::manifest::{file_digest, job_hash, manifest_path, OutputRecord, RunManifest};

/// Where a command's artifacts go.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Destination {
    /// Primary artifact on stdout, no manifest file.
    #[default]
    Stdout,
    /// Primary artifact at this path, others beside it as
    /// `<stem>.<artifact>`, manifest at `<path>.manifest.json`.
    File(PathBuf),
    /// Every artifact under its own name, manifest at `manifest.json`.
    Dir(PathBuf),
}

impl Destination {
    pub fn from_flags(out: Option<PathBuf>, out_dir: Option<PathBuf>) -> CliResult<Self> {
        match (out, out_dir) {
            (Some(_), Some(_)) => Err(CliError::usage("give at most one of --out and --out-dir")),
            (Some(f), None) => Ok(Destination::File(f)),
            (None, Some(d)) => Ok(Destination::Dir(d)),
            (None, None) => Ok(Destination::Stdout),
        }
    }

    fn manifest_file(&self) -> Option<PathBuf> {
        match self {
            Destination::Stdout => None,
            Destination::File(f) => {
                let mut s = f.clone().into_os_string();
                s.push(".manifest.json");
                Some(s.into())
            }
            Destination::Dir(d) => Some(manifest_path(d)),
        }
    }

    /// File for artifact `i` named `name`, relative to the manifest's directory.
    fn file_name(&self, i: usize, name: &str) -> Option<String> {
        match self {
            Destination::Stdout => None,
            Destination::File(f) => {
                let base = f.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                if i == 0 {
                    Some(base)
                } else {
                    let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Some(format!("{stem}.{name}"))
                }
            }
            Destination::Dir(_) => Some(name.to_string()),
        }
    }

    fn dir(&self) -> PathBuf {
        match self {
            Destination::Stdout => PathBuf::from("."),
            Destination::File(f) => f.parent().map(Path::to_path_buf).unwrap_or_default(),
            Destination::Dir(d) => d.clone(),
        }
    }
}

/// Serialised artifacts with their digests, in artifact order.
pub fn render(job: &Job, arts: &[Artifact]) -> CliResult<Vec<(String, Vec<u8>)>> {
    let hash = job_hash(job);
    arts.iter().map(|a| Ok((a.name.clone(), a.to_bytes(&hash)?))).collect()
}

/// Runs `job`, writes its outputs to `dest` and returns the manifest.
pub fn run_job(job: &Job, ctx: ExecContext, dest: &Destination) -> CliResult<RunManifest> {
    let start = Instant::now();
    let arts = execute(job, ctx)?;
    let rendered = render(job, &arts)?;
    let mut manifest = RunManifest::new(job, start.elapsed().as_secs_f64());
    let dir = dest.dir();
    if let Destination::Dir(d) = dest {
        std::fs::create_dir_all(d)?;
    }
    for (i, (name, bytes)) in rendered.iter().enumerate() {
        let file = dest.file_name(i, name);
        match &file {
            Some(f) => std::fs::write(dir.join(f), bytes)?,
            None if i == 0 => std::io::stdout().lock().write_all(bytes)?,
            None => {}
        }
        manifest.outputs.insert(name.clone(), OutputRecord { file, sha256: file_digest(bytes) });
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(p) = dest.manifest_file() {
        manifest.write(&p)?;
    }
    Ok(manifest)
}

/// Re-runs the job in `manifest_file` and compares every output digest.
/// With `out_dir`, the re-run outputs are also written there.
pub fn replay(manifest_file: &Path, ctx: ExecContext, out_dir: Option<&Path>) -> CliResult<Value> {
    let recorded = RunManifest::read(manifest_file)?;
    let arts = execute(&recorded.job, ctx)?;
    let rendered = render(&recorded.job, &arts)?;
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut rows = Vec::new();
    let mut identical = rendered.len() == recorded.outputs.len();
    for (name, bytes) in &rendered {
        let actual = file_digest(bytes);
        let expected = recorded.outputs.get(name).map(|r| r.sha256.clone());
        let same = expected.as_deref() == Some(actual.as_str());
        identical &= same;
        if let Some(d) = out_dir {
            std::fs::write(d.join(name), bytes)?;
        }
        rows.push(json!({ "name": name, "expected": expected, "actual": actual, "identical": same }));
    }
    Ok(json!({
        "manifest": manifest_file.display().to_string(),
        "command": recorded.command,
        "hash": recorded.hash,
        "identical": identical,
        "outputs": rows,
    }))
}
