//! `scenesmith` command-line frontend: batch generation, validation with
//! metrics, previews, episode specs and trial statistics.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 validation failure.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scenesmith_core::analysis::{
    build_design, fit_logistic, read_trials, render_report, render_summary, summarize_trials, AnalysisError, Factor,
    RegressionReport, TrialSummary,
};
use scenesmith_core::catalog::{load_catalog, Catalog};
use scenesmith_core::config::{parse_run_config, RunConfig};
use scenesmith_core::populate::generate_batch;
use scenesmith_core::rng::{stream_rng, Stream};
use scenesmith_core::scene::{parse_scene, write_scene, SceneSpec};
use scenesmith_core::template::{parse_template, EnvironmentTemplate};
use scenesmith_core::validate::{
    check_scene, choose_targets, rasterize, render_metrics_table, render_preview, sample_episodes, scene_metrics,
    CheckContext, EpisodeSpec, SceneMetrics, Violation,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "scenesmith.manifest/1";
pub const SCENE_SUFFIX: &str = ".scene.json";

#[derive(Debug, Parser)]
#[command(name = "scenesmith", version, about = "Template-conditioned procedural scene generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a batch of scene variants from a template and catalog.
    Gen(GenArgs),
    /// Check scenes against every invariant and print their metrics.
    Validate(ValidateArgs),
    /// Render a top-down SVG plan of a scene.
    Preview(PreviewArgs),
    /// Sample navigation episode specs for a scene.
    Episodes(EpisodesArgs),
    /// Fit the trial-outcome logistic model and print success rates.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct Workers {
    /// Worker threads [default: available cores].
    #[arg(long, env = "SCENESMITH_WORKERS")]
    pub workers: Option<usize>,
}

impl Workers {
    fn get(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub template: PathBuf,
    pub catalog: PathBuf,
    /// Run configuration (JSON); defaults apply when omitted.
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Scene files, or directories whose `*.scene.json` files are checked.
    #[arg(required = true)]
    pub scenes: Vec<PathBuf>,
    /// Run configuration; by default the config echoed in a batch manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source template; by default taken from a batch manifest.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Asset catalog; by default taken from a batch manifest.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Write per-scene metrics and verdicts as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overlay blocked cells of the navigation grid.
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EpisodesArgs {
    pub scene: PathBuf,
    /// Starts per target type.
    #[arg(long, default_value_t = 3)]
    pub per_target: usize,
    /// Number of target types.
    #[arg(long, default_value_t = 5)]
    pub targets: usize,
    /// Comma-separated target types to choose from [default: all in the scene].
    #[arg(long)]
    pub target_types: Option<String>,
    /// Sampling seed [default: the scene seed].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the JSON array here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub trials: PathBuf,
    /// Factors of the model, comma separated.
    #[arg(long, default_value = "model,target,environment,position")]
    pub formula_factors: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the summary and fit as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            error,
        }
    }
}

/// Parse arguments, run the command, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Preview(a) => Ok(cmd_preview(&a)?),
        Command::Episodes(a) => Ok(cmd_episodes(&a)?),
        Command::Stats(a) => cmd_stats(&a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_config(path: Option<&Path>) -> Result<(RunConfig, Option<Vec<u8>>)> {
    match path {
        None => Ok((RunConfig::default(), None)),
        Some(p) => {
            let bytes = read(p)?;
            let cfg = parse_run_config(&bytes).with_context(|| format!("invalid config {}", p.display()))?;
            Ok((cfg, Some(bytes)))
        }
    }
}

fn load_template(path: &Path) -> Result<(EnvironmentTemplate, Vec<u8>)> {
    let bytes = read(path)?;
    let t = parse_template(&bytes).with_context(|| format!("invalid template {}", path.display()))?;
    Ok((t, bytes))
}

fn load_catalog_file(path: &Path) -> Result<(Catalog, Vec<u8>)> {
    let bytes = read(path)?;
    let c = load_catalog(&bytes).with_context(|| format!("invalid catalog {}", path.display()))?;
    Ok((c, bytes))
}

fn load_scene(path: &Path) -> Result<SceneSpec> {
    parse_scene(&read(path)?).with_context(|| format!("invalid scene {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    /// SHA-256 of the file bytes.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestScene {
    pub index: usize,
    pub seed: u64,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestError {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub template: InputRecord,
    pub catalog: InputRecord,
    pub config: Option<InputRecord>,
    /// Effective configuration, defaults filled in.
    pub config_echo: RunConfig,
    pub base_seed: u64,
    pub n: usize,
    pub scenes: Vec<ManifestScene>,
    pub errors: Vec<ManifestError>,
}

pub fn scene_file_name(index: usize, seed: u64) -> String {
    format!("scene_{index}_{seed}{SCENE_SUFFIX}")
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let (template, template_bytes) = load_template(&a.template)?;
    let (catalog, catalog_bytes) = load_catalog_file(&a.catalog)?;
    let (cfg, cfg_bytes) = load_config(a.config.as_deref())?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;

    let results = generate_batch(&template, &catalog, &cfg.gen, a.seed, a.n, a.workers.get());
    let mut scenes = Vec::new();
    let mut errors = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(scene) => {
                let file = scene_file_name(index, scene.seed);
                let bytes = write_scene(&scene);
                write(&a.out.join(&file), &bytes)?;
                scenes.push(ManifestScene {
                    index,
                    seed: scene.seed,
                    file,
                    sha256: sha256_hex(&bytes),
                });
            }
            Err(e) => errors.push(ManifestError {
                index: e.index,
                seed: e.seed,
                error: e.error.to_string(),
            }),
        }
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        template: InputRecord {
            path: absolute(&a.template),
            sha256: sha256_hex(&template_bytes),
        },
        catalog: InputRecord {
            path: absolute(&a.catalog),
            sha256: sha256_hex(&catalog_bytes),
        },
        config: a.config.as_ref().zip(cfg_bytes.as_ref()).map(|(p, b)| InputRecord {
            path: absolute(p),
            sha256: sha256_hex(b),
        }),
        config_echo: cfg,
        base_seed: a.seed,
        n: a.n,
        scenes,
        errors,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).context("serializing manifest")?;
    bytes.push(b'\n');
    write(&a.out.join(MANIFEST_FILE), &bytes)?;

    println!("generated {} of {} scenes in {}", manifest.scenes.len(), a.n, a.out.display());
    if manifest.errors.is_empty() {
        return Ok(());
    }
    for e in &manifest.errors {
        eprintln!("scene {} (seed {}): {}", e.index, e.seed, e.error);
    }
    Err(anyhow::anyhow!("{} of {} scenes failed", manifest.errors.len(), a.n).into())
}

/// Expand directories into their scene files, sorted by name.
fn scene_paths(args: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in args {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(SCENE_SUFFIX))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("no such scene file or directory: {}", p.display());
        }
    }
    if out.is_empty() {
        bail!("no scene files found");
    }
    Ok(out)
}

/// The manifest next to the given scenes, if there is exactly one.
fn find_manifest(args: &[PathBuf]) -> Result<Option<Manifest>> {
    let dirs: BTreeSet<PathBuf> = args
        .iter()
        .map(|p| if p.is_dir() { p.clone() } else { p.parent().map(Path::to_path_buf).unwrap_or_default() })
        .collect();
    if dirs.len() != 1 {
        return Ok(None);
    }
    let dir = dirs.into_iter().next().unwrap_or_default();
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let m = serde_json::from_slice(&read(&path)?).with_context(|| format!("invalid manifest {}", path.display()))?;
    Ok(Some(m))
}

pub fn scene_name(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(SCENE_SUFFIX).map(str::to_string).unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneVerdict {
    pub scene: String,
    pub seed: u64,
    pub violations: Vec<Violation>,
    pub metrics: Option<SceneMetrics>,
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let paths = scene_paths(&a.scenes)?;
    let manifest = if a.template.is_none() || a.catalog.is_none() || a.config.is_none() {
        find_manifest(&a.scenes)?
    } else {
        None
    };
    let template_path = a.template.clone().or_else(|| manifest.as_ref().map(|m| m.template.path.clone()));
    let catalog_path = a.catalog.clone().or_else(|| manifest.as_ref().map(|m| m.catalog.path.clone()));
    let template = template_path.as_deref().map(load_template).transpose()?;
    let catalog = catalog_path.as_deref().map(load_catalog_file).transpose()?;
    if let (Some(m), Some((_, bytes))) = (&manifest, &template) {
        if a.template.is_none() && sha256_hex(bytes) != m.template.sha256 {
            return Err(anyhow::anyhow!("template {} changed since the batch was generated", m.template.path.display()).into());
        }
    }
    if let (Some(m), Some((_, bytes))) = (&manifest, &catalog) {
        if a.catalog.is_none() && sha256_hex(bytes) != m.catalog.sha256 {
            return Err(anyhow::anyhow!("catalog {} changed since the batch was generated", m.catalog.path.display()).into());
        }
    }
    let cfg = match (&a.config, &manifest) {
        (Some(p), _) => load_config(Some(p))?.0,
        (None, Some(m)) => m.config_echo.clone(),
        (None, None) => RunConfig::default(),
    };
    let ctx = CheckContext {
        template: template.as_ref().map(|t| &t.0),
        catalog: catalog.as_ref().map(|c| &c.0),
        gen: Some(&cfg.gen),
    };

    let check = |path: &PathBuf| -> Result<SceneVerdict> {
        let scene = load_scene(path)?;
        let violations = check_scene(&scene, cfg.gen.clearance, ctx);
        let grid = rasterize(&scene, &cfg.nav);
        let metrics = scene_metrics(&scene, None, &grid, cfg.nav.exact_limit).ok();
        Ok(SceneVerdict {
            scene: scene_name(path),
            seed: scene.seed,
            violations,
            metrics,
        })
    };
    let workers = a.workers.get();
    let verdicts: Vec<Result<SceneVerdict>> = if workers <= 1 {
        paths.iter().map(check).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .context("cannot start worker pool")?;
        pool.install(|| paths.par_iter().map(check).collect())
    };
    let verdicts: Vec<SceneVerdict> = verdicts.into_iter().collect::<Result<_>>()?;

    let rows: Vec<(String, SceneMetrics)> = verdicts
        .iter()
        .filter_map(|v| v.metrics.clone().map(|m| (v.scene.clone(), m)))
        .collect();
    print!("{}", render_metrics_table(&rows));
    if let Some(path) = &a.report {
        let mut bytes = serde_json::to_vec_pretty(&verdicts).context("serializing report")?;
        bytes.push(b'\n');
        write(path, &bytes)?;
    }

    let failed: Vec<&SceneVerdict> = verdicts.iter().filter(|v| !v.violations.is_empty()).collect();
    for v in &failed {
        for x in &v.violations {
            eprintln!("scene {} (seed {}) violates {}: {}", v.scene, v.seed, x.invariant, x.detail);
        }
    }
    println!("{} of {} scenes pass", verdicts.len() - failed.len(), verdicts.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INVALID,
            error: anyhow::anyhow!("{} of {} scenes violate invariants", failed.len(), verdicts.len()),
        })
    }
}

pub fn cmd_preview(a: &PreviewArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let (cfg, _) = load_config(a.config.as_deref())?;
    let grid = a.grid.then(|| rasterize(&scene, &cfg.nav));
    write(&a.out, render_preview(&scene, grid.as_ref()).as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn cmd_episodes(a: &EpisodesArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let (cfg, _) = load_config(a.config.as_deref())?;
    let grid = rasterize(&scene, &cfg.nav);
    let allowed: Option<BTreeSet<String>> = a
        .target_types
        .as_ref()
        .map(|s| s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect());
    let mut rng = stream_rng(a.seed.unwrap_or(scene.seed), Stream::Episode);
    let targets = choose_targets(&scene, &grid, &cfg.nav, allowed.as_ref(), a.targets, &mut rng);
    if targets.len() < a.targets {
        bail!(
            "scene {} has only {} usable target types, {} requested",
            a.scene.display(),
            targets.len(),
            a.targets
        );
    }
    let scene_ref = a.scene.to_string_lossy();
    let episodes: Vec<EpisodeSpec> = sample_episodes(&scene, &scene_ref, &grid, &cfg.nav, &targets, a.per_target, &mut rng)?;
    let mut bytes = serde_json::to_vec_pretty(&episodes).context("serializing episodes")?;
    bytes.push(b'\n');
    match &a.out {
        Some(p) => {
            write(p, &bytes)?;
            println!("wrote {} episodes to {}", episodes.len(), p.display());
        }
        None => std::io::stdout().write_all(&bytes).context("writing episodes")?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct StatsOutput<'a> {
    summary: &'a TrialSummary,
    fit: &'a RegressionReport,
}

pub fn cmd_stats(a: &StatsArgs) -> Result<(), Failure> {
    let records = read_trials(&read(&a.trials)?).with_context(|| format!("invalid trials {}", a.trials.display()))?;
    let factors = Factor::parse_list(&a.formula_factors).context("bad --formula-factors")?;
    let (cfg, _) = load_config(a.config.as_deref())?;
    let summary = summarize_trials(&records).context("summarizing trials")?;
    println!("{}", render_summary(&summary));
    let design = build_design(&records, &factors).context("building the design matrix")?;
    let (report, converged) = match fit_logistic(&design, &cfg.fit) {
        Ok(r) => (r, true),
        Err(AnalysisError::NonConvergence(r)) => (*r, false),
        Err(e) => return Err(anyhow::Error::new(e).context("fitting").into()),
    };
    print!("{}", render_report(&report));
    if let Some(path) = &a.json {
        let mut bytes = serde_json::to_vec_pretty(&StatsOutput {
            summary: &summary,
            fit: &report,
        })
        .context("serializing stats")?;
        bytes.push(b'\n');
        write(path, &bytes)?;
    }
    if converged {
        Ok(())
    } else {
        Err(anyhow::anyhow!("the fit did not converge after {} iterations", report.iterations).into())
    }
}
