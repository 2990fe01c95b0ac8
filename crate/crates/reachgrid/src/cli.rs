//! Command-line driver: a thin sequential wrapper over the library with
//! reproducible run manifests.
//!
//! Every command echoes its full parameter set (defaults included), the
//! input content hash and the output hashes into `<output>.run.json`.
//! Exit codes: 0 success, 2 usage or parameter error, 3 incompatible
//! artifacts, 1 internal failure.

use crate::cae::{self, CaeConfig, CaeModel};
use crate::error::{Error, Result};
use crate::hash;
use crate::pipeline::{self, JobConfig};
use crate::store;
use crate::summary::{EventParams, NormScheme, SummaryArchive};
use crate::trajectory::{self, ObservationWindow, ParseCounters};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable overriding the default worker count.
pub const THREADS_ENV: &str = "REACHGRID_THREADS";

#[derive(Parser)]
#[command(
    name = "reachgrid",
    version,
    about = "Trajectory-derived reachability summaries and embeddings on the zoom-24 grid"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of T-Drive files into a normalized trajectory dump
    Ingest(IngestArgs),
    /// Generate per-tile reachability summaries from a trajectory dump
    Summarize(SummarizeArgs),
    /// Train the contractive autoencoder on a summary archive
    Train(TrainArgs),
    /// Embed every summary tile with a trained model
    Embed(EmbedArgs),
    /// Rasterize embeddings into a dense region tensor
    Export(ExportArgs),
    /// Project embeddings onto their two leading principal components
    Project(ProjectArgs),
    /// Strong-scaling benchmark of the summarize stage
    Bench(BenchArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of T-Drive .txt files, one per taxi
    #[arg(long)]
    input: PathBuf,
    /// Output trajectory dump
    #[arg(long)]
    out: PathBuf,
    /// Split trajectories on time gaps larger than this (seconds)
    #[arg(long, default_value_t = 300)]
    gap_s: i64,
    /// Split trajectories on tile jumps larger than this (Chebyshev)
    #[arg(long, default_value_t = 2000)]
    jump_tiles: u32,
    /// Observation window start (UTC seconds)
    #[arg(long, requires = "delta_t")]
    t0: Option<i64>,
    /// Observation window length (seconds)
    #[arg(long, requires = "t0")]
    delta_t: Option<i64>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Trajectory dump produced by `ingest`
    #[arg(long)]
    traj: PathBuf,
    /// Output summary archive
    #[arg(long)]
    out: PathBuf,
    /// Neighborhood Chebyshev radius
    #[arg(long, default_value_t = 12)]
    r: u32,
    /// Maximum elapsed seconds for a valid transition
    #[arg(long, default_value_t = 600)]
    tau_s: i64,
    /// Maximum hops for a valid transition
    #[arg(long, default_value_t = 16)]
    h_max: u32,
    /// Worker threads (default: REACHGRID_THREADS or 1)
    #[arg(long)]
    workers: Option<usize>,
    /// Normalization scheme
    #[arg(long, default_value = "global-max")]
    scheme: String,
    /// Observation window start recorded in the manifest
    #[arg(long, requires = "delta_t")]
    t0: Option<i64>,
    /// Observation window length recorded in the manifest
    #[arg(long, requires = "t0")]
    delta_t: Option<i64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Summary archive to train on
    #[arg(long)]
    archive: PathBuf,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    /// Embedding dimension
    #[arg(long, default_value_t = 8)]
    d_r: usize,
    /// Contractive penalty weight
    #[arg(long, default_value_t = 0.1)]
    lambda_c: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Training log CSV (default: <out>.train_log.csv)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Summary archive to embed
    #[arg(long)]
    archive: PathBuf,
    /// Output embeddings file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Embeddings file produced by `embed`
    #[arg(long)]
    embeddings: PathBuf,
    /// Output raster file
    #[arg(long)]
    out: PathBuf,
    /// Tile bounding box (all four or none; default: cover the inputs)
    #[arg(long, requires_all = ["min_y", "max_x", "max_y"])]
    min_x: Option<u32>,
    #[arg(long, requires_all = ["min_x", "max_x", "max_y"])]
    min_y: Option<u32>,
    #[arg(long, requires_all = ["min_x", "min_y", "max_y"])]
    max_x: Option<u32>,
    #[arg(long, requires_all = ["min_x", "min_y", "max_x"])]
    max_y: Option<u32>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Embeddings file produced by `embed`
    #[arg(long)]
    embeddings: PathBuf,
    /// Output CSV of (quadkey, pc1, pc2)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Trajectory dump to benchmark on
    #[arg(long)]
    traj: PathBuf,
    /// Output CSV report
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated worker counts; must include 1
    #[arg(long, default_value = "1,2,4")]
    workers: String,
    #[arg(long, default_value_t = 12)]
    r: u32,
    #[arg(long, default_value_t = 600)]
    tau_s: i64,
    #[arg(long, default_value_t = 16)]
    h_max: u32,
    #[arg(long, default_value = "global-max")]
    scheme: String,
}

/// Parses arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_)
        | Error::CoordinateOutOfRange { .. }
        | Error::UnknownScheme(_)
        | Error::InvalidQuadkey(_) => 2,
        Error::ArtifactMismatch { .. } | Error::Format { .. } => 3,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Train(a) => cmd_train(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Export(a) => cmd_export(a),
        Command::Project(a) => cmd_project(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

// ---------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub input_hash: String,
    pub counters: BTreeMap<String, u64>,
    pub stages: Vec<StageTime>,
    pub outputs: Vec<OutputHash>,
}

#[derive(Debug, Serialize)]
pub struct StageTime {
    pub name: String,
    pub wall_s: f64,
}

#[derive(Debug, Serialize)]
pub struct OutputHash {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    fn new(command: &str) -> RunManifest {
        RunManifest {
            tool: "reachgrid".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            parameters: BTreeMap::new(),
            input_hash: String::new(),
            counters: BTreeMap::new(),
            stages: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.into(), value.to_string());
    }

    fn counter(&mut self, key: &str, value: u64) {
        self.counters.insert(key.into(), value);
    }

    fn stage(&mut self, name: &str, since: Instant) {
        self.stages.push(StageTime {
            name: name.into(),
            wall_s: since.elapsed().as_secs_f64(),
        });
    }

    fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(OutputHash {
            path: path.display().to_string(),
            sha256: hash::sha256_file(path)?,
        });
        Ok(())
    }

    /// Writes `<main_output>.run.json` next to the artifact.
    fn write(&self, main_output: &Path) -> Result<PathBuf> {
        let path = manifest_path(main_output);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parameter(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

/// Manifest path for an artifact: `<artifact>.run.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    PathBuf::from(format!("{}.run.json", artifact.display()))
}

/// Hash of a directory of files: sha256 over `name:sha256(file)` lines in
/// sorted name order.
fn hash_dir(dir: &Path) -> Result<String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    let mut listing = String::new();
    for p in &names {
        let name = p.file_name().unwrap_or_default().to_string_lossy();
        listing.push_str(&format!("{name}:{}\n", hash::sha256_file(p)?));
    }
    Ok(hash::sha256_hex(listing.as_bytes()))
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    if !a.input.is_dir() {
        return Err(Error::Parameter(format!(
            "input directory {} does not exist",
            a.input.display()
        )));
    }
    let window = match (a.t0, a.delta_t) {
        (Some(t0), Some(dt)) => Some(ObservationWindow::new(t0, dt)?),
        _ => None,
    };
    let mut manifest = RunManifest::new("ingest");
    manifest.param("input", a.input.display());
    manifest.param("out", a.out.display());
    manifest.param("gap_s", a.gap_s);
    manifest.param("jump_tiles", a.jump_tiles);
    manifest.param("t0", a.t0.map_or("auto".into(), |v| v.to_string()));
    manifest.param("delta_t", a.delta_t.map_or("auto".into(), |v| v.to_string()));

    let t_hash = Instant::now();
    manifest.input_hash = hash_dir(&a.input)?;
    manifest.stage("hash_input", t_hash);

    let t_parse = Instant::now();
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.input)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut counters = ParseCounters::default();
    let mut records = Vec::new();
    for f in &files {
        let reader = BufReader::new(std::fs::File::open(f)?);
        records.extend(trajectory::parse_tdrive_file(reader, &mut counters)?);
    }
    manifest.stage("parse", t_parse);

    let in_window = records.len() as u64;
    if let Some(w) = window {
        records.retain(|r| w.contains(r.timestamp));
    }
    let window_dropped = in_window - records.len() as u64;
    if records.is_empty() {
        eprintln!("warning: no records inside the observation window");
    }

    let t_segment = Instant::now();
    records.sort_by(|a, b| (a.mover_id.as_str(), a.timestamp).cmp(&(b.mover_id.as_str(), b.timestamp)));
    let trajectories = trajectory::segment(&records, a.gap_s, a.jump_tiles);
    let mut paths: Vec<trajectory::TilePath> =
        trajectories.iter().map(trajectory::to_tile_path).collect();
    paths.sort_by(|x, y| x.id.cmp(&y.id));
    manifest.stage("segment", t_segment);

    let t_write = Instant::now();
    let visits: u64 = paths.iter().map(|p| p.visits.len() as u64).sum();
    write_atomic(&a.out, |w| trajectory::write_dump(w, &paths))?;
    manifest.stage("write", t_write);

    manifest.counter("lines", counters.lines);
    manifest.counter("parsed", counters.parsed);
    manifest.counter("skipped", counters.skipped);
    manifest.counter("window_dropped", window_dropped);
    manifest.counter("segments", paths.len() as u64);
    manifest.counter("visits", visits);
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    println!(
        "ingest: parsed={} skipped={} window_dropped={} segments={} visits={}",
        counters.parsed,
        counters.skipped,
        window_dropped,
        paths.len(),
        visits
    );
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let scheme: NormScheme = a.scheme.parse()?;
    let workers = resolve_workers(a.workers);
    let cfg = JobConfig {
        traj_dump: a.traj.clone(),
        out: a.out.clone(),
        window: a.t0.zip(a.delta_t),
        params: EventParams {
            r: a.r,
            tau_s: a.tau_s,
            h_max: a.h_max,
        },
        scheme,
        workers,
    };
    let mut manifest = RunManifest::new("summarize");
    manifest.param("traj", a.traj.display());
    manifest.param("out", a.out.display());
    manifest.param("r", a.r);
    manifest.param("tau_s", a.tau_s);
    manifest.param("h_max", a.h_max);
    manifest.param("workers", workers);
    manifest.param("scheme", scheme);
    let t_hash = Instant::now();
    manifest.input_hash = hash::sha256_file(&a.traj)?;
    manifest.stage("hash_input", t_hash);

    let t_run = Instant::now();
    let (_, stats) = pipeline::run_stage1(&cfg)?;
    manifest.stage("summarize", t_run);
    manifest.counter("paths", stats.paths as u64);
    manifest.counter("events", stats.events);
    manifest.counter("tiles", stats.tiles as u64);
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    println!(
        "summarize: paths={} events={} tiles={} wall_s={:.3}",
        stats.paths,
        stats.events,
        stats.tiles,
        stats.wall.as_secs_f64()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::new("train");
    let t_hash = Instant::now();
    manifest.input_hash = hash::sha256_file(&a.archive)?;
    manifest.stage("hash_input", t_hash);

    let t_load = Instant::now();
    let archive = SummaryArchive::read_file(&a.archive)?;
    manifest.stage("load", t_load);

    let mut cfg = CaeConfig::for_archive(a.d_r, &archive);
    cfg.lambda_c = a.lambda_c;
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    manifest.param("archive", a.archive.display());
    manifest.param("out", a.out.display());
    manifest.param("d_r", cfg.d_r);
    manifest.param("lambda_c", cfg.lambda_c);
    manifest.param("lr", cfg.learning_rate);
    manifest.param("batch", cfg.batch_size);
    manifest.param("epochs", cfg.epochs);
    manifest.param("seed", cfg.seed);
    manifest.param("channels", format!("{:?}", cfg.channels));
    manifest.param("activation", cfg.activation);

    let t_train = Instant::now();
    let (model, log) = cae::train(&archive, &cfg)?;
    manifest.stage("train", t_train);

    model.save_file(&a.out)?;
    let log_path = a
        .log
        .unwrap_or_else(|| PathBuf::from(format!("{}.train_log.csv", a.out.display())));
    std::fs::write(&log_path, log.to_csv())?;
    if let Some(last) = log.epochs.last() {
        manifest.param("final_recon_mse", last.recon_mse);
        manifest.param("final_contractive", last.contractive);
        manifest.param("final_total", last.total);
    }
    manifest.counter("train_tiles", archive.tiles.len() as u64);
    manifest.counter("epochs_run", log.epochs.len() as u64);
    manifest.output(&a.out)?;
    manifest.output(&log_path)?;
    manifest.write(&a.out)?;
    println!(
        "train: tiles={} epochs={} final_total={}",
        archive.tiles.len(),
        log.epochs.len(),
        log.epochs.last().map_or(f64::NAN, |e| e.total)
    );
    Ok(())
}

fn cmd_embed(a: EmbedArgs) -> Result<()> {
    let mut manifest = RunManifest::new("embed");
    manifest.param("model", a.model.display());
    manifest.param("archive", a.archive.display());
    manifest.param("out", a.out.display());
    let model_hash = hash::sha256_file(&a.model)?;
    manifest.input_hash = model_hash.clone();

    let t_load = Instant::now();
    let model = CaeModel::load_file(&a.model)?;
    let archive = SummaryArchive::read_file(&a.archive)?;
    manifest.stage("load", t_load);

    let t_embed = Instant::now();
    let embeddings = cae::embed(&model, &archive)?;
    manifest.stage("embed", t_embed);

    let raster_manifest = store::RasterManifest {
        d_r: model.cfg.d_r,
        r: archive.r(),
        t0: archive.params.t0,
        delta_t: archive.params.delta_t,
        model_hash,
        norm_maxima: archive.maxima.per_channel,
    };
    write_atomic(&a.out, |w| store::write_embeddings(w, &embeddings, &raster_manifest))?;
    manifest.counter("embeddings", embeddings.len() as u64);
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    println!("embed: embeddings={} d_r={}", embeddings.len(), model.cfg.d_r);
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let mut manifest = RunManifest::new("export");
    manifest.param("embeddings", a.embeddings.display());
    manifest.param("out", a.out.display());
    manifest.input_hash = hash::sha256_file(&a.embeddings)?;

    let (embeddings, raster_manifest) = store::read_embeddings_file(&a.embeddings)?;
    let bbox = match (a.min_x, a.min_y, a.max_x, a.max_y) {
        (Some(x0), Some(y0), Some(x1), Some(y1)) => store::TileRect::new(
            crate::tilegrid::TileId::new(x0, y0),
            crate::tilegrid::TileId::new(x1, y1),
        )?,
        _ => store::TileRect::covering(&embeddings)?,
    };
    manifest.param("bbox", format!("{:?}..{:?}", bbox.min, bbox.max));

    let t = Instant::now();
    let (raster, skipped) = store::rasterize(&embeddings, bbox, raster_manifest)?;
    write_atomic(&a.out, |w| store::export_raster(&raster, w))?;
    manifest.stage("rasterize", t);
    if skipped > 0 {
        eprintln!("warning: {skipped} embeddings outside the bounding box were skipped");
    }
    manifest.counter("skipped_outside_bbox", skipped);
    manifest.counter("width", u64::from(raster.width));
    manifest.counter("height", u64::from(raster.height));
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    println!(
        "export: {}x{}x{} raster, skipped={skipped}",
        raster.width, raster.height, raster.d
    );
    Ok(())
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let mut manifest = RunManifest::new("project");
    manifest.param("embeddings", a.embeddings.display());
    manifest.param("out", a.out.display());
    manifest.input_hash = hash::sha256_file(&a.embeddings)?;

    let (embeddings, _) = store::read_embeddings_file(&a.embeddings)?;
    let t = Instant::now();
    let projection = store::project_2d(&embeddings)?;
    manifest.stage("project", t);
    if projection.degenerate {
        eprintln!("warning: all embeddings identical; projection is all zeros");
    }
    std::fs::write(&a.out, projection.to_csv())?;
    manifest.counter("rows", projection.rows.len() as u64);
    manifest.param("eigenvalue_1", projection.eigenvalues.0);
    manifest.param("eigenvalue_2", projection.eigenvalues.1);
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    println!(
        "project: rows={} ev1={} ev2={}",
        projection.rows.len(),
        projection.eigenvalues.0,
        projection.eigenvalues.1
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let scheme: NormScheme = a.scheme.parse()?;
    let worker_counts: Vec<usize> = a
        .workers
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad worker count {s:?}")))
        })
        .collect::<Result<_>>()?;
    let event = EventParams {
        r: a.r,
        tau_s: a.tau_s,
        h_max: a.h_max,
    };
    event.validate()?;

    let mut manifest = RunManifest::new("bench");
    manifest.param("traj", a.traj.display());
    manifest.param("out", a.out.display());
    manifest.param("workers", &a.workers);
    manifest.param("r", a.r);
    manifest.param("tau_s", a.tau_s);
    manifest.param("h_max", a.h_max);
    manifest.param("scheme", scheme);
    manifest.input_hash = hash::sha256_file(&a.traj)?;

    let t_load = Instant::now();
    let file = std::fs::File::open(&a.traj)?;
    let paths = trajectory::read_dump(BufReader::new(file))?;
    manifest.stage("load", t_load);

    let params = pipeline::resolve_params(&paths, None, event, scheme);
    let t_bench = Instant::now();
    let report = pipeline::bench_strong_scaling(&paths, &params, &worker_counts)?;
    manifest.stage("bench", t_bench);

    std::fs::write(&a.out, report.to_csv())?;
    manifest.param("archive_sha256", &report.archive_sha256);
    manifest.counter("paths", paths.len() as u64);
    manifest.output(&a.out)?;
    manifest.write(&a.out)?;
    print!("{}", report.to_csv());
    Ok(())
}

/// Writes through a temp file in the target directory and renames into
/// place, so interrupted runs never leave partial artifacts at the final
/// path.
fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(&mut tmp);
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads one line of a text file, for smoke checks in tests.
pub fn head_line(path: &Path) -> Result<String> {
    let f = std::fs::File::open(path)?;
    let mut r = BufReader::new(f);
    let mut line = String::new();
    r.read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_resolution_precedence() {
        // Explicit flag wins regardless of the environment.
        assert_eq!(resolve_workers(Some(3)), 3);
        assert_eq!(resolve_workers(Some(0)), 1);
    }

    #[test]
    fn exit_codes_map_error_classes() {
        assert_eq!(exit_code(&Error::Parameter("x".into())), 2);
        assert_eq!(exit_code(&Error::UnknownScheme("x".into())), 2);
        assert_eq!(
            exit_code(&Error::ArtifactMismatch {
                field: "r",
                expected: "4".into(),
                actual: "8".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::format("f", "bad")), 3);
        assert_eq!(exit_code(&Error::Determinism("x".into())), 1);
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("/tmp/x.rsum")),
            PathBuf::from("/tmp/x.rsum.run.json")
        );
    }
}
