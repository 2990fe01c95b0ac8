//! Data-parallel orchestration of stage 1 with deterministic merging and
//! a strong-scaling benchmark harness.
//!
//! Trajectories are partitioned round-robin across an in-process worker
//! pool. Each worker accumulates events into partial summary stores
//! sharded by a 256 x 256 tile block key; shards merge associatively over
//! integer accumulators, so the finalized archive is bit-identical for
//! any worker count, scheduling order or rerun.

use crate::error::{Error, Result};
use crate::hash::HashWriter;
use crate::summary::{SummaryArchive, SummaryParams, SummaryStore};
use crate::trajectory::{self, TilePath};
use crate::{summary, tilegrid::TileId};
use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Side of the grid block used as the shard key (tiles).
pub const SHARD_BLOCK: u32 = 256;

fn block_key(t: TileId) -> (u32, u32) {
    (t.x / SHARD_BLOCK, t.y / SHARD_BLOCK)
}

/// Partial per-worker result: summary accumulators sharded by grid block.
struct ShardedStore {
    r: u32,
    shards: BTreeMap<(u32, u32), SummaryStore>,
    events: u64,
}

impl ShardedStore {
    fn new(r: u32) -> ShardedStore {
        ShardedStore {
            r,
            shards: BTreeMap::new(),
            events: 0,
        }
    }

    fn record(&mut self, e: &summary::TransitionEvent) {
        self.events += 1;
        let r = self.r;
        // Each event touches exactly two summaries; route each half to the
        // shard owning the affected summary tile.
        self.shards
            .entry(block_key(e.dst))
            .or_insert_with(|| SummaryStore::new(r))
            .add_emission(e);
        self.shards
            .entry(block_key(e.src))
            .or_insert_with(|| SummaryStore::new(r))
            .add_absorption(e);
    }
}

/// Stage-1 job configuration; every field is echoed into the manifest.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub traj_dump: PathBuf,
    pub out: PathBuf,
    /// Observation window override; derived from the data when absent.
    pub window: Option<(i64, i64)>,
    pub params: summary::EventParams,
    pub scheme: summary::NormScheme,
    pub workers: usize,
}

impl JobConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.workers < 1 {
            return Err(Error::Parameter("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Counters reported by a stage-1 run.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Stats {
    pub paths: usize,
    pub events: u64,
    pub tiles: usize,
    pub wall: Duration,
}

/// Accumulates all paths into a finalized archive using `workers` threads.
///
/// The partitioning assigns path `i` to worker `i % workers`. Partial
/// stores merge in worker order, but integer accumulators make the result
/// independent of that order.
pub fn summarize_paths(
    paths: &[TilePath],
    params: &SummaryParams,
    workers: usize,
) -> SummaryArchive {
    let workers = workers.max(1);
    let mut parts: Vec<ShardedStore> = if workers == 1 || paths.len() <= 1 {
        vec![accumulate_partition(paths.iter(), 0, 1, &params.event)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let ev = params.event;
                    scope.spawn(move || accumulate_partition(paths.iter(), w, workers, &ev))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };

    // Merge shard-by-shard in block-key order, then flatten. Tiles never
    // span blocks, so flattening is collision-free.
    let mut events = 0u64;
    let mut merged: BTreeMap<(u32, u32), SummaryStore> = BTreeMap::new();
    for part in parts.drain(..) {
        events += part.events;
        for (key, store) in part.shards {
            match merged.entry(key) {
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(store);
                }
                std::collections::btree_map::Entry::Occupied(mut slot) => {
                    slot.get_mut().merge(store);
                }
            }
        }
    }
    let mut flat = SummaryStore::new(params.event.r);
    for (_, store) in merged {
        flat.merge(store);
    }
    flat.finalize(params, events)
}

fn accumulate_partition<'a>(
    paths: impl Iterator<Item = &'a TilePath>,
    worker: usize,
    stride: usize,
    params: &summary::EventParams,
) -> ShardedStore {
    let mut store = ShardedStore::new(params.r);
    let mut scratch = Vec::new();
    for (i, path) in paths.enumerate() {
        if i % stride != worker {
            continue;
        }
        scratch.clear();
        summary::extract_events_into(path, i as u64, params, &mut scratch);
        for e in &scratch {
            store.record(e);
        }
    }
    store
}

/// Runs stage 1 end to end: load the trajectory dump, accumulate in
/// parallel, finalize, and atomically write the archive.
pub fn run_stage1(cfg: &JobConfig) -> Result<(SummaryArchive, Stage1Stats)> {
    cfg.validate()?;
    let file = std::fs::File::open(&cfg.traj_dump)?;
    let paths = trajectory::read_dump(BufReader::new(file))?;
    run_stage1_on(&paths, cfg)
}

/// As [`run_stage1`] but over already-loaded paths, so benchmarks can
/// exclude parse time.
pub fn run_stage1_on(paths: &[TilePath], cfg: &JobConfig) -> Result<(SummaryArchive, Stage1Stats)> {
    cfg.validate()?;
    let params = resolve_params(paths, cfg.window, cfg.params, cfg.scheme);
    if cfg.out.exists() {
        check_resume_params(&cfg.out, &params)?;
    }
    let start = Instant::now();
    let archive = summarize_paths(paths, &params, cfg.workers);
    let wall = start.elapsed();
    archive.write_file(&cfg.out)?;
    let stats = Stage1Stats {
        paths: paths.len(),
        events: archive.event_count,
        tiles: archive.tiles.len(),
        wall,
    };
    Ok((archive, stats))
}

/// Full archive parameters for a run: the explicit window when given,
/// otherwise the span of the data.
pub fn resolve_params(
    paths: &[TilePath],
    window: Option<(i64, i64)>,
    event: summary::EventParams,
    scheme: summary::NormScheme,
) -> SummaryParams {
    let (t0, delta_t) = window.unwrap_or_else(|| derive_window(paths));
    SummaryParams {
        event,
        t0,
        delta_t,
        scheme,
    }
}

/// Observation window derived from the data: `[min_ts, max_ts + 1)`.
fn derive_window(paths: &[TilePath]) -> (i64, i64) {
    let mut min = i64::MAX;
    let mut max = i64::MIN;
    for p in paths {
        for v in &p.visits {
            min = min.min(v.timestamp);
            max = max.max(v.timestamp);
        }
    }
    if min > max {
        (0, 0)
    } else {
        (min, max - min + 1)
    }
}

/// Rerunning into an existing archive requires identical parameters.
fn check_resume_params(out: &std::path::Path, params: &SummaryParams) -> Result<()> {
    let existing = match SummaryArchive::read_file(out) {
        Ok(a) => a,
        // Unreadable leftover; it will be replaced atomically.
        Err(_) => return Ok(()),
    };
    if existing.params != *params {
        return Err(Error::ArtifactMismatch {
            field: "summary parameters",
            expected: format!("{params:?}"),
            actual: format!("{:?}", existing.params),
        });
    }
    Ok(())
}

/// One row of the strong-scaling report.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    pub workers: usize,
    pub wall_s: f64,
    pub speedup: f64,
    pub efficiency: f64,
    pub events_per_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Hash of the (identical) archive produced at every worker count.
    pub archive_sha256: String,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("workers,wall_s,speedup,efficiency,events_per_s\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{:.4},{:.4},{:.1}\n",
                r.workers, r.wall_s, r.speedup, r.efficiency, r.events_per_s
            ));
        }
        s
    }
}

/// Strong-scaling measurement: run the identical workload once per worker
/// count, timing only the accumulate/finalize stage, and hard-fail if any
/// run's archive differs from the single-worker one.
pub fn bench_strong_scaling(
    paths: &[TilePath],
    params: &SummaryParams,
    worker_counts: &[usize],
) -> Result<ScalingReport> {
    if !worker_counts.contains(&1) {
        return Err(Error::Parameter(
            "worker_counts must include 1 (speedup baseline)".into(),
        ));
    }
    let mut report = ScalingReport::default();
    let mut baseline_wall = 0.0f64;
    for &wc in worker_counts {
        if wc < 1 {
            return Err(Error::Parameter("worker counts must be >= 1".into()));
        }
        let start = Instant::now();
        let archive = summarize_paths(paths, params, wc);
        let wall = start.elapsed().as_secs_f64();

        let mut hw = HashWriter::new();
        archive.write_to(&mut hw)?;
        let (digest, _) = hw.finish();
        if report.archive_sha256.is_empty() {
            report.archive_sha256 = digest;
        } else if digest != report.archive_sha256 {
            return Err(Error::Determinism(format!(
                "archive at {wc} workers differs from baseline: {digest} != {}",
                report.archive_sha256
            )));
        }
        if wc == 1 {
            baseline_wall = wall;
        }
        let speedup = if wc == 1 { 1.0 } else { baseline_wall / wall };
        report.rows.push(ScalingRow {
            workers: wc,
            wall_s: wall,
            speedup,
            efficiency: speedup / wc as f64,
            events_per_s: archive.event_count as f64 / wall,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::{EventParams, NormScheme};
    use crate::trajectory::TileVisit;

    fn walk(id: &str, seed: u64, steps: usize) -> TilePath {
        // Small deterministic lattice walk.
        let mut x = 5000 + (seed % 40) as u32;
        let mut y = 5000 + (seed / 40 % 40) as u32;
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut visits = Vec::with_capacity(steps);
        let mut cum = 0u64;
        for i in 0..steps {
            visits.push(TileVisit {
                tile: TileId::new(x, y),
                timestamp: i as i64 * 5,
                cum_mm: cum,
            });
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            match (state >> 33) % 4 {
                0 => x += 1,
                1 => x = x.saturating_sub(1).max(1),
                2 => y += 1,
                _ => y = y.saturating_sub(1).max(1),
            }
            cum += 2400;
        }
        let mut dedup: Vec<TileVisit> = Vec::new();
        for v in visits {
            if dedup.last().map(|l| l.tile) != Some(v.tile) {
                dedup.push(v);
            }
        }
        TilePath {
            id: id.to_string(),
            visits: dedup,
        }
    }

    fn fixture_paths(n: usize) -> Vec<TilePath> {
        (0..n).map(|i| walk(&format!("m{i:03}#0000"), i as u64, 120)).collect()
    }

    fn params() -> SummaryParams {
        SummaryParams {
            event: EventParams {
                r: 4,
                tau_s: 120,
                h_max: 4,
            },
            t0: 0,
            delta_t: 600,
            scheme: NormScheme::GlobalMax,
        }
    }

    #[test]
    fn worker_count_does_not_change_archive() {
        let paths = fixture_paths(17);
        let p = params();
        let base = summarize_paths(&paths, &p, 1);
        for wc in [2, 3, 4, 8] {
            let other = summarize_paths(&paths, &p, wc);
            assert_eq!(other, base, "archive differs at {wc} workers");
        }
        assert!(base.event_count > 0);
    }

    #[test]
    fn sharded_accumulation_matches_plain_store() {
        let paths = fixture_paths(5);
        let p = params();
        let parallel = summarize_paths(&paths, &p, 4);
        let mut events = Vec::new();
        for (i, path) in paths.iter().enumerate() {
            events.extend(summary::extract_events(path, i as u64, &p.event));
        }
        let n = events.len() as u64;
        let plain = summary::accumulate(events, p.event.r).finalize(&p, n);
        assert_eq!(parallel, plain);
    }

    #[test]
    fn empty_input_produces_empty_archive() {
        let p = params();
        let archive = summarize_paths(&[], &p, 4);
        assert_eq!(archive.tiles.len(), 0);
        assert_eq!(archive.event_count, 0);
        let mut buf = Vec::new();
        archive.write_to(&mut buf).unwrap();
        assert!(!buf.is_empty());
    }

    #[test]
    fn bench_requires_baseline_and_verifies_outputs() {
        let paths = fixture_paths(8);
        let p = params();
        assert!(bench_strong_scaling(&paths, &p, &[2, 4]).is_err());
        let report = bench_strong_scaling(&paths, &p, &[1, 2]).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].speedup, 1.0);
        assert_eq!(report.rows[0].efficiency, 1.0);
        assert!(!report.archive_sha256.is_empty());
        let csv = report.to_csv();
        assert!(csv.starts_with("workers,wall_s,speedup,efficiency,events_per_s\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn rerun_with_same_config_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("traj.tsv");
        let paths = fixture_paths(6);
        let mut buf = Vec::new();
        trajectory::write_dump(&mut buf, &paths).unwrap();
        std::fs::write(&dump, &buf).unwrap();

        let cfg = JobConfig {
            traj_dump: dump,
            out: dir.path().join("out.rsum"),
            window: Some((0, 600)),
            params: params().event,
            scheme: NormScheme::GlobalMax,
            workers: 2,
        };
        run_stage1(&cfg).unwrap();
        let first = std::fs::read(&cfg.out).unwrap();
        run_stage1(&cfg).unwrap();
        let second = std::fs::read(&cfg.out).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn resume_with_different_params_errors() {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("traj.tsv");
        let paths = fixture_paths(3);
        let mut buf = Vec::new();
        trajectory::write_dump(&mut buf, &paths).unwrap();
        std::fs::write(&dump, &buf).unwrap();

        let mut cfg = JobConfig {
            traj_dump: dump,
            out: dir.path().join("out.rsum"),
            window: Some((0, 600)),
            params: params().event,
            scheme: NormScheme::GlobalMax,
            workers: 1,
        };
        run_stage1(&cfg).unwrap();
        cfg.params.r = 6;
        match run_stage1(&cfg) {
            Err(Error::ArtifactMismatch { field, .. }) => {
                assert_eq!(field, "summary parameters");
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn failed_write_leaves_no_partial_archive() {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("traj.tsv");
        let paths = fixture_paths(3);
        let mut buf = Vec::new();
        trajectory::write_dump(&mut buf, &paths).unwrap();
        std::fs::write(&dump, &buf).unwrap();

        // Output parent does not exist: the job must fail without leaving
        // anything at (or near) the final path.
        let out = dir.path().join("missing").join("out.rsum");
        let cfg = JobConfig {
            traj_dump: dump,
            out: out.clone(),
            window: Some((0, 600)),
            params: params().event,
            scheme: NormScheme::GlobalMax,
            workers: 2,
        };
        assert!(run_stage1(&cfg).is_err());
        assert!(!out.exists());
        // No stray temp files in the working directory either.
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().map_or(false, |x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn derive_window_covers_span() {
        let paths = fixture_paths(2);
        let cfg = JobConfig {
            traj_dump: PathBuf::new(),
            out: PathBuf::new(),
            window: None,
            params: params().event,
            scheme: NormScheme::GlobalMax,
            workers: 1,
        };
        let _ = cfg;
        let (t0, dt) = derive_window(&paths);
        assert_eq!(t0, 0);
        assert!(dt > 0);
        assert_eq!(derive_window(&[]), (0, 0));
    }
}
