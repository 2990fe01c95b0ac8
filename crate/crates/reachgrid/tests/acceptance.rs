//! Acceptance suite: one test per criterion, each ending in a printed
//! `ACCEPTANCE n (...): PASS` line. Every tolerance is pinned here.
//!
//! Run with `cargo test -p reachgrid --test acceptance -- --nocapture`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachgrid::cae::{self, CaeConfig};
use reachgrid::esg::{transition_matrix, Esg};
use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::pipeline::{self, JobConfig};
use reachgrid::store;
use reachgrid::summary::{self, EventParams, NormScheme, SummaryArchive};
use reachgrid::tilegrid::{self, TileId};
use reachgrid::trajectory::{self, TilePath, TileVisit};
use std::collections::HashMap;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

// -------------------------------------------------------------------
// shared fixture plumbing
// -------------------------------------------------------------------

/// Full ingest of a directory of T-Drive files: parse, sort, segment,
/// collapse to tile paths sorted by id.
fn ingest_dir(dir: &Path) -> Vec<TilePath> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut counters = trajectory::ParseCounters::default();
    let mut records = Vec::new();
    for f in &files {
        let reader = BufReader::new(std::fs::File::open(f).unwrap());
        records.extend(trajectory::parse_tdrive_file(reader, &mut counters).unwrap());
    }
    assert_eq!(counters.parsed + counters.skipped, counters.lines);
    records.sort_by(|a, b| {
        (a.mover_id.as_str(), a.timestamp).cmp(&(b.mover_id.as_str(), b.timestamp))
    });
    let mut paths: Vec<TilePath> = trajectory::segment(&records, 300, 2_000)
        .iter()
        .map(trajectory::to_tile_path)
        .collect();
    paths.sort_by(|a, b| a.id.cmp(&b.id));
    paths
}

fn event_params(r: u32, tau_s: i64, h_max: u32) -> EventParams {
    EventParams { r, tau_s, h_max }
}

// -------------------------------------------------------------------
// 1. determinism across worker counts
// -------------------------------------------------------------------

#[test]
fn acceptance_01_worker_count_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let (_, total) = write_tdrive_dir(
        &raw,
        &SynthConfig {
            taxis: 20,
            records_per_taxi: 5_000,
            city_span_tiles: 512,
            road_spacing_tiles: 16,
            seed: 21,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(total, 100_000, "fixture must hold 1e5 records");
    let paths = ingest_dir(&raw);
    let dump = dir.path().join("traj.tsv");
    let mut buf = Vec::new();
    trajectory::write_dump(&mut buf, &paths).unwrap();
    std::fs::write(&dump, buf).unwrap();

    let mut archives: Vec<Vec<u8>> = Vec::new();
    for workers in [1usize, 2, 4, 8] {
        let out = dir.path().join(format!("out_{workers}.rsum"));
        let cfg = JobConfig {
            traj_dump: dump.clone(),
            out: out.clone(),
            window: None,
            params: event_params(12, 600, 16),
            scheme: NormScheme::GlobalMax,
            workers,
        };
        pipeline::run_stage1(&cfg).unwrap();
        archives.push(std::fs::read(&out).unwrap());
        std::fs::remove_file(&out).unwrap();
    }
    for (i, a) in archives.iter().enumerate().skip(1) {
        assert_eq!(
            a, &archives[0],
            "archive at worker count {} differs from single-worker output",
            [1, 2, 4, 8][i]
        );
    }

    // The bench command performs the same verification and must hard-fail
    // on any mismatch; here it must succeed.
    let params = pipeline::resolve_params(
        &paths,
        None,
        event_params(12, 600, 16),
        NormScheme::GlobalMax,
    );
    let report = pipeline::bench_strong_scaling(&paths, &params, &[1, 2, 4, 8]).unwrap();
    assert_eq!(report.rows.len(), 4);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "criterion requires < 2 min, took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 1 (byte-identical archives at workers 1/2/4/8 on 1e5 records, {:.1}s): PASS",
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------------
// 2. brute-force oracle equivalence
// -------------------------------------------------------------------

#[derive(Default, Clone, Copy, PartialEq, Eq, Debug)]
struct OracleCell {
    em_count: u64,
    em_mm: u64,
    em_s: u64,
    ab_count: u64,
    ab_mm: u64,
    ab_s: u64,
}

/// Naive O(n^2)-per-trajectory accumulation straight from the
/// definitions; shares no code with the implementation path.
fn oracle_accumulate(
    paths: &[TilePath],
    r: u32,
    tau_s: i64,
    h_max: usize,
) -> (HashMap<(TileId, i32, i32), OracleCell>, u64) {
    let mut map: HashMap<(TileId, i32, i32), OracleCell> = HashMap::new();
    let mut events = 0u64;
    for p in paths {
        let v = &p.visits;
        for i in 0..v.len() {
            for j in (i + 1)..v.len().min(i + 1 + h_max) {
                let dt = v[j].timestamp - v[i].timestamp;
                if dt > tau_s || v[i].tile == v[j].tile {
                    continue;
                }
                let dx = i64::from(v[j].tile.x) - i64::from(v[i].tile.x);
                let dy = i64::from(v[j].tile.y) - i64::from(v[i].tile.y);
                if dx.abs().max(dy.abs()) > i64::from(r) {
                    continue;
                }
                let mm = v[j].cum_mm - v[i].cum_mm;
                events += 1;
                let em = map.entry((v[j].tile, -dx as i32, -dy as i32)).or_default();
                em.em_count += 1;
                em.em_mm += mm;
                em.em_s += dt as u64;
                let ab = map.entry((v[i].tile, dx as i32, dy as i32)).or_default();
                ab.ab_count += 1;
                ab.ab_mm += mm;
                ab.ab_s += dt as u64;
            }
        }
    }
    (map, events)
}

fn random_paths(rng: &mut ChaCha8Rng) -> Vec<TilePath> {
    let n_traj = rng.gen_range(1..=10);
    (0..n_traj)
        .map(|t| {
            let mut x = rng.gen_range(1_000..1_020);
            let mut y = rng.gen_range(1_000..1_020);
            let len = rng.gen_range(2..=30);
            let mut ts = rng.gen_range(0..100i64);
            let mut cum = 0u64;
            let mut visits: Vec<TileVisit> = Vec::new();
            for _ in 0..len {
                if visits.last().map(|l| l.tile) != Some(TileId::new(x, y)) {
                    visits.push(TileVisit {
                        tile: TileId::new(x, y),
                        timestamp: ts,
                        cum_mm: cum,
                    });
                }
                ts += rng.gen_range(1..=10);
                cum += rng.gen_range(0..5_000);
                // steps may exceed the neighborhood radius
                x = (x as i64 + rng.gen_range(-2..=2)).clamp(1_000, 1_019) as u32;
                y = (y as i64 + rng.gen_range(-2..=2)).clamp(1_000, 1_019) as u32;
            }
            TilePath {
                id: format!("t{t:02}#0000"),
                visits,
            }
        })
        .collect()
}

#[test]
fn acceptance_02_brute_force_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2_024);
    let cases = 250;
    for case in 0..cases {
        let paths = random_paths(&mut rng);
        let r = rng.gen_range(1..=4u32);
        let h_max = rng.gen_range(1..=3u32);
        let tau_s = rng.gen_range(5..=60i64);
        let (oracle, oracle_events) = oracle_accumulate(&paths, r, tau_s, h_max as usize);

        // Implementation route: event extraction + accumulation.
        let mut events = Vec::new();
        for (i, p) in paths.iter().enumerate() {
            events.extend(summary::extract_events(
                p,
                i as u64,
                &event_params(r, tau_s, h_max),
            ));
        }
        assert_eq!(events.len() as u64, oracle_events, "case {case}: event count");
        let store = summary::accumulate(events, r);
        let (em_total, ab_total) = store.totals();
        assert_eq!(em_total, oracle_events, "case {case}: emission conservation");
        assert_eq!(ab_total, oracle_events, "case {case}: absorption conservation");

        let side = 2 * r + 1;
        let mut impl_cells = 0usize;
        for tile in store.tiles().collect::<Vec<_>>() {
            for (idx, cell) in store.raw_tile(tile).unwrap() {
                let dy = (idx / side) as i32 - r as i32;
                let dx = (idx % side) as i32 - r as i32;
                let o = oracle
                    .get(&(tile, dx, dy))
                    .copied()
                    .unwrap_or_default();
                assert_eq!(
                    (cell.emission_count, cell.emission_path_mm, cell.emission_elapsed_s),
                    (o.em_count, o.em_mm, o.em_s),
                    "case {case}: emission accumulators at {tile} offset ({dx},{dy})"
                );
                assert_eq!(
                    (cell.absorption_count, cell.absorption_path_mm, cell.absorption_elapsed_s),
                    (o.ab_count, o.ab_mm, o.ab_s),
                    "case {case}: absorption accumulators at {tile} offset ({dx},{dy})"
                );
                // Finalized means agree with the oracle's own division.
                if o.em_count > 0 {
                    let impl_mean = cell.emission_path_mm as f64 / 1_000.0 / cell.emission_count as f64;
                    let oracle_mean = (o.em_mm as f64 / o.em_count as f64) / 1_000.0;
                    assert!((impl_mean - oracle_mean).abs() <= 1e-9);
                }
                if o.ab_count > 0 {
                    let impl_mean = cell.absorption_elapsed_s as f64 / cell.absorption_count as f64;
                    let oracle_mean = o.ab_s as f64 / o.ab_count as f64;
                    assert!((impl_mean - oracle_mean).abs() <= 1e-9);
                }
                impl_cells += 1;
            }
        }
        assert_eq!(impl_cells, oracle.len(), "case {case}: sparse cell sets differ");
    }
    println!("ACCEPTANCE 2 (exact oracle equivalence on {cases} random fixtures): PASS");
}

// -------------------------------------------------------------------
// 3. conservation
// -------------------------------------------------------------------

#[test]
fn acceptance_03_conservation() {
    // Random fixtures.
    let mut rng = ChaCha8Rng::seed_from_u64(3_000);
    for _ in 0..50 {
        let paths = random_paths(&mut rng);
        let params = pipeline::resolve_params(
            &paths,
            None,
            event_params(4, 60, 3),
            NormScheme::GlobalMax,
        );
        let archive = pipeline::summarize_paths(&paths, &params, 2);
        assert_eq!(archive.emission_total, archive.event_count);
        assert_eq!(archive.absorption_total, archive.event_count);
    }

    // A larger trajectory fixture through the full pipeline.
    let dir = tempfile::tempdir().unwrap();
    write_tdrive_dir(
        dir.path(),
        &SynthConfig {
            taxis: 10,
            records_per_taxi: 3_000,
            seed: 33,
            ..Default::default()
        },
    )
    .unwrap();
    let paths = ingest_dir(dir.path());
    let params =
        pipeline::resolve_params(&paths, None, event_params(12, 600, 16), NormScheme::GlobalMax);
    let archive = pipeline::summarize_paths(&paths, &params, 4);
    assert!(archive.event_count > 0);
    assert_eq!(archive.emission_total, archive.event_count);
    assert_eq!(archive.absorption_total, archive.event_count);
    println!(
        "ACCEPTANCE 3 (emission = absorption = events = {} on every fixture): PASS",
        archive.event_count
    );
}

// -------------------------------------------------------------------
// 4. Chapman-Kolmogorov property
// -------------------------------------------------------------------

fn random_esg(rng: &mut ChaCha8Rng) -> Esg {
    let n = rng.gen_range(2..=20u32);
    let mut g = Esg::new();
    for u in 0..n {
        for _ in 0..rng.gen_range(0..=3) {
            let v = rng.gen_range(0..n);
            g.insert_edge(TileId::new(u, 0), TileId::new(v, 0), rng.gen_range(1..100));
        }
    }
    if g.node_count() == 0 {
        g.insert_edge(TileId::new(0, 0), TileId::new(1, 0), 1);
    }
    g
}

#[test]
fn acceptance_04_chapman_kolmogorov() {
    let mut rng = ChaCha8Rng::seed_from_u64(4_000);
    let graphs = 100;
    for case in 0..graphs {
        let g = random_esg(&mut rng);
        let view = transition_matrix(&g).unwrap();

        // P^(m+n) == P^m P^n within 1e-10 for all m, n <= 4.
        for m in 1..=4u32 {
            for n in 1..=4u32 {
                let lhs = view.n_step(m + n).unwrap();
                let rhs = view
                    .n_step(m)
                    .unwrap()
                    .multiply(&view.n_step(n).unwrap(), usize::MAX)
                    .unwrap();
                let diff = reachgrid::esg::SparseMatrix::max_abs_diff(&lhs, &rhs);
                assert!(diff <= 1e-10, "case {case}: m={m} n={n} diff={diff}");
            }
        }

        // P^2 against exhaustive two-path enumeration.
        let p = view.matrix();
        let p2 = view.n_step(2).unwrap();
        let n = view.n();
        for u in 0..n {
            for v in 0..n {
                let mut expect = 0.0f64;
                for w in 0..n {
                    expect += p.get(u, w) * p.get(w, v);
                }
                assert!(
                    (p2.get(u, v) - expect).abs() <= 1e-12,
                    "case {case}: P2[{u}][{v}]"
                );
            }
        }
    }
    println!("ACCEPTANCE 4 (CKE on {graphs} random graphs, m,n <= 4): PASS");
}

// -------------------------------------------------------------------
// 5. tile math roundtrips
// -------------------------------------------------------------------

#[test]
fn acceptance_05_tile_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(5_000);
    let n = 100_000;
    for _ in 0..n {
        let t = TileId::new(
            rng.gen_range(0..tilegrid::GRID_SIZE),
            rng.gen_range(0..tilegrid::GRID_SIZE),
        );
        let (lat, lon) = t.center_latlon();
        assert_eq!(tilegrid::latlon_to_tile(lat, lon).unwrap(), t);
        let qk = tilegrid::tile_to_quadkey(t);
        assert_eq!(tilegrid::quadkey_to_tile(&qk).unwrap(), t);
    }
    println!("ACCEPTANCE 5 (lat/lon and quadkey roundtrips exact over {n} random tiles): PASS");
}

// -------------------------------------------------------------------
// 6. autoencoder gradients
// -------------------------------------------------------------------

fn toy_cfg() -> CaeConfig {
    let mut cfg = CaeConfig::new(3, 5);
    cfg.in_channels = 2;
    cfg.channels = [3, 4, 5];
    cfg.seed = 123; // generic point: no rectifier kink within the FD step
    cfg
}

fn toy_input(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(123 ^ 0xF00D);
    (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()
}

#[test]
fn acceptance_06_gradient_check() {
    let cfg = toy_cfg();
    let x = toy_input(2 * 5 * 5);
    let full = cae::gradient_check(&cfg, &x, 1e-5).unwrap();
    assert!(full < 1e-4, "full objective: max relative error {full}");

    let mut linear = toy_cfg();
    linear.activation = cae::Activation::Identity;
    linear.lambda_c = 0.0;
    let lin = cae::gradient_check(&linear, &x, 1e-5).unwrap();
    assert!(lin < 1e-7, "linear case: max relative error {lin}");
    println!(
        "ACCEPTANCE 6 (gradients: full {full:.2e} < 1e-4, linear {lin:.2e} < 1e-7): PASS"
    );
}

// -------------------------------------------------------------------
// 7. contractive effect
// -------------------------------------------------------------------

/// 500-summary corpus built from lattice-walk trajectories at r = 4.
fn corpus_500() -> SummaryArchive {
    let dir = tempfile::tempdir().unwrap();
    write_tdrive_dir(
        dir.path(),
        &SynthConfig {
            taxis: 6,
            records_per_taxi: 1_500,
            city_span_tiles: 384,
            road_spacing_tiles: 16,
            seed: 77,
            ..Default::default()
        },
    )
    .unwrap();
    let paths = ingest_dir(dir.path());
    let params =
        pipeline::resolve_params(&paths, None, event_params(4, 600, 8), NormScheme::GlobalMax);
    let mut archive = pipeline::summarize_paths(&paths, &params, 2);
    assert!(
        archive.tiles.len() >= 500,
        "fixture too sparse: {} tiles",
        archive.tiles.len()
    );
    archive.tiles.truncate(500);
    archive
}

#[test]
fn acceptance_07_contractive_effect() {
    let start = Instant::now();
    let archive = corpus_500();
    let mut cfg = CaeConfig::for_archive(8, &archive);
    cfg.epochs = 50;
    cfg.seed = 42;
    cfg.lambda_c = 0.1;
    let (contractive_model, log_c) = cae::train(&archive, &cfg).unwrap();
    cfg.lambda_c = 0.0;
    let (plain_model, log_p) = cae::train(&archive, &cfg).unwrap();
    assert!(log_c.epochs.last().unwrap().total.is_finite());
    assert!(log_p.epochs.iter().all(|e| e.contractive == 0.0));

    // Held-out inputs: the fixed 10% validation split.
    let (_, val) = cae::split_by_quadkey(&archive);
    assert!(!val.is_empty(), "validation split empty");
    let side = archive.side();
    let held_out: Vec<Vec<f64>> = val
        .iter()
        .map(|&i| {
            archive.tiles[i]
                .to_dense(archive.r())
                .iter()
                .map(|&v| f64::from(v))
                .collect()
        })
        .collect();
    let _ = side;
    let jac_c = cae::jacobian_norm_estimate(&contractive_model, &held_out, 4, 7_001);
    let jac_p = cae::jacobian_norm_estimate(&plain_model, &held_out, 4, 7_001);
    let elapsed = start.elapsed();
    assert!(
        jac_c < jac_p,
        "contractive model must have strictly smaller Jacobian estimate: {jac_c} vs {jac_p}"
    );
    assert!(
        elapsed.as_secs_f64() < 600.0,
        "criterion requires < 10 min, took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 7 (Jacobian estimate {jac_c:.3e} [lambda=0.1] < {jac_p:.3e} [lambda=0] \
         on {} held-out summaries, {:.0}s): PASS",
        held_out.len(),
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------------
// 8. strong scaling at desk scale
// -------------------------------------------------------------------

#[test]
fn acceptance_08_strong_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let (_, total) = write_tdrive_dir(
        &raw,
        &SynthConfig {
            taxis: 50,
            records_per_taxi: 21_000,
            city_span_tiles: 512,
            road_spacing_tiles: 32,
            seed: 88,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(total >= 1_000_000, "fixture must hold >= 1e6 records");
    let paths = ingest_dir(&raw);

    let params =
        pipeline::resolve_params(&paths, None, event_params(12, 600, 16), NormScheme::GlobalMax);
    let report = pipeline::bench_strong_scaling(&paths, &params, &[1, 2, 4]).unwrap();

    // Identical outputs at all worker counts were verified inside the
    // bench (hard failure otherwise); the CSV report must be well-formed.
    let csv_path = dir.path().join("scaling.csv");
    std::fs::write(&csv_path, report.to_csv()).unwrap();
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("workers,wall_s,speedup,efficiency,events_per_s\n"));
    assert_eq!(csv.lines().count(), 4);
    println!("strong scaling on {total} records:\n{csv}");

    let eff4 = report
        .rows
        .iter()
        .find(|r| r.workers == 4)
        .expect("4-worker row")
        .efficiency;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    assert!(
        eff4 >= 0.5,
        "parallel efficiency at 4 workers is {eff4:.3}, criterion requires >= 0.5. \
         This host reports available_parallelism = {cores}; with fewer than 4 physical \
         cores a fixed-size workload cannot speed up and the criterion is unattainable \
         on this hardware. Outputs were byte-identical at every worker count and the \
         CSV report was emitted; on a >= 4-core desk machine this measurement is \
         expected to pass."
    );
    println!(
        "ACCEPTANCE 8 (strong scaling: efficiency {eff4:.3} at 4 workers on {total} records): PASS"
    );
}

// -------------------------------------------------------------------
// 9. embedding contract
// -------------------------------------------------------------------

#[test]
fn acceptance_09_embedding_contract() {
    let dir = tempfile::tempdir().unwrap();
    write_tdrive_dir(
        dir.path(),
        &SynthConfig {
            taxis: 3,
            records_per_taxi: 800,
            city_span_tiles: 256,
            road_spacing_tiles: 16,
            seed: 99,
            ..Default::default()
        },
    )
    .unwrap();
    let paths = ingest_dir(dir.path());
    let params =
        pipeline::resolve_params(&paths, None, event_params(4, 600, 8), NormScheme::GlobalMax);
    let mut archive = pipeline::summarize_paths(&paths, &params, 2);
    archive.tiles.truncate(200);

    for d_r in [8usize, 16] {
        let mut cfg = CaeConfig::for_archive(d_r, &archive);
        cfg.epochs = 3;
        let (model, _) = cae::train(&archive, &cfg).unwrap();

        // Identical summaries map to identical embeddings; the duplicate
        // center sits one row beyond every real tile so it cannot collide.
        let max_y = archive.tiles.iter().map(|t| t.center.y).max().unwrap();
        let dup_center = TileId::new(archive.tiles[0].center.x, max_y + 1);
        let mut dup = archive.clone();
        dup.tiles.push(reachgrid::summary::ReachabilitySummary {
            center: dup_center,
            pixels: dup.tiles[0].pixels.clone(),
        });
        let with_dup = cae::embed(&model, &dup).unwrap();
        assert!(with_dup.iter().all(|e| e.values.len() == d_r));
        let original = with_dup
            .iter()
            .find(|e| e.tile == archive.tiles[0].center)
            .unwrap();
        let copy = with_dup.iter().find(|e| e.tile == dup_center).unwrap();
        assert_eq!(original.values, copy.values);

        // Raster export/import is bit-exact.
        let embeddings = cae::embed(&model, &archive).unwrap();
        let bbox = store::TileRect::covering(&embeddings).unwrap();
        let manifest = store::RasterManifest {
            d_r,
            r: archive.r(),
            t0: archive.params.t0,
            delta_t: archive.params.delta_t,
            model_hash: "test".into(),
            norm_maxima: archive.maxima.per_channel,
        };
        let (raster, _) = store::rasterize(&embeddings, bbox, manifest).unwrap();
        let path = dir.path().join(format!("raster_{d_r}.eras"));
        store::export_raster_file(&raster, &path).unwrap();
        let back = store::import_raster_file(&path).unwrap();
        assert_eq!(back, raster);
        let bytes1 = std::fs::read(&path).unwrap();
        store::export_raster_file(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes1);
    }
    println!("ACCEPTANCE 9 (embedding determinism, d_R in {{8,16}}, bit-exact rasters): PASS");
}

// -------------------------------------------------------------------
// 10. end-to-end smoke through the CLI
// -------------------------------------------------------------------

#[test]
fn acceptance_10_end_to_end_smoke() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let (_, total) = write_tdrive_dir(
        &raw,
        &SynthConfig {
            taxis: 2,
            records_per_taxi: 500,
            city_span_tiles: 256,
            road_spacing_tiles: 16,
            seed: 10,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(total, 1_000);

    let bin = env!("CARGO_BIN_EXE_reachgrid");
    let dump = dir.path().join("traj.tsv");
    let rsum = dir.path().join("summaries.rsum");
    let model = dir.path().join("model.cae");
    let emb = dir.path().join("embeddings.emb");
    let eras = dir.path().join("region.eras");
    let proj = dir.path().join("projection.csv");

    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("spawn reachgrid");
        assert!(
            out.status.success(),
            "command {:?} failed:\nstdout: {}\nstderr: {}",
            args,
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    };

    run(&["ingest", "--input", raw.to_str().unwrap(), "--out", dump.to_str().unwrap()]);
    run(&[
        "summarize",
        "--traj",
        dump.to_str().unwrap(),
        "--out",
        rsum.to_str().unwrap(),
        "--r",
        "4",
        "--h-max",
        "8",
        "--workers",
        "2",
    ]);
    run(&[
        "train",
        "--archive",
        rsum.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--d-r",
        "8",
        "--epochs",
        "5",
    ]);
    run(&[
        "embed",
        "--model",
        model.to_str().unwrap(),
        "--archive",
        rsum.to_str().unwrap(),
        "--out",
        emb.to_str().unwrap(),
    ]);
    run(&[
        "export",
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        eras.to_str().unwrap(),
    ]);
    run(&[
        "project",
        "--embeddings",
        emb.to_str().unwrap(),
        "--out",
        proj.to_str().unwrap(),
    ]);

    // Every artifact exists, every run manifest exists and carries output
    // hashes that match the artifacts on disk.
    for artifact in [&dump, &rsum, &model, &emb, &eras, &proj] {
        assert!(artifact.exists(), "{} missing", artifact.display());
        let manifest_file = reachgrid::cli::manifest_path(artifact);
        assert!(
            manifest_file.exists(),
            "run manifest {} missing",
            manifest_file.display()
        );
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&manifest_file).unwrap()).unwrap();
        let outputs = json["outputs"].as_array().unwrap();
        assert!(!outputs.is_empty());
        let listed = outputs
            .iter()
            .find(|o| o["path"].as_str().unwrap() == artifact.to_str().unwrap())
            .unwrap_or_else(|| panic!("{} not listed in its manifest", artifact.display()));
        let expect = reachgrid::hash::sha256_file(artifact).unwrap();
        assert_eq!(listed["sha256"].as_str().unwrap(), expect);
        assert!(json["parameters"].as_object().is_some());
        assert!(json["stages"].as_array().is_some());
    }

    // The projection is a valid CSV with one row per embedded tile.
    let proj_text = std::fs::read_to_string(&proj).unwrap();
    assert!(proj_text.starts_with("quadkey,pc1,pc2\n"));
    assert!(proj_text.lines().count() > 1);

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "criterion requires < 5 min, took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 10 (ingest->summarize->train->embed->export->project on 1000 records, \
         manifests + hashes verified, {:.0}s): PASS",
        elapsed.as_secs_f64()
    );
}
