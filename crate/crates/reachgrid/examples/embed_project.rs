//! From summaries to deliverables: embed every tile, rasterize the
//! embeddings into a dense region tensor, export/import it bit-exactly
//! and project the embedding cloud to 2-D for inspection.
//!
//!     cargo run --release --example embed_project

use reachgrid::cae::{embed, train, CaeConfig};
use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::pipeline::{run_stage1, JobConfig};
use reachgrid::store;
use reachgrid::summary::{EventParams, NormScheme};
use reachgrid::trajectory::{self, ParseCounters};
use std::io::BufReader;

fn main() -> reachgrid::Result<()> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("raw");
    write_tdrive_dir(
        &raw,
        &SynthConfig {
            taxis: 5,
            records_per_taxi: 1_200,
            city_span_tiles: 384,
            road_spacing_tiles: 16,
            ..Default::default()
        },
    )?;

    // raw -> dump -> archive
    let mut files: Vec<_> = std::fs::read_dir(&raw)?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    files.sort();
    let mut counters = ParseCounters::default();
    let mut records = Vec::new();
    for f in &files {
        records.extend(trajectory::parse_tdrive_file(
            BufReader::new(std::fs::File::open(f)?),
            &mut counters,
        )?);
    }
    records.sort_by(|a, b| {
        (a.mover_id.as_str(), a.timestamp).cmp(&(b.mover_id.as_str(), b.timestamp))
    });
    let mut paths: Vec<_> = trajectory::segment(&records, 300, 2_000)
        .iter()
        .map(trajectory::to_tile_path)
        .collect();
    paths.sort_by(|a, b| a.id.cmp(&b.id));
    let dump = dir.path().join("traj.tsv");
    let mut buf = Vec::new();
    trajectory::write_dump(&mut buf, &paths)?;
    std::fs::write(&dump, buf)?;
    let (archive, _) = run_stage1(&JobConfig {
        traj_dump: dump,
        out: dir.path().join("summaries.rsum"),
        window: None,
        params: EventParams {
            r: 4,
            tau_s: 600,
            h_max: 8,
        },
        scheme: NormScheme::GlobalMax,
        workers: 2,
    })?;

    // Train briefly, embed everything.
    let mut cfg = CaeConfig::for_archive(8, &archive);
    cfg.channels = [8, 12, 16];
    cfg.epochs = 8;
    cfg.learning_rate = 3e-3;
    let (model, _) = train(&archive, &cfg)?;
    let embeddings = embed(&model, &archive)?;
    println!(
        "embedded {} tiles into {}-dimensional vectors",
        embeddings.len(),
        cfg.d_r
    );

    // Rasterize over the covering bounding box.
    let bbox = store::TileRect::covering(&embeddings)?;
    let manifest = store::RasterManifest {
        d_r: cfg.d_r,
        r: archive.r(),
        t0: archive.params.t0,
        delta_t: archive.params.delta_t,
        model_hash: "in-memory".into(),
        norm_maxima: archive.maxima.per_channel,
    };
    let (raster, skipped) = store::rasterize(&embeddings, bbox, manifest)?;
    println!(
        "raster: {}x{}x{} ({} embeddings outside bbox)",
        raster.width, raster.height, raster.d, skipped
    );

    let raster_path = dir.path().join("region.eras");
    store::export_raster_file(&raster, &raster_path)?;
    let back = store::import_raster_file(&raster_path)?;
    assert_eq!(back, raster);
    println!(
        "ERAS1 file {} bytes; import == export",
        std::fs::metadata(&raster_path)?.len()
    );

    // 2-D projection of the embedding cloud.
    let projection = store::project_2d(&embeddings)?;
    println!(
        "\nPCA projection: eigenvalues {:.3e}, {:.3e}",
        projection.eigenvalues.0, projection.eigenvalues.1
    );
    for (qk, p1, p2) in projection.rows.iter().take(5) {
        println!("  {qk} -> ({p1:+.4}, {p2:+.4})");
    }
    println!("  ... ({} rows total)", projection.rows.len());
    Ok(())
}
