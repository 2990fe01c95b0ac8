//! Stage 1 end to end: trajectories to per-tile reachability summaries,
//! with the conservation identity and a look inside one tensor.
//!
//!     cargo run --release --example summarize_stage1

use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::pipeline::{run_stage1, JobConfig};
use reachgrid::summary::{EventParams, NormScheme, SummaryArchive, CHANNELS};
use reachgrid::trajectory::{self, ParseCounters};
use std::io::BufReader;

fn main() -> reachgrid::Result<()> {
    let dir = tempfile::tempdir()?;
    let (files, total) = write_tdrive_dir(
        dir.path(),
        &SynthConfig {
            taxis: 8,
            records_per_taxi: 3_000,
            ..Default::default()
        },
    )?;
    println!("fixture: {total} records");

    // Ingest.
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

    // Summarize with a 9x9 window, two workers.
    let out = dir.path().join("summaries.rsum");
    let cfg = JobConfig {
        traj_dump: dump,
        out: out.clone(),
        window: None,
        params: EventParams {
            r: 4,
            tau_s: 600,
            h_max: 8,
        },
        scheme: NormScheme::GlobalMax,
        workers: 2,
    };
    let (archive, stats) = run_stage1(&cfg)?;
    println!(
        "stage 1: {} paths -> {} events -> {} tile summaries in {:.2}s",
        stats.paths,
        stats.events,
        stats.tiles,
        stats.wall.as_secs_f64()
    );

    // Conservation: every event contributes one emission and one
    // absorption observation.
    println!(
        "conservation: events={} emission_total={} absorption_total={}",
        archive.event_count, archive.emission_total, archive.absorption_total
    );
    assert_eq!(archive.event_count, archive.emission_total);
    assert_eq!(archive.event_count, archive.absorption_total);

    // The archive roundtrips exactly.
    let back = SummaryArchive::read_file(&out)?;
    assert_eq!(back, archive);
    println!(
        "archive: {} bytes, reads back identically",
        std::fs::metadata(&out)?.len()
    );

    // Peek at the busiest tile's emission-count channel.
    let busiest = archive
        .tiles
        .iter()
        .max_by_key(|t| t.pixels.len())
        .expect("nonempty archive");
    let dense = busiest.to_dense(archive.r());
    let side = archive.side();
    println!(
        "\nbusiest tile {} ({} nonzero pixels); emission-count channel:",
        busiest.center,
        busiest.pixels.len()
    );
    for i in 0..side {
        let row: String = (0..side)
            .map(|j| {
                let v = dense[(i * side + j) * CHANNELS];
                if v == 0.0 {
                    " .".into()
                } else {
                    format!(" {:.0}", (v * 9.0).min(9.0))
                }
            })
            .collect();
        println!("  {row}");
    }
    println!("  (0-9 scale; center row/col is the tile itself, always zero)");
    Ok(())
}
