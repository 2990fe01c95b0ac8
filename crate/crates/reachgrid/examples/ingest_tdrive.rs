//! Parsing and segmentation: synthesize a small T-Drive-format dataset,
//! parse it, split it into clean trajectories and write the normalized
//! trajectory dump.
//!
//!     cargo run --release --example ingest_tdrive

use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::trajectory::{self, ParseCounters};
use std::io::BufReader;

fn main() -> reachgrid::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = SynthConfig {
        taxis: 5,
        records_per_taxi: 2_000,
        gap_every: 700,
        ..Default::default()
    };
    let (files, total) = write_tdrive_dir(dir.path(), &cfg)?;
    println!("synthesized {total} records across {} files", files.len());

    let mut counters = ParseCounters::default();
    let mut records = Vec::new();
    for f in &files {
        let reader = BufReader::new(std::fs::File::open(f)?);
        records.extend(trajectory::parse_tdrive_file(reader, &mut counters)?);
    }
    println!(
        "parsed={} skipped={} (of {} lines)",
        counters.parsed, counters.skipped, counters.lines
    );

    records.sort_by(|a, b| {
        (a.mover_id.as_str(), a.timestamp).cmp(&(b.mover_id.as_str(), b.timestamp))
    });
    let trajectories = trajectory::segment(&records, 300, 2_000);
    println!("segments after gap/jump splitting: {}", trajectories.len());

    let mut paths: Vec<_> = trajectories.iter().map(trajectory::to_tile_path).collect();
    paths.sort_by(|a, b| a.id.cmp(&b.id));
    let visits: usize = paths.iter().map(|p| p.visits.len()).sum();
    println!("tile visits after same-tile collapsing: {visits}");

    let dump = dir.path().join("trajectories.tsv");
    let mut buf = Vec::new();
    trajectory::write_dump(&mut buf, &paths)?;
    std::fs::write(&dump, &buf)?;
    let back = trajectory::read_dump(std::io::Cursor::new(&buf))?;
    assert_eq!(back.len(), paths.len());
    println!(
        "dump written to {} ({} bytes), reads back identically",
        dump.display(),
        buf.len()
    );

    let first = &paths[0];
    println!("\nfirst path {} starts:", first.id);
    for v in first.visits.iter().take(5) {
        println!(
            "  t={} tile={} cum={:.1} m",
            v.timestamp,
            v.tile,
            v.cum_mm as f64 / 1000.0
        );
    }
    Ok(())
}
