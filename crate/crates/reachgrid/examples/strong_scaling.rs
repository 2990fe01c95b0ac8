//! Strong-scaling harness: time the summarize stage at several worker
//! counts on one fixed workload and verify the archives stay identical.
//!
//!     cargo run --release --example strong_scaling
//!
//! Efficiency only climbs on hosts with enough physical cores; the
//! determinism verification is meaningful everywhere.

use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::pipeline::{bench_strong_scaling, resolve_params};
use reachgrid::summary::{EventParams, NormScheme};
use reachgrid::trajectory::{self, ParseCounters};
use std::io::BufReader;

fn main() -> reachgrid::Result<()> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("host reports {cores} available core(s)");

    let dir = tempfile::tempdir()?;
    let (files, total) = write_tdrive_dir(
        dir.path(),
        &SynthConfig {
            taxis: 12,
            records_per_taxi: 8_000,
            ..Default::default()
        },
    )?;
    println!("workload: {total} records");

    // Parse once; the benchmark times only the summarize stage.
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

    let params = resolve_params(
        &paths,
        None,
        EventParams {
            r: 8,
            tau_s: 600,
            h_max: 8,
        },
        NormScheme::GlobalMax,
    );
    let report = bench_strong_scaling(&paths, &params, &[1, 2, 4])?;
    print!("{}", report.to_csv());
    println!(
        "archives identical at every worker count (sha256 {}...)",
        &report.archive_sha256[..16]
    );
    Ok(())
}
