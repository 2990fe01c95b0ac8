//! Stage 2 training: fit the contractive autoencoder on a small summary
//! corpus and watch both loss terms fall.
//!
//!     cargo run --release --example train_cae

use reachgrid::cae::{gradient_check, train, CaeConfig};
use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::pipeline::{run_stage1, JobConfig};
use reachgrid::summary::{EventParams, NormScheme};

fn main() -> reachgrid::Result<()> {
    let dir = tempfile::tempdir()?;
    write_tdrive_dir(
        dir.path().join("raw").as_path(),
        &SynthConfig {
            taxis: 4,
            records_per_taxi: 1_200,
            city_span_tiles: 384,
            road_spacing_tiles: 16,
            ..Default::default()
        },
    )?;

    // Quick ingest + summarize via the pipeline (9x9 summaries).
    let dump = dir.path().join("traj.tsv");
    ingest(dir.path().join("raw").as_path(), &dump)?;
    let out = dir.path().join("summaries.rsum");
    let (archive, _) = run_stage1(&JobConfig {
        traj_dump: dump,
        out,
        window: None,
        params: EventParams {
            r: 4,
            tau_s: 600,
            h_max: 8,
        },
        scheme: NormScheme::GlobalMax,
        workers: 2,
    })?;
    println!(
        "corpus: {} summaries of {side}x{side}x6",
        archive.tiles.len(),
        side = archive.side()
    );

    // Backprop sanity first: analytic vs finite-difference gradients on a
    // tiny double-precision network, at a point clear of rectifier kinks.
    let mut toy = CaeConfig::new(3, 5);
    toy.in_channels = 2;
    toy.channels = [3, 4, 5];
    toy.seed = 123;
    let x: Vec<f64> = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123 ^ 0xF00D);
        (0..toy.in_channels * 25).map(|_| rng.gen_range(0.0..1.0)).collect()
    };
    let err = gradient_check(&toy, &x, 1e-5)?;
    println!("gradient check on toy network: max relative error {err:.2e}");
    assert!(err < 1e-4);

    // Train a small model.
    let mut cfg = CaeConfig::for_archive(8, &archive);
    cfg.channels = [8, 12, 16];
    cfg.epochs = 15;
    cfg.learning_rate = 3e-3;
    cfg.lambda_c = 0.1;
    let (model, log) = train(&archive, &cfg)?;
    println!("\nepoch  recon_mse   contractive  total");
    for e in &log.epochs {
        if e.epoch == 1 || e.epoch % 5 == 0 {
            println!(
                "{:5}  {:.6}  {:.6}     {:.6}",
                e.epoch, e.recon_mse, e.contractive, e.total
            );
        }
    }
    let first = &log.epochs[0];
    let last = log.epochs.last().unwrap();
    assert!(last.total < first.total);
    println!(
        "\nloss fell {:.1}x over {} epochs; model has {} parameters",
        first.total / last.total,
        cfg.epochs,
        model.param_count()
    );

    // Save and reload: the CAE1 file reproduces the model exactly.
    let model_path = dir.path().join("model.cae");
    model.save_file(&model_path)?;
    let reloaded = reachgrid::cae::CaeModel::load_file(&model_path)?;
    assert_eq!(reloaded.cfg, cfg);
    println!("model file: {} bytes", std::fs::metadata(&model_path)?.len());
    Ok(())
}

fn ingest(raw: &std::path::Path, dump: &std::path::Path) -> reachgrid::Result<()> {
    use reachgrid::trajectory::{self, ParseCounters};
    use std::io::BufReader;
    let mut files: Vec<_> = std::fs::read_dir(raw)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
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
    let mut buf = Vec::new();
    trajectory::write_dump(&mut buf, &paths)?;
    std::fs::write(dump, buf)?;
    Ok(())
}
