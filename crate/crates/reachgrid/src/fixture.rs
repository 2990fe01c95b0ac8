//! Deterministic synthetic GPS fixtures in the T-Drive file layout.
//!
//! Taxis walk a rectangular road lattice around a city center, sampling
//! at a fixed interval with occasional long gaps. The generator is fully
//! seeded, writes one `<id>.txt` file per taxi, and emits coordinates at
//! tile centers so the intended tile of every record is unambiguous.
//! Used by examples, benchmarks and the test suites; real datasets drop
//! in through the same `ingest` path.

use crate::error::Result;
use crate::tilegrid::{self, TileId};
use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub taxis: usize,
    pub records_per_taxi: usize,
    pub seed: u64,
    /// UTC epoch seconds of the first sample.
    pub start_utc: i64,
    pub sample_interval_s: i64,
    /// City center (lat, lon).
    pub center: (f64, f64),
    /// City side length in tiles.
    pub city_span_tiles: u32,
    /// Road lattice spacing in tiles.
    pub road_spacing_tiles: u32,
    /// Maximum tiles moved per sample.
    pub max_speed_tiles: u32,
    /// Insert a long pause every this many records (0 = never).
    pub gap_every: usize,
    pub gap_s: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            taxis: 20,
            records_per_taxi: 1_000,
            seed: 1,
            // 2008-02-02 00:00:00 UTC
            start_utc: 1_201_910_400,
            sample_interval_s: 5,
            center: (39.915, 116.404), // Beijing
            city_span_tiles: 2_048,
            road_spacing_tiles: 32,
            max_speed_tiles: 2,
            gap_every: 1_500,
            gap_s: 1_800,
        }
    }
}

/// Writes one T-Drive-format file per taxi into `dir`; returns the file
/// paths and the total record count.
pub fn write_tdrive_dir(dir: &Path, cfg: &SynthConfig) -> Result<(Vec<PathBuf>, u64)> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let origin = city_origin(cfg);
    let mut files = Vec::with_capacity(cfg.taxis);
    let mut total = 0u64;
    for taxi in 0..cfg.taxis {
        let id = taxi as u64 + 1;
        let path = dir.join(format!("{id}.txt"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        total += write_taxi(&mut w, id, origin, cfg, &mut rng)?;
        w.flush()?;
        files.push(path);
    }
    Ok((files, total))
}

fn city_origin(cfg: &SynthConfig) -> TileId {
    let center = tilegrid::latlon_to_tile(cfg.center.0, cfg.center.1)
        .expect("city center must be a valid coordinate");
    TileId::new(
        center.x - cfg.city_span_tiles / 2,
        center.y - cfg.city_span_tiles / 2,
    )
}

fn write_taxi<W: Write>(
    w: &mut W,
    id: u64,
    origin: TileId,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    let spacing = cfg.road_spacing_tiles.max(1);
    let lanes = (cfg.city_span_tiles / spacing).max(1);
    let intersection = |rng: &mut ChaCha8Rng| {
        (
            rng.gen_range(0..=lanes) * spacing,
            rng.gen_range(0..=lanes) * spacing,
        )
    };
    let (mut x, mut y) = intersection(rng);
    let (mut wx, mut wy) = intersection(rng);
    let mut ts = cfg.start_utc + rng.gen_range(0..cfg.sample_interval_s.max(1));
    let mut written = 0u64;
    for i in 0..cfg.records_per_taxi {
        let tile = TileId::new(origin.x + x, origin.y + y);
        let (lat, lon) = tile.center_latlon();
        writeln!(w, "{id},{},{lon:.6},{lat:.6}", beijing_datetime(ts))?;
        written += 1;

        // Advance along the lattice: x leg first, then y, then re-target.
        let speed = rng.gen_range(0..=cfg.max_speed_tiles);
        if x != wx {
            let step = speed.min(x.abs_diff(wx));
            x = if wx > x { x + step } else { x - step };
        } else if y != wy {
            let step = speed.min(y.abs_diff(wy));
            y = if wy > y { y + step } else { y - step };
        } else {
            let (nx, ny) = intersection(rng);
            wx = nx;
            wy = ny;
        }
        ts += cfg.sample_interval_s;
        if cfg.gap_every > 0 && (i + 1) % cfg.gap_every == 0 {
            ts += cfg.gap_s;
        }
    }
    Ok(written)
}

/// Formats a UTC timestamp as the Beijing-local wall clock string used by
/// the T-Drive layout.
fn beijing_datetime(utc: i64) -> String {
    let local = DateTime::from_timestamp(utc + 8 * 3600, 0).expect("timestamp in range");
    local.naive_utc().format("%Y-%m-%d %H:%M:%S").to_string()
}
