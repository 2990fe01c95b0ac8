//! GPS log parsing, trajectory segmentation and tile paths.
//!
//! Raw logs arrive in the T-Drive layout: one text file per taxi, each
//! line `id,YYYY-MM-DD HH:MM:SS,lon,lat` in Beijing local time. Parsing
//! shifts timestamps to UTC with a fixed +8 h offset, segmentation splits
//! on time gaps and implausible tile jumps, and [`to_tile_path`] collapses
//! each clean trajectory into its sequence of distinct tile visits.

use crate::error::{Error, Result};
use crate::tilegrid::{self, TileId};
use chrono::NaiveDateTime;
use std::io::{BufRead, Write};

/// Mean Earth radius in meters, used for all haversine distances.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

const BEIJING_UTC_OFFSET_S: i64 = 8 * 3600;

/// One parsed GPS record, already snapped to its zoom-24 tile.
#[derive(Debug, Clone)]
pub struct GpsRecord {
    pub mover_id: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub tile: TileId,
}

/// A cleaned single-mover trajectory: at least two records, strictly
/// increasing timestamps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `mover_id` plus segment index, stable across reruns.
    pub id: String,
    pub records: Vec<GpsRecord>,
}

/// Half-open observation interval `[t0, t0 + delta_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationWindow {
    pub t0: i64,
    pub delta_t: i64,
}

impl ObservationWindow {
    pub fn new(t0: i64, delta_t: i64) -> Result<ObservationWindow> {
        if delta_t <= 0 {
            return Err(Error::Parameter(format!(
                "observation window delta_t must be positive, got {delta_t}"
            )));
        }
        Ok(ObservationWindow { t0, delta_t })
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.t0 && ts < self.t0 + self.delta_t
    }
}

/// Line accounting for one parse run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ParseCounters {
    pub lines: u64,
    pub parsed: u64,
    pub skipped: u64,
}

/// Parses one T-Drive file. Malformed lines (bad field count, unparseable
/// datetime or numbers, coordinates outside Web-Mercator validity) are
/// counted in `counters.skipped`; an unreadable stream is a hard error.
pub fn parse_tdrive_file<R: BufRead>(
    reader: R,
    counters: &mut ParseCounters,
) -> Result<Vec<GpsRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        counters.lines += 1;
        match parse_tdrive_line(&line) {
            Some(rec) => {
                counters.parsed += 1;
                out.push(rec);
            }
            None => counters.skipped += 1,
        }
    }
    Ok(out)
}

fn parse_tdrive_line(line: &str) -> Option<GpsRecord> {
    let mut parts = line.trim_end_matches(['\r', '\n']).split(',');
    let id = parts.next()?;
    let datetime = parts.next()?;
    let lon: f64 = parts.next()?.trim().parse().ok()?;
    let lat: f64 = parts.next()?.trim().parse().ok()?;
    if id.is_empty() || parts.next().is_some() {
        return None;
    }
    let naive = NaiveDateTime::parse_from_str(datetime, "%Y-%m-%d %H:%M:%S").ok()?;
    let timestamp = naive.and_utc().timestamp() - BEIJING_UTC_OFFSET_S;
    let tile = tilegrid::latlon_to_tile(lat, lon).ok()?;
    Some(GpsRecord {
        mover_id: id.to_string(),
        timestamp,
        lat,
        lon,
        tile,
    })
}

/// Splits records into clean trajectories.
///
/// `records` must be sorted by `(mover_id, timestamp)`. A new segment
/// starts when the mover changes, the time gap between consecutive
/// records exceeds `gap_s`, or the Chebyshev tile jump exceeds
/// `jump_tiles`. Records repeating the previous timestamp are dropped,
/// segments shorter than two records are discarded.
pub fn segment(records: &[GpsRecord], gap_s: i64, jump_tiles: u32) -> Vec<Trajectory> {
    let mut out = Vec::new();
    let mut current: Vec<GpsRecord> = Vec::new();
    let mut segment_index: u64 = 0;
    let mut current_mover: Option<&str> = None;

    let mut flush = |buf: &mut Vec<GpsRecord>, seg_idx: &mut u64| {
        if buf.len() >= 2 {
            let id = format!("{}#{:04}", buf[0].mover_id, seg_idx);
            out.push(Trajectory {
                id,
                records: std::mem::take(buf),
            });
            *seg_idx += 1;
        } else {
            buf.clear();
        }
    };

    for rec in records {
        if current_mover != Some(rec.mover_id.as_str()) {
            flush(&mut current, &mut segment_index);
            segment_index = 0;
            current_mover = Some(rec.mover_id.as_str());
        } else if let Some(prev) = current.last() {
            if rec.timestamp == prev.timestamp {
                continue; // duplicate timestamp collapsed, first record wins
            }
            if rec.timestamp - prev.timestamp > gap_s
                || tilegrid::chebyshev(prev.tile, rec.tile) > jump_tiles
            {
                flush(&mut current, &mut segment_index);
            }
        }
        current.push(rec.clone());
    }
    flush(&mut current, &mut segment_index);
    out
}

/// One stay in a tile: entry timestamp and the cumulative along-path
/// distance (integer millimeters) at entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileVisit {
    pub tile: TileId,
    pub timestamp: i64,
    pub cum_mm: u64,
}

/// Trajectory reduced to its distinct consecutive tile visits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePath {
    pub id: String,
    pub visits: Vec<TileVisit>,
}

/// Haversine distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Collapses consecutive same-tile records into visits. Each visit keeps
/// the first-entry timestamp; cumulative distance accumulates over every
/// raw record, rounded to millimeters per leg so that downstream
/// aggregation is integer-exact.
pub fn to_tile_path(t: &Trajectory) -> TilePath {
    let mut visits = Vec::new();
    let mut cum_mm = 0u64;
    if let Some(first) = t.records.first() {
        visits.push(TileVisit {
            tile: first.tile,
            timestamp: first.timestamp,
            cum_mm: 0,
        });
    }
    for w in t.records.windows(2) {
        let leg = haversine_m(w[0].lat, w[0].lon, w[1].lat, w[1].lon);
        cum_mm += (leg * 1000.0).round() as u64;
        if w[1].tile != visits.last().expect("first visit pushed").tile {
            visits.push(TileVisit {
                tile: w[1].tile,
                timestamp: w[1].timestamp,
                cum_mm,
            });
        }
    }
    TilePath {
        id: t.id.clone(),
        visits,
    }
}

/// Writes the normalized trajectory dump:
/// `trajectory_id<TAB>timestamp<TAB>tile_x<TAB>tile_y<TAB>cum_m` per visit,
/// in the order given (callers pass paths sorted by id).
pub fn write_dump<W: Write>(mut w: W, paths: &[TilePath]) -> std::io::Result<()> {
    for p in paths {
        for v in &p.visits {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{:.3}",
                p.id,
                v.timestamp,
                v.tile.x,
                v.tile.y,
                v.cum_mm as f64 / 1000.0
            )?;
        }
    }
    Ok(())
}

/// Reads a dump produced by [`write_dump`], grouping consecutive lines
/// with the same trajectory id.
pub fn read_dump<R: BufRead>(r: R) -> Result<Vec<TilePath>> {
    let mut paths: Vec<TilePath> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let bad = || {
            Error::Parameter(format!(
                "trajectory dump line {}: malformed record",
                lineno + 1
            ))
        };
        let id = f.next().ok_or_else(bad)?;
        let timestamp: i64 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let x: u32 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y: u32 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let cum_m: f64 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let visit = TileVisit {
            tile: TileId::new(x, y),
            timestamp,
            cum_mm: (cum_m * 1000.0).round() as u64,
        };
        match paths.last_mut() {
            Some(p) if p.id == id => p.visits.push(visit),
            _ => paths.push(TilePath {
                id: id.to_string(),
                visits: vec![visit],
            }),
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rec(mover: &str, ts: i64, lat: f64, lon: f64) -> GpsRecord {
        GpsRecord {
            mover_id: mover.to_string(),
            timestamp: ts,
            lat,
            lon,
            tile: tilegrid::latlon_to_tile(lat, lon).unwrap(),
        }
    }

    #[test]
    fn parses_tdrive_sample_line() {
        let mut c = ParseCounters::default();
        let recs =
            parse_tdrive_file(Cursor::new("1,2008-02-02 15:36:08,116.51172,39.92123\n"), &mut c)
                .unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.mover_id, "1");
        assert_eq!(r.lon, 116.51172);
        assert_eq!(r.lat, 39.92123);
        // 2008-02-02 15:36:08 +08:00
        assert_eq!(r.timestamp, 1_201_937_768);
        assert_eq!(r.tile, TileId::new(13_818_447, 6_356_293));
        assert_eq!((c.lines, c.parsed, c.skipped), (1, 1, 0));
    }

    #[test]
    fn skips_out_of_range_and_malformed_lines() {
        let input = "1,2008-02-02 15:36:08,999.0,39.9\n\
                     not a record\n\
                     1,2008-02-02 15:36:18,116.5,39.9\n";
        let mut c = ParseCounters::default();
        let recs = parse_tdrive_file(Cursor::new(input), &mut c).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!((c.lines, c.parsed, c.skipped), (3, 1, 2));
        assert_eq!(c.parsed + c.skipped, c.lines);
    }

    #[test]
    fn empty_file_parses_to_nothing() {
        let mut c = ParseCounters::default();
        let recs = parse_tdrive_file(Cursor::new(""), &mut c).unwrap();
        assert!(recs.is_empty());
        assert_eq!(c.lines, 0);
    }

    #[test]
    fn segment_keeps_close_records_together() {
        let recs = vec![rec("a", 0, 39.9, 116.4), rec("a", 10, 39.9001, 116.4)];
        let segs = segment(&recs, 300, 2000);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].id, "a#0000");
        assert_eq!(segs[0].records.len(), 2);
    }

    #[test]
    fn segment_drops_singletons_after_gap() {
        let recs = vec![rec("a", 0, 39.9, 116.4), rec("a", 600, 39.9001, 116.4)];
        assert!(segment(&recs, 300, 2000).is_empty());
    }

    #[test]
    fn segment_splits_on_hole_when_both_sides_survive() {
        let recs = vec![
            rec("a", 0, 39.9, 116.4),
            rec("a", 10, 39.9001, 116.4),
            rec("a", 7200, 39.91, 116.41),
            rec("a", 7210, 39.9101, 116.41),
            rec("a", 7220, 39.9102, 116.41),
        ];
        let segs = segment(&recs, 300, 2000);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].records.len(), 2);
        assert_eq!(segs[1].records.len(), 3);
        assert_eq!(segs[1].id, "a#0001");
    }

    #[test]
    fn segment_collapses_duplicate_timestamps() {
        let recs = vec![
            rec("a", 0, 39.9, 116.4),
            rec("a", 0, 39.95, 116.45), // same timestamp, dropped
            rec("a", 10, 39.9001, 116.4),
        ];
        let segs = segment(&recs, 300, 2000);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].records.len(), 2);
        assert_eq!(segs[0].records[0].lat, 39.9);
        let ts: Vec<i64> = segs[0].records.iter().map(|r| r.timestamp).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn segmentation_is_idempotent() {
        let mut recs = Vec::new();
        for i in 0..20 {
            let gap = if i == 7 || i == 13 { 1000 } else { 5 };
            let base: i64 = recs.last().map_or(0, |r: &GpsRecord| r.timestamp);
            recs.push(rec("m", base + gap, 39.9 + i as f64 * 1e-4, 116.4));
        }
        let first = segment(&recs, 300, 2000);
        let flattened: Vec<GpsRecord> = first
            .iter()
            .flat_map(|t| t.records.iter().cloned())
            .collect();
        let second = segment(&flattened, 300, 2000);
        assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.records.len(), b.records.len());
            assert_eq!(a.records[0].timestamp, b.records[0].timestamp);
        }
    }

    #[test]
    fn tile_path_collapses_same_tile_runs() {
        let t = Trajectory {
            id: "a#0000".into(),
            records: vec![
                rec("a", 0, 39.9, 116.4),
                rec("a", 5, 39.9, 116.4),
                rec("a", 10, 39.92, 116.42),
            ],
        };
        let p = to_tile_path(&t);
        assert_eq!(p.visits.len(), 2);
        assert_eq!(p.visits[0].timestamp, 0);
        assert_eq!(p.visits[0].cum_mm, 0);
        let tiles: Vec<TileId> = p.visits.iter().map(|v| v.tile).collect();
        assert!(tiles.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn single_tile_trajectory_is_one_visit() {
        let t = Trajectory {
            id: "a#0000".into(),
            records: vec![rec("a", 0, 39.9, 116.4), rec("a", 5, 39.9, 116.4)],
        };
        let p = to_tile_path(&t);
        assert_eq!(p.visits.len(), 1);
        assert_eq!(p.visits[0].cum_mm, 0);
    }

    #[test]
    fn haversine_small_latitude_step() {
        // 0.001 degrees of latitude on the chosen sphere.
        let d = haversine_m(39.9, 116.4, 39.901, 116.4);
        assert!((d - 111.2).abs() < 0.5, "got {d}");
    }

    #[test]
    fn dump_roundtrip() {
        let t = Trajectory {
            id: "a#0000".into(),
            records: vec![
                rec("a", 100, 39.9, 116.4),
                rec("a", 105, 39.905, 116.405),
                rec("a", 110, 39.91, 116.41),
            ],
        };
        let paths = vec![to_tile_path(&t)];
        let mut buf = Vec::new();
        write_dump(&mut buf, &paths).unwrap();
        let back = read_dump(Cursor::new(&buf)).unwrap();
        assert_eq!(back, paths);
    }
}
