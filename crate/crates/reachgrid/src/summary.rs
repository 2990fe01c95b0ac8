//! Stage 1: per-tile reachability summaries and the LAR baseline raster.
//!
//! A summary is a square `(2r+1) x (2r+1) x 6` tensor centered on a tile.
//! Pixel `(i, j)` holds statistics for the neighbor at offset
//! `(dx = j - r, dy = i - r)`, split into two directions:
//!
//! * emission channels: transitions from that neighbor INTO the center,
//! * absorption channels: transitions FROM the center to that neighbor,
//!
//! each direction carrying count, mean along-path distance and mean
//! elapsed time. Accumulation is integer-exact (counts, millimeters,
//! seconds), so partial accumulators merge commutatively and any worker
//! partitioning produces bit-identical archives. Means and normalization
//! happen once, in a single deterministic finalize pass.

use crate::error::{Error, Result};
use crate::tilegrid::{self, TileId};
use crate::trajectory::{ObservationWindow, TilePath};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

/// Channels per summary pixel.
pub const CHANNELS: usize = 6;

pub const CH_EMISSION_COUNT: usize = 0;
pub const CH_EMISSION_MEAN_M: usize = 1;
pub const CH_EMISSION_MEAN_S: usize = 2;
pub const CH_ABSORPTION_COUNT: usize = 3;
pub const CH_ABSORPTION_MEAN_M: usize = 4;
pub const CH_ABSORPTION_MEAN_S: usize = 5;

const RSUM_MAGIC: &str = "RSUM1";

/// One materialized within-neighborhood transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionEvent {
    pub src: TileId,
    pub dst: TileId,
    /// Chebyshev hop distance between src and dst.
    pub hop: u32,
    /// Along-path distance in millimeters.
    pub path_mm: u64,
    pub elapsed_s: i64,
    /// Dense index of the source trajectory within the run.
    pub trajectory: u64,
    /// Index of the source visit within the trajectory.
    pub ordinal: u32,
}

/// Event extraction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventParams {
    /// Neighborhood Chebyshev radius.
    pub r: u32,
    /// Maximum elapsed seconds between visit pair.
    pub tau_s: i64,
    /// Maximum number of hops between visit pair.
    pub h_max: u32,
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::Parameter("r must be >= 1".into()));
        }
        if self.tau_s <= 0 {
            return Err(Error::Parameter("tau_s must be > 0".into()));
        }
        if self.h_max < 1 {
            return Err(Error::Parameter("h_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        (2 * self.r + 1) as usize
    }
}

/// Emits every valid visit pair `(i, i+k)` of `path`, `1 <= k <= h_max`,
/// whose tiles differ, lie within Chebyshev radius `r` of each other, and
/// whose elapsed time does not exceed `tau_s`.
pub fn extract_events(path: &TilePath, trajectory: u64, p: &EventParams) -> Vec<TransitionEvent> {
    let mut out = Vec::new();
    extract_events_into(path, trajectory, p, &mut out);
    out
}

pub(crate) fn extract_events_into(
    path: &TilePath,
    trajectory: u64,
    p: &EventParams,
    out: &mut Vec<TransitionEvent>,
) {
    let visits = &path.visits;
    for i in 0..visits.len() {
        let u = visits[i];
        let k_end = visits.len().min(i + 1 + p.h_max as usize);
        for v in &visits[i + 1..k_end] {
            let elapsed = v.timestamp - u.timestamp;
            if elapsed > p.tau_s {
                break; // timestamps strictly increase; later pairs only get worse
            }
            if v.tile == u.tile {
                continue;
            }
            let hop = tilegrid::chebyshev(u.tile, v.tile);
            if hop > p.r {
                continue;
            }
            out.push(TransitionEvent {
                src: u.tile,
                dst: v.tile,
                hop,
                path_mm: v.cum_mm - u.cum_mm,
                elapsed_s: elapsed,
                trajectory,
                ordinal: i as u32,
            });
        }
    }
}

/// Raw integer accumulators for one summary pixel.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RawCell {
    pub emission_count: u64,
    pub emission_path_mm: u64,
    pub emission_elapsed_s: u64,
    pub absorption_count: u64,
    pub absorption_path_mm: u64,
    pub absorption_elapsed_s: u64,
}

impl RawCell {
    pub fn is_zero(&self) -> bool {
        *self == RawCell::default()
    }
}

/// Mergeable partial accumulation of summaries, keyed by center tile and
/// sparse pixel index. The commutative-monoid contract: `merge` in any
/// order and any partitioning of the event stream gives identical state.
#[derive(Debug)]
pub struct SummaryStore {
    r: u32,
    tiles: HashMap<TileId, HashMap<u32, RawCell>>,
    recorded: u64,
}

impl SummaryStore {
    pub fn new(r: u32) -> SummaryStore {
        SummaryStore {
            r,
            tiles: HashMap::new(),
            recorded: 0,
        }
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Events recorded through [`SummaryStore::record`].
    pub fn recorded(&self) -> u64 {
        self.recorded
    }

    fn pixel_index(&self, dx: i64, dy: i64) -> u32 {
        let r = i64::from(self.r);
        debug_assert!(dx.abs() <= r && dy.abs() <= r);
        let side = 2 * r + 1;
        ((dy + r) * side + (dx + r)) as u32
    }

    /// Adds the event to both affected summaries: the destination's
    /// emission pixel at offset `src - dst`, and the source's absorption
    /// pixel at offset `dst - src`.
    pub fn record(&mut self, e: &TransitionEvent) {
        self.recorded += 1;
        self.add_emission(e);
        self.add_absorption(e);
    }

    pub(crate) fn add_emission(&mut self, e: &TransitionEvent) {
        let dx = i64::from(e.src.x) - i64::from(e.dst.x);
        let dy = i64::from(e.src.y) - i64::from(e.dst.y);
        let idx = self.pixel_index(dx, dy);
        let cell = self
            .tiles
            .entry(e.dst)
            .or_default()
            .entry(idx)
            .or_default();
        cell.emission_count += 1;
        cell.emission_path_mm += e.path_mm;
        cell.emission_elapsed_s += e.elapsed_s as u64;
    }

    pub(crate) fn add_absorption(&mut self, e: &TransitionEvent) {
        let dx = i64::from(e.dst.x) - i64::from(e.src.x);
        let dy = i64::from(e.dst.y) - i64::from(e.src.y);
        let idx = self.pixel_index(dx, dy);
        let cell = self
            .tiles
            .entry(e.src)
            .or_default()
            .entry(idx)
            .or_default();
        cell.absorption_count += 1;
        cell.absorption_path_mm += e.path_mm;
        cell.absorption_elapsed_s += e.elapsed_s as u64;
    }

    pub fn merge(&mut self, other: SummaryStore) {
        assert_eq!(self.r, other.r, "cannot merge stores of different radius");
        self.recorded += other.recorded;
        for (tile, pixels) in other.tiles {
            let dst = self.tiles.entry(tile).or_default();
            for (idx, cell) in pixels {
                let d = dst.entry(idx).or_default();
                d.emission_count += cell.emission_count;
                d.emission_path_mm += cell.emission_path_mm;
                d.emission_elapsed_s += cell.emission_elapsed_s;
                d.absorption_count += cell.absorption_count;
                d.absorption_path_mm += cell.absorption_path_mm;
                d.absorption_elapsed_s += cell.absorption_elapsed_s;
            }
        }
    }

    /// Raw accumulators of one tile, sorted by pixel index.
    pub fn raw_tile(&self, tile: TileId) -> Option<Vec<(u32, RawCell)>> {
        self.tiles.get(&tile).map(|m| {
            let mut v: Vec<(u32, RawCell)> = m.iter().map(|(&i, &c)| (i, c)).collect();
            v.sort_by_key(|&(i, _)| i);
            v
        })
    }

    pub fn tiles(&self) -> impl Iterator<Item = TileId> + '_ {
        self.tiles.keys().copied()
    }

    /// Total emission count, total absorption count over all pixels.
    pub fn totals(&self) -> (u64, u64) {
        let mut em = 0;
        let mut ab = 0;
        for pixels in self.tiles.values() {
            for cell in pixels.values() {
                em += cell.emission_count;
                ab += cell.absorption_count;
            }
        }
        (em, ab)
    }

    /// Finalizes into a normalized archive; `event_count` is the number of
    /// materialized events (equal to `recorded()` when every event went
    /// through [`SummaryStore::record`]).
    pub fn finalize(self, params: &SummaryParams, event_count: u64) -> SummaryArchive {
        let (emission_total, absorption_total) = self.totals();
        let maxima = compute_maxima(&self.tiles);
        let mut order: Vec<TileId> = self.tiles.keys().copied().collect();
        order.sort_by_key(|t| t.morton());
        let tiles = order
            .into_iter()
            .map(|t| {
                let mut pixels: Vec<(u32, RawCell)> =
                    self.tiles[&t].iter().map(|(&i, &c)| (i, c)).collect();
                pixels.sort_by_key(|&(i, _)| i);
                normalize(t, &pixels, &maxima, params.scheme)
            })
            .collect();
        SummaryArchive {
            params: params.clone(),
            maxima,
            event_count,
            emission_total,
            absorption_total,
            tiles,
        }
    }
}

/// Accumulates a stream of events into a fresh store.
pub fn accumulate(events: impl IntoIterator<Item = TransitionEvent>, r: u32) -> SummaryStore {
    let mut store = SummaryStore::new(r);
    for e in events {
        store.record(&e);
    }
    store
}

/// Normalization scheme for finalized tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormScheme {
    /// Counts scaled as `log1p(count) / log1p(global max count)`, means
    /// divided by the global per-channel maximum.
    GlobalMax,
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<NormScheme> {
        match s {
            "global-max" => Ok(NormScheme::GlobalMax),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormScheme::GlobalMax => write!(f, "global-max"),
        }
    }
}

/// Dataset-wide per-channel maxima, recorded in the archive manifest so
/// every consumer shares one scale.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormMaxima {
    /// Indexed by channel; counts as exact integers widened to f64, means
    /// in meters / seconds.
    pub per_channel: [f64; CHANNELS],
}

fn compute_maxima(tiles: &HashMap<TileId, HashMap<u32, RawCell>>) -> NormMaxima {
    let mut m = [0.0f64; CHANNELS];
    for pixels in tiles.values() {
        for c in pixels.values() {
            if c.emission_count > 0 {
                m[CH_EMISSION_COUNT] = m[CH_EMISSION_COUNT].max(c.emission_count as f64);
                m[CH_EMISSION_MEAN_M] = m[CH_EMISSION_MEAN_M]
                    .max(c.emission_path_mm as f64 / 1000.0 / c.emission_count as f64);
                m[CH_EMISSION_MEAN_S] = m[CH_EMISSION_MEAN_S]
                    .max(c.emission_elapsed_s as f64 / c.emission_count as f64);
            }
            if c.absorption_count > 0 {
                m[CH_ABSORPTION_COUNT] = m[CH_ABSORPTION_COUNT].max(c.absorption_count as f64);
                m[CH_ABSORPTION_MEAN_M] = m[CH_ABSORPTION_MEAN_M]
                    .max(c.absorption_path_mm as f64 / 1000.0 / c.absorption_count as f64);
                m[CH_ABSORPTION_MEAN_S] = m[CH_ABSORPTION_MEAN_S]
                    .max(c.absorption_elapsed_s as f64 / c.absorption_count as f64);
            }
        }
    }
    NormMaxima { per_channel: m }
}

/// One finalized summary: sparse normalized pixels, sorted by pixel index.
/// Every stored channel value lies in `[0, 1]`; absent pixels are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilitySummary {
    pub center: TileId,
    pub pixels: Vec<(u32, [f32; CHANNELS])>,
}

impl ReachabilitySummary {
    /// Expands to the dense `(2r+1) * (2r+1) * CHANNELS` tensor, row-major
    /// `(i, j, channel)`.
    pub fn to_dense(&self, r: u32) -> Vec<f32> {
        let side = (2 * r + 1) as usize;
        let mut out = vec![0.0f32; side * side * CHANNELS];
        for &(idx, ch) in &self.pixels {
            let base = idx as usize * CHANNELS;
            out[base..base + CHANNELS].copy_from_slice(&ch);
        }
        out
    }
}

/// Normalizes one tile's raw accumulators into a [`ReachabilitySummary`].
pub fn normalize(
    center: TileId,
    raw: &[(u32, RawCell)],
    maxima: &NormMaxima,
    scheme: NormScheme,
) -> ReachabilitySummary {
    let NormScheme::GlobalMax = scheme;
    let m = &maxima.per_channel;
    let count_norm = |count: u64, max: f64| -> f32 {
        if count == 0 || max <= 0.0 {
            0.0
        } else {
            ((count as f64).ln_1p() / max.ln_1p()) as f32
        }
    };
    let mean_norm = |sum: u64, scale: f64, count: u64, max: f64| -> f32 {
        if count == 0 || max <= 0.0 {
            0.0
        } else {
            (sum as f64 / scale / count as f64 / max) as f32
        }
    };
    let pixels = raw
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|&(idx, c)| {
            let mut ch = [0.0f32; CHANNELS];
            ch[CH_EMISSION_COUNT] = count_norm(c.emission_count, m[CH_EMISSION_COUNT]);
            ch[CH_EMISSION_MEAN_M] = mean_norm(
                c.emission_path_mm,
                1000.0,
                c.emission_count,
                m[CH_EMISSION_MEAN_M],
            );
            ch[CH_EMISSION_MEAN_S] = mean_norm(
                c.emission_elapsed_s,
                1.0,
                c.emission_count,
                m[CH_EMISSION_MEAN_S],
            );
            ch[CH_ABSORPTION_COUNT] = count_norm(c.absorption_count, m[CH_ABSORPTION_COUNT]);
            ch[CH_ABSORPTION_MEAN_M] = mean_norm(
                c.absorption_path_mm,
                1000.0,
                c.absorption_count,
                m[CH_ABSORPTION_MEAN_M],
            );
            ch[CH_ABSORPTION_MEAN_S] = mean_norm(
                c.absorption_elapsed_s,
                1.0,
                c.absorption_count,
                m[CH_ABSORPTION_MEAN_S],
            );
            (idx, ch)
        })
        .collect();
    ReachabilitySummary { center, pixels }
}

/// Archive-level parameters, echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryParams {
    pub event: EventParams,
    pub t0: i64,
    pub delta_t: i64,
    pub scheme: NormScheme,
}

/// A finalized, serializable summary dataset; tiles sorted by quadkey.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryArchive {
    pub params: SummaryParams,
    pub maxima: NormMaxima,
    pub event_count: u64,
    pub emission_total: u64,
    pub absorption_total: u64,
    pub tiles: Vec<ReachabilitySummary>,
}

impl SummaryArchive {
    pub fn r(&self) -> u32 {
        self.params.event.r
    }

    pub fn side(&self) -> usize {
        self.params.event.side()
    }

    /// Serializes as RSUM1: a text manifest terminated by `end_header`,
    /// then one record per tile: the 24-byte quadkey followed by the dense
    /// tensor as little-endian f32, row-major `(i, j, channel)`.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(w, "{RSUM_MAGIC}")?;
        writeln!(w, "r={}", p.event.r)?;
        writeln!(w, "channels={CHANNELS}")?;
        writeln!(w, "scheme={}", p.scheme)?;
        writeln!(w, "t0={}", p.t0)?;
        writeln!(w, "delta_t={}", p.delta_t)?;
        writeln!(w, "tau_s={}", p.event.tau_s)?;
        writeln!(w, "h_max={}", p.event.h_max)?;
        writeln!(w, "tiles={}", self.tiles.len())?;
        writeln!(w, "events={}", self.event_count)?;
        writeln!(w, "emission_total={}", self.emission_total)?;
        writeln!(w, "absorption_total={}", self.absorption_total)?;
        for (i, v) in self.maxima.per_channel.iter().enumerate() {
            writeln!(w, "max_{i}={v}")?;
        }
        writeln!(w, "end_header")?;
        let mut buf = Vec::with_capacity(self.side() * self.side() * CHANNELS * 4);
        for t in &self.tiles {
            w.write_all(tilegrid::tile_to_quadkey(t.center).as_bytes())?;
            buf.clear();
            for v in t.to_dense(self.r()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.write_to(std::io::BufWriter::new(&mut tmp))?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R, origin: &Path) -> Result<SummaryArchive> {
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::format(origin, "truncated header"));
            }
            let line = line.trim_end().to_string();
            if line == "end_header" {
                break;
            }
            header.push(line);
        }
        if header.first().map(String::as_str) != Some(RSUM_MAGIC) {
            return Err(Error::format(origin, "bad magic: expected RSUM1"));
        }
        let kv: BTreeMap<&str, &str> = header[1..]
            .iter()
            .filter_map(|l| l.split_once('='))
            .collect();
        let get = |k: &str| -> Result<&str> {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::format(origin, format!("missing manifest key {k}")))
        };
        let parse_u64 = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(origin, format!("bad integer for {k}")))
        };
        let r_val: u32 = get("r")?
            .parse()
            .map_err(|_| Error::format(origin, "bad integer for r"))?;
        let channels: usize = get("channels")?
            .parse()
            .map_err(|_| Error::format(origin, "bad integer for channels"))?;
        if channels != CHANNELS {
            return Err(Error::format(
                origin,
                format!("channels={channels}, expected {CHANNELS}"),
            ));
        }
        let scheme: NormScheme = get("scheme")?.parse()?;
        let params = SummaryParams {
            event: EventParams {
                r: r_val,
                tau_s: parse_u64("tau_s")? as i64,
                h_max: parse_u64("h_max")? as u32,
            },
            t0: get("t0")?
                .parse()
                .map_err(|_| Error::format(origin, "bad integer for t0"))?,
            delta_t: get("delta_t")?
                .parse()
                .map_err(|_| Error::format(origin, "bad integer for delta_t"))?,
            scheme,
        };
        let tile_count = parse_u64("tiles")? as usize;
        let mut maxima = NormMaxima::default();
        for (i, slot) in maxima.per_channel.iter_mut().enumerate() {
            *slot = get(&format!("max_{i}"))?
                .parse()
                .map_err(|_| Error::format(origin, format!("bad float for max_{i}")))?;
        }
        let side = params.event.side();
        let floats = side * side * CHANNELS;
        let mut tiles = Vec::with_capacity(tile_count);
        let mut qk = [0u8; 24];
        let mut payload = vec![0u8; floats * 4];
        for _ in 0..tile_count {
            r.read_exact(&mut qk)
                .map_err(|_| Error::format(origin, "truncated tile record"))?;
            let qk_str = std::str::from_utf8(&qk)
                .map_err(|_| Error::format(origin, "non-ascii quadkey"))?;
            let center = tilegrid::quadkey_to_tile(qk_str)?;
            r.read_exact(&mut payload)
                .map_err(|_| Error::format(origin, "truncated tensor payload"))?;
            let mut pixels = Vec::new();
            for idx in 0..side * side {
                let mut ch = [0.0f32; CHANNELS];
                let mut any = false;
                for (c, slot) in ch.iter_mut().enumerate() {
                    let o = (idx * CHANNELS + c) * 4;
                    *slot = f32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
                    any |= *slot != 0.0;
                }
                if any {
                    pixels.push((idx as u32, ch));
                }
            }
            tiles.push(ReachabilitySummary {
                center,
                pixels,
            });
        }
        let mut trailer = Vec::new();
        r.read_to_end(&mut trailer)?;
        if !trailer.is_empty() {
            return Err(Error::format(origin, "trailing bytes after last tile"));
        }
        Ok(SummaryArchive {
            params,
            maxima,
            event_count: parse_u64("events")?,
            emission_total: parse_u64("emission_total")?,
            absorption_total: parse_u64("absorption_total")?,
            tiles,
        })
    }

    pub fn read_file(path: &Path) -> Result<SummaryArchive> {
        let f = std::fs::File::open(path).map_err(Error::Io)?;
        SummaryArchive::read_from(std::io::BufReader::new(f), path)
    }
}

/// Per-tile local aggregates with no neighborhood information: the
/// connectivity-blind comparison raster.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LarCell {
    pub record_count: u64,
    pub trajectory_count: u64,
    /// Along-path millimeters attributed to departures from this tile.
    pub path_mm: u64,
    pub elapsed_s: u64,
}

impl LarCell {
    pub fn mean_speed_mps(&self) -> f64 {
        if self.elapsed_s == 0 {
            0.0
        } else {
            self.path_mm as f64 / 1000.0 / self.elapsed_s as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct LarRaster {
    pub window: ObservationWindow,
    pub cells: BTreeMap<TileId, LarCell>,
}

impl LarRaster {
    /// `[record_count, trajectory_count, mean_speed]` per tile, normalized
    /// like summaries: counts via log1p ratio, speed via global maximum.
    pub fn normalized(&self) -> (BTreeMap<TileId, [f32; 3]>, [f64; 3]) {
        let mut maxima = [0.0f64; 3];
        for c in self.cells.values() {
            maxima[0] = maxima[0].max(c.record_count as f64);
            maxima[1] = maxima[1].max(c.trajectory_count as f64);
            maxima[2] = maxima[2].max(c.mean_speed_mps());
        }
        let norm_count = |v: u64, max: f64| {
            if v == 0 || max <= 0.0 {
                0.0
            } else {
                ((v as f64).ln_1p() / max.ln_1p()) as f32
            }
        };
        let out = self
            .cells
            .iter()
            .map(|(&t, c)| {
                let speed = if maxima[2] > 0.0 {
                    (c.mean_speed_mps() / maxima[2]) as f32
                } else {
                    0.0
                };
                (
                    t,
                    [
                        norm_count(c.record_count, maxima[0]),
                        norm_count(c.trajectory_count, maxima[1]),
                        speed,
                    ],
                )
            })
            .collect();
        (out, maxima)
    }
}

/// Builds the LAR baseline from tile paths: per-tile visit counts,
/// distinct trajectory counts and departure speeds, using only records
/// landing in each tile.
pub fn lar_raster<'a>(
    paths: impl IntoIterator<Item = &'a TilePath>,
    window: &ObservationWindow,
) -> LarRaster {
    let mut cells: BTreeMap<TileId, LarCell> = BTreeMap::new();
    let mut last_traj: HashMap<TileId, u64> = HashMap::new();
    for (pi, path) in paths.into_iter().enumerate() {
        let in_window: Vec<_> = path
            .visits
            .iter()
            .filter(|v| window.contains(v.timestamp))
            .collect();
        for v in &in_window {
            let cell = cells.entry(v.tile).or_default();
            cell.record_count += 1;
            let seen = last_traj.insert(v.tile, pi as u64 + 1);
            if seen != Some(pi as u64 + 1) {
                cell.trajectory_count += 1;
            }
        }
        for w in in_window.windows(2) {
            let cell = cells.entry(w[0].tile).or_default();
            cell.path_mm += w[1].cum_mm - w[0].cum_mm;
            cell.elapsed_s += (w[1].timestamp - w[0].timestamp) as u64;
        }
    }
    LarRaster {
        window: *window,
        cells,
    }
}
