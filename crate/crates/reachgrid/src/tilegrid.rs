//! Zoom-24 Web-Mercator tile arithmetic.
//!
//! Every geographic location is identified by its tile on the slippy-map
//! (XYZ) grid at a fixed zoom of 24: `x` grows eastward, `y` grows
//! southward, both in `[0, 2^24)`. Tiles are the atomic spatial unit of
//! the whole crate — trajectory records, graph nodes and summary pixels
//! are all expressed in tile coordinates.
//!
//! There is no antimeridian wraparound: tiles at `x = 0` and
//! `x = 2^24 - 1` are not adjacent.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

/// Fixed zoom level of the grid.
pub const ZOOM: u32 = 24;

/// Number of tiles along one axis (`2^24`).
pub const GRID_SIZE: u32 = 1 << ZOOM;

/// Web-Mercator latitude clamp; latitudes beyond this are rejected.
pub const MAX_MERCATOR_LAT: f64 = 85.05112878;

/// A zoom-24 tile, identified by column `x` and row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileId {
    pub x: u32,
    pub y: u32,
}

impl TileId {
    /// Builds a tile id, asserting both coordinates are on the grid.
    pub fn new(x: u32, y: u32) -> TileId {
        assert!(x < GRID_SIZE && y < GRID_SIZE, "tile ({x}, {y}) off grid");
        TileId { x, y }
    }

    /// Tile shifted by `(dx, dy)`, or `None` when the result falls off the
    /// grid edge.
    pub fn offset(self, dx: i64, dy: i64) -> Option<TileId> {
        let x = i64::from(self.x) + dx;
        let y = i64::from(self.y) + dy;
        if x < 0 || y < 0 || x >= i64::from(GRID_SIZE) || y >= i64::from(GRID_SIZE) {
            None
        } else {
            Some(TileId {
                x: x as u32,
                y: y as u32,
            })
        }
    }

    /// Z-order key with `y` bits in the odd positions. Sorting by this key
    /// is identical to sorting tiles by their quadkey strings.
    pub fn morton(self) -> u64 {
        interleave(self.y) << 1 | interleave(self.x)
    }

    /// Latitude/longitude of the tile center, in degrees.
    pub fn center_latlon(self) -> (f64, f64) {
        let n = f64::from(GRID_SIZE);
        let lon = (f64::from(self.x) + 0.5) / n * 360.0 - 180.0;
        let t = PI * (1.0 - 2.0 * (f64::from(self.y) + 0.5) / n);
        let lat = t.sinh().atan().to_degrees();
        (lat, lon)
    }
}

impl Ord for TileId {
    // Raster order: row-major, (y, x). All deterministic iteration over
    // tiles uses this order.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for TileId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Offset of one tile relative to another inside a Chebyshev window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileOffset {
    pub dx: i32,
    pub dy: i32,
}

impl TileOffset {
    pub fn between(from: TileId, to: TileId) -> TileOffset {
        TileOffset {
            dx: (i64::from(to.x) - i64::from(from.x)) as i32,
            dy: (i64::from(to.y) - i64::from(from.y)) as i32,
        }
    }

    /// Chebyshev norm `max(|dx|, |dy|)`.
    pub fn norm(self) -> u32 {
        self.dx.unsigned_abs().max(self.dy.unsigned_abs())
    }
}

/// Converts WGS84 degrees to the zoom-24 tile containing the point.
///
/// Rejects latitudes beyond the Web-Mercator clamp and longitudes outside
/// `[-180, 180)`; callers treat the error as a rejected record.
pub fn latlon_to_tile(lat: f64, lon: f64) -> Result<TileId> {
    if !lat.is_finite()
        || !lon.is_finite()
        || lat.abs() > MAX_MERCATOR_LAT
        || lon < -180.0
        || lon >= 180.0
    {
        return Err(Error::CoordinateOutOfRange { lat, lon });
    }
    let n = f64::from(GRID_SIZE);
    let max = f64::from(GRID_SIZE - 1);
    let x = ((lon + 180.0) / 360.0 * n).floor();
    // asinh(tan(lat)) == ln(tan(lat) + sec(lat))
    let y = ((1.0 - lat.to_radians().tan().asinh() / PI) / 2.0 * n).floor();
    Ok(TileId {
        x: x.clamp(0.0, max) as u32,
        y: y.clamp(0.0, max) as u32,
    })
}

/// 24-character quadkey of a tile: digit `i` (most significant first) is
/// `2 * bit_i(y) + bit_i(x)`.
pub fn tile_to_quadkey(t: TileId) -> String {
    let mut qk = String::with_capacity(ZOOM as usize);
    for i in (0..ZOOM).rev() {
        let xb = (t.x >> i) & 1;
        let yb = (t.y >> i) & 1;
        qk.push(char::from(b'0' + (2 * yb + xb) as u8));
    }
    qk
}

/// Inverse of [`tile_to_quadkey`].
pub fn quadkey_to_tile(qk: &str) -> Result<TileId> {
    if qk.len() != ZOOM as usize {
        return Err(Error::InvalidQuadkey(qk.to_string()));
    }
    let mut x = 0u32;
    let mut y = 0u32;
    for c in qk.chars() {
        let d = match c {
            '0' => 0,
            '1' => 1,
            '2' => 2,
            '3' => 3,
            _ => return Err(Error::InvalidQuadkey(qk.to_string())),
        };
        x = x << 1 | (d & 1);
        y = y << 1 | (d >> 1);
    }
    Ok(TileId { x, y })
}

/// Chebyshev distance between two tiles, `max(|dx|, |dy|)`.
pub fn chebyshev(a: TileId, b: TileId) -> u32 {
    let dx = (i64::from(a.x) - i64::from(b.x)).unsigned_abs();
    let dy = (i64::from(a.y) - i64::from(b.y)).unsigned_abs();
    dx.max(dy) as u32
}

/// All tiles within Chebyshev radius `r` of `s`, clipped at grid edges,
/// in `(dy, dx)` raster order. Contains `s` itself; `(2r+1)^2` tiles when
/// nothing is clipped.
pub fn neighborhood(s: TileId, r: u32) -> Vec<TileId> {
    let r = i64::from(r);
    let mut out = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            if let Some(t) = s.offset(dx, dy) {
                out.push(t);
            }
        }
    }
    out
}

// Spreads the low 24 bits of v to the even bit positions.
fn interleave(v: u32) -> u64 {
    let mut out = 0u64;
    for i in 0..ZOOM {
        out |= u64::from(v >> i & 1) << (2 * i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn equator_prime_meridian_maps_to_grid_midpoint() {
        let t = latlon_to_tile(0.0, 0.0).unwrap();
        assert_eq!(t, TileId::new(8_388_608, 8_388_608));
    }

    #[test]
    fn beijing_longitude_column() {
        // floor((116.3970 + 180) / 360 * 2^24) evaluated at high precision.
        let t = latlon_to_tile(0.0, 116.3970).unwrap();
        assert_eq!(t, TileId::new(13_813_101, 8_388_608));
    }

    #[test]
    fn beyond_mercator_clamp_is_rejected() {
        assert!(latlon_to_tile(85.06, 0.0).is_err());
        assert!(latlon_to_tile(-85.06, 0.0).is_err());
        assert!(latlon_to_tile(0.0, 180.0).is_err());
        assert!(latlon_to_tile(0.0, -180.1).is_err());
        assert!(latlon_to_tile(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn quadkey_of_origin_and_midpoint() {
        assert_eq!(tile_to_quadkey(TileId::new(0, 0)), "0".repeat(24));
        let mid = TileId::new(8_388_608, 8_388_608);
        let mut expect = String::from("3");
        expect.push_str(&"0".repeat(23));
        assert_eq!(tile_to_quadkey(mid), expect);
    }

    #[test]
    fn quadkey_rejects_bad_input() {
        assert!(quadkey_to_tile("012").is_err());
        assert!(quadkey_to_tile(&"4".repeat(24)).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        let a = TileId::new(10, 10);
        assert_eq!(chebyshev(a, a), 0);
        assert_eq!(chebyshev(a, TileId::new(13, 8)), 3);
        assert_eq!(
            chebyshev(TileId::new(0, 0), TileId::new(GRID_SIZE - 1, 0)),
            GRID_SIZE - 1
        );
    }

    #[test]
    fn neighborhood_sizes() {
        let interior = TileId::new(1000, 1000);
        assert_eq!(neighborhood(interior, 1).len(), 9);
        assert_eq!(neighborhood(TileId::new(0, 0), 1).len(), 4);
        assert_eq!(neighborhood(interior, 12).len(), 625);
    }

    #[test]
    fn neighborhood_order_is_raster() {
        let s = TileId::new(5, 5);
        let n = neighborhood(s, 1);
        assert_eq!(n[0], TileId::new(4, 4));
        assert_eq!(n[4], s);
        assert_eq!(n[8], TileId::new(6, 6));
    }

    #[test]
    fn morton_matches_quadkey_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut tiles: Vec<TileId> = (0..500)
            .map(|_| TileId::new(rng.gen_range(0..GRID_SIZE), rng.gen_range(0..GRID_SIZE)))
            .collect();
        let mut by_qk = tiles.clone();
        by_qk.sort_by_key(|t| tile_to_quadkey(*t));
        tiles.sort_by_key(|t| t.morton());
        assert_eq!(tiles, by_qk);
    }

    #[test]
    fn tile_order_is_row_major() {
        assert!(TileId::new(5, 1) < TileId::new(0, 2));
        assert!(TileId::new(1, 1) < TileId::new(2, 1));
    }

    proptest! {
        #[test]
        fn center_roundtrip(x in 0..GRID_SIZE, y in 0..GRID_SIZE) {
            let t = TileId::new(x, y);
            let (lat, lon) = t.center_latlon();
            prop_assert_eq!(latlon_to_tile(lat, lon).unwrap(), t);
        }

        #[test]
        fn quadkey_bijection(x in 0..GRID_SIZE, y in 0..GRID_SIZE) {
            let t = TileId::new(x, y);
            prop_assert_eq!(quadkey_to_tile(&tile_to_quadkey(t)).unwrap(), t);
        }

        #[test]
        fn lon_monotone_in_x(lon1 in -180.0..179.99f64, lon2 in -180.0..179.99f64) {
            let (lo, hi) = if lon1 <= lon2 { (lon1, lon2) } else { (lon2, lon1) };
            let a = latlon_to_tile(0.0, lo).unwrap();
            let b = latlon_to_tile(0.0, hi).unwrap();
            prop_assert!(a.x <= b.x);
        }

        #[test]
        fn lat_monotone_in_y(lat1 in -85.0..85.0f64, lat2 in -85.0..85.0f64) {
            let (lo, hi) = if lat1 <= lat2 { (lat1, lat2) } else { (lat2, lat1) };
            let a = latlon_to_tile(lo, 0.0).unwrap();
            let b = latlon_to_tile(hi, 0.0).unwrap();
            // y grows southward: higher latitude, smaller or equal y.
            prop_assert!(b.y <= a.y);
        }

        #[test]
        fn neighborhood_contains_center_and_symmetric(
            x in 100..1000u32, y in 100..1000u32, r in 1..6u32,
        ) {
            let s = TileId::new(x, y);
            let n = neighborhood(s, r);
            prop_assert!(n.contains(&s));
            for t in &n {
                prop_assert!(neighborhood(*t, r).contains(&s));
            }
        }
    }

    #[test]
    fn roundtrip_extreme_rows() {
        // Tiles on the clamp boundary still roundtrip through their center.
        for t in [
            TileId::new(0, 0),
            TileId::new(GRID_SIZE - 1, GRID_SIZE - 1),
            TileId::new(8_388_608, 0),
            TileId::new(0, GRID_SIZE - 1),
        ] {
            let (lat, lon) = t.center_latlon();
            assert_eq!(latlon_to_tile(lat, lon).unwrap(), t);
        }
    }

    #[test]
    fn random_tile_roundtrip_bulk() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5_000 {
            let t = TileId::new(rng.gen_range(0..GRID_SIZE), rng.gen_range(0..GRID_SIZE));
            let (lat, lon) = t.center_latlon();
            assert_eq!(latlon_to_tile(lat, lon).unwrap(), t);
        }
    }
}
