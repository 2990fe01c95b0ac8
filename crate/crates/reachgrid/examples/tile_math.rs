//! Zoom-24 grid arithmetic: coordinate conversion, quadkeys,
//! neighborhoods and Chebyshev distances.
//!
//!     cargo run --release --example tile_math

use reachgrid::tilegrid::{
    chebyshev, latlon_to_tile, neighborhood, quadkey_to_tile, tile_to_quadkey, TileId,
};

fn main() {
    // A few landmarks.
    for (name, lat, lon) in [
        ("equator/prime meridian", 0.0, 0.0),
        ("Beijing (Forbidden City)", 39.9163, 116.3972),
        ("NYC (Times Square)", 40.7580, -73.9855),
    ] {
        let tile = latlon_to_tile(lat, lon).unwrap();
        let qk = tile_to_quadkey(tile);
        println!("{name:26} -> tile {tile}  quadkey {qk}");
        assert_eq!(quadkey_to_tile(&qk).unwrap(), tile);
    }

    // Out-of-range coordinates are rejected, not clamped.
    match latlon_to_tile(85.06, 0.0) {
        Err(e) => println!("\nlat 85.06 rejected as expected: {e}"),
        Ok(t) => unreachable!("{t}"),
    }

    // A tile's neighborhood is the square Chebyshev window around it.
    let s = latlon_to_tile(39.9163, 116.3972).unwrap();
    let hood = neighborhood(s, 2);
    println!("\nradius-2 neighborhood of {s}: {} tiles", hood.len());
    for t in &hood {
        assert!(chebyshev(s, *t) <= 2);
    }

    // Corner tiles get clipped windows.
    let corner = TileId::new(0, 0);
    println!(
        "radius-2 neighborhood of the grid corner: {} tiles (clipped from 25)",
        neighborhood(corner, 2).len()
    );

    // Tile centers roundtrip exactly.
    let (lat, lon) = s.center_latlon();
    assert_eq!(latlon_to_tile(lat, lon).unwrap(), s);
    println!("\ncenter of {s} is ({lat:.7}, {lon:.7}); roundtrips exactly");
}
