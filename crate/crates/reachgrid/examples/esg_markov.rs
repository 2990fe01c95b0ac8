//! The Earth Surface Graph as a Markov chain: build it from tile paths,
//! normalize to a transition matrix and verify n-step composition.
//!
//!     cargo run --release --example esg_markov

use reachgrid::esg::{build_esg, transition_matrix, SparseMatrix};
use reachgrid::tilegrid::TileId;
use reachgrid::trajectory::{TilePath, TileVisit};

fn path(id: &str, tiles: &[(u32, u32)]) -> TilePath {
    TilePath {
        id: id.into(),
        visits: tiles
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TileVisit {
                tile: TileId::new(x, y),
                timestamp: i as i64 * 5,
                cum_mm: i as u64 * 2_000,
            })
            .collect(),
    }
}

fn main() -> reachgrid::Result<()> {
    // A small street loop plus a side spur, traced a few times.
    let paths = vec![
        path("a#0000", &[(10, 10), (11, 10), (12, 10), (12, 11), (11, 11), (10, 10)]),
        path("b#0000", &[(10, 10), (11, 10), (12, 10), (12, 11)]),
        path("c#0000", &[(12, 10), (13, 10)]),
        path("d#0000", &[(11, 10), (12, 10), (12, 11), (11, 11)]),
    ];
    let g = build_esg(&paths);
    println!("graph: {} nodes, {} edges", g.node_count(), g.edge_count());

    let mut dump = Vec::new();
    g.write_dump(&mut dump)?;
    println!("edge dump ({} bytes), first lines:", dump.len());
    for line in String::from_utf8_lossy(&dump).lines().take(3) {
        println!("  {line}");
    }

    let view = transition_matrix(&g)?;
    let from = TileId::new(12, 10);
    println!("\nout-transitions of {from}:");
    for to in [TileId::new(12, 11), TileId::new(13, 10)] {
        println!("  -> {to}: p = {:.3}", view.prob(from, to));
    }

    // n-step probabilities compose: P^(m+n) = P^m P^n.
    let p2 = view.n_step(2)?;
    let p3 = view.n_step(3)?;
    let p5 = view.n_step(5)?;
    let composed = p2.multiply(&p3, usize::MAX)?;
    let diff = SparseMatrix::max_abs_diff(&p5, &composed);
    println!("\n|P^5 - P^2 P^3|_inf = {diff:.2e}");
    assert!(diff <= 1e-10);

    for (i, s) in p5.row_sums().iter().enumerate() {
        assert!((s - 1.0).abs() <= 1e-9, "row {i} sums to {s}");
    }
    println!("all rows of P^5 sum to 1 within 1e-9");
    Ok(())
}
