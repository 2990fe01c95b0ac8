//! # reachgrid
//!
//! Self-supervised location representations from raw GPS trajectories,
//! in two stages on the zoom-24 Web-Mercator grid:
//!
//! 1. **Summaries** — trajectories become Markovian tile paths on an
//!    inferred Earth Surface Graph; a deterministic, data-parallel pass
//!    turns every observed transition within a Chebyshev neighborhood
//!    into per-tile image-like tensors of emission/absorption statistics
//!    (frequency, distance traveled, time taken).
//! 2. **Embeddings** — a contractive fully-convolutional autoencoder is
//!    trained to reconstruct the summaries; its encoder compresses each
//!    tile to a `d_R`-dimensional vector, exported as dense rasters for
//!    downstream models.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```text
//! cargo run --release --example tile_math        # grid arithmetic
//! cargo run --release --example ingest_tdrive    # parse + segment + dump
//! cargo run --release --example esg_markov       # graph + n-step checks
//! cargo run --release --example summarize_stage1 # summaries end to end
//! cargo run --release --example train_cae        # autoencoder training
//! cargo run --release --example embed_project    # embeddings + raster + PCA
//! cargo run --release --example strong_scaling   # worker-count benchmark
//! ```
//!
//! The same capabilities are wired into one thin binary (`reachgrid`)
//! with subcommands `ingest`, `summarize`, `train`, `embed`, `export`,
//! `project`, `bench`; see the crate README.
//!
//! Determinism is a contract throughout: integer accumulators with
//! commutative merges in stage 1 (bit-identical archives for any worker
//! count), a fully seeded single-threaded trainer in stage 2.

pub mod cae;
pub mod cli;
pub mod error;
pub mod esg;
pub mod fixture;
pub mod hash;
pub mod pipeline;
pub mod store;
pub mod summary;
pub mod tilegrid;
pub mod trajectory;

pub use error::{Error, Result};
pub use tilegrid::{TileId, TileOffset};
