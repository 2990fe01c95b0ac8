//! Earth Surface Graph: observed tiles as nodes, observed consecutive
//! tile transitions as weighted edges, with a row-stochastic Markov view.
//!
//! Edge counts are exact 64-bit integers, so building the graph from path
//! partitions in any order (or merging partial graphs) yields the same
//! result bit for bit.

use crate::error::{Error, Result};
use crate::tilegrid::{self, TileId};
use crate::trajectory::TilePath;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

/// Default cap on nonzeros produced by n-step composition.
pub const DEFAULT_NNZ_CAP: usize = 50_000_000;

/// The inferred graph: every observed tile is a node, every observed
/// consecutive visit pair an edge with its occurrence count.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Esg {
    nodes: BTreeSet<TileId>,
    edges: BTreeMap<(TileId, TileId), u64>,
    out_counts: BTreeMap<TileId, u64>,
}

impl Esg {
    pub fn new() -> Esg {
        Esg::default()
    }

    /// Adds every consecutive visit pair of `path` as one edge observation.
    pub fn insert_path(&mut self, path: &TilePath) {
        for v in &path.visits {
            self.nodes.insert(v.tile);
        }
        for w in path.visits.windows(2) {
            self.insert_edge(w[0].tile, w[1].tile, 1);
        }
    }

    pub fn insert_edge(&mut self, u: TileId, v: TileId, count: u64) {
        self.nodes.insert(u);
        self.nodes.insert(v);
        *self.edges.entry((u, v)).or_insert(0) += count;
        *self.out_counts.entry(u).or_insert(0) += count;
    }

    /// Commutative merge of partial graphs; integer counts make the result
    /// independent of merge order and partitioning.
    pub fn merge(&mut self, other: Esg) {
        self.nodes.extend(other.nodes);
        for ((u, v), c) in other.edges {
            *self.edges.entry((u, v)).or_insert(0) += c;
            *self.out_counts.entry(u).or_insert(0) += c;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn count(&self, u: TileId, v: TileId) -> u64 {
        self.edges.get(&(u, v)).copied().unwrap_or(0)
    }

    pub fn out_count(&self, u: TileId) -> u64 {
        self.out_counts.get(&u).copied().unwrap_or(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = TileId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (TileId, TileId, u64)> + '_ {
        self.edges.iter().map(|(&(u, v), &c)| (u, v, c))
    }

    /// Edge dump: `u_quadkey<TAB>v_quadkey<TAB>count`, sorted
    /// lexicographically by quadkey pair. Isolated nodes are not persisted.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut rows: Vec<(String, String, u64)> = self
            .edges
            .iter()
            .map(|(&(u, v), &c)| (tilegrid::tile_to_quadkey(u), tilegrid::tile_to_quadkey(v), c))
            .collect();
        rows.sort();
        for (u, v, c) in rows {
            writeln!(w, "{u}\t{v}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Esg> {
        let mut g = Esg::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut f = line.split('\t');
            let bad = || Error::Parameter(format!("graph dump line {}: malformed", lineno + 1));
            let u = tilegrid::quadkey_to_tile(f.next().ok_or_else(bad)?)?;
            let v = tilegrid::quadkey_to_tile(f.next().ok_or_else(bad)?)?;
            let c: u64 = f.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            g.insert_edge(u, v, c);
        }
        Ok(g)
    }
}

/// Builds the graph from a stream of tile paths. Permutation-invariant.
pub fn build_esg<'a>(paths: impl IntoIterator<Item = &'a TilePath>) -> Esg {
    let mut g = Esg::new();
    for p in paths {
        g.insert_path(p);
    }
    g
}

/// Row-stochastic sparse view of an [`Esg`]. Nodes are indexed in `(y, x)`
/// order; nodes without outgoing edges are made self-absorbing so every
/// row sums to one.
#[derive(Debug, Clone)]
pub struct TransitionMatrixView {
    tiles: Vec<TileId>,
    index: BTreeMap<TileId, usize>,
    matrix: SparseMatrix,
}

impl TransitionMatrixView {
    pub fn n(&self) -> usize {
        self.tiles.len()
    }

    pub fn tiles(&self) -> &[TileId] {
        &self.tiles
    }

    pub fn index_of(&self, t: TileId) -> Option<usize> {
        self.index.get(&t).copied()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Transition probability between tiles, zero when no edge exists.
    pub fn prob(&self, u: TileId, v: TileId) -> f64 {
        match (self.index.get(&u), self.index.get(&v)) {
            (Some(&i), Some(&j)) => self.matrix.get(i, j),
            _ => 0.0,
        }
    }

    /// `P^n` by repeated sparse multiplication, with the default nonzero cap.
    pub fn n_step(&self, n: u32) -> Result<SparseMatrix> {
        self.n_step_with_cap(n, DEFAULT_NNZ_CAP)
    }

    pub fn n_step_with_cap(&self, n: u32, cap: usize) -> Result<SparseMatrix> {
        if n < 1 {
            return Err(Error::Parameter("n_step requires n >= 1".into()));
        }
        let mut acc = self.matrix.clone();
        for _ in 1..n {
            acc = acc.multiply(&self.matrix, cap)?;
        }
        Ok(acc)
    }
}

/// Builds the row-normalized transition view. Errors on an empty graph.
pub fn transition_matrix(g: &Esg) -> Result<TransitionMatrixView> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let tiles: Vec<TileId> = g.nodes().collect(); // BTreeSet yields (y, x) order
    let index: BTreeMap<TileId, usize> = tiles.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tiles.len()];
    for (u, v, c) in g.edges() {
        let total = g.out_count(u);
        rows[index[&u]].push((index[&v], c as f64 / total as f64));
    }
    for (i, row) in rows.iter_mut().enumerate() {
        if row.is_empty() {
            row.push((i, 1.0)); // sink: self-absorbing
        } else {
            row.sort_by_key(|&(j, _)| j);
        }
    }
    Ok(TransitionMatrixView {
        tiles,
        index,
        matrix: SparseMatrix {
            n: g.node_count(),
            rows,
        },
    })
}

/// Square sparse matrix in row-major adjacency form; each row is sorted by
/// column index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    /// Gustavson sparse row-times-matrix product. Accumulation order is
    /// fixed by the sorted row layouts, so the result is reproducible.
    pub fn multiply(&self, rhs: &SparseMatrix, cap: usize) -> Result<SparseMatrix> {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let mut scratch = vec![0.0f64; self.n];
        let mut touched: Vec<usize> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.n);
        let mut nnz = 0usize;
        for row in &self.rows {
            for &(k, a) in row {
                for &(j, b) in &rhs.rows[k] {
                    if scratch[j] == 0.0 {
                        touched.push(j);
                    }
                    scratch[j] += a * b;
                }
            }
            touched.sort_unstable();
            let mut out = Vec::with_capacity(touched.len());
            for &j in &touched {
                if scratch[j] != 0.0 {
                    out.push((j, scratch[j]));
                }
                scratch[j] = 0.0;
            }
            touched.clear();
            nnz += out.len();
            if nnz > cap {
                return Err(Error::NnzBudgetExceeded { nonzeros: nnz, cap });
            }
            rows.push(out);
        }
        Ok(SparseMatrix { n: self.n, rows })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).sum())
            .collect()
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
        assert_eq!(a.n, b.n);
        let mut worst = 0.0f64;
        for i in 0..a.n {
            let mut cols: Vec<usize> = a.rows[i].iter().map(|&(c, _)| c).collect();
            cols.extend(b.rows[i].iter().map(|&(c, _)| c));
            cols.sort_unstable();
            cols.dedup();
            for j in cols {
                worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
            }
        }
        worst
    }
}
